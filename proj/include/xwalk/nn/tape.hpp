#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace xwalk::nn {

using Matrix = Eigen::MatrixXd;

/// Trainable tensor. `grad` accumulates across backward passes until zeroed.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

/// Handle into a Tape.
struct Var {
  int id = -1;
};

/// Reverse-mode autodiff over dense matrices. Nodes are appended in
/// evaluation order; backward() walks them in reverse. A tape built with
/// record=false only evaluates, which keeps inference cheap.
class Tape {
 public:
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var param(Parameter& p);

  const Matrix& value(Var v) const;
  std::size_t size() const { return nodes_.size(); }

  /// Seeds d(loss)/d(loss) = 1 and adds the result into every Parameter's grad.
  void backward(Var loss);

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);                          // elementwise
  Var add_row(Var a, Var row);                    // broadcast a 1xN row over a's rows
  Var affine(Var a, double scale, double shift);  // scale * a + shift
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var relu(Var a);
  Var concat_cols(const std::vector<Var>& parts);
  Var slice_cols(Var a, int start, int count);
  Var slice_rows(Var a, int start, int count);
  /// Rows offset, offset + stride, ... of a.
  Var strided_rows(Var a, int stride, int offset);
  /// Stacks a 1xN row `times` times.
  Var repeat_rows(Var a, int times);
  /// Per-row normalization with learned gain/bias rows (1xN each).
  Var layer_norm(Var a, Var gain, Var bias, double eps = 1e-5);
  /// Scaled dot-product attention over `batch` independent sequences. Row
  /// b * len + t of q/k/v belongs to sequence b, step t. Columns are split
  /// evenly across `heads`.
  Var attention(Var q, Var k, Var v, int batch, int q_len, int kv_len, int heads);
  /// Mean squared error against a constant target of the same shape (1x1).
  Var mse(Var pred, const Matrix& target);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Parameter* param = nullptr;
    bool requires_grad = false;
    std::function<void()> backward;
  };

  Var push(Matrix value, bool requires_grad);
  bool needs(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].requires_grad; }
  Node& node(Var v) { return nodes_[static_cast<std::size_t>(v.id)]; }
  const Node& node(Var v) const { return nodes_[static_cast<std::size_t>(v.id)]; }
  Matrix& grad(Var v);

  bool record_;
  std::vector<Node> nodes_;
};

}  // namespace xwalk::nn
