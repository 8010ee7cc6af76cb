#include "xwalk/nn/tape.hpp"

#include <cmath>
#include <memory>

#include "xwalk/error.hpp"

namespace xwalk::nn {

namespace {

void shape_check(bool ok, const char* op) {
  if (!ok) throw Error(ErrorKind::DimensionMismatch, std::string("shape mismatch in ") + op);
}

}  // namespace

Var Tape::push(Matrix value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = record_ && requires_grad;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(Matrix value) { return push(std::move(value), false); }

Var Tape::param(Parameter& p) {
  Node n;
  n.param = &p;
  n.requires_grad = record_;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

const Matrix& Tape::value(Var v) const {
  const Node& n = node(v);
  return n.param ? n.param->value : n.value;
}

Matrix& Tape::grad(Var v) {
  Node& n = node(v);
  if (n.grad.size() == 0) {
    const Matrix& val = value(v);
    n.grad.setZero(val.rows(), val.cols());
  }
  return n.grad;
}

void Tape::backward(Var loss) {
  if (!record_) throw Error(ErrorKind::InvalidArgument, "backward on a non-recording tape");
  if (value(loss).size() != 1) throw Error(ErrorKind::DimensionMismatch, "backward needs a scalar loss");
  for (auto& n : nodes_) n.grad.resize(0, 0);
  grad(loss)(0, 0) = 1.0;
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.grad.size() == 0 || !n.requires_grad) continue;
    if (n.backward) n.backward();
    if (n.param) {
      if (n.param->grad.rows() != n.grad.rows() || n.param->grad.cols() != n.grad.cols()) n.param->zero_grad();
      n.param->grad += n.grad;
    }
  }
}

Var Tape::matmul(Var a, Var b) {
  shape_check(value(a).cols() == value(b).rows(), "matmul");
  Var out = push(value(a) * value(b), needs(a) || needs(b));
  if (node(out).requires_grad) {
    node(out).backward = [this, a, b, out] {
      const Matrix& g = node(out).grad;
      if (needs(a)) grad(a).noalias() += g * value(b).transpose();
      if (needs(b)) grad(b).noalias() += value(a).transpose() * g;
    };
  }
  return out;
}

Var Tape::add(Var a, Var b) {
  shape_check(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(), "add");
  Var out = push(value(a) + value(b), needs(a) || needs(b));
  if (node(out).requires_grad) {
    node(out).backward = [this, a, b, out] {
      const Matrix& g = node(out).grad;
      if (needs(a)) grad(a) += g;
      if (needs(b)) grad(b) += g;
    };
  }
  return out;
}

Var Tape::sub(Var a, Var b) {
  shape_check(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(), "sub");
  Var out = push(value(a) - value(b), needs(a) || needs(b));
  if (node(out).requires_grad) {
    node(out).backward = [this, a, b, out] {
      const Matrix& g = node(out).grad;
      if (needs(a)) grad(a) += g;
      if (needs(b)) grad(b) -= g;
    };
  }
  return out;
}

Var Tape::mul(Var a, Var b) {
  shape_check(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(), "mul");
  Var out = push(value(a).cwiseProduct(value(b)), needs(a) || needs(b));
  if (node(out).requires_grad) {
    node(out).backward = [this, a, b, out] {
      const Matrix& g = node(out).grad;
      if (needs(a)) grad(a) += g.cwiseProduct(value(b));
      if (needs(b)) grad(b) += g.cwiseProduct(value(a));
    };
  }
  return out;
}

Var Tape::add_row(Var a, Var row) {
  shape_check(value(row).rows() == 1 && value(row).cols() == value(a).cols(), "add_row");
  Matrix v = value(a);
  v.rowwise() += value(row).row(0);
  Var out = push(std::move(v), needs(a) || needs(row));
  if (node(out).requires_grad) {
    node(out).backward = [this, a, row, out] {
      const Matrix& g = node(out).grad;
      if (needs(a)) grad(a) += g;
      if (needs(row)) grad(row) += g.colwise().sum();
    };
  }
  return out;
}

Var Tape::affine(Var a, double scale, double shift) {
  Var out = push((value(a) * scale).array() + shift, needs(a));
  if (node(out).requires_grad) {
    node(out).backward = [this, a, out, scale] { grad(a) += scale * node(out).grad; };
  }
  return out;
}

Var Tape::sigmoid(Var a) {
  Matrix v = value(a).unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
  Var out = push(std::move(v), needs(a));
  if (node(out).requires_grad) {
    node(out).backward = [this, a, out] {
      const Matrix& y = node(out).value;
      grad(a).array() += node(out).grad.array() * y.array() * (1.0 - y.array());
    };
  }
  return out;
}

Var Tape::tanh(Var a) {
  Var out = push(value(a).array().tanh().matrix(), needs(a));
  if (node(out).requires_grad) {
    node(out).backward = [this, a, out] {
      const Matrix& y = node(out).value;
      grad(a).array() += node(out).grad.array() * (1.0 - y.array().square());
    };
  }
  return out;
}

Var Tape::relu(Var a) {
  Var out = push(value(a).cwiseMax(0.0), needs(a));
  if (node(out).requires_grad) {
    node(out).backward = [this, a, out] {
      grad(a).array() += (value(a).array() > 0.0).select(node(out).grad.array(), 0.0);
    };
  }
  return out;
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
  shape_check(!parts.empty(), "concat_cols");
  const auto rows = value(parts.front()).rows();
  Eigen::Index cols = 0;
  bool req = false;
  for (Var p : parts) {
    shape_check(value(p).rows() == rows, "concat_cols");
    cols += value(p).cols();
    req = req || needs(p);
  }
  Matrix v(rows, cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    v.middleCols(at, value(p).cols()) = value(p);
    at += value(p).cols();
  }
  Var out = push(std::move(v), req);
  if (node(out).requires_grad) {
    node(out).backward = [this, parts, out] {
      Eigen::Index at = 0;
      for (Var p : parts) {
        const auto c = value(p).cols();
        if (needs(p)) grad(p) += node(out).grad.middleCols(at, c);
        at += c;
      }
    };
  }
  return out;
}

Var Tape::slice_cols(Var a, int start, int count) {
  shape_check(start >= 0 && count > 0 && start + count <= value(a).cols(), "slice_cols");
  Var out = push(value(a).middleCols(start, count), needs(a));
  if (node(out).requires_grad) {
    node(out).backward = [this, a, out, start, count] { grad(a).middleCols(start, count) += node(out).grad; };
  }
  return out;
}

Var Tape::slice_rows(Var a, int start, int count) {
  shape_check(start >= 0 && count > 0 && start + count <= value(a).rows(), "slice_rows");
  Var out = push(value(a).middleRows(start, count), needs(a));
  if (node(out).requires_grad) {
    node(out).backward = [this, a, out, start, count] { grad(a).middleRows(start, count) += node(out).grad; };
  }
  return out;
}

Var Tape::strided_rows(Var a, int stride, int offset) {
  const auto rows = value(a).rows();
  shape_check(stride > 0 && offset >= 0 && offset < stride && rows % stride == 0, "strided_rows");
  const auto n = rows / stride;
  Matrix v(n, value(a).cols());
  for (Eigen::Index i = 0; i < n; ++i) v.row(i) = value(a).row(i * stride + offset);
  Var out = push(std::move(v), needs(a));
  if (node(out).requires_grad) {
    node(out).backward = [this, a, out, stride, offset, n] {
      Matrix& ga = grad(a);
      for (Eigen::Index i = 0; i < n; ++i) ga.row(i * stride + offset) += node(out).grad.row(i);
    };
  }
  return out;
}

Var Tape::repeat_rows(Var a, int times) {
  shape_check(value(a).rows() == 1 && times > 0, "repeat_rows");
  Var out = push(value(a).replicate(times, 1), needs(a));
  if (node(out).requires_grad) {
    node(out).backward = [this, a, out] { grad(a) += node(out).grad.colwise().sum(); };
  }
  return out;
}

Var Tape::layer_norm(Var a, Var gain, Var bias, double eps) {
  const Matrix& x = value(a);
  const auto d = x.cols();
  shape_check(value(gain).rows() == 1 && value(gain).cols() == d && value(bias).rows() == 1 &&
                  value(bias).cols() == d,
              "layer_norm");
  auto xhat = std::make_shared<Matrix>(x.rows(), d);
  auto inv_std = std::make_shared<Eigen::VectorXd>(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mu = x.row(r).mean();
    const double var = (x.row(r).array() - mu).square().mean();
    (*inv_std)[r] = 1.0 / std::sqrt(var + eps);
    xhat->row(r) = (x.row(r).array() - mu) * (*inv_std)[r];
  }
  Matrix y = xhat->array().rowwise() * value(gain).row(0).array();
  y.rowwise() += value(bias).row(0);
  Var out = push(std::move(y), needs(a) || needs(gain) || needs(bias));
  if (node(out).requires_grad) {
    node(out).backward = [this, a, gain, bias, out, xhat, inv_std] {
      const Matrix& g = node(out).grad;
      if (needs(gain)) grad(gain) += g.cwiseProduct(*xhat).colwise().sum();
      if (needs(bias)) grad(bias) += g.colwise().sum();
      if (needs(a)) {
        const Matrix dxhat = g.array().rowwise() * value(gain).row(0).array();
        Matrix& ga = grad(a);
        for (Eigen::Index r = 0; r < g.rows(); ++r) {
          const double m1 = dxhat.row(r).mean();
          const double m2 = dxhat.row(r).cwiseProduct(xhat->row(r)).mean();
          ga.row(r).array() += (*inv_std)[r] * (dxhat.row(r).array() - m1 - xhat->row(r).array() * m2);
        }
      }
    };
  }
  return out;
}

Var Tape::attention(Var q, Var k, Var v, int batch, int q_len, int kv_len, int heads) {
  const Matrix& Q = value(q);
  const Matrix& K = value(k);
  const Matrix& V = value(v);
  const auto e = Q.cols();
  shape_check(heads > 0 && e % heads == 0 && K.cols() == e && V.cols() == e, "attention");
  shape_check(Q.rows() == static_cast<Eigen::Index>(batch) * q_len &&
                  K.rows() == static_cast<Eigen::Index>(batch) * kv_len && V.rows() == K.rows(),
              "attention");
  const int dk = static_cast<int>(e) / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  auto probs = std::make_shared<std::vector<Matrix>>(static_cast<std::size_t>(batch) * heads);
  Matrix o(Q.rows(), e);
  for (int b = 0; b < batch; ++b) {
    for (int h = 0; h < heads; ++h) {
      const auto qb = Q.block(b * q_len, h * dk, q_len, dk);
      const auto kb = K.block(b * kv_len, h * dk, kv_len, dk);
      const auto vb = V.block(b * kv_len, h * dk, kv_len, dk);
      Matrix s = (qb * kb.transpose()) * scale;
      for (Eigen::Index r = 0; r < s.rows(); ++r) {
        const double mx = s.row(r).maxCoeff();
        s.row(r) = (s.row(r).array() - mx).exp();
        s.row(r) /= s.row(r).sum();
      }
      o.block(b * q_len, h * dk, q_len, dk).noalias() = s * vb;
      (*probs)[static_cast<std::size_t>(b * heads + h)] = std::move(s);
    }
  }
  Var out = push(std::move(o), needs(q) || needs(k) || needs(v));
  if (node(out).requires_grad) {
    node(out).backward = [this, q, k, v, out, probs, batch, q_len, kv_len, heads, dk, scale] {
      const Matrix& g = node(out).grad;
      Matrix* gq = needs(q) ? &grad(q) : nullptr;
      Matrix* gk = needs(k) ? &grad(k) : nullptr;
      Matrix* gv = needs(v) ? &grad(v) : nullptr;
      for (int b = 0; b < batch; ++b) {
        for (int h = 0; h < heads; ++h) {
          const Matrix& p = (*probs)[static_cast<std::size_t>(b * heads + h)];
          const auto go = g.block(b * q_len, h * dk, q_len, dk);
          const auto qb = value(q).block(b * q_len, h * dk, q_len, dk);
          const auto kb = value(k).block(b * kv_len, h * dk, kv_len, dk);
          const auto vb = value(v).block(b * kv_len, h * dk, kv_len, dk);
          if (gv) gv->block(b * kv_len, h * dk, kv_len, dk).noalias() += p.transpose() * go;
          if (!gq && !gk) continue;
          const Matrix dp = go * vb.transpose();
          Matrix ds = p.cwiseProduct(dp);
          const Eigen::VectorXd rows = ds.rowwise().sum();
          ds -= p.cwiseProduct(rows.replicate(1, p.cols()));
          ds *= scale;
          if (gq) gq->block(b * q_len, h * dk, q_len, dk).noalias() += ds * kb;
          if (gk) gk->block(b * kv_len, h * dk, kv_len, dk).noalias() += ds.transpose() * qb;
        }
      }
    };
  }
  return out;
}

Var Tape::mse(Var pred, const Matrix& target) {
  shape_check(value(pred).rows() == target.rows() && value(pred).cols() == target.cols() && target.size() > 0, "mse");
  auto diff = std::make_shared<Matrix>(value(pred) - target);
  Matrix v(1, 1);
  v(0, 0) = diff->squaredNorm() / static_cast<double>(diff->size());
  Var out = push(std::move(v), needs(pred));
  if (node(out).requires_grad) {
    node(out).backward = [this, pred, out, diff] {
      grad(pred) += (2.0 * node(out).grad(0, 0) / static_cast<double>(diff->size())) * *diff;
    };
  }
  return out;
}

}  // namespace xwalk::nn
