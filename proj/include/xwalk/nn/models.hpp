#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "xwalk/nn/tape.hpp"

namespace xwalk::nn {

enum class Architecture { Feedforward, Lstm, Gru, Transformer };

std::string_view to_string(Architecture a);
std::optional<Architecture> architecture_from_string(std::string_view s);

struct ModelConfig {
  Architecture architecture = Architecture::Gru;
  int window = 10;
  int batch_size = 30;
  double learning_rate = 0.00015;
  int iterations = 10000;
  int log_every = 100;
  std::uint64_t seed = 0;

  std::vector<int> hidden_layers = {256, 512, 256, 128, 64};  // feedforward
  int recurrent_hidden = 32;
  int recurrent_layers = 2;
  int embed_dim = 32;
  int heads = 4;
  int encoder_layers = 3;
  int decoder_layers = 3;
  int ffn_dim = 64;
  bool positional_encoding = true;

  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  /// Throws ConfigValidationError on non-positive sizes.
  void validate() const;
};

class ParameterStore {
 public:
  /// Uniform in [-bound, bound]; bound 0 gives zeros.
  Parameter& add(std::string name, int rows, int cols, double bound, std::mt19937_64& rng);
  Parameter& add_filled(std::string name, int rows, int cols, double value);

  std::vector<std::unique_ptr<Parameter>>& all() { return params_; }
  const std::vector<std::unique_ptr<Parameter>>& all() const { return params_; }
  std::size_t count() const;
  void zero_grad();

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

/// Maps a batch of flattened windows (B x W*D, already standardized) to B x 1
/// arrival predictions.
class Regressor {
 public:
  Regressor(ModelConfig config, int input_dim) : config_(std::move(config)), input_dim_(input_dim) {}
  virtual ~Regressor() = default;
  Regressor(const Regressor&) = delete;
  Regressor& operator=(const Regressor&) = delete;

  virtual Var forward(Tape& tape, const Matrix& batch) = 0;

  const ModelConfig& config() const { return config_; }
  int input_dim() const { return input_dim_; }
  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }

 protected:
  void check_batch(const Matrix& batch) const;

  ModelConfig config_;
  int input_dim_;
  ParameterStore params_;
};

class Feedforward final : public Regressor {
 public:
  Feedforward(const ModelConfig& config, int input_dim);
  Var forward(Tape& tape, const Matrix& batch) override;

 private:
  std::vector<std::pair<Parameter*, Parameter*>> layers_;
};

class Lstm final : public Regressor {
 public:
  Lstm(const ModelConfig& config, int input_dim);
  Var forward(Tape& tape, const Matrix& batch) override;

 private:
  struct Layer {
    Parameter* w_in;
    Parameter* w_hidden;
    Parameter* bias;
  };
  std::vector<Layer> layers_;
  Parameter* head_w_;
  Parameter* head_b_;
};

class Gru final : public Regressor {
 public:
  Gru(const ModelConfig& config, int input_dim);
  Var forward(Tape& tape, const Matrix& batch) override;

 private:
  struct Layer {
    Parameter* w_in;       // in x 3H: reset, update, candidate
    Parameter* w_gates;    // H x 2H: reset, update
    Parameter* w_cand;     // H x H, applied to reset * h
    Parameter* bias;       // 1 x 3H
  };
  std::vector<Layer> layers_;
  Parameter* head_w_;
  Parameter* head_b_;
};

/// Post-norm encoder over the window plus a decoder that reads a single
/// learned query token.
class Transformer final : public Regressor {
 public:
  Transformer(const ModelConfig& config, int input_dim);
  Var forward(Tape& tape, const Matrix& batch) override;
  /// Encoder output, row b * W + t for sequence b, step t.
  Var encode(Tape& tape, const Matrix& batch);

 private:
  struct Linear {
    Parameter* w;
    Parameter* b;
  };
  struct Norm {
    Parameter* gain;
    Parameter* bias;
  };
  struct Attention {
    Linear q, k, v, o;
  };
  struct EncoderLayer {
    Attention self;
    Norm norm1;
    Linear ff1, ff2;
    Norm norm2;
  };
  struct DecoderLayer {
    Attention self;
    Norm norm1;
    Attention cross;
    Norm norm2;
    Linear ff1, ff2;
    Norm norm3;
  };

  Linear make_linear(const std::string& name, int in, int out, std::mt19937_64& rng);
  Norm make_norm(const std::string& name, int dim);
  Attention make_attention(const std::string& name, std::mt19937_64& rng);
  Var linear(Tape& tape, Var x, const Linear& l);
  Var norm(Tape& tape, Var x, const Norm& n);
  Var attend(Tape& tape, Var query, Var memory, const Attention& a, int batch, int q_len, int kv_len);
  Var feedforward(Tape& tape, Var x, const Linear& a, const Linear& b);

  Linear input_;
  std::vector<EncoderLayer> encoder_;
  Parameter* query_;
  std::vector<DecoderLayer> decoder_;
  Linear head_;
};

/// Builds and initializes a network from config.seed.
std::unique_ptr<Regressor> make_regressor(const ModelConfig& config, int input_dim);

/// Closed-form parameter totals for the layer sizes in `config`.
std::size_t expected_parameter_count(const ModelConfig& config, int input_dim);

/// Standard sinusoidal table, len x dim.
Matrix sinusoidal_encoding(int len, int dim);

}  // namespace xwalk::nn
