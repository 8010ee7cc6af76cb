#include "xwalk/nn/models.hpp"

#include <cmath>

#include "xwalk/error.hpp"

namespace xwalk::nn {

std::string_view to_string(Architecture a) {
  switch (a) {
    case Architecture::Feedforward: return "feedforward";
    case Architecture::Lstm: return "lstm";
    case Architecture::Gru: return "gru";
    case Architecture::Transformer: return "transformer";
  }
  return "?";
}

std::optional<Architecture> architecture_from_string(std::string_view s) {
  for (auto a : {Architecture::Feedforward, Architecture::Lstm, Architecture::Gru, Architecture::Transformer}) {
    if (s == to_string(a)) return a;
  }
  return std::nullopt;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::ConfigValidationError, what); };
  if (window < 2) fail("window must be at least 2");
  if (batch_size < 1) fail("batch_size must be positive");
  if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
  if (iterations < 0) fail("iterations must be non-negative");
  if (log_every < 1) fail("log_every must be positive");
  for (int h : hidden_layers) {
    if (h < 1) fail("hidden layer widths must be positive");
  }
  if (recurrent_hidden < 1 || recurrent_layers < 1) fail("recurrent sizes must be positive");
  if (embed_dim < 1 || heads < 1 || encoder_layers < 1 || decoder_layers < 1 || ffn_dim < 1) {
    fail("attention sizes must be positive");
  }
  if (embed_dim % heads != 0) fail("embed_dim must be divisible by heads");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0 && adam_eps > 0.0)) {
    fail("optimizer coefficients out of range");
  }
}

// ---------------------------------------------------------------------------

Parameter& ParameterStore::add(std::string name, int rows, int cols, double bound, std::mt19937_64& rng) {
  auto p = std::make_unique<Parameter>();
  p->name = std::move(name);
  p->value.resize(rows, cols);
  if (bound == 0.0) {
    p->value.setZero();
  } else {
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index c = 0; c < p->value.cols(); ++c) {
      for (Eigen::Index r = 0; r < p->value.rows(); ++r) p->value(r, c) = dist(rng);
    }
  }
  p->zero_grad();
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter& ParameterStore::add_filled(std::string name, int rows, int cols, double value) {
  auto p = std::make_unique<Parameter>();
  p->name = std::move(name);
  p->value = Matrix::Constant(rows, cols, value);
  p->zero_grad();
  params_.push_back(std::move(p));
  return *params_.back();
}

std::size_t ParameterStore::count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

void Regressor::check_batch(const Matrix& batch) const {
  if (batch.cols() != static_cast<Eigen::Index>(config_.window) * input_dim_) {
    throw Error(ErrorKind::DimensionMismatch, "batch has " + std::to_string(batch.cols()) + " columns, model expects " +
                                                  std::to_string(config_.window) + " x " + std::to_string(input_dim_));
  }
  if (batch.rows() == 0) throw Error(ErrorKind::DimensionMismatch, "empty batch");
}

namespace {

double fan_in_bound(int fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); }

}  // namespace

// ---------------------------------------------------------------------------

Feedforward::Feedforward(const ModelConfig& config, int input_dim) : Regressor(config, input_dim) {
  std::mt19937_64 rng(config.seed);
  int in = config.window * input_dim;
  std::vector<int> widths = config.hidden_layers;
  widths.push_back(1);
  for (std::size_t i = 0; i < widths.size(); ++i) {
    const std::string prefix = "ff" + std::to_string(i);
    Parameter& w = params_.add(prefix + ".w", in, widths[i], fan_in_bound(in), rng);
    Parameter& b = params_.add(prefix + ".b", 1, widths[i], 0.0, rng);
    layers_.emplace_back(&w, &b);
    in = widths[i];
  }
}

Var Feedforward::forward(Tape& tape, const Matrix& batch) {
  check_batch(batch);
  Var x = tape.constant(batch);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    x = tape.add_row(tape.matmul(x, tape.param(*layers_[i].first)), tape.param(*layers_[i].second));
    if (i + 1 < layers_.size()) x = tape.relu(x);
  }
  return x;
}

// ---------------------------------------------------------------------------

Lstm::Lstm(const ModelConfig& config, int input_dim) : Regressor(config, input_dim) {
  std::mt19937_64 rng(config.seed);
  const int h = config.recurrent_hidden;
  int in = input_dim;
  for (int l = 0; l < config.recurrent_layers; ++l) {
    const std::string prefix = "lstm" + std::to_string(l);
    Layer layer{};
    layer.w_in = &params_.add(prefix + ".w_in", in, 4 * h, fan_in_bound(h), rng);
    layer.w_hidden = &params_.add(prefix + ".w_hidden", h, 4 * h, fan_in_bound(h), rng);
    layer.bias = &params_.add(prefix + ".b", 1, 4 * h, 0.0, rng);
    layers_.push_back(layer);
    in = h;
  }
  head_w_ = &params_.add("head.w", h, 1, fan_in_bound(h), rng);
  head_b_ = &params_.add("head.b", 1, 1, 0.0, rng);
}

Var Lstm::forward(Tape& tape, const Matrix& batch) {
  check_batch(batch);
  const int h = config_.recurrent_hidden;
  const auto b = static_cast<int>(batch.rows());
  std::vector<Var> seq;
  for (int t = 0; t < config_.window; ++t) seq.push_back(tape.constant(batch.middleCols(t * input_dim_, input_dim_)));
  for (const auto& layer : layers_) {
    Var w_in = tape.param(*layer.w_in);
    Var w_hidden = tape.param(*layer.w_hidden);
    Var bias = tape.param(*layer.bias);
    Var hs = tape.constant(Matrix::Zero(b, h));
    Var cs = tape.constant(Matrix::Zero(b, h));
    for (auto& x : seq) {
      Var gates = tape.add_row(tape.add(tape.matmul(x, w_in), tape.matmul(hs, w_hidden)), bias);
      Var in_gate = tape.sigmoid(tape.slice_cols(gates, 0, h));
      Var forget = tape.sigmoid(tape.slice_cols(gates, h, h));
      Var cand = tape.tanh(tape.slice_cols(gates, 2 * h, h));
      Var out_gate = tape.sigmoid(tape.slice_cols(gates, 3 * h, h));
      cs = tape.add(tape.mul(forget, cs), tape.mul(in_gate, cand));
      hs = tape.mul(out_gate, tape.tanh(cs));
      x = hs;
    }
  }
  return tape.add_row(tape.matmul(seq.back(), tape.param(*head_w_)), tape.param(*head_b_));
}

// ---------------------------------------------------------------------------

Gru::Gru(const ModelConfig& config, int input_dim) : Regressor(config, input_dim) {
  std::mt19937_64 rng(config.seed);
  const int h = config.recurrent_hidden;
  int in = input_dim;
  for (int l = 0; l < config.recurrent_layers; ++l) {
    const std::string prefix = "gru" + std::to_string(l);
    Layer layer{};
    layer.w_in = &params_.add(prefix + ".w_in", in, 3 * h, fan_in_bound(h), rng);
    layer.w_gates = &params_.add(prefix + ".w_gates", h, 2 * h, fan_in_bound(h), rng);
    layer.w_cand = &params_.add(prefix + ".w_cand", h, h, fan_in_bound(h), rng);
    layer.bias = &params_.add(prefix + ".b", 1, 3 * h, 0.0, rng);
    layers_.push_back(layer);
    in = h;
  }
  head_w_ = &params_.add("head.w", h, 1, fan_in_bound(h), rng);
  head_b_ = &params_.add("head.b", 1, 1, 0.0, rng);
}

Var Gru::forward(Tape& tape, const Matrix& batch) {
  check_batch(batch);
  const int h = config_.recurrent_hidden;
  const auto b = static_cast<int>(batch.rows());
  std::vector<Var> seq;
  for (int t = 0; t < config_.window; ++t) seq.push_back(tape.constant(batch.middleCols(t * input_dim_, input_dim_)));
  for (const auto& layer : layers_) {
    Var w_in = tape.param(*layer.w_in);
    Var w_gates = tape.param(*layer.w_gates);
    Var w_cand = tape.param(*layer.w_cand);
    Var bias = tape.param(*layer.bias);
    Var hs = tape.constant(Matrix::Zero(b, h));
    for (auto& x : seq) {
      Var xin = tape.add_row(tape.matmul(x, w_in), bias);
      Var gates = tape.sigmoid(tape.add(tape.slice_cols(xin, 0, 2 * h), tape.matmul(hs, w_gates)));
      Var reset = tape.slice_cols(gates, 0, h);
      Var update = tape.slice_cols(gates, h, h);
      Var cand = tape.tanh(tape.add(tape.slice_cols(xin, 2 * h, h), tape.matmul(tape.mul(reset, hs), w_cand)));
      // h' = (1 - z) * n + z * h
      hs = tape.add(cand, tape.mul(update, tape.sub(hs, cand)));
      x = hs;
    }
  }
  return tape.add_row(tape.matmul(seq.back(), tape.param(*head_w_)), tape.param(*head_b_));
}

// ---------------------------------------------------------------------------

Matrix sinusoidal_encoding(int len, int dim) {
  Matrix pe(len, dim);
  for (int pos = 0; pos < len; ++pos) {
    for (int i = 0; i < dim; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / dim);
      pe(pos, i) = (i % 2 == 0) ? std::sin(pos * freq) : std::cos(pos * freq);
    }
  }
  return pe;
}

Transformer::Linear Transformer::make_linear(const std::string& name, int in, int out, std::mt19937_64& rng) {
  return {&params_.add(name + ".w", in, out, fan_in_bound(in), rng), &params_.add(name + ".b", 1, out, 0.0, rng)};
}

Transformer::Norm Transformer::make_norm(const std::string& name, int dim) {
  return {&params_.add_filled(name + ".gain", 1, dim, 1.0), &params_.add_filled(name + ".bias", 1, dim, 0.0)};
}

Transformer::Attention Transformer::make_attention(const std::string& name, std::mt19937_64& rng) {
  const int e = config_.embed_dim;
  return {make_linear(name + ".q", e, e, rng), make_linear(name + ".k", e, e, rng), make_linear(name + ".v", e, e, rng),
          make_linear(name + ".o", e, e, rng)};
}

Transformer::Transformer(const ModelConfig& config, int input_dim) : Regressor(config, input_dim) {
  std::mt19937_64 rng(config.seed);
  const int e = config.embed_dim;
  input_ = make_linear("input", input_dim, e, rng);
  for (int l = 0; l < config.encoder_layers; ++l) {
    const std::string p = "enc" + std::to_string(l);
    EncoderLayer layer;
    layer.self = make_attention(p + ".self", rng);
    layer.norm1 = make_norm(p + ".norm1", e);
    layer.ff1 = make_linear(p + ".ff1", e, config.ffn_dim, rng);
    layer.ff2 = make_linear(p + ".ff2", config.ffn_dim, e, rng);
    layer.norm2 = make_norm(p + ".norm2", e);
    encoder_.push_back(layer);
  }
  query_ = &params_.add("query", 1, e, 1.0, rng);
  for (int l = 0; l < config.decoder_layers; ++l) {
    const std::string p = "dec" + std::to_string(l);
    DecoderLayer layer;
    layer.self = make_attention(p + ".self", rng);
    layer.norm1 = make_norm(p + ".norm1", e);
    layer.cross = make_attention(p + ".cross", rng);
    layer.norm2 = make_norm(p + ".norm2", e);
    layer.ff1 = make_linear(p + ".ff1", e, config.ffn_dim, rng);
    layer.ff2 = make_linear(p + ".ff2", config.ffn_dim, e, rng);
    layer.norm3 = make_norm(p + ".norm3", e);
    decoder_.push_back(layer);
  }
  head_ = make_linear("head", e, 1, rng);
}

Var Transformer::linear(Tape& tape, Var x, const Linear& l) {
  return tape.add_row(tape.matmul(x, tape.param(*l.w)), tape.param(*l.b));
}

Var Transformer::norm(Tape& tape, Var x, const Norm& n) {
  return tape.layer_norm(x, tape.param(*n.gain), tape.param(*n.bias));
}

Var Transformer::attend(Tape& tape, Var query, Var memory, const Attention& a, int batch, int q_len, int kv_len) {
  Var q = linear(tape, query, a.q);
  Var k = linear(tape, memory, a.k);
  Var v = linear(tape, memory, a.v);
  return linear(tape, tape.attention(q, k, v, batch, q_len, kv_len, config_.heads), a.o);
}

Var Transformer::feedforward(Tape& tape, Var x, const Linear& a, const Linear& b) {
  return linear(tape, tape.relu(linear(tape, x, a)), b);
}

Var Transformer::encode(Tape& tape, const Matrix& batch) {
  check_batch(batch);
  const int w = config_.window;
  const auto b = static_cast<int>(batch.rows());
  Matrix tokens(static_cast<Eigen::Index>(b) * w, input_dim_);
  for (int i = 0; i < b; ++i) {
    for (int t = 0; t < w; ++t) tokens.row(i * w + t) = batch.block(i, t * input_dim_, 1, input_dim_);
  }
  Var x = linear(tape, tape.constant(std::move(tokens)), input_);
  if (config_.positional_encoding) x = tape.add(x, tape.constant(sinusoidal_encoding(w, config_.embed_dim).replicate(b, 1)));
  for (const auto& layer : encoder_) {
    x = norm(tape, tape.add(x, attend(tape, x, x, layer.self, b, w, w)), layer.norm1);
    x = norm(tape, tape.add(x, feedforward(tape, x, layer.ff1, layer.ff2)), layer.norm2);
  }
  return x;
}

Var Transformer::forward(Tape& tape, const Matrix& batch) {
  const int w = config_.window;
  const auto b = static_cast<int>(batch.rows());
  Var memory = encode(tape, batch);
  Var y = tape.repeat_rows(tape.param(*query_), b);
  for (const auto& layer : decoder_) {
    y = norm(tape, tape.add(y, attend(tape, y, y, layer.self, b, 1, 1)), layer.norm1);
    y = norm(tape, tape.add(y, attend(tape, y, memory, layer.cross, b, 1, w)), layer.norm2);
    y = norm(tape, tape.add(y, feedforward(tape, y, layer.ff1, layer.ff2)), layer.norm3);
  }
  return linear(tape, y, head_);
}

// ---------------------------------------------------------------------------

std::unique_ptr<Regressor> make_regressor(const ModelConfig& config, int input_dim) {
  config.validate();
  if (input_dim < 1) throw Error(ErrorKind::DimensionMismatch, "input dimension must be positive");
  switch (config.architecture) {
    case Architecture::Feedforward: return std::make_unique<Feedforward>(config, input_dim);
    case Architecture::Lstm: return std::make_unique<Lstm>(config, input_dim);
    case Architecture::Gru: return std::make_unique<Gru>(config, input_dim);
    case Architecture::Transformer: return std::make_unique<Transformer>(config, input_dim);
  }
  throw Error(ErrorKind::InvalidConfig, "unknown architecture");
}

std::size_t expected_parameter_count(const ModelConfig& config, int input_dim) {
  auto dense = [](std::size_t in, std::size_t out) { return (in + 1) * out; };
  const auto d = static_cast<std::size_t>(input_dim);
  switch (config.architecture) {
    case Architecture::Feedforward: {
      std::size_t total = 0;
      std::size_t in = static_cast<std::size_t>(config.window) * d;
      for (int w : config.hidden_layers) {
        total += dense(in, static_cast<std::size_t>(w));
        in = static_cast<std::size_t>(w);
      }
      return total + dense(in, 1);
    }
    case Architecture::Lstm:
    case Architecture::Gru: {
      const std::size_t gates = config.architecture == Architecture::Lstm ? 4 : 3;
      const auto h = static_cast<std::size_t>(config.recurrent_hidden);
      std::size_t total = gates * h * (d + h + 1);
      total += static_cast<std::size_t>(config.recurrent_layers - 1) * gates * h * (h + h + 1);
      return total + dense(h, 1);
    }
    case Architecture::Transformer: {
      const auto e = static_cast<std::size_t>(config.embed_dim);
      const auto f = static_cast<std::size_t>(config.ffn_dim);
      const std::size_t attn = 4 * dense(e, e);
      const std::size_t ffn = dense(e, f) + dense(f, e);
      const std::size_t norm = 2 * e;
      const std::size_t enc = attn + ffn + 2 * norm;
      const std::size_t dec = 2 * attn + ffn + 3 * norm;
      return dense(d, e) + static_cast<std::size_t>(config.encoder_layers) * enc + e +
             static_cast<std::size_t>(config.decoder_layers) * dec + dense(e, 1);
    }
  }
  return 0;
}

}  // namespace xwalk::nn
