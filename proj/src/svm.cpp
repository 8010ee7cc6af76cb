#include "xwalk/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <json.hpp>

#include "xwalk/error.hpp"

namespace xwalk {

using nlohmann::json;

namespace {

constexpr double kTau = 1e-12;

double to_sign(SubClass c) { return c == SubClass::Normal ? 1.0 : -1.0; }

struct Standardizer {
  FeatureRow mean = FeatureRow::Zero();
  FeatureRow scale = FeatureRow::Ones();
};

Standardizer fit_standardizer(const std::vector<FeatureRow>& xs) {
  Standardizer s;
  const double n = static_cast<double>(xs.size());
  for (const auto& x : xs) s.mean += x;
  s.mean /= n;
  FeatureRow var = FeatureRow::Zero();
  for (const auto& x : xs) var += (x - s.mean).cwiseAbs2();
  var /= n;
  for (int i = 0; i < kNumSubClassFeatures; ++i) s.scale[i] = var[i] > 1e-24 ? std::sqrt(var[i]) : 1.0;
  return s;
}

// Sequential minimal optimization with second-order working-set selection.
// Solves min 0.5 a'Qa - e'a  s.t. 0 <= a <= C, y'a = 0.
struct SmoResult {
  std::vector<double> alpha;
  double rho = 0.0;
};

SmoResult solve_smo(const Eigen::MatrixXd& k, const std::vector<double>& y, double c, double eps, int max_iter) {
  const auto n = static_cast<int>(y.size());
  std::vector<double> alpha(static_cast<std::size_t>(n), 0.0);
  std::vector<double> grad(static_cast<std::size_t>(n), -1.0);
  auto q = [&](int i, int j) { return y[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(j)] * k(i, j); };
  auto is_upper = [&](int t) { return alpha[static_cast<std::size_t>(t)] >= c; };
  auto is_lower = [&](int t) { return alpha[static_cast<std::size_t>(t)] <= 0.0; };

  for (int iter = 0; iter < max_iter; ++iter) {
    double gmax = -std::numeric_limits<double>::infinity();
    double gmax2 = -std::numeric_limits<double>::infinity();
    int i = -1;
    for (int t = 0; t < n; ++t) {
      const auto u = static_cast<std::size_t>(t);
      if (y[u] > 0 ? !is_upper(t) : !is_lower(t)) {
        if (-y[u] * grad[u] >= gmax) {
          gmax = -y[u] * grad[u];
          i = t;
        }
      }
    }
    int j = -1;
    double obj_min = std::numeric_limits<double>::infinity();
    for (int t = 0; t < n; ++t) {
      const auto u = static_cast<std::size_t>(t);
      if (y[u] > 0 ? !is_lower(t) : !is_upper(t)) {
        const double grad_diff = gmax + y[u] * grad[u];
        gmax2 = std::max(gmax2, y[u] * grad[u]);
        if (i >= 0 && grad_diff > 0.0) {
          double quad = k(i, i) + k(t, t) - 2.0 * k(i, t);
          if (quad <= 0.0) quad = kTau;
          const double obj = -(grad_diff * grad_diff) / quad;
          if (obj <= obj_min) {
            obj_min = obj;
            j = t;
          }
        }
      }
    }
    if (i < 0 || j < 0 || gmax + gmax2 < eps) break;

    const auto ui = static_cast<std::size_t>(i);
    const auto uj = static_cast<std::size_t>(j);
    const double old_ai = alpha[ui];
    const double old_aj = alpha[uj];
    if (y[ui] != y[uj]) {
      double quad = q(i, i) + q(j, j) + 2.0 * q(i, j);
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad[ui] - grad[uj]) / quad;
      const double diff = alpha[ui] - alpha[uj];
      alpha[ui] += delta;
      alpha[uj] += delta;
      if (diff > 0.0) {
        if (alpha[uj] < 0.0) {
          alpha[uj] = 0.0;
          alpha[ui] = diff;
        }
      } else if (alpha[ui] < 0.0) {
        alpha[ui] = 0.0;
        alpha[uj] = -diff;
      }
      if (diff > 0.0) {
        if (alpha[ui] > c) {
          alpha[ui] = c;
          alpha[uj] = c - diff;
        }
      } else if (alpha[uj] > c) {
        alpha[uj] = c;
        alpha[ui] = c + diff;
      }
    } else {
      double quad = q(i, i) + q(j, j) - 2.0 * q(i, j);
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad[ui] - grad[uj]) / quad;
      const double sum = alpha[ui] + alpha[uj];
      alpha[ui] -= delta;
      alpha[uj] += delta;
      if (sum > c) {
        if (alpha[ui] > c) {
          alpha[ui] = c;
          alpha[uj] = sum - c;
        }
      } else if (alpha[uj] < 0.0) {
        alpha[uj] = 0.0;
        alpha[ui] = sum;
      }
      if (sum > c) {
        if (alpha[uj] > c) {
          alpha[uj] = c;
          alpha[ui] = sum - c;
        }
      } else if (alpha[ui] < 0.0) {
        alpha[ui] = 0.0;
        alpha[uj] = sum;
      }
    }
    const double dai = alpha[ui] - old_ai;
    const double daj = alpha[uj] - old_aj;
    for (int t = 0; t < n; ++t) grad[static_cast<std::size_t>(t)] += q(t, i) * dai + q(t, j) * daj;
  }

  // rho from free vectors, or the midpoint of the feasible range.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  int n_free = 0;
  for (int t = 0; t < n; ++t) {
    const auto u = static_cast<std::size_t>(t);
    const double yg = y[u] * grad[u];
    if (is_upper(t)) {
      if (y[u] < 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (is_lower(t)) {
      if (y[u] > 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  SmoResult r;
  r.rho = n_free > 0 ? sum_free / n_free : (ub + lb) / 2.0;
  r.alpha = std::move(alpha);
  return r;
}

template <typename Rng>
void shuffle_indices(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> dist(0, i - 1);
    std::swap(v[i - 1], v[dist(rng)]);
  }
}

double accuracy(const SvmModel& model, const std::vector<FeatureRow>& xs, const std::vector<SubClass>& ys,
                const std::vector<std::size_t>& idx) {
  if (idx.empty()) return 0.0;
  std::size_t hit = 0;
  for (auto i : idx) hit += model.predict(xs[i]) == ys[i];
  return static_cast<double>(hit) / static_cast<double>(idx.size());
}

template <typename T>
std::vector<T> pick(const std::vector<T>& v, const std::vector<std::size_t>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(v[i]);
  return out;
}

void require_both_classes(const std::vector<SubClass>& labels) {
  const bool has_normal = std::find(labels.begin(), labels.end(), SubClass::Normal) != labels.end();
  const bool has_wheel = std::find(labels.begin(), labels.end(), SubClass::Wheelchair) != labels.end();
  if (!has_normal || !has_wheel) {
    throw Error(ErrorKind::SingleClassTrainingSet, "SVM training needs both normal and wheelchair samples");
  }
}

}  // namespace

double SvmModel::kernel_value(const FeatureRow& a, const FeatureRow& b) const {
  if (kernel == SvmKernel::Linear) return a.dot(b);
  return std::exp(-gamma * (a - b).squaredNorm());
}

double SvmModel::decision(const FeatureRow& raw) const {
  if (!trained()) throw Error(ErrorKind::UntrainedModel, "SVM has no support vectors");
  const FeatureRow z = (raw - mean).cwiseQuotient(scale);
  double f = bias;
  for (std::size_t i = 0; i < support_vectors.size(); ++i) f += dual_coef[i] * kernel_value(support_vectors[i], z);
  return f;
}

SubClass SvmModel::predict(const FeatureRow& raw) const {
  return decision(raw) >= 0.0 ? SubClass::Normal : SubClass::Wheelchair;
}

double margin_confidence(double decision_value) { return 1.0 / (1.0 + std::exp(-std::abs(decision_value))); }

SvmModel fit_svm(const std::vector<FeatureRow>& samples, const std::vector<SubClass>& labels, const SvmOptions& options) {
  if (samples.size() != labels.size()) throw Error(ErrorKind::InvalidArgument, "sample/label count mismatch");
  for (auto l : labels) {
    if (l == SubClass::Unknown) throw Error(ErrorKind::InvalidArgument, "SVM training labels must be binary");
  }
  require_both_classes(labels);
  if (!(options.c > 0.0)) throw Error(ErrorKind::ConfigValidationError, "SVM C must be positive");

  const auto st = fit_standardizer(samples);
  const auto n = static_cast<Eigen::Index>(samples.size());
  std::vector<FeatureRow> z(samples.size());
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    z[i] = (samples[i] - st.mean).cwiseQuotient(st.scale);
    sum += z[i].sum();
    sum_sq += z[i].squaredNorm();
  }
  const double count = static_cast<double>(samples.size() * kNumSubClassFeatures);
  const double var = sum_sq / count - (sum / count) * (sum / count);

  SvmModel model;
  model.kernel = options.kernel;
  model.c = options.c;
  model.gamma = var > 0.0 ? 1.0 / (kNumSubClassFeatures * var) : 1.0 / kNumSubClassFeatures;
  model.mean = st.mean;
  model.scale = st.scale;

  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      k(i, j) = k(j, i) = model.kernel_value(z[static_cast<std::size_t>(i)], z[static_cast<std::size_t>(j)]);
    }
  }
  std::vector<double> y;
  y.reserve(labels.size());
  for (auto l : labels) y.push_back(to_sign(l));

  const auto smo = solve_smo(k, y, options.c, options.tolerance, options.max_iterations);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (smo.alpha[i] > 0.0) {
      model.support_vectors.push_back(z[i]);
      model.dual_coef.push_back(smo.alpha[i] * y[i]);
    }
  }
  model.bias = -smo.rho;
  return model;
}

SvmTrainResult train_svm(const std::vector<FeatureRow>& samples, const std::vector<SubClass>& labels,
                         const SvmOptions& options) {
  if (samples.size() != labels.size()) throw Error(ErrorKind::InvalidArgument, "sample/label count mismatch");
  if (!(options.split_ratio > 0.0 && options.split_ratio <= 1.0)) {
    throw Error(ErrorKind::ConfigValidationError, "split ratio must lie in (0, 1]");
  }
  if (options.folds < 2) throw Error(ErrorKind::ConfigValidationError, "cross-validation needs at least 2 folds");

  std::mt19937_64 rng(options.seed);
  SvmTrainResult result;
  auto& rep = result.report;
  std::vector<std::vector<std::size_t>> fold_members(static_cast<std::size_t>(options.folds));
  std::size_t fold_cursor = 0;
  for (auto cls : {SubClass::Wheelchair, SubClass::Normal}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == cls) idx.push_back(i);
    }
    shuffle_indices(idx, rng);
    const auto n_train = static_cast<std::size_t>(std::llround(options.split_ratio * static_cast<double>(idx.size())));
    for (std::size_t k = 0; k < idx.size(); ++k) {
      if (k < n_train) {
        rep.train_indices.push_back(idx[k]);
        fold_members[fold_cursor++ % fold_members.size()].push_back(idx[k]);
      } else {
        rep.test_indices.push_back(idx[k]);
      }
    }
  }
  rep.n_train = rep.train_indices.size();
  rep.n_test = rep.test_indices.size();
  require_both_classes(pick(labels, rep.train_indices));

  for (std::size_t f = 0; f < fold_members.size(); ++f) {
    if (fold_members[f].empty()) continue;
    std::vector<std::size_t> fit_idx;
    for (std::size_t g = 0; g < fold_members.size(); ++g) {
      if (g != f) fit_idx.insert(fit_idx.end(), fold_members[g].begin(), fold_members[g].end());
    }
    const auto fold_model = fit_svm(pick(samples, fit_idx), pick(labels, fit_idx), options);
    rep.fold_accuracies.push_back(accuracy(fold_model, samples, labels, fold_members[f]));
  }
  rep.cv_accuracy = rep.fold_accuracies.empty()
                        ? 0.0
                        : std::accumulate(rep.fold_accuracies.begin(), rep.fold_accuracies.end(), 0.0) /
                              static_cast<double>(rep.fold_accuracies.size());

  result.model = fit_svm(pick(samples, rep.train_indices), pick(labels, rep.train_indices), options);
  rep.test_accuracy = rep.test_indices.empty() ? 0.0 : accuracy(result.model, samples, labels, rep.test_indices);
  return result;
}

std::vector<SubClassResult> relabel_unknowns(const SvmModel& model, const std::vector<FeatureRow>& unknowns) {
  if (!model.trained()) throw Error(ErrorKind::UntrainedModel, "relabeling needs a trained SVM");
  std::vector<SubClassResult> out;
  out.reserve(unknowns.size());
  for (const auto& x : unknowns) {
    const double f = model.decision(x);
    out.push_back({f >= 0.0 ? SubClass::Normal : SubClass::Wheelchair, LabelSource::Svm, margin_confidence(f)});
  }
  return out;
}

std::string SvmModel::to_json() const {
  json j;
  j["format"] = "xwalk-svm";
  j["version"] = 1;
  j["kernel"] = kernel == SvmKernel::Rbf ? "rbf" : "linear";
  j["gamma"] = gamma;
  j["c"] = c;
  j["mean"] = std::vector<double>(mean.data(), mean.data() + kNumSubClassFeatures);
  j["scale"] = std::vector<double>(scale.data(), scale.data() + kNumSubClassFeatures);
  json svs = json::array();
  for (const auto& sv : support_vectors) svs.push_back(std::vector<double>(sv.data(), sv.data() + kNumSubClassFeatures));
  j["support_vectors"] = svs;
  j["dual_coef"] = dual_coef;
  j["bias"] = bias;
  return j.dump(2);
}

SvmModel SvmModel::from_json(const std::string& text) {
  const auto j = json::parse(text);
  if (j.value("format", "") != "xwalk-svm") throw Error(ErrorKind::SchemaMismatch, "not an SVM model document");
  SvmModel m;
  const auto kernel = j.at("kernel").get<std::string>();
  if (kernel != "rbf" && kernel != "linear") throw Error(ErrorKind::SchemaMismatch, "unknown kernel " + kernel);
  m.kernel = kernel == "rbf" ? SvmKernel::Rbf : SvmKernel::Linear;
  m.gamma = j.at("gamma").get<double>();
  m.c = j.at("c").get<double>();
  const auto mean = j.at("mean").get<std::vector<double>>();
  const auto scale = j.at("scale").get<std::vector<double>>();
  if (mean.size() != kNumSubClassFeatures || scale.size() != kNumSubClassFeatures) {
    throw Error(ErrorKind::SchemaMismatch, "SVM standardization has wrong dimension");
  }
  for (int i = 0; i < kNumSubClassFeatures; ++i) {
    m.mean[i] = mean[static_cast<std::size_t>(i)];
    m.scale[i] = scale[static_cast<std::size_t>(i)];
  }
  for (const auto& sv : j.at("support_vectors")) {
    const auto v = sv.get<std::vector<double>>();
    if (v.size() != kNumSubClassFeatures) throw Error(ErrorKind::SchemaMismatch, "support vector has wrong dimension");
    m.support_vectors.push_back(Eigen::Map<const FeatureRow>(v.data()));
  }
  m.dual_coef = j.at("dual_coef").get<std::vector<double>>();
  if (m.dual_coef.size() != m.support_vectors.size()) throw Error(ErrorKind::SchemaMismatch, "dual coefficient count");
  m.bias = j.at("bias").get<double>();
  return m;
}

}  // namespace xwalk
