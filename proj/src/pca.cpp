#include "xwalk/pca.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "xwalk/error.hpp"

namespace xwalk {

using nlohmann::json;

namespace {

constexpr std::array<const char*, kNumSubClassFeatures> kFeatureNames = {
    "mean_height", "mean_width", "mean_length", "yaw_std", "mean_speed", "max_speed"};

// Relative tolerance below which a column counts as constant.
constexpr double kConstantTol = 1e-12;

}  // namespace

FeatureRow PcaModel::standardize(const FeatureRow& raw) const {
  FeatureRow z = (raw - mean).cwiseQuotient(scale);
  for (int i = 0; i < kNumSubClassFeatures; ++i) {
    if (!kept[static_cast<std::size_t>(i)]) z[i] = 0.0;
  }
  return z;
}

Eigen::Vector2d PcaModel::project(const FeatureRow& raw) const { return components * standardize(raw); }

FeatureRow PcaModel::reconstruct(const Eigen::Vector2d& scores) const {
  const FeatureRow z = components.transpose() * scores;
  return mean + z.cwiseProduct(scale);
}

PcaModel fit_pca(const std::vector<FeatureRow>& samples) {
  if (samples.size() < 3) {
    throw Error(ErrorKind::InsufficientSamples, "PCA needs at least 3 samples, got " + std::to_string(samples.size()));
  }
  const auto n = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd x(n, kNumSubClassFeatures);
  for (Eigen::Index i = 0; i < n; ++i) x.row(i) = samples[static_cast<std::size_t>(i)].transpose();

  PcaModel model;
  model.mean = x.colwise().mean().transpose();
  Eigen::MatrixXd centered = x.rowwise() - model.mean.transpose();

  std::vector<int> kept_idx;
  for (int j = 0; j < kNumSubClassFeatures; ++j) {
    const double sd = std::sqrt(centered.col(j).squaredNorm() / static_cast<double>(n - 1));
    const double magnitude = std::max(1.0, std::abs(model.mean[j]));
    if (sd > kConstantTol * magnitude) {
      model.scale[j] = sd;
      model.kept[static_cast<std::size_t>(j)] = true;
      kept_idx.push_back(j);
    } else {
      model.scale[j] = 1.0;
      model.warnings.push_back(std::string("dropped constant feature ") + kFeatureNames[static_cast<std::size_t>(j)]);
    }
  }
  if (kept_idx.empty()) throw Error(ErrorKind::AllFeaturesConstant, "every feature is constant");

  const auto k = static_cast<Eigen::Index>(kept_idx.size());
  Eigen::MatrixXd z(n, k);
  for (Eigen::Index c = 0; c < k; ++c) {
    const int j = kept_idx[static_cast<std::size_t>(c)];
    z.col(c) = centered.col(j) / model.scale[j];
  }
  const Eigen::MatrixXd cov = (z.transpose() * z) / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  const Eigen::VectorXd evals = solver.eigenvalues().cwiseMax(0.0);
  const Eigen::MatrixXd evecs = solver.eigenvectors();
  const double total = evals.sum();

  for (int comp = 0; comp < 2; ++comp) {
    Eigen::Matrix<double, 1, kNumSubClassFeatures> row = Eigen::Matrix<double, 1, kNumSubClassFeatures>::Zero();
    double ratio = 0.0;
    if (comp < k) {
      const Eigen::Index col = k - 1 - comp;  // eigenvalues ascend
      for (Eigen::Index c = 0; c < k; ++c) row[kept_idx[static_cast<std::size_t>(c)]] = evecs(c, col);
      ratio = total > 0.0 ? evals[col] / total : 0.0;
    } else {
      // Only one varying feature: complete the basis with the first dropped axis.
      for (int j = 0; j < kNumSubClassFeatures; ++j) {
        if (!model.kept[static_cast<std::size_t>(j)]) {
          row[j] = 1.0;
          break;
        }
      }
    }
    Eigen::Index arg = 0;
    row.cwiseAbs().maxCoeff(&arg);
    if (row[arg] < 0.0) row = -row;
    model.components.row(comp) = row;
    model.explained_variance_ratio[comp] = ratio;
  }
  return model;
}

std::string PcaModel::to_json() const {
  json j;
  j["format"] = "xwalk-pca";
  j["version"] = 1;
  j["features"] = kFeatureNames;
  j["mean"] = std::vector<double>(mean.data(), mean.data() + kNumSubClassFeatures);
  j["scale"] = std::vector<double>(scale.data(), scale.data() + kNumSubClassFeatures);
  j["kept"] = kept;
  json comps = json::array();
  for (int r = 0; r < 2; ++r) {
    std::vector<double> row(kNumSubClassFeatures);
    for (int c = 0; c < kNumSubClassFeatures; ++c) row[static_cast<std::size_t>(c)] = components(r, c);
    comps.push_back(row);
  }
  j["components"] = comps;
  j["explained_variance_ratio"] = {explained_variance_ratio[0], explained_variance_ratio[1]};
  j["warnings"] = warnings;
  return j.dump(2);
}

PcaModel PcaModel::from_json(const std::string& text) {
  const auto j = json::parse(text);
  if (j.value("format", "") != "xwalk-pca") throw Error(ErrorKind::SchemaMismatch, "not a PCA model document");
  PcaModel m;
  const auto mean = j.at("mean").get<std::vector<double>>();
  const auto scale = j.at("scale").get<std::vector<double>>();
  const auto kept = j.at("kept").get<std::vector<bool>>();
  const auto comps = j.at("components").get<std::vector<std::vector<double>>>();
  if (mean.size() != kNumSubClassFeatures || scale.size() != kNumSubClassFeatures || kept.size() != kNumSubClassFeatures ||
      comps.size() != 2) {
    throw Error(ErrorKind::SchemaMismatch, "PCA model has wrong dimensions");
  }
  for (int i = 0; i < kNumSubClassFeatures; ++i) {
    const auto u = static_cast<std::size_t>(i);
    m.mean[i] = mean[u];
    m.scale[i] = scale[u];
    m.kept[u] = kept[u];
    m.components(0, i) = comps[0].at(u);
    m.components(1, i) = comps[1].at(u);
  }
  const auto ratio = j.at("explained_variance_ratio").get<std::vector<double>>();
  m.explained_variance_ratio = {ratio.at(0), ratio.at(1)};
  m.warnings = j.value("warnings", std::vector<std::string>{});
  return m;
}

}  // namespace xwalk
