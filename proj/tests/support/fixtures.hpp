#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "xwalk/ingest.hpp"
#include "xwalk/nn/tape.hpp"
#include "xwalk/preprocess.hpp"
#include "xwalk/subclass.hpp"

namespace xwalk::testkit {

AreaConfig default_areas();
std::map<Area, int> default_phase_map();

TrackRecord pedestrian_record(std::int64_t t_ms, std::int64_t id, double x, double y, double vx, double vy);

/// Straight walk along +y through crossing 1 (y in [8, 12]) at x = 0.
/// Starts at `y0`, one point every `dt_s`, speed constant.
Trajectory straight_walk(std::int64_t id, std::size_t n, double speed, double y0 = 6.0, double dt_s = 0.1,
                         std::int64_t t0_ms = 1'000'000, double height = 1.7, double width = 0.5,
                         double length = 0.8);

/// Phase 2 (crossings 1 and 3) and phase 4 (crossings 2 and 4) alternate
/// green for `green_s` every `cycle_s`, starting at `t0_ms`.
std::vector<SpatEvent> alternating_spat(std::int64_t t0_ms, double cycle_s, double green_s, int cycles);

/// Records for a walk along +y at x = 0 with piecewise-constant speed. Each
/// segment is (duration_s, speed); points every `dt_s` from `t0_ms`.
std::vector<TrackRecord> segment_walk(std::int64_t id, std::int64_t t0_ms, double y0,
                                      const std::vector<std::pair<double, double>>& segments, double dt_s = 0.1);

/// Boundary fixture for the filtering rules and the labeling criteria.
struct BoundaryCase {
  std::int64_t id = 0;
  std::string what;
  bool rule1 = true;
  bool rule2 = true;
  bool rule3 = true;
  SubClass label = SubClass::Unknown;  // checked for kept trajectories only
  LabelSource source = LabelSource::FallbackUnknown;
};

struct BoundaryFixture {
  std::vector<TrackRecord> records;
  std::vector<SpatEvent> spat;
  std::vector<BoundaryCase> cases;
};

/// Twelve trajectories: rule 1 at ratio exactly 0.5 and below, rule 3 at 10
/// and 11 points, rule 2 on a polygon edge and fully outside, mean speed
/// exactly 1.5 and above, heights 1.1 and 1.5 and 1.7, and an acceleration
/// before the green ends.
BoundaryFixture boundary_fixture();

/// Cyclic Jacobi eigendecomposition of a symmetric matrix, written apart
/// from the library's solver. Eigenvalues descend; columns are eigenvectors.
struct EigenPairs {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
};
EigenPairs jacobi_eigen(Eigen::MatrixXd a);

/// Central finite differences against the tape's analytic gradients. The
/// error per parameter tensor is |analytic - numeric| / max(|analytic| +
/// |numeric|, 1e-5) in the Euclidean norm; the worst tensor is reported.
struct GradCheck {
  double max_relative_error = 0.0;
  std::string worst;
};
GradCheck gradient_check(const std::vector<nn::Parameter*>& params,
                         const std::function<nn::Var(nn::Tape&)>& loss, double step = 1e-5);

/// Fresh empty directory under the system temp dir.
std::filesystem::path fresh_dir(const std::string& name);

}  // namespace xwalk::testkit
