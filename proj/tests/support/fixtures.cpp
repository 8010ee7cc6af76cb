#include "fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "xwalk/synthgen.hpp"

namespace xwalk::testkit {

AreaConfig default_areas() { return ScenarioConfig::defaults().areas; }

std::map<Area, int> default_phase_map() { return ScenarioConfig::defaults().phase_map; }

TrackRecord pedestrian_record(std::int64_t t_ms, std::int64_t id, double x, double y, double vx, double vy) {
  TrackRecord r;
  r.timestamp_ms = t_ms;
  r.agent_id = id;
  r.label = AgentLabel::Pedestrian;
  r.confidence = 0.9;
  r.pos_x = x;
  r.pos_y = y;
  r.box_length = 0.8;
  r.box_width = 0.5;
  r.box_height = 1.7;
  r.yaw = std::atan2(vy, vx);
  r.vel_x = vx;
  r.vel_y = vy;
  return r;
}

Trajectory straight_walk(std::int64_t id, std::size_t n, double speed, double y0, double dt_s, std::int64_t t0_ms,
                         double height, double width, double length) {
  std::vector<TrackRecord> records;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * dt_s;
    auto r = pedestrian_record(t0_ms + std::llround(t * 1000.0), id, 0.0, y0 + speed * t, 0.0, speed);
    r.box_height = height;
    r.box_width = width;
    r.box_length = length;
    records.push_back(r);
  }
  auto grouped = group_by_id(records);
  return assign_areas(std::move(grouped.front()), default_areas());
}

std::vector<SpatEvent> alternating_spat(std::int64_t t0_ms, double cycle_s, double green_s, int cycles) {
  std::vector<SpatEvent> events;
  for (int c = 0; c < cycles; ++c) {
    const double base = static_cast<double>(c) * cycle_s;
    const std::pair<int, double> starts[] = {{2, base}, {4, base + cycle_s / 2.0}};
    for (const auto& [phase, start] : starts) {
      events.push_back({t0_ms + std::llround(start * 1000.0), phase, PhaseEvent::Begin});
      events.push_back({t0_ms + std::llround((start + green_s) * 1000.0), phase, PhaseEvent::End});
    }
  }
  std::stable_sort(events.begin(), events.end(),
                   [](const SpatEvent& a, const SpatEvent& b) { return a.timestamp_ms < b.timestamp_ms; });
  return events;
}

std::vector<TrackRecord> segment_walk(std::int64_t id, std::int64_t t0_ms, double y0,
                                      const std::vector<std::pair<double, double>>& segments, double dt_s) {
  double total = 0.0;
  for (const auto& s : segments) total += s.first;
  std::vector<TrackRecord> out;
  for (int k = 0;; ++k) {
    const double t = k * dt_s;
    if (t > total - 1e-9) break;
    // Position: integrate whole segments, then the partial one.
    double y = y0;
    double speed = segments.back().second;
    double start = 0.0;
    for (const auto& [dur, v] : segments) {
      if (t < start + dur - 1e-9) {
        y += v * (t - start);
        speed = v;
        break;
      }
      y += v * dur;
      start += dur;
    }
    out.push_back(pedestrian_record(t0_ms + std::llround(t * 1000.0), id, 0.0, y, 0.0, speed));
  }
  return out;
}

BoundaryFixture boundary_fixture() {
  BoundaryFixture fx;
  // Phase 2 (crossing 1) is green on [0, 25) s, [70, 95) s, ...
  fx.spat = alternating_spat(0, 70.0, 25.0, 4);
  const std::int64_t quiet = 30'000;  // inside a red stretch: no phase change
  auto add = [&](std::vector<TrackRecord> recs, BoundaryCase c) {
    for (auto& r : recs) r.agent_id = c.id;
    fx.records.insert(fx.records.end(), recs.begin(), recs.end());
    fx.cases.push_back(std::move(c));
  };
  auto in_crossing = [&](std::size_t n, double speed) {
    return segment_walk(0, quiet, 8.5, {{0.1 * static_cast<double>(n) - 0.05, speed}});
  };

  {
    auto r = in_crossing(12, 1.0);
    for (std::size_t i = 0; i < 6; ++i) r[i].label = AgentLabel::Cyclist;
    add(r, {1, "pedestrian ratio exactly 0.5"});
  }
  {
    auto r = in_crossing(12, 1.0);
    for (std::size_t i = 0; i < 7; ++i) r[i].label = AgentLabel::Cyclist;
    add(r, {2, "pedestrian ratio 5/12", false});
  }
  add(in_crossing(10, 1.0), {3, "exactly 10 points", true, true, false});
  add(in_crossing(11, 1.0), {4, "11 points"});
  {
    auto r = in_crossing(12, 1.0);
    for (auto& p : r) p.pos_x += 20.0;
    add(r, {5, "never in a crossing", true, false});
  }
  {
    // Approaches from below; only the last point sits on the edge y = 8.
    auto r = in_crossing(12, 1.0);
    for (std::size_t i = 0; i < r.size(); ++i) r[i].pos_y = 8.0 - 0.1 * static_cast<double>(r.size() - 1 - i);
    add(r, {6, "single point on the polygon edge"});
  }
  add(in_crossing(12, 1.5), {7, "mean speed exactly 1.5"});
  add(in_crossing(12, 1.6), {8, "mean speed 1.6", true, true, true, SubClass::Normal, LabelSource::Criterion2});
  {
    auto r = in_crossing(12, 1.0);
    for (auto& p : r) {
      p.box_height = 1.1;
      p.box_width = 0.7;
      p.box_length = 0.75;
    }
    add(r, {9, "height exactly 1.1, square", true, true, true, SubClass::Wheelchair, LabelSource::Criterion4});
  }
  {
    auto r = in_crossing(12, 1.0);
    for (auto& p : r) {
      p.box_height = 1.5;
      p.box_width = 0.7;
      p.box_length = 0.75;
    }
    add(r, {10, "height exactly 1.5, square", true, true, true, SubClass::Wheelchair, LabelSource::Criterion4});
  }
  {
    auto r = in_crossing(12, 1.0);
    for (auto& p : r) {
      p.box_height = 1.7;
      p.box_width = 0.7;
      p.box_length = 0.75;
    }
    add(r, {11, "square but 1.7 tall"});
  }
  // Enters at 18 s, walks 0.4 m/s, speeds up to 0.6 m/s for the 3 s before
  // the green ends at 25 s and leaves the crosswalk at y = 12 after it.
  add(segment_walk(0, 18'000, 8.0, {{4.0, 0.4}, {6.0, 0.6}}),
      {12, "accelerates before the green ends", true, true, true, SubClass::Normal, LabelSource::Criterion1});

  std::stable_sort(fx.records.begin(), fx.records.end(),
                   [](const TrackRecord& a, const TrackRecord& b) { return a.timestamp_ms < b.timestamp_ms; });
  return fx;
}

EigenPairs jacobi_eigen(Eigen::MatrixXd a) {
  const auto n = a.rows();
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    }
    if (off < 1e-30) break;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](auto x, auto y) { return a(x, x) > a(y, y); });
  EigenPairs out{Eigen::VectorXd(n), Eigen::MatrixXd(n, n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values[i] = a(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(i)]);
    out.vectors.col(i) = v.col(order[static_cast<std::size_t>(i)]);
  }
  return out;
}

GradCheck gradient_check(const std::vector<nn::Parameter*>& params,
                         const std::function<nn::Var(nn::Tape&)>& loss, double step) {
  for (auto* p : params) p->zero_grad();
  {
    nn::Tape tape;
    tape.backward(loss(tape));
  }
  auto eval = [&] {
    nn::Tape tape(false);
    const nn::Var l = loss(tape);
    return tape.value(l)(0, 0);
  };
  GradCheck out;
  for (auto* p : params) {
    nn::Matrix numeric(p->value.rows(), p->value.cols());
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      const double keep = p->value.data()[i];
      p->value.data()[i] = keep + step;
      const double up = eval();
      p->value.data()[i] = keep - step;
      const double down = eval();
      p->value.data()[i] = keep;
      numeric.data()[i] = (up - down) / (2.0 * step);
    }
    // Floor keeps structurally zero gradients (e.g. attention key biases,
    // which softmax cancels) from turning round-off into a relative error of 1.
    const double denom = std::max(p->grad.norm() + numeric.norm(), 1e-5);
    const double rel = (p->grad - numeric).norm() / denom;
    if (rel >= out.max_relative_error) {
      out.max_relative_error = rel;
      out.worst = p->name;
    }
  }
  return out;
}

std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("xwalk-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace xwalk::testkit
