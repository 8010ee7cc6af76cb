#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace xwalk {

/// Intersection area tag. The four crossings are configured polygons; any
/// point outside all of them belongs to the vehicle area.
enum class Area : int {
  Crossing1 = 0,
  Crossing2 = 1,
  Crossing3 = 2,
  Crossing4 = 3,
  Vehicle = 4,
};

inline constexpr int kNumCrossings = 4;
inline constexpr int kNumAreas = 5;

inline constexpr std::array<Area, kNumCrossings> kCrossings = {
    Area::Crossing1, Area::Crossing2, Area::Crossing3, Area::Crossing4};

constexpr bool is_crossing(Area a) { return a != Area::Vehicle; }
constexpr int index_of(Area a) { return static_cast<int>(a); }

std::string_view to_string(Area a);
std::optional<Area> area_from_string(std::string_view s);

}  // namespace xwalk
