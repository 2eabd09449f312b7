#pragma once

#include <array>
#include <optional>
#include <string_view>

#include "reconprobe/image.hpp"

namespace reconprobe {

enum class RegionKind { center_box, bbox, temporal_band };

std::string_view to_string(RegionKind kind);
RegionKind parse_region_kind(std::string_view text);

inline constexpr double kDefaultCenterAreaFraction = 0.25;
inline constexpr double kDefaultTemporalStartFraction = 0.375;
inline constexpr double kDefaultTemporalLengthFraction = 0.25;

// Symbolic description of a degraded region. Parameters left unset take the
// defaults above (or the manifest-level overrides filled in at validation).
//
//   center_box     centered rectangle covering `area_fraction` of the image;
//                  each side spans sqrt(area_fraction) of the image side.
//   bbox           {x0, y0, x1, y1} in pixels, half-open, x = column.
//   temporal_band  full-height vertical band starting at `start_fraction` of
//                  the width and spanning `length_fraction` of it.
struct RegionSpec {
  RegionKind kind = RegionKind::center_box;
  std::optional<double> area_fraction;
  std::optional<std::array<double, 4>> bbox;
  std::optional<double> start_fraction;
  std::optional<double> length_fraction;

  static RegionSpec center(double area_fraction) { return {RegionKind::center_box, area_fraction, {}, {}, {}}; }
  static RegionSpec box(double x0, double y0, double x1, double y1) {
    return {RegionKind::bbox, {}, std::array<double, 4>{x0, y0, x1, y1}, {}, {}};
  }
  static RegionSpec band(double start, double length) { return {RegionKind::temporal_band, {}, {}, start, length}; }
};

// Rounding: a fractional start is floored and a fractional end ceiled before
// clamping to the image. Band and box extents use round(fraction * side) so a
// 0.25 band on a 100-column image is exactly 25 columns wide.
//
// Throws ValidationError for degenerate or out-of-bounds regions.
MaskRaster resolve_region(const RegionSpec& region, int height, int width);

}  // namespace reconprobe
