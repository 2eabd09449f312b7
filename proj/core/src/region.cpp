#include "reconprobe/region.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "reconprobe/error.hpp"

namespace reconprobe {

std::string_view to_string(RegionKind kind) {
  switch (kind) {
    case RegionKind::center_box:
      return "center_box";
    case RegionKind::bbox:
      return "bbox";
    case RegionKind::temporal_band:
      return "temporal_band";
  }
  return "?";
}

RegionKind parse_region_kind(std::string_view text) {
  if (text == "center_box") return RegionKind::center_box;
  if (text == "bbox") return RegionKind::bbox;
  if (text == "temporal_band") return RegionKind::temporal_band;
  throw ValidationError("unknown region kind '" + std::string(text) + "'");
}

namespace {

MaskRaster rectangle(int height, int width, int row0, int col0, int row1, int col1) {
  row0 = std::clamp(row0, 0, height);
  row1 = std::clamp(row1, 0, height);
  col0 = std::clamp(col0, 0, width);
  col1 = std::clamp(col1, 0, width);
  if (row1 <= row0 || col1 <= col0) throw ValidationError("region is degenerate (zero area)");
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(height) * width, 0);
  for (int r = row0; r < row1; ++r)
    std::fill_n(bits.begin() + static_cast<std::ptrdiff_t>(r) * width + col0, col1 - col0, std::uint8_t{1});
  return MaskRaster(height, width, std::move(bits));
}

int rounded_extent(double fraction, int side) { return static_cast<int>(std::lround(fraction * side)); }

}  // namespace

MaskRaster resolve_region(const RegionSpec& region, int height, int width) {
  if (height <= 0 || width <= 0) throw ValidationError("region resolved against an empty image");
  switch (region.kind) {
    case RegionKind::center_box: {
      const double f = region.area_fraction.value_or(kDefaultCenterAreaFraction);
      if (!(f > 0.0 && f <= 1.0)) throw ValidationError("center_box area fraction must lie in (0, 1]");
      const double side = std::sqrt(f);
      const int rows = rounded_extent(side, height);
      const int cols = rounded_extent(side, width);
      if (rows <= 0 || cols <= 0) throw ValidationError("region is degenerate (zero area)");
      const int row0 = (height - rows) / 2;
      const int col0 = (width - cols) / 2;
      return rectangle(height, width, row0, col0, row0 + rows, col0 + cols);
    }
    case RegionKind::bbox: {
      if (!region.bbox) throw ValidationError("bbox region without coordinates");
      const auto [x0, y0, x1, y1] = *region.bbox;
      for (double v : *region.bbox)
        if (!std::isfinite(v)) throw ValidationError("bbox coordinates must be finite");
      if (x0 < 0 || y0 < 0 || x1 > width || y1 > height)
        throw ValidationError("bbox lies outside the image bounds");
      if (x1 <= x0 || y1 <= y0) throw ValidationError("region is degenerate (zero area)");
      return rectangle(height, width, static_cast<int>(std::floor(y0)), static_cast<int>(std::floor(x0)),
                       static_cast<int>(std::ceil(y1)), static_cast<int>(std::ceil(x1)));
    }
    case RegionKind::temporal_band: {
      const double start = region.start_fraction.value_or(kDefaultTemporalStartFraction);
      const double length = region.length_fraction.value_or(kDefaultTemporalLengthFraction);
      if (!(start >= 0.0 && start < 1.0)) throw ValidationError("temporal_band start fraction must lie in [0, 1)");
      if (!(length > 0.0 && length <= 1.0))
        throw ValidationError("temporal_band length fraction must lie in (0, 1]");
      const int col0 = static_cast<int>(std::floor(start * width));
      const int cols = rounded_extent(length, width);
      if (cols <= 0) throw ValidationError("region is degenerate (zero area)");
      return rectangle(height, width, 0, col0, height, col0 + cols);
    }
  }
  throw ValidationError("unknown region kind");
}

}  // namespace reconprobe
