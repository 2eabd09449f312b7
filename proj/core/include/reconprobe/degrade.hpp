#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "reconprobe/image.hpp"

namespace reconprobe {

// The three masking strategies: hard center mask, Gaussian-blurred center and
// low-dimensional center degradation.
enum class MaskingStrategy { center_mask, gaussian_center, lowdim };

std::string_view strategy_tag(MaskingStrategy strategy);  // "cm" | "gc" | "ld"
MaskingStrategy parse_strategy_tag(std::string_view tag);

struct DegradeParams {
  int gaussian_kernel = 21;
  double gaussian_sigma = 3.5;
  int kmeans_k = 4;
  int kmeans_max_iterations = 20;
  int down_factor = 8;
  int compress_block = 8;
  int compress_kept_coeffs = 3;
  std::uint64_t rng_seed = 0;

  // Individual lowdim stages, for isolating them.
  bool enable_quantize = true;
  bool enable_resample = true;
  bool enable_compress = true;

  // Throws ValidationError if any parameter is out of its domain.
  void validate() const;
};

// Masked pixels set to zero in every channel.
ImageRaster center_mask(const ImageRaster& image, const MaskRaster& mask);

// Normalized 1-D Gaussian taps of odd length.
std::vector<double> gaussian_kernel(int size, double sigma);

// Separable Gaussian blur of the whole image with reflect-101 borders
// (...cb|abcd|cb...). No compositing.
ImageRaster gaussian_blur(const ImageRaster& image, int kernel_size, double sigma);

// Blur composited into the masked pixels only.
ImageRaster gaussian_blur_region(const ImageRaster& image, const MaskRaster& mask, const DegradeParams& params);

struct KMeansResult {
  int dim = 0;
  std::vector<double> palette;   // clusters x dim
  std::vector<int> assignment;   // one palette index per input color
  int iterations = 0;

  int clusters() const { return dim == 0 ? 0 : static_cast<int>(palette.size()) / dim; }
  std::span<const double> color(int index) const {
    return std::span<const double>(palette).subspan(static_cast<std::size_t>(index) * dim, dim);
  }
};

// Seeded k-means++ followed by at most `max_iterations` Lloyd steps. Ties go
// to the lowest centroid index. When the input has k or fewer distinct colors
// the palette is exactly those colors (sorted) and no iteration happens.
// `colors` holds count x dim values.
KMeansResult kmeans_quantize(std::span<const double> colors, int dim, int k, std::uint64_t seed,
                             int max_iterations = 20);

// Orthonormal DCT-II truncation of one rows x cols block: keeps the DC term
// and the next `kept - 1` coefficients in JPEG zigzag order. In place.
void truncate_dct_block(std::span<double> block, int rows, int cols, int kept);

// Within the mask's bounding rectangle: k-means quantization, box downsample
// + nearest upsample, then blockwise DCT truncation, then clamping. Only
// masked pixels are written back.
ImageRaster lowdim_degrade(const ImageRaster& image, const MaskRaster& mask, const DegradeParams& params);

// Dispatch on the strategy.
ImageRaster apply_degradation(MaskingStrategy strategy, const ImageRaster& image, const MaskRaster& mask,
                              const DegradeParams& params);

}  // namespace reconprobe
