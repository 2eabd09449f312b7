#pragma once

#include <optional>
#include <span>

#include "reconprobe/image.hpp"

namespace reconprobe {

// Reported in place of +inf for perfect reconstructions.
inline constexpr double kPsnrCapDb = 100.0;

struct FidelityScores {
  double mse = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
  std::optional<double> lpips;  // scored externally
};

// Mean squared channel difference over masked pixels, in scale units^2.
double mse_region(const ImageRaster& a, const ImageRaster& b, const MaskRaster& mask);

double psnr_from_mse(double mse, double max_value);
double psnr_region(const ImageRaster& a, const ImageRaster& b, const MaskRaster& mask, double max_value);
double psnr_region(const ImageRaster& a, const ImageRaster& b, const MaskRaster& mask);

// Corpus PSNR is the mean of per-image PSNR, never PSNR of the mean MSE.
double mean_psnr(std::span<const double> per_image_psnr);

enum class SsimRegionMode {
  window_center,  // average map positions whose window center is masked
  crop,           // average every valid position inside the mask's bounding box
};

struct SsimOptions {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  SsimRegionMode mode = SsimRegionMode::window_center;
};

// Luma (0.299, 0.587, 0.114) of an RGB raster; gray rasters are returned as is.
ImageRaster to_luma(const ImageRaster& image);

// Single-scale SSIM on luma with a normalized Gaussian window and
// C1 = (k1 L)^2, C2 = (k2 L)^2, L the scale maximum. Map positions are those
// where the whole window fits inside the image.
double ssim_region(const ImageRaster& a, const ImageRaster& b, const MaskRaster& mask, const SsimOptions& options = {});

FidelityScores score_fidelity(const ImageRaster& original, const ImageRaster& reconstructed, const MaskRaster& mask,
                              const SsimOptions& options = {});

}  // namespace reconprobe
