#include "reconprobe/fidelity.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "reconprobe/degrade.hpp"
#include "reconprobe/error.hpp"

namespace reconprobe {

namespace {

void require_comparable(const ImageRaster& a, const ImageRaster& b, const MaskRaster& mask) {
  if (a.scale() != b.scale())
    throw ValidationError("scale mismatch: " + std::string(to_string(a.scale())) + " vs " +
                          std::string(to_string(b.scale())));
  if (!a.same_shape(b)) throw ValidationError("dimension mismatch between compared images");
  if (!mask.matches(a)) throw ValidationError("dimension mismatch between images and mask");
}

}  // namespace

double mse_region(const ImageRaster& a, const ImageRaster& b, const MaskRaster& mask) {
  require_comparable(a, b, mask);
  double sum = 0.0;
  std::size_t count = 0;
  for (int r = 0; r < a.height(); ++r)
    for (int c = 0; c < a.width(); ++c) {
      if (!mask.at(r, c)) continue;
      for (int ch = 0; ch < a.channels(); ++ch) {
        const double d = a.at(r, c, ch) - b.at(r, c, ch);
        sum += d * d;
      }
      count += a.channels();
    }
  if (count == 0) throw ValidationError("empty mask");
  return sum / static_cast<double>(count);
}

double psnr_from_mse(double mse, double max_value) {
  if (!(mse >= 0.0)) throw ValidationError("MSE must be non-negative");
  if (!(max_value > 0.0)) throw ValidationError("PSNR peak value must be positive");
  if (mse == 0.0) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(max_value * max_value / mse));
}

double psnr_region(const ImageRaster& a, const ImageRaster& b, const MaskRaster& mask, double max_value) {
  return psnr_from_mse(mse_region(a, b, mask), max_value);
}

double psnr_region(const ImageRaster& a, const ImageRaster& b, const MaskRaster& mask) {
  return psnr_region(a, b, mask, a.max_value());
}

double mean_psnr(std::span<const double> per_image_psnr) {
  if (per_image_psnr.empty()) throw ValidationError("PSNR average over an empty corpus");
  return std::accumulate(per_image_psnr.begin(), per_image_psnr.end(), 0.0) / static_cast<double>(per_image_psnr.size());
}

ImageRaster to_luma(const ImageRaster& image) {
  if (image.channels() == 1) return image;
  ImageRaster out(image.height(), image.width(), 1, image.scale());
  for (int r = 0; r < image.height(); ++r)
    for (int c = 0; c < image.width(); ++c)
      out.at(r, c) = 0.299 * image.at(r, c, 0) + 0.587 * image.at(r, c, 1) + 0.114 * image.at(r, c, 2);
  return out;
}

double ssim_region(const ImageRaster& a, const ImageRaster& b, const MaskRaster& mask, const SsimOptions& options) {
  require_comparable(a, b, mask);
  const int win = options.window;
  if (win < 1 || win % 2 == 0) throw ValidationError("SSIM window must be odd");
  const auto box = mask.bounding_box();
  if (box.rows() < win || box.cols() < win)
    throw ValidationError("region smaller than SSIM window (" + std::to_string(box.rows()) + "x" +
                          std::to_string(box.cols()) + " < " + std::to_string(win) + "x" + std::to_string(win) + ")");

  const ImageRaster x = to_luma(a);
  const ImageRaster y = to_luma(b);
  const int H = x.height(), W = x.width(), R = win / 2;
  const int out_rows = H - win + 1, out_cols = W - win + 1;
  const auto taps = gaussian_kernel(win, options.sigma);

  // Valid-mode separable filtering of x, y, x^2, y^2 and xy.
  enum { kX, kY, kXX, kYY, kXY, kCount };
  std::vector<std::vector<double>> horiz(kCount, std::vector<double>(static_cast<std::size_t>(H) * out_cols));
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < out_cols; ++c) {
      double s[kCount] = {};
      for (int k = 0; k < win; ++k) {
        const double w = taps[k], xv = x.at(r, c + k), yv = y.at(r, c + k);
        s[kX] += w * xv;
        s[kY] += w * yv;
        s[kXX] += w * xv * xv;
        s[kYY] += w * yv * yv;
        s[kXY] += w * xv * yv;
      }
      for (int q = 0; q < kCount; ++q) horiz[q][static_cast<std::size_t>(r) * out_cols + c] = s[q];
    }

  const double L = a.max_value();
  const double c1 = (options.k1 * L) * (options.k1 * L);
  const double c2 = (options.k2 * L) * (options.k2 * L);

  double total = 0.0;
  std::size_t count = 0;
  for (int r = 0; r < out_rows; ++r)
    for (int c = 0; c < out_cols; ++c) {
      const int cr = r + R, cc = c + R;
      const bool selected = options.mode == SsimRegionMode::window_center
                                ? mask.at(cr, cc)
                                : (cr - R >= box.row0 && cr + R < box.row1 && cc - R >= box.col0 && cc + R < box.col1);
      if (!selected) continue;
      double s[kCount] = {};
      for (int k = 0; k < win; ++k)
        for (int q = 0; q < kCount; ++q) s[q] += taps[k] * horiz[q][static_cast<std::size_t>(r + k) * out_cols + c];
      const double mx = s[kX], my = s[kY];
      const double vx = s[kXX] - mx * mx, vy = s[kYY] - my * my, cov = s[kXY] - mx * my;
      total += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  if (count == 0) throw ValidationError("no SSIM window lies inside the degraded region");
  return total / static_cast<double>(count);
}

FidelityScores score_fidelity(const ImageRaster& original, const ImageRaster& reconstructed, const MaskRaster& mask,
                              const SsimOptions& options) {
  FidelityScores s;
  s.mse = mse_region(original, reconstructed, mask);
  s.psnr = psnr_from_mse(s.mse, original.max_value());
  s.ssim = ssim_region(original, reconstructed, mask, options);
  return s;
}

}  // namespace reconprobe
