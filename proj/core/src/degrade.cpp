#include "reconprobe/degrade.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <string>

#include "reconprobe/error.hpp"

namespace reconprobe {

std::string_view strategy_tag(MaskingStrategy strategy) {
  switch (strategy) {
    case MaskingStrategy::center_mask:
      return "cm";
    case MaskingStrategy::gaussian_center:
      return "gc";
    case MaskingStrategy::lowdim:
      return "ld";
  }
  return "?";
}

MaskingStrategy parse_strategy_tag(std::string_view tag) {
  if (tag == "cm") return MaskingStrategy::center_mask;
  if (tag == "gc") return MaskingStrategy::gaussian_center;
  if (tag == "ld") return MaskingStrategy::lowdim;
  throw ValidationError("unknown masking strategy '" + std::string(tag) + "' (expected cm, gc or ld)");
}

void DegradeParams::validate() const {
  if (gaussian_kernel < 3 || gaussian_kernel % 2 == 0)
    throw ValidationError("gaussian_kernel must be odd and >= 3");
  if (!(gaussian_sigma > 0.0)) throw ValidationError("gaussian_sigma must be positive");
  if (kmeans_k < 2) throw ValidationError("kmeans_k must be >= 2");
  if (kmeans_max_iterations < 1) throw ValidationError("kmeans_max_iterations must be >= 1");
  if (down_factor < 2) throw ValidationError("down_factor must be >= 2");
  if (compress_block < 1) throw ValidationError("compress_block must be >= 1");
  if (compress_kept_coeffs < 1 || compress_kept_coeffs > compress_block * compress_block)
    throw ValidationError("compress_kept_coeffs must lie in [1, compress_block^2]");
}

namespace {

void require_match(const ImageRaster& image, const MaskRaster& mask) {
  if (!mask.matches(image))
    throw ValidationError("dimension mismatch: image " + std::to_string(image.height()) + "x" +
                          std::to_string(image.width()) + " vs mask " + std::to_string(mask.height()) + "x" +
                          std::to_string(mask.width()));
}

// Copies masked pixels of `degraded` over `original`.
ImageRaster composite(const ImageRaster& original, const ImageRaster& degraded, const MaskRaster& mask) {
  ImageRaster out = original;
  for (int r = 0; r < out.height(); ++r)
    for (int c = 0; c < out.width(); ++c)
      if (mask.at(r, c))
        for (int ch = 0; ch < out.channels(); ++ch) out.at(r, c, ch) = degraded.at(r, c, ch);
  return out;
}

int reflect101(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

// Uniform double in [0, 1) from the raw engine output; std distributions are
// not reproducible across standard libraries.
double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double t = a[i] - b[i];
    d += t * t;
  }
  return d;
}

}  // namespace

ImageRaster center_mask(const ImageRaster& image, const MaskRaster& mask) {
  require_match(image, mask);
  ImageRaster out = image;
  for (int r = 0; r < out.height(); ++r)
    for (int c = 0; c < out.width(); ++c)
      if (mask.at(r, c))
        for (int ch = 0; ch < out.channels(); ++ch) out.at(r, c, ch) = 0.0;
  return out;
}

std::vector<double> gaussian_kernel(int size, double sigma) {
  if (size < 1 || size % 2 == 0) throw ValidationError("Gaussian kernel size must be odd");
  if (!(sigma > 0.0)) throw ValidationError("Gaussian sigma must be positive");
  const int radius = size / 2;
  std::vector<double> taps(size);
  for (int i = 0; i < size; ++i) {
    const double x = i - radius;
    taps[i] = std::exp(-x * x / (2.0 * sigma * sigma));
  }
  const double sum = std::accumulate(taps.begin(), taps.end(), 0.0);
  for (double& t : taps) t /= sum;
  return taps;
}

ImageRaster gaussian_blur(const ImageRaster& image, int kernel_size, double sigma) {
  if (kernel_size > image.height() || kernel_size > image.width())
    throw ValidationError("kernel larger than image (" + std::to_string(kernel_size) + " vs " +
                          std::to_string(image.height()) + "x" + std::to_string(image.width()) + ")");
  const auto taps = gaussian_kernel(kernel_size, sigma);
  const int radius = kernel_size / 2;
  const int H = image.height(), W = image.width(), C = image.channels();

  // Each output is accumulated as center + sum(w * (x - center)), which equals
  // sum(w * x) for normalized taps and reproduces constant inputs exactly.
  ImageRaster horizontal(H, W, C, image.scale());
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c)
      for (int ch = 0; ch < C; ++ch) {
        const double center = image.at(r, c, ch);
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) acc += taps[k + radius] * (image.at(r, reflect101(c + k, W), ch) - center);
        horizontal.at(r, c, ch) = center + acc;
      }

  ImageRaster out(H, W, C, image.scale());
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c)
      for (int ch = 0; ch < C; ++ch) {
        const double center = horizontal.at(r, c, ch);
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k)
          acc += taps[k + radius] * (horizontal.at(reflect101(r + k, H), c, ch) - center);
        out.at(r, c, ch) = center + acc;
      }
  out.clamp_to_scale();
  return out;
}

ImageRaster gaussian_blur_region(const ImageRaster& image, const MaskRaster& mask, const DegradeParams& params) {
  require_match(image, mask);
  params.validate();
  return composite(image, gaussian_blur(image, params.gaussian_kernel, params.gaussian_sigma), mask);
}

KMeansResult kmeans_quantize(std::span<const double> colors, int dim, int k, std::uint64_t seed,
                             int max_iterations) {
  if (dim <= 0) throw ValidationError("color dimension must be positive");
  if (colors.empty()) throw ValidationError("k-means over an empty pixel list");
  if (colors.size() % dim != 0) throw ValidationError("color buffer is not a multiple of the dimension");
  if (k < 1) throw ValidationError("k must be positive");
  const std::size_t n = colors.size() / dim;
  const auto point = [&](std::size_t i) { return colors.subspan(i * dim, dim); };

  KMeansResult result;
  result.dim = dim;
  result.assignment.assign(n, 0);

  // Distinct colors, lexicographically ordered.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto less = [&](std::size_t a, std::size_t b) {
    const auto pa = point(a), pb = point(b);
    return std::lexicographical_compare(pa.begin(), pa.end(), pb.begin(), pb.end());
  };
  const auto equal = [&](std::size_t a, std::size_t b) {
    const auto pa = point(a), pb = point(b);
    return std::equal(pa.begin(), pa.end(), pb.begin());
  };
  std::stable_sort(order.begin(), order.end(), less);
  std::vector<std::size_t> distinct;
  for (std::size_t idx : order)
    if (distinct.empty() || !equal(distinct.back(), idx)) distinct.push_back(idx);

  if (distinct.size() <= static_cast<std::size_t>(k)) {
    for (std::size_t d : distinct) {
      const auto p = point(d);
      result.palette.insert(result.palette.end(), p.begin(), p.end());
    }
    std::size_t cluster = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (i > 0 && !equal(order[i - 1], order[i])) ++cluster;
      result.assignment[order[i]] = static_cast<int>(cluster);
    }
    return result;
  }

  // k-means++ seeding.
  std::mt19937_64 rng(seed);
  std::vector<double> centers;
  centers.reserve(static_cast<std::size_t>(k) * dim);
  const auto center = [&](int j) { return std::span<const double>(centers).subspan(static_cast<std::size_t>(j) * dim, dim); };
  {
    const auto first = point(std::min(n - 1, static_cast<std::size_t>(uniform01(rng) * n)));
    centers.insert(centers.end(), first.begin(), first.end());
  }
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(point(i), center(0));
  for (int j = 1; j < k; ++j) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    const double target = uniform01(rng) * total;
    std::size_t pick = n - 1;
    double cumulative = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      cumulative += d2[i];
      if (cumulative > target && d2[i] > 0.0) {
        pick = i;
        break;
      }
    }
    const auto chosen = point(pick);
    centers.insert(centers.end(), chosen.begin(), chosen.end());
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(point(i), center(j)));
  }

  const auto assign = [&] {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = squared_distance(point(i), center(0));
      for (int j = 1; j < k; ++j) {
        const double d = squared_distance(point(i), center(j));
        if (d < best_d) {
          best_d = d;
          best = j;
        }
      }
      changed = changed || result.assignment[i] != best;
      result.assignment[i] = best;
    }
    return changed;
  };

  assign();
  for (int it = 0; it < max_iterations; ++it) {
    std::vector<double> sums(static_cast<std::size_t>(k) * dim, 0.0);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const int a = result.assignment[i];
      ++counts[a];
      const auto p = point(i);
      for (int d = 0; d < dim; ++d) sums[static_cast<std::size_t>(a) * dim + d] += p[d];
    }
    for (int j = 0; j < k; ++j) {
      if (counts[j] == 0) continue;  // empty cluster keeps its centroid
      for (int d = 0; d < dim; ++d)
        centers[static_cast<std::size_t>(j) * dim + d] = sums[static_cast<std::size_t>(j) * dim + d] / counts[j];
    }
    result.iterations = it + 1;
    if (!assign()) break;
  }
  result.palette = std::move(centers);
  return result;
}

namespace {

// Orthonormal DCT-II basis, basis[k * n + i].
std::vector<double> dct_basis(int n) {
  std::vector<double> basis(static_cast<std::size_t>(n) * n);
  for (int k = 0; k < n; ++k) {
    const double alpha = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    for (int i = 0; i < n; ++i)
      basis[static_cast<std::size_t>(k) * n + i] = alpha * std::cos(std::numbers::pi * (2 * i + 1) * k / (2.0 * n));
  }
  return basis;
}

// First `count` (row, col) frequencies of a rows x cols block in zigzag order.
std::vector<std::pair<int, int>> zigzag_prefix(int rows, int cols, int count) {
  std::vector<std::pair<int, int>> out;
  for (int s = 0; s <= rows + cols - 2 && static_cast<int>(out.size()) < count; ++s) {
    if (s % 2 == 1) {
      for (int r = 0; r <= s && static_cast<int>(out.size()) < count; ++r)
        if (r < rows && s - r < cols) out.emplace_back(r, s - r);
    } else {
      for (int r = s; r >= 0 && static_cast<int>(out.size()) < count; --r)
        if (r < rows && s - r < cols) out.emplace_back(r, s - r);
    }
  }
  return out;
}

}  // namespace

void truncate_dct_block(std::span<double> block, int rows, int cols, int kept) {
  if (rows <= 0 || cols <= 0 || block.size() != static_cast<std::size_t>(rows) * cols)
    throw ValidationError("DCT block size mismatch");
  if (kept < 1) throw ValidationError("at least one DCT coefficient must be kept");
  if (kept >= rows * cols) return;

  // Work on the residual against the first sample: the kept set always holds
  // DC, so this is the same projection and leaves constant blocks untouched.
  const double anchor = block[0];
  const auto row_basis = dct_basis(rows);
  const auto col_basis = dct_basis(cols);
  std::vector<double> residual(block.begin(), block.end());
  for (double& v : residual) v -= anchor;

  std::vector<double> reconstructed(residual.size(), 0.0);
  for (const auto& [u, v] : zigzag_prefix(rows, cols, kept)) {
    double coeff = 0.0;
    for (int r = 0; r < rows; ++r) {
      double inner = 0.0;
      for (int c = 0; c < cols; ++c) inner += col_basis[static_cast<std::size_t>(v) * cols + c] * residual[static_cast<std::size_t>(r) * cols + c];
      coeff += row_basis[static_cast<std::size_t>(u) * rows + r] * inner;
    }
    if (coeff == 0.0) continue;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c)
        reconstructed[static_cast<std::size_t>(r) * cols + c] +=
            coeff * row_basis[static_cast<std::size_t>(u) * rows + r] * col_basis[static_cast<std::size_t>(v) * cols + c];
  }
  for (std::size_t i = 0; i < block.size(); ++i) block[i] = anchor + reconstructed[i];
}

ImageRaster lowdim_degrade(const ImageRaster& image, const MaskRaster& mask, const DegradeParams& params) {
  require_match(image, mask);
  params.validate();
  const auto box = mask.bounding_box();
  if (box.rows() < params.down_factor || box.cols() < params.down_factor)
    throw ValidationError("region too small for down_factor " + std::to_string(params.down_factor) + " (" +
                          std::to_string(box.rows()) + "x" + std::to_string(box.cols()) + " region)");

  const int rows = box.rows(), cols = box.cols(), C = image.channels();
  std::vector<double> work(static_cast<std::size_t>(rows) * cols * C);
  const auto at = [&](int r, int c, int ch) -> double& {
    return work[(static_cast<std::size_t>(r) * cols + c) * C + ch];
  };
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      for (int ch = 0; ch < C; ++ch) at(r, c, ch) = image.at(box.row0 + r, box.col0 + c, ch);

  if (params.enable_quantize) {
    const auto km = kmeans_quantize(work, C, params.kmeans_k, params.rng_seed, params.kmeans_max_iterations);
    std::vector<double> quantized(work.size());
    for (std::size_t i = 0; i < km.assignment.size(); ++i) {
      const auto color = km.color(km.assignment[i]);
      std::copy(color.begin(), color.end(), quantized.begin() + static_cast<std::ptrdiff_t>(i) * C);
    }
    work = std::move(quantized);
  }

  if (params.enable_resample) {
    // Box downsample then nearest upsample == replace each cell by its mean.
    const int f = params.down_factor;
    for (int r0 = 0; r0 < rows; r0 += f)
      for (int c0 = 0; c0 < cols; c0 += f) {
        const int r1 = std::min(rows, r0 + f), c1 = std::min(cols, c0 + f);
        const double count = static_cast<double>((r1 - r0) * (c1 - c0));
        for (int ch = 0; ch < C; ++ch) {
          const double anchor = at(r0, c0, ch);
          double acc = 0.0;
          for (int r = r0; r < r1; ++r)
            for (int c = c0; c < c1; ++c) acc += at(r, c, ch) - anchor;
          const double mean = anchor + acc / count;
          for (int r = r0; r < r1; ++r)
            for (int c = c0; c < c1; ++c) at(r, c, ch) = mean;
        }
      }
  }

  if (params.enable_compress) {
    const int b = params.compress_block;
    std::vector<double> block;
    for (int r0 = 0; r0 < rows; r0 += b)
      for (int c0 = 0; c0 < cols; c0 += b) {
        const int br = std::min(b, rows - r0), bc = std::min(b, cols - c0);
        for (int ch = 0; ch < C; ++ch) {
          block.resize(static_cast<std::size_t>(br) * bc);
          for (int r = 0; r < br; ++r)
            for (int c = 0; c < bc; ++c) block[static_cast<std::size_t>(r) * bc + c] = at(r0 + r, c0 + c, ch);
          truncate_dct_block(block, br, bc, params.compress_kept_coeffs);
          for (int r = 0; r < br; ++r)
            for (int c = 0; c < bc; ++c) at(r0 + r, c0 + c, ch) = block[static_cast<std::size_t>(r) * bc + c];
        }
      }
  }

  ImageRaster out = image;
  const double hi = image.max_value();
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      if (!mask.at(box.row0 + r, box.col0 + c)) continue;
      for (int ch = 0; ch < C; ++ch) out.at(box.row0 + r, box.col0 + c, ch) = std::clamp(at(r, c, ch), 0.0, hi);
    }
  return out;
}

ImageRaster apply_degradation(MaskingStrategy strategy, const ImageRaster& image, const MaskRaster& mask,
                              const DegradeParams& params) {
  switch (strategy) {
    case MaskingStrategy::center_mask:
      return center_mask(image, mask);
    case MaskingStrategy::gaussian_center:
      return gaussian_blur_region(image, mask, params);
    case MaskingStrategy::lowdim:
      return lowdim_degrade(image, mask, params);
  }
  throw ValidationError("unknown masking strategy");
}

}  // namespace reconprobe
