#include "reconprobe/attention.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

#include "reconprobe/error.hpp"

namespace reconprobe {

AttentionStack::AttentionStack(std::string record_id, std::string variant, PatchGrid grid,
                               std::vector<std::vector<double>> attention, std::vector<std::vector<double>> cls)
    : record_id_(std::move(record_id)),
      variant_(std::move(variant)),
      grid_(grid),
      attention_(std::move(attention)),
      cls_(std::move(cls)) {
  const std::string who = "attention stack (" + record_id_ + ", " + variant_ + ")";
  if (grid_.rows <= 0 || grid_.cols <= 0) throw ValidationError(who + ": grid must be positive");
  if (attention_.empty()) throw ValidationError(who + ": no layers");
  if (cls_.size() != attention_.size())
    throw ValidationError(who + ": " + std::to_string(attention_.size()) + " attention layers but " +
                          std::to_string(cls_.size()) + " CLS embeddings");
  for (std::size_t l = 0; l < attention_.size(); ++l) {
    auto& row = attention_[l];
    if (row.size() != static_cast<std::size_t>(grid_.size()))
      throw ValidationError(who + ": layer " + std::to_string(l) + " has " + std::to_string(row.size()) +
                            " weights, grid needs " + std::to_string(grid_.size()));
    double sum = 0.0;
    for (double w : row) {
      if (!(w >= 0.0) || !std::isfinite(w))
        throw ValidationError(who + ": negative or non-finite weight in layer " + std::to_string(l));
      sum += w;
    }
    if (std::abs(sum - 1.0) > kRenormalizeTolerance)
      throw ValidationError(who + ": layer " + std::to_string(l) + " sums to " + std::to_string(sum));
    // Rows already normalized up to rounding are kept bit-exact so that
    // save/load round trips are stable.
    if (std::abs(sum - 1.0) > 1e-12)
      for (double& w : row) w /= sum;
  }
  const std::size_t dim = cls_.front().size();
  for (const auto& e : cls_) {
    if (e.size() != dim || dim == 0) throw ValidationError(who + ": inconsistent CLS embedding dimension");
  }
}

std::size_t PatchMask::count() const { return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), 1)); }

namespace {

void require_distribution(std::span<const double> p, const char* name) {
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0)) throw ValidationError(std::string(name) + " has a negative entry");
    sum += v;
  }
  if (std::abs(sum - 1.0) > kDistributionTolerance)
    throw ValidationError(std::string(name) + " is not normalized (sums to " + std::to_string(sum) + ")");
}

void require_pair(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size())
    throw ValidationError("length mismatch: " + std::to_string(p.size()) + " vs " + std::to_string(q.size()));
  require_distribution(p, "p");
  require_distribution(q, "q");
}

}  // namespace

double attention_tvd(std::span<const double> p, std::span<const double> q, TvdConvention convention) {
  require_pair(p, q);
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) sum += std::abs(p[i] - q[i]);
  return convention.factor() * sum;
}

double attention_entropy(std::span<const double> p) {
  require_distribution(p, "distribution");
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

PatchMask patch_mask_from_pixel_mask(const MaskRaster& mask, PatchGrid grid, double threshold) {
  if (grid.rows <= 0 || grid.cols <= 0) throw ValidationError("patch grid must be positive");
  if (grid.rows > mask.height() || grid.cols > mask.width())
    throw ValidationError("grid larger than image (" + std::to_string(grid.rows) + "x" + std::to_string(grid.cols) +
                          " patches for " + std::to_string(mask.height()) + "x" + std::to_string(mask.width()) +
                          " pixels)");
  PatchMask out;
  out.grid = grid;
  out.bits.assign(static_cast<std::size_t>(grid.size()), 0);
  const auto bound = [](int i, int side, int parts) {
    return static_cast<int>(static_cast<long long>(i) * side / parts);
  };
  for (int pr = 0; pr < grid.rows; ++pr) {
    const int r0 = bound(pr, mask.height(), grid.rows), r1 = bound(pr + 1, mask.height(), grid.rows);
    for (int pc = 0; pc < grid.cols; ++pc) {
      const int c0 = bound(pc, mask.width(), grid.cols), c1 = bound(pc + 1, mask.width(), grid.cols);
      std::size_t set = 0;
      for (int r = r0; r < r1; ++r)
        for (int c = c0; c < c1; ++c) set += mask.at(r, c);
      const double area = static_cast<double>((r1 - r0) * (c1 - c0));
      // Integer comparison avoids a 0.49999... fraction flipping the threshold.
      if (static_cast<double>(set) >= threshold * area) out.bits[static_cast<std::size_t>(pr) * grid.cols + pc] = 1;
    }
  }
  return out;
}

SpatialTvd spatial_tvd(std::span<const double> p, std::span<const double> q, const PatchMask& mask,
                       TvdConvention convention) {
  require_pair(p, q);
  if (mask.bits.size() != p.size())
    throw ValidationError("patch mask has " + std::to_string(mask.bits.size()) + " patches, distributions have " +
                          std::to_string(p.size()));
  SpatialTvd s;
  for (std::size_t i = 0; i < p.size(); ++i) (mask.bits[i] ? s.inner : s.outer) += std::abs(p[i] - q[i]);
  s.inner *= convention.factor();
  s.outer *= convention.factor();
  return s;
}

double cls_cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw ValidationError("dimension mismatch: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw ValidationError("zero vector in cosine similarity");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

LayerDriftProfile layer_profile(const AttentionStack& original, const AttentionStack& reconstructed,
                                const PatchMask& mask, TvdConvention convention) {
  if (original.layers() != reconstructed.layers())
    throw ValidationError("layer-count mismatch: " + std::to_string(original.layers()) + " vs " +
                          std::to_string(reconstructed.layers()));
  if (!(original.grid() == reconstructed.grid()) || !(mask.grid == original.grid()))
    throw ValidationError("patch grid mismatch between stacks and mask");
  LayerDriftProfile profile;
  profile.record_id = reconstructed.record_id();
  profile.variant = reconstructed.variant();
  for (int l = 0; l < original.layers(); ++l) {
    const auto p = original.attention(l), q = reconstructed.attention(l);
    LayerDrift d;
    d.tvd_total = attention_tvd(p, q, convention);
    const auto split = spatial_tvd(p, q, mask, convention);
    d.tvd_inner = split.inner;
    d.tvd_outer = split.outer;
    d.entropy_orig = attention_entropy(p);
    d.entropy_recon = attention_entropy(q);
    d.cls_cosine = cls_cosine(original.cls_embedding(l), reconstructed.cls_embedding(l));
    profile.layers.push_back(d);
  }
  return profile;
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  if (values.empty()) return out;
  const double n = static_cast<double>(values.size());
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(ss / (n - 1.0));
  }
  return out;
}

std::vector<LayerSummary> aggregate_profiles(std::span<const LayerDriftProfile> profiles) {
  std::map<std::string, std::vector<const LayerDriftProfile*>> by_variant;
  for (const auto& p : profiles) by_variant[p.variant].push_back(&p);
  std::vector<LayerSummary> out;
  for (const auto& [variant, group] : by_variant) {
    const std::size_t layers = group.front()->layers.size();
    for (const auto* p : group)
      if (p->layers.size() != layers) throw ValidationError("variant '" + variant + "' mixes layer counts");
    for (std::size_t l = 0; l < layers; ++l) {
      const auto collect = [&](double LayerDrift::*field) {
        std::vector<double> v;
        for (const auto* p : group) v.push_back(p->layers[l].*field);
        return mean_std(v);
      };
      LayerSummary s;
      s.variant = variant;
      s.layer = static_cast<int>(l);
      s.count = group.size();
      s.tvd_total = collect(&LayerDrift::tvd_total);
      s.tvd_inner = collect(&LayerDrift::tvd_inner);
      s.tvd_outer = collect(&LayerDrift::tvd_outer);
      s.entropy_orig = collect(&LayerDrift::entropy_orig);
      s.entropy_recon = collect(&LayerDrift::entropy_recon);
      s.cls_cosine = collect(&LayerDrift::cls_cosine);
      out.push_back(s);
    }
  }
  return out;
}

}  // namespace reconprobe
