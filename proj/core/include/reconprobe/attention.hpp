#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "reconprobe/csv.hpp"
#include "reconprobe/image.hpp"

namespace reconprobe {

// Attention rows must sum to 1 within this tolerance.
inline constexpr double kDistributionTolerance = 1e-4;
// Rows within this tolerance are renormalized on ingest; beyond it they are rejected.
inline constexpr double kRenormalizeTolerance = 1e-3;

struct PatchGrid {
  int rows = 0;
  int cols = 0;
  int size() const { return rows * cols; }
  friend bool operator==(const PatchGrid&, const PatchGrid&) = default;
};

// Per-layer CLS-to-patch attention (heads already averaged, CLS column
// dropped) plus the per-layer CLS embedding of one image.
class AttentionStack {
 public:
  AttentionStack() = default;
  // Validates shapes and non-negativity; renormalizes rows whose mass is off by
  // at most kRenormalizeTolerance and rejects the rest.
  AttentionStack(std::string record_id, std::string variant, PatchGrid grid, std::vector<std::vector<double>> attention,
                 std::vector<std::vector<double>> cls_embeddings);

  const std::string& record_id() const { return record_id_; }
  const std::string& variant() const { return variant_; }
  PatchGrid grid() const { return grid_; }
  int layers() const { return static_cast<int>(attention_.size()); }
  int embed_dim() const { return cls_.empty() ? 0 : static_cast<int>(cls_.front().size()); }
  std::span<const double> attention(int layer) const { return attention_.at(static_cast<std::size_t>(layer)); }
  std::span<const double> cls_embedding(int layer) const { return cls_.at(static_cast<std::size_t>(layer)); }

 private:
  std::string record_id_;
  std::string variant_;
  PatchGrid grid_;
  std::vector<std::vector<double>> attention_;
  std::vector<std::vector<double>> cls_;
};

struct PatchMask {
  PatchGrid grid;
  std::vector<std::uint8_t> bits;  // 1 = inpainted patch, row-major
  std::size_t count() const;
};

struct TvdConvention {
  bool halved = false;  // default: plain sum of absolute differences, range [0, 2]
  double factor() const { return halved ? 0.5 : 1.0; }
};

double attention_tvd(std::span<const double> p, std::span<const double> q, TvdConvention convention = {});

// Shannon entropy in nats, 0 ln 0 = 0.
double attention_entropy(std::span<const double> p);

// A patch is inpainted when its masked-pixel fraction reaches `threshold`.
// Patch boundaries are floor(i * H / rows) (same for columns), so grids that
// do not divide the image get patches differing by at most one pixel.
PatchMask patch_mask_from_pixel_mask(const MaskRaster& mask, PatchGrid grid, double threshold = 0.5);

struct SpatialTvd {
  double inner = 0.0;  // over inpainted patches
  double outer = 0.0;  // over the remaining patches
};

// No renormalization per side, so inner + outer is the total drift.
SpatialTvd spatial_tvd(std::span<const double> p, std::span<const double> q, const PatchMask& mask,
                       TvdConvention convention = {});

double cls_cosine(std::span<const double> original, std::span<const double> reconstructed);

struct LayerDrift {
  double tvd_total = 0.0;
  double tvd_inner = 0.0;
  double tvd_outer = 0.0;
  double entropy_orig = 0.0;
  double entropy_recon = 0.0;
  double cls_cosine = 0.0;
};

struct LayerDriftProfile {
  std::string record_id;
  std::string variant;
  std::vector<LayerDrift> layers;
};

LayerDriftProfile layer_profile(const AttentionStack& original, const AttentionStack& reconstructed,
                                const PatchMask& mask, TvdConvention convention = {});

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single value
};

MeanStd mean_std(std::span<const double> values);

struct LayerSummary {
  std::string variant;
  int layer = 0;
  std::size_t count = 0;
  MeanStd tvd_total, tvd_inner, tvd_outer, entropy_orig, entropy_recon, cls_cosine;
};

// Per-variant, per-layer mean +- std; variants lexicographic, layers ascending.
std::vector<LayerSummary> aggregate_profiles(std::span<const LayerDriftProfile> profiles);

// ---- Interchange ------------------------------------------------------------

// Reads "<stem>.meta.json" plus the attention CSV (layer,patch_index,weight)
// and the CLS CSV (layer,dim_index,value) it names (defaults "<stem>.attn.csv"
// and "<stem>.cls.csv").
AttentionStack load_attention_stack(const std::filesystem::path& meta_path);
// Writes the three files for `stack` into `dir` using the stem "<record>.<variant>".
std::filesystem::path save_attention_stack(const AttentionStack& stack, const std::filesystem::path& dir);
std::filesystem::path attention_meta_path(const std::filesystem::path& dir, const std::string& record_id,
                                          const std::string& variant);

struct EmbeddingRow {
  std::string record_id;
  std::string variant;
  std::vector<double> values;
};

// One row per stack: record_id, variant, d0..d{D-1}. Header-only for no stacks.
CsvTable export_embedding_matrix(std::span<const AttentionStack> stacks, int layer);
std::vector<EmbeddingRow> import_embedding_matrix(const CsvTable& table);

}  // namespace reconprobe
