#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "reconprobe/image.hpp"
#include "reconprobe/metric_store.hpp"

namespace fixtures {

namespace fs = std::filesystem;

fs::path fixture_dir();

// Self-deleting scratch directory.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "reconprobe");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

// Flickr variant order used by the published tables.
const std::vector<std::string>& flickr_variants();

// Per-variant MSE/PSNR/SSIM/LPIPS table, as aggregate-scope observations.
reconprobe::MetricStore load_flickr_fidelity();

struct CaptionCell {
  std::string variant;
  std::string metric;
  double value = 0.0;
  std::optional<double> printed_pct_delta;  // absent on the "orig" row
};

// BLIP caption table with its printed %-delta column.
std::vector<CaptionCell> load_flickr_blip();
reconprobe::MetricStore flickr_blip_store();

// Value of (variant, metric) in a cell list; throws when absent.
double cell_value(const std::vector<CaptionCell>& cells, const std::string& variant, const std::string& metric);

reconprobe::ImageRaster random_image(int height, int width, int channels, reconprobe::PixelScale scale,
                                     std::uint64_t seed);
// Smooth synthetic scene: gradients plus a few flat shapes, 8-bit representable.
reconprobe::ImageRaster scene_image(int height, int width, std::uint64_t seed);
reconprobe::MaskRaster random_mask(int height, int width, double density, std::uint64_t seed);
reconprobe::MaskRaster rect_mask(int height, int width, int row0, int col0, int row1, int col1);

// Random probability vector of length n (strictly positive entries).
std::vector<double> random_distribution(std::size_t n, std::uint64_t seed);

struct ProjectOptions {
  int records = 3;
  int side = 64;
  std::vector<std::string> variants = flickr_variants();
  bool recons = true;
  bool lpips = true;
  bool captions = true;        // captions.jsonl + embeddings.jsonl
  bool paper_captions = false; // caption_scores.jsonl with the BLIP table instead
  bool attention = true;
  bool guidance = false;       // guidance_scale observations in a scores file
};

struct Project {
  fs::path root;
  fs::path manifest;
  fs::path interchange;
  std::vector<std::string> record_ids;
  std::vector<std::string> variants;
};

// Writes images, a manifest and interchange files under `root`.
Project write_project(const fs::path& root, const ProjectOptions& options = {});

// relative path -> sha256 of every regular file below `dir`.
std::map<std::string, std::string> hash_tree(const fs::path& dir);

}  // namespace fixtures
