#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "reconprobe/degrade.hpp"
#include "reconprobe/image.hpp"
#include "reconprobe/region.hpp"

namespace reconprobe {

struct DatasetRecord {
  std::string id;
  std::filesystem::path original_image;
  std::optional<RegionSpec> region;
  std::vector<std::string> references;
  std::string dataset_tag;
  std::string prompt;
};

// "<model>-<strategy>", e.g. "SD3-gc".
struct Variant {
  std::string tag;
  std::string model;
  MaskingStrategy strategy = MaskingStrategy::center_mask;
};

// Throws ValidationError on tags outside the "<model>-{cm,gc,ld}" scheme.
Variant parse_variant_tag(std::string_view tag);

// Reserved variant name for captions/attention of the undegraded originals.
inline constexpr std::string_view kOriginalVariant = "orig";

struct DecodeSettings {
  int beams = 6;
  double top_p = 0.9;
  double temperature = 0.8;
  int max_tokens = 64;
  int candidates = 3;
};

struct InpaintSettings {
  int steps = 50;
  double guidance = 7.5;
  double strength = 1.0;
  std::map<std::string, double> strength_overrides{{"SD3", 0.6}};
  int prompt_max_tokens = 75;

  double strength_for(const std::string& model) const {
    auto it = strength_overrides.find(model);
    return it == strength_overrides.end() ? strength : it->second;
  }
};

enum class CandidateRule { first, max };
std::string_view to_string(CandidateRule rule);
CandidateRule parse_candidate_rule(std::string_view text);

struct CaptionSettings {
  CandidateRule bleu_candidate = CandidateRule::first;
  std::optional<std::filesystem::path> synonyms;
};

struct AttentionSettings {
  bool tvd_halved = false;
  double patch_threshold = 0.5;
  std::optional<int> embedding_layer;  // default: last layer
};

enum class CorrelationPooling { per_variant, per_sample };

struct CorrelationSettings {
  CorrelationPooling pooling = CorrelationPooling::per_variant;
  std::vector<std::string> recon_metrics{"mse", "psnr", "ssim", "lpips"};
  std::vector<std::string> caption_metrics{"bleu1", "bleu2", "bleu3", "bleu4", "meteor", "rouge_l"};
  std::string guidance_key = "guidance_scale";
};

struct RegionDefaults {
  double center_area_fraction = kDefaultCenterAreaFraction;
  double temporal_start_fraction = kDefaultTemporalStartFraction;
  double temporal_length_fraction = kDefaultTemporalLengthFraction;
};

struct Settings {
  DecodeSettings decode;
  InpaintSettings inpaint;
  DegradeParams degrade;
  CaptionSettings captions;
  AttentionSettings attention;
  CorrelationSettings correlation;
  RegionDefaults regions;
  std::map<std::string, PixelScale> pixel_scale;  // dataset_tag -> scale; default unit

  PixelScale scale_for(const std::string& dataset_tag) const {
    auto it = pixel_scale.find(dataset_tag);
    return it == pixel_scale.end() ? PixelScale::unit : it->second;
  }
};

struct IoRoots {
  std::filesystem::path images;
  std::filesystem::path interchange;
  std::optional<std::filesystem::path> attention;
  std::optional<std::filesystem::path> degraded;
  std::filesystem::path reports;
};

struct RunManifest {
  std::filesystem::path base_dir;  // relative paths resolve against this
  std::vector<DatasetRecord> records;
  std::vector<Variant> variants;
  Settings settings;
  IoRoots io_roots;
};

// Parses manifest JSON (records[], variants[], settings{}, io_roots{}).
// Throws ValidationError on structural problems.
RunManifest parse_manifest(std::string_view json_text, const std::filesystem::path& base_dir);
RunManifest load_manifest(const std::filesystem::path& path);

// Settings as compact JSON with sorted keys; paths are reduced to file names so
// the echo does not depend on where a run lives.
std::string settings_to_json(const Settings& settings);

// A manifest whose ids are unique, variant tags well formed, regions fully
// parameterized and paths absolute and present.
class ValidatedManifest {
 public:
  const RunManifest& manifest() const { return manifest_; }
  const std::vector<DatasetRecord>& records() const { return manifest_.records; }
  const std::vector<Variant>& variants() const { return manifest_.variants; }
  const Settings& settings() const { return manifest_.settings; }
  const IoRoots& io_roots() const { return manifest_.io_roots; }

  PixelScale scale_for(const DatasetRecord& record) const { return settings().scale_for(record.dataset_tag); }
  // Distinct strategies across variants, in cm, gc, ld order.
  std::vector<MaskingStrategy> strategies() const;

 private:
  friend ValidatedManifest validate_manifest(RunManifest manifest);
  explicit ValidatedManifest(RunManifest m) : manifest_(std::move(m)) {}
  RunManifest manifest_;
};

ValidatedManifest validate_manifest(RunManifest manifest);

// Region of a validated record resolved against its image.
MaskRaster resolve_region(const DatasetRecord& record, const ImageRaster& image);

}  // namespace reconprobe
