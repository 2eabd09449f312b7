#include "reconprobe/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <regex>
#include <set>

#include "json.hpp"
#include "reconprobe/error.hpp"

namespace reconprobe {

using json = nlohmann::json;

Variant parse_variant_tag(std::string_view tag) {
  static const std::regex scheme(R"(^([A-Za-z0-9._]+)-(cm|gc|ld)$)");
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_match(tag.begin(), tag.end(), m, scheme))
    throw ValidationError("unknown variant tag scheme '" + std::string(tag) +
                          "' (expected <model>-<cm|gc|ld>, e.g. SD3-gc)");
  return Variant{std::string(tag), m[1].str(), parse_strategy_tag(m[2].str())};
}

std::string_view to_string(CandidateRule rule) { return rule == CandidateRule::max ? "max" : "first"; }

CandidateRule parse_candidate_rule(std::string_view text) {
  if (text == "first") return CandidateRule::first;
  if (text == "max") return CandidateRule::max;
  throw ValidationError("unknown candidate rule '" + std::string(text) + "' (expected first or max)");
}

namespace {

template <typename T>
void read_opt(const json& obj, const char* key, T& target) {
  if (obj.contains(key)) target = obj.at(key).get<T>();
}

template <typename T>
void read_opt(const json& obj, const char* key, std::optional<T>& target) {
  if (obj.contains(key) && !obj.at(key).is_null()) target = obj.at(key).get<T>();
}

RegionSpec parse_region(const json& j) {
  RegionSpec spec;
  spec.kind = parse_region_kind(j.value("kind", std::string("center_box")));
  read_opt(j, "area_fraction", spec.area_fraction);
  read_opt(j, "start_fraction", spec.start_fraction);
  read_opt(j, "length_fraction", spec.length_fraction);
  if (j.contains("bbox")) {
    const auto& b = j.at("bbox");
    if (!b.is_array() || b.size() != 4) throw ValidationError("bbox must be [x0, y0, x1, y1]");
    spec.bbox = std::array<double, 4>{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(),
                                      b[3].get<double>()};
  }
  return spec;
}

DatasetRecord parse_record(const json& j) {
  DatasetRecord r;
  r.id = j.at("id").get<std::string>();
  r.original_image = j.at("original_image").get<std::string>();
  if (j.contains("region") && !j.at("region").is_null()) r.region = parse_region(j.at("region"));
  read_opt(j, "references", r.references);
  read_opt(j, "dataset_tag", r.dataset_tag);
  read_opt(j, "prompt", r.prompt);
  return r;
}

void parse_settings(const json& j, Settings& s) {
  if (j.contains("decode")) {
    const auto& d = j.at("decode");
    read_opt(d, "beams", s.decode.beams);
    read_opt(d, "top_p", s.decode.top_p);
    read_opt(d, "temperature", s.decode.temperature);
    read_opt(d, "max_tokens", s.decode.max_tokens);
    read_opt(d, "candidates", s.decode.candidates);
  }
  if (j.contains("inpaint")) {
    const auto& d = j.at("inpaint");
    read_opt(d, "steps", s.inpaint.steps);
    read_opt(d, "guidance", s.inpaint.guidance);
    read_opt(d, "strength", s.inpaint.strength);
    read_opt(d, "strength_overrides", s.inpaint.strength_overrides);
    read_opt(d, "prompt_max_tokens", s.inpaint.prompt_max_tokens);
  }
  if (j.contains("degrade")) {
    const auto& d = j.at("degrade");
    auto& p = s.degrade;
    read_opt(d, "gaussian_kernel", p.gaussian_kernel);
    if (d.contains("gaussian_sigma")) p.gaussian_sigma = d.at("gaussian_sigma").get<double>();
    else if (d.contains("gaussian_kernel")) p.gaussian_sigma = p.gaussian_kernel / 6.0;
    read_opt(d, "kmeans_k", p.kmeans_k);
    read_opt(d, "kmeans_max_iterations", p.kmeans_max_iterations);
    read_opt(d, "down_factor", p.down_factor);
    read_opt(d, "compress_block", p.compress_block);
    read_opt(d, "compress_kept_coeffs", p.compress_kept_coeffs);
    read_opt(d, "rng_seed", p.rng_seed);
    if (d.contains("stages")) {
      const auto& st = d.at("stages");
      read_opt(st, "quantize", p.enable_quantize);
      read_opt(st, "resample", p.enable_resample);
      read_opt(st, "compress", p.enable_compress);
    }
  }
  if (j.contains("captions")) {
    const auto& d = j.at("captions");
    if (d.contains("bleu_candidate")) s.captions.bleu_candidate = parse_candidate_rule(d.at("bleu_candidate").get<std::string>());
    if (d.contains("synonyms") && !d.at("synonyms").is_null())
      s.captions.synonyms = std::filesystem::path(d.at("synonyms").get<std::string>());
  }
  if (j.contains("attention")) {
    const auto& d = j.at("attention");
    read_opt(d, "tvd_halved", s.attention.tvd_halved);
    read_opt(d, "patch_threshold", s.attention.patch_threshold);
    read_opt(d, "embedding_layer", s.attention.embedding_layer);
  }
  if (j.contains("correlation")) {
    const auto& d = j.at("correlation");
    if (d.contains("pooling")) {
      const auto p = d.at("pooling").get<std::string>();
      if (p == "per_variant") s.correlation.pooling = CorrelationPooling::per_variant;
      else if (p == "per_sample") s.correlation.pooling = CorrelationPooling::per_sample;
      else throw ValidationError("unknown correlation pooling '" + p + "'");
    }
    read_opt(d, "recon_metrics", s.correlation.recon_metrics);
    read_opt(d, "caption_metrics", s.correlation.caption_metrics);
    read_opt(d, "guidance_key", s.correlation.guidance_key);
  }
  if (j.contains("regions")) {
    const auto& d = j.at("regions");
    read_opt(d, "center_area_fraction", s.regions.center_area_fraction);
    read_opt(d, "temporal_start_fraction", s.regions.temporal_start_fraction);
    read_opt(d, "temporal_length_fraction", s.regions.temporal_length_fraction);
  }
  if (j.contains("pixel_scale")) {
    for (const auto& [tag, value] : j.at("pixel_scale").items())
      s.pixel_scale[tag] = parse_pixel_scale(value.get<std::string>());
  }
}

}  // namespace

RunManifest parse_manifest(std::string_view json_text, const std::filesystem::path& base_dir) {
  RunManifest m;
  m.base_dir = base_dir;
  try {
    const json j = json::parse(json_text);
    if (!j.is_object()) throw ValidationError("manifest must be a JSON object");
    for (const auto& r : j.at("records")) m.records.push_back(parse_record(r));
    if (j.contains("variants")) {
      for (const auto& v : j.at("variants"))
        m.variants.push_back(parse_variant_tag(v.is_string() ? v.get<std::string>() : v.at("tag").get<std::string>()));
    }
    if (j.contains("settings")) parse_settings(j.at("settings"), m.settings);
    const json roots = j.value("io_roots", json::object());
    m.io_roots.images = roots.value("images", std::string("."));
    m.io_roots.interchange = roots.value("interchange", std::string("interchange"));
    m.io_roots.reports = roots.value("reports", std::string("reports"));
    if (roots.contains("attention")) m.io_roots.attention = roots.at("attention").get<std::string>();
    if (roots.contains("degraded")) m.io_roots.degraded = roots.at("degraded").get<std::string>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

RunManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read manifest: " + path.string());
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return parse_manifest(text, std::filesystem::absolute(path).parent_path());
}

std::string settings_to_json(const Settings& s) {
  const auto& p = s.degrade;
  json pixel = json::object();
  for (const auto& [tag, scale] : s.pixel_scale) pixel[tag] = std::string(to_string(scale));
  json j = {
      {"decode",
       {{"beams", s.decode.beams},
        {"top_p", s.decode.top_p},
        {"temperature", s.decode.temperature},
        {"max_tokens", s.decode.max_tokens},
        {"candidates", s.decode.candidates}}},
      {"inpaint",
       {{"steps", s.inpaint.steps},
        {"guidance", s.inpaint.guidance},
        {"strength", s.inpaint.strength},
        {"strength_overrides", s.inpaint.strength_overrides},
        {"prompt_max_tokens", s.inpaint.prompt_max_tokens}}},
      {"degrade",
       {{"gaussian_kernel", p.gaussian_kernel},
        {"gaussian_sigma", p.gaussian_sigma},
        {"kmeans_k", p.kmeans_k},
        {"kmeans_max_iterations", p.kmeans_max_iterations},
        {"down_factor", p.down_factor},
        {"compress_block", p.compress_block},
        {"compress_kept_coeffs", p.compress_kept_coeffs},
        {"rng_seed", p.rng_seed},
        {"stages", {{"quantize", p.enable_quantize}, {"resample", p.enable_resample}, {"compress", p.enable_compress}}}}},
      {"captions",
       {{"bleu_candidate", std::string(to_string(s.captions.bleu_candidate))},
        {"synonyms", s.captions.synonyms ? json(s.captions.synonyms->filename().string()) : json(nullptr)}}},
      {"attention",
       {{"tvd_halved", s.attention.tvd_halved},
        {"patch_threshold", s.attention.patch_threshold},
        {"embedding_layer", s.attention.embedding_layer ? json(*s.attention.embedding_layer) : json(nullptr)}}},
      {"correlation",
       {{"pooling", s.correlation.pooling == CorrelationPooling::per_sample ? "per_sample" : "per_variant"},
        {"recon_metrics", s.correlation.recon_metrics},
        {"caption_metrics", s.correlation.caption_metrics},
        {"guidance_key", s.correlation.guidance_key}}},
      {"regions",
       {{"center_area_fraction", s.regions.center_area_fraction},
        {"temporal_start_fraction", s.regions.temporal_start_fraction},
        {"temporal_length_fraction", s.regions.temporal_length_fraction}}},
      {"pixel_scale", pixel}};
  return j.dump();
}

std::vector<MaskingStrategy> ValidatedManifest::strategies() const {
  std::set<MaskingStrategy> seen;
  for (const auto& v : variants()) seen.insert(v.strategy);
  return {seen.begin(), seen.end()};
}

ValidatedManifest validate_manifest(RunManifest m) {
  const auto resolve = [&](const std::filesystem::path& p, const std::filesystem::path& root) {
    return (p.is_absolute() ? p : root / p).lexically_normal();
  };
  const std::filesystem::path base = std::filesystem::absolute(m.base_dir);
  m.base_dir = base;
  m.io_roots.images = resolve(m.io_roots.images, base);
  m.io_roots.interchange = resolve(m.io_roots.interchange, base);
  m.io_roots.reports = resolve(m.io_roots.reports, base);
  if (m.io_roots.attention) m.io_roots.attention = resolve(*m.io_roots.attention, base);
  if (m.io_roots.degraded) m.io_roots.degraded = resolve(*m.io_roots.degraded, base);

  std::set<std::string> tags;
  for (const auto& v : m.variants) {
    if (!tags.insert(v.tag).second) throw ValidationError("duplicate variant tag '" + v.tag + "'");
  }

  m.settings.degrade.validate();
  if (!(m.settings.attention.patch_threshold > 0.0 && m.settings.attention.patch_threshold <= 1.0))
    throw ValidationError("patch_threshold must lie in (0, 1]");
  if (m.settings.captions.synonyms) {
    m.settings.captions.synonyms = resolve(*m.settings.captions.synonyms, base);
    if (!std::filesystem::exists(*m.settings.captions.synonyms))
      throw ValidationError("missing file: " + m.settings.captions.synonyms->string());
  }

  std::set<std::string> ids;
  const auto& defaults = m.settings.regions;
  for (auto& r : m.records) {
    if (r.id.empty()) throw ValidationError("record with empty id");
    if (!ids.insert(r.id).second) throw ValidationError("duplicate id '" + r.id + "'");
    r.original_image = resolve(r.original_image, m.io_roots.images);
    if (!std::filesystem::is_regular_file(r.original_image))
      throw ValidationError("missing file: " + r.original_image.string() + " (record '" + r.id + "')");
    RegionSpec spec = r.region.value_or(RegionSpec{});
    switch (spec.kind) {
      case RegionKind::center_box:
        if (!spec.area_fraction) spec.area_fraction = defaults.center_area_fraction;
        break;
      case RegionKind::temporal_band:
        if (!spec.start_fraction) spec.start_fraction = defaults.temporal_start_fraction;
        if (!spec.length_fraction) spec.length_fraction = defaults.temporal_length_fraction;
        break;
      case RegionKind::bbox:
        if (!spec.bbox) throw ValidationError("record '" + r.id + "': bbox region without coordinates");
        break;
    }
    r.region = spec;
  }
  return ValidatedManifest(std::move(m));
}

MaskRaster resolve_region(const DatasetRecord& record, const ImageRaster& image) {
  return resolve_region(record.region.value_or(RegionSpec{}), image.height(), image.width());
}

}  // namespace reconprobe
