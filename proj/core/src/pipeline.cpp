#include "reconprobe/pipeline.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>

#include "json.hpp"
#include "reconprobe/attention.hpp"
#include "reconprobe/caption.hpp"
#include "reconprobe/csv.hpp"
#include "reconprobe/degrade.hpp"
#include "reconprobe/error.hpp"
#include "reconprobe/fidelity.hpp"
#include "reconprobe/hash.hpp"
#include "reconprobe/metric_store.hpp"
#include "reconprobe/parallel.hpp"
#include "reconprobe/report.hpp"

namespace reconprobe {

namespace fs = std::filesystem;
using json = nlohmann::json;

int exit_code_for(const std::exception& error) {
  if (dynamic_cast<const MissingInputError*>(&error)) return kExitMissingInput;
  if (dynamic_cast<const StageError*>(&error)) return kExitStageFailure;
  if (dynamic_cast<const ValidationError*>(&error)) return kExitValidation;
  return kExitStageFailure;
}

const std::vector<Stage>& all_stages() {
  static const std::vector<Stage> stages{Stage::degrade,   Stage::fidelity,  Stage::captions,
                                         Stage::attention, Stage::correlate, Stage::report};
  return stages;
}

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::degrade: return "degrade";
    case Stage::fidelity: return "fidelity";
    case Stage::captions: return "captions";
    case Stage::attention: return "attention";
    case Stage::correlate: return "correlate";
    case Stage::report: return "report";
  }
  return "?";
}

Stage parse_stage(std::string_view text) {
  for (Stage s : all_stages())
    if (to_string(s) == text) return s;
  throw ValidationError("unknown stage '" + std::string(text) + "'");
}

std::vector<Stage> parse_stage_list(std::string_view text) {
  std::set<Stage> picked;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find(',', pos), text.size());
    std::string_view item = text.substr(pos, end - pos);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (!item.empty()) picked.insert(parse_stage(item));
    pos = end + 1;
  }
  if (picked.empty()) throw ValidationError("empty stage list");
  return {picked.begin(), picked.end()};
}

namespace {

constexpr const char* kStateFile = ".state.json";

struct StageOutcome {
  std::vector<std::string> outputs;  // file names relative to the stage directory
  std::vector<std::string> warnings;
  std::vector<std::string> notes;
};

struct StageState {
  std::string config;
  std::map<std::string, std::string> inputs;
  std::map<std::string, std::string> outputs;
  std::vector<std::string> warnings;
  std::vector<std::string> notes;
};

std::optional<StageState> read_state(const fs::path& dir) {
  const fs::path path = dir / kStateFile;
  if (!fs::exists(path)) return std::nullopt;
  try {
    const json j = json::parse(read_text_file(path));
    StageState s;
    s.config = j.at("config").get<std::string>();
    s.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
    s.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
    s.warnings = j.value("warnings", std::vector<std::string>{});
    s.notes = j.value("notes", std::vector<std::string>{});
    return s;
  } catch (const std::exception&) {
    return std::nullopt;  // unreadable state just forces a re-run
  }
}

void write_state(const fs::path& dir, const std::string& stage, const StageState& s) {
  const json j = {{"stage", stage},       {"config", s.config},     {"inputs", s.inputs},
                  {"outputs", s.outputs}, {"warnings", s.warnings}, {"notes", s.notes}};
  write_text_file(dir / kStateFile, j.dump(2) + "\n");
}

bool outputs_match(const fs::path& dir, const std::map<std::string, std::string>& outputs) {
  for (const auto& [name, hash] : outputs) {
    const fs::path p = dir / name;
    if (!fs::is_regular_file(p) || sha256_file(p) != hash) return false;
  }
  return true;
}

struct StageSpec {
  Stage stage;
  fs::path dir;
  std::string config;                      // fingerprint text
  std::map<std::string, fs::path> inputs;  // stable label -> file
  std::function<StageOutcome()> work;
};

// Runs the stage unless its recorded hashes still match. Returns true when work was done.
bool execute(const StageSpec& spec, StageState& state) {
  StageState fresh;
  fresh.config = sha256_hex(spec.config);
  for (const auto& [label, path] : spec.inputs) fresh.inputs[label] = sha256_file(path);
  if (auto old = read_state(spec.dir);
      old && old->config == fresh.config && old->inputs == fresh.inputs && outputs_match(spec.dir, old->outputs)) {
    state = *old;
    return false;
  }
  fs::create_directories(spec.dir);
  std::error_code ec;
  fs::remove(spec.dir / kStateFile, ec);
  StageOutcome outcome = spec.work();
  for (const auto& name : outcome.outputs) fresh.outputs[name] = sha256_file(spec.dir / name);
  fresh.warnings = std::move(outcome.warnings);
  fresh.notes = std::move(outcome.notes);
  write_state(spec.dir, std::string(to_string(spec.stage)), fresh);
  state = fresh;
  return true;
}

std::vector<std::string> concat(std::vector<std::vector<std::string>> parts) {
  std::vector<std::string> out;
  for (auto& p : parts) out.insert(out.end(), std::make_move_iterator(p.begin()), std::make_move_iterator(p.end()));
  return out;
}

MetricStore load_store(const fs::path& path) {
  MetricStore store;
  store.merge(ingest_external_scores(path));
  return store;
}

class Pipeline {
 public:
  Pipeline(ValidatedManifest manifest, fs::path out, const fs::path& manifest_path)
      : m_(std::move(manifest)), out_(std::move(out)) {
    settings_json_ = settings_to_json(m_.settings());
    manifest_path_ = manifest_path;
    interchange_ = m_.io_roots().interchange;
    attention_root_ = m_.io_roots().attention.value_or(interchange_ / "attention");
    degraded_dir_ = m_.io_roots().degraded.value_or(out_ / "degraded");
  }

  fs::path report_dir() const { return out_ / "report"; }
  fs::path stage_dir(Stage s) const { return s == Stage::degrade ? degraded_dir_ : out_ / std::string(to_string(s)); }

  // Returns whether work was done; throws MissingInputError when inputs are absent.
  bool run(Stage stage, StageState& state) {
    StageSpec spec{stage, stage_dir(stage), settings_json_, {{"manifest", manifest_path_}}, {}};
    switch (stage) {
      case Stage::degrade: prepare_degrade(spec); break;
      case Stage::fidelity: prepare_fidelity(spec); break;
      case Stage::captions: prepare_captions(spec); break;
      case Stage::attention: prepare_attention(spec); break;
      case Stage::correlate: prepare_correlate(spec); break;
      case Stage::report: prepare_report(spec); break;
    }
    return execute(spec, state);
  }

  bool captions_available() const {
    return fs::exists(interchange_ / "captions.jsonl") || fs::exists(interchange_ / "caption_scores.jsonl");
  }
  bool attention_available() const { return fs::is_directory(attention_root_); }
  bool caption_scores_present() const { return fs::exists(stage_dir(Stage::captions) / "caption_scores.jsonl"); }

  std::vector<std::string> notes;  // run-level notes forwarded to the report

 private:
  // ---- degrade ---------------------------------------------------------------
  void prepare_degrade(StageSpec& spec) {
    for (const auto& r : m_.records()) spec.inputs["original/" + r.id] = r.original_image;
    spec.work = [this, dir = spec.dir] {
      const auto& records = m_.records();
      const auto strategies = m_.strategies();
      std::vector<std::vector<std::string>> produced(records.size());
      parallel_for(records.size(), [&](std::size_t i) {
        const auto& r = records[i];
        const ImageRaster image = load_image(r.original_image, m_.scale_for(r));
        const MaskRaster mask = resolve_region(r, image);
        save_mask(mask, dir / (r.id + ".mask.png"));
        produced[i].push_back(r.id + ".mask.png");
        for (MaskingStrategy s : strategies) {
          const std::string name = r.id + "." + std::string(strategy_tag(s)) + ".png";
          save_image(apply_degradation(s, image, mask, m_.settings().degrade), dir / name);
          produced[i].push_back(name);
        }
      });
      return StageOutcome{concat(std::move(produced)), {}, {}};
    };
  }

  // ---- fidelity --------------------------------------------------------------
  fs::path recon_path(const std::string& id, const std::string& variant) const {
    return interchange_ / (id + "." + variant + ".recon.png");
  }

  std::vector<fs::path> external_score_files() const {
    std::vector<fs::path> out;
    if (!fs::is_directory(interchange_)) return out;
    for (const auto& e : fs::directory_iterator(interchange_)) {
      const std::string name = e.path().filename().string();
      if (e.is_regular_file() && name.starts_with("scores") && name.ends_with(".jsonl")) out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  std::vector<std::string> check_sidecar(const fs::path& path, const Variant& variant) const {
    std::vector<std::string> warnings;
    json j;
    try {
      j = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
      return {path.filename().string() + ": unreadable settings echo (" + e.what() + ")"};
    }
    const json& s = j.contains("settings") ? j.at("settings") : j;
    const auto& inpaint = m_.settings().inpaint;
    const std::vector<std::pair<const char*, double>> expected{{"steps", inpaint.steps},
                                                               {"guidance", inpaint.guidance},
                                                               {"strength", inpaint.strength_for(variant.model)},
                                                               {"prompt_max_tokens", inpaint.prompt_max_tokens}};
    for (const auto& [key, want] : expected) {
      if (!s.contains(key) || !s.at(key).is_number()) continue;
      const double got = s.at(key).get<double>();
      if (got != want)
        warnings.push_back(path.filename().string() + ": " + key + " echo " + format_shortest(got) +
                           " differs from manifest " + format_shortest(want));
    }
    return warnings;
  }

  void prepare_fidelity(StageSpec& spec) {
    std::vector<std::string> missing;
    for (const auto& r : m_.records()) {
      spec.inputs["original/" + r.id] = r.original_image;
      for (const auto& v : m_.variants()) {
        const fs::path p = recon_path(r.id, v.tag);
        if (!fs::exists(p)) missing.push_back(p.string());
        spec.inputs["recon/" + r.id + "." + v.tag] = p;
        fs::path sidecar = p;
        sidecar.replace_extension(".json");
        if (fs::exists(sidecar)) spec.inputs["sidecar/" + r.id + "." + v.tag] = sidecar;
      }
    }
    if (!missing.empty()) throw MissingInputError(missing);
    const auto externals = external_score_files();
    for (const auto& p : externals) spec.inputs["scores/" + p.filename().string()] = p;

    spec.work = [this, dir = spec.dir, externals] {
      const auto& records = m_.records();
      std::vector<std::vector<MetricRecord>> scored(records.size());
      std::vector<std::vector<std::string>> warnings(records.size());
      parallel_for(records.size(), [&](std::size_t i) {
        const auto& r = records[i];
        const PixelScale scale = m_.scale_for(r);
        const ImageRaster original = load_image(r.original_image, scale);
        const MaskRaster mask = resolve_region(r, original);
        for (const auto& v : m_.variants()) {
          const fs::path p = recon_path(r.id, v.tag);
          const ImageRaster recon = load_image(p, scale);
          if (!recon.same_shape(original))
            throw ValidationError(p.filename().string() + ": shape differs from the original image");
          const FidelityScores f = score_fidelity(original, recon, mask);
          scored[i].push_back({r.id, v.tag, "mse", f.mse});
          scored[i].push_back({r.id, v.tag, "psnr", f.psnr});
          scored[i].push_back({r.id, v.tag, "ssim", f.ssim});
          fs::path sidecar = p;
          sidecar.replace_extension(".json");
          if (fs::exists(sidecar)) {
            auto w = check_sidecar(sidecar, v);
            warnings[i].insert(warnings[i].end(), w.begin(), w.end());
          }
        }
      });
      MetricStore store;
      CsvTable table;
      table.header = {"record_id", "variant", "mse", "psnr", "ssim"};
      for (const auto& batch : scored) {
        store.merge(batch);
        for (std::size_t k = 0; k < batch.size(); k += 3)
          table.rows.push_back({batch[k].record_id, batch[k].variant, format_exact(batch[k].value),
                                format_exact(batch[k + 1].value), format_exact(batch[k + 2].value)});
      }
      std::sort(table.rows.begin(), table.rows.end());
      for (const auto& p : externals) store.merge(ingest_external_scores(p));
      write_csv(table, dir / "fidelity.csv");
      write_scores_jsonl(store.records(), dir / "scores.jsonl");
      return StageOutcome{{"fidelity.csv", "scores.jsonl"}, concat(std::move(warnings)), {}};
    };
  }

  // ---- captions --------------------------------------------------------------
  std::vector<std::string> check_decode_echo(const std::vector<CaptionLine>& lines) const {
    const auto& d = m_.settings().decode;
    const std::map<std::string, double> expected{{"beams", d.beams},
                                                 {"top_p", d.top_p},
                                                 {"temperature", d.temperature},
                                                 {"max_tokens", d.max_tokens},
                                                 {"candidates", d.candidates}};
    std::set<std::string> seen;
    std::vector<std::string> out;
    for (const auto& line : lines) {
      for (const auto& [key, got] : line.settings) {
        const auto it = expected.find(key);
        if (it == expected.end() || it->second == got) continue;
        std::string msg = "captions.jsonl: " + key + " echo " + format_shortest(got) + " differs from manifest " +
                          format_shortest(it->second);
        if (seen.insert(msg).second) out.push_back(std::move(msg));
      }
    }
    return out;
  }

  void prepare_captions(StageSpec& spec) {
    const fs::path captions = interchange_ / "captions.jsonl";
    const fs::path embeddings = interchange_ / "embeddings.jsonl";
    const fs::path precomputed = interchange_ / "caption_scores.jsonl";
    if (!fs::exists(captions) && !fs::exists(precomputed)) throw MissingInputError({captions.string()});
    if (fs::exists(captions)) spec.inputs["captions.jsonl"] = captions;
    if (fs::exists(embeddings)) spec.inputs["embeddings.jsonl"] = embeddings;
    if (fs::exists(precomputed)) spec.inputs["caption_scores.jsonl"] = precomputed;
    if (m_.settings().captions.synonyms) spec.inputs["synonyms"] = *m_.settings().captions.synonyms;

    spec.work = [this, dir = spec.dir, captions, embeddings, precomputed] {
      MetricStore store;
      std::vector<std::string> warnings;
      if (fs::exists(captions)) {
        const auto lines = parse_captions_jsonl(read_text_file(captions), "captions.jsonl");
        warnings = check_decode_echo(lines);
        std::vector<EmbeddingLine> vectors;
        if (fs::exists(embeddings)) vectors = parse_embeddings_jsonl(read_text_file(embeddings), "embeddings.jsonl");
        std::map<std::string, std::vector<std::string>> references;
        for (const auto& r : m_.records()) references[r.id] = r.references;
        const auto sets = assemble_caption_sets(lines, vectors, references);

        std::optional<SynonymTable> synonyms;
        if (m_.settings().captions.synonyms) synonyms = SynonymTable::load(*m_.settings().captions.synonyms);
        CaptionConfig config;
        config.candidate_rule = m_.settings().captions.bleu_candidate;
        config.synonyms = synonyms ? &*synonyms : nullptr;

        const CaptionTable table = aggregate_caption_scores(sets, config);
        warnings.insert(warnings.end(), table.warnings.begin(), table.warnings.end());
        for (const auto& row : table.rows)
          for (const auto& [metric, value] : row.values)
            store.add({std::string(kAggregateScope), row.variant, metric, value});

        std::vector<ImageCaptionScores> per_image(sets.size());
        parallel_for(sets.size(), [&](std::size_t i) { per_image[i] = score_caption_set(sets[i], config); });
        for (std::size_t i = 0; i < sets.size(); ++i) {
          const auto& s = sets[i];
          store.add({s.record_id, s.variant, "rouge_l", per_image[i].rouge_l});
          store.add({s.record_id, s.variant, "meteor", per_image[i].meteor});
          for (const auto& [tag, value] : per_image[i].embed) store.add({s.record_id, s.variant, tag, value});
        }
      }
      if (fs::exists(precomputed)) store.merge(ingest_external_scores(precomputed));
      write_scores_jsonl(store.records(), dir / "caption_scores.jsonl");
      return StageOutcome{{"caption_scores.jsonl"}, warnings, {}};
    };
  }

  // ---- attention -------------------------------------------------------------
  std::vector<std::string> attention_variants() const {
    std::vector<std::string> out{std::string(kOriginalVariant)};
    for (const auto& v : m_.variants()) out.push_back(v.tag);
    return out;
  }

  void prepare_attention(StageSpec& spec) {
    std::vector<std::string> missing;
    for (const auto& r : m_.records()) {
      spec.inputs["original/" + r.id] = r.original_image;
      for (const auto& v : attention_variants()) {
        const fs::path meta = attention_meta_path(attention_root_, r.id, v);
        if (!fs::exists(meta)) {
          missing.push_back(meta.string());
          continue;
        }
        const std::string stem = r.id + "." + v;
        spec.inputs["attention/" + stem + ".meta.json"] = meta;
        for (const char* suffix : {".attn.csv", ".cls.csv"}) {
          const fs::path p = attention_root_ / (stem + suffix);
          if (fs::exists(p)) spec.inputs["attention/" + stem + suffix] = p;
        }
      }
    }
    if (!missing.empty()) throw MissingInputError(missing);

    spec.work = [this, dir = spec.dir] {
      const auto& records = m_.records();
      const auto variants = attention_variants();
      const auto& as = m_.settings().attention;
      const TvdConvention convention{as.tvd_halved};
      std::vector<std::vector<LayerDriftProfile>> profiles(records.size());
      std::vector<std::vector<AttentionStack>> stacks(records.size());
      parallel_for(records.size(), [&](std::size_t i) {
        const auto& r = records[i];
        std::vector<AttentionStack> loaded;
        for (const auto& v : variants) loaded.push_back(load_attention_stack(attention_meta_path(attention_root_, r.id, v)));
        for (const auto& s : loaded)
          if (s.record_id() != r.id) throw ValidationError("attention meta for '" + r.id + "' names record '" + s.record_id() + "'");
        const ImageRaster image = load_image(r.original_image, m_.scale_for(r));
        const PatchMask patches =
            patch_mask_from_pixel_mask(resolve_region(r, image), loaded.front().grid(), as.patch_threshold);
        for (std::size_t k = 1; k < loaded.size(); ++k)
          profiles[i].push_back(layer_profile(loaded.front(), loaded[k], patches, convention));
        stacks[i] = std::move(loaded);
      });

      CsvTable table;
      table.header = {"record_id",    "variant",      "layer",         "tvd_total", "tvd_inner",
                      "tvd_outer",    "entropy_orig", "entropy_recon", "cls_cosine"};
      for (const auto& per_record : profiles)
        for (const auto& p : per_record)
          for (std::size_t l = 0; l < p.layers.size(); ++l) {
            const auto& d = p.layers[l];
            table.rows.push_back({p.record_id, p.variant, std::to_string(l), format_exact(d.tvd_total),
                                  format_exact(d.tvd_inner), format_exact(d.tvd_outer), format_exact(d.entropy_orig),
                                  format_exact(d.entropy_recon), format_exact(d.cls_cosine)});
          }
      write_csv(table, dir / "profiles.csv");
      std::vector<std::string> outputs{"profiles.csv"};

      std::vector<AttentionStack> flat;
      for (auto& s : stacks) std::move(s.begin(), s.end(), std::back_inserter(flat));
      if (!flat.empty()) {
        const int layer = as.embedding_layer.value_or(flat.front().layers() - 1);
        const std::string name = "embeddings_layer" + std::to_string(layer) + ".csv";
        write_csv(export_embedding_matrix(flat, layer), dir / name);
        outputs.push_back(name);
      }
      return StageOutcome{outputs, {}, {}};
    };
  }

  // ---- correlate -------------------------------------------------------------
  void prepare_correlate(StageSpec& spec) {
    const fs::path fid_dir = stage_dir(Stage::fidelity), cap_dir = stage_dir(Stage::captions);
    std::vector<std::string> missing;
    for (const fs::path& p : {fid_dir / "fidelity.csv", fid_dir / "scores.jsonl", cap_dir / "caption_scores.jsonl"})
      if (!fs::exists(p)) missing.push_back(p.string());
    if (!missing.empty()) throw MissingInputError(missing);
    spec.inputs["fidelity/fidelity.csv"] = fid_dir / "fidelity.csv";
    spec.inputs["fidelity/scores.jsonl"] = fid_dir / "scores.jsonl";
    spec.inputs["captions/caption_scores.jsonl"] = cap_dir / "caption_scores.jsonl";

    spec.work = [this, dir = spec.dir, fid_dir, cap_dir] {
      MetricStore store = load_store(fid_dir / "scores.jsonl");
      store.merge(ingest_external_scores(cap_dir / "caption_scores.jsonl"));
      const auto& cs = m_.settings().correlation;
      const auto matrix = correlation_matrix(store, cs.recon_metrics, cs.caption_metrics, cs.pooling);
      std::vector<std::string> warnings = matrix.warnings;
      write_csv(correlations_table(matrix), dir / "correlations.csv");
      write_csv(loo_table(store, cs.recon_metrics, cs.caption_metrics, warnings), dir / "loo.csv");
      return StageOutcome{{"correlations.csv", "loo.csv"}, warnings, {}};
    };
  }

  // ---- report ----------------------------------------------------------------
  void prepare_report(StageSpec& spec) {
    const fs::path scores = stage_dir(Stage::fidelity) / "scores.jsonl";
    const fs::path captions = stage_dir(Stage::captions) / "caption_scores.jsonl";
    const fs::path profiles = stage_dir(Stage::attention) / "profiles.csv";
    if (fs::exists(scores)) spec.inputs["fidelity/scores.jsonl"] = scores;
    if (fs::exists(captions)) spec.inputs["captions/caption_scores.jsonl"] = captions;
    if (fs::exists(profiles)) spec.inputs["attention/profiles.csv"] = profiles;
    for (Stage s : {Stage::fidelity, Stage::captions, Stage::attention}) {
      const fs::path state = stage_dir(s) / kStateFile;
      if (fs::exists(state)) spec.inputs[std::string(to_string(s)) + "/" + kStateFile] = state;
    }
    for (const auto& n : notes) spec.config += "\nnote: " + n;

    spec.work = [this, dir = spec.dir, scores, captions, profiles] {
      ReportInputs in;
      in.settings = m_.settings();
      in.notes = notes;
      if (fs::exists(scores)) in.fidelity = load_store(scores);
      if (fs::exists(captions)) in.captions = load_store(captions);
      if (fs::exists(profiles)) in.layers = aggregate_profiles(read_profiles(profiles));
      for (Stage s : {Stage::fidelity, Stage::captions, Stage::attention})
        if (auto state = read_state(stage_dir(s))) {
          in.warnings.insert(in.warnings.end(), state->warnings.begin(), state->warnings.end());
          in.notes.insert(in.notes.end(), state->notes.begin(), state->notes.end());
        }
      return StageOutcome{emit_report(in, dir), {}, {}};
    };
  }

  static std::vector<LayerDriftProfile> read_profiles(const fs::path& path) {
    const CsvTable t = read_csv(path);
    const std::size_t rc = t.column("record_id"), vc = t.column("variant"), lc = t.column("layer");
    const std::size_t fields[] = {t.column("tvd_total"),    t.column("tvd_inner"),     t.column("tvd_outer"),
                                  t.column("entropy_orig"), t.column("entropy_recon"), t.column("cls_cosine")};
    std::map<std::pair<std::string, std::string>, LayerDriftProfile> by_key;
    for (const auto& row : t.rows) {
      auto& p = by_key[{row[rc], row[vc]}];
      p.record_id = row[rc];
      p.variant = row[vc];
      const std::size_t layer = std::stoul(row[lc]);
      if (layer != p.layers.size()) throw IoError(path.string() + ": layers out of order");
      p.layers.push_back({parse_double(row[fields[0]]), parse_double(row[fields[1]]), parse_double(row[fields[2]]),
                          parse_double(row[fields[3]]), parse_double(row[fields[4]]), parse_double(row[fields[5]])});
    }
    std::vector<LayerDriftProfile> out;
    for (auto& [_, p] : by_key) out.push_back(std::move(p));
    return out;
  }

  ValidatedManifest m_;
  fs::path out_;
  fs::path manifest_path_;
  fs::path interchange_;
  fs::path attention_root_;
  fs::path degraded_dir_;
  std::string settings_json_;
};

}  // namespace

RunResult run_pipeline(const RunConfig& config) {
  RunManifest raw = load_manifest(config.manifest);
  auto& s = raw.settings;
  if (config.tvd_halved) s.attention.tvd_halved = *config.tvd_halved;
  if (config.bleu_candidate) s.captions.bleu_candidate = *config.bleu_candidate;
  if (config.patch_threshold) s.attention.patch_threshold = *config.patch_threshold;
  if (config.seed) s.degrade.rng_seed = *config.seed;
  ValidatedManifest manifest = validate_manifest(std::move(raw));

  RunResult result;
  result.out_dir = config.out ? fs::absolute(*config.out).lexically_normal() : manifest.io_roots().reports;
  Pipeline pipeline(std::move(manifest), result.out_dir, fs::absolute(config.manifest));
  result.report_dir = pipeline.report_dir();

  const std::vector<Stage> stages = config.stages.empty() ? all_stages() : config.stages;
  std::vector<std::string> completed;
  bool captions_skipped = false;
  for (Stage stage : stages) {
    const std::string name(to_string(stage));
    if (config.optional_model_stages) {
      if (stage == Stage::captions && !pipeline.captions_available()) {
        pipeline.notes.push_back("captions stage skipped: no captions.jsonl or caption_scores.jsonl in the interchange directory");
        result.skipped.push_back(name);
        captions_skipped = true;
        continue;
      }
      if (stage == Stage::attention && !pipeline.attention_available()) {
        pipeline.notes.push_back("attention stage skipped: no attention interchange directory");
        result.skipped.push_back(name);
        continue;
      }
      if (stage == Stage::correlate && captions_skipped && !pipeline.caption_scores_present()) {
        pipeline.notes.push_back("correlate stage skipped: no caption scores");
        result.skipped.push_back(name);
        continue;
      }
    }
    StageState state;
    try {
      const bool worked = pipeline.run(stage, state);
      (worked ? result.executed : result.up_to_date).push_back(name);
    } catch (const MissingInputError& e) {
      write_failure_summary(result.report_dir, name, e.what(), completed, pipeline.notes);
      throw;
    } catch (const std::exception& e) {
      write_failure_summary(result.report_dir, name, e.what(), completed, pipeline.notes);
      throw StageError(name, e.what());
    }
    result.warnings.insert(result.warnings.end(), state.warnings.begin(), state.warnings.end());
    completed.push_back(name);
  }
  return result;
}

}  // namespace reconprobe
