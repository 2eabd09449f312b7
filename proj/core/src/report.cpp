#include "reconprobe/report.hpp"

#include <algorithm>
#include <set>

#include "json.hpp"
#include "reconprobe/caption.hpp"
#include "reconprobe/error.hpp"
#include "reconprobe/fidelity.hpp"

namespace reconprobe {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string cell(const std::optional<double>& v) { return v ? format_shortest(*v) : std::string(); }

std::vector<std::string> non_baseline_variants(const MetricStore& store) {
  std::vector<std::string> out;
  for (const auto& v : store.variants())
    if (v != kOriginalVariant) out.push_back(v);
  return out;
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

CsvTable fidelity_table(const MetricStore& store) {
  CsvTable t;
  t.header = {"variant", "n"};
  for (const auto& m : fidelity_metric_names()) t.header.push_back(m);
  for (const auto& v : non_baseline_variants(store)) {
    std::vector<std::string> row{v, std::to_string(store.record_values(v, "mse").size())};
    for (const auto& m : fidelity_metric_names()) row.push_back(cell(store.variant_value(v, m)));
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::vector<std::string> caption_columns(const MetricStore& store) {
  const auto present = store.metrics();
  const std::set<std::string> have(present.begin(), present.end());
  std::vector<std::string> out;
  for (const auto& m : lexical_metric_names())
    if (have.count(m)) out.push_back(m);
  for (const auto& m : present)
    if (std::find(lexical_metric_names().begin(), lexical_metric_names().end(), m) == lexical_metric_names().end())
      out.push_back(m);
  return out;
}

CsvTable captions_table(const MetricStore& store) {
  CsvTable t;
  const auto cols = caption_columns(store);
  t.header = {"variant"};
  t.header.insert(t.header.end(), cols.begin(), cols.end());
  for (const auto& v : store.variants()) {
    std::vector<std::string> row{v};
    for (const auto& m : cols) row.push_back(cell(store.variant_value(v, m)));
    t.rows.push_back(std::move(row));
  }
  return t;
}

CsvTable captions_delta_table(const MetricStore& store) {
  const auto variants = store.variants();
  if (std::find(variants.begin(), variants.end(), kOriginalVariant) == variants.end())
    throw ValidationError("no '" + std::string(kOriginalVariant) + "' captions to compute deltas against");
  CsvTable t;
  const auto cols = caption_columns(store);
  t.header = {"variant"};
  for (const auto& m : cols) {
    t.header.push_back(m);
    t.header.push_back(m + "_pct_delta");
  }
  for (const auto& v : non_baseline_variants(store)) {
    std::vector<std::string> row{v};
    for (const auto& m : cols) {
      const auto value = store.variant_value(v, m);
      const auto base = store.variant_value(kOriginalVariant, m);
      row.push_back(cell(value));
      row.push_back(value && base ? cell(percent_delta(*value, *base)) : std::string());
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

CsvTable loo_table(const MetricStore& store, const std::vector<std::string>& recon_metrics,
                   const std::vector<std::string>& caption_metrics, std::vector<std::string>& warnings) {
  CsvTable t;
  t.header = {"recon_metric", "caption_metric", "n", "r_full_min", "r_full_max", "mu_loo", "sigma_loo", "sign_flips"};
  const auto matrix = correlation_matrix(store, recon_metrics, caption_metrics, CorrelationPooling::per_variant);
  for (const auto& rm : recon_metrics) {
    std::vector<std::vector<std::string>> rows;
    std::vector<double> pooled, r_full;
    double sigma_max = 0.0;
    int flips = 0;
    std::size_t n = 0;
    for (const auto& cm : caption_metrics) {
      const auto* c = matrix.find(rm, cm);
      if (!c || !c->r) continue;  // already warned by correlation_matrix
      std::vector<double> xs, ys;
      for (const auto& p : c->points) {
        xs.push_back(p.x);
        ys.push_back(p.y);
      }
      LooStability s;
      try {
        s = loo_stability(xs, ys);
      } catch (const ValidationError& e) {
        warnings.push_back("LOO (" + rm + ", " + cm + ") skipped: " + e.what());
        continue;
      }
      n = xs.size();
      pooled.insert(pooled.end(), s.loo.begin(), s.loo.end());
      r_full.push_back(s.r_full);
      sigma_max = std::max(sigma_max, s.sigma_loo);
      flips += s.sign_flips;
      rows.push_back({rm, cm, std::to_string(xs.size()), format_shortest(s.r_full), format_shortest(s.r_full),
                      format_shortest(s.mu_loo), format_shortest(s.sigma_loo), std::to_string(s.sign_flips)});
    }
    if (rows.empty()) continue;
    t.rows.insert(t.rows.end(), rows.begin(), rows.end());
    const auto [lo, hi] = std::minmax_element(r_full.begin(), r_full.end());
    t.rows.push_back({rm, std::string(kAggregateScope), std::to_string(n), format_shortest(*lo), format_shortest(*hi),
                      format_shortest(mean_std(pooled).mean), format_shortest(sigma_max), std::to_string(flips)});
  }
  return t;
}

CsvTable layers_table(const std::vector<LayerSummary>& layers) {
  static const std::vector<std::pair<const char*, MeanStd LayerSummary::*>> fields{
      {"tvd_total", &LayerSummary::tvd_total},       {"tvd_inner", &LayerSummary::tvd_inner},
      {"tvd_outer", &LayerSummary::tvd_outer},       {"entropy_orig", &LayerSummary::entropy_orig},
      {"entropy_recon", &LayerSummary::entropy_recon}, {"cls_cosine", &LayerSummary::cls_cosine}};
  CsvTable t;
  t.header = {"variant", "layer", "n"};
  for (const auto& [name, _] : fields) {
    t.header.push_back(std::string(name) + "_mean");
    t.header.push_back(std::string(name) + "_std");
  }
  for (const auto& s : layers) {
    std::vector<std::string> row{s.variant, std::to_string(s.layer), std::to_string(s.count)};
    for (const auto& [_, member] : fields) {
      row.push_back(format_shortest((s.*member).mean));
      row.push_back(format_shortest((s.*member).std));
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

CsvTable correlations_table(const CorrelationMatrix& matrix) {
  CsvTable t;
  t.header = {"recon_metric", "caption_metric", "r", "label", "x", "y"};
  for (const auto& c : matrix.cells) {
    if (!c.r) {
      t.rows.push_back({c.recon_metric, c.caption_metric, "", "", "", ""});
      continue;
    }
    for (const auto& p : c.points)
      t.rows.push_back({c.recon_metric, c.caption_metric, format_shortest(*c.r), p.label, format_shortest(p.x),
                        format_shortest(p.y)});
  }
  return t;
}

namespace {

json conventions(const Settings& s) {
  return {
      {"tvd", s.attention.tvd_halved ? "halved sum of absolute differences, range [0, 1]"
                                     : "sum of absolute differences, range [0, 2]"},
      {"entropy", "natural log on the renormalized patch distribution"},
      {"psnr_cap_db", kPsnrCapDb},
      {"psnr_corpus", "mean of per-image PSNR"},
      {"ssim", "single-scale, luma, 11x11 Gaussian window sigma 1.5, averaged over masked window centers"},
      {"bleu", "corpus-level, no smoothing, candidate rule '" + std::string(to_string(s.captions.bleu_candidate)) + "'"},
      {"meteor",
       "METEOR-lite: exact, Porter-stem and synonym-table alignment without WordNet; "
       "Fmean = PR/(0.9P + 0.1R), penalty 0.5*(chunks/matches)^3"},
      {"rouge_l", "LCS F-measure with beta 1.2, max over references"},
      {"correlation", s.correlation.pooling == CorrelationPooling::per_sample ? "per-sample points"
                                                                               : "one point per variant"},
      {"loo_summary_row", "caption_metric '*': r_full range over pairs, mu_loo over pooled LOO values, "
                          "largest per-pair sigma_loo, total sign flips"},
      {"sign_of_zero_r", "positive"}};
}

}  // namespace

std::vector<std::string> emit_report(const ReportInputs& in, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create report directory " + dir.string());

  std::vector<std::string> written;
  json absent = json::object();
  std::vector<std::string> warnings = in.warnings;
  const auto put = [&](const std::string& name, const CsvTable& table) {
    write_csv(table, dir / name);
    written.push_back(name);
  };

  if (!in.fidelity.empty()) put("fidelity.csv", fidelity_table(in.fidelity));
  else absent["fidelity.csv"] = "no fidelity scores";

  if (!in.captions.empty()) {
    put("captions.csv", captions_table(in.captions));
    try {
      put("captions_delta.csv", captions_delta_table(in.captions));
    } catch (const ValidationError& e) {
      absent["captions_delta.csv"] = e.what();
    }
  } else {
    absent["captions.csv"] = "no caption scores";
    absent["captions_delta.csv"] = "no caption scores";
  }

  json correlations = nullptr;
  if (!in.fidelity.empty() && !in.captions.empty()) {
    MetricStore merged = in.fidelity;
    merged.merge(in.captions.records());
    const auto& cs = in.settings.correlation;
    const auto matrix = correlation_matrix(merged, cs.recon_metrics, cs.caption_metrics, cs.pooling);
    warnings.insert(warnings.end(), matrix.warnings.begin(), matrix.warnings.end());
    put("correlations.csv", correlations_table(matrix));
    put("loo.csv", loo_table(merged, cs.recon_metrics, cs.caption_metrics, warnings));
    correlations = json::object();
    for (const auto& c : matrix.cells) correlations[c.recon_metric][c.caption_metric] = optional_number(c.r);
    if (!matrix.missing.empty()) correlations["_missing_cells"] = matrix.missing;
  } else {
    const char* why = in.fidelity.empty() ? "no fidelity scores" : "no caption scores";
    absent["correlations.csv"] = why;
    absent["loo.csv"] = why;
  }

  if (in.layers) put("layers.csv", layers_table(*in.layers));
  else absent["layers.csv"] = "no attention inputs";

  json guidance = nullptr;
  const auto& key = in.settings.correlation.guidance_key;
  const auto fidelity_metrics = in.fidelity.metrics();
  if (std::find(fidelity_metrics.begin(), fidelity_metrics.end(), key) != fidelity_metrics.end()) {
    try {
      const auto sweep = guidance_sweep_summary(in.fidelity, key, {"lpips", "ssim"});
      guidance = {{"key", key}, {"best_lpips_scale", optional_number(sweep.best_lpips_scale)}};
      json rows = json::array();
      for (const auto& r : sweep.rows) {
        json m = json::object();
        for (const auto& [name, ms] : r.metrics) m[name] = {{"mean", ms.mean}, {"std", ms.std}};
        rows.push_back({{"scale", r.scale}, {"n", r.count}, {"metrics", m}});
      }
      guidance["scales"] = rows;
    } catch (const ValidationError& e) {
      warnings.push_back(std::string("guidance sweep skipped: ") + e.what());
    }
  }

  std::sort(written.begin(), written.end());
  json summary = {{"status", "complete"},
                  {"files", written},
                  {"absent", absent},
                  {"config", json::parse(settings_to_json(in.settings))},
                  {"conventions", conventions(in.settings)},
                  {"correlations", correlations},
                  {"guidance", guidance},
                  {"warnings", warnings},
                  {"notes", in.notes}};
  write_text_file(dir / "summary.json", summary.dump(2) + "\n");
  written.push_back("summary.json");
  return written;
}

void write_failure_summary(const fs::path& dir, const std::string& stage, const std::string& error,
                           const std::vector<std::string>& completed, const std::vector<std::string>& notes) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  json summary = {{"status", "failed"},
                  {"failed_stage", stage},
                  {"error", error},
                  {"completed_stages", completed},
                  {"notes", notes},
                  {"partial", true}};
  write_text_file(dir / "summary.json", summary.dump(2) + "\n");
}

}  // namespace reconprobe
