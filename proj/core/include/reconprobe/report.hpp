#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "reconprobe/attention.hpp"
#include "reconprobe/csv.hpp"
#include "reconprobe/manifest.hpp"
#include "reconprobe/metric_store.hpp"
#include "reconprobe/stats.hpp"

namespace reconprobe {

inline const std::vector<std::string>& fidelity_metric_names() {
  static const std::vector<std::string> names{"mse", "psnr", "ssim", "lpips"};
  return names;
}

// Report tables. Floats use the shortest round-trip form, rows are sorted by
// variant tag and the reserved "orig" variant only appears where it is the baseline.

// variant, n, mse, psnr, ssim, lpips: per-variant means of per-record values
// (PSNR is therefore the mean of per-image PSNR). Missing cells stay empty.
CsvTable fidelity_table(const MetricStore& store);

// Caption columns present in the store: lexical metrics in canonical order, then
// the remaining metrics (embedding tags) lexicographically.
std::vector<std::string> caption_columns(const MetricStore& store);

// variant, then one column per caption metric.
CsvTable captions_table(const MetricStore& store);

// variant, then <metric> and <metric>_pct_delta against the "orig" row.
// Throws ValidationError when the store has no "orig" variant.
CsvTable captions_delta_table(const MetricStore& store);

// recon_metric, caption_metric, n, r_full_min, r_full_max, mu_loo, sigma_loo, sign_flips.
// Each recon metric gets one row per caption metric plus a "*" summary row:
// r_full range over pairs, mu_loo over all pooled LOO values, the largest
// sigma_loo and the total flip count. Pairs that cannot be analysed are skipped
// with a warning.
CsvTable loo_table(const MetricStore& store, const std::vector<std::string>& recon_metrics,
                   const std::vector<std::string>& caption_metrics, std::vector<std::string>& warnings);

// variant, layer, n, then <field>_mean and <field>_std for each drift field.
CsvTable layers_table(const std::vector<LayerSummary>& layers);

// Long format: recon_metric, caption_metric, r, label, x, y. A skipped pair gets
// one row with an empty r and no point.
CsvTable correlations_table(const CorrelationMatrix& matrix);

struct ReportInputs {
  Settings settings;
  MetricStore fidelity;                           // per-record fidelity and external scores
  MetricStore captions;                           // caption metrics, usually per-variant aggregates
  std::optional<std::vector<LayerSummary>> layers;  // absent without attention inputs
  std::vector<std::string> warnings;
  std::vector<std::string> notes;
};

// Writes fidelity.csv, captions.csv, captions_delta.csv, loo.csv, layers.csv,
// correlations.csv and summary.json into `dir`. Families without inputs are
// left out and explained in summary.json. Returns the file names written.
std::vector<std::string> emit_report(const ReportInputs& inputs, const std::filesystem::path& dir);

// Summary for a run that aborted in `stage`.
void write_failure_summary(const std::filesystem::path& dir, const std::string& stage, const std::string& error,
                           const std::vector<std::string>& completed, const std::vector<std::string>& notes);

}  // namespace reconprobe
