#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "reconprobe/attention.hpp"
#include "reconprobe/manifest.hpp"
#include "reconprobe/metric_store.hpp"

namespace reconprobe {

// Sample Pearson correlation, two-pass, clamped to [-1, 1].
// Throws ValidationError for n < 3, unequal lengths or zero variance.
double pearson(std::span<const double> xs, std::span<const double> ys);

struct LooStability {
  double r_full = 0.0;
  double mu_loo = 0.0;
  double sigma_loo = 0.0;  // sample standard deviation of the LOO correlations
  int sign_flips = 0;      // an r of exactly zero counts as positive
  std::vector<double> loo;  // loo[i] is r with point i removed
};

// Throws ValidationError for n < 4, naming every LOO subset that has zero variance.
LooStability loo_stability(std::span<const double> xs, std::span<const double> ys);

// (inpainted - original) / original * 100; nullopt when original is 0 or either is non-finite.
std::optional<double> percent_delta(double inpainted, double original);

struct CorrelationPoint {
  std::string label;  // variant, or "record/variant" when pooling per sample
  double x = 0.0;
  double y = 0.0;
};

struct CorrelationCell {
  std::string recon_metric;
  std::string caption_metric;
  std::optional<double> r;  // absent when the pair was skipped
  std::vector<CorrelationPoint> points;
};

struct CorrelationMatrix {
  std::vector<CorrelationCell> cells;  // recon-major, in the requested metric order
  std::vector<std::string> missing;    // "variant/metric" cells absent from the store
  std::vector<std::string> warnings;

  const CorrelationCell* find(const std::string& recon, const std::string& caption) const;
};

// Points exclude the reserved "orig" variant. Per-variant pooling uses one point
// per variant and skips a pair when any of its cells is missing; per-sample
// pooling uses every (record, variant) holding both values.
CorrelationMatrix correlation_matrix(const MetricStore& store, const std::vector<std::string>& recon_metrics,
                                     const std::vector<std::string>& caption_metrics,
                                     CorrelationPooling pooling = CorrelationPooling::per_variant);

struct GuidanceScaleRow {
  double scale = 0.0;
  std::size_t count = 0;
  std::map<std::string, MeanStd> metrics;
};

struct GuidanceSweep {
  std::vector<GuidanceScaleRow> rows;  // ascending scale
  std::optional<double> best_lpips_scale;
};

// Groups per-record observations by the value of `guidance_key` recorded for
// the same (record, variant). Best LPIPS ties go to the lower scale.
GuidanceSweep guidance_sweep_summary(const MetricStore& store, const std::string& guidance_key,
                                     const std::vector<std::string>& metrics);

}  // namespace reconprobe
