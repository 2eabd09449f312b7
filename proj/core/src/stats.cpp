#include "reconprobe/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "reconprobe/error.hpp"
#include "reconprobe/manifest.hpp"

namespace reconprobe {

namespace {

struct Moments {
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
};

Moments centered_moments(std::span<const double> xs, std::span<const double> ys) {
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  Moments m;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    m.sxx += dx * dx;
    m.syy += dy * dy;
    m.sxy += dx * dy;
  }
  return m;
}

bool zero_variance(std::span<const double> xs, std::span<const double> ys) {
  const auto m = centered_moments(xs, ys);
  return m.sxx == 0.0 || m.syy == 0.0;
}

}  // namespace

double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size())
    throw ValidationError("pearson: length mismatch " + std::to_string(xs.size()) + " vs " + std::to_string(ys.size()));
  if (xs.size() < 3) throw ValidationError("pearson: need at least 3 points, got " + std::to_string(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i)
    if (!std::isfinite(xs[i]) || !std::isfinite(ys[i])) throw ValidationError("pearson: non-finite value");
  const auto m = centered_moments(xs, ys);
  if (m.sxx == 0.0 || m.syy == 0.0) throw ValidationError("pearson: zero variance");
  // The (n-1) factors of the sample covariance and deviations cancel.
  return std::clamp(m.sxy / std::sqrt(m.sxx * m.syy), -1.0, 1.0);
}

LooStability loo_stability(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw ValidationError("loo_stability: length mismatch");
  const std::size_t n = xs.size();
  if (n < 4) throw ValidationError("loo_stability: need at least 4 points, got " + std::to_string(n));
  LooStability out;
  out.r_full = pearson(xs, ys);
  std::vector<std::size_t> degenerate;
  std::vector<double> sx(n - 1), sy(n - 1);
  for (std::size_t drop = 0; drop < n; ++drop) {
    for (std::size_t i = 0, j = 0; i < n; ++i) {
      if (i == drop) continue;
      sx[j] = xs[i];
      sy[j] = ys[i];
      ++j;
    }
    if (zero_variance(sx, sy)) {
      degenerate.push_back(drop);
      continue;
    }
    out.loo.push_back(pearson(sx, sy));
  }
  if (!degenerate.empty()) {
    std::string msg = "loo_stability: zero variance after removing point(s)";
    for (auto d : degenerate) msg += " " + std::to_string(d);
    throw ValidationError(msg);
  }
  const auto stats = mean_std(out.loo);
  out.mu_loo = stats.mean;
  out.sigma_loo = stats.std;
  const bool full_positive = out.r_full >= 0.0;
  for (double r : out.loo)
    if ((r >= 0.0) != full_positive) ++out.sign_flips;
  return out;
}

std::optional<double> percent_delta(double inpainted, double original) {
  if (!std::isfinite(inpainted) || !std::isfinite(original) || original == 0.0) return std::nullopt;
  return (inpainted - original) / original * 100.0;
}

const CorrelationCell* CorrelationMatrix::find(const std::string& recon, const std::string& caption) const {
  for (const auto& c : cells)
    if (c.recon_metric == recon && c.caption_metric == caption) return &c;
  return nullptr;
}

CorrelationMatrix correlation_matrix(const MetricStore& store, const std::vector<std::string>& recon_metrics,
                                     const std::vector<std::string>& caption_metrics, CorrelationPooling pooling) {
  CorrelationMatrix out;
  std::vector<std::string> variants;
  for (const auto& v : store.variants())
    if (v != kOriginalVariant) variants.push_back(v);

  std::set<std::string> missing;
  for (const auto& rm : recon_metrics) {
    for (const auto& cm : caption_metrics) {
      CorrelationCell cell{rm, cm, std::nullopt, {}};
      bool incomplete = false;
      if (pooling == CorrelationPooling::per_variant) {
        for (const auto& v : variants) {
          const auto x = store.variant_value(v, rm);
          const auto y = store.variant_value(v, cm);
          if (!x) missing.insert(v + "/" + rm);
          if (!y) missing.insert(v + "/" + cm);
          if (!x || !y) {
            incomplete = true;
            continue;
          }
          cell.points.push_back({v, *x, *y});
        }
      } else {
        for (const auto& v : variants) {
          const auto xs = store.record_values(v, rm);
          for (const auto& [rec, x] : xs)
            if (auto y = store.get(rec, v, cm)) cell.points.push_back({rec + "/" + v, x, *y});
        }
      }
      const std::string pair = "(" + rm + ", " + cm + ")";
      if (incomplete) {
        out.warnings.push_back("pair " + pair + " skipped: missing cells");
      } else if (cell.points.size() < 3) {
        out.warnings.push_back("pair " + pair + " skipped: only " + std::to_string(cell.points.size()) +
                               " point(s), need 3");
      } else {
        std::vector<double> xs, ys;
        for (const auto& p : cell.points) {
          xs.push_back(p.x);
          ys.push_back(p.y);
        }
        try {
          cell.r = pearson(xs, ys);
        } catch (const ValidationError& e) {
          out.warnings.push_back("pair " + pair + " skipped: " + e.what());
        }
      }
      out.cells.push_back(std::move(cell));
    }
  }
  out.missing.assign(missing.begin(), missing.end());
  return out;
}

GuidanceSweep guidance_sweep_summary(const MetricStore& store, const std::string& guidance_key,
                                     const std::vector<std::string>& metrics) {
  std::map<double, std::map<std::string, std::vector<double>>> grouped;
  std::map<double, std::size_t> counts;
  for (const auto& v : store.variants()) {
    for (const auto& [rec, scale] : store.record_values(v, guidance_key)) {
      ++counts[scale];
      auto& slot = grouped[scale];
      for (const auto& m : metrics)
        if (auto value = store.get(rec, v, m)) slot[m].push_back(*value);
    }
  }
  if (counts.size() < 2)
    throw ValidationError("guidance sweep needs at least 2 distinct '" + guidance_key + "' values, found " +
                          std::to_string(counts.size()));
  GuidanceSweep out;
  for (const auto& [scale, by_metric] : grouped) {
    GuidanceScaleRow row;
    row.scale = scale;
    row.count = counts[scale];
    for (const auto& [m, values] : by_metric) row.metrics[m] = mean_std(values);
    out.rows.push_back(std::move(row));
  }
  double best = 0.0;
  for (const auto& row : out.rows) {
    const auto it = row.metrics.find("lpips");
    if (it == row.metrics.end()) continue;
    // Strict comparison keeps the lower scale on ties (rows are ascending).
    if (!out.best_lpips_scale || it->second.mean < best) {
      best = it->second.mean;
      out.best_lpips_scale = row.scale;
    }
  }
  return out;
}

}  // namespace reconprobe
