#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

namespace reconprobe {

// record_id used for corpus-level (per-variant) observations.
inline constexpr std::string_view kAggregateScope = "*";

struct MetricRecord {
  std::string record_id;
  std::string variant;
  std::string metric;
  double value = 0.0;

  bool is_aggregate() const { return record_id == kAggregateScope; }
  friend bool operator==(const MetricRecord&, const MetricRecord&) = default;
};

// Append-only observation store keyed by (scope, variant, metric). Re-adding an
// identical observation is a no-op; a conflicting value throws ValidationError.
class MetricStore {
 public:
  void add(const MetricRecord& record);
  void merge(const std::vector<MetricRecord>& records);

  std::optional<double> get(std::string_view record_id, std::string_view variant, std::string_view metric) const;

  // The aggregate observation when present, otherwise the mean over records.
  std::optional<double> variant_value(std::string_view variant, std::string_view metric) const;
  // Per-record values for a variant/metric, ordered by record id.
  std::vector<std::pair<std::string, double>> record_values(std::string_view variant, std::string_view metric) const;

  // Sorted by (record_id, variant, metric).
  std::vector<MetricRecord> records() const;
  std::vector<std::string> variants() const;
  std::vector<std::string> metrics() const;
  std::vector<std::string> record_ids() const;  // excludes the aggregate scope
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

 private:
  using Key = std::tuple<std::string, std::string, std::string>;
  std::map<Key, double, std::less<>> values_;
};

// JSON-lines {record_id, variant, metric, value}. Malformed lines are reported
// with their 1-based line number; conflicting duplicates name both values.
std::vector<MetricRecord> parse_scores_jsonl(std::string_view text, std::string_view source);
std::vector<MetricRecord> ingest_external_scores(const std::filesystem::path& path);
void write_scores_jsonl(const std::vector<MetricRecord>& records, const std::filesystem::path& path);

}  // namespace reconprobe
