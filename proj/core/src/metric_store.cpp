#include "reconprobe/metric_store.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "json.hpp"
#include "reconprobe/csv.hpp"
#include "reconprobe/error.hpp"

namespace reconprobe {

using json = nlohmann::json;

void MetricStore::add(const MetricRecord& record) {
  if (!std::isfinite(record.value))
    throw ValidationError("non-finite value for " + record.record_id + "/" + record.variant + "/" + record.metric);
  Key key{record.record_id, record.variant, record.metric};
  auto [it, inserted] = values_.emplace(std::move(key), record.value);
  if (!inserted && it->second != record.value)
    throw ValidationError("conflicting duplicate for (" + record.record_id + ", " + record.variant + ", " +
                          record.metric + "): " + format_shortest(it->second) + " vs " +
                          format_shortest(record.value));
}

void MetricStore::merge(const std::vector<MetricRecord>& records) {
  for (const auto& r : records) add(r);
}

std::optional<double> MetricStore::get(std::string_view record_id, std::string_view variant,
                                       std::string_view metric) const {
  auto it = values_.find(std::make_tuple(std::string(record_id), std::string(variant), std::string(metric)));
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::optional<double> MetricStore::variant_value(std::string_view variant, std::string_view metric) const {
  if (auto agg = get(kAggregateScope, variant, metric)) return agg;
  const auto values = record_values(variant, metric);
  if (values.empty()) return std::nullopt;
  double sum = 0.0;
  for (const auto& [id, v] : values) sum += v;
  return sum / static_cast<double>(values.size());
}

std::vector<std::pair<std::string, double>> MetricStore::record_values(std::string_view variant,
                                                                       std::string_view metric) const {
  std::vector<std::pair<std::string, double>> out;
  for (const auto& [key, value] : values_) {
    const auto& [id, v, m] = key;
    if (v == variant && m == metric && id != kAggregateScope) out.emplace_back(id, value);
  }
  return out;
}

std::vector<MetricRecord> MetricStore::records() const {
  std::vector<MetricRecord> out;
  out.reserve(values_.size());
  for (const auto& [key, value] : values_) out.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), value});
  return out;
}

std::vector<std::string> MetricStore::variants() const {
  std::set<std::string> s;
  for (const auto& [key, value] : values_) s.insert(std::get<1>(key));
  return {s.begin(), s.end()};
}

std::vector<std::string> MetricStore::metrics() const {
  std::set<std::string> s;
  for (const auto& [key, value] : values_) s.insert(std::get<2>(key));
  return {s.begin(), s.end()};
}

std::vector<std::string> MetricStore::record_ids() const {
  std::set<std::string> s;
  for (const auto& [key, value] : values_)
    if (std::get<0>(key) != kAggregateScope) s.insert(std::get<0>(key));
  return {s.begin(), s.end()};
}

std::vector<MetricRecord> parse_scores_jsonl(std::string_view text, std::string_view source) {
  std::vector<MetricRecord> out;
  MetricStore seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) {
      if (end == text.size()) break;
      continue;
    }
    const auto where = std::string(source) + ":" + std::to_string(line_no);
    MetricRecord rec;
    try {
      const json j = json::parse(line);
      rec.record_id = j.at("record_id").get<std::string>();
      rec.variant = j.at("variant").get<std::string>();
      rec.metric = j.at("metric").get<std::string>();
      if (!j.at("value").is_number()) throw IoError(where + ": 'value' is not a number");
      rec.value = j.at("value").get<double>();
    } catch (const json::exception& e) {
      throw IoError(where + ": malformed line: " + e.what());
    }
    try {
      const auto before = seen.size();
      seen.add(rec);
      if (seen.size() != before) out.push_back(std::move(rec));
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
    if (end == text.size()) break;
  }
  return out;
}

std::vector<MetricRecord> ingest_external_scores(const std::filesystem::path& path) {
  return parse_scores_jsonl(read_text_file(path), path.string());
}

void write_scores_jsonl(const std::vector<MetricRecord>& records, const std::filesystem::path& path) {
  std::string out;
  for (const auto& r : records) {
    out += "{\"record_id\":" + json(r.record_id).dump() + ",\"variant\":" + json(r.variant).dump() +
           ",\"metric\":" + json(r.metric).dump() + ",\"value\":" + format_exact(r.value) + "}\n";
  }
  write_text_file(path, out);
}

}  // namespace reconprobe
