#include <cmath>
#include <map>
#include <set>
#include <tuple>

#include "json.hpp"
#include "reconprobe/caption.hpp"
#include "reconprobe/error.hpp"

namespace reconprobe {

using json = nlohmann::json;

namespace {

// Calls `fn(json, where)` for every non-blank line.
template <typename Fn>
void for_each_json_line(std::string_view text, std::string_view source, Fn&& fn) {
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    const std::string where = std::string(source) + ":" + std::to_string(line_no);
    try {
      fn(json::parse(line), where);
    } catch (const json::exception& e) {
      throw IoError(where + ": malformed line: " + e.what());
    }
  }
}

}  // namespace

std::vector<CaptionLine> parse_captions_jsonl(std::string_view text, std::string_view source) {
  std::vector<CaptionLine> out;
  std::set<std::pair<std::string, std::string>> seen;
  for_each_json_line(text, source, [&](const json& j, const std::string& where) {
    CaptionLine line;
    line.record_id = j.at("record_id").get<std::string>();
    line.variant = j.at("variant").get<std::string>();
    line.candidates = j.at("candidates").get<std::vector<std::string>>();
    if (line.candidates.empty()) throw ValidationError(where + ": no candidate captions");
    if (j.contains("settings") && j.at("settings").is_object())
      for (const auto& [key, value] : j.at("settings").items())
        if (value.is_number()) line.settings[key] = value.get<double>();
    if (!seen.emplace(line.record_id, line.variant).second)
      throw ValidationError(where + ": duplicate captions for (" + line.record_id + ", " + line.variant + ")");
    out.push_back(std::move(line));
  });
  return out;
}

std::vector<EmbeddingLine> parse_embeddings_jsonl(std::string_view text, std::string_view source) {
  std::vector<EmbeddingLine> out;
  for_each_json_line(text, source, [&](const json& j, const std::string& where) {
    EmbeddingLine line;
    line.record_id = j.at("record_id").get<std::string>();
    line.variant = j.at("variant").get<std::string>();
    line.model_tag = j.at("model_tag").get<std::string>();
    line.candidate = j.value("candidate", 0);
    line.vector = j.at("vector").get<std::vector<double>>();
    if (line.vector.empty()) throw ValidationError(where + ": empty embedding vector");
    double norm2 = 0.0;
    for (double v : line.vector) norm2 += v * v;
    if (std::abs(std::sqrt(norm2) - 1.0) > 1e-6)
      throw ValidationError(where + ": embedding is not unit-norm (norm " + std::to_string(std::sqrt(norm2)) + ")");
    out.push_back(std::move(line));
  });
  return out;
}

namespace {

std::optional<int> reference_index(const std::string& variant) {
  if (variant.rfind("ref:", 0) != 0) return std::nullopt;
  const std::string digits = variant.substr(4);
  if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos)
    throw ValidationError("malformed reference variant '" + variant + "' (expected ref:<index>)");
  return std::stoi(digits);
}

}  // namespace

std::vector<CaptionSet> assemble_caption_sets(const std::vector<CaptionLine>& captions,
                                              const std::vector<EmbeddingLine>& embeddings,
                                              const std::map<std::string, std::vector<std::string>>& references) {
  std::map<std::string, std::size_t> dims;
  // (record, tag) -> reference vectors; (record, variant, tag) -> candidate vectors
  std::map<std::pair<std::string, std::string>, std::map<int, std::vector<double>>> ref_vecs;
  std::map<std::tuple<std::string, std::string, std::string>, std::map<int, std::vector<double>>> cand_vecs;
  for (const auto& e : embeddings) {
    auto [it, inserted] = dims.emplace(e.model_tag, e.vector.size());
    if (!inserted && it->second != e.vector.size())
      throw ValidationError("embedding dimension mismatch for model tag '" + e.model_tag + "': " +
                            std::to_string(it->second) + " vs " + std::to_string(e.vector.size()));
    if (auto ref = reference_index(e.variant)) ref_vecs[{e.record_id, e.model_tag}][*ref] = e.vector;
    else cand_vecs[{e.record_id, e.variant, e.model_tag}][e.candidate] = e.vector;
  }

  std::vector<CaptionSet> sets;
  sets.reserve(captions.size());
  for (const auto& line : captions) {
    CaptionSet set;
    set.record_id = line.record_id;
    set.variant = line.variant;
    set.candidates = line.candidates;
    auto refs = references.find(line.record_id);
    if (refs == references.end() || refs->second.empty())
      throw ValidationError("no reference captions for record '" + line.record_id + "'");
    set.references = refs->second;
    for (const auto& [tag, dim] : dims) {
      auto c = cand_vecs.find({line.record_id, line.variant, tag});
      auto r = ref_vecs.find({line.record_id, tag});
      if (c == cand_vecs.end() || r == ref_vecs.end()) continue;
      set.embeddings[tag] = EmbeddingSet{c->second, r->second};
    }
    sets.push_back(std::move(set));
  }
  return sets;
}

}  // namespace reconprobe
