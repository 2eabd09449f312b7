#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "reconprobe/caption.hpp"
#include "reconprobe/csv.hpp"
#include "reconprobe/error.hpp"

namespace reconprobe {

// ---- BLEU -------------------------------------------------------------------

BleuStats& BleuStats::operator+=(const BleuStats& other) {
  for (int i = 0; i < kMaxBleuOrder; ++i) {
    matches[i] += other.matches[i];
    totals[i] += other.totals[i];
  }
  candidate_length += other.candidate_length;
  reference_length += other.reference_length;
  return *this;
}

double BleuStats::precision(int order) const {
  const auto i = static_cast<std::size_t>(order - 1);
  return totals[i] == 0 ? 0.0 : static_cast<double>(matches[i]) / static_cast<double>(totals[i]);
}

namespace {

std::map<std::string, std::size_t> ngram_counts(const Tokens& tokens, int n) {
  std::map<std::string, std::size_t> counts;
  if (tokens.size() < static_cast<std::size_t>(n)) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key = tokens[i];
    for (int k = 1; k < n; ++k) {
      key += '\x1f';
      key += tokens[i + k];
    }
    ++counts[key];
  }
  return counts;
}

void require_references(std::span<const Tokens> references) {
  if (references.empty()) throw ValidationError("empty reference set");
}

}  // namespace

BleuStats bleu_stats(const Tokens& candidate, std::span<const Tokens> references) {
  require_references(references);
  BleuStats stats;
  stats.candidate_length = candidate.size();
  std::size_t best_len = references.front().size();
  for (const auto& ref : references) {
    const auto diff = [&](std::size_t len) {
      return len > candidate.size() ? len - candidate.size() : candidate.size() - len;
    };
    if (diff(ref.size()) < diff(best_len) || (diff(ref.size()) == diff(best_len) && ref.size() < best_len))
      best_len = ref.size();
  }
  stats.reference_length = best_len;

  for (int n = 1; n <= kMaxBleuOrder; ++n) {
    const auto cand = ngram_counts(candidate, n);
    std::map<std::string, std::size_t> max_ref;
    for (const auto& ref : references)
      for (const auto& [gram, count] : ngram_counts(ref, n)) max_ref[gram] = std::max(max_ref[gram], count);
    std::size_t clipped = 0, total = 0;
    for (const auto& [gram, count] : cand) {
      total += count;
      auto it = max_ref.find(gram);
      if (it != max_ref.end()) clipped += std::min(count, it->second);
    }
    stats.matches[n - 1] = clipped;
    stats.totals[n - 1] = total;
  }
  return stats;
}

double bleu_from_stats(const BleuStats& stats, int n) {
  if (n < 1 || n > kMaxBleuOrder) throw ValidationError("BLEU order must lie in 1..4");
  if (stats.candidate_length == 0) return 0.0;
  double log_sum = 0.0;
  for (int order = 1; order <= n; ++order) {
    const auto i = static_cast<std::size_t>(order - 1);
    if (stats.totals[i] == 0 || stats.matches[i] == 0) return 0.0;
    log_sum += std::log(static_cast<double>(stats.matches[i]) / static_cast<double>(stats.totals[i]));
  }
  const double c = static_cast<double>(stats.candidate_length);
  const double r = static_cast<double>(stats.reference_length);
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(log_sum / n);
}

double smoothed_sentence_bleu(const Tokens& candidate, std::span<const Tokens> references, int n) {
  const auto stats = bleu_stats(candidate, references);
  if (stats.candidate_length == 0 || stats.matches[0] == 0) return 0.0;
  double log_sum = std::log(stats.precision(1));
  for (int order = 2; order <= n; ++order) {
    const auto i = static_cast<std::size_t>(order - 1);
    log_sum += std::log((stats.matches[i] + 1.0) / (stats.totals[i] + 1.0));
  }
  const double c = static_cast<double>(stats.candidate_length);
  const double r = static_cast<double>(stats.reference_length);
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(log_sum / n);
}

// ---- ROUGE-L ----------------------------------------------------------------

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(const Tokens& candidate, std::span<const Tokens> references, double beta) {
  require_references(references);
  double best = 0.0;
  for (const auto& ref : references) {
    if (candidate.empty() || ref.empty()) continue;
    const double lcs = static_cast<double>(lcs_length(candidate, ref));
    if (lcs == 0.0) continue;
    const double p = lcs / static_cast<double>(candidate.size());
    const double r = lcs / static_cast<double>(ref.size());
    const double b2 = beta * beta;
    best = std::max(best, (1.0 + b2) * p * r / (r + b2 * p));
  }
  return best;
}

// ---- METEOR -----------------------------------------------------------------

void SynonymTable::add_group(const std::vector<std::string>& words) {
  const int id = groups_++;
  for (const auto& w : words) {
    std::string lower = w;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (!lower.empty()) group_of_[lower].insert(id);
  }
}

bool SynonymTable::are_synonyms(const std::string& a, const std::string& b) const {
  const auto ia = group_of_.find(a);
  const auto ib = group_of_.find(b);
  if (ia == group_of_.end() || ib == group_of_.end()) return false;
  for (int g : ia->second)
    if (ib->second.count(g)) return true;
  return false;
}

SynonymTable SynonymTable::parse(std::string_view text) {
  SynonymTable table;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream words(line);
    std::vector<std::string> group;
    for (std::string w; words >> w;) group.push_back(w);
    if (group.size() >= 2) table.add_group(group);
  }
  return table;
}

SynonymTable SynonymTable::load(const std::filesystem::path& path) { return parse(read_text_file(path)); }

MeteorAlignment meteor_align(const Tokens& candidate, const Tokens& reference, const SynonymTable* synonyms,
                             const MeteorOptions& options) {
  const std::size_t m = candidate.size(), n = reference.size();
  std::vector<long> cand_to_ref(m, -1);
  std::vector<bool> ref_used(n, false);

  std::vector<std::string> cand_stems, ref_stems;
  if (options.use_stems) {
    for (const auto& t : candidate) cand_stems.push_back(porter_stem(t));
    for (const auto& t : reference) ref_stems.push_back(porter_stem(t));
  }

  const auto run_stage = [&](auto&& same) {
    for (std::size_t i = 0; i < m; ++i) {
      if (cand_to_ref[i] >= 0) continue;
      long pick = -1;
      // Prefer extending the chunk started by the previous candidate word.
      if (i > 0 && cand_to_ref[i - 1] >= 0) {
        const auto next = static_cast<std::size_t>(cand_to_ref[i - 1] + 1);
        if (next < n && !ref_used[next] && same(i, next)) pick = static_cast<long>(next);
      }
      for (std::size_t j = 0; j < n && pick < 0; ++j)
        if (!ref_used[j] && same(i, j)) pick = static_cast<long>(j);
      if (pick >= 0) {
        cand_to_ref[i] = pick;
        ref_used[static_cast<std::size_t>(pick)] = true;
      }
    }
  };

  run_stage([&](std::size_t i, std::size_t j) { return candidate[i] == reference[j]; });
  if (options.use_stems) run_stage([&](std::size_t i, std::size_t j) { return cand_stems[i] == ref_stems[j]; });
  if (synonyms && !synonyms->empty())
    run_stage([&](std::size_t i, std::size_t j) { return synonyms->are_synonyms(candidate[i], reference[j]); });

  MeteorAlignment a;
  long prev_i = -2, prev_j = -2;
  for (std::size_t i = 0; i < m; ++i) {
    if (cand_to_ref[i] < 0) continue;
    ++a.matches;
    const long j = cand_to_ref[i];
    if (!(static_cast<long>(i) == prev_i + 1 && j == prev_j + 1)) ++a.chunks;
    prev_i = static_cast<long>(i);
    prev_j = j;
  }
  return a;
}

double meteor_lite(const Tokens& candidate, std::span<const Tokens> references, const SynonymTable* synonyms,
                   const MeteorOptions& options) {
  double best = 0.0;
  for (const auto& ref : references) {
    if (candidate.empty() || ref.empty()) continue;
    const auto a = meteor_align(candidate, ref, synonyms, options);
    if (a.matches == 0) continue;
    const double matches = static_cast<double>(a.matches);
    const double p = matches / static_cast<double>(candidate.size());
    const double r = matches / static_cast<double>(ref.size());
    const double fmean = p * r / (options.alpha * p + (1.0 - options.alpha) * r);
    const double penalty = options.gamma * std::pow(static_cast<double>(a.chunks) / matches, options.beta);
    best = std::max(best, fmean * (1.0 - penalty));
  }
  return best;
}

// ---- Embeddings -------------------------------------------------------------

double embed_similarity(std::span<const double> candidate, std::span<const std::vector<double>> references) {
  if (references.empty()) throw ValidationError("empty reference set");
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& ref : references) {
    if (ref.size() != candidate.size())
      throw ValidationError("dimension mismatch: candidate " + std::to_string(candidate.size()) + " vs reference " +
                            std::to_string(ref.size()));
    double dot = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) dot += candidate[i] * ref[i];
    best = std::max(best, dot);
  }
  return best;
}

// ---- Corpus -----------------------------------------------------------------

namespace {

struct TokenizedSet {
  std::vector<Tokens> candidates;
  std::vector<Tokens> references;
};

TokenizedSet tokenize_set(const CaptionSet& set) {
  if (set.candidates.empty())
    throw ValidationError("caption set (" + set.record_id + ", " + set.variant + ") has no candidates");
  if (set.references.empty())
    throw ValidationError("caption set (" + set.record_id + ", " + set.variant + ") has no references");
  TokenizedSet t;
  for (const auto& c : set.candidates) t.candidates.push_back(tokenize(c));
  for (const auto& r : set.references) t.references.push_back(tokenize(r));
  return t;
}

std::size_t select_for_bleu(const TokenizedSet& t, int n, CandidateRule rule) {
  if (rule == CandidateRule::first) return 0;
  std::size_t best = 0;
  double best_score = -1.0;
  for (std::size_t i = 0; i < t.candidates.size(); ++i) {
    const double s = smoothed_sentence_bleu(t.candidates[i], t.references, n);
    if (s > best_score) {
      best_score = s;
      best = i;
    }
  }
  return best;
}

template <typename Score>
double per_rule(const TokenizedSet& t, CandidateRule rule, Score&& score) {
  if (rule == CandidateRule::first) return score(t.candidates.front());
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& c : t.candidates) best = std::max(best, score(c));
  return best;
}

std::optional<double> embedding_score(const EmbeddingSet& e, CandidateRule rule) {
  if (e.candidates.empty() || e.references.empty()) return std::nullopt;
  std::vector<std::vector<double>> refs;
  for (const auto& [idx, v] : e.references) refs.push_back(v);
  if (rule == CandidateRule::first) {
    // Lowest available candidate index (normally 0).
    return embed_similarity(e.candidates.begin()->second, refs);
  }
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& [idx, v] : e.candidates) best = std::max(best, embed_similarity(v, refs));
  return best;
}

}  // namespace

double bleu_n(std::span<const CaptionSet> corpus, int n, const CaptionConfig& config) {
  if (corpus.empty()) throw ValidationError("empty corpus");
  if (n < 1 || n > kMaxBleuOrder) throw ValidationError("BLEU order must lie in 1..4");
  BleuStats total;
  for (const auto& set : corpus) {
    const auto t = tokenize_set(set);
    total += bleu_stats(t.candidates[select_for_bleu(t, n, config.candidate_rule)], t.references);
  }
  return bleu_from_stats(total, n);
}

ImageCaptionScores score_caption_set(const CaptionSet& set, const CaptionConfig& config) {
  const auto t = tokenize_set(set);
  ImageCaptionScores s;
  for (int n = 1; n <= kMaxBleuOrder; ++n) {
    const auto pick = select_for_bleu(t, n, config.candidate_rule);
    s.sentence_bleu[n - 1] = bleu_from_stats(bleu_stats(t.candidates[pick], t.references), n);
  }
  s.rouge_l = per_rule(t, config.candidate_rule, [&](const Tokens& c) { return rouge_l(c, t.references); });
  s.meteor = per_rule(t, config.candidate_rule,
                      [&](const Tokens& c) { return meteor_lite(c, t.references, config.synonyms, config.meteor); });
  for (const auto& [tag, e] : set.embeddings)
    if (auto v = embedding_score(e, config.candidate_rule)) s.embed[tag] = *v;
  return s;
}

std::vector<std::string> CaptionTable::columns() const {
  std::vector<std::string> cols = lexical_metric_names();
  std::set<std::string> extra;
  for (const auto& row : rows)
    for (const auto& [name, v] : row.values)
      if (std::find(cols.begin(), cols.end(), name) == cols.end()) extra.insert(name);
  cols.insert(cols.end(), extra.begin(), extra.end());
  return cols;
}

const CaptionRow* CaptionTable::find(std::string_view variant) const {
  for (const auto& row : rows)
    if (row.variant == variant) return &row;
  return nullptr;
}

CaptionTable aggregate_caption_scores(std::span<const CaptionSet> corpus, const CaptionConfig& config) {
  CaptionTable table;
  std::map<std::string, std::vector<const CaptionSet*>> by_variant;
  std::set<std::string> all_ids;
  for (const auto& set : corpus) {
    by_variant[set.variant].push_back(&set);
    all_ids.insert(set.record_id);
  }
  for (const auto& [variant, sets] : by_variant) {
    CaptionRow row;
    row.variant = variant;
    row.images = sets.size();

    std::array<BleuStats, kMaxBleuOrder> stats{};
    double meteor_sum = 0.0, rouge_sum = 0.0;
    std::map<std::string, std::pair<double, std::size_t>> embed_sums;
    std::set<std::string> ids;
    for (const CaptionSet* set : sets) {
      ids.insert(set->record_id);
      const auto t = tokenize_set(*set);
      for (int n = 1; n <= kMaxBleuOrder; ++n)
        stats[n - 1] += bleu_stats(t.candidates[select_for_bleu(t, n, config.candidate_rule)], t.references);
      const auto s = score_caption_set(*set, config);
      meteor_sum += s.meteor;
      rouge_sum += s.rouge_l;
      for (const auto& [tag, v] : s.embed) {
        embed_sums[tag].first += v;
        ++embed_sums[tag].second;
      }
    }
    for (int n = 1; n <= kMaxBleuOrder; ++n)
      row.values["bleu" + std::to_string(n)] = bleu_from_stats(stats[n - 1], n);
    row.values["meteor"] = meteor_sum / static_cast<double>(sets.size());
    row.values["rouge_l"] = rouge_sum / static_cast<double>(sets.size());
    for (const auto& [tag, acc] : embed_sums) row.values[tag] = acc.first / static_cast<double>(acc.second);
    table.rows.push_back(std::move(row));

    std::vector<std::string> missing;
    std::set_difference(all_ids.begin(), all_ids.end(), ids.begin(), ids.end(), std::back_inserter(missing));
    if (!missing.empty()) {
      std::string msg = "variant '" + variant + "' is missing captions for " + std::to_string(missing.size()) +
                        " record(s):";
      for (const auto& id : missing) msg += " " + id;
      table.warnings.push_back(std::move(msg));
    }
  }
  return table;
}

}  // namespace reconprobe
