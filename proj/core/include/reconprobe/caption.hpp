#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "reconprobe/manifest.hpp"

namespace reconprobe {

using Tokens = std::vector<std::string>;

// Lowercase, split on (Unicode) whitespace, strip leading/trailing punctuation.
// Intra-word hyphens and apostrophes survive. Empty tokens are dropped.
Tokens tokenize(std::string_view text);

// Classic Porter (1980) stemmer over lowercase ASCII words; other input is
// returned unchanged.
std::string porter_stem(std::string_view word);

// ---- BLEU -------------------------------------------------------------------

inline constexpr int kMaxBleuOrder = 4;

// Sufficient statistics for corpus BLEU.
struct BleuStats {
  std::array<std::size_t, kMaxBleuOrder> matches{};  // clipped n-gram matches per order
  std::array<std::size_t, kMaxBleuOrder> totals{};   // candidate n-grams per order
  std::size_t candidate_length = 0;
  std::size_t reference_length = 0;  // closest reference length, ties to the shorter

  BleuStats& operator+=(const BleuStats& other);
  double precision(int order) const;  // 1-based order
};

BleuStats bleu_stats(const Tokens& candidate, std::span<const Tokens> references);

// Brevity penalty times the geometric mean of precisions 1..n. Zero when any of
// those precisions is zero (no smoothing).
double bleu_from_stats(const BleuStats& stats, int n);

// Sentence-level BLEU with add-one smoothing on orders >= 2; used only to pick
// the best candidate under CandidateRule::max.
double smoothed_sentence_bleu(const Tokens& candidate, std::span<const Tokens> references, int n);

// ---- ROUGE-L / METEOR -------------------------------------------------------

std::size_t lcs_length(const Tokens& a, const Tokens& b);

inline constexpr double kRougeBeta = 1.2;

// LCS F-measure (1 + b^2) P R / (R + b^2 P), max over references.
double rouge_l(const Tokens& candidate, std::span<const Tokens> references, double beta = kRougeBeta);

// Groups of interchangeable words. Lookup is on lowercase surface forms.
class SynonymTable {
 public:
  void add_group(const std::vector<std::string>& words);
  bool are_synonyms(const std::string& a, const std::string& b) const;
  bool empty() const { return group_of_.empty(); }

  // One group per line, words separated by whitespace or commas; '#' comments.
  static SynonymTable parse(std::string_view text);
  static SynonymTable load(const std::filesystem::path& path);

 private:
  std::map<std::string, std::set<int>> group_of_;
  int groups_ = 0;
};

struct MeteorOptions {
  double alpha = 0.9;  // recall weight: Fmean = P R / (alpha P + (1 - alpha) R)
  double beta = 3.0;
  double gamma = 0.5;
  bool use_stems = true;
};

struct MeteorAlignment {
  std::size_t matches = 0;
  std::size_t chunks = 0;
};

// Staged unigram alignment: exact, then Porter stem, then synonym table.
MeteorAlignment meteor_align(const Tokens& candidate, const Tokens& reference, const SynonymTable* synonyms,
                             const MeteorOptions& options = {});

// Fmean * (1 - gamma (chunks / matches)^beta), max over references.
double meteor_lite(const Tokens& candidate, std::span<const Tokens> references, const SynonymTable* synonyms = nullptr,
                   const MeteorOptions& options = {});

// ---- Embeddings -------------------------------------------------------------

// Max over references of the dot product of unit vectors.
double embed_similarity(std::span<const double> candidate, std::span<const std::vector<double>> references);

// ---- Corpus -----------------------------------------------------------------

struct EmbeddingSet {
  std::map<int, std::vector<double>> candidates;  // by candidate index
  std::map<int, std::vector<double>> references;  // by reference index
};

struct CaptionSet {
  std::string record_id;
  std::string variant;
  std::vector<std::string> candidates;
  std::vector<std::string> references;
  std::map<std::string, EmbeddingSet> embeddings;  // by model tag
};

struct CaptionConfig {
  CandidateRule candidate_rule = CandidateRule::first;
  const SynonymTable* synonyms = nullptr;
  MeteorOptions meteor;
};

// Corpus BLEU-n over sets; throws ValidationError on an empty corpus or a set
// without candidates or references.
double bleu_n(std::span<const CaptionSet> corpus, int n, const CaptionConfig& config = {});

// Per-image lexical and embedding scores for one set.
struct ImageCaptionScores {
  std::array<double, kMaxBleuOrder> sentence_bleu{};  // unsmoothed, selected candidate
  double rouge_l = 0.0;
  double meteor = 0.0;
  std::map<std::string, double> embed;  // model tag -> max cosine
};

ImageCaptionScores score_caption_set(const CaptionSet& set, const CaptionConfig& config = {});

struct CaptionRow {
  std::string variant;
  std::size_t images = 0;
  std::map<std::string, double> values;  // bleu1..bleu4, meteor, rouge_l, <embedding tag>
};

struct CaptionTable {
  std::vector<CaptionRow> rows;  // variant order
  std::vector<std::string> warnings;

  // bleu1..bleu4, meteor, rouge_l, then embedding tags in lexicographic order.
  std::vector<std::string> columns() const;
  const CaptionRow* find(std::string_view variant) const;
};

inline const std::vector<std::string>& lexical_metric_names() {
  static const std::vector<std::string> names{"bleu1", "bleu2", "bleu3", "bleu4", "meteor", "rouge_l"};
  return names;
}

// One row per variant with corpus BLEU-1..4, mean METEOR, mean ROUGE-L and the
// mean per-image max cosine per embedding tag. Records missing for a variant
// are reported as warnings.
CaptionTable aggregate_caption_scores(std::span<const CaptionSet> corpus, const CaptionConfig& config = {});

// ---- Interchange ------------------------------------------------------------

struct CaptionLine {
  std::string record_id;
  std::string variant;
  std::vector<std::string> candidates;
  std::map<std::string, double> settings;  // numeric decoding echo, when the runner wrote one
};

struct EmbeddingLine {
  std::string record_id;
  std::string variant;  // "ref:<i>" for reference i
  std::string model_tag;
  int candidate = 0;
  std::vector<double> vector;
};

// JSON-lines {record_id, variant, candidates: [..]}.
std::vector<CaptionLine> parse_captions_jsonl(std::string_view text, std::string_view source);
// JSON-lines {record_id, variant, model_tag, vector: [..], candidate?}.
std::vector<EmbeddingLine> parse_embeddings_jsonl(std::string_view text, std::string_view source);

// Joins caption lines with their references (by record id) and embeddings.
// Checks unit norms (1 +- 1e-6) and a single dimension per model tag.
std::vector<CaptionSet> assemble_caption_sets(const std::vector<CaptionLine>& captions,
                                              const std::vector<EmbeddingLine>& embeddings,
                                              const std::map<std::string, std::vector<std::string>>& references);

}  // namespace reconprobe
