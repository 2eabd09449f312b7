#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "reconprobe/manifest.hpp"

namespace reconprobe {

// Process exit codes used by the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 2,
  kExitMissingInput = 3,
  kExitStageFailure = 4,
};

// Maps an exception thrown by run_pipeline (or anything below it) to an exit code.
int exit_code_for(const std::exception& error);

enum class Stage { degrade, fidelity, captions, attention, correlate, report };

std::string_view to_string(Stage stage);
Stage parse_stage(std::string_view text);
// Comma-separated list; returned in dependency order without duplicates.
std::vector<Stage> parse_stage_list(std::string_view text);
const std::vector<Stage>& all_stages();

struct RunConfig {
  std::filesystem::path manifest;
  std::vector<Stage> stages;                 // empty = every stage
  std::optional<std::filesystem::path> out;  // default: the manifest's reports root
  // Convention overrides; unset keeps the manifest value.
  std::optional<bool> tvd_halved;
  std::optional<CandidateRule> bleu_candidate;
  std::optional<double> patch_threshold;
  std::optional<std::uint64_t> seed;
  // When set, the captions and attention stages are skipped with a note if
  // their interchange inputs are absent instead of failing.
  bool optional_model_stages = false;
};

struct RunResult {
  std::filesystem::path out_dir;
  std::filesystem::path report_dir;
  std::vector<std::string> executed;    // stages that did work
  std::vector<std::string> up_to_date;  // stages skipped because outputs matched their inputs
  std::vector<std::string> skipped;     // optional stages skipped for lack of inputs
  std::vector<std::string> warnings;
};

// Output layout below the output root:
//   degraded/   {id}.mask.png and {id}.{cm|gc|ld}.png (or io_roots.degraded)
//   fidelity/   fidelity.csv (per record) and scores.jsonl
//   captions/   caption_scores.jsonl
//   attention/  profiles.csv and embeddings_layer<L>.csv
//   correlate/  correlations.csv and loo.csv
//   report/     the report tables and summary.json
// Every directory carries a .state.json with content hashes of the stage's
// inputs and outputs; a stage whose hashes still match is not re-run.
//
// Interchange inputs (io_roots.interchange):
//   {id}.{variant}.recon.png [+ .recon.json settings echo], scores*.jsonl,
//   captions.jsonl, embeddings.jsonl, caption_scores.jsonl,
//   attention/{id}.{variant}.meta.json (+ CSVs) unless io_roots.attention is set.
RunResult run_pipeline(const RunConfig& config);

}  // namespace reconprobe
