// reconprobe: degrade images, score reconstructions and captions, analyse
// encoder drift and write the report, driven by a JSON manifest.

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "reconprobe/error.hpp"
#include "reconprobe/pipeline.hpp"

using namespace reconprobe;

namespace {

struct Flags {
  std::string manifest;
  std::string out;
  std::string stages;
  bool tvd_halved = false;
  std::string bleu_candidate;
  double patch_threshold = -1.0;
  long long seed = -1;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--manifest", f.manifest, "Run manifest (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", f.out, "Output root (default: the manifest's reports root)");
  cmd->add_flag("--tvd-halved", f.tvd_halved, "Report TVD as half the L1 distance");
  cmd->add_option("--bleu-candidate", f.bleu_candidate, "Candidate caption scored by BLEU")
      ->check(CLI::IsMember({"first", "max"}));
  cmd->add_option("--patch-threshold", f.patch_threshold, "Masked fraction that marks a patch inpainted")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--seed", f.seed, "Seed for the k-means initialisation")->check(CLI::NonNegativeNumber);
}

RunConfig to_config(const Flags& f) {
  RunConfig c;
  c.manifest = f.manifest;
  if (!f.out.empty()) c.out = f.out;
  if (f.tvd_halved) c.tvd_halved = true;
  if (!f.bleu_candidate.empty()) c.bleu_candidate = parse_candidate_rule(f.bleu_candidate);
  if (f.patch_threshold >= 0.0) c.patch_threshold = f.patch_threshold;
  if (f.seed >= 0) c.seed = static_cast<std::uint64_t>(f.seed);
  return c;
}

void print_result(const RunResult& r) {
  const auto line = [](const char* label, const std::vector<std::string>& items) {
    if (items.empty()) return;
    std::cout << label << ":";
    for (const auto& i : items) std::cout << " " << i;
    std::cout << "\n";
  };
  line("ran", r.executed);
  line("up to date", r.up_to_date);
  line("skipped", r.skipped);
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << "output: " << r.out_dir.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"reconprobe: degradation, reconstruction and caption diagnostics"};
  app.require_subcommand(1);
  Flags flags;

  struct Sub {
    const char* name;
    const char* help;
    Stage stage;
  };
  const Sub subs[] = {
      {"degrade", "Write masks and degraded images", Stage::degrade},
      {"fidelity", "Score reconstructions inside the degraded region", Stage::fidelity},
      {"captions", "Score generated captions against references", Stage::captions},
      {"attention", "Layer-wise attention and CLS drift", Stage::attention},
      {"correlate", "Correlations and leave-one-out stability", Stage::correlate},
      {"report", "Assemble the report directory", Stage::report},
  };
  std::vector<std::pair<CLI::App*, Stage>> single;
  for (const auto& s : subs) {
    CLI::App* cmd = app.add_subcommand(s.name, s.help);
    add_common(cmd, flags);
    single.emplace_back(cmd, s.stage);
  }
  CLI::App* run = app.add_subcommand("run", "Run every stage (or --stages) and write the report");
  add_common(run, flags);
  run->add_option("--stages", flags.stages, "Comma-separated subset of stages");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    RunConfig config = to_config(flags);
    if (run->parsed()) {
      if (!flags.stages.empty()) config.stages = parse_stage_list(flags.stages);
      config.optional_model_stages = true;
    } else {
      for (const auto& [cmd, stage] : single)
        if (cmd->parsed()) config.stages = {stage};
    }
    print_result(run_pipeline(config));
    return kExitOk;
  } catch (const MissingInputError& e) {
    std::cerr << "reconprobe: missing interchange input:\n";
    for (const auto& m : e.missing()) std::cerr << "  " << m << "\n";
    return kExitMissingInput;
  } catch (const std::exception& e) {
    std::cerr << "reconprobe: " << e.what() << "\n";
    return exit_code_for(e);
  }
}
