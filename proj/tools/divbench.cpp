// divbench: generate, embed, score, correlate, classify and report.
//
//   divbench generate --config run.json --mock
//   divbench report --config run.json --verify

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "divbench/divbench.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Diversity benchmarking for LLM design ideation"};
  app.require_subcommand(1, 1);
  app.fallthrough();  // global flags may follow the subcommand

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  divbench::PipelineOptions opt;

  app.add_option("--config", config_path, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
  app.add_flag("--mock", opt.mock, "Use the deterministic mock chat provider");
  app.add_option("--seed", seed, "Override the master seed");
  app.add_flag("--force", opt.force, "Regenerate cells that are already complete");
  app.add_flag("--verify", opt.verify, "Recompute emitted outputs and diff them against disk");
  app.add_option("--out", out, "Override the output directory");
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Only print errors");

  using Stage = divbench::StageResult (*)(const divbench::RunConfig&, const divbench::PipelineOptions&);
  struct Cmd {
    const char* name;
    const char* help;
    Stage fn;
  };
  const Cmd cmds[] = {
      {"generate", "Generate solution sets for every selected cell", divbench::cmd_generate},
      {"embed", "Embed every persisted solution set", divbench::cmd_embed},
      {"score", "Score sets and emit percent-change heatmaps", divbench::cmd_score},
      {"correlate", "Rank-correlate the four metrics per topic", divbench::cmd_correlate},
      {"classify", "Train and evaluate the human/LLM classifier", divbench::cmd_classify},
      {"report", "Re-emit all tables and SVG heatmaps from persisted results", divbench::cmd_report},
  };
  for (const auto& c : cmds) app.add_subcommand(c.name, c.help);

  CLI11_PARSE(app, argc, argv);

  opt.seed = seed;
  if (out) opt.out = *out;
  if (quiet) opt.log = nullptr;

  try {
    const auto config = divbench::load_run_config(config_path);
    for (const auto& c : cmds) {
      if (!app.got_subcommand(c.name)) continue;
      const auto res = c.fn(config, opt);
      for (const auto& m : res.messages) std::cerr << "error: " << m << "\n";
      for (const auto& d : res.diffs) std::cout << "diff: " << d << "\n";
      if (opt.verify) std::cout << res.stage << ": " << res.diffs.size() << " diffs\n";
      if (res.stage == "generate" && !opt.verify && !quiet)
        std::cerr << "[generate] provider calls: " << res.provider_calls << "\n";
      return res.exit_code();
    }
  } catch (const divbench::Error& e) {
    std::cerr << "divbench: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "divbench: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
