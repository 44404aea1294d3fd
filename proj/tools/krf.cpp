// krf: run, verify, sweep, refine and report flow experiments.

#include "krf/commands.hpp"

#include <iostream>

#include "CLI11.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Normalized Kahler-Ricci flow on S1-invariant metrics of CP1: experiments and checks"};
  app.require_subcommand(1);

  std::string config, dir, templ;
  std::optional<std::filesystem::path> out;
  std::vector<std::string> grid;
  std::vector<int> levels;
  unsigned jobs = 0;
  std::string out_str;

  auto* run = app.add_subcommand("run", "evolve one config and write trace, checkpoints and run.json");
  run->add_option("config", config, "experiment config (JSON)")->required();
  run->add_option("-o,--out", out_str, "output directory (default: $KRF_OUTPUT_ROOT/<output>)");

  auto* verify = app.add_subcommand("verify", "rerun every enabled check on stored artifacts");
  verify->add_option("dir", dir, "run directory")->required();

  auto* sweep = app.add_subcommand("sweep", "independent runs over a parameter grid");
  sweep->add_option("template", templ, "config template (JSON)")->required();
  sweep->add_option("--grid", grid, "axis as path=v1,v2 (repeatable)")->allow_extra_args(false);
  sweep->add_option("-j,--jobs", jobs, "parallel runs (default: hardware threads)");
  sweep->add_option("-o,--out", out_str, "output directory (default: $KRF_OUTPUT_ROOT/<output>/sweep)");

  auto* refine = app.add_subcommand("refine", "rerun a config at several grid sizes");
  refine->add_option("config", config, "experiment config (JSON)")->required();
  refine->add_option("--levels", levels, "grid sizes, e.g. 32,64")->delimiter(',')->required();
  refine->add_option("-o,--out", out_str, "output directory (default: $KRF_OUTPUT_ROOT/<output>/refine)");

  auto* report = app.add_subcommand("report", "summarize a run directory");
  report->add_option("dir", dir, "run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : krf::kExitUsage;
  }
  if (!out_str.empty()) out = std::filesystem::path(out_str);

  const krf::CommandIo io{std::cout, std::cerr};
  if (*run) return krf::cmd_run(config, out, io);
  if (*verify) return krf::cmd_verify(dir, io);
  if (*sweep) return krf::cmd_sweep(templ, grid, jobs, out, io);
  if (*refine) return krf::cmd_refine(config, levels, out, io);
  return krf::cmd_report(dir, io);
}
