#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "sfr/campaign.hpp"

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> methods;
  std::optional<std::size_t> jobs;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "Experiment config (INI sections of key = value)");
  cmd->add_option("--seed", o.seed, "Room and initialization seed");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--methods", o.methods, "Comma list from ori,fd,cvx,nn,spmnet,spmnet3");
  cmd->add_option("--jobs", o.jobs, "Parallel jobs")->check(CLI::PositiveNumber);
}

sfr::ExperimentConfig resolve(const Overrides& o) {
  sfr::ExperimentConfig c = o.config.empty() ? sfr::ExperimentConfig{} : sfr::load_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (o.out) c.out_dir = *o.out;
  if (o.methods) c.methods = sfr::split_list(*o.methods);
  if (o.jobs) c.jobs = *o.jobs;
  c.validate();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sound field reproduction filter design and evaluation"};
  app.require_subcommand(1);
  Overrides o;
  auto* simulate = app.add_subcommand("simulate", "Simulate the cabin impulse responses at every position");
  auto* design = app.add_subcommand("design", "Design one filter bank per method and source");
  auto* evaluate = app.add_subcommand("evaluate", "Compute metrics, SSPMs and objective values");
  auto* report = app.add_subcommand("report", "Render the markdown summary");
  for (auto* cmd : {simulate, design, evaluate, report}) add_common(cmd, o);
  CLI11_PARSE(app, argc, argv);

  try {
    const sfr::ExperimentConfig c = resolve(o);
    if (simulate->parsed()) {
      sfr::cmd_simulate(c);
      std::printf("simulated %zu positions into %s\n", c.positions.size(), (c.out_dir / "ir").string().c_str());
      return 0;
    }
    if (design->parsed()) {
      const auto r = sfr::cmd_design(c);
      for (const auto& j : r.jobs) {
        std::printf("%-8s az %6.1f  %8.2f s  it %6zu  %s%s\n", j.method.c_str(), j.source_azimuth_deg, j.wall_seconds,
                    j.iterations, j.failed ? "FAILED " : "", j.message.c_str());
      }
      return r.any_failed() ? 1 : 0;
    }
    if (evaluate->parsed()) {
      const auto r = sfr::cmd_evaluate(c);
      std::printf("%zu metric rows, %zu sspm summaries, %zu failures\n", r.metrics.size(), r.dominance.size(),
                  r.failures.size());
      for (const auto& f : r.failures) std::fprintf(stderr, "failure: %s\n", f.c_str());
      return r.failures.empty() ? 0 : 1;
    }
    std::cout << sfr::cmd_report(c);
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
