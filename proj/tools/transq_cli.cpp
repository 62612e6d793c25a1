// transq command line: run simulations, coupling ladders, KMT empirical
// studies and bound validations from a key=value config file.
//
// Exit codes: 0 all checks pass (or nothing to check), 1 any check failed or
// a runtime error, 2 usage/config error.

#include <exception>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "transq/harness.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_override;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int jobs = -1;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "experiment config file")->required();
  cmd->add_option("--out", opts.out_override, "output directory (overrides config)");
  cmd->add_option("--seed", opts.seed, "master seed (overrides config)")
      ->each([&](const std::string&) { opts.seed_set = true; });
  cmd->add_option("--jobs", opts.jobs, "worker count (overrides config; 0 = auto)");
}

transq::ExperimentConfig load_config(const CommonOpts& opts) {
  std::ifstream in(opts.config_path);
  if (!in) throw std::invalid_argument("cannot open config file '" + opts.config_path + "'");
  transq::ExperimentConfig cfg = transq::parse_config(in);
  if (!opts.out_override.empty()) cfg.out_dir = opts.out_override;
  if (opts.seed_set) cfg.seed = opts.seed;
  if (opts.jobs >= 0) cfg.jobs = opts.jobs;
  return cfg;
}

int run_and_report(const transq::ExperimentConfig& cfg) {
  transq::ExperimentOutcome outcome = transq::run_experiment(cfg);
  for (const auto& line : outcome.summary_lines) std::cout << line << '\n';
  std::cout << (outcome.all_pass() ? "all checks passed" : "CHECK FAILURES") << '\n';
  return outcome.all_pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"transq: RS(G,p)/G/1 transitory queue simulation and diffusion couplings"};
  app.require_subcommand(1);

  CommonOpts sim_opts, couple_opts, ladder_opts, bounds_opts;
  auto* sim = app.add_subcommand("simulate", "discrete-event simulation, trace + summary CSVs");
  add_common(sim, sim_opts);
  auto* couple = app.add_subcommand("couple", "coupled replications, records.csv without pass/fail gates");
  add_common(couple, couple_opts);
  auto* ladder = app.add_subcommand("ladder", "error ladder with rate fits and slope checks");
  add_common(ladder, ladder_opts);
  auto* bounds = app.add_subcommand("validate-bounds", "tail bound domination checks, bounds.csv");
  add_common(bounds, bounds_opts);

  auto* fitrate = app.add_subcommand("fit-rate", "fit log(median error/correction) vs log n from records.csv");
  std::string records_path, metric = "arrival", correction = "sqrt-log-n", fit_out = ".";
  fitrate->add_option("--records", records_path, "records.csv produced by couple/ladder")->required();
  fitrate->add_option("--metric", metric, "metric name (default arrival)");
  fitrate->add_option("--correction", correction, "sqrt-log-n | log-n | none");
  fitrate->add_option("--out", fit_out, "directory for fit.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sim->parsed()) {
      transq::ExperimentConfig cfg = load_config(sim_opts);
      cfg.kind = "simulate-only";
      return run_and_report(cfg);
    }
    if (couple->parsed()) {
      transq::ExperimentConfig cfg = load_config(couple_opts);
      if (cfg.kind.rfind("couple-", 0) != 0) cfg.kind = "ladder";
      cfg.rate_checks = false;
      return run_and_report(cfg);
    }
    if (ladder->parsed()) {
      transq::ExperimentConfig cfg = load_config(ladder_opts);
      if (cfg.kind.rfind("couple-", 0) != 0) cfg.kind = "ladder";
      return run_and_report(cfg);
    }
    if (bounds->parsed()) {
      transq::ExperimentConfig cfg = load_config(bounds_opts);
      cfg.kind = "validate-bounds";
      return run_and_report(cfg);
    }
    if (fitrate->parsed()) {
      std::ifstream in(records_path);
      if (!in) throw std::invalid_argument("cannot open records file '" + records_path + "'");
      auto records = transq::read_records_csv(in);
      transq::RateCorrection corr = transq::parse_correction(correction);
      transq::RateFit fit = transq::fit_rate(records, metric, corr);
      std::vector<std::tuple<std::string, transq::RateCorrection, transq::RateFit>> fits{
          {metric, corr, fit}};
      std::ofstream os(std::filesystem::path(fit_out) / "fit.csv");
      transq::write_fit_csv(os, fits);
      std::cout << metric << " [" << transq::to_string(corr) << "]: slope = " << fit.slope
                << " +/- " << fit.stderr_slope << ", intercept = " << fit.intercept << '\n';
      return 0;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
