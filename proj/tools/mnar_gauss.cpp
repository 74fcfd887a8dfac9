#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mnar/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Gaussian estimation under known missing-not-at-random censoring"};
  app.require_subcommand(1);

  mnar::CommandOptions opts;
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  std::vector<std::string> reports;

  auto common = [&](CLI::App* sub, bool config_required) {
    auto* c = sub->add_option("--config", config, "experiment config (JSON)");
    if (config_required) c->required();
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--out", out, "output directory (default: config output.dir)");
  };
  common(app.add_subcommand("generate", "draw censored observations and hidden rows"), true);
  common(app.add_subcommand("audit", "Monte Carlo audit of the censoring assumptions"), true);
  common(app.add_subcommand("estimate", "run the estimator on generated observations"), true);
  auto* report = app.add_subcommand("report", "aggregate report.json files into a summary CSV and SVG");
  common(report, false);
  report->add_option("reports", reports, "report.json files")->required();
  report->add_flag("--allow-mixed", opts.allow_mixed, "aggregate reports from different configs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : mnar::kExitSchema;
  }

  CLI::App* sub = app.get_subcommands().front();
  if (!config.empty()) opts.config = config;
  if (!out.empty()) opts.out = out;
  if (sub->count("--seed")) opts.seed = seed;
  for (const std::string& r : reports) opts.reports.emplace_back(r);
  return mnar::run_command(sub->get_name(), opts, std::cout, std::cerr);
}
