#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mnar/experiment.hpp"

namespace mnar {

struct CommandOptions {
  std::optional<std::filesystem::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  bool allow_mixed = false;
  std::vector<std::filesystem::path> reports;  // inputs to `report`
};

enum ExitCode : int {
  kExitOk = 0,
  kExitIo = 1,
  kExitSchema = 2,
  kExitAssumption = 3,
  kExitNonConvergence = 4,
  kExitAcceptance = 5,
};

/// Config with command-line overrides applied.
ExperimentConfig resolve_config(const CommandOptions& opts);

void cmd_generate(const ExperimentConfig& cfg, std::ostream& log);
AssumptionReport cmd_audit(const ExperimentConfig& cfg, std::ostream& log);
EstimateReport cmd_estimate(const ExperimentConfig& cfg, std::ostream& log);

struct SummaryRow {
  long samples = 0;
  std::uint64_t seed = 0;
  double metric = 0.0;
  bool passed = true;
};

struct Summary {
  std::string metric_name;
  std::vector<SummaryRow> rows;         // sorted by (samples, seed)
  std::optional<double> loglog_slope;   // over per-n medians, needs >= 2 distinct n
  bool all_passed = true;
};

/// Throws SchemaError on mixed digests unless allowed.
Summary summarize(const std::vector<EstimateReport>& reports, bool allow_mixed);
std::string summary_csv(const Summary& s);
std::string summary_svg(const Summary& s);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Dispatches a subcommand and maps failures to exit codes; messages go to `err`.
int run_command(const std::string& name, const CommandOptions& opts, std::ostream& log, std::ostream& err);

}  // namespace mnar
