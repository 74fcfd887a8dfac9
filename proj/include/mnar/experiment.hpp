#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mnar/io.hpp"
#include "mnar/linear_threshold.hpp"
#include "mnar/self_censoring.hpp"

namespace mnar {

inline constexpr int kSchemaVersion = 1;

struct SelfCensorSettings {
  SelfCensorConfig cfg;
  int tv_samples = 20000;
};

struct DescentSettings {
  double beta = 1.0;
  std::optional<double> alpha;       // absent: audited subset mass
  std::optional<double> lambda_sgd;  // absent: alpha*beta/lambda_max
  std::optional<double> r_proj;
  long M_init = 0;                   // 0: half of the samples
  long M_sgd = 0;                    // 0: the remaining samples
  double eta_lmc = 0.01;
  int M_grad = 2000;
  int lmc_burn_in = 500;
  double R_lmc = 0.0;
  double delta_R = 1e-6;
  double grad_growth = 0.0;
  LmcBoundary lmc_boundary = LmcBoundary::Reflect;
  bool use_witness = true;           // seed chains from the hidden rows file when present
};

struct AuditSettings {
  int mc_samples = 200000;
  std::optional<double> beta;
  CoordSet anchor;
};

/// Thresholds a report must meet; absent entries are not checked.
struct AcceptanceThresholds {
  std::optional<double> max_mean_mahalanobis;
  std::optional<double> max_cov_whitened_frobenius;
  std::optional<double> max_tv;
  bool beat_naive = false;
};

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  std::string scenario;
  int dimension = 0;
  Vector truth_mean;
  Matrix truth_cov;
  MissingnessModel model = SelfCensoringModel{};
  long samples = 0;
  std::uint64_t seed = 0;
  SelfCensorSettings self_censoring;
  DescentSettings linear_threshold;
  AuditSettings audit;
  AcceptanceThresholds acceptance;
  std::filesystem::path output_dir = ".";
  std::optional<std::filesystem::path> observations_file;
  std::optional<std::filesystem::path> hidden_file;
  std::string digest;

  GaussianParams truth() const { return GaussianParams(truth_mean, truth_cov); }
  std::filesystem::path observations_path() const;
  std::filesystem::path hidden_path() const;
};

/// Validates everything before returning; SchemaError names the offending field.
/// Relative paths resolve against `base_dir`.
ExperimentConfig parse_config(const Json& doc, const std::filesystem::path& base_dir = ".");
ExperimentConfig load_config(const std::filesystem::path& path);

/// FNV-1a over the canonical dump of the config with samples, seed and output removed,
/// so replicas of a sweep share a digest.
std::string config_digest(const Json& doc);

Json audit_to_json(const AssumptionReport& report);

struct EstimateReport {
  std::string scenario;
  int dimension = 0;
  long samples = 0;
  std::uint64_t seed = 0;
  std::string config_digest;
  Vector mean;
  std::optional<Matrix> cov;
  double mean_mahalanobis = 0.0;
  double mean_l2 = 0.0;
  std::optional<double> cov_whitened_frobenius;
  std::optional<double> cov_frobenius;
  std::optional<double> tv;
  std::optional<double> tv_std_error;
  double naive_mean_mahalanobis = 0.0;
  Json audit = Json::object();
  Json diagnostics = Json::object();
  AcceptanceThresholds acceptance;
  bool passed = true;
  std::vector<std::string> failures;
  double runtime_seconds = 0.0;  // wall clock, excluded from determinism checks
};

Json report_to_json(const EstimateReport& report);
EstimateReport report_from_json(const Json& doc, const std::string& where = "report");

/// Fills passed/failures from the thresholds.
void judge(EstimateReport& report);

}  // namespace mnar
