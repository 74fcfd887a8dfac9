#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "mnar/gaussian.hpp"
#include "mnar/missingness.hpp"
#include "mnar/truncated_mle.hpp"

namespace mnar {

struct SelfCensorConfig {
  int min_samples = 2000;   // per coordinate and per pair
  bool psd_projection = false;
  // Subproblem budget ceil(1/(alpha * eps'^2)) with eps' = eps_scale * epsilon / d.
  // epsilon == 0 uses every routed sample.
  double epsilon = 0.0;
  double eps_scale = 1.0;
  double alpha = 0.0;
  std::uint64_t seed = 0;
  int threads = 1;
  TruncatedFitConfig fit;
};

struct SubproblemDiagnostics {
  long samples = 0;
  long iterations = 0;
  Vector fit_mean;
  Matrix fit_cov;
};

struct SelfCensorEstimate {
  Vector mean;
  Matrix cov;
  std::vector<SubproblemDiagnostics> per_coordinate;
  std::map<std::pair<int, int>, SubproblemDiagnostics> per_pair;
  bool psd_projected = false;
};

/// Mean from per-coordinate 1D truncated fits, diagonal from the same fits,
/// off-diagonal (i, j) from the 2D fit on rows where both are seen.
SelfCensorEstimate fit_self_censoring(const std::vector<Observation>& observations,
                                      const SelfCensoringModel& model, const SelfCensorConfig& cfg);

/// Eigenvalue clipping at zero followed by symmetrization.
Matrix project_psd(const Matrix& m);

struct EstimateMetrics {
  double mean_mahalanobis = 0.0;       // ||cov*^{-1/2}(mu* - mu_hat)||
  double cov_whitened_frobenius = 0.0; // ||I - cov*^{-1/2} cov_hat cov*^{-1/2}||_F
  double mean_l2 = 0.0;
  double cov_frobenius = 0.0;
  std::optional<McEstimate> tv;        // absent when cov_hat is not positive definite
};

EstimateMetrics evaluate_estimate(const GaussianParams& truth, const Vector& mean, const Matrix& cov,
                                  int tv_samples, Rng& rng);
inline EstimateMetrics evaluate_estimate(const GaussianParams& truth, const SelfCensorEstimate& est,
                                         int tv_samples, Rng& rng) {
  return evaluate_estimate(truth, est.mean, est.cov, tv_samples, rng);
}

}  // namespace mnar
