#pragma once

#include <vector>

#include "mnar/gaussian.hpp"
#include "mnar/missingness.hpp"

namespace mnar {

/// Product of 1 or 2 interval unions.
class TruncationSet {
 public:
  explicit TruncationSet(std::vector<IntervalUnion> factors);

  int dim() const { return static_cast<int>(factors_.size()); }
  const std::vector<IntervalUnion>& factors() const { return factors_; }
  bool contains(const Eigen::Ref<const Vector>& x) const;
  TruncationSet shifted(const Eigen::Ref<const Vector>& c) const;

  /// Upper bound on the mass under `params`: the smallest exact marginal mass.
  double marginal_mass_bound(const GaussianParams& params) const;
  McEstimate mass_mc(const GaussianParams& params, int n, Rng& rng) const;

 private:
  std::vector<IntervalUnion> factors_;
};

struct TruncatedSamplerOptions {
  long max_attempts = 1'000'000;
  double mass_floor = 1e-4;
};

/// Rejection draw from N(mean, cov) conditioned on `set`. Throws MassTooLow
/// when the marginal mass bound is below the floor or the attempt cap runs out.
Vector sample_truncated(const GaussianParams& params, const TruncationSet& set, Rng& rng,
                        const TruncatedSamplerOptions& options = {});

struct TruncatedFitConfig {
  int min_samples = 50;
  long steps = 0;                 // 0: one step per sample
  double lambda_sc = 0.0;         // 0: 0.5 * lambda_min of sufficient-statistic covariance
  double lambda_sc_factor = 0.5;
  long step_offset = -1;          // eta_t = 1/(lambda_sc*(t + offset)); -1: derive from max_initial_step
  double max_initial_step = 0.1;
  double c_dom = 16.0;
  double r_dom = 8.0;
  double average_from = 0.5;      // suffix average over iterates t > average_from * steps
  double settle_tol = 0.5;
  TruncatedSamplerOptions sampler;
};

struct TruncatedEstimate {
  Vector mean;
  Matrix cov;
  long iterations = 0;
  double final_step = 0.0;
  double lambda_sc = 0.0;
  double settle_movement = 0.0;
};

/// Projected SGD on the truncated negative log-likelihood in natural
/// parameters (T = cov^{-1}, nu = T mean). `samples` is n x dim with every row
/// inside `set`.
TruncatedEstimate truncated_fit(const Matrix& samples, const TruncationSet& set,
                                const TruncatedFitConfig& cfg, Rng& rng);

}  // namespace mnar
