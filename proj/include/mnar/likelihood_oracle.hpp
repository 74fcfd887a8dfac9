#pragma once

#include "mnar/gaussian.hpp"
#include "mnar/missingness.hpp"

namespace mnar {

/// Midpoint grid over a box around the true mean. The grid does not move with
/// the candidate, so the discrete objective is smooth in the candidate mean.
struct QuadratureGrid {
  int points_per_dim = 600;
  double half_width_sd = 12.0;  // marginal sd on each side of the true mean
};

struct LikelihoodEval {
  double value = 0.0;
  Vector gradient;
  Matrix hessian;
  double mass_deficit = 0.0;  // worst of truth / candidate
};

/// Population negative log-likelihood of censored observations, its gradient
/// and Hessian at `mu`, by deterministic quadrature over the censored density.
/// Truth and candidate share the covariance of `truth`. d <= 2. Throws
/// GridTooCoarse when the candidate drifts far enough to leave the box.
LikelihoodEval likelihood_oracle_eval(const Eigen::Ref<const Vector>& mu,
                                      const LinearThresholdModel& model, const GaussianParams& truth,
                                      const QuadratureGrid& grid = {});

}  // namespace mnar
