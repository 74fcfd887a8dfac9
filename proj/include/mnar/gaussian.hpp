#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "mnar/random.hpp"

namespace mnar {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Coordinate indices (0-based), strictly increasing.
using CoordSet = std::vector<int>;

/// Default eigenvalue floor: 1e-9 * trace / d.
double default_lambda_floor(const Matrix& cov);

/// Lower-triangular L with L * L^T = cov. Throws NotPositiveDefinite when a
/// pivot falls to or below `floor` (negative floor selects the default).
Matrix cholesky(const Matrix& cov, double floor = -1.0);

/// Mean and covariance of a d-variate normal. Immutable after construction.
class GaussianParams {
 public:
  GaussianParams(Vector mean, Matrix cov, double lambda_floor = -1.0);

  int dim() const { return static_cast<int>(mean_.size()); }
  const Vector& mean() const { return mean_; }
  const Matrix& cov() const { return cov_; }
  const Matrix& chol() const { return chol_; }
  double lambda_min() const { return lambda_min_; }
  double lambda_max() const { return lambda_max_; }

  double log_density(const Eigen::Ref<const Vector>& y) const;

 private:
  Vector mean_;
  Matrix cov_;
  Matrix chol_;
  double lambda_min_ = 0.0;
  double lambda_max_ = 0.0;
  double log_norm_ = 0.0;
};

struct ConditionalGaussian {
  CoordSet free;  // coordinates not conditioned on
  Vector mu_cond;
  Matrix sigma_cond;
  Matrix whitener;  // lower-triangular, whitener * whitener^T = sigma_cond
};

/// Distribution of y_free given y_seen = x under N(mean, cov).
ConditionalGaussian condition_gaussian(const GaussianParams& params, const CoordSet& seen,
                                       const Eigen::Ref<const Vector>& x);

/// sqrt(v^T cov^{-1} v) via a triangular solve against the Cholesky factor.
double mahalanobis_norm(const Eigen::Ref<const Vector>& v, const Matrix& cov);
double mahalanobis_norm_chol(const Eigen::Ref<const Vector>& v, const Matrix& chol);

/// n x d matrix of i.i.d. rows mean + L z.
Matrix sample_gaussian(const GaussianParams& params, int n, Rng& rng);

/// Single draw written into `out` (size d), no allocation when out is sized.
void sample_gaussian_into(const GaussianParams& params, Rng& rng, Vector& out);

struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// One-sided Monte Carlo estimate of TV(p, q): mean of max(0, 1 - q(y)/p(y)), y ~ p.
McEstimate tv_distance_mc(const GaussianParams& p, const GaussianParams& q, int n, Rng& rng);

/// Symmetric inverse square root via eigendecomposition.
Matrix inverse_sqrt_spd(const Matrix& m);

/// Sub-vector / sub-matrix selection by coordinate lists.
Vector select(const Eigen::Ref<const Vector>& v, std::span<const int> idx);
Matrix select(const Matrix& m, std::span<const int> rows, std::span<const int> cols);

/// Complement of `seen` in [0, d).
CoordSet complement(const CoordSet& seen, int d);

}  // namespace mnar
