#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "mnar/gaussian.hpp"
#include "mnar/missingness.hpp"

namespace mnar {

/// How a Langevin step that leaves the feasible set is brought back.
/// Projection piles mass on the boundary (bias of order sqrt(eta));
/// reflection keeps the truncated law up to order eta.
enum class LmcBoundary { Reflect, Project };

/// Tuning of the mean estimator under linear-thresholding missingness.
struct DescentConfig {
  double beta = 1.0;
  double lambda_sgd = 0.0;
  double eta_lmc = 0.01;
  double R_lmc = 0.0;  // <= 0: sqrt(d - |A|) + sqrt(2 log(1/delta_R)) per observation
  double delta_R = 1e-6;
  double r_proj = 1.0;
  long M_init = 0;
  long M_sgd = 0;
  int M_grad = 2000;
  int lmc_burn_in = 500;
  double grad_growth = 0.0;  // chain length M_grad * i^grad_growth at SGD step i
  LmcBoundary lmc_boundary = LmcBoundary::Reflect;

  /// Throws InvalidArgument / InvalidBeta on bad values.
  void validate(int d, const Matrix& sigma) const;
};

/// Defaults derived from the audited mass alpha: lambda_sgd = alpha*beta/lambda_max,
/// r_proj = max(1, 2*4*sqrt((lambda_max/beta) log(1/alpha))).
DescentConfig default_descent_config(const Matrix& sigma, double alpha, double beta, long m_init,
                                     long m_sgd);

/// Block-wise available-case means over blocks of beta*d consecutive coordinates.
Vector initialize(const std::vector<Observation>& observations, int d, double beta);

/// Per-coordinate average over the rows where the coordinate is seen.
Vector available_case_mean(const std::vector<Observation>& observations, int d);

/// mu0 + min(r, ||v - mu0||_Sigma) (v - mu0)/||v - mu0||_Sigma.
Vector project_to_domain(const Eigen::Ref<const Vector>& mu0, const Eigen::Ref<const Vector>& v,
                         double r_proj, const Matrix& sigma);
Vector project_to_domain_chol(const Eigen::Ref<const Vector>& mu0, const Eigen::Ref<const Vector>& v,
                              double r_proj, const Matrix& sigma_chol);

struct GradientSample {
  Vector gradient;
  Vector completion;  // x merged with the sampled hidden coordinates
  bool mixing_ok = true;
  int unsettled_projections = 0;
  double effective_radius = 0.0;  // R plus the distance from the ball center to K
};

/// Stochastic gradient of the censored negative log-likelihood at mu for one
/// observation, via projected Langevin over the whitened pattern polytope.
/// Per-pattern conditioning is cached, so one sampler should serve a whole run.
class GradientSampler {
 public:
  GradientSampler(LinearThresholdModel model, Matrix sigma);

  int dim() const { return model_.dim(); }
  const Matrix& sigma() const { return sigma_; }

  /// `witness` (full d-vector, optional) seeds the chain with the generating completion.
  GradientSample sample(const Observation& obs, const Eigen::Ref<const Vector>& mu, double eta,
                        double radius, int steps, int burn_in, Rng& rng,
                        const Vector* witness = nullptr);

  /// Radius default for an observation with `hidden` unseen coordinates.
  static double default_radius(int hidden, double delta);

  void set_boundary(LmcBoundary b) { boundary_ = b; }
  LmcBoundary boundary() const { return boundary_; }

 private:
  struct Pattern {
    CoordSet seen;
    CoordSet hidden;
    Matrix gain;        // Sigma_{hidden,seen} Sigma_{seen,seen}^{-1}
    Matrix whitener;    // Sigma_cond = W W^T
    Matrix whitener_inv;
    Matrix normals;     // d x k rows v_{i,hidden}^T W, sign-flipped for hidden i
  };
  const Pattern& pattern_for(const Observation& obs);

  LinearThresholdModel model_;
  Matrix sigma_;
  Matrix sigma_chol_;
  std::unordered_map<std::uint64_t, Pattern> cache_;
  LmcBoundary boundary_ = LmcBoundary::Reflect;
};

/// Free-function form; builds a fresh sampler.
GradientSample sample_gradient(const Observation& obs, const Eigen::Ref<const Vector>& mu,
                               const Matrix& sigma, const LinearThresholdModel& model, double eta_lmc,
                               double R_lmc, int M_grad, Rng& rng, int burn_in = 0,
                               const Vector* witness = nullptr);

struct IterateTrace {
  Vector mu0;
  std::vector<Vector> iterates;     // mu^(1..M_sgd)
  std::vector<double> etas;
  std::vector<double> grad_norms;
  std::vector<double> dist_to_mu0;  // ||mu^(i) - mu0||_Sigma
  Vector mean;                      // average of iterates
  long nonmixing_warnings = 0;
  long unsettled_projections = 0;
};

/// Averaged projected SGD. The first M_init observations initialize, the next
/// M_sgd drive the descent. `complete` (rows aligned with `stream`) seeds
/// Langevin chains when available.
IterateTrace missing_descent(const std::vector<Observation>& stream, const LinearThresholdModel& model,
                             const Matrix& sigma, const DescentConfig& cfg, Rng& rng,
                             const Matrix* complete = nullptr);

}  // namespace mnar
