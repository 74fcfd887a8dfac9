#include "mnar/likelihood_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "mnar/errors.hpp"

namespace mnar {

namespace {

// Weighted moments accumulated in log space, rescaled whenever a larger weight arrives.
struct Moments {
  double log_scale = -std::numeric_limits<double>::infinity();
  double s0 = 0.0;
  Eigen::Vector2d s1 = Eigen::Vector2d::Zero();
  Eigen::Matrix2d s2 = Eigen::Matrix2d::Zero();
  double truth_mass = 0.0;

  void add(double log_w, const Eigen::Vector2d& y) {
    if (log_w > log_scale) {
      const double shrink = std::exp(log_scale - log_w);
      s0 *= shrink;
      s1 *= shrink;
      s2 *= shrink;
      log_scale = log_w;
    }
    const double w = std::exp(log_w - log_scale);
    s0 += w;
    s1 += w * y;
    s2 += w * y * y.transpose();
  }
};

}  // namespace

LikelihoodEval likelihood_oracle_eval(const Eigen::Ref<const Vector>& mu,
                                      const LinearThresholdModel& model, const GaussianParams& truth,
                                      const QuadratureGrid& grid) {
  const int d = truth.dim();
  if (d > 2) throw InvalidArgument("likelihood_oracle_eval: only d <= 2 is supported");
  if (model.dim() != d || mu.size() != d) throw InvalidArgument("likelihood_oracle_eval: dimension mismatch");
  if (grid.points_per_dim < 400) {
    throw GridTooCoarse("need at least 400 points per dimension");
  }
  const int n = grid.points_per_dim;
  const GaussianParams candidate(mu, truth.cov());

  Eigen::Vector2d lo = Eigen::Vector2d::Zero();
  Eigen::Vector2d step = Eigen::Vector2d::Ones();
  for (int k = 0; k < d; ++k) {
    const double sd = std::sqrt(truth.cov()(k, k));
    lo(k) = truth.mean()(k) - grid.half_width_sd * sd;
    step(k) = 2.0 * grid.half_width_sd * sd / n;
  }
  const double cell = d == 1 ? step(0) : step(0) * step(1);

  const Matrix prec = truth.chol().transpose().triangularView<Eigen::Upper>().solve(
      truth.chol().triangularView<Eigen::Lower>().solve(Matrix::Identity(d, d)));

  double value = 0.0;
  double total_truth = 0.0;
  double total_candidate = 0.0;
  Vector grad_acc = Vector::Zero(d);  // sum of w* (m_g - mu)
  Matrix cov_acc = Matrix::Zero(d, d);  // sum of w* C_g
  std::unordered_map<long, Moments> groups;

  const int n2 = d == 2 ? n : 1;
  Vector y(d);
  for (int j0 = 0; j0 < n; ++j0) {
    for (int j1 = 0; j1 < n2; ++j1) {
      y(0) = lo(0) + (j0 + 0.5) * step(0);
      if (d == 2) y(1) = lo(1) + (j1 + 0.5) * step(1);
      const double log_truth = truth.log_density(y);
      const double log_cand = candidate.log_density(y);
      const double truth_w = std::exp(log_truth) * cell;
      total_truth += truth_w;
      total_candidate += std::exp(log_cand) * cell;

      int pattern = 0;
      for (int k = 0; k < d; ++k) pattern |= model.observes(k, y) ? (1 << k) : 0;
      if (pattern == (1 << d) - 1) {
        // fully seen: the group is one point, no hidden integral
        value -= truth_w * log_cand;
        grad_acc += truth_w * (y - mu);
        continue;
      }
      long key = pattern;
      if (pattern & 1) key += 4L * (j0 + 1);
      if (d == 2 && (pattern & 2)) key += 4L * (n + 1) * (j1 + 1);
      Moments& g = groups[key];
      Eigen::Vector2d y2 = Eigen::Vector2d::Zero();
      y2.head(d) = y;
      g.add(log_cand, y2);
      g.truth_mass += truth_w;
    }
  }

  for (const auto& [key, g] : groups) {
    const int pattern = static_cast<int>(key % 4);
    double hidden_cell = 1.0;
    for (int k = 0; k < d; ++k) {
      if (!(pattern & (1 << k))) hidden_cell *= step(k);
    }
    const double log_z = g.log_scale + std::log(g.s0 * hidden_cell);
    value -= g.truth_mass * log_z;
    const Eigen::Vector2d mean = g.s1 / g.s0;
    const Eigen::Matrix2d second = g.s2 / g.s0 - mean * mean.transpose();
    grad_acc += g.truth_mass * (mean.head(d) - mu);
    cov_acc += g.truth_mass * second.topLeftCorner(d, d);
  }

  LikelihoodEval out;
  out.mass_deficit = std::max(std::abs(1.0 - total_truth), std::abs(1.0 - total_candidate));
  if (out.mass_deficit > 1e-6) {
    std::ostringstream msg;
    msg << "grid misses " << out.mass_deficit << " of the Gaussian mass";
    throw GridTooCoarse(msg.str());
  }
  out.value = value;
  out.gradient = -prec * grad_acc;
  out.hessian = total_truth * prec - prec * cov_acc * prec;
  out.hessian = 0.5 * (out.hessian + out.hessian.transpose());
  return out;
}

}  // namespace mnar
