#include "mnar/truncated_mle.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mnar/errors.hpp"

namespace mnar {

TruncationSet::TruncationSet(std::vector<IntervalUnion> factors) : factors_(std::move(factors)) {
  if (factors_.empty() || factors_.size() > 2) {
    throw InvalidArgument("TruncationSet: only 1 or 2 dimensions are supported");
  }
}

bool TruncationSet::contains(const Eigen::Ref<const Vector>& x) const {
  if (x.size() != dim()) throw InvalidArgument("TruncationSet: dimension mismatch");
  for (int k = 0; k < dim(); ++k) {
    if (!factors_[static_cast<std::size_t>(k)].contains(x(k))) return false;
  }
  return true;
}

TruncationSet TruncationSet::shifted(const Eigen::Ref<const Vector>& c) const {
  if (c.size() != dim()) throw InvalidArgument("TruncationSet: dimension mismatch");
  std::vector<IntervalUnion> out;
  for (int k = 0; k < dim(); ++k) out.push_back(factors_[static_cast<std::size_t>(k)].shifted(c(k)));
  return TruncationSet(std::move(out));
}

double TruncationSet::marginal_mass_bound(const GaussianParams& params) const {
  if (params.dim() != dim()) throw InvalidArgument("TruncationSet: dimension mismatch");
  double bound = 1.0;
  for (int k = 0; k < dim(); ++k) {
    bound = std::min(bound, factors_[static_cast<std::size_t>(k)].normal_mass(
                                params.mean()(k), std::sqrt(params.cov()(k, k))));
  }
  return bound;
}

McEstimate TruncationSet::mass_mc(const GaussianParams& params, int n, Rng& rng) const {
  if (n < 1) throw InvalidArgument("mass_mc: n must be positive");
  long hits = 0;
  Vector y;
  for (int i = 0; i < n; ++i) {
    sample_gaussian_into(params, rng, y);
    hits += contains(y);
  }
  const double p = static_cast<double>(hits) / n;
  return {p, std::sqrt(p * (1.0 - p) / n)};
}

namespace {

[[noreturn]] void throw_mass_too_low(double bound, double floor, long attempts) {
  std::ostringstream msg;
  msg << "truncation set mass too low (marginal bound " << bound << ", floor " << floor << ", "
      << attempts << " rejection attempts); check the pairwise mass assumption";
  throw MassTooLow(msg.str());
}

template <int D>
struct NaturalParams {
  static constexpr int P = D + D * (D + 1) / 2;
  using Vec = Eigen::Matrix<double, D, 1>;
  using Mat = Eigen::Matrix<double, D, D>;
  using Par = Eigen::Matrix<double, P, 1>;

  // Sufficient statistics (x, -x_i^2/2, -x_i x_j) matching log density nu^T x - x^T T x / 2.
  static Par stats(const Vec& x) {
    Par s;
    s.template head<D>() = x;
    int k = D;
    for (int i = 0; i < D; ++i) {
      for (int j = i; j < D; ++j) s(k++) = i == j ? -0.5 * x(i) * x(i) : -x(i) * x(j);
    }
    return s;
  }

  static void unpack(const Par& p, Vec& nu, Mat& t) {
    nu = p.template head<D>();
    int k = D;
    for (int i = 0; i < D; ++i) {
      for (int j = i; j < D; ++j) {
        t(i, j) = p(k);
        t(j, i) = p(k);
        ++k;
      }
    }
  }

  static Par pack(const Vec& nu, const Mat& t) {
    Par p;
    p.template head<D>() = nu;
    int k = D;
    for (int i = 0; i < D; ++i) {
      for (int j = i; j < D; ++j) p(k++) = t(i, j);
    }
    return p;
  }

  static void project(Par& p, double eig_lo, double eig_hi, double radius) {
    Vec nu;
    Mat t;
    unpack(p, nu, t);
    Eigen::SelfAdjointEigenSolver<Mat> eig(t);
    const Vec clipped = eig.eigenvalues().cwiseMax(eig_lo).cwiseMin(eig_hi);
    t = eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
    const double norm = nu.norm();
    if (norm > radius) nu *= radius / norm;
    p = pack(nu, t);
  }
};

template <int D>
TruncatedEstimate fit_impl(const Matrix& samples, const TruncationSet& set,
                           const TruncatedFitConfig& cfg, Rng& rng) {
  using NP = NaturalParams<D>;
  using Vec = typename NP::Vec;
  using Mat = typename NP::Mat;
  using Par = typename NP::Par;
  constexpr int P = NP::P;

  const Eigen::Index n = samples.rows();
  const Vec m = samples.colwise().mean().transpose();
  const Matrix centered = samples.rowwise() - m.transpose();
  const Mat emp_cov = (centered.transpose() * centered) / static_cast<double>(n);
  Eigen::LLT<Mat> emp_llt(emp_cov);
  if (emp_llt.info() != Eigen::Success || emp_cov.diagonal().minCoeff() <= 0.0) {
    throw NotPositiveDefinite("truncated_fit: empirical covariance of samples is degenerate");
  }
  const Mat l = emp_llt.matrixL();
  const Mat l_inv = l.inverse();

  std::vector<Vec> standardized(static_cast<std::size_t>(n));
  Par stat_mean = Par::Zero();
  for (Eigen::Index i = 0; i < n; ++i) {
    standardized[static_cast<std::size_t>(i)] = l_inv * (samples.row(i).transpose() - m);
    stat_mean += NP::stats(standardized[static_cast<std::size_t>(i)]);
  }
  stat_mean /= static_cast<double>(n);

  double lambda = cfg.lambda_sc;
  if (lambda <= 0.0) {
    Eigen::Matrix<double, P, P> fisher = Eigen::Matrix<double, P, P>::Zero();
    for (const Vec& u : standardized) {
      const Par s = NP::stats(u) - stat_mean;
      fisher.noalias() += s * s.transpose();
    }
    fisher /= static_cast<double>(n);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, P, P>> eig(fisher, Eigen::EigenvaluesOnly);
    lambda = cfg.lambda_sc_factor * eig.eigenvalues().minCoeff();
    if (!(lambda > 0.0)) throw NotPositiveDefinite("truncated_fit: degenerate sufficient statistics");
  }
  const long steps = cfg.steps > 0 ? cfg.steps : static_cast<long>(n);
  const long offset = cfg.step_offset >= 0
                          ? cfg.step_offset
                          : static_cast<long>(std::ceil(1.0 / (lambda * cfg.max_initial_step)));
  const long average_start = static_cast<long>(cfg.average_from * static_cast<double>(steps));
  const long settle_mark = static_cast<long>(0.9 * static_cast<double>(steps));
  const double eig_lo = 1.0 / cfg.c_dom;
  const double eig_hi = cfg.c_dom;

  std::normal_distribution<double> normal;
  Par p = NP::pack(Vec::Zero(), Mat::Identity());
  Par sum = Par::Zero();
  Par at_mark = p;
  long averaged = 0;
  double eta = 0.0;
  Vec nu;
  Mat t;
  for (long step = 1; step <= steps; ++step) {
    const Vec& x = standardized[static_cast<std::size_t>((step - 1) % n)];
    NP::unpack(p, nu, t);
    const Mat sigma_std = t.inverse();
    const Vec mu_std = sigma_std * nu;
    const Mat chol_std = Eigen::LLT<Mat>(sigma_std).matrixL();
    const Vec mean_orig = m + l * mu_std;
    const Mat chol_orig = l * chol_std;

    Vec eps;
    Vec z_orig;
    long attempts = 0;
    while (true) {
      for (int k = 0; k < D; ++k) eps(k) = normal(rng);
      z_orig.noalias() = mean_orig + chol_orig * eps;
      bool inside = true;
      for (int k = 0; k < D; ++k) inside = inside && set.factors()[static_cast<std::size_t>(k)].contains(z_orig(k));
      if (inside) break;
      ++attempts;
      if (attempts == 1000) {
        const GaussianParams current(mean_orig, chol_orig * chol_orig.transpose(), 0.0);
        const double bound = set.marginal_mass_bound(current);
        if (bound < cfg.sampler.mass_floor) throw_mass_too_low(bound, cfg.sampler.mass_floor, attempts);
      }
      if (attempts >= cfg.sampler.max_attempts) throw_mass_too_low(-1.0, cfg.sampler.mass_floor, attempts);
    }
    const Vec z = mu_std + chol_std * eps;

    eta = 1.0 / (lambda * static_cast<double>(step + offset));
    p.noalias() -= eta * (NP::stats(z) - NP::stats(x));
    NP::project(p, eig_lo, eig_hi, cfg.r_dom);

    if (step > average_start) {
      sum += p;
      ++averaged;
    }
    if (step == settle_mark) at_mark = p;
  }

  TruncatedEstimate out;
  out.iterations = steps;
  out.final_step = eta;
  out.lambda_sc = lambda;
  out.settle_movement = settle_mark >= 1 ? (p - at_mark).norm() : 0.0;
  if (out.settle_movement > cfg.settle_tol) {
    std::ostringstream msg;
    msg << "iterates moved " << out.settle_movement << " over the final 10% of " << steps
        << " steps (tolerance " << cfg.settle_tol << ")";
    throw NonConvergent(msg.str());
  }
  const Par avg = sum / static_cast<double>(std::max(averaged, 1L));
  NP::unpack(avg, nu, t);
  const Mat sigma_std = t.inverse();
  const Vec mu_std = sigma_std * nu;
  out.mean = m + l * mu_std;
  Matrix cov = l * sigma_std * l.transpose();
  out.cov = 0.5 * (cov + cov.transpose());
  return out;
}

}  // namespace

Vector sample_truncated(const GaussianParams& params, const TruncationSet& set, Rng& rng,
                        const TruncatedSamplerOptions& options) {
  if (params.dim() != set.dim()) throw InvalidArgument("sample_truncated: dimension mismatch");
  const double bound = set.marginal_mass_bound(params);
  if (bound < options.mass_floor) throw_mass_too_low(bound, options.mass_floor, 0);
  Vector y;
  for (long attempt = 0; attempt < options.max_attempts; ++attempt) {
    sample_gaussian_into(params, rng, y);
    if (set.contains(y)) return y;
  }
  throw_mass_too_low(bound, options.mass_floor, options.max_attempts);
}

TruncatedEstimate truncated_fit(const Matrix& samples, const TruncationSet& set,
                                const TruncatedFitConfig& cfg, Rng& rng) {
  if (samples.cols() != set.dim()) throw InvalidArgument("truncated_fit: dimension mismatch");
  if (samples.rows() < std::max(cfg.min_samples, 2)) {
    std::ostringstream msg;
    msg << "truncated_fit: " << samples.rows() << " samples, need at least " << cfg.min_samples;
    throw InvalidArgument(msg.str());
  }
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    if (!set.contains(samples.row(i).transpose())) {
      throw InvalidArgument("truncated_fit: sample outside the truncation set");
    }
  }
  if (set.dim() == 1) return fit_impl<1>(samples, set, cfg, rng);
  return fit_impl<2>(samples, set, cfg, rng);
}

}  // namespace mnar
