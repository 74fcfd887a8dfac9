#include "mnar/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "mnar/errors.hpp"

namespace mnar {

double default_lambda_floor(const Matrix& cov) {
  const double d = static_cast<double>(std::max<Eigen::Index>(cov.rows(), 1));
  return 1e-9 * std::abs(cov.trace()) / d;
}

Matrix cholesky(const Matrix& cov, double floor) {
  if (cov.rows() != cov.cols()) throw InvalidArgument("cholesky: matrix is not square");
  if (floor < 0.0) floor = default_lambda_floor(cov);
  const Eigen::Index n = cov.rows();
  Matrix l = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double pivot = cov(j, j);
    for (Eigen::Index k = 0; k < j; ++k) pivot -= l(j, k) * l(j, k);
    if (!(pivot > floor)) {
      std::ostringstream msg;
      msg << "pivot " << pivot << " at index " << j << " is not above floor " << floor;
      throw NotPositiveDefinite(msg.str());
    }
    const double ljj = std::sqrt(pivot);
    l(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double s = cov(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return l;
}

GaussianParams::GaussianParams(Vector mean, Matrix cov, double lambda_floor)
    : mean_(std::move(mean)), cov_(std::move(cov)) {
  const Eigen::Index d = mean_.size();
  if (d == 0) throw InvalidArgument("GaussianParams: empty mean");
  if (cov_.rows() != d || cov_.cols() != d) {
    throw InvalidArgument("GaussianParams: covariance shape does not match mean");
  }
  const double scale = std::max(cov_.cwiseAbs().maxCoeff(), 1e-300);
  if ((cov_ - cov_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw InvalidArgument("GaussianParams: covariance is not symmetric");
  }
  cov_ = 0.5 * (cov_ + cov_.transpose());
  if (lambda_floor < 0.0) lambda_floor = default_lambda_floor(cov_);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov_, Eigen::EigenvaluesOnly);
  lambda_min_ = eig.eigenvalues().minCoeff();
  lambda_max_ = eig.eigenvalues().maxCoeff();
  if (!(lambda_min_ >= lambda_floor) || lambda_min_ <= 0.0) {
    std::ostringstream msg;
    msg << "smallest eigenvalue " << lambda_min_ << " is below floor " << lambda_floor;
    throw NotPositiveDefinite(msg.str());
  }
  chol_ = cholesky(cov_, 0.0);
  const double log_det = 2.0 * chol_.diagonal().array().log().sum();
  log_norm_ = -0.5 * (static_cast<double>(d) * std::log(2.0 * std::numbers::pi) + log_det);
}

double GaussianParams::log_density(const Eigen::Ref<const Vector>& y) const {
  const Vector w = chol_.triangularView<Eigen::Lower>().solve(y - mean_);
  return log_norm_ - 0.5 * w.squaredNorm();
}

Vector select(const Eigen::Ref<const Vector>& v, std::span<const int> idx) {
  Vector out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out(static_cast<Eigen::Index>(k)) = v(idx[k]);
  return out;
}

Matrix select(const Matrix& m, std::span<const int> rows, std::span<const int> cols) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = m(rows[r], cols[c]);
    }
  }
  return out;
}

CoordSet complement(const CoordSet& seen, int d) {
  CoordSet out;
  out.reserve(static_cast<std::size_t>(d));
  std::size_t k = 0;
  for (int i = 0; i < d; ++i) {
    if (k < seen.size() && seen[k] == i) {
      ++k;
    } else {
      out.push_back(i);
    }
  }
  return out;
}

ConditionalGaussian condition_gaussian(const GaussianParams& params, const CoordSet& seen,
                                       const Eigen::Ref<const Vector>& x) {
  const int d = params.dim();
  if (seen.empty() || static_cast<int>(seen.size()) >= d) {
    throw InvalidArgument("condition_gaussian: seen set must be a nonempty proper subset");
  }
  if (x.size() != static_cast<Eigen::Index>(seen.size())) {
    throw InvalidArgument("condition_gaussian: value count does not match seen set");
  }
  for (std::size_t k = 0; k < seen.size(); ++k) {
    if (seen[k] < 0 || seen[k] >= d || (k > 0 && seen[k] <= seen[k - 1])) {
      throw InvalidArgument("condition_gaussian: seen set must be strictly increasing in [0, d)");
    }
  }
  ConditionalGaussian out;
  out.free = complement(seen, d);
  const Matrix s_aa = select(params.cov(), seen, seen);
  const Matrix s_fa = select(params.cov(), out.free, seen);
  const Matrix s_ff = select(params.cov(), out.free, out.free);
  Matrix l_aa;
  try {
    l_aa = cholesky(s_aa);
  } catch (const NotPositiveDefinite& e) {
    throw SingularBlock(e.what());
  }
  // gain = s_fa * s_aa^{-1}, computed as (s_aa^{-1} s_af)^T
  const auto llt_solve = [&l_aa](const Matrix& rhs) {
    const Matrix half = l_aa.triangularView<Eigen::Lower>().solve(rhs);
    return Matrix(l_aa.transpose().triangularView<Eigen::Upper>().solve(half));
  };
  const Matrix gain = llt_solve(s_fa.transpose()).transpose();
  out.mu_cond = select(params.mean(), out.free) + gain * (x - select(params.mean(), seen));
  out.sigma_cond = s_ff - gain * s_fa.transpose();
  out.sigma_cond = 0.5 * (out.sigma_cond + out.sigma_cond.transpose());
  try {
    out.whitener = cholesky(out.sigma_cond, 0.0);
  } catch (const NotPositiveDefinite& e) {
    throw SingularBlock(e.what());
  }
  return out;
}

double mahalanobis_norm_chol(const Eigen::Ref<const Vector>& v, const Matrix& chol) {
  if (v.size() != chol.rows()) throw InvalidArgument("mahalanobis_norm: dimension mismatch");
  return chol.triangularView<Eigen::Lower>().solve(v).norm();
}

double mahalanobis_norm(const Eigen::Ref<const Vector>& v, const Matrix& cov) {
  Matrix l;
  try {
    l = cholesky(cov);
  } catch (const NotPositiveDefinite& e) {
    throw SingularBlock(e.what());
  }
  return mahalanobis_norm_chol(v, l);
}

void sample_gaussian_into(const GaussianParams& params, Rng& rng, Vector& out) {
  std::normal_distribution<double> normal;
  const int d = params.dim();
  Eigen::VectorXd z(d);
  for (int k = 0; k < d; ++k) z(k) = normal(rng);
  out.resize(d);
  out.noalias() = params.mean() + params.chol().triangularView<Eigen::Lower>() * z;
}

Matrix sample_gaussian(const GaussianParams& params, int n, Rng& rng) {
  if (n < 1) throw InvalidArgument("sample_gaussian: n must be positive");
  const int d = params.dim();
  std::normal_distribution<double> normal;
  Matrix z(n, d);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < d; ++k) z(i, k) = normal(rng);
  }
  Matrix out = z * params.chol().transpose();
  out.rowwise() += params.mean().transpose();
  return out;
}

McEstimate tv_distance_mc(const GaussianParams& p, const GaussianParams& q, int n, Rng& rng) {
  if (p.dim() != q.dim()) throw InvalidArgument("tv_distance_mc: dimension mismatch");
  if (n < 2) throw InvalidArgument("tv_distance_mc: need at least two draws");
  double sum = 0.0;
  double sum_sq = 0.0;
  Vector y;
  for (int i = 0; i < n; ++i) {
    sample_gaussian_into(p, rng, y);
    const double log_ratio = q.log_density(y) - p.log_density(y);
    const double term = std::max(0.0, 1.0 - std::exp(std::min(log_ratio, 0.0)));
    sum += term;
    sum_sq += term * term;
  }
  const double nn = static_cast<double>(n);
  const double mean = sum / nn;
  const double var = std::max(0.0, (sum_sq - nn * mean * mean) / (nn - 1.0));
  return {mean, std::sqrt(var / nn)};
}

Matrix inverse_sqrt_spd(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (m + m.transpose()));
  if (eig.eigenvalues().minCoeff() <= 0.0) {
    throw SingularBlock("inverse_sqrt_spd: matrix is not positive definite");
  }
  return eig.eigenvectors() * eig.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
         eig.eigenvectors().transpose();
}

}  // namespace mnar
