#include "mnar/linear_threshold.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mnar/errors.hpp"
#include "mnar/projection.hpp"

namespace mnar {

void DescentConfig::validate(int d, const Matrix& sigma) const {
  subset_size_for_beta(beta, d);
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw InvalidArgument(std::string("DescentConfig: ") + name + " must be positive");
    }
  };
  positive(lambda_sgd, "lambda_sgd");
  positive(eta_lmc, "eta_lmc");
  positive(r_proj, "r_proj");
  if (R_lmc < 0.0) throw InvalidArgument("DescentConfig: R_lmc must be nonnegative");
  if (M_init < 1 || M_sgd < 1 || M_grad < 1) {
    throw InvalidArgument("DescentConfig: M_init, M_sgd and M_grad must be positive");
  }
  if (lmc_burn_in < 0 || lmc_burn_in >= M_grad) {
    throw InvalidArgument("DescentConfig: lmc_burn_in must lie in [0, M_grad)");
  }
  if (eta_lmc >= 1.0) throw InvalidArgument("DescentConfig: eta_lmc must be below 1");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma, Eigen::EigenvaluesOnly);
  if (lambda_sgd > 1.0 / eig.eigenvalues().minCoeff() * (1.0 + 1e-12)) {
    throw InvalidArgument("DescentConfig: lambda_sgd exceeds 1/lambda_min(Sigma)");
  }
}

DescentConfig default_descent_config(const Matrix& sigma, double alpha, double beta, long m_init,
                                     long m_sgd) {
  if (!(alpha > 0.0) || alpha > 1.0) throw InvalidArgument("default_descent_config: alpha must be in (0, 1]");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma, Eigen::EigenvaluesOnly);
  const double lambda_max = eig.eigenvalues().maxCoeff();
  DescentConfig cfg;
  cfg.beta = beta;
  cfg.lambda_sgd = alpha * beta / lambda_max;
  cfg.r_proj = std::max(1.0, 2.0 * 4.0 * std::sqrt(lambda_max / beta * std::log(1.0 / alpha)));
  cfg.M_init = m_init;
  cfg.M_sgd = m_sgd;
  return cfg;
}

Vector initialize(const std::vector<Observation>& observations, int d, double beta) {
  const int block = subset_size_for_beta(beta, d);
  if (observations.empty()) throw InsufficientStream("initialize: no observations");
  Vector w(d);
  const int blocks = (d + block - 1) / block;
  for (int b = 0; b < blocks; ++b) {
    const int s = b * block;
    const int t = std::min((b + 1) * block, d);
    Vector sum = Vector::Zero(t - s);
    long rows = 0;
    for (const Observation& obs : observations) {
      auto first = std::lower_bound(obs.seen.begin(), obs.seen.end(), s);
      if (obs.seen.end() - first < t - s || *first != s || first[t - s - 1] != t - 1) continue;
      const auto offset = static_cast<Eigen::Index>(first - obs.seen.begin());
      sum += obs.values.segment(offset, t - s);
      ++rows;
    }
    if (rows == 0) {
      std::ostringstream msg;
      msg << "block " << b << " (coordinates " << s << ".." << t - 1
          << ") is never fully observed; check the subset mass assumption";
      throw BlockStarved(msg.str());
    }
    w.segment(s, t - s) = sum / static_cast<double>(rows);
  }
  return w;
}

Vector available_case_mean(const std::vector<Observation>& observations, int d) {
  Vector sum = Vector::Zero(d);
  Eigen::VectorXd count = Eigen::VectorXd::Zero(d);
  for (const Observation& obs : observations) {
    for (std::size_t k = 0; k < obs.seen.size(); ++k) {
      sum(obs.seen[k]) += obs.values(static_cast<Eigen::Index>(k));
      count(obs.seen[k]) += 1.0;
    }
  }
  Vector out(d);
  for (int i = 0; i < d; ++i) out(i) = count(i) > 0 ? sum(i) / count(i) : std::nan("");
  return out;
}

Vector project_to_domain_chol(const Eigen::Ref<const Vector>& mu0, const Eigen::Ref<const Vector>& v,
                              double r_proj, const Matrix& sigma_chol) {
  const Vector delta = v - mu0;
  const double dist = mahalanobis_norm_chol(delta, sigma_chol);
  if (dist <= r_proj) return v;
  return mu0 + (r_proj / dist) * delta;
}

Vector project_to_domain(const Eigen::Ref<const Vector>& mu0, const Eigen::Ref<const Vector>& v,
                         double r_proj, const Matrix& sigma) {
  if (mu0.size() != v.size() || sigma.rows() != v.size()) {
    throw InvalidArgument("project_to_domain: dimension mismatch");
  }
  return project_to_domain_chol(mu0, v, r_proj, cholesky(sigma));
}

GradientSampler::GradientSampler(LinearThresholdModel model, Matrix sigma)
    : model_(std::move(model)), sigma_(std::move(sigma)) {
  if (sigma_.rows() != model_.dim() || sigma_.cols() != model_.dim()) {
    throw InvalidArgument("GradientSampler: covariance does not match model dimension");
  }
  sigma_chol_ = cholesky(sigma_);
}

double GradientSampler::default_radius(int hidden, double delta) {
  return std::sqrt(static_cast<double>(hidden)) + std::sqrt(2.0 * std::log(1.0 / delta));
}

const GradientSampler::Pattern& GradientSampler::pattern_for(const Observation& obs) {
  std::uint64_t key = 0;
  for (int i : obs.seen) key |= std::uint64_t{1} << i;
  if (auto it = cache_.find(key); it != cache_.end()) return it->second;

  const int d = dim();
  Pattern p;
  p.seen = obs.seen;
  p.hidden = complement(obs.seen, d);
  const int k = static_cast<int>(p.hidden.size());
  Matrix sigma_cond;
  if (p.seen.empty()) {
    p.gain = Matrix::Zero(k, 0);
    sigma_cond = sigma_;
  } else {
    const Matrix s_aa = select(sigma_, p.seen, p.seen);
    const Matrix s_ha = select(sigma_, p.hidden, p.seen);
    Matrix l_aa;
    try {
      l_aa = cholesky(s_aa);
    } catch (const NotPositiveDefinite& e) {
      throw SingularBlock(e.what());
    }
    const Matrix half = l_aa.triangularView<Eigen::Lower>().solve(s_ha.transpose());
    p.gain = l_aa.transpose().triangularView<Eigen::Upper>().solve(half).transpose();
    sigma_cond = select(sigma_, p.hidden, p.hidden) - p.gain * s_ha.transpose();
    sigma_cond = 0.5 * (sigma_cond + sigma_cond.transpose());
  }
  try {
    p.whitener = cholesky(sigma_cond, 0.0);
  } catch (const NotPositiveDefinite& e) {
    throw SingularBlock(e.what());
  }
  p.whitener_inv = p.whitener.triangularView<Eigen::Lower>().solve(Matrix::Identity(k, k));
  p.normals.resize(d, k);
  std::size_t a = 0;
  for (int i = 0; i < d; ++i) {
    const bool seen = a < p.seen.size() && p.seen[a] == i;
    if (seen) ++a;
    Eigen::RowVectorXd row(k);
    for (int h = 0; h < k; ++h) row(h) = model_.v()(i, p.hidden[static_cast<std::size_t>(h)]);
    row = row * p.whitener;
    p.normals.row(i) = seen ? row : Eigen::RowVectorXd(-row);
  }
  return cache_.emplace(key, std::move(p)).first->second;
}

GradientSample GradientSampler::sample(const Observation& obs, const Eigen::Ref<const Vector>& mu,
                                       double eta, double radius, int steps, int burn_in, Rng& rng,
                                       const Vector* witness) {
  const int d = dim();
  validate_observation(obs, d);
  if (mu.size() != d) throw InvalidArgument("sample_gradient: mu has wrong dimension");
  GradientSample out;
  if (obs.fully_observed(d)) {
    out.completion = obs.values;
    out.gradient = -sigma_chol_.transpose().triangularView<Eigen::Upper>().solve(
        sigma_chol_.triangularView<Eigen::Lower>().solve(obs.values - mu));
    return out;
  }
  const Pattern& p = pattern_for(obs);
  const int k = static_cast<int>(p.hidden.size());

  Vector mu_cond = select(mu, p.hidden);
  if (!p.seen.empty()) mu_cond += p.gain * (obs.values - select(mu, p.seen));
  const Vector center = p.whitener_inv * mu_cond;
  if (radius <= 0.0) radius = default_radius(k, 1e-6);

  std::vector<Halfspace> halfspaces(static_cast<std::size_t>(d));
  std::size_t a = 0;
  for (int i = 0; i < d; ++i) {
    const bool seen = a < p.seen.size() && p.seen[a] == i;
    if (seen) ++a;
    double offset = 0.0;
    for (std::size_t s = 0; s < p.seen.size(); ++s) {
      offset += model_.v()(i, p.seen[s]) * obs.values(static_cast<Eigen::Index>(s));
    }
    const double rhs = model_.b()(i) - offset;
    halfspaces[static_cast<std::size_t>(i)] = {p.normals.row(i).transpose(), seen ? rhs : -rhs, !seen};
  }
  // The ball must meet K; widen it by the distance from its center to K.
  PolytopeBallProjector polytope(halfspaces, center, kInf);
  if (polytope.empty_by_constant()) throw EmptyFeasible("observation pattern is inconsistent with the model");
  Vector nearest = center;
  if (!polytope.project(nearest).converged || polytope.violation(nearest) > 1e-6) {
    throw EmptyFeasible("pattern polytope has no feasible point");
  }
  out.effective_radius = radius + (nearest - center).norm();
  PolytopeBallProjector projector(halfspaces, center, out.effective_radius);

  Vector z = nearest;
  if (witness != nullptr) z = p.whitener_inv * select(*witness, p.hidden);
  if (!projector.project(z).converged || projector.violation(z) > 1e-6) {
    throw EmptyFeasible("no feasible starting point for the Langevin chain");
  }

  std::normal_distribution<double> normal;
  const double noise = std::sqrt(2.0 * eta);
  Vector zeta(k);
  Vector first_half = Vector::Zero(k);
  Vector second_half = Vector::Zero(k);
  const int window = steps - burn_in;
  const int split = burn_in + window / 2;
  for (int t = 0; t < steps; ++t) {
    for (int h = 0; h < k; ++h) zeta(h) = normal(rng);
    z = (1.0 - eta) * z + eta * center + noise * zeta;
    const auto status = boundary_ == LmcBoundary::Reflect ? projector.reflect(z) : projector.project(z);
    if (!status.converged) ++out.unsettled_projections;
    if (t >= burn_in) (t < split ? first_half : second_half) += z;
  }
  if (window >= 2) {
    const double a_count = static_cast<double>(split - burn_in);
    const double b_count = static_cast<double>(steps - split);
    // Half-window means of an OU chain differ by ~sqrt(4k / (eta * n)); flag beyond 4 of those.
    const double scale = std::sqrt(4.0 * k / (eta * std::min(a_count, b_count)));
    out.mixing_ok = (first_half / a_count - second_half / b_count).norm() <= 4.0 * scale;
  }

  const Vector hidden_values = p.whitener * z;
  out.completion = merge(obs, hidden_values, d);
  out.gradient = -sigma_chol_.transpose().triangularView<Eigen::Upper>().solve(
      sigma_chol_.triangularView<Eigen::Lower>().solve(out.completion - mu));
  return out;
}

GradientSample sample_gradient(const Observation& obs, const Eigen::Ref<const Vector>& mu,
                               const Matrix& sigma, const LinearThresholdModel& model, double eta_lmc,
                               double R_lmc, int M_grad, Rng& rng, int burn_in,
                               const Vector* witness) {
  GradientSampler sampler(model, sigma);
  return sampler.sample(obs, mu, eta_lmc, R_lmc, M_grad, burn_in, rng, witness);
}

IterateTrace missing_descent(const std::vector<Observation>& stream, const LinearThresholdModel& model,
                             const Matrix& sigma, const DescentConfig& cfg, Rng& rng,
                             const Matrix* complete) {
  const int d = model.dim();
  cfg.validate(d, sigma);
  const long needed = cfg.M_init + cfg.M_sgd;
  if (static_cast<long>(stream.size()) < needed) {
    std::ostringstream msg;
    msg << "stream has " << stream.size() << " observations, need " << needed;
    throw InsufficientStream(msg.str());
  }
  if (complete != nullptr && complete->rows() < needed) {
    throw InvalidArgument("missing_descent: complete rows do not cover the stream");
  }

  IterateTrace trace;
  const std::vector<Observation> init_rows(stream.begin(), stream.begin() + cfg.M_init);
  trace.mu0 = initialize(init_rows, d, cfg.beta);

  GradientSampler sampler(model, sigma);
  sampler.set_boundary(cfg.lmc_boundary);
  const Matrix chol = cholesky(sigma);
  trace.iterates.reserve(static_cast<std::size_t>(cfg.M_sgd));
  trace.etas.reserve(static_cast<std::size_t>(cfg.M_sgd));
  trace.grad_norms.reserve(static_cast<std::size_t>(cfg.M_sgd));
  trace.dist_to_mu0.reserve(static_cast<std::size_t>(cfg.M_sgd));

  Vector mu = trace.mu0;
  Vector sum = Vector::Zero(d);
  Vector witness;
  for (long i = 1; i <= cfg.M_sgd; ++i) {
    const long row = cfg.M_init + i - 1;
    const Observation& obs = stream[static_cast<std::size_t>(row)];
    const double eta = 1.0 / (cfg.lambda_sgd * static_cast<double>(i));
    const int chain = cfg.grad_growth == 0.0
                          ? cfg.M_grad
                          : static_cast<int>(std::ceil(cfg.M_grad * std::pow(static_cast<double>(i), cfg.grad_growth)));
    const Vector* seed_point = nullptr;
    if (complete != nullptr) {
      witness = complete->row(row).transpose();
      seed_point = &witness;
    }
    const GradientSample g = sampler.sample(obs, mu, cfg.eta_lmc, cfg.R_lmc, chain, cfg.lmc_burn_in,
                                            rng, seed_point);
    if (!g.mixing_ok) ++trace.nonmixing_warnings;
    trace.unsettled_projections += g.unsettled_projections;
    const Vector v = mu - eta * g.gradient;
    mu = project_to_domain_chol(trace.mu0, v, cfg.r_proj, chol);
    sum += mu;
    trace.iterates.push_back(mu);
    trace.etas.push_back(eta);
    trace.grad_norms.push_back(g.gradient.norm());
    trace.dist_to_mu0.push_back(mahalanobis_norm_chol(mu - trace.mu0, chol));
  }
  trace.mean = sum / static_cast<double>(cfg.M_sgd);
  return trace;
}

}  // namespace mnar
