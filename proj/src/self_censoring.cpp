#include "mnar/self_censoring.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <sstream>
#include <thread>

#include "mnar/errors.hpp"

namespace mnar {

namespace {

struct Task {
  int i;
  int j;  // j == i for a coordinate fit
};

void run_tasks(std::size_t count, int threads, const std::function<void(std::size_t)>& work) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < count; k = next++) {
      try {
        work(k);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const int n = std::max(1, std::min<int>(threads, static_cast<int>(count)));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
  }
  // lowest-index failure wins so the reported error does not depend on scheduling
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

Matrix project_psd(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (m + m.transpose()));
  const Vector clipped = eig.eigenvalues().cwiseMax(0.0);
  Matrix out = eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

SelfCensorEstimate fit_self_censoring(const std::vector<Observation>& observations,
                                      const SelfCensoringModel& model, const SelfCensorConfig& cfg) {
  const int d = model.dim();
  if (d < 1) throw InvalidArgument("fit_self_censoring: empty model");
  for (const Observation& obs : observations) validate_observation(obs, d);

  long budget = 0;
  if (cfg.epsilon > 0.0) {
    if (!(cfg.alpha > 0.0)) throw InvalidArgument("fit_self_censoring: epsilon budget needs alpha > 0");
    const double eps_sub = cfg.eps_scale * cfg.epsilon / d;
    budget = static_cast<long>(std::ceil(1.0 / (cfg.alpha * eps_sub * eps_sub)));
  }

  std::vector<Task> tasks;
  for (int i = 0; i < d; ++i) tasks.push_back({i, i});
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) tasks.push_back({i, j});

  // Route rows: a row feeds (i, j) iff both coordinates are seen.
  std::vector<std::vector<std::size_t>> rows(tasks.size());
  for (std::size_t r = 0; r < observations.size(); ++r) {
    const Observation& obs = observations[r];
    std::vector<char> seen(static_cast<std::size_t>(d), 0);
    for (int i : obs.seen) seen[static_cast<std::size_t>(i)] = 1;
    for (std::size_t t = 0; t < tasks.size(); ++t) {
      if (seen[static_cast<std::size_t>(tasks[t].i)] && seen[static_cast<std::size_t>(tasks[t].j)]) {
        if (budget == 0 || static_cast<long>(rows[t].size()) < budget) rows[t].push_back(r);
      }
    }
  }
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    if (static_cast<long>(rows[t].size()) < cfg.min_samples) {
      std::ostringstream msg;
      msg << "pair (" << tasks[t].i << "," << tasks[t].j << ") has " << rows[t].size()
          << " jointly observed rows, need " << cfg.min_samples
          << "; increase n or check the pairwise mass assumption";
      throw PairStarved(msg.str());
    }
  }

  std::vector<SubproblemDiagnostics> results(tasks.size());
  run_tasks(tasks.size(), cfg.threads, [&](std::size_t t) {
    const Task task = tasks[t];
    const bool pair = task.i != task.j;
    const int dim = pair ? 2 : 1;
    Matrix samples(static_cast<Eigen::Index>(rows[t].size()), dim);
    for (std::size_t k = 0; k < rows[t].size(); ++k) {
      const Observation& obs = observations[rows[t][k]];
      samples(static_cast<Eigen::Index>(k), 0) = obs.value_of(task.i);
      if (pair) samples(static_cast<Eigen::Index>(k), 1) = obs.value_of(task.j);
    }
    std::vector<IntervalUnion> factors{model.sets[static_cast<std::size_t>(task.i)]};
    if (pair) factors.push_back(model.sets[static_cast<std::size_t>(task.j)]);
    Rng rng = make_stream(cfg.seed, {pair ? 1u : 0u, static_cast<std::uint64_t>(task.i),
                                     static_cast<std::uint64_t>(task.j)});
    TruncatedFitConfig fit_cfg = cfg.fit;
    fit_cfg.min_samples = std::min(fit_cfg.min_samples, cfg.min_samples);
    const TruncatedEstimate fit = truncated_fit(samples, TruncationSet(std::move(factors)), fit_cfg, rng);
    results[t] = {static_cast<long>(rows[t].size()), fit.iterations, fit.mean, fit.cov};
  });

  SelfCensorEstimate est;
  est.mean.resize(d);
  est.cov.setZero(d, d);
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const Task task = tasks[t];
    if (task.i == task.j) {
      est.mean(task.i) = results[t].fit_mean(0);
      est.cov(task.i, task.i) = results[t].fit_cov(0, 0);
      est.per_coordinate.push_back(results[t]);
    } else {
      const double off = results[t].fit_cov(0, 1);
      est.cov(task.i, task.j) = off;
      est.cov(task.j, task.i) = off;
      est.per_pair.emplace(std::make_pair(task.i, task.j), results[t]);
    }
  }
  if (cfg.psd_projection) {
    est.cov = project_psd(est.cov);
    est.psd_projected = true;
  }
  return est;
}

EstimateMetrics evaluate_estimate(const GaussianParams& truth, const Vector& mean, const Matrix& cov,
                                  int tv_samples, Rng& rng) {
  const int d = truth.dim();
  if (mean.size() != d || cov.rows() != d || cov.cols() != d) {
    throw InvalidArgument("evaluate_estimate: dimension mismatch");
  }
  EstimateMetrics out;
  const Vector diff = truth.mean() - mean;
  out.mean_mahalanobis = mahalanobis_norm_chol(diff, truth.chol());
  const Matrix root_inv = inverse_sqrt_spd(truth.cov());
  out.cov_whitened_frobenius = (Matrix::Identity(d, d) - root_inv * cov * root_inv).norm();
  out.mean_l2 = diff.norm();
  out.cov_frobenius = (truth.cov() - cov).norm();
  if (tv_samples > 1) {
    try {
      const GaussianParams q(mean, 0.5 * (cov + cov.transpose()));
      out.tv = tv_distance_mc(truth, q, tv_samples, rng);
    } catch (const NotPositiveDefinite&) {
      out.tv.reset();
    }
  }
  return out;
}

}  // namespace mnar
