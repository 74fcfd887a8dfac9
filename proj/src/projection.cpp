#include "mnar/projection.hpp"

#include <algorithm>
#include <cmath>

#include "mnar/errors.hpp"

namespace mnar {

PolytopeBallProjector::PolytopeBallProjector(const std::vector<Halfspace>& halfspaces, Vector center,
                                             double radius)
    : PolytopeBallProjector(halfspaces, std::move(center), radius, Options{}) {}

PolytopeBallProjector::PolytopeBallProjector(const std::vector<Halfspace>& halfspaces, Vector center,
                                             double radius, Options options)
    : center_(std::move(center)), radius_(radius), options_(options) {
  const Eigen::Index k = center_.size();
  has_ball_ = radius > 0.0 && std::isfinite(radius);
  std::vector<Eigen::Index> kept;
  for (std::size_t h = 0; h < halfspaces.size(); ++h) {
    const Halfspace& hs = halfspaces[h];
    if (hs.normal.size() != k) throw InvalidArgument("projector: halfspace dimension mismatch");
    const double norm = hs.normal.norm();
    if (norm == 0.0) {
      if (hs.strict ? !(0.0 < hs.rhs) : !(0.0 <= hs.rhs)) constant_violated_ = true;
      continue;
    }
    kept.push_back(static_cast<Eigen::Index>(h));
  }
  normals_.resize(static_cast<Eigen::Index>(kept.size()), k);
  rhs_.resize(static_cast<Eigen::Index>(kept.size()));
  for (std::size_t r = 0; r < kept.size(); ++r) {
    const Halfspace& hs = halfspaces[static_cast<std::size_t>(kept[r])];
    const double norm = hs.normal.norm();
    const double rhs = hs.strict ? hs.rhs - kStrictSlack : hs.rhs;
    normals_.row(static_cast<Eigen::Index>(r)) = hs.normal.transpose() / norm;
    rhs_(static_cast<Eigen::Index>(r)) = rhs / norm;
  }
  increments_.setZero(k, normals_.rows() + 1);
  scratch_.resize(k);
  previous_.resize(k);
}

double PolytopeBallProjector::violation(const Eigen::Ref<const Vector>& z) const {
  double worst = 0.0;
  for (Eigen::Index r = 0; r < normals_.rows(); ++r) {
    worst = std::max(worst, normals_.row(r).dot(z) - rhs_(r));
  }
  if (has_ball_) worst = std::max(worst, (z - center_).norm() - radius_);
  return worst;
}

PolytopeBallProjector::Status PolytopeBallProjector::project(Vector& z) {
  if (constant_violated_) throw EmptyFeasible("pattern constraints are inconsistent");
  Status status;
  if (violation(z) <= 0.0) return status;

  const Eigen::Index m = normals_.rows();
  increments_.setZero();
  for (int sweep = 1; sweep <= options_.max_sweeps; ++sweep) {
    previous_ = z;
    for (Eigen::Index r = 0; r <= m; ++r) {
      scratch_.noalias() = z + increments_.col(r);
      if (r < m) {
        const double excess = normals_.row(r).dot(scratch_) - rhs_(r);
        z = scratch_;
        if (excess > 0.0) z.noalias() -= excess * normals_.row(r).transpose();
      } else if (has_ball_) {
        const double dist = (scratch_ - center_).norm();
        z = scratch_;
        if (dist > radius_) z = center_ + (radius_ / dist) * (scratch_ - center_);
      } else {
        z = scratch_;
      }
      increments_.col(r).noalias() = scratch_ - z;
    }
    status.sweeps = sweep;
    if ((z - previous_).norm() <= options_.move_tol && violation(z) <= options_.feas_tol) {
      return status;
    }
  }
  status.converged = false;
  return status;
}

PolytopeBallProjector::Status PolytopeBallProjector::reflect(Vector& z, int max_reflections) {
  if (constant_violated_) throw EmptyFeasible("pattern constraints are inconsistent");
  for (int k = 0; k < max_reflections; ++k) {
    Eigen::Index worst_row = -1;
    double worst = 0.0;
    for (Eigen::Index r = 0; r < normals_.rows(); ++r) {
      const double excess = normals_.row(r).dot(z) - rhs_(r);
      if (excess > worst) worst = excess, worst_row = r;
    }
    double ball_excess = 0.0;
    double dist = 0.0;
    if (has_ball_) {
      dist = (z - center_).norm();
      ball_excess = dist - radius_;
    }
    if (worst <= 0.0 && ball_excess <= 0.0) return {};
    if (ball_excess > worst) {
      z = center_ + (std::max(0.0, radius_ - ball_excess) / dist) * (z - center_);
    } else {
      z.noalias() -= 2.0 * worst * normals_.row(worst_row).transpose();
    }
  }
  return project(z);
}

Vector project_onto_L(const Eigen::Ref<const Vector>& point, const std::vector<Halfspace>& halfspaces,
                      const Eigen::Ref<const Vector>& center, double radius) {
  PolytopeBallProjector projector(halfspaces, center, radius);
  Vector z = point;
  const auto status = projector.project(z);
  if (!status.converged) {
    throw NoConvergence("Dykstra projection did not settle within the sweep cap");
  }
  return z;
}

}  // namespace mnar
