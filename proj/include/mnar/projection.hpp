#pragma once

#include <vector>

#include "mnar/gaussian.hpp"
#include "mnar/missingness.hpp"

namespace mnar {

/// Dykstra's alternating projection onto {z : N z <= rhs} intersected with a
/// Euclidean ball. Increments are kept across sweeps in preallocated storage so
/// repeated calls (one per Langevin step) do not allocate.
class PolytopeBallProjector {
 public:
  struct Options {
    double move_tol = 1e-8;
    double feas_tol = 1e-6;
    int max_sweeps = 500;
  };

  struct Status {
    int sweeps = 0;
    bool converged = true;
  };

  /// Closed relaxation of `halfspaces` (strict faces tightened by kStrictSlack).
  /// A non-positive or infinite radius disables the ball. Zero normals are
  /// treated as constants; a violated constant makes the set empty.
  PolytopeBallProjector(const std::vector<Halfspace>& halfspaces, Vector center, double radius);
  PolytopeBallProjector(const std::vector<Halfspace>& halfspaces, Vector center, double radius,
                        Options options);

  int dim() const { return static_cast<int>(center_.size()); }
  bool empty_by_constant() const { return constant_violated_; }
  bool has_ball() const { return has_ball_; }
  const Vector& center() const { return center_; }
  double radius() const { return radius_; }

  /// Largest violation over all closed constraints (0 when feasible).
  double violation(const Eigen::Ref<const Vector>& z) const;

  /// Projects z in place.
  Status project(Vector& z);

  /// Mirrors z across violated faces (most violated first) until it is feasible.
  /// Falls back to `project` after `max_reflections`.
  Status reflect(Vector& z, int max_reflections = 32);

 private:
  Matrix normals_;  // m x k, unit rows
  Vector rhs_;
  Vector center_;
  double radius_ = 0.0;
  bool has_ball_ = false;
  bool constant_violated_ = false;
  Options options_;
  Matrix increments_;  // k x (m + 1)
  Vector scratch_;
  Vector previous_;
};

/// Euclidean projection onto the halfspaces intersected with ball(center, radius).
/// Throws NoConvergence when the sweep cap is reached, EmptyFeasible when a
/// constant constraint is violated.
Vector project_onto_L(const Eigen::Ref<const Vector>& point, const std::vector<Halfspace>& halfspaces,
                      const Eigen::Ref<const Vector>& center, double radius);

}  // namespace mnar
