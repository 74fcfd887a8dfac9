#pragma once

#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mnar/gaussian.hpp"

namespace mnar {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Closed interval [lo, hi]; infinite endpoints allowed.
struct Interval {
  double lo = -kInf;
  double hi = kInf;
};

/// Sorted union of disjoint closed intervals.
class IntervalUnion {
 public:
  IntervalUnion() = default;
  explicit IntervalUnion(std::vector<Interval> parts);

  static IntervalUnion real_line() { return IntervalUnion({Interval{}}); }
  static IntervalUnion at_least(double lo) { return IntervalUnion({Interval{lo, kInf}}); }
  static IntervalUnion at_most(double hi) { return IntervalUnion({Interval{-kInf, hi}}); }

  bool contains(double x) const;
  bool is_real_line() const;
  const std::vector<Interval>& parts() const { return parts_; }

  IntervalUnion shifted(double c) const;

  /// Exact probability mass under N(mean, sd^2).
  double normal_mass(double mean, double sd) const;

  friend bool operator==(const IntervalUnion&, const IntervalUnion&) = default;

 private:
  std::vector<Interval> parts_;
};

/// Coordinate i is seen iff y_i lies in sets[i].
struct SelfCensoringModel {
  std::vector<IntervalUnion> sets;

  int dim() const { return static_cast<int>(sets.size()); }
  static SelfCensoringModel uncensored(int d);
};

/// Coordinate i is seen iff v_i^T y <= b_i (ties count as seen).
/// Zero rows are permitted only with b_i >= 0, meaning "always seen".
class LinearThresholdModel {
 public:
  LinearThresholdModel(Matrix v, Vector b);

  int dim() const { return static_cast<int>(b_.size()); }
  const Matrix& v() const { return v_; }
  const Vector& b() const { return b_; }
  bool observes(int i, const Eigen::Ref<const Vector>& y) const;

 private:
  Matrix v_;
  Vector b_;
};

using MissingnessModel = std::variant<SelfCensoringModel, LinearThresholdModel>;

int model_dim(const MissingnessModel& model);
std::string model_kind(const MissingnessModel& model);

/// (A, x): seen coordinates and their values.
struct Observation {
  CoordSet seen;
  Vector values;

  bool fully_observed(int d) const { return static_cast<int>(seen.size()) == d; }
  bool sees(int i) const;
  /// Value of coordinate i; requires sees(i).
  double value_of(int i) const;

  friend bool operator==(const Observation& a, const Observation& b) {
    return a.seen == b.seen && a.values == b.values;
  }
};

/// Throws InvalidArgument unless seen is strictly increasing and sizes agree.
void validate_observation(const Observation& obs, int d);

CoordSet observed_pattern(const MissingnessModel& model, const Eigen::Ref<const Vector>& y);
Observation apply_missingness(const MissingnessModel& model, const Eigen::Ref<const Vector>& y);

/// n censored draws. When `complete` is non-null it receives the underlying
/// n x d rows (simulation ground truth).
std::vector<Observation> generate_observations(const GaussianParams& params,
                                               const MissingnessModel& model, int n, Rng& rng,
                                               Matrix* complete = nullptr);

/// min over pairs i<j of Pr[y_i in S_i and y_j in S_j].
McEstimate audit_alpha_pair(const GaussianParams& params, const SelfCensoringModel& model, int mc,
                            Rng& rng);

struct SubsetAudit {
  double alpha = 1.0;
  double std_error = 0.0;
  int subset_size = 0;
  long subsets_evaluated = 0;
  bool exhaustive = true;
  CoordSet worst_subset;
};

/// Subset size for fraction beta; throws InvalidBeta unless beta*d is a positive integer <= d.
int subset_size_for_beta(double beta, int d);

/// min over subsets |A| = beta*d of Pr[A subset of S(y)]. Exhaustive when
/// C(d, beta*d) <= 1e4, otherwise 1e3 random subsets.
SubsetAudit audit_alpha_subset(const GaussianParams& params, const MissingnessModel& model,
                               double beta, int mc, Rng& rng);

struct AnchorAudit {
  double gamma = 1.0;
  double bin_width = 0.0;
  long cells = 0;
  long bins_used = 0;
  long bins_skipped = 0;
  int mc_samples = 0;
};

/// Binned estimate of the gamma-anchoring constant of `anchor`. Throws
/// AnchorViolated if any draw leaves an anchor coordinate unseen.
AnchorAudit audit_anchoring(const GaussianParams& params, const LinearThresholdModel& model,
                            const CoordSet& anchor, int mc, Rng& rng, long min_bin_count = 50);

struct AssumptionReport {
  std::optional<McEstimate> alpha_pair;
  std::optional<SubsetAudit> alpha_subset;
  double beta = 0.0;
  std::optional<AnchorAudit> anchoring;
  int mc_samples = 0;
};

/// Constraint n^T z <= rhs (strict: n^T z < rhs) on the hidden coordinates.
struct Halfspace {
  Vector normal;
  double rhs = 0.0;
  bool strict = false;
};

inline constexpr double kStrictSlack = 1e-9;

/// Completions z of the hidden coordinates that reproduce a given pattern.
class ConstraintSet {
 public:
  ConstraintSet(int dim, std::vector<Halfspace> halfspaces);

  int dim() const { return dim_; }
  const std::vector<Halfspace>& halfspaces() const { return halfspaces_; }

  /// Exact membership, strict faces strict.
  bool contains(const Eigen::Ref<const Vector>& z) const;
  /// Closed relaxation: strict faces tightened by kStrictSlack, violations up to tol allowed.
  bool closed_contains(const Eigen::Ref<const Vector>& z, double tol = 0.0) const;

  /// Image under z = W z': normals become W^T n.
  ConstraintSet pulled_back(const Matrix& w) const;

  /// Euclidean projection onto the closed relaxation.
  Vector project(const Eigen::Ref<const Vector>& z) const;

 private:
  int dim_;
  std::vector<Halfspace> halfspaces_;
};

/// The pattern polytope K for observation (A, x) under a linear-threshold model.
ConstraintSet membership_polytope(const LinearThresholdModel& model, const Observation& obs);

/// Embed x on `seen` and z on the complement into a full d-vector.
Vector merge(const Observation& obs, const Eigen::Ref<const Vector>& hidden, int d);

}  // namespace mnar
