#include "mnar/missingness.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "mnar/errors.hpp"
#include "mnar/projection.hpp"

namespace mnar {

namespace {

double normal_cdf(double z) {
  if (z == kInf) return 1.0;
  if (z == -kInf) return 0.0;
  return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

double binomial(int n, int k) {
  double out = 1.0;
  for (int i = 1; i <= k; ++i) out = out * (n - k + i) / i;
  return out;
}

McEstimate proportion(long hits, int n) {
  const double p = static_cast<double>(hits) / n;
  return {p, std::sqrt(p * (1.0 - p) / n)};
}

}  // namespace

IntervalUnion::IntervalUnion(std::vector<Interval> parts) : parts_(std::move(parts)) {
  for (std::size_t k = 0; k < parts_.size(); ++k) {
    const Interval& iv = parts_[k];
    if (std::isnan(iv.lo) || std::isnan(iv.hi) || iv.lo > iv.hi) {
      throw InvalidArgument("IntervalUnion: interval endpoints out of order");
    }
    if (k > 0 && !(parts_[k - 1].hi < iv.lo)) {
      throw InvalidArgument("IntervalUnion: intervals must be sorted and disjoint");
    }
  }
}

bool IntervalUnion::contains(double x) const {
  // upper_bound on lo, then check the candidate below it
  auto it = std::upper_bound(parts_.begin(), parts_.end(), x,
                             [](double v, const Interval& iv) { return v < iv.lo; });
  if (it == parts_.begin()) return false;
  --it;
  return x <= it->hi;
}

bool IntervalUnion::is_real_line() const {
  return parts_.size() == 1 && parts_[0].lo == -kInf && parts_[0].hi == kInf;
}

IntervalUnion IntervalUnion::shifted(double c) const {
  std::vector<Interval> out = parts_;
  for (Interval& iv : out) {
    iv.lo += c;
    iv.hi += c;
  }
  return IntervalUnion(std::move(out));
}

double IntervalUnion::normal_mass(double mean, double sd) const {
  double mass = 0.0;
  for (const Interval& iv : parts_) {
    mass += normal_cdf((iv.hi - mean) / sd) - normal_cdf((iv.lo - mean) / sd);
  }
  return mass;
}

SelfCensoringModel SelfCensoringModel::uncensored(int d) {
  return SelfCensoringModel{std::vector<IntervalUnion>(static_cast<std::size_t>(d),
                                                       IntervalUnion::real_line())};
}

LinearThresholdModel::LinearThresholdModel(Matrix v, Vector b) : v_(std::move(v)), b_(std::move(b)) {
  const Eigen::Index d = b_.size();
  if (d == 0 || v_.rows() != d || v_.cols() != d) {
    throw InvalidArgument("LinearThresholdModel: v must be d x d and b of length d");
  }
  if (!v_.allFinite() || !b_.allFinite()) {
    throw InvalidArgument("LinearThresholdModel: entries must be finite");
  }
  for (Eigen::Index i = 0; i < d; ++i) {
    if (v_.row(i).norm() == 0.0 && b_(i) < 0.0) {
      std::ostringstream msg;
      msg << "row " << i << " is zero with negative offset (coordinate never seen)";
      throw InvalidArgument("LinearThresholdModel: " + msg.str());
    }
  }
}

bool LinearThresholdModel::observes(int i, const Eigen::Ref<const Vector>& y) const {
  return v_.row(i).dot(y) <= b_(i);
}

int model_dim(const MissingnessModel& model) {
  return std::visit([](const auto& m) { return m.dim(); }, model);
}

std::string model_kind(const MissingnessModel& model) {
  return std::holds_alternative<SelfCensoringModel>(model) ? "self_censoring" : "linear_threshold";
}

bool Observation::sees(int i) const { return std::binary_search(seen.begin(), seen.end(), i); }

double Observation::value_of(int i) const {
  auto it = std::lower_bound(seen.begin(), seen.end(), i);
  if (it == seen.end() || *it != i) throw InvalidArgument("Observation: coordinate not seen");
  return values(static_cast<Eigen::Index>(it - seen.begin()));
}

void validate_observation(const Observation& obs, int d) {
  if (obs.values.size() != static_cast<Eigen::Index>(obs.seen.size())) {
    throw InvalidArgument("Observation: value count does not match seen set");
  }
  for (std::size_t k = 0; k < obs.seen.size(); ++k) {
    if (obs.seen[k] < 0 || obs.seen[k] >= d || (k > 0 && obs.seen[k] <= obs.seen[k - 1])) {
      throw InvalidArgument("Observation: seen set must be strictly increasing in [0, d)");
    }
  }
}

CoordSet observed_pattern(const MissingnessModel& model, const Eigen::Ref<const Vector>& y) {
  const int d = model_dim(model);
  if (y.size() != d) throw InvalidArgument("apply_missingness: dimension mismatch");
  CoordSet seen;
  seen.reserve(static_cast<std::size_t>(d));
  if (const auto* sc = std::get_if<SelfCensoringModel>(&model)) {
    for (int i = 0; i < d; ++i) {
      if (sc->sets[static_cast<std::size_t>(i)].contains(y(i))) seen.push_back(i);
    }
  } else {
    const auto& lt = std::get<LinearThresholdModel>(model);
    for (int i = 0; i < d; ++i) {
      if (lt.observes(i, y)) seen.push_back(i);
    }
  }
  return seen;
}

Observation apply_missingness(const MissingnessModel& model, const Eigen::Ref<const Vector>& y) {
  Observation obs;
  obs.seen = observed_pattern(model, y);
  obs.values = select(y, obs.seen);
  return obs;
}

std::vector<Observation> generate_observations(const GaussianParams& params,
                                               const MissingnessModel& model, int n, Rng& rng,
                                               Matrix* complete) {
  if (n < 1) throw InvalidArgument("generate_observations: n must be positive");
  if (model_dim(model) != params.dim()) {
    throw InvalidArgument("generate_observations: model and parameters differ in dimension");
  }
  const Matrix ys = sample_gaussian(params, n, rng);
  std::vector<Observation> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int r = 0; r < n; ++r) out.push_back(apply_missingness(model, ys.row(r).transpose()));
  if (complete != nullptr) *complete = ys;
  return out;
}

McEstimate audit_alpha_pair(const GaussianParams& params, const SelfCensoringModel& model, int mc,
                            Rng& rng) {
  const int d = model.dim();
  if (d != params.dim()) throw InvalidArgument("audit_alpha_pair: dimension mismatch");
  if (mc < 1) throw InvalidArgument("audit_alpha_pair: mc must be positive");
  if (d < 2) return {1.0, 0.0};
  const Matrix ys = sample_gaussian(params, mc, rng);
  Eigen::MatrixXi hits = Eigen::MatrixXi::Zero(d, d);
  std::vector<char> in(static_cast<std::size_t>(d));
  for (int r = 0; r < mc; ++r) {
    for (int i = 0; i < d; ++i) in[static_cast<std::size_t>(i)] = model.sets[static_cast<std::size_t>(i)].contains(ys(r, i));
    for (int i = 0; i < d; ++i) {
      if (!in[static_cast<std::size_t>(i)]) continue;
      for (int j = i + 1; j < d; ++j) hits(i, j) += in[static_cast<std::size_t>(j)];
    }
  }
  long worst = mc;
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) worst = std::min<long>(worst, hits(i, j));
  return proportion(worst, mc);
}

int subset_size_for_beta(double beta, int d) {
  const double k = beta * d;
  const double rounded = std::round(k);
  if (!(beta > 0.0) || std::abs(k - rounded) > 1e-9 || rounded < 1.0 || rounded > d) {
    std::ostringstream msg;
    msg << "beta*d = " << k << " is not a positive integer at most d=" << d;
    throw InvalidBeta(msg.str());
  }
  return static_cast<int>(rounded);
}

SubsetAudit audit_alpha_subset(const GaussianParams& params, const MissingnessModel& model,
                               double beta, int mc, Rng& rng) {
  const int d = params.dim();
  if (model_dim(model) != d) throw InvalidArgument("audit_alpha_subset: dimension mismatch");
  if (mc < 1) throw InvalidArgument("audit_alpha_subset: mc must be positive");
  SubsetAudit out;
  out.subset_size = subset_size_for_beta(beta, d);
  const int k = out.subset_size;

  std::vector<CoordSet> subsets;
  if (binomial(d, k) <= 1e4) {
    CoordSet pick(static_cast<std::size_t>(k));
    std::iota(pick.begin(), pick.end(), 0);
    while (true) {
      subsets.push_back(pick);
      int pos = k - 1;
      while (pos >= 0 && pick[static_cast<std::size_t>(pos)] == d - k + pos) --pos;
      if (pos < 0) break;
      ++pick[static_cast<std::size_t>(pos)];
      for (int q = pos + 1; q < k; ++q) pick[static_cast<std::size_t>(q)] = pick[static_cast<std::size_t>(q - 1)] + 1;
    }
  } else {
    out.exhaustive = false;
    CoordSet all(static_cast<std::size_t>(d));
    std::iota(all.begin(), all.end(), 0);
    for (int s = 0; s < 1000; ++s) {
      std::shuffle(all.begin(), all.end(), rng);
      CoordSet pick(all.begin(), all.begin() + k);
      std::sort(pick.begin(), pick.end());
      subsets.push_back(std::move(pick));
    }
  }
  out.subsets_evaluated = static_cast<long>(subsets.size());

  const Matrix ys = sample_gaussian(params, mc, rng);
  std::vector<long> hits(subsets.size(), 0);
  std::vector<char> seen(static_cast<std::size_t>(d));
  for (int r = 0; r < mc; ++r) {
    std::fill(seen.begin(), seen.end(), 0);
    for (int i : observed_pattern(model, ys.row(r).transpose())) seen[static_cast<std::size_t>(i)] = 1;
    for (std::size_t s = 0; s < subsets.size(); ++s) {
      bool all_seen = true;
      for (int i : subsets[s]) all_seen = all_seen && seen[static_cast<std::size_t>(i)];
      hits[s] += all_seen;
    }
  }
  const auto worst = std::min_element(hits.begin(), hits.end());
  out.worst_subset = subsets[static_cast<std::size_t>(worst - hits.begin())];
  const McEstimate est = proportion(*worst, mc);
  out.alpha = est.value;
  out.std_error = est.std_error;
  return out;
}

AnchorAudit audit_anchoring(const GaussianParams& params, const LinearThresholdModel& model,
                            const CoordSet& anchor, int mc, Rng& rng, long min_bin_count) {
  const int d = params.dim();
  if (model.dim() != d) throw InvalidArgument("audit_anchoring: dimension mismatch");
  if (anchor.empty()) throw InvalidArgument("audit_anchoring: anchor set is empty");
  if (mc < 1) throw InvalidArgument("audit_anchoring: mc must be positive");
  for (int c : anchor) {
    if (c < 0 || c >= d) throw InvalidArgument("audit_anchoring: anchor index out of range");
  }
  AnchorAudit out;
  out.mc_samples = mc;
  out.bin_width = 0.25 * std::sqrt(params.lambda_max());

  const MissingnessModel wrapped = model;
  const Matrix ys = sample_gaussian(params, mc, rng);
  // bin key -> (pattern bitmask -> count)
  std::map<std::vector<long>, std::map<std::vector<int>, long>> bins;
  for (int r = 0; r < mc; ++r) {
    const Vector y = ys.row(r).transpose();
    CoordSet pattern = observed_pattern(wrapped, y);
    for (int c : anchor) {
      if (!std::binary_search(pattern.begin(), pattern.end(), c)) {
        std::ostringstream msg;
        msg << "anchor coordinate " << c << " unseen on draw " << r;
        throw AnchorViolated(msg.str());
      }
    }
    std::vector<long> key;
    key.reserve(anchor.size());
    for (int c : anchor) key.push_back(static_cast<long>(std::floor(y(c) / out.bin_width)));
    ++bins[key][pattern];
  }
  double gamma = 1.0;
  for (const auto& [key, patterns] : bins) {
    long total = 0;
    for (const auto& [pattern, count] : patterns) total += count;
    if (total < min_bin_count) {
      ++out.bins_skipped;
      continue;
    }
    ++out.bins_used;
    for (const auto& [pattern, count] : patterns) {
      ++out.cells;
      gamma = std::min(gamma, static_cast<double>(count) / static_cast<double>(total));
    }
  }
  out.gamma = gamma;
  return out;
}

ConstraintSet::ConstraintSet(int dim, std::vector<Halfspace> halfspaces)
    : dim_(dim), halfspaces_(std::move(halfspaces)) {
  for (const Halfspace& h : halfspaces_) {
    if (h.normal.size() != dim_) throw InvalidArgument("ConstraintSet: halfspace dimension mismatch");
  }
}

bool ConstraintSet::contains(const Eigen::Ref<const Vector>& z) const {
  if (z.size() != dim_) throw InvalidArgument("ConstraintSet: point dimension mismatch");
  for (const Halfspace& h : halfspaces_) {
    const double lhs = dim_ == 0 ? 0.0 : h.normal.dot(z);
    if (h.strict ? !(lhs < h.rhs) : !(lhs <= h.rhs)) return false;
  }
  return true;
}

bool ConstraintSet::closed_contains(const Eigen::Ref<const Vector>& z, double tol) const {
  if (z.size() != dim_) throw InvalidArgument("ConstraintSet: point dimension mismatch");
  for (const Halfspace& h : halfspaces_) {
    const double lhs = dim_ == 0 ? 0.0 : h.normal.dot(z);
    const double rhs = h.strict ? h.rhs - kStrictSlack : h.rhs;
    if (lhs > rhs + tol) return false;
  }
  return true;
}

ConstraintSet ConstraintSet::pulled_back(const Matrix& w) const {
  if (w.rows() != dim_ || w.cols() != dim_) throw InvalidArgument("ConstraintSet: bad map shape");
  std::vector<Halfspace> out = halfspaces_;
  for (Halfspace& h : out) h.normal = w.transpose() * h.normal;
  return ConstraintSet(dim_, std::move(out));
}

Vector ConstraintSet::project(const Eigen::Ref<const Vector>& z) const {
  return project_onto_L(z, halfspaces_, Vector::Zero(dim_), kInf);
}

ConstraintSet membership_polytope(const LinearThresholdModel& model, const Observation& obs) {
  const int d = model.dim();
  validate_observation(obs, d);
  const CoordSet hidden = complement(obs.seen, d);
  const int k = static_cast<int>(hidden.size());
  std::vector<Halfspace> halfspaces;
  halfspaces.reserve(static_cast<std::size_t>(d));
  std::size_t a = 0;
  for (int i = 0; i < d; ++i) {
    const bool seen = a < obs.seen.size() && obs.seen[a] == i;
    if (seen) ++a;
    Vector normal(k);
    for (int h = 0; h < k; ++h) normal(h) = model.v()(i, hidden[static_cast<std::size_t>(h)]);
    double offset = 0.0;
    for (std::size_t s = 0; s < obs.seen.size(); ++s) offset += model.v()(i, obs.seen[s]) * obs.values(static_cast<Eigen::Index>(s));
    const double rhs = model.b()(i) - offset;
    if (seen) {
      halfspaces.push_back({std::move(normal), rhs, false});
    } else {
      halfspaces.push_back({-normal, -rhs, true});
    }
  }
  return ConstraintSet(k, std::move(halfspaces));
}

Vector merge(const Observation& obs, const Eigen::Ref<const Vector>& hidden, int d) {
  Vector y(d);
  std::size_t a = 0;
  Eigen::Index h = 0;
  for (int i = 0; i < d; ++i) {
    if (a < obs.seen.size() && obs.seen[a] == i) {
      y(i) = obs.values(static_cast<Eigen::Index>(a++));
    } else {
      if (h >= hidden.size()) throw InvalidArgument("merge: too few hidden values");
      y(i) = hidden(h++);
    }
  }
  if (h != hidden.size()) throw InvalidArgument("merge: too many hidden values");
  return y;
}

}  // namespace mnar
