#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "mnar/errors.hpp"
#include "mnar/missingness.hpp"
#include "oracles.hpp"

using namespace mnar;

namespace {

LinearThresholdModel max_observation_model() {
  Matrix v(2, 2);
  v << -1, 1, 1, -1;
  return LinearThresholdModel(v, Vector::Zero(2));
}

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index k = 0;
  for (double x : xs) v(k++) = x;
  return v;
}

}  // namespace

TEST_CASE("interval unions validate and test membership") {
  CHECK_THROWS_AS(IntervalUnion({{0, 2}, {1, 3}}), InvalidArgument);
  CHECK_THROWS_AS(IntervalUnion({{2, 3}, {0, 1}}), InvalidArgument);
  CHECK_THROWS_AS(IntervalUnion({{1, 0}}), InvalidArgument);
  const IntervalUnion u({{-kInf, -1}, {0, 1}, {4, kInf}});
  CHECK(u.contains(-5));
  CHECK(u.contains(-1));
  CHECK_FALSE(u.contains(-0.5));
  CHECK(u.contains(1));
  CHECK_FALSE(u.contains(2));
  CHECK(u.contains(1e300));
  CHECK(IntervalUnion::at_least(0).normal_mass(0, 1) == doctest::Approx(0.5));
}

TEST_CASE("applying missingness") {
  SUBCASE("nothing censored") {
    const auto m = SelfCensoringModel::uncensored(3);
    const Observation o = apply_missingness(m, vec({1, 2, 3}));
    CHECK(o.seen == CoordSet{0, 1, 2});
    CHECK(o.values == vec({1, 2, 3}));
  }
  SUBCASE("unit interval sets") {
    SelfCensoringModel m{{IntervalUnion({{0, 1}}), IntervalUnion({{0, 1}})}};
    const Observation o = apply_missingness(m, vec({0.5, 2}));
    CHECK(o.seen == CoordSet{0});
    CHECK(o.values == vec({0.5}));
  }
  SUBCASE("only the maximum of two coordinates is seen") {
    const Observation o = apply_missingness(max_observation_model(), vec({3, 1}));
    CHECK(o.seen == CoordSet{0});
    CHECK(o.values == vec({3}));
  }
  SUBCASE("ties count as seen") {
    const Observation o = apply_missingness(max_observation_model(), vec({2, 2}));
    CHECK(o.seen == CoordSet{0, 1});
  }
}

TEST_CASE("linear threshold rows") {
  Matrix v = Matrix::Zero(2, 2);
  CHECK_NOTHROW(LinearThresholdModel(v, Vector::Zero(2)));
  CHECK_THROWS_AS(LinearThresholdModel(v, vec({-1, 0})), InvalidArgument);
}

TEST_CASE("generated observations") {
  const GaussianParams p(Vector::Zero(1), Matrix::Identity(1, 1));
  SelfCensoringModel m{{IntervalUnion::at_least(0)}};
  Rng a = make_stream(1);
  Rng b = make_stream(1);
  const auto oa = generate_observations(p, m, 100'000, a);
  const auto ob = generate_observations(p, m, 100'000, b);
  CHECK(oa == ob);
  long seen = 0;
  for (const Observation& o : oa) seen += o.seen.size();
  CHECK(static_cast<double>(seen) / oa.size() == doctest::Approx(0.5).epsilon(0.02));

  Rng c = make_stream(2);
  const GaussianParams p3(Vector::Zero(3), Matrix::Identity(3, 3));
  for (const Observation& o : generate_observations(p3, SelfCensoringModel::uncensored(3), 500, c)) {
    CHECK(o.fully_observed(3));
  }
}

TEST_CASE("missingness is a pure function of the sample") {
  Rng rng = make_stream(3);
  const GaussianParams p(Vector::Zero(3), Matrix::Identity(3, 3));
  SelfCensoringModel sc{{IntervalUnion::at_least(-0.5), IntervalUnion({{-1, 0}, {1, 2}}), IntervalUnion::at_most(0.3)}};
  Matrix v(3, 3);
  v << 1, 0.5, 0, -1, 1, 0.2, 0, 0, 0;
  const LinearThresholdModel lt(v, vec({0.1, 0, 0}));
  Vector y(3);
  std::normal_distribution<double> n01;
  for (int k = 0; k < 1000; ++k) {
    sample_gaussian_into(p, rng, y);
    CHECK(apply_missingness(sc, y) == apply_missingness(sc, y));
    CHECK(apply_missingness(lt, y) == apply_missingness(lt, y));
    // flipping another coordinate never changes self-censored membership
    for (int i = 0; i < 3; ++i) {
      Vector z = y;
      z((i + 1) % 3) = n01(rng);
      CHECK(apply_missingness(sc, y).sees(i) == apply_missingness(sc, z).sees(i));
    }
  }
}

TEST_CASE("linear threshold observations satisfy their seen rows") {
  Rng rng = make_stream(4);
  Matrix v(3, 3);
  v << 1, 0.5, 0, -1, 1, 0.2, 0.3, -0.4, 1;
  const LinearThresholdModel lt(v, vec({0.1, 0, -0.2}));
  const GaussianParams p(Vector::Zero(3), Matrix::Identity(3, 3));
  Matrix complete;
  const auto obs = generate_observations(p, lt, 1000, rng, &complete);
  for (std::size_t r = 0; r < obs.size(); ++r) {
    const Vector y = complete.row(static_cast<Eigen::Index>(r)).transpose();
    for (int i = 0; i < 3; ++i) {
      const bool below = v.row(i).dot(y) <= lt.b()(i);
      CHECK(obs[r].sees(i) == below);
    }
  }
}

TEST_CASE("pairwise mass audit") {
  Rng rng = make_stream(5);
  const GaussianParams p(Vector::Zero(2), Matrix::Identity(2, 2));
  CHECK(audit_alpha_pair(p, SelfCensoringModel::uncensored(2), 10'000, rng).value == 1.0);
  const McEstimate same = audit_alpha_pair(p, {{IntervalUnion::at_least(0), IntervalUnion::at_least(0)}}, 200'000, rng);
  CHECK(std::abs(same.value - 0.25) <= 3 * same.std_error);
  const McEstimate opposite = audit_alpha_pair(p, {{IntervalUnion::at_least(0), IntervalUnion::at_most(0)}}, 200'000, rng);
  CHECK(std::abs(opposite.value - 0.25) <= 3 * opposite.std_error);
}

TEST_CASE("subset mass audit") {
  Rng rng = make_stream(6);
  const GaussianParams p2(Vector::Zero(2), Matrix::Identity(2, 2));
  CHECK(audit_alpha_subset(p2, SelfCensoringModel::uncensored(2), 0.5, 10'000, rng).alpha == 1.0);
  // both coordinates are seen together only on the measure-zero diagonal
  CHECK(audit_alpha_subset(p2, max_observation_model(), 1.0, 50'000, rng).alpha == 0.0);
  CHECK_THROWS_AS(audit_alpha_subset(p2, max_observation_model(), 0.3, 100, rng), InvalidBeta);

  // four coordinates, each seen with probability 0.9
  Matrix cov = Matrix::Identity(4, 4);
  cov(0, 1) = cov(1, 0) = 0.3;
  const GaussianParams p4(Vector::Zero(4), cov);
  const double b = 1.2815515655446004;  // 0.9 quantile
  const LinearThresholdModel lt(Matrix::Identity(4, 4), Vector::Constant(4, b));
  const SubsetAudit s = audit_alpha_subset(p4, lt, 0.25, 100'000, rng);
  CHECK(s.alpha >= 0.6);
  CHECK(s.subset_size == 1);
  CHECK(s.exhaustive);
  CHECK(s.subsets_evaluated == 4);
}

TEST_CASE("anchoring audit") {
  Rng rng = make_stream(7);
  const GaussianParams p(Vector::Zero(2), testing::correlation2(0.3));
  SUBCASE("zero rows are always seen") {
    const LinearThresholdModel lt(Matrix::Zero(2, 2), Vector::Zero(2));
    CHECK_NOTHROW(audit_anchoring(p, lt, {0, 1}, 20'000, rng));
  }
  SUBCASE("pattern decided by the anchor") {
    Matrix v(2, 2);
    v << 0, 0, 1, 0;  // coordinate 1 seen iff y0 <= 0
    const AnchorAudit a = audit_anchoring(p, LinearThresholdModel(v, Vector::Zero(2)), {0}, 100'000, rng);
    CHECK(a.gamma >= 0.99);
    CHECK(a.bin_width > 0.0);
  }
  SUBCASE("anchor coordinate hidden half the time") {
    Matrix v(2, 2);
    v << 0, 1, 0, 0;
    CHECK_THROWS_AS(audit_anchoring(p, LinearThresholdModel(v, Vector::Zero(2)), {0}, 10'000, rng), AnchorViolated);
  }
}

TEST_CASE("pattern polytope") {
  const LinearThresholdModel m = max_observation_model();
  SUBCASE("fully observed gives the zero-dimensional space") {
    Observation o{{0, 1}, vec({1, 1})};
    const ConstraintSet k = membership_polytope(m, o);
    CHECK(k.dim() == 0);
    CHECK(k.contains(Vector(0)));
  }
  SUBCASE("only the first coordinate seen") {
    // the seen coordinate is the larger one, so the hidden value lies below 3
    const ConstraintSet k = membership_polytope(m, Observation{{0}, vec({3})});
    REQUIRE(k.dim() == 1);
    CHECK(k.contains(vec({2.0})));
    CHECK_FALSE(k.contains(vec({3.0})));  // a tie would have been seen
    CHECK_FALSE(k.contains(vec({3.5})));
    CHECK(k.closed_contains(vec({3.0 - 2e-9})));
    CHECK_FALSE(k.closed_contains(vec({3.0})));
    CHECK(apply_missingness(m, vec({3.0, 2.0})).seen == CoordSet{0});
  }
}

TEST_CASE("pattern polytope contains its generating completion and is convex") {
  Rng rng = make_stream(8);
  Matrix v(3, 3);
  v << 1, 0.5, 0, -1, 1, 0.2, 0.3, -0.4, 1;
  const LinearThresholdModel lt(v, vec({0.1, 0, -0.2}));
  const GaussianParams p(Vector::Zero(3), Matrix::Identity(3, 3));
  Matrix complete;
  const auto obs = generate_observations(p, lt, 1000, rng, &complete);
  long hidden_rows = 0;
  for (std::size_t r = 0; r < obs.size(); ++r) {
    const CoordSet hidden = complement(obs[r].seen, 3);
    if (hidden.empty()) continue;
    ++hidden_rows;
    const Vector y = complete.row(static_cast<Eigen::Index>(r)).transpose();
    const Vector z = select(y, hidden);
    const ConstraintSet k = membership_polytope(lt, obs[r]);
    CHECK(k.contains(z));
    CHECK(merge(obs[r], z, 3) == y);
    // midpoint of two completions sharing this observation's polytope
    Vector other = z;
    for (int tries = 0; tries < 50; ++tries) {
      Vector w(3);
      sample_gaussian_into(p, rng, w);
      const Vector cand = select(w, hidden);
      if (k.contains(cand)) {
        other = cand;
        break;
      }
    }
    CHECK(k.contains(0.5 * (z + other)));
  }
  CHECK(hidden_rows > 100);
}
