#pragma once

#include "mnar/gaussian.hpp"
#include "mnar/random.hpp"

namespace testing {

/// A^T A + I with standard normal A.
inline mnar::Matrix random_spd(int d, mnar::Rng& rng) {
  std::normal_distribution<double> n01;
  mnar::Matrix a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = n01(rng);
  return a.transpose() * a + mnar::Matrix::Identity(d, d);
}

inline mnar::Matrix correlation2(double rho) {
  mnar::Matrix m(2, 2);
  m << 1.0, rho, rho, 1.0;
  return m;
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace testing
