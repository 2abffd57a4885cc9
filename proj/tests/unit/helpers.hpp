#pragma once

#include <cmath>
#include <vector>

#include "rgan/common.hpp"

namespace testing {

struct Moments {
  double mean = 0.0;
  double var = 0.0;  // unbiased
  double se() const { return std::sqrt(var / n); }
  double n = 0.0;
};

inline Moments moments(const rgan::Vec& x) {
  Moments m;
  m.n = static_cast<double>(x.size());
  m.mean = x.mean();
  m.var = (x.array() - m.mean).square().sum() / (m.n - 1.0);
  return m;
}

inline double kurtosis(const rgan::Vec& x) {
  const double mu = x.mean();
  const double m2 = (x.array() - mu).square().mean();
  const double m4 = (x.array() - mu).pow(4).mean();
  return m4 / (m2 * m2);
}

inline double max_abs_diff(const rgan::Mat& a, const rgan::Mat& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace testing
