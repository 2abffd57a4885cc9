#include "doctest.h"
#include "helpers.hpp"

#include <cmath>
#include <functional>
#include <random>

#include "rgan/autodiff.hpp"

using namespace rgan;
using ad::Tape;
using ad::Var;

namespace {

using Fn = std::function<Var(Tape&, const std::vector<Var>&)>;

Mat random_mat(Eigen::Index r, Eigen::Index c, std::mt19937_64& eng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(eng);
  return m;
}

double eval(const Fn& f, const std::vector<Mat>& xs) {
  Tape t;
  std::vector<Var> vs;
  for (const auto& x : xs) vs.push_back(t.constant(x));
  return f(t, vs).scalar();
}

// Max relative error between tape gradients and central differences.
double grad_check(const Fn& f, std::vector<Mat> xs, double h = 1e-6) {
  Tape t;
  std::vector<Var> vs;
  for (const auto& x : xs) vs.push_back(t.variable(x));
  const Var loss = f(t, vs);
  t.backward(loss);
  double worst = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const Mat g = t.gradient(vs[k]);
    for (Eigen::Index i = 0; i < xs[k].size(); ++i) {
      const double keep = xs[k].data()[i];
      xs[k].data()[i] = keep + h;
      const double up = eval(f, xs);
      xs[k].data()[i] = keep - h;
      const double dn = eval(f, xs);
      xs[k].data()[i] = keep;
      const double fd = (up - dn) / (2 * h);
      const double err = std::abs(fd - g.data()[i]) / std::max(1e-6, std::abs(fd) + std::abs(g.data()[i]));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("square at 3 has gradient 6") {
  Tape t;
  const Var x = t.variable(Mat::Constant(1, 1, 3.0));
  const Var y = ad::square(x);
  t.backward(y);
  CHECK(y.scalar() == 9.0);
  CHECK(t.gradient(x)(0, 0) == 6.0);
}

TEST_CASE("elementwise ops with broadcasting") {
  std::mt19937_64 eng(1);
  const Mat a = random_mat(4, 3, eng), row = random_mat(1, 3, eng), colv = random_mat(4, 1, eng);
  const Mat s = random_mat(1, 1, eng), pos = random_mat(4, 3, eng, 0.5, 2.0);
  CHECK(grad_check([](Tape&, const std::vector<Var>& v) { return ad::sum_all((v[0] + v[1]) * v[2] - v[3] / v[4]); },
                   {a, row, colv, s, pos}) < 1e-7);
  CHECK(grad_check([](Tape&, const std::vector<Var>& v) { return ad::mean_all(v[0] * v[1] - v[1] + 2.0 * v[0] / 3.0); },
                   {a, pos}) < 1e-7);
  CHECK(grad_check([](Tape&, const std::vector<Var>& v) { return ad::sum_all(1.0 - v[0] + (-v[1]) * 0.5 + v[0] - 2.0); },
                   {a, row}) < 1e-7);
  CHECK(grad_check([](Tape&, const std::vector<Var>& v) { return ad::sum_all(2.0 * ad::pow(v[0], -1.0)); }, {pos}) < 1e-7);
}

TEST_CASE("unary ops") {
  std::mt19937_64 eng(2);
  const Mat a = random_mat(3, 4, eng, -2.0, 2.0), pos = random_mat(3, 4, eng, 0.2, 3.0);
  auto one = [&](std::function<Var(const Var&)> op, const Mat& x) {
    return grad_check([op](Tape&, const std::vector<Var>& v) { return ad::sum_all(op(v[0])); }, {x});
  };
  CHECK(one([](const Var& x) { return ad::tanh(x); }, a) < 1e-7);
  CHECK(one([](const Var& x) { return ad::exp(x); }, a) < 1e-7);
  CHECK(one([](const Var& x) { return ad::log(x); }, pos) < 1e-7);
  CHECK(one([](const Var& x) { return ad::pow(x, 0.5); }, pos) < 1e-7);
  CHECK(one([](const Var& x) { return ad::pow(x, -1.5); }, pos) < 1e-7);
  CHECK(one([](const Var& x) { return ad::square(x); }, a) < 1e-7);
  CHECK(one([](const Var& x) { return ad::abs(x); }, a) < 1e-7);
  CHECK(one([](const Var& x) { return ad::clamp_min(x, 0.1); }, a) < 1e-7);
}

TEST_CASE("tanh values match the library function") {
  Mat x(1, 7);
  x << -30.0, -3.0, -0.5, 0.0, 1e-9, 0.7, 25.0;
  const Mat y = ad::tanh_values(x);
  for (Eigen::Index i = 0; i < x.size(); ++i) CHECK(std::abs(y(0, i) - std::tanh(x(0, i))) < 1e-15);
}

TEST_CASE("abs subgradient is zero at zero, clamp has no gradient below the floor") {
  Tape t;
  Mat v(1, 3);
  v << 0.0, -2.0, 0.5;
  const Var x = t.variable(v);
  t.backward(ad::sum_all(ad::abs(x) + ad::clamp_min(x, 0.1)));
  const Mat g = t.gradient(x);
  CHECK(g(0, 0) == 0.0);
  CHECK(g(0, 1) == -1.0);
  CHECK(g(0, 2) == 2.0);
}

TEST_CASE("matrix ops and reductions") {
  std::mt19937_64 eng(3);
  const Mat x = random_mat(5, 3, eng), w = random_mat(3, 4, eng), b = random_mat(1, 4, eng);
  CHECK(grad_check([](Tape&, const std::vector<Var>& v) { return ad::sum_all(ad::tanh(ad::affine(v[0], v[1], v[2]))); },
                   {x, w, b}) < 1e-7);
  CHECK(grad_check([](Tape&, const std::vector<Var>& v) { return ad::sum_all(ad::square(ad::matmul(v[0], v[1]))); },
                   {x, w}) < 1e-7);
  CHECK(grad_check([](Tape&, const std::vector<Var>& v) {
          return ad::sum_all(ad::square(ad::sum_cols(v[0]))) + ad::sum_all(ad::square(ad::mean_rows(v[0])));
        },
                   {x}) < 1e-7);
  CHECK(grad_check([](Tape&, const std::vector<Var>& v) {
          return ad::sum_all(ad::square(ad::hcat({ad::col(v[0], 2), ad::cols(v[0], 0, 2), v[1]})));
        },
                   {x, random_mat(5, 2, eng)}) < 1e-7);
}

TEST_CASE("batched small-matrix ops") {
  std::mt19937_64 eng(4);
  const Mat m = random_mat(6, 4, eng), u = random_mat(6, 2, eng), v = random_mat(6, 2, eng);
  // values against explicit per-row loops
  Tape t;
  const Mat mv = ad::batch_matvec(t.constant(m), t.constant(u)).value();
  const Mat gram = ad::batch_gram(t.constant(m)).value();
  const Mat outer = ad::batch_outer(t.constant(u), t.constant(v)).value();
  for (Eigen::Index r = 0; r < 6; ++r) {
    Eigen::Matrix2d M;
    M << m(r, 0), m(r, 1), m(r, 2), m(r, 3);
    const Eigen::Vector2d uv(u(r, 0), u(r, 1));
    const Eigen::Vector2d vv(v(r, 0), v(r, 1));
    const Eigen::Vector2d p = M * uv;
    const Eigen::Matrix2d G = M * M.transpose();
    const Eigen::Matrix2d O = uv * vv.transpose();
    CHECK(std::abs(mv(r, 1) - p(1)) < 1e-15);
    CHECK(std::abs(gram(r, 1) - G(0, 1)) < 1e-15);
    CHECK(std::abs(gram(r, 3) - G(1, 1)) < 1e-15);
    CHECK(std::abs(outer(r, 2) - O(1, 0)) < 1e-15);
  }
  CHECK(grad_check([](Tape&, const std::vector<Var>& x) { return ad::sum_all(ad::square(ad::batch_matvec(x[0], x[1]))); },
                   {m, u}) < 1e-7);
  CHECK(grad_check([](Tape&, const std::vector<Var>& x) { return ad::sum_all(ad::square(ad::batch_gram(x[0]))); }, {m}) <
        1e-7);
  CHECK(grad_check([](Tape&, const std::vector<Var>& x) { return ad::sum_all(ad::square(ad::batch_outer(x[0], x[1]))); },
                   {u, v}) < 1e-7);
}

TEST_CASE("detach and constants stop gradients") {
  Tape t;
  const Var x = t.variable(Mat::Constant(1, 1, 2.0));
  const Var c = t.constant(Mat::Constant(1, 1, 5.0));
  const Var y = x * ad::detach(x) + c * x;
  t.backward(y);
  CHECK(t.gradient(x)(0, 0) == doctest::Approx(2.0 + 5.0));
  CHECK_FALSE(t.needs_grad(c.id()));
}

TEST_CASE("reused nodes accumulate gradients") {
  Tape t;
  const Var x = t.variable(Mat::Constant(1, 1, 1.5));
  const Var y = x * x * x;  // 3 x^2
  t.backward(y);
  CHECK(t.gradient(x)(0, 0) == doctest::Approx(3 * 2.25));
}

TEST_CASE("backward needs a scalar") {
  Tape t;
  const Var x = t.variable(Mat::Ones(2, 2));
  CHECK_THROWS(t.backward(x * 2.0));
  CHECK_THROWS(t.variable(Mat::Ones(2, 2)) + t.variable(Mat::Ones(3, 3)));
}
