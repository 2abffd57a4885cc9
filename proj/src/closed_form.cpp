#include "rgan/closed_form.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>

#include "rgan/linalg.hpp"

namespace rgan {

namespace {

constexpr double kResidualTol = 1e-10;
constexpr int kMaxNewton = 10000;

double bisect(const std::function<double(double)>& f, double lo, double hi, int* iters) {
  double flo = f(lo);
  const double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo < 0.0) == (fhi < 0.0)) throw std::runtime_error("bisection: no sign change in bracket");
  int k = 0;
  for (; k < 400 && hi - lo > 0.0; ++k) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    const double fm = f(mid);
    if (fm == 0.0) {
      lo = hi = mid;
      break;
    }
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  if (iters) *iters = k;
  return 0.5 * (lo + hi);
}

using Residual = std::function<Vec(const Vec&)>;
using Jacobian = std::function<Mat(const Vec&)>;

// Damped Newton with Armijo backtracking on 0.5 |G|^2.
Vec newton(const Residual& G, const Jacobian& J, Vec x, int* iters) {
  Vec g = G(x);
  double merit = 0.5 * g.squaredNorm();
  int k = 0;
  for (; k < kMaxNewton; ++k) {
    if (g.cwiseAbs().maxCoeff() < 0.01 * kResidualTol) break;
    const Vec step = J(x).partialPivLu().solve(-g);
    if (!step.allFinite()) throw std::runtime_error("newton: singular Jacobian");
    double t = 1.0;
    Vec xn;
    Vec gn;
    double mn = 0.0;
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      xn = x + t * step;
      gn = G(xn);
      mn = 0.5 * gn.squaredNorm();
      if (mn <= (1.0 - 1e-4 * t) * merit) break;
    }
    if (mn >= merit) break;  // no further decrease at machine precision
    x = xn;
    g = gn;
    merit = mn;
  }
  if (iters) *iters = k;
  if (!(g.cwiseAbs().maxCoeff() < kResidualTol))
    throw std::runtime_error("newton: no convergence, residual " + std::to_string(g.cwiseAbs().maxCoeff()));
  return x;
}

void check_common(const Mat& cov_ref, const Vec& mu, double lambda1) {
  if (cov_ref.rows() != mu.size() || cov_ref.cols() != mu.size())
    throw std::invalid_argument("closed form: dimension mismatch");
  if (!(lambda1 > 0.0)) throw std::invalid_argument("closed form: lambda1 must be positive");
  if (cov_ref.llt().info() != Eigen::Success) throw std::invalid_argument("closed form: reference covariance not PD");
}

Mat worst_cov(const Vec& pi, const Mat& cov_ref, double lambda1, VolPenalty kind) {
  const Mat outer = pi * pi.transpose();
  if (kind == VolPenalty::additive) return cov_ref + outer / (4.0 * lambda1);
  return cov_ref + outer * cov_ref * cov_ref / (4.0 * lambda1);
}

}  // namespace

Mat SaddleSolution::vol() const { return cholesky_factor(0.5 * (cov + cov.transpose())); }

SaddleSolution solve_1d_robust_vol(double mu, double r, double sigma_ref, double lambda1) {
  if (!(lambda1 > 0.0) || !(sigma_ref > 0.0)) throw std::invalid_argument("solve_1d_robust_vol: need lambda1, sigma~ > 0");
  const double ex = mu - r;
  const double c = ex * ex / (2.0 * lambda1);
  auto f = [&](double s) { return s * s * s * s - sigma_ref * s * s * s - c; };
  SaddleSolution out;
  const double sigma = c == 0.0 ? sigma_ref : bisect(f, sigma_ref, sigma_ref + 10.0, &out.iterations);
  out.pi = Vec::Constant(1, ex / (sigma * sigma));
  out.cov = Mat::Constant(1, 1, sigma * sigma);
  out.drift = Vec::Constant(1, mu);
  out.residual = std::abs(f(sigma));
  return out;
}

SaddleSolution solve_1d_additive(double mu, double r, double sigma_ref, double lambda1) {
  if (!(lambda1 > 0.0) || !(sigma_ref > 0.0)) throw std::invalid_argument("solve_1d_additive: need lambda1, sigma~ > 0");
  const double ex = mu - r;
  const double v = sigma_ref * sigma_ref;
  auto f = [&](double p) { return (v + p * p / (4.0 * lambda1)) * p - ex; };
  SaddleSolution out;
  const double merton = ex / v;
  const double pi = ex == 0.0 ? 0.0 : bisect(f, std::min(0.0, merton), std::max(0.0, merton), &out.iterations);
  out.pi = Vec::Constant(1, pi);
  out.cov = Mat::Constant(1, 1, v + pi * pi / (4.0 * lambda1));
  out.drift = Vec::Constant(1, mu);
  out.residual = std::abs(f(pi));
  return out;
}

SaddleSolution solve_multid_robust_vol(const Vec& mu, double r, const Mat& cov_ref, double lambda1, VolPenalty kind) {
  check_common(cov_ref, mu, lambda1);
  const auto d = mu.size();
  const Vec ex = mu.array() - r;
  const Mat I = Mat::Identity(d, d);
  const Mat A = kind == VolPenalty::additive ? I : Mat(cov_ref * cov_ref);
  const double k = 1.0 / (4.0 * lambda1);
  Residual G = [&](const Vec& p) -> Vec { return cov_ref * p + p * (k * p.dot(A * p)) - ex; };
  Jacobian J = [&](const Vec& p) -> Mat {
    return cov_ref + k * (p.dot(A * p) * I + 2.0 * p * (A * p).transpose());
  };
  SaddleSolution out;
  out.pi = newton(G, J, cov_ref.llt().solve(ex), &out.iterations);
  out.cov = worst_cov(out.pi, cov_ref, lambda1, kind);
  out.drift = mu;
  out.residual = residual_multid(out, mu, r, cov_ref, lambda1, kind);
  return out;
}

SaddleSolution solve_fully_robust(const Vec& mu_ref, double r, const Mat& cov_ref, double lambda1, double lambda2) {
  check_common(cov_ref, mu_ref, lambda1);
  if (!(lambda2 > 0.0)) throw std::invalid_argument("solve_fully_robust: lambda2 must be positive");
  const auto d = mu_ref.size();
  const Vec ex = mu_ref.array() - r;
  const Mat I = Mat::Identity(d, d);
  const double k = 1.0 / (4.0 * lambda1);
  const double m = 1.0 / (2.0 * lambda2);
  Residual G = [&](const Vec& p) -> Vec { return cov_ref * p + p * (k * p.squaredNorm()) + m * p - ex; };
  Jacobian J = [&](const Vec& p) -> Mat { return cov_ref + k * (p.squaredNorm() * I + 2.0 * p * p.transpose()) + m * I; };
  SaddleSolution out;
  out.pi = newton(G, J, cov_ref.llt().solve(ex), &out.iterations);
  out.cov = worst_cov(out.pi, cov_ref, lambda1, VolPenalty::additive);
  out.drift = mu_ref - m * out.pi;
  out.residual = residual_fully_robust(out, mu_ref, r, cov_ref, lambda1, lambda2);
  return out;
}

double residual_multid(const SaddleSolution& s, const Vec& mu, double r, const Mat& cov_ref, double lambda1,
                       VolPenalty kind) {
  const Vec ex = mu.array() - r;
  const double a = (s.cov - worst_cov(s.pi, cov_ref, lambda1, kind)).cwiseAbs().maxCoeff();
  const double b = (s.cov * s.pi - ex).cwiseAbs().maxCoeff();
  return std::max(a, b);
}

double residual_fully_robust(const SaddleSolution& s, const Vec& mu_ref, double r, const Mat& cov_ref, double lambda1,
                             double lambda2) {
  const double a = (s.cov - worst_cov(s.pi, cov_ref, lambda1, VolPenalty::additive)).cwiseAbs().maxCoeff();
  const double b = (s.cov * s.pi - (s.drift.array() - r).matrix()).cwiseAbs().maxCoeff();
  const double c = (s.pi - 2.0 * lambda2 * (mu_ref - s.drift)).cwiseAbs().maxCoeff();
  return std::max({a, b, c});
}

double merton_weight(double excess_drift, double, double sigma, double p) {
  if (!(sigma > 0.0) || !(p > 0.0)) throw std::invalid_argument("merton_weight: sigma and p must be positive");
  return excess_drift / (p * sigma * sigma);
}

Vec merton_weight(const Mat& cov, const Vec& mu, double r, double p) { return oracle_weight(cov, mu, r) / p; }

Vec oracle_weight(const Mat& cov, const Vec& mu, double r) {
  if (cov.rows() != mu.size() || cov.cols() != mu.size()) throw std::invalid_argument("oracle_weight: dimension mismatch");
  Eigen::FullPivLU<Mat> lu(cov);
  if (!lu.isInvertible()) throw std::invalid_argument("oracle_weight: singular covariance");
  return lu.solve((mu.array() - r).matrix());
}

NoTradeParams no_trade_params(double excess_drift, double sigma, double p, double c_prop) {
  if (c_prop < 0.0) throw std::invalid_argument("no_trade_params: negative cost");
  NoTradeParams nt;
  nt.pi_ntc = merton_weight(excess_drift, 0.0, sigma, p);
  const double q = nt.pi_ntc * (1.0 - nt.pi_ntc);
  const double dpi = std::cbrt(3.0 / (2.0 * p) * q * q);
  nt.half_width = std::cbrt(c_prop) * dpi;
  return nt;
}

double no_trade_target(double w, const NoTradeParams& nt) {
  if (w > nt.upper()) return nt.upper();
  if (w < nt.lower()) return nt.lower();
  return w;
}

Mat NoTradePolicy::weights(const PolicyInput& in) {
  const auto B = in.prices.rows();
  const auto d = in.prices.cols();
  if (static_cast<std::size_t>(d) != nt_.size()) throw std::invalid_argument("NoTradePolicy: dimension mismatch");
  Mat w(B, d);
  for (Eigen::Index b = 0; b < B; ++b) {
    const double x = in.wealth(b);
    if (!(x > 0.0)) {
      w.row(b).setZero();  // defaulted path: hold nothing
      continue;
    }
    for (Eigen::Index i = 0; i < d; ++i) {
      const double current = in.holdings(b, i) * in.prices(b, i) / x;
      w(b, i) = no_trade_target(current, nt_[static_cast<std::size_t>(i)]);
    }
  }
  return w;
}

}  // namespace rgan
