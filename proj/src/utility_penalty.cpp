#include "rgan/utility_penalty.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace rgan {

double PowerUtility::operator()(double x) const {
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  if (p == 1.0) return std::log(x);
  const double q = 1.0 - p;
  return shifted ? (std::pow(x, q) - 1.0) / q : std::pow(x, q) / q;
}

Vec PowerUtility::operator()(const Vec& x) const {
  Vec out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) out(i) = (*this)(x(i));
  return out;
}

double utility(const PowerUtility& u, double x) { return u(x); }

PowerUtility PowerUtility::parse(const std::string& s) {
  if (s == "log" || s == "ln") return {1.0, true};
  auto num = [&](std::size_t pos) {
    std::size_t used = 0;
    const double v = std::stod(s.substr(pos), &used);
    if (pos + used != s.size() || !(v >= 0.0)) throw std::invalid_argument("bad utility: " + s);
    return v;
  };
  if (s.rfind("tilde_u_", 0) == 0) return {num(8), false};
  if (s.rfind("u_", 0) == 0) return {num(2), true};
  throw std::invalid_argument("unknown utility: " + s + " (use log, u_<p> or tilde_u_<p>)");
}

std::string PowerUtility::to_string() const {
  if (p == 1.0 && shifted) return "log";
  std::ostringstream os;
  os << (shifted ? "u_" : "tilde_u_") << p;
  return os.str();
}

PenaltyKind penalty_kind_from_string(const std::string& s) {
  if (s == "additive") return PenaltyKind::additive;
  if (s == "multiplicative") return PenaltyKind::multiplicative;
  if (s == "sigma") return PenaltyKind::sigma;
  if (s == "pathwise") return PenaltyKind::pathwise;
  throw std::invalid_argument("unknown penalty kind: " + s);
}

std::string to_string(PenaltyKind k) {
  switch (k) {
    case PenaltyKind::additive: return "additive";
    case PenaltyKind::multiplicative: return "multiplicative";
    case PenaltyKind::sigma: return "sigma";
    case PenaltyKind::pathwise: return "pathwise";
  }
  return "?";
}

double instant_vol_term(const PenaltySpec& spec, const Mat& vol) {
  switch (spec.kind) {
    case PenaltyKind::additive: return (vol * vol.transpose() - spec.ref_cov()).squaredNorm();
    case PenaltyKind::multiplicative: {
      const Mat ref = spec.ref_cov();
      Eigen::FullPivLU<Mat> lu(ref);
      if (!lu.isInvertible()) throw std::invalid_argument("penalty: reference covariance is singular");
      // Sigma Sigma~^{-1} = (Sigma~^{-1} Sigma)^T for symmetric arguments.
      const Mat m = lu.solve(vol * vol.transpose()).transpose();
      return (m - Mat::Identity(ref.rows(), ref.cols())).squaredNorm();
    }
    case PenaltyKind::sigma: return (vol - spec.ref_vol).squaredNorm();
    case PenaltyKind::pathwise: break;
  }
  throw std::invalid_argument("instant_vol_term: pathwise spec has no instantaneous term");
}

double instant_drift_term(const PenaltySpec& spec, const Vec& drift) { return (drift - spec.ref_drift).squaredNorm(); }

PenaltyValue penalty_instant(const PenaltySpec& spec, const PathBatch& paths, const TimeGrid& grid) {
  if (paths.drift.size() != grid.n_steps() || paths.vol.size() != grid.n_steps())
    throw std::invalid_argument("penalty_instant: paths do not carry per-step parameters");
  const auto B = static_cast<Eigen::Index>(paths.n_paths());
  const auto d = static_cast<Eigen::Index>(paths.dim());
  if (B == 0) throw std::invalid_argument("penalty_instant: empty batch");
  PenaltyValue v;
  Mat sigma(d, d);
  for (std::size_t n = 0; n < grid.n_steps(); ++n) {
    const double dt = grid.dt(n);
    double sv = 0.0, sd = 0.0;
    for (Eigen::Index b = 0; b < B; ++b) {
      for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) sigma(i, j) = paths.vol[n](b, i * d + j);
      sv += instant_vol_term(spec, sigma);
      sd += instant_drift_term(spec, paths.drift[n].row(b).transpose());
    }
    v.vol += sv * dt;
    v.drift += sd * dt;
  }
  v.vol *= spec.lambda1 / static_cast<double>(B);
  v.drift *= spec.lambda2 / static_cast<double>(B);
  return v;
}

PenaltyValue penalty_pathwise(const PenaltySpec& spec, const PathBatch& paths, const TimeGrid& grid) {
  const auto B = static_cast<Eigen::Index>(paths.n_paths());
  if (B == 0) throw std::invalid_argument("penalty_pathwise: empty batch");
  for (const auto& s : paths.s)
    if ((s.array() <= 0.0).any()) throw std::invalid_argument("penalty_pathwise: non-positive prices");
  const Mat qref = spec.qcv_ref(grid.horizon());
  double r1 = 0.0;
  for (Eigen::Index b = 0; b < B; ++b) r1 += (log_qcv(paths, static_cast<std::size_t>(b)) - qref).squaredNorm();
  const Vec arr = (paths.s.back().array() / paths.s.front().array()).colwise().mean().transpose();
  PenaltyValue v;
  v.vol = spec.lambda1 * r1 / static_cast<double>(B);
  v.drift = spec.lambda2 * (arr - spec.arr_ref(grid.horizon())).squaredNorm();
  return v;
}

PenaltyValue penalty(const PenaltySpec& spec, const PathBatch& paths, const TimeGrid& grid) {
  return spec.kind == PenaltyKind::pathwise ? penalty_pathwise(spec, paths, grid) : penalty_instant(spec, paths, grid);
}

}  // namespace rgan
