#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "rgan/linalg.hpp"
#include "rgan/market_sim.hpp"
#include "rgan/random.hpp"

namespace rgan {

namespace {

constexpr double kMaxPersistence = 1.0 - 1e-6;

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

struct Series {
  const double* r;
  std::size_t n;
  double h0;
};

// Gaussian negative log-likelihood in natural parameters.
double garch_nll(const Series& s, double m, double omega, double alpha, double beta) {
  double h = s.h0;
  double nll = 0.0;
  const double log2pi = std::log(2.0 * std::numbers::pi);
  for (std::size_t t = 0; t < s.n; ++t) {
    if (!(h > 0.0) || !std::isfinite(h)) return std::numeric_limits<double>::infinity();
    const double e = s.r[t] - m;
    nll += 0.5 * (log2pi + std::log(h) + e * e / h);
    h = omega + alpha * e * e + beta * h;
  }
  return nll;
}

GarchCoord from_unconstrained(const gsl_vector* x) {
  GarchCoord c;
  c.mean = gsl_vector_get(x, 0);
  c.omega = std::exp(gsl_vector_get(x, 1));
  const double rho = std::min(logistic(gsl_vector_get(x, 2)), kMaxPersistence);
  const double share = logistic(gsl_vector_get(x, 3));
  c.alpha = rho * share;
  c.beta = rho * (1.0 - share);
  return c;
}

double objective(const gsl_vector* x, void* params) {
  const auto* s = static_cast<const Series*>(params);
  const GarchCoord c = from_unconstrained(x);
  const double v = garch_nll(*s, c.mean, c.omega, c.alpha, c.beta);
  return std::isfinite(v) ? v : 1e300;
}

struct CoordFit {
  GarchCoord params;
  GarchCoord se;
  bool clamped = false;
  double loglik = 0.0;
  Vec std_resid;
};

CoordFit fit_coord(const Vec& r, const GarchFitOptions& opts) {
  const std::size_t n = static_cast<std::size_t>(r.size());
  const double mean = r.mean();
  const double var = (r.array() - mean).square().sum() / static_cast<double>(n);
  if (!(var > 0.0)) throw std::runtime_error("fit_garch: series has zero variance");
  Series s{r.data(), n, var};

  gsl_multimin_function f{&objective, 4, &s};
  gsl_vector* x = gsl_vector_alloc(4);
  gsl_vector* step = gsl_vector_alloc(4);
  gsl_vector_set(x, 0, mean);
  gsl_vector_set(x, 1, std::log(0.1 * var));
  gsl_vector_set(x, 2, logit(0.9));
  gsl_vector_set(x, 3, logit(0.05 / 0.9));

  gsl_multimin_fminimizer* mz = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, 4);
  const double sd = std::sqrt(var);
  int status = GSL_CONTINUE;
  int total_iter = 0;
  // Simplex restarts from the incumbent guard against premature collapse.
  for (int restart = 0; restart < 4; ++restart) {
    gsl_vector_set(step, 0, 0.1 * sd);
    gsl_vector_set(step, 1, 0.5);
    gsl_vector_set(step, 2, 0.5);
    gsl_vector_set(step, 3, 0.5);
    gsl_multimin_fminimizer_set(mz, &f, x, step);
    status = GSL_CONTINUE;
    for (int it = 0; it < opts.max_iter && status == GSL_CONTINUE; ++it, ++total_iter) {
      if (gsl_multimin_fminimizer_iterate(mz) != GSL_SUCCESS) break;
      status = gsl_multimin_test_size(gsl_multimin_fminimizer_size(mz), opts.tol);
    }
    gsl_vector_memcpy(x, gsl_multimin_fminimizer_x(mz));
  }
  const double best = gsl_multimin_fminimizer_minimum(mz);
  const double rho = logistic(gsl_vector_get(x, 2));
  CoordFit out;
  out.params = from_unconstrained(x);
  out.clamped = rho >= kMaxPersistence;
  gsl_multimin_fminimizer_free(mz);
  gsl_vector_free(step);
  gsl_vector_free(x);
  if (!std::isfinite(best) || best >= 1e299)
    throw std::runtime_error("fit_garch: likelihood optimization did not converge (" + std::to_string(total_iter) +
                             " iterations, status " + std::to_string(status) + ")");
  out.loglik = -best;

  // Observed information by central differences in natural parameters.
  const GarchCoord& p = out.params;
  const double theta[4] = {p.mean, p.omega, p.alpha, p.beta};
  const double hstep[4] = {1e-4 * sd, 1e-3 * p.omega + 1e-12, 1e-4, 1e-4};
  auto nll_at = [&](const double* th) { return garch_nll(s, th[0], th[1], th[2], th[3]); };
  Eigen::Matrix4d H;
  for (int i = 0; i < 4; ++i) {
    for (int j = i; j < 4; ++j) {
      double th[4];
      auto eval = [&](double si, double sj) {
        std::copy(theta, theta + 4, th);
        th[i] += si * hstep[i];
        th[j] += sj * hstep[j];
        return nll_at(th);
      };
      const double v = (eval(1, 1) - eval(1, -1) - eval(-1, 1) + eval(-1, -1)) / (4.0 * hstep[i] * hstep[j]);
      H(i, j) = v;
      H(j, i) = v;
    }
  }
  // Pseudo-inverse with clipped eigenvalues keeps the errors finite when a
  // parameter sits on the boundary of its domain.
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(H);
  Eigen::Vector4d ev = eig.eigenvalues();
  const double floor = std::max(1e-12, 1e-10 * ev.cwiseAbs().maxCoeff());
  for (int i = 0; i < 4; ++i) ev(i) = 1.0 / std::max(ev(i), floor);
  const Eigen::Matrix4d cov = eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose();
  double se[4];
  for (int i = 0; i < 4; ++i) se[i] = std::sqrt(std::max(cov(i, i), 0.0));
  out.se = {se[0], se[1], se[2], se[3]};

  out.std_resid.resize(r.size());
  double h = var;
  for (Eigen::Index t = 0; t < r.size(); ++t) {
    const double e = r(t) - p.mean;
    out.std_resid(t) = e / std::sqrt(h);
    h = p.omega + p.alpha * e * e + p.beta * h;
  }
  return out;
}

bool valid_coord(const GarchCoord& c, std::string* what) {
  auto fail = [&](const char* w) {
    if (what) *what = w;
    return false;
  };
  if (!std::isfinite(c.mean)) return fail("mean");
  if (!(c.omega > 0.0) || !std::isfinite(c.omega)) return fail("omega");
  if (!(c.alpha >= 0.0)) return fail("alpha");
  if (!(c.beta >= 0.0)) return fail("beta");
  if (!(c.alpha + c.beta < 1.0)) return fail("alpha+beta");
  return true;
}

}  // namespace

void GarchModel::validate() const {
  if (coords.empty()) throw std::invalid_argument("GarchModel: no coordinates");
  const auto d = static_cast<Eigen::Index>(coords.size());
  for (const auto& c : coords) {
    std::string what;
    if (!valid_coord(c, &what)) throw std::invalid_argument("GarchModel: invalid parameter " + what);
  }
  if (corr.rows() != d || corr.cols() != d) throw std::invalid_argument("GarchModel: correlation must be d x d");
  if (!is_psd(corr, 1e-10)) throw std::invalid_argument("GarchModel: correlation matrix is not PSD");
  if ((corr.diagonal().array() - 1.0).abs().maxCoeff() > 1e-10)
    throw std::invalid_argument("GarchModel: correlation diagonal must be 1");
}

GarchModel fit_garch(const Mat& log_returns, const GarchFitOptions& opts) {
  if (log_returns.rows() < 100) throw std::invalid_argument("fit_garch: need at least 100 observations");
  if (!log_returns.allFinite()) throw std::invalid_argument("fit_garch: non-finite returns");
  const auto d = log_returns.cols();
  GarchModel model;
  Mat resid(log_returns.rows(), d);
  for (Eigen::Index i = 0; i < d; ++i) {
    CoordFit f = fit_coord(log_returns.col(i), opts);
    model.coords.push_back(f.params);
    model.std_errors.push_back(f.se);
    model.stationarity_clamped.push_back(f.clamped ? 1 : 0);
    model.log_likelihood.push_back(f.loglik);
    resid.col(i) = f.std_resid;
  }
  const Mat centered = resid.rowwise() - resid.colwise().mean();
  const Mat cov = centered.transpose() * centered / static_cast<double>(resid.rows());
  model.corr = to_correlation(cov);
  return model;
}

Mat stack_log_returns(const PathBatch& paths) {
  const auto B = static_cast<Eigen::Index>(paths.n_paths());
  const auto N = static_cast<Eigen::Index>(paths.n_steps());
  const auto d = static_cast<Eigen::Index>(paths.dim());
  Mat out(B * N, d);
  for (Eigen::Index b = 0; b < B; ++b)
    for (Eigen::Index n = 0; n < N; ++n)
      for (Eigen::Index i = 0; i < d; ++i)
        out(b * N + n, i) = std::log(paths.s[static_cast<std::size_t>(n + 1)](b, i) / paths.s[static_cast<std::size_t>(n)](b, i));
  return out;
}

std::vector<GarchModel> make_noisy_garch_pool(const GarchModel& model, double se_factor, double corr_std,
                                              std::size_t n_pool, std::uint64_t seed) {
  model.validate();
  if (se_factor < 0.0 || corr_std < 0.0) throw std::invalid_argument("make_noisy_garch_pool: negative noise level");
  const auto d = static_cast<Eigen::Index>(model.dim());
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<GarchModel> pool;
  pool.reserve(n_pool);
  for (std::size_t j = 0; j < n_pool; ++j) {
    auto eng = stream_engine(seed, j, 0x67617263);
    GarchModel m;
    m.std_errors = model.std_errors;
    m.stationarity_clamped.assign(model.dim(), 0);
    m.log_likelihood = model.log_likelihood;
    for (std::size_t i = 0; i < model.dim(); ++i) {
      const GarchCoord& c = model.coords[i];
      const GarchCoord& se = model.std_errors[i];
      std::string what;
      bool ok = false;
      for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
        GarchCoord p{c.mean + se_factor * se.mean * normal(eng), c.omega + se_factor * se.omega * normal(eng),
                     c.alpha + se_factor * se.alpha * normal(eng), c.beta + se_factor * se.beta * normal(eng)};
        if (valid_coord(p, &what)) {
          m.coords.push_back(p);
          ok = true;
        }
      }
      if (!ok)
        throw std::runtime_error("make_noisy_garch_pool: scenario " + std::to_string(j) + " coordinate " +
                                 std::to_string(i) + " has invalid " + what + " after 100 retries");
    }
    Mat c = model.corr;
    if (corr_std > 0.0) {
      for (Eigen::Index a = 0; a < d; ++a)
        for (Eigen::Index b = a + 1; b < d; ++b) {
          const double v = c(a, b) + corr_std * normal(eng);
          c(a, b) = v;
          c(b, a) = v;
        }
      c = to_correlation(nearest_psd(c));
    }
    m.corr = c;
    pool.push_back(std::move(m));
  }
  return pool;
}

PathBatch simulate_garch(const GarchModel& model, const TimeGrid& grid, const Vec& s0, std::size_t n_paths,
                         std::uint64_t seed) {
  model.validate();
  const auto d = static_cast<Eigen::Index>(model.dim());
  if (s0.size() != d) throw std::invalid_argument("simulate_garch: s0 dimension mismatch");
  const auto B = static_cast<Eigen::Index>(n_paths);
  const Mat L = cholesky_factor(model.corr);
  PathBatch out;
  out.s.assign(grid.n_steps() + 1, Mat(B, d));
  out.s[0] = s0.transpose().replicate(B, 1);
  out.floored.assign(n_paths, 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec h(d), z(d);
  for (Eigen::Index b = 0; b < B; ++b) {
    auto eng = stream_engine(seed, static_cast<std::uint64_t>(b), 0x67);
    for (Eigen::Index i = 0; i < d; ++i) {
      const auto& c = model.coords[static_cast<std::size_t>(i)];
      h(i) = c.omega / (1.0 - c.alpha - c.beta);
    }
    for (std::size_t n = 0; n < grid.n_steps(); ++n) {
      for (Eigen::Index i = 0; i < d; ++i) z(i) = normal(eng);
      const Vec eps = L * z;
      for (Eigen::Index i = 0; i < d; ++i) {
        const auto& c = model.coords[static_cast<std::size_t>(i)];
        const double e = std::sqrt(h(i)) * eps(i);
        out.s[n + 1](b, i) = out.s[n](b, i) * std::exp(c.mean + e);
        h(i) = c.omega + c.alpha * e * e + c.beta * h(i);
      }
    }
  }
  return out;
}

}  // namespace rgan
