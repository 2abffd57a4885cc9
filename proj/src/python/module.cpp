#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rgan/closed_form.hpp"
#include "rgan/experiment.hpp"
#include "rgan/market_sim.hpp"

namespace py = pybind11;
using namespace rgan;

namespace {

// Configs cross the boundary as JSON text; the Python side wraps them in dicts.
ExperimentConfig parse(const std::string& text) { return config_from_json(nlohmann::json::parse(text)); }

py::dict solution_dict(const SaddleSolution& s) {
  py::dict d;
  d["pi"] = s.pi;
  d["cov"] = s.cov;
  d["drift"] = s.drift;
  d["residual"] = s.residual;
  d["iterations"] = s.iterations;
  return d;
}

py::object explicit_for(const std::string& text) {
  const auto s = explicit_solution(parse(text));
  if (!s) return py::none();
  return solution_dict(*s);
}

// Prices of `n_paths` Euler paths in the config's reference market, shaped (N+1, B, d).
py::array_t<double> simulate(const std::string& text, std::size_t n_paths, std::uint64_t seed) {
  const ExperimentConfig c = parse(text);
  const GanProblem pb = c.problem();
  PathBatch p;
  {
    py::gil_scoped_release nogil;
    p = simulate_scenario(Scenario(pb.ref), pb.grid, pb.ref.s0, n_paths, seed);
  }
  const auto N1 = static_cast<py::ssize_t>(p.s.size());
  const auto B = static_cast<py::ssize_t>(n_paths);
  const auto d = static_cast<py::ssize_t>(c.dim());
  py::array_t<double> out({N1, B, d});
  auto v = out.mutable_unchecked<3>();
  for (py::ssize_t n = 0; n < N1; ++n)
    for (py::ssize_t b = 0; b < B; ++b)
      for (py::ssize_t i = 0; i < d; ++i) v(n, b, i) = p.s[static_cast<std::size_t>(n)](b, i);
  return out;
}

std::string evaluate_reference(const std::string& text) {
  const ExperimentConfig c = parse(text);
  RunReport r;
  {
    py::gil_scoped_release nogil;
    r = evaluate(c, nullptr, make_datasets(c));
  }
  return to_json(r).dump();
}

std::string run_experiment(const std::string& text, bool fresh) {
  const ExperimentConfig c = parse(text);
  RunResult r;
  {
    py::gil_scoped_release nogil;
    r = run(c, !fresh, true);
  }
  nlohmann::json j = to_json(r.report);
  j["dir"] = r.dir;
  j["best_epoch"] = r.state.best_epoch;
  return j.dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Robust portfolio GAN core";

  m.def("preset_names", &preset_names);
  m.def("preset_json", [](const std::string& name) { return to_json(preset(name)).dump(); }, py::arg("name"));
  m.def("normalize_config", [](const std::string& text) { return to_json(parse(text)).dump(); }, py::arg("config"));
  m.def("config_hash", [](const std::string& text) { return config_hash(parse(text)); }, py::arg("config"));

  m.def("explicit_solution", &explicit_for, py::arg("config"));
  m.def("solve_1d_robust_vol",
        [](double mu, double r, double sigma, double lambda1) {
          return solution_dict(solve_1d_robust_vol(mu, r, sigma, lambda1));
        },
        py::arg("mu"), py::arg("r"), py::arg("sigma_ref"), py::arg("lambda1"));
  m.def("solve_multid_robust_vol",
        [](const Vec& mu, double r, const Mat& cov, double lambda1, const std::string& kind) {
          if (kind != "additive" && kind != "multiplicative") throw std::invalid_argument("kind: additive|multiplicative");
          return solution_dict(solve_multid_robust_vol(
              mu, r, cov, lambda1, kind == "additive" ? VolPenalty::additive : VolPenalty::multiplicative));
        },
        py::arg("mu"), py::arg("r"), py::arg("cov_ref"), py::arg("lambda1"), py::arg("kind") = "additive");
  m.def("solve_fully_robust",
        [](const Vec& mu, double r, const Mat& cov, double l1, double l2) {
          return solution_dict(solve_fully_robust(mu, r, cov, l1, l2));
        },
        py::arg("mu_ref"), py::arg("r"), py::arg("cov_ref"), py::arg("lambda1"), py::arg("lambda2"));
  m.def("merton_weight", [](const Mat& cov, const Vec& mu, double r, double p) { return merton_weight(cov, mu, r, p); },
        py::arg("cov"), py::arg("mu"), py::arg("r"), py::arg("p") = 1.0);
  m.def("no_trade_bounds",
        [](double excess, double sigma, double p, double c) {
          const NoTradeParams nt = no_trade_params(excess, sigma, p, c);
          return py::make_tuple(nt.lower(), nt.upper());
        },
        py::arg("excess_drift"), py::arg("sigma"), py::arg("p"), py::arg("c_prop"));

  m.def("simulate", &simulate, py::arg("config"), py::arg("n_paths"), py::arg("seed") = 0);
  m.def("evaluate_reference", &evaluate_reference, py::arg("config"));
  m.def("run", &run_experiment, py::arg("config"), py::arg("fresh") = false);
}
