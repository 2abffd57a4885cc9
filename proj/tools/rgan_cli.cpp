#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rgan/checkpoint.hpp"
#include "rgan/dataset_io.hpp"
#include "rgan/experiment.hpp"

namespace fs = std::filesystem;
using namespace rgan;

namespace {

struct Common {
  std::string preset = "sigma-1d";
  std::string config;
  std::vector<std::string> sets;
  double scale = 0.0;
  std::string out;
};

void add_common(CLI::App* sub, Common& o) {
  sub->add_option("--preset", o.preset, "named preset (see `rgan presets`)");
  sub->add_option("--config", o.config, "JSON config file; overrides the preset");
  sub->add_option("--set", o.sets, "key=value override, repeatable");
  sub->add_option("--scale", o.scale, "dataset scale factor");
  sub->add_option("--out", o.out, "output root (default $RGAN_OUTPUT_ROOT or ./rgan_out)");
}

ExperimentConfig load(const Common& o) {
  if (!o.out.empty()) setenv("RGAN_OUTPUT_ROOT", o.out.c_str(), 1);
  ExperimentConfig c;
  if (!o.config.empty()) {
    std::ifstream is(o.config);
    if (!is) throw std::runtime_error("cannot open config " + o.config);
    c = config_from_json(nlohmann::json::parse(is));
  } else {
    c = preset(o.preset);
  }
  for (const auto& s : o.sets) apply_override(c, s);
  if (o.scale > 0.0) apply_override(c, "scale=" + std::to_string(o.scale));
  return c;
}

void write_config(const ExperimentConfig& c, const std::string& dir) {
  fs::create_directories(dir);
  std::ofstream(fs::path(dir) / ("config-" + config_hash(c) + ".json")) << to_json(c).dump(2) << '\n';
}

void print_vec(std::ostream& os, const Vec& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? ";" : "") << v(i);
}

void print_summary(const RunReport& r) {
  std::cout << "strategy,E_u,E_u_se,defaults,M_u,err_rel,VaR\n";
  std::cout.precision(8);
  for (const auto& s : r.strategies) {
    std::cout << s.name << ',' << s.reference.value << ',' << s.reference.std_error << ',' << s.reference.defaults << ',';
    if (s.pool) std::cout << s.pool->min;
    std::cout << ',';
    if (s.rel_error) std::cout << s.rel_error->value;
    std::cout << ',' << s.var << '\n';
  }
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"robust utility optimization via adversarial training"};
  app.require_subcommand(1);
  Common o;

  auto* presets = app.add_subcommand("presets", "list preset names");

  auto* gen = app.add_subcommand("gen-data", "write train/val/test increments and sample paths");
  add_common(gen, o);
  std::size_t sample_paths = 20;
  gen->add_option("--sample-paths", sample_paths, "paths written to the CSV preview");

  auto* tr = app.add_subcommand("train", "train generator and discriminator");
  add_common(tr, o);
  bool fresh = false;
  tr->add_flag("--fresh", fresh, "ignore existing checkpoints");

  auto* ev = app.add_subcommand("evaluate", "evaluate the trained generator and closed-form strategies");
  add_common(ev, o);

  auto* rn = app.add_subcommand("run", "gen-data, train and evaluate");
  add_common(rn, o);
  rn->add_flag("--fresh", fresh, "ignore existing checkpoints");

  auto* gs = app.add_subcommand("grid-search", "train over a lambda grid and report M_u");
  add_common(gs, o);
  std::string l1s = "0.01,0.1,0.5,1,10,100", l2s = "0.01,0.1,0.5,1,10,100";
  gs->add_option("--lambda1", l1s, "comma separated");
  gs->add_option("--lambda2", l2s, "comma separated");

  auto* se = app.add_subcommand("solve-explicit", "print the closed-form saddle point");
  add_common(se, o);
  std::string format = "csv";
  se->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

  auto* cr = app.add_subcommand("compare-ref", "evaluate reference strategies only (cash, merton, explicit, no-trade)");
  add_common(cr, o);

  CLI11_PARSE(app, argc, argv);

  try {
    if (presets->parsed()) {
      for (const auto& n : preset_names()) std::cout << n << '\n';
      return 0;
    }
    const ExperimentConfig c = load(o);
    const std::string dir = run_dir(c);
    const std::string hash = config_hash(c);

    if (gen->parsed()) {
      const Datasets d = make_datasets(c);
      write_config(c, dir);
      write_increments((fs::path(dir) / ("train-" + hash + ".bin")).string(), d.train);
      write_increments((fs::path(dir) / ("val-" + hash + ".bin")).string(), d.val);
      write_increments((fs::path(dir) / ("test-" + hash + ".bin")).string(), d.test);
      const GanProblem pb = c.problem();
      const PathBatch p = simulate_euler(pb.grid, ConstantParams(c.drift, c.vol), c.s0, d.test);
      write_paths_csv((fs::path(dir) / ("paths-" + hash + ".csv")).string(), p, pb.grid, sample_paths);
      std::cout << dir << '\n';
    } else if (tr->parsed()) {
      write_config(c, dir);
      const Datasets d = make_datasets(c);
      TrainOptions opts;
      opts.checkpoint_dir = (fs::path(dir) / "checkpoints").string();
      opts.resume = !fresh;
      opts.on_epoch = [](const EpochRecord& r) {
        std::cerr << "epoch " << r.epoch << " gen_loss " << r.gen_loss << " val " << r.val_metric << '\n';
      };
      const TrainState st = train(c.train_config(), {d.train, d.val}, opts);
      write_metric_log((fs::path(dir) / ("metrics-" + hash + ".csv")).string(), st.history);
      std::cout << dir << '\n';
    } else if (ev->parsed()) {
      const fs::path ck = fs::path(dir) / "checkpoints" / "best_gen.bin";
      if (!fs::exists(ck)) throw std::runtime_error("no trained generator at " + ck.string() + "; run `train` first");
      const Network net = load_network(ck.string());
      const RunReport r = evaluate(c, &net, make_datasets(c));
      write_report(dir, r);
      print_summary(r);
    } else if (rn->parsed()) {
      const RunResult r = run(c, !fresh, true);
      print_summary(r.report);
      std::cout << r.dir << '\n';
    } else if (gs->parsed()) {
      const GridResult g = grid_search(c, parse_list(l1s), parse_list(l2s), true,
                                       [](const std::string& s) { std::cerr << s << '\n'; });
      std::cout << "best lambda1=" << g.lambda1[g.best_i] << " lambda2=" << g.lambda2[g.best_j]
                << " M_u=" << g.m_u(static_cast<Eigen::Index>(g.best_i), static_cast<Eigen::Index>(g.best_j)) << '\n';
      if (g.boundary_best) std::cout << "warning: best cell lies on the grid boundary\n";
    } else if (se->parsed()) {
      const auto sol = explicit_solution(c);
      if (!sol) throw std::runtime_error("no closed form for preset " + c.preset);
      std::cout.precision(12);
      if (format == "json") {
        std::cout << to_json(RunReport{hash, {}, sol, 0, 0})["explicit"].dump(2) << '\n';
      } else {
        std::cout << "field,value\npi,";
        print_vec(std::cout, sol->pi);
        std::cout << "\ndrift,";
        print_vec(std::cout, sol->drift);
        std::cout << "\ncov,";
        print_vec(std::cout, sol->cov.reshaped<Eigen::RowMajor>());
        std::cout << "\nresidual," << sol->residual << '\n';
      }
    } else if (cr->parsed()) {
      const RunReport r = evaluate(c, nullptr, make_datasets(c));
      write_report(dir, r);
      print_summary(r);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
