#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "nmm/dataset.hpp"
#include "nmm/equiv.hpp"
#include "nmm/errors.hpp"
#include "nmm/fit.hpp"
#include "nmm/io.hpp"
#include "nmm/kernel.hpp"
#include "nmm/search.hpp"
#include "nmm/sim.hpp"

namespace fs = std::filesystem;
using nmm::io::Json;

namespace {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::uint64_t seed = 0;
  double tol = nmm::FitConfig{}.tol;
  int max_cycles = nmm::FitConfig{}.max_cycles;
  std::optional<double> smoothing;
  int threads = std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
  bool force = false;
  std::string out;
};

nmm::FitConfig fit_config(const Globals& g) {
  nmm::FitConfig cfg;
  cfg.tol = g.tol;
  cfg.max_cycles = g.max_cycles;
  cfg.smoothing = g.smoothing;
  return cfg;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read '" + path + "'");
  return in;
}

Json read_json(const std::string& path) {
  auto in = open_in(path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw nmm::SchemaError(path + ": " + e.what());
  }
}

nmm::Dataset read_data(const std::string& path) {
  auto in = open_in(path);
  return nmm::read_data_csv(in);
}

/// Refuses to replace an existing file unless --force was given.
void write_file(const fs::path& path, const std::string& text, bool force) {
  if (fs::exists(path) && !force) throw IoError("'" + path.string() + "' exists (use --force to overwrite)");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

/// Prints to stdout, or writes to --out when given.
void emit(const Globals& g, const std::string& text) {
  if (g.out.empty()) {
    std::cout << text;
  } else {
    write_file(g.out, text, g.force);
  }
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nested Markov models for discrete ADMGs"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "RNG seed")->capture_default_str();
  app.add_option("--tol", g.tol, "fit convergence tolerance")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--max-cycles", g.max_cycles, "fit cycle cap")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--smoothing", g.smoothing, "pseudo-count added to every cell (simulate: only datasets with empty cells)")
      ->check(CLI::PositiveNumber);
  app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_flag("--force", g.force, "overwrite existing outputs");
  app.add_option("--out", g.out, "output file (fit, score, search, kernel) or directory (simulate, census)");

  std::string graph_path;
  std::string data_path;

  auto* fit = app.add_subcommand("fit", "fit a nested Markov model to data");
  fit->add_option("graph", graph_path, "graph JSON")->required();
  fit->add_option("data", data_path, "data CSV")->required();

  auto* score = app.add_subcommand("score", "loglik, BIC and dimension of a graph on data");
  score->add_option("graph", graph_path, "graph JSON")->required();
  score->add_option("data", data_path, "data CSV")->required();

  auto* search = app.add_subcommand("search", "BIC structure search");
  std::string start_path;
  nmm::SearchConfig scfg;
  search->add_option("data", data_path, "data CSV")->required();
  search->add_option("--start", start_path, "starting graph JSON (default: empty graph)");
  search->add_option("--max-expansions", scfg.max_expansions)->capture_default_str();
  search->add_option("--escape-steps", scfg.escape_steps)->capture_default_str();
  search->add_option("--tie-tol", scfg.tie_tol)->check(CLI::PositiveNumber)->capture_default_str();

  auto* simulate = app.add_subcommand("simulate", "recovery experiment on a latent-variable model");
  std::string model = "verma4";
  std::vector<std::size_t> sizes{500, 2500, 5000};
  std::size_t reps = 100;
  nmm::RecoveryConfig rcfg;
  simulate->add_option("--model", model, "verma4, chain5 or verma")->capture_default_str();
  simulate->add_option("--sizes", sizes, "sample sizes")->delimiter(',')->capture_default_str();
  simulate->add_option("--reps", reps, "trials per size")->capture_default_str();
  simulate->add_option("--alpha", rcfg.faithfulness.alpha, "Dirichlet concentration")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  simulate->add_option("--gap", rcfg.faithfulness.gap, "faithfulness gap")->capture_default_str();
  simulate->add_option("--escape-steps", rcfg.search.escape_steps)->capture_default_str();

  auto* census = app.add_subcommand("census", "enumerate every ADMG on n vertices");
  int census_n = 4;
  std::size_t verify = 0;
  census->add_option("-n", census_n, "vertex count")->check(CLI::Range(1, 5))->capture_default_str();
  census->add_option("--verify", verify, "saturated datasets per conjectured class (n = 4)")->capture_default_str();

  auto* kernel = app.add_subcommand("kernel", "apply a fixing sequence to a joint table");
  std::string joint_path;
  std::vector<std::string> order;
  kernel->add_option("graph", graph_path, "graph JSON")->required();
  kernel->add_option("joint", joint_path, "joint CSV (vertex columns then p)")->required();
  kernel->add_option("--order", order, "vertices to fix, in order")->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  try {
    if (*fit) {
      nmm::Admg graph = nmm::io::graph_from_json(read_json(graph_path));
      nmm::Dataset data = read_data(data_path);
      nmm::FitResult res = nmm::q_fit(graph, data, fit_config(g));
      emit(g, dump(nmm::io::to_json(res, data.total())));
    } else if (*score) {
      nmm::Admg graph = nmm::io::graph_from_json(read_json(graph_path));
      nmm::Dataset data = read_data(data_path);
      nmm::FitResult res = nmm::q_fit(graph, data, fit_config(g));
      Json j;
      j["loglik"] = res.loglik;
      j["bic"] = nmm::bic(res.loglik, res.theta.size(), data.total());
      j["dimension"] = res.theta.size();
      j["converged"] = res.converged;
      emit(g, dump(j));
    } else if (*search) {
      nmm::Dataset data = read_data(data_path);
      scfg.fit = fit_config(g);
      scfg.threads = g.threads;
      if (!start_path.empty()) scfg.start = nmm::io::graph_from_json(read_json(start_path));
      nmm::SearchResult res = nmm::tabu_search(data, scfg);
      for (const auto& line : res.log) std::cerr << "fit failed: " << line << '\n';
      emit(g, dump(nmm::io::to_json(res)));
    } else if (*simulate) {
      const fs::path dir = g.out.empty() ? fs::path(".") : fs::path(g.out);
      rcfg.search.fit = fit_config(g);
      rcfg.search.fit.smoothing.reset();  // applied per trial, only to datasets with empty cells
      if (g.smoothing) rcfg.smoothing = *g.smoothing;
      rcfg.threads = g.threads;
      const nmm::LatentDagModel skeleton = nmm::build_model(model);
      Json cpts;
      cpts["model"] = model;
      cpts["seed"] = g.seed;
      cpts["alpha"] = rcfg.faithfulness.alpha;
      cpts["gap"] = rcfg.faithfulness.gap;
      Json trials = Json::array();
      for (std::size_t t = 0; t < reps; ++t) {
        trials.push_back({{"trial", t},
                          {"cpts", nmm::io::cpt_json(nmm::trial_parameters(skeleton, t, g.seed, rcfg.faithfulness))}});
      }
      cpts["trials"] = std::move(trials);
      auto rows = nmm::recovery_experiment(model, sizes, reps, g.seed, rcfg);
      std::ostringstream csv;
      nmm::write_recovery_csv(csv, rows);
      write_file(dir / "recovery.csv", csv.str(), g.force);
      write_file(dir / ("cpts_" + model + ".json"), dump(cpts), g.force);
      std::cout << csv.str();
    } else if (*census) {
      const fs::path dir = g.out.empty() ? fs::path(".") : fs::path(g.out);
      nmm::Census c = nmm::run_census(census_n, g.threads);
      nmm::check_census(c.summary);
      Json summary = nmm::io::to_json(c.summary);
      if (verify > 0 && !c.classes.empty()) {
        auto rep = nmm::verify_classes(c.classes, verify, g.seed, 5000, fit_config(g));
        summary["verify"] = {{"datasets", verify},
                             {"fits", rep.fits},
                             {"worst_within_spread", rep.worst_within},
                             {"min_across_gap", rep.min_across}};
      }
      std::ostringstream csv;
      nmm::write_census_csv(csv, c);
      write_file(dir / "census.csv", csv.str(), g.force);
      write_file(dir / "census_summary.json", dump(summary), g.force);
      std::cout << dump(summary);
      nmm::require_census(c.summary);
    } else if (*kernel) {
      nmm::Admg graph = nmm::io::graph_from_json(read_json(graph_path));
      auto in = open_in(joint_path);
      nmm::KernelTable q = nmm::read_joint_csv(in, graph);
      std::vector<int> idx;
      for (const auto& name : order) idx.push_back(graph.index_of(name));
      nmm::KernelTable r = nmm::kernel_fix_sequence(q, idx);
      std::ostringstream csv;
      nmm::write_table_csv(csv, r.graph(), r.values(), "q");
      emit(g, csv.str());
    }
  } catch (const nmm::CensusMismatch& e) {
    std::cerr << "census mismatch: " << e.what() << '\n';
    return 3;
  } catch (const nmm::ModelError& e) {
    std::cerr << "model error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
