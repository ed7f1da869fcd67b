/// mgsolve: command-line front end for the learned multigrid solver toolkit.
///
/// Subcommands: train, solve, bench, gradcheck, gen-coef. All randomness in
/// one invocation flows from --seed (or the config's seed); bench derives
/// per-row seeds as seed + row index. MGSOLVE_THREADS caps internal
/// parallelism (0 = sequential deterministic mode).
///
/// Exit codes: 0 success, 2 config error, 3 training failure,
/// 4 solve divergence, 5 gradcheck failure.

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <new>
#include <sstream>
#include <string>

#include "mgcnn/classical_mg.hpp"
#include "mgcnn/coeff_datasets.hpp"
#include "mgcnn/learned_solver.hpp"
#include "mgcnn/training.hpp"
#include "mgcnn/weights_io.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitTraining = 3;
constexpr int kExitDivergence = 4;
constexpr int kExitGradcheck = 5;

struct TrainFileConfig {
  mgcnn::TrainConfig cfg;
  std::string dist_text = "white_noise";
};

// Flat key=value config with '#' comments; unknown keys are rejected.
// Keys mirror the training-parameter table one to one.
TrainFileConfig parse_train_config(std::istream& in) {
  TrainFileConfig out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto is_space = [](unsigned char c) { return std::isspace(c); };
    line.erase(line.begin(), std::find_if_not(line.begin(), line.end(), is_space));
    line.erase(std::find_if_not(line.rbegin(), line.rend(), is_space).base(), line.end());
    if (line.empty()) continue;

    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected key=value, got '" + line + "'");
    }
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    key.erase(std::find_if_not(key.rbegin(), key.rend(), is_space).base(), key.end());
    value.erase(value.begin(), std::find_if_not(value.begin(), value.end(), is_space));

    mgcnn::TrainConfig& c = out.cfg;
    if (key == "epochs") c.epochs = std::stoi(value);
    else if (key == "num") c.batches_per_epoch = std::stoi(value);
    else if (key == "lr") c.lr = std::stod(value);
    else if (key == "step_size") c.lr_step_epochs = std::stoi(value);
    else if (key == "gamma") c.lr_gamma = std::stod(value);
    else if (key == "size_step") c.size_step = std::stoi(value);
    else if (key == "size") c.initial_size = std::stoi(value);
    else if (key == "level") c.initial_level = std::stoi(value);
    else if (key == "batch_size") c.initial_batch = std::stoi(value);
    else if (key == "max_size") c.max_size = std::stoi(value);
    else if (key == "min_batch_size") c.min_batch = std::stoi(value);
    else if (key == "re_limit") c.re_limit = std::stod(value);
    else if (key == "channels") c.channels = std::stoi(value);
    else if (key == "precision") c.precision = mgcnn::parse_precision(value);
    else if (key == "seed") c.seed = std::stoull(value);
    else if (key == "velocity_angle") c.velocity_angle = std::stod(value);
    else if (key == "coef_dist") out.dist_text = value;
    else throw std::invalid_argument("config line " + std::to_string(line_no) +
                                     ": unknown key '" + key + "'");
  }
  out.cfg.coef_distribution = mgcnn::DistributionSpec::parse(out.dist_text);
  return out;
}

void print_train_config(const TrainFileConfig& fc, std::ostream& out) {
  const mgcnn::TrainConfig& c = fc.cfg;
  out << "epochs=" << c.epochs << "\n"
      << "num=" << c.batches_per_epoch << "\n"
      << "lr=" << c.lr << "\n"
      << "step_size=" << c.lr_step_epochs << "\n"
      << "gamma=" << c.lr_gamma << "\n"
      << "size_step=" << c.size_step << "\n"
      << "size=" << c.initial_size << "\n"
      << "level=" << c.initial_level << "\n"
      << "batch_size=" << c.initial_batch << "\n"
      << "max_size=" << c.max_size << "\n"
      << "min_batch_size=" << c.min_batch << "\n"
      << "re_limit=" << c.re_limit << "\n"
      << "channels=" << c.channels << "\n"
      << "precision=" << mgcnn::to_string(c.precision) << "\n"
      << "seed=" << c.seed << "\n"
      << "velocity_angle=" << c.velocity_angle << "\n"
      << "coef_dist=" << fc.dist_text << "\n";
}

template <typename T>
mgcnn::ProblemSpec<T> make_spec(int grid, double re_limit, const mgcnn::DistributionSpec& dist,
                                std::uint64_t seed, double velocity_angle,
                                const mgcnn::CorpusCache* cache) {
  mgcnn::ProblemSpec<T> spec;
  spec.grid_n = grid;
  spec.velocity_x = std::sin(velocity_angle);
  spec.velocity_y = std::cos(velocity_angle);
  spec.re_limit = re_limit;
  mgcnn::Tensor<T> random01 = mgcnn::sample_random_tensor<T>(dist, grid, seed, cache);
  spec.coef = mgcnn::coef_from_random(random01, re_limit);
  return spec;
}

int run_train(const std::string& config_path, const std::string& weights_out,
              const std::string& history_out, bool print_only) {
  TrainFileConfig fc;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) {
      std::cerr << "error: cannot read config file: " << config_path << "\n";
      return kExitConfig;
    }
    try {
      fc = parse_train_config(in);
      fc.cfg.validate();
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitConfig;
    }
  } else {
    fc.cfg.coef_distribution = mgcnn::DistributionSpec::white_noise();
  }

  if (print_only) {
    print_train_config(fc, std::cout);
    return 0;
  }

  std::ofstream history(history_out);
  if (!history) {
    std::cerr << "error: cannot open history file: " << history_out << "\n";
    return kExitConfig;
  }
  history << "epoch,batch,loss,lr,size,level,batch_size,seconds,peak_bytes\n";
  history.precision(12);
  auto log = [&history](const mgcnn::TrainLogRow& r) {
    history << r.epoch << ',' << r.batch << ',' << r.loss << ',' << r.lr << ',' << r.size << ','
            << r.level << ',' << r.batch_size << ',' << r.seconds << ',' << r.peak_bytes << '\n';
  };

  try {
    if (fc.cfg.precision == mgcnn::Precision::kF64) {
      mgcnn::SolverWeights<double> w = mgcnn::train<double>(fc.cfg, log);
      mgcnn::save_weights(weights_out, w);
    } else {
      mgcnn::SolverWeights<float> w = mgcnn::train<float>(fc.cfg, log);
      mgcnn::save_weights(weights_out, mgcnn::cast_weights<double>(w));
    }
  } catch (const mgcnn::TrainingDiverged& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitTraining;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  std::cout << "wrote " << weights_out << " and " << history_out << "\n";
  return 0;
}

template <typename T>
int run_solve_typed(const mgcnn::SolverWeights<double>& w64, int grid, double re_limit,
                    const mgcnn::DistributionSpec& dist, double tol, std::uint64_t seed,
                    double velocity_angle, int max_iters, const std::string& out_path) {
  mgcnn::SolverWeights<T> weights = mgcnn::cast_weights<T>(w64);
  mgcnn::CorpusCache cache = mgcnn::open_corpora(dist);
  mgcnn::ProblemSpec<T> spec =
      make_spec<T>(grid, re_limit, dist, seed, velocity_angle, &cache);

  mgcnn::LearnedSolver<T> solver(weights, spec, mgcnn::level_for_grid(grid));
  auto apply_a = [&spec](const mgcnn::Tensor<T>& x) { return mgcnn::apply_operator(spec, x); };
  auto apply_b = [&solver](const mgcnn::Tensor<T>& r) { return solver.apply(r); };
  mgcnn::Tensor<T> rhs = mgcnn::Tensor<T>::constant(1, grid, grid, T(1));

  mgcnn::IterationReport report =
      mgcnn::stationary_solve<T>(apply_a, apply_b, rhs, tol, max_iters);

  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) {
      std::cerr << "error: cannot open " << out_path << "\n";
      return kExitConfig;
    }
    out = &file;
  }
  (*out) << "iteration,relative_residual\n";
  out->precision(12);
  for (std::size_t k = 0; k < report.relative_residual_history.size(); ++k) {
    (*out) << k << ',' << report.relative_residual_history[k] << '\n';
  }

  if (report.diverged) {
    std::cerr << "error: stationary iteration diverged (relative residual above 1e6)\n";
    return kExitDivergence;
  }
  std::cerr << (report.converged ? "converged" : "max iterations reached") << " after "
            << report.iterations << " iterations\n";
  return 0;
}

template <typename T>
void bench_rows(const mgcnn::SolverWeights<double>& w64, const std::vector<int>& grids,
                const std::vector<std::string>& solvers, int runs, double re_limit,
                const mgcnn::DistributionSpec& dist, double tol, std::uint64_t seed,
                double velocity_angle, int max_iters, std::ostream& out) {
  mgcnn::SolverWeights<T> weights = mgcnn::cast_weights<T>(w64);
  mgcnn::CorpusCache cache = mgcnn::open_corpora(dist);
  const std::string precision = (sizeof(T) == 4) ? "f32" : "f64";

  std::uint64_t row_index = 0;
  for (int grid : grids) {
    for (const std::string& solver_name : solvers) {
      const std::uint64_t row_seed = seed + row_index++;
      try {
        double iter_sum = 0.0, setup_sum = 0.0, solve_sum = 0.0, final_res = 0.0;
        bool all_converged = true;
        mgcnn::Rng row_rng(row_seed);
        const int level = solver_name == "gmg" ? mgcnn::gmg_levels_for_grid(grid)
                                               : mgcnn::level_for_grid(grid);
        for (int run = 0; run < runs; ++run) {
          mgcnn::ProblemSpec<T> spec =
              make_spec<T>(grid, re_limit, dist, row_rng.derive_seed(), velocity_angle, &cache);
          auto apply_a = [&spec](const mgcnn::Tensor<T>& x) {
            return mgcnn::apply_operator(spec, x);
          };
          mgcnn::Tensor<T> rhs = mgcnn::Tensor<T>::constant(1, grid, grid, T(1));

          mgcnn::IterationReport report;
          const auto setup_start = std::chrono::steady_clock::now();
          if (solver_name == "gmg") {
            mgcnn::GmgHierarchy<T> h = mgcnn::gmg_setup(spec, level);
            const double setup_s =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - setup_start)
                    .count();
            auto apply_b = [&h](const mgcnn::Tensor<T>& r) { return mgcnn::v_cycle(h, 0, r); };
            report = mgcnn::stationary_solve<T>(apply_a, apply_b, rhs, tol, max_iters);
            report.setup_seconds = setup_s;
          } else {
            mgcnn::LearnedSolver<T> solver(weights, spec, level);
            const double setup_s =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - setup_start)
                    .count();
            auto apply_b = [&solver](const mgcnn::Tensor<T>& r) { return solver.apply(r); };
            report = mgcnn::stationary_solve<T>(apply_a, apply_b, rhs, tol, max_iters);
            report.setup_seconds = setup_s;
          }
          iter_sum += report.iterations;
          setup_sum += report.setup_seconds;
          solve_sum += report.solve_seconds;
          final_res += report.relative_residual_history.back();
          all_converged &= report.converged;
        }
        out << grid << 'x' << grid << ',' << solver_name << ',' << weights.channels << ','
            << level << ',' << precision << ',' << iter_sum / runs << ',' << setup_sum / runs
            << ',' << solve_sum / runs << ',' << final_res / runs << ',' << row_seed << ','
            << (all_converged ? 1 : 0) << '\n';
        out.flush();
      } catch (const std::bad_alloc&) {
        std::cerr << "warning: out of memory on grid " << grid << " (" << solver_name
                  << "); row skipped\n";
      }
    }
  }
}

int run_gradcheck(int channels, int size, int level, std::uint64_t seed) {
  using T = double;
  mgcnn::Rng rng(seed);
  mgcnn::Tensor<T> random01(1, size, size);
  mgcnn::fill_uniform01(random01, rng);
  mgcnn::ProblemSpec<T> spec;
  spec.grid_n = size;
  spec.velocity_x = std::sin(0.5);
  spec.velocity_y = std::cos(0.5);
  spec.re_limit = 1000.0;
  spec.coef = mgcnn::coef_from_random(random01, 1000.0);
  mgcnn::Tensor<T> rhs(1, size, size);
  mgcnn::fill_normal(rhs, rng);

  mgcnn::SolverWeights<T> weights = mgcnn::init_weights<T>(channels, rng.derive_seed());
  mgcnn::SolverWeights<T> grads = mgcnn::SolverWeights<T>::zeros(channels);

  // Test-only hook: corrupt one analytic gradient entry to prove the check
  // can fail.
  const bool corrupt = std::getenv("MGSOLVE_TEST_CORRUPT_GRAD") != nullptr;

  auto loss_fn = [&](bool with_grad) {
    mgcnn::Tape<T> tape;
    mgcnn::LossGraph<T> graph = mgcnn::build_residual_loss<T>(
        tape, weights, with_grad ? &grads : nullptr, spec, rhs, level);
    if (with_grad) {
      tape.backward(graph.loss);
      if (corrupt) grads.k_down.at(0, 0, 1, 1) += 1.0;
    }
    return tape.value(graph.loss).at(0, 0, 0);
  };

  auto report = mgcnn::grad_check<T>(loss_fn, mgcnn::param_slots(weights, grads), 3e-5, 1e-5);
  std::cout << "max relative error " << report.max_rel_error << " (worst: " << report.worst_param
            << "[" << report.worst_index << "])\n";
  std::cout << (report.pass ? "PASS" : "FAIL") << "\n";
  return report.pass ? 0 : kExitGradcheck;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"learned multigrid solver toolkit"};
  app.require_subcommand(1);

  // train
  auto* train_cmd = app.add_subcommand("train", "train solver weights from a config file");
  std::string config_path, weights_out = "weights.bin", history_out = "history.csv";
  bool print_config = false;
  train_cmd->add_option("config", config_path, "key=value config file");
  train_cmd->add_option("--weights-out", weights_out, "output weight file");
  train_cmd->add_option("--history-out", history_out, "output history CSV");
  train_cmd->add_flag("--print-config", print_config, "print the effective config and exit");

  // solve
  auto* solve_cmd = app.add_subcommand("solve", "solve one random problem, emit residual history");
  std::string weights_path, dist_text = "white_noise", out_csv;
  int grid = 63, max_iters = 500;
  double re_limit = 1000.0, tol = 0.0, velocity_angle = 0.5;
  std::string precision_text = "f64";
  std::uint64_t seed = 0;
  solve_cmd->add_option("--weights", weights_path, "weight file")->required();
  solve_cmd->add_option("--grid", grid, "grid size (2^k - 1)");
  solve_cmd->add_option("--re", re_limit, "mesh-Reynolds range limit");
  solve_cmd->add_option("--dist", dist_text, "coefficient distribution");
  solve_cmd->add_option("--tol", tol, "relative residual tolerance (default 1e-8 f64, 1e-4 f32)");
  solve_cmd->add_option("--precision", precision_text, "f32 or f64");
  solve_cmd->add_option("--seed", seed, "random seed");
  solve_cmd->add_option("--max-iters", max_iters, "iteration cap");
  solve_cmd->add_option("--velocity-angle", velocity_angle, "velocity = (sin a, cos a)");
  solve_cmd->add_option("--out", out_csv, "write the per-iteration CSV here instead of stdout");

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "average iteration counts over repeated runs");
  std::string grids_text = "31,63", solvers_text = "gmg,learned", bench_out = "bench.csv";
  int runs = 10;
  bench_cmd->add_option("--weights", weights_path, "weight file (needed for the learned solver)");
  bench_cmd->add_option("--grids", grids_text, "comma-separated grid sizes");
  bench_cmd->add_option("--solvers", solvers_text, "subset of gmg,learned");
  bench_cmd->add_option("--runs", runs, "independent coefficient draws per row");
  bench_cmd->add_option("--re", re_limit, "mesh-Reynolds range limit");
  bench_cmd->add_option("--dist", dist_text, "coefficient distribution");
  bench_cmd->add_option("--tol", tol, "relative residual tolerance");
  bench_cmd->add_option("--precision", precision_text, "f32 or f64");
  bench_cmd->add_option("--seed", seed, "base seed; row i uses seed + i");
  bench_cmd->add_option("--max-iters", max_iters, "iteration cap");
  bench_cmd->add_option("--velocity-angle", velocity_angle, "velocity = (sin a, cos a)");
  bench_cmd->add_option("--out", bench_out, "output CSV");

  // gradcheck
  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference check of the training graph");
  int channels = 4, size = 15, level = 2;
  grad_cmd->add_option("--channels", channels, "hidden channels");
  grad_cmd->add_option("--size", size, "grid size (small; finite differences)");
  grad_cmd->add_option("--level", level, "hierarchy levels");
  grad_cmd->add_option("--seed", seed, "random seed");

  // gen-coef
  auto* gen_cmd = app.add_subcommand("gen-coef", "dump a coefficient sample as PGM");
  std::string gen_out = "coef.pgm";
  gen_cmd->add_option("--grid", grid, "grid size");
  gen_cmd->add_option("--dist", dist_text, "coefficient distribution");
  gen_cmd->add_option("--re", re_limit, "mesh-Reynolds range limit");
  gen_cmd->add_option("--seed", seed, "random seed");
  gen_cmd->add_option("--out", gen_out, "output PGM path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (app.got_subcommand(train_cmd)) {
      return run_train(config_path, weights_out, history_out, print_config);
    }

    if (app.got_subcommand(solve_cmd)) {
      mgcnn::Precision prec = mgcnn::parse_precision(precision_text);
      if (tol <= 0.0) tol = (prec == mgcnn::Precision::kF64) ? 1e-8 : 1e-4;
      mgcnn::DistributionSpec dist = mgcnn::DistributionSpec::parse(dist_text);
      mgcnn::SolverWeights<double> w64 = mgcnn::load_weights(weights_path);
      return prec == mgcnn::Precision::kF64
                 ? run_solve_typed<double>(w64, grid, re_limit, dist, tol, seed, velocity_angle,
                                           max_iters, out_csv)
                 : run_solve_typed<float>(w64, grid, re_limit, dist, tol, seed, velocity_angle,
                                          max_iters, out_csv);
    }

    if (app.got_subcommand(bench_cmd)) {
      mgcnn::Precision prec = mgcnn::parse_precision(precision_text);
      if (tol <= 0.0) tol = (prec == mgcnn::Precision::kF64) ? 1e-8 : 1e-4;
      mgcnn::DistributionSpec dist = mgcnn::DistributionSpec::parse(dist_text);

      std::vector<int> grids;
      std::stringstream gs(grids_text);
      std::string item;
      while (std::getline(gs, item, ',')) grids.push_back(std::stoi(item));
      std::vector<std::string> solvers;
      std::stringstream ss(solvers_text);
      while (std::getline(ss, item, ',')) {
        if (item != "gmg" && item != "learned") {
          std::cerr << "error: unknown solver '" << item << "'\n";
          return kExitConfig;
        }
        solvers.push_back(item);
      }

      mgcnn::SolverWeights<double> w64 =
          weights_path.empty() ? mgcnn::init_weights<double>(8, seed)
                               : mgcnn::load_weights(weights_path);
      std::ofstream out(bench_out);
      if (!out) {
        std::cerr << "error: cannot open " << bench_out << "\n";
        return kExitConfig;
      }
      out << "grid,solver_name,channels,level,precision,mean_iterations,setup_seconds,"
             "solve_seconds,final_relative_residual,seed,converged\n";
      out.precision(12);
      if (prec == mgcnn::Precision::kF64) {
        bench_rows<double>(w64, grids, solvers, runs, re_limit, dist, tol, seed, velocity_angle,
                           max_iters, out);
      } else {
        bench_rows<float>(w64, grids, solvers, runs, re_limit, dist, tol, seed, velocity_angle,
                          max_iters, out);
      }
      std::cout << "wrote " << bench_out << "\n";
      return 0;
    }

    if (app.got_subcommand(grad_cmd)) {
      return run_gradcheck(channels, size, level, seed);
    }

    if (app.got_subcommand(gen_cmd)) {
      mgcnn::DistributionSpec dist = mgcnn::DistributionSpec::parse(dist_text);
      mgcnn::Tensor<double> random01 = mgcnn::sample_random_tensor<double>(dist, grid, seed);
      mgcnn::Tensor<double> coef = mgcnn::coef_from_random(random01, re_limit);
      // Dump on a log10 scale; write_pgm min-max normalizes to 0..255.
      mgcnn::Tensor<double> log_coef(1, grid, grid);
      for (std::size_t i = 0; i < coef.size(); ++i) {
        log_coef.flat()[i] = std::log10(coef.flat()[i]);
      }
      mgcnn::write_pgm(gen_out, log_coef);
      std::cout << "wrote " << gen_out << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return 0;
}
