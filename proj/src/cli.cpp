#include "mrvr/cli.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "CLI11.hpp"
#include "mrvr/baseline_mrvr.hpp"
#include "mrvr/errors.hpp"
#include "mrvr/metrics.hpp"
#include "mrvr/model_io.hpp"
#include "mrvr/simulate.hpp"

namespace mrvr {
namespace {

std::string fmt17(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::uint64_t make_seed() {
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

// one grid range: "a", "a..b", or "a..b:step"
std::vector<int> parse_range(const std::string& spec, const std::string& key) {
  const std::invalid_argument bad("benchmark: bad grid range '" + key + "=" + spec +
                                  "' (expected a, a..b, or a..b:step)");
  int lo = 0, hi = 0, step = 1;
  try {
    std::size_t pos = 0;
    lo = std::stoi(spec, &pos);
    hi = lo;
    if (pos != spec.size()) {
      if (spec.compare(pos, 2, "..") != 0) throw bad;
      const std::string rest = spec.substr(pos + 2);
      std::size_t pos2 = 0;
      hi = std::stoi(rest, &pos2);
      if (pos2 != rest.size()) {
        if (rest[pos2] != ':') throw bad;
        const std::string step_str = rest.substr(pos2 + 1);
        std::size_t pos3 = 0;
        step = std::stoi(step_str, &pos3);
        if (pos3 != step_str.size()) throw bad;
      }
    }
  } catch (const std::out_of_range&) {
    throw bad;
  } catch (const std::invalid_argument&) {
    throw bad;
  }
  if (lo < 1 || hi < lo || step < 1) throw bad;
  std::vector<int> values;
  for (int v = lo; v <= hi; v += step) values.push_back(v);
  return values;
}

std::vector<SimConfig> parse_grid(const std::string& grid,
                                  int replications,
                                  std::uint64_t seed,
                                  double width) {
  std::vector<int> vs, ns;
  std::istringstream in(grid);
  std::string part;
  while (std::getline(in, part, ';')) {
    const auto eq = part.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("benchmark: bad grid term '" + part + "'");
    const std::string key = part.substr(0, eq);
    const std::string spec = part.substr(eq + 1);
    if (key == "V")
      vs = parse_range(spec, key);
    else if (key == "N")
      ns = parse_range(spec, key);
    else
      throw std::invalid_argument("benchmark: unknown grid key '" + key + "'");
  }
  if (vs.empty() || ns.empty())
    throw std::invalid_argument("benchmark: grid must set both V and N");

  std::vector<SimConfig> cells;
  for (int v : vs) {
    for (int n : ns) {
      SimConfig cfg;
      cfg.outputs = v;
      cfg.samples = n;
      cfg.replications = replications;
      cfg.master_seed = seed;
      cfg.kernel_width = width;
      cells.push_back(cfg);
    }
  }
  return cells;
}

int run_train(const std::string& data_path,
              const std::string& method,
              double width,
              double tolerance,
              int max_iter,
              std::uint64_t seed,
              const std::string& out_path) {
  const Table table = load_table(data_path, true);
  FitOptions opts;
  opts.max_iterations = max_iter;
  opts.tolerance = tolerance;
  const KernelConfig kernel{KernelKind::Gaussian, width};

  int iterations = 0;
  int basis = 0;
  double log_marginal = 0.0;
  bool truncated = false;
  if (method == "proposed") {
    const FastModel model = fit_fast(table.inputs, *table.targets, kernel, opts);
    save_model(model, seed, out_path);
    iterations = model.iterations;
    basis = model.basis_count();
    log_marginal = model.log_marginal;
    truncated = model.truncated;
  } else {
    const BaselineModel model = fit_baseline(table.inputs, *table.targets, kernel, opts);
    save_model(model, seed, out_path);
    iterations = model.iterations;
    basis = model.basis_count();
    log_marginal = model.log_marginal;
    truncated = model.truncated;
  }

  std::cout << "method: " << method << '\n'
            << "seed: " << seed << '\n'
            << "iterations: " << iterations << (truncated ? " (hit the cap)" : "")
            << '\n'
            << "basis functions: " << basis << '\n'
            << "log marginal: " << fmt17(log_marginal) << '\n'
            << "model written to " << out_path << '\n';
  return kExitOk;
}

int run_predict(const std::string& model_path,
                const std::string& data_path,
                const std::string& out_path) {
  const LoadedModel loaded = load_model(model_path);
  const Table table = load_table(data_path, false);
  const Eigen::Index n = table.inputs.rows();

  std::ofstream out(out_path);
  if (!out) throw DataError("data file: cannot write " + out_path);

  Eigen::MatrixXd means;
  if (std::holds_alternative<FastModel>(loaded.model)) {
    const auto& model = std::get<FastModel>(loaded.model);
    const Eigen::Index v = model.omega_mp.rows();
    means.resize(n, v);
    for (Eigen::Index j = 0; j < v; ++j) out << (j ? "," : "") << "mean" << j + 1;
    for (Eigen::Index j = 0; j < v; ++j) out << ",var" << j + 1;
    for (Eigen::Index j = 0; j < v; ++j)
      for (Eigen::Index k = 0; k < v; ++k) out << ",cov_" << j + 1 << k + 1;
    out << '\n';
    for (Eigen::Index r = 0; r < n; ++r) {
      const Eigen::VectorXd x = table.inputs.row(r).transpose();
      const FastPrediction pred = predict_fast(model, x);
      means.row(r) = pred.mean;
      for (Eigen::Index j = 0; j < v; ++j) out << (j ? "," : "") << fmt17(pred.mean(j));
      for (Eigen::Index j = 0; j < v; ++j) out << ',' << fmt17(pred.cov(j, j));
      for (Eigen::Index j = 0; j < v; ++j)
        for (Eigen::Index k = 0; k < v; ++k) out << ',' << fmt17(pred.cov(j, k));
      out << '\n';
    }
  } else {
    const auto& model = std::get<BaselineModel>(loaded.model);
    const Eigen::Index v = model.sigma2_mp.size();
    means.resize(n, v);
    for (Eigen::Index j = 0; j < v; ++j) out << (j ? "," : "") << "mean" << j + 1;
    for (Eigen::Index j = 0; j < v; ++j) out << ",var" << j + 1;
    out << '\n';
    for (Eigen::Index r = 0; r < n; ++r) {
      const Eigen::VectorXd x = table.inputs.row(r).transpose();
      const BaselinePrediction pred = predict_baseline(model, x);
      means.row(r) = pred.mean;
      for (Eigen::Index j = 0; j < v; ++j) out << (j ? "," : "") << fmt17(pred.mean(j));
      for (Eigen::Index j = 0; j < v; ++j) out << ',' << fmt17(pred.var(j));
      out << '\n';
    }
  }
  if (!out) throw DataError("data file: write failure on " + out_path);

  if (table.targets && table.targets->cols() == means.cols())
    std::cout << "rmse: " << fmt17(rmse(*table.targets, means)) << '\n';
  std::cout << "predictions written to " << out_path << " (" << n << " rows)\n";
  return kExitOk;
}

int run_simulate(int outputs,
                 int samples,
                 double noise_scale,
                 std::uint64_t seed,
                 const std::string& out_path) {
  SimConfig cfg;
  cfg.outputs = outputs;
  cfg.samples = samples;
  cfg.noise_scale = noise_scale;
  cfg.master_seed = seed;
  std::mt19937_64 rng(seed);
  const TrainingSet data = sample_dataset(cfg, rng);
  write_table(out_path, data.inputs, data.targets);

  const std::string omega_path = out_path + ".omega";
  std::ofstream om(omega_path);
  if (!om) throw DataError("data file: cannot write " + omega_path);
  for (Eigen::Index c = 0; c < data.omega_true.cols(); ++c)
    om << (c ? "," : "") << "omega_" << c + 1;
  om << '\n';
  for (Eigen::Index r = 0; r < data.omega_true.rows(); ++r) {
    for (Eigen::Index c = 0; c < data.omega_true.cols(); ++c)
      om << (c ? "," : "") << fmt17(data.omega_true(r, c));
    om << '\n';
  }
  if (!om) throw DataError("data file: write failure on " + omega_path);

  std::cout << "seed: " << seed << '\n'
            << "dataset written to " << out_path << " (" << samples << " rows, "
            << outputs << " outputs)\n"
            << "noise covariance written to " << omega_path << '\n';
  return kExitOk;
}

int run_benchmark(const std::string& grid,
                  int replications,
                  std::uint64_t seed,
                  double width,
                  const std::string& out_path) {
  const auto cells = parse_grid(grid, replications, seed, width);
  const McReport report = run_mc(cells);

  std::ofstream out(out_path);
  if (!out) throw DataError("data file: cannot write " + out_path);
  write_report_csv(report, out);
  if (!out) throw DataError("data file: write failure on " + out_path);

  write_report_table(report, std::cout);
  std::cout << "seed: " << seed << '\n' << "report written to " << out_path << '\n';
  return kExitOk;
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args) {
  CLI::App app{"multi-output relevance vector regression toolkit"};
  app.require_subcommand(1);

  std::string data_path, method, model_path, out_path, grid;
  double width = 0.0;
  double tolerance = 0.1;
  double noise_scale = 1.0;
  double bench_width = 1.6;
  int max_iter = 1000;
  int outputs = 1;
  int samples = 50;
  int replications = 11;
  std::optional<std::uint64_t> seed;

  auto* train = app.add_subcommand("train", "fit a model to a CSV data file");
  train->add_option("--data", data_path, "training data (header x1..xU,t1..tV)")
      ->required();
  train->add_option("--method", method, "existing | proposed")
      ->required()
      ->check(CLI::IsMember({"existing", "proposed"}));
  train->add_option("--width", width, "Gaussian kernel width")->required();
  train->add_option("--tolerance", tolerance,
                    "convergence threshold on |delta log alpha| (default 0.1)");
  train->add_option("--max-iter", max_iter, "iteration cap (default 1000)");
  train->add_option("--seed", seed, "seed recorded in the model file");
  train->add_option("--out", out_path, "model file to write")->required();

  auto* predict = app.add_subcommand("predict", "evaluate a saved model on a data file");
  predict->add_option("--model", model_path, "model file from train")->required();
  predict->add_option("--data", data_path, "query data (header x1..xU, targets optional)")
      ->required();
  predict->add_option("--out", out_path, "prediction CSV to write")->required();

  auto* simulate = app.add_subcommand("simulate", "write a synthetic training set");
  simulate->add_option("--v", outputs, "output count")->required();
  simulate->add_option("--n", samples, "sample count")->required();
  simulate->add_option("--noise-scale", noise_scale, "noise scale (default 1)");
  simulate->add_option("--seed", seed, "master seed");
  simulate->add_option("--out", out_path, "data CSV to write (+ .omega sidecar)")
      ->required();

  auto* benchmark = app.add_subcommand("benchmark", "Monte-Carlo method comparison");
  benchmark->add_option("--grid", grid, "cells, e.g. V=1..5;N=50..300:50")->required();
  benchmark->add_option("--reps", replications, "replications per cell (default 11)");
  benchmark->add_option("--width", bench_width, "Gaussian kernel width (default 1.6)");
  benchmark->add_option("--seed", seed, "master seed");
  benchmark->add_option("--out", out_path, "report CSV to write")->required();

  try {
    app.parse(std::vector<std::string>(args.rbegin(), args.rend()));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    const std::uint64_t resolved_seed = seed ? *seed : make_seed();
    if (train->parsed())
      return run_train(data_path, method, width, tolerance, max_iter, resolved_seed,
                       out_path);
    if (predict->parsed()) return run_predict(model_path, data_path, out_path);
    if (simulate->parsed())
      return run_simulate(outputs, samples, noise_scale, resolved_seed, out_path);
    if (benchmark->parsed())
      return run_benchmark(grid, replications, resolved_seed, bench_width, out_path);
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
}

}  // namespace mrvr
