#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "mrvr/fast_mrvr.hpp"
#include "mrvr/metrics.hpp"

namespace mrvr {

enum class TrueFunction {
  SincTranslations,  // output j is sinc(x - 2(j-1)), any V >= 1
  SincPlusLinear,    // outputs {sinc(x), 0.1 x}, V == 2 only
};

struct SimConfig {
  int outputs = 1;            // V
  int samples = 50;           // N
  int input_dim = 1;          // U; built-in true functions require 1
  double kernel_width = 1.6;
  int replications = 11;
  std::uint64_t master_seed = 0;
  double x_min = -10.0;
  double x_max = 10.0;
  double noise_scale = 1.0;   // scales the sampled noise covariance
  TrueFunction variant = TrueFunction::SincTranslations;
};

struct TrainingSet {
  Eigen::MatrixXd inputs;      // N x U
  Eigen::MatrixXd targets;     // N x V, true values plus correlated noise
  Eigen::MatrixXd y_true;      // N x V
  Eigen::MatrixXd omega_true;  // V x V noise covariance used
};

// Noise-free target functions evaluated at the given inputs.
Eigen::MatrixXd true_functions(const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                               int outputs,
                               TrueFunction variant);

// Random SPD covariance Q diag(v) Q' with Q the orthogonal factor of a
// standard normal matrix and eigenvalues v log-uniform on
// [1e-2, 1e-1] * noise_scale^2. noise_scale == 0 returns the zero matrix.
Eigen::MatrixXd random_spd(int dim, double noise_scale, std::mt19937_64& rng);

// Inputs uniform on [x_min, x_max], targets from the configured true
// function plus noise rows drawn from N(0, omega_true).
TrainingSet sample_dataset(const SimConfig& cfg, std::mt19937_64& rng);

// The two-output illustrative fixture: sinc(x) and 0.1 x on [-10, 10] with
// independent noise of variance 0.01 per output.
TrainingSet fig1_dataset(int samples, std::uint64_t seed);

inline constexpr std::array<const char*, 5> kMeasureNames = {
    "runtime_seconds", "entropy_loss", "quadratic_loss", "rmse", "rv_count"};

struct MeasureSummary {
  std::string measure;
  double median_existing = 0.0;
  double median_proposed = 0.0;
  double difference = 0.0;  // existing - proposed
  double p_value = std::numeric_limits<double>::quiet_NaN();
};

struct CellResult {
  SimConfig config;
  std::vector<EvalReport> existing;  // successful replications only
  std::vector<EvalReport> proposed;
  int n_ok = 0;
  int n_failed = 0;
  bool degenerate = false;  // single replication: no p-values
  std::vector<std::string> failure_messages;
  std::array<MeasureSummary, 5> summaries;
};

struct McReport {
  std::vector<CellResult> cells;
};

struct McOptions {
  int rmse_grid_points = 1000;
  bool warmup = true;  // run one untimed fit per method before timing
  FitOptions fit;
};

// Recompute the per-measure summaries of a cell from its reports: medians per
// method, median differences (existing - proposed), and two-sided rank-sum
// p-values (left NaN when the cell is degenerate). Order-independent in the
// report vectors.
void summarize_cell(CellResult& cell);

// Monte-Carlo comparison of the two methods over a grid of configurations.
// Replication r uses an RNG seeded with master_seed XOR r; both methods see
// the same dataset. Runtime is wall time around the fit call only.
// Deterministic for a fixed grid and seeds except for the runtime fields.
McReport run_mc(const std::vector<SimConfig>& grid, const McOptions& opts = {});

// One CSV row per cell and measure:
// V,N,measure,median_existing,median_proposed,difference,p_value,n_ok,n_failed
void write_report_csv(const McReport& report, std::ostream& out);

// The same summaries as an aligned plain-text table.
void write_report_table(const McReport& report, std::ostream& out);

}  // namespace mrvr
