#pragma once

#include <Eigen/Dense>
#include <limits>
#include <vector>

#include "mrvr/kernel.hpp"

namespace mrvr {

// Basis functions not in the model carry an infinite precision.
inline constexpr double kInactiveAlpha = std::numeric_limits<double>::infinity();

enum class UpdateAction { Reestimate, Add, Delete };

struct FitOptions {
  int max_iterations = 1000;
  double tolerance = 0.1;    // convergence threshold on |delta log alpha|
  bool record_trace = false; // keep per-iteration records for diagnostics
};

// Hyperparameters of the matrix-normal model: one precision per candidate
// basis (N+1 entries, bias at index 0), the sorted active set, and the
// V x V noise covariance.
struct FastHyperState {
  Eigen::VectorXd alpha;
  std::vector<int> active_set;
  Eigen::MatrixXd omega;
};

// Weight posterior over the active set.
//   sigma       = (Phi'Phi + A)^-1            (M x M)
//   weight_mean = sigma Phi'T                 (M x V)
struct FastPosterior {
  Eigen::MatrixXd sigma;
  Eigen::MatrixXd weight_mean;
};

// Sparsity/quality statistics of one candidate basis.
// Primed values are taken against the full current covariance; s, q against
// the covariance with the candidate removed. theta > 0 means the basis is
// worth keeping (alpha* finite). When `degenerate` is set the promotion
// denominator alpha - s' vanished and only s_prime/q_prime are meaningful;
// theta is forced negative so the candidate routes to deletion.
struct SparsityQuality {
  double s_prime = 0.0;
  Eigen::RowVectorXd q_prime;
  double s = 0.0;
  Eigen::RowVectorXd q;
  double theta = 0.0;
  bool degenerate = false;
};

struct FastIterationRecord {
  Eigen::VectorXd alpha_before;  // all N+1 precisions at selection time
  Eigen::MatrixXd omega;         // noise covariance used by the selection
  int candidate = -1;
  UpdateAction action = UpdateAction::Reestimate;
  double alpha_new = kInactiveAlpha;
  double delta_l2 = 0.0;         // 2 * delta log marginal of the applied action
};

struct FastModel {
  KernelConfig kernel;
  bool bias_active = false;
  Eigen::MatrixXd rv_inputs;  // training inputs of the active kernel bases
  FastHyperState state;
  FastPosterior posterior;
  Eigen::MatrixXd omega_mp;   // noise covariance at convergence
  int iterations = 0;
  bool truncated = false;     // hit max_iterations before converging
  double log_marginal = 0.0;
  std::vector<FastIterationRecord> trace;

  int basis_count() const { return static_cast<int>(state.active_set.size()); }
};

struct FastPrediction {
  Eigen::RowVectorXd mean;  // 1 x V
  Eigen::MatrixXd cov;      // V x V
};

// Weight posterior for a given active design (N x M) and its precisions.
// Throws NumericalError if Phi'Phi + A is not numerically PD.
FastPosterior posterior_update(const Eigen::MatrixXd& design_active,
                               const Eigen::VectorXd& alpha_active,
                               const Eigen::MatrixXd& targets);

// Statistics for candidate i given the current state. `projection` is
// Phi_active Sigma Phi_active' (N x N), shared across candidates within an
// iteration; pass an empty matrix when the model is empty.
SparsityQuality sq_stats(int i,
                         const FastHyperState& state,
                         const Eigen::MatrixXd& design,
                         const Eigen::MatrixXd& targets,
                         const Eigen::MatrixXd& projection);

// Stationary precision for a candidate: s^2 / theta when theta > 0,
// otherwise inactive (infinity).
double alpha_star_fast(const SparsityQuality& sq);

// 2 * change in log marginal likelihood for applying `action` to a candidate
// with statistics `sq`, moving its precision alpha_old -> alpha_new, at noise
// covariance omega. Throws std::invalid_argument on an inconsistent
// action/precision pairing.
double delta_L_fast(UpdateAction action,
                    const SparsityQuality& sq,
                    double alpha_old,
                    double alpha_new,
                    const Eigen::MatrixXd& omega);

// Noise covariance re-estimate Omega = T'(T - Phi M) / N, symmetrized.
// Pass an empty design/mean for an empty model (residual term vanishes).
Eigen::MatrixXd omega_update(const Eigen::MatrixXd& targets,
                             const Eigen::MatrixXd& design_active,
                             const Eigen::MatrixXd& weight_mean);

// Direct log marginal likelihood of the matrix-normal model at the given
// state, evaluated from the N x N covariance. O(N^3); diagnostic use.
double log_marginal_fast(const Eigen::MatrixXd& targets,
                         const FastHyperState& state,
                         const Eigen::MatrixXd& omega,
                         const Eigen::MatrixXd& design);

// Sequential fit of the matrix-normal model. inputs is N x U, targets N x V,
// N >= 2, all values finite.
FastModel fit_fast(const Eigen::MatrixXd& inputs,
                   const Eigen::MatrixXd& targets,
                   const KernelConfig& cfg,
                   const FitOptions& opts = {});

// Predictive mean and covariance at a query point.
FastPrediction predict_fast(const FastModel& model,
                            const Eigen::Ref<const Eigen::VectorXd>& x);

}  // namespace mrvr
