#pragma once

#include <Eigen/Dense>
#include <vector>

#include "mrvr/fast_mrvr.hpp"  // FitOptions, UpdateAction, kInactiveAlpha
#include "mrvr/kernel.hpp"

namespace mrvr {

// Hyperparameters of the per-output model: shared basis precisions plus one
// noise variance per output dimension.
struct BaselineHyperState {
  Eigen::VectorXd alpha;       // N+1 entries, bias at index 0
  std::vector<int> active_set;
  Eigen::VectorXd sigma2;      // V noise variances
};

// Per-output weight posteriors over the active set.
//   sigma[j] = (sigma2_j^-1 Phi'Phi + A)^-1
//   mu[j]    = sigma2_j^-1 sigma[j] Phi' tau_j
struct BaselinePosterior {
  std::vector<Eigen::MatrixXd> sigma;
  std::vector<Eigen::VectorXd> mu;
};

// Sparsity/quality statistics of candidate i for output j.
struct SparsityQualityJ {
  double s_prime = 0.0;
  double q_prime = 0.0;
  double s = 0.0;
  double q = 0.0;
  bool degenerate = false;  // promotion denominator vanished; delete only
};

struct BaselineIterationRecord {
  Eigen::VectorXd alpha_before;
  Eigen::VectorXd sigma2;  // noise variances used by the selection
  int candidate = -1;
  UpdateAction action = UpdateAction::Reestimate;
  double alpha_new = kInactiveAlpha;
  double delta_l2 = 0.0;
};

struct BaselineModel {
  KernelConfig kernel;
  bool bias_active = false;
  Eigen::MatrixXd rv_inputs;
  BaselineHyperState state;
  BaselinePosterior posterior;
  Eigen::VectorXd sigma2_mp;  // per-output noise variance at convergence
  int iterations = 0;
  bool truncated = false;
  double log_marginal = 0.0;
  std::vector<BaselineIterationRecord> trace;

  int basis_count() const { return static_cast<int>(state.active_set.size()); }
};

struct BaselinePrediction {
  Eigen::RowVectorXd mean;  // 1 x V
  Eigen::VectorXd var;      // V predictive variances
};

// Posterior for output j. Throws NumericalError if the precision matrix is
// not numerically PD.
void posterior_update_j(const Eigen::MatrixXd& design_active,
                        const Eigen::VectorXd& alpha_active,
                        const Eigen::VectorXd& tau_j,
                        double sigma2_j,
                        Eigen::MatrixXd& sigma_out,
                        Eigen::VectorXd& mu_out);

// Statistics for candidate i, output j. `projection_j` is
// Phi_active Sigma_j Phi_active' (N x N), empty when the model is empty.
SparsityQualityJ sq_stats_j(int i,
                            int j,
                            const BaselineHyperState& state,
                            const Eigen::MatrixXd& design,
                            const Eigen::VectorXd& tau_j,
                            const Eigen::MatrixXd& projection_j);

// Positive real stationary points of the summed per-output likelihood in one
// basis precision: roots of a polynomial of degree 2V-1 built from the
// per-output (s, q) pairs. Returned ascending, deduplicated; may be empty.
std::vector<double> alpha_candidates_baseline(const Eigen::VectorXd& s,
                                              const Eigen::VectorXd& q);

// 2 * change in summed log marginal likelihood for applying `action` with
// the per-output statistics, moving alpha_old -> alpha_new.
double delta_L_baseline(UpdateAction action,
                        const std::vector<SparsityQualityJ>& sq,
                        double alpha_old,
                        double alpha_new);

// Noise variance re-estimate for output j:
//   ||tau_j - Phi mu_j||^2 / (N - sum_i (1 - alpha_i Sigma_j_ii)).
// Throws NumericalError when the denominator is not positive. The caller is
// responsible for flooring the result.
double sigma2_update_j(const Eigen::VectorXd& tau_j,
                       const Eigen::MatrixXd& design_active,
                       const Eigen::VectorXd& mu_j,
                       const Eigen::VectorXd& alpha_active,
                       const Eigen::VectorXd& sigma_j_diag);

// Direct summed log marginal likelihood at the given state. O(V N^3).
double log_marginal_baseline(const Eigen::MatrixXd& targets,
                             const BaselineHyperState& state,
                             const Eigen::MatrixXd& design);

// Sequential fit of the per-output model.
BaselineModel fit_baseline(const Eigen::MatrixXd& inputs,
                           const Eigen::MatrixXd& targets,
                           const KernelConfig& cfg,
                           const FitOptions& opts = {});

BaselinePrediction predict_baseline(const BaselineModel& model,
                                    const Eigen::Ref<const Eigen::VectorXd>& x);

// Full covariance estimate for the per-output model: scale the residual
// correlation matrix by the per-output noise standard deviations.
// `design_active` must be the training design restricted to the active set.
// Throws NumericalError when a residual column has zero variance.
Eigen::MatrixXd estimate_full_covariance(const BaselineModel& model,
                                         const Eigen::MatrixXd& targets,
                                         const Eigen::MatrixXd& design_active);

}  // namespace mrvr
