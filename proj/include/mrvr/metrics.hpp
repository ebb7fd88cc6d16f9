#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace mrvr {

enum class MethodTag { Existing, Proposed };

const char* method_name(MethodTag tag);

// Outcome of one fitted replication.
struct EvalReport {
  MethodTag method = MethodTag::Existing;
  std::uint64_t seed = 0;
  double runtime_seconds = 0.0;
  int iterations = 0;
  double entropy_loss = 0.0;
  double quadratic_loss = 0.0;
  double rmse = 0.0;
  int rv_count = 0;
};

// Entropy loss tr(W Wt^-1) - log|W Wt^-1| - V between a covariance estimate W
// and the truth Wt. Zero iff the estimate is exact. Both inputs must be
// symmetric positive definite (std::invalid_argument otherwise).
double entropy_loss(const Eigen::MatrixXd& omega_true, const Eigen::MatrixXd& omega_hat);

// Quadratic loss tr((W Wt^-1 - I)^2). omega_true must be PD.
double quadratic_loss(const Eigen::MatrixXd& omega_true, const Eigen::MatrixXd& omega_hat);

// Root mean squared error over all entries of two equal-shaped matrices.
double rmse(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& predicted);

// Jarque-Bera normality statistic n/6 (S^2 + (K-3)^2/4) using population
// (biased) sample moments. Requires n >= 4 and a nonzero variance.
double jarque_bera(const Eigen::Ref<const Eigen::VectorXd>& samples);

// Two-sided Wilcoxon rank-sum p-value, normal approximation with midranks,
// tie correction, and continuity correction. Requires both samples
// non-empty. Symmetric in its arguments; all ties give p = 1.
double rank_sum_pvalue(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace mrvr
