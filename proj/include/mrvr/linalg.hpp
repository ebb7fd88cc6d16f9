#pragma once

#include <Eigen/Dense>

namespace mrvr {

// Cholesky factorization of a symmetric positive definite matrix.
// Throws NumericalError naming the first non-positive pivot if the
// factorization fails.
Eigen::LLT<Eigen::MatrixXd> chol_pd(const Eigen::MatrixXd& m, const char* context);

// Cholesky with escalating diagonal jitter for matrices that should be PD
// but may have drifted: on failure adds 1e-10 * mean(diag) to the diagonal
// and retries, scaling the jitter by 10, at most three jittered attempts.
Eigen::LLT<Eigen::MatrixXd> chol_pd_jittered(const Eigen::MatrixXd& m, const char* context);

// Explicit inverse from an existing factorization.
Eigen::MatrixXd invert_from_llt(const Eigen::LLT<Eigen::MatrixXd>& llt);

// log|M| from its Cholesky factor.
double logdet_from_llt(const Eigen::LLT<Eigen::MatrixXd>& llt);

}  // namespace mrvr
