#pragma once

#include <Eigen/Dense>

namespace mrvr {

enum class KernelKind { Gaussian };

struct KernelConfig {
  KernelKind kind = KernelKind::Gaussian;
  double width = 1.0;  // length scale, must be > 0
};

// Gaussian kernel K(x, x') = exp(-||x - x'||^2 / (2 width^2)).
// Accepts U-vectors in either orientation. Symmetric to the last bit;
// throws std::invalid_argument on size mismatch or non-positive width.
double kernel_eval(const Eigen::Ref<const Eigen::MatrixXd>& x,
                   const Eigen::Ref<const Eigen::MatrixXd>& x_prime,
                   const KernelConfig& cfg);

// N x (N+1) design matrix: column 0 is the bias (all ones), column i >= 1
// holds the kernel basis centred on training input i, i.e. entry (n, i) is
// K(x_i, x_n).
Eigen::MatrixXd build_design_matrix(const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                                    const KernelConfig& cfg);

// Basis vector at a query point over an active set: a leading 1 when the
// bias is active, then one kernel value per stored relevance-vector row.
Eigen::VectorXd active_basis(const Eigen::Ref<const Eigen::MatrixXd>& rv_inputs,
                             bool bias_active,
                             const Eigen::Ref<const Eigen::VectorXd>& x,
                             const KernelConfig& cfg);

}  // namespace mrvr
