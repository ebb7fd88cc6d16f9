#include "mrvr/kernel.hpp"

#include <cmath>
#include <stdexcept>

namespace mrvr {

double kernel_eval(const Eigen::Ref<const Eigen::MatrixXd>& x,
                   const Eigen::Ref<const Eigen::MatrixXd>& x_prime,
                   const KernelConfig& cfg) {
  if (x.rows() != 1 && x.cols() != 1)
    throw std::invalid_argument("kernel_eval: x is not a vector");
  if (x_prime.rows() != 1 && x_prime.cols() != 1)
    throw std::invalid_argument("kernel_eval: x' is not a vector");
  if (x.size() != x_prime.size())
    throw std::invalid_argument("kernel_eval: input dimensions differ");
  if (!(cfg.width > 0.0))
    throw std::invalid_argument("kernel_eval: kernel width must be positive");
  const double d2 = (x.reshaped() - x_prime.reshaped()).squaredNorm();
  return std::exp(-d2 / (2.0 * cfg.width * cfg.width));
}

Eigen::MatrixXd build_design_matrix(const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                                    const KernelConfig& cfg) {
  const auto n = inputs.rows();
  if (n < 1) throw std::invalid_argument("build_design_matrix: need at least one sample");
  if (!(cfg.width > 0.0))
    throw std::invalid_argument("build_design_matrix: kernel width must be positive");
  Eigen::MatrixXd design(n, n + 1);
  design.col(0).setOnes();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index row = 0; row < n; ++row)
      design(row, i + 1) = kernel_eval(inputs.row(i), inputs.row(row), cfg);
  return design;
}

Eigen::VectorXd active_basis(const Eigen::Ref<const Eigen::MatrixXd>& rv_inputs,
                             bool bias_active,
                             const Eigen::Ref<const Eigen::VectorXd>& x,
                             const KernelConfig& cfg) {
  const auto m = rv_inputs.rows();
  Eigen::VectorXd phi(m + (bias_active ? 1 : 0));
  Eigen::Index k = 0;
  if (bias_active) phi(k++) = 1.0;
  for (Eigen::Index i = 0; i < m; ++i) phi(k++) = kernel_eval(rv_inputs.row(i), x, cfg);
  return phi;
}

}  // namespace mrvr
