#include "mrvr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "mrvr/linalg.hpp"

namespace mrvr {
namespace {

// metric inputs are user-supplied estimates, so gate them with argument
// errors rather than the solver's numerical errors
Eigen::LLT<Eigen::MatrixXd> pd_or_throw(const Eigen::MatrixXd& m, const char* name) {
  if (m.rows() != m.cols() || m.rows() == 0)
    throw std::invalid_argument(std::string(name) + " must be a non-empty square matrix");
  if ((m - m.transpose()).cwiseAbs().maxCoeff() >
      1e-10 * std::max(1.0, m.cwiseAbs().maxCoeff()))
    throw std::invalid_argument(std::string(name) + " must be symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument(std::string(name) + " must be positive definite");
  return llt;
}

}  // namespace

const char* method_name(MethodTag tag) {
  return tag == MethodTag::Existing ? "existing" : "proposed";
}

double entropy_loss(const Eigen::MatrixXd& omega_true, const Eigen::MatrixXd& omega_hat) {
  const auto llt_true = pd_or_throw(omega_true, "entropy_loss: omega_true");
  const auto llt_hat = pd_or_throw(omega_hat, "entropy_loss: omega_hat");
  if (omega_hat.rows() != omega_true.rows())
    throw std::invalid_argument("entropy_loss: dimension mismatch");
  const int v = static_cast<int>(omega_true.rows());
  const double tr = llt_true.solve(omega_hat).trace();
  return tr - (logdet_from_llt(llt_hat) - logdet_from_llt(llt_true)) - v;
}

double quadratic_loss(const Eigen::MatrixXd& omega_true, const Eigen::MatrixXd& omega_hat) {
  const auto llt_true = pd_or_throw(omega_true, "quadratic_loss: omega_true");
  if (omega_hat.rows() != omega_true.rows() || omega_hat.cols() != omega_true.cols())
    throw std::invalid_argument("quadratic_loss: dimension mismatch");
  Eigen::MatrixXd s = llt_true.solve(omega_hat);
  s.diagonal().array() -= 1.0;
  return (s * s).trace();
}

double rmse(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& predicted) {
  if (truth.rows() != predicted.rows() || truth.cols() != predicted.cols())
    throw std::invalid_argument("rmse: shape mismatch");
  if (truth.size() == 0) throw std::invalid_argument("rmse: empty input");
  return std::sqrt((truth - predicted).squaredNorm() / truth.size());
}

double jarque_bera(const Eigen::Ref<const Eigen::VectorXd>& samples) {
  const int n = static_cast<int>(samples.size());
  if (n < 4) throw std::invalid_argument("jarque_bera: at least four samples required");
  const Eigen::ArrayXd d = samples.array() - samples.mean();
  const double m2 = d.square().mean();
  if (!(m2 > 0.0)) throw std::invalid_argument("jarque_bera: zero variance");
  const double m3 = d.cube().mean();
  const double m4 = d.square().square().mean();
  const double skew = m3 / std::pow(m2, 1.5);
  const double kurt = m4 / (m2 * m2);
  return n / 6.0 * (skew * skew + 0.25 * (kurt - 3.0) * (kurt - 3.0));
}

double rank_sum_pvalue(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty())
    throw std::invalid_argument("rank_sum: both samples must be non-empty");
  const std::size_t n1 = a.size();
  const std::size_t n = n1 + b.size();
  std::vector<double> pooled = a;
  pooled.insert(pooled.end(), b.begin(), b.end());

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t x, std::size_t y) { return pooled[x] < pooled[y]; });

  std::vector<double> rank(n);
  double tie_term = 0.0;
  std::size_t k = 0;
  while (k < n) {
    std::size_t k2 = k;
    while (k2 + 1 < n && pooled[order[k2 + 1]] == pooled[order[k]]) ++k2;
    const double avg = 0.5 * (static_cast<double>(k + 1) + static_cast<double>(k2 + 1));
    for (std::size_t t = k; t <= k2; ++t) rank[order[t]] = avg;
    const double tied = static_cast<double>(k2 - k + 1);
    tie_term += tied * tied * tied - tied;
    k = k2 + 1;
  }

  double w = 0.0;
  for (std::size_t i = 0; i < n1; ++i) w += rank[i];
  const double dn = static_cast<double>(n);
  const double dn1 = static_cast<double>(n1);
  const double dn2 = dn - dn1;
  const double mean = dn1 * (dn + 1.0) / 2.0;
  const double var = dn1 * dn2 / 12.0 * ((dn + 1.0) - tie_term / (dn * (dn - 1.0)));
  if (!(var > 0.0)) return 1.0;  // every pooled observation tied
  const double z = std::max(0.0, std::abs(w - mean) - 0.5) / std::sqrt(var);
  return std::erfc(z / std::sqrt(2.0));
}

}  // namespace mrvr
