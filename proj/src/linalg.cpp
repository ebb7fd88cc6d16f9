#include "mrvr/linalg.hpp"

#include <cmath>
#include <string>

#include "mrvr/errors.hpp"

namespace mrvr {

namespace {

// Plain right-looking Cholesky on a copy, just to name the pivot that
// breaks. Only runs on the error path.
int failing_pivot(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd a = m;
  const int n = static_cast<int>(a.rows());
  for (int k = 0; k < n; ++k) {
    const double d = a(k, k);
    if (!(d > 0.0) || !std::isfinite(d)) return k;
    const double root = std::sqrt(d);
    for (int i = k + 1; i < n; ++i) a(i, k) /= root;
    for (int j = k + 1; j < n; ++j)
      for (int i = j; i < n; ++i) a(i, j) -= a(i, k) * a(j, k);
  }
  return n - 1;
}

}  // namespace

Eigen::LLT<Eigen::MatrixXd> chol_pd(const Eigen::MatrixXd& m, const char* context) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) {
    throw NumericalError(std::string(context) + ": matrix not positive definite (pivot " +
                         std::to_string(failing_pivot(m)) + ")");
  }
  return llt;
}

Eigen::LLT<Eigen::MatrixXd> chol_pd_jittered(const Eigen::MatrixXd& m, const char* context) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() == Eigen::Success) return llt;
  double jitter = 1e-10 * m.trace() / static_cast<double>(m.rows());
  for (int attempt = 0; attempt < 3; ++attempt, jitter *= 10.0) {
    Eigen::MatrixXd bumped = m;
    bumped.diagonal().array() += jitter;
    llt.compute(bumped);
    if (llt.info() == Eigen::Success) return llt;
  }
  throw NumericalError(std::string(context) +
                       ": matrix not positive definite after jitter escalation (pivot " +
                       std::to_string(failing_pivot(m)) + ")");
}

Eigen::MatrixXd invert_from_llt(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  const auto n = llt.matrixL().rows();
  return llt.solve(Eigen::MatrixXd::Identity(n, n));
}

double logdet_from_llt(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

}  // namespace mrvr
