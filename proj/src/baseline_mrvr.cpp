#include "mrvr/baseline_mrvr.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>

#include "mrvr/errors.hpp"
#include "mrvr/linalg.hpp"

namespace mrvr {
namespace {

constexpr double kInf = kInactiveAlpha;
constexpr double kLog2Pi = 1.8378770664093453;

double promotion_guard(double alpha) { return 1e-12 * std::max(1.0, alpha); }

// multiply the ascending-coefficient polynomial p by (x + c)
void mul_linear(std::vector<double>& p, double c) {
  p.push_back(0.0);
  for (int k = static_cast<int>(p.size()) - 1; k >= 1; --k) p[k] = p[k - 1] + c * p[k];
  p[0] *= c;
}

// gradient of the summed log marginal in one basis precision, and its
// derivative; used to polish companion-matrix roots
double precision_gradient(double a, const Eigen::VectorXd& s, const Eigen::VectorXd& q) {
  double f = 0.0;
  for (int j = 0; j < s.size(); ++j) {
    const double d = a + s(j);
    f += 1.0 / a - 1.0 / d - q(j) * q(j) / (d * d);
  }
  return f;
}

double precision_gradient_deriv(double a, const Eigen::VectorXd& s, const Eigen::VectorXd& q) {
  double f = 0.0;
  for (int j = 0; j < s.size(); ++j) {
    const double d = a + s(j);
    f += -1.0 / (a * a) + 1.0 / (d * d) + 2.0 * q(j) * q(j) / (d * d * d);
  }
  return f;
}

}  // namespace

void posterior_update_j(const Eigen::MatrixXd& design_active,
                        const Eigen::VectorXd& alpha_active,
                        const Eigen::VectorXd& tau_j,
                        double sigma2_j,
                        Eigen::MatrixXd& sigma_out,
                        Eigen::VectorXd& mu_out) {
  const int m = static_cast<int>(design_active.cols());
  if (m == 0) {
    sigma_out.resize(0, 0);
    mu_out.resize(0);
    return;
  }
  if (alpha_active.size() != m)
    throw std::invalid_argument("posterior_update: alpha size must match the active design");
  if (!(sigma2_j > 0.0) || !std::isfinite(sigma2_j))
    throw std::invalid_argument("posterior_update: noise variance must be positive");
  Eigen::MatrixXd prec = design_active.transpose() * design_active / sigma2_j;
  prec.diagonal() += alpha_active;
  const auto llt = chol_pd(prec, "posterior update: weight precision");
  const Eigen::MatrixXd inv = invert_from_llt(llt);
  sigma_out = 0.5 * (inv + inv.transpose());
  mu_out = sigma_out * (design_active.transpose() * tau_j) / sigma2_j;
}

SparsityQualityJ sq_stats_j(int i,
                            int j,
                            const BaselineHyperState& state,
                            const Eigen::MatrixXd& design,
                            const Eigen::VectorXd& tau_j,
                            const Eigen::MatrixXd& projection_j) {
  if (i < 0 || i >= design.cols())
    throw std::invalid_argument("sq_stats: candidate index out of range");
  const double s2 = state.sigma2(j);
  const Eigen::VectorXd phi = design.col(i);
  SparsityQualityJ out;
  if (projection_j.size() == 0) {
    out.s_prime = phi.squaredNorm() / s2;
    out.q_prime = phi.dot(tau_j) / s2;
  } else {
    const Eigen::VectorXd pphi = projection_j * phi;
    out.s_prime = (phi.squaredNorm() - phi.dot(pphi) / s2) / s2;
    out.q_prime = (phi.dot(tau_j) - pphi.dot(tau_j) / s2) / s2;
  }
  out.s = out.s_prime;
  out.q = out.q_prime;
  const double a = state.alpha(i);
  if (std::isfinite(a)) {
    const double den = a - out.s_prime;
    if (den > promotion_guard(a)) {
      out.s = a * out.s_prime / den;
      out.q = a * out.q_prime / den;
    } else {
      out.degenerate = true;
    }
  }
  return out;
}

std::vector<double> alpha_candidates_baseline(const Eigen::VectorXd& s,
                                              const Eigen::VectorXd& q) {
  const int v = static_cast<int>(s.size());
  if (v < 1 || q.size() != s.size())
    throw std::invalid_argument("alpha_candidates: per-output statistics sizes differ");

  // stationarity condition times 2 alpha prod_k (alpha + s_k)^2; the
  // degree-2V coefficients cancel exactly, leaving degree 2V-1
  std::vector<double> full{1.0};
  for (int k = 0; k < v; ++k) {
    mul_linear(full, s(k));
    mul_linear(full, s(k));
  }
  std::vector<double> coeff(full.size(), 0.0);
  for (int j = 0; j < v; ++j) {
    for (std::size_t k = 0; k < full.size(); ++k) coeff[k] += full[k];
    std::vector<double> partial{1.0};
    for (int k = 0; k < v; ++k)
      if (k != j) {
        mul_linear(partial, s(k));
        mul_linear(partial, s(k));
      }
    std::vector<double> t2 = partial;
    mul_linear(t2, s(j));
    for (std::size_t k = 0; k < t2.size(); ++k) coeff[k + 1] -= t2[k];
    const double qq = q(j) * q(j);
    for (std::size_t k = 0; k < partial.size(); ++k) coeff[k + 1] -= qq * partial[k];
  }

  double max_abs = 0.0;
  for (double c : coeff) max_abs = std::max(max_abs, std::abs(c));
  if (max_abs == 0.0) return {};
  while (coeff.size() > 1 && std::abs(coeff.back()) <= 1e-14 * max_abs) coeff.pop_back();
  const int deg = static_cast<int>(coeff.size()) - 1;
  if (deg < 1) return {};

  std::vector<double> raw;
  if (deg == 1) {
    raw.push_back(-coeff[0] / coeff[1]);
  } else {
    Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(deg, deg);
    for (int k = 1; k < deg; ++k) comp(k, k - 1) = 1.0;
    for (int k = 0; k < deg; ++k) comp(k, deg - 1) = -coeff[k] / coeff[deg];
    const Eigen::EigenSolver<Eigen::MatrixXd> es(comp);
    if (es.info() != Eigen::Success) return {};
    for (int k = 0; k < deg; ++k) {
      const std::complex<double> ev = es.eigenvalues()(k);
      if (std::abs(ev.imag()) <= 1e-8 * std::max(1.0, std::abs(ev)) && ev.real() > 1e-12)
        raw.push_back(ev.real());
    }
  }

  std::vector<double> polished;
  for (double r : raw) {
    if (!(r > 1e-12) || !std::isfinite(r)) continue;
    for (int step = 0; step < 2; ++step) {
      const double fr = precision_gradient(r, s, q);
      const double dr = precision_gradient_deriv(r, s, q);
      if (dr == 0.0) break;
      const double cand = r - fr / dr;
      if (cand > 0.0 && std::abs(precision_gradient(cand, s, q)) < std::abs(fr))
        r = cand;
      else
        break;
    }
    polished.push_back(r);
  }
  std::sort(polished.begin(), polished.end());
  std::vector<double> out;
  for (double r : polished)
    if (out.empty() || r - out.back() > 1e-8 * std::max(std::abs(r), std::abs(out.back())))
      out.push_back(r);
  return out;
}

double delta_L_baseline(UpdateAction action,
                        const std::vector<SparsityQualityJ>& sq,
                        double alpha_old,
                        double alpha_new) {
  const bool old_finite = std::isfinite(alpha_old);
  const bool new_finite = std::isfinite(alpha_new);
  switch (action) {
    case UpdateAction::Add: {
      if (old_finite || !new_finite || !(alpha_new > 0.0))
        throw std::invalid_argument("delta_L_baseline: add requires inactive -> finite precision");
      double acc = 0.0;
      for (const auto& term : sq) {
        const double den = alpha_new + term.s;
        if (!(den > 0.0)) return -kInf;
        acc += term.q * term.q / den + std::log(alpha_new / den);
      }
      return std::isfinite(acc) ? acc : -kInf;
    }
    case UpdateAction::Reestimate: {
      if (!old_finite || !new_finite || !(alpha_new > 0.0))
        throw std::invalid_argument("delta_L_baseline: re-estimate requires finite precisions");
      if (alpha_new == alpha_old) return 0.0;
      const double d = 1.0 / alpha_new - 1.0 / alpha_old;
      if (d == 0.0) return 0.0;
      double acc = 0.0;
      for (const auto& term : sq) {
        const double arg = term.s_prime * d;
        if (arg <= -1.0) return -kInf;
        acc += term.q_prime * term.q_prime / (term.s_prime + 1.0 / d) - std::log1p(arg);
      }
      return std::isfinite(acc) ? acc : -kInf;
    }
    case UpdateAction::Delete: {
      if (!old_finite || new_finite)
        throw std::invalid_argument(
            "delta_L_baseline: delete requires finite -> inactive precision");
      double acc = 0.0;
      for (const auto& term : sq) {
        if (term.s_prime >= alpha_old) return -kInf;
        acc += term.q_prime * term.q_prime / (term.s_prime - alpha_old) -
               std::log1p(-term.s_prime / alpha_old);
      }
      return acc;
    }
  }
  throw std::invalid_argument("delta_L_baseline: unknown action");
}

double sigma2_update_j(const Eigen::VectorXd& tau_j,
                       const Eigen::MatrixXd& design_active,
                       const Eigen::VectorXd& mu_j,
                       const Eigen::VectorXd& alpha_active,
                       const Eigen::VectorXd& sigma_j_diag) {
  const int n = static_cast<int>(tau_j.size());
  const int m = static_cast<int>(design_active.cols());
  if (m == 0) return tau_j.squaredNorm() / n;
  double gamma_sum = 0.0;
  for (int k = 0; k < m; ++k) gamma_sum += 1.0 - alpha_active(k) * sigma_j_diag(k);
  const double denom = n - gamma_sum;
  if (denom <= 0.0) throw NumericalError("noise update: degenerate degrees of freedom");
  return (tau_j - design_active * mu_j).squaredNorm() / denom;
}

double log_marginal_baseline(const Eigen::MatrixXd& targets,
                             const BaselineHyperState& state,
                             const Eigen::MatrixXd& design) {
  const int n = static_cast<int>(targets.rows());
  const int v = static_cast<int>(targets.cols());
  const std::vector<int>& active = state.active_set;
  const int m = static_cast<int>(active.size());

  Eigen::MatrixXd da;
  Eigen::VectorXd aa;
  double log_alpha_sum = 0.0;
  if (m > 0) {
    da = design(Eigen::all, active);
    aa = state.alpha(active);
    log_alpha_sum = aa.array().log().sum();
  }

  double total = 0.0;
  for (int j = 0; j < v; ++j) {
    const double s2 = state.sigma2(j);
    double logdet_c = n * std::log(s2);
    double quad;
    if (m == 0) {
      quad = targets.col(j).squaredNorm() / s2;
    } else {
      // |C_j| = sigma2^N |A|^-1 |sigma2^-1 Phi'Phi + A| through the
      // determinant lemma; the quadratic form reduces to the fit residual
      Eigen::MatrixXd prec = da.transpose() * da / s2;
      prec.diagonal() += aa;
      const auto llt = chol_pd(prec, "marginal likelihood: weight precision");
      logdet_c += logdet_from_llt(llt) - log_alpha_sum;
      const Eigen::VectorXd mu = llt.solve(da.transpose() * targets.col(j)) / s2;
      quad = targets.col(j).dot(targets.col(j) - da * mu) / s2;
    }
    total += -0.5 * (n * kLog2Pi + logdet_c + quad);
  }
  return total;
}

BaselineModel fit_baseline(const Eigen::MatrixXd& inputs,
                           const Eigen::MatrixXd& targets,
                           const KernelConfig& cfg,
                           const FitOptions& opts) {
  const int n = static_cast<int>(inputs.rows());
  const int v = static_cast<int>(targets.cols());
  if (targets.rows() != n)
    throw std::invalid_argument("fit: inputs and targets must agree on the sample count");
  if (n < 2) throw std::invalid_argument("fit: at least two samples required");
  if (v < 1) throw std::invalid_argument("fit: at least one target column required");
  if (!inputs.allFinite()) throw std::invalid_argument("fit: inputs must be finite");
  if (!targets.allFinite()) throw std::invalid_argument("fit: targets must be finite");
  if (opts.max_iterations < 1)
    throw std::invalid_argument("fit: max_iterations must be positive");
  if (!(opts.tolerance > 0.0)) throw std::invalid_argument("fit: tolerance must be positive");

  const Eigen::MatrixXd design = build_design_matrix(inputs, cfg);
  const Eigen::MatrixXd gram = design.transpose() * design;
  const Eigen::MatrixXd gt = design.transpose() * targets;
  const Eigen::VectorXd gram_diag = gram.diagonal();

  const Eigen::MatrixXd centered = targets.rowwise() - targets.colwise().mean();
  Eigen::VectorXd sample_var(v);
  for (int j = 0; j < v; ++j) {
    sample_var(j) = centered.col(j).squaredNorm() / (n - 1);
    if (!(sample_var(j) > 0.0))
      throw NumericalError("fit: zero variance target column");
  }
  Eigen::VectorXd sigma2 = 0.1 * sample_var;
  const Eigen::VectorXd sigma2_floor = 1e-12 * sample_var;

  Eigen::VectorXd alpha = Eigen::VectorXd::Constant(n + 1, kInf);
  std::vector<int> active;
  std::vector<Eigen::MatrixXd> sigma_post(v, Eigen::MatrixXd(0, 0));
  std::vector<Eigen::VectorXd> mu_post(v, Eigen::VectorXd(0));
  std::vector<BaselineIterationRecord> trace;

  const auto expectation = [&]() {
    if (active.empty()) {
      for (int j = 0; j < v; ++j) {
        sigma_post[j].resize(0, 0);
        mu_post[j].resize(0);
      }
      return;
    }
    const Eigen::MatrixXd gaa = gram(active, active);
    const Eigen::VectorXd aa = alpha(active);
    const Eigen::MatrixXd gta = gt(active, Eigen::all);
    for (int j = 0; j < v; ++j) {
      Eigen::MatrixXd prec = gaa / sigma2(j);
      prec.diagonal() += aa;
      const auto llt = chol_pd(prec, "fit: weight precision");
      const Eigen::MatrixXd inv = invert_from_llt(llt);
      sigma_post[j] = 0.5 * (inv + inv.transpose());
      mu_post[j] = sigma_post[j] * gta.col(j) / sigma2(j);
    }
  };

  int iteration = 0;
  bool converged = false;
  while (!converged && iteration < opts.max_iterations) {
    ++iteration;

    // statistics of every candidate against the current per-output posteriors
    Eigen::MatrixXd s_all(n + 1, v);
    Eigen::MatrixXd q_all(n + 1, v);
    if (active.empty()) {
      for (int j = 0; j < v; ++j) {
        s_all.col(j) = gram_diag / sigma2(j);
        q_all.col(j) = gt.col(j) / sigma2(j);
      }
    } else {
      const Eigen::MatrixXd p = gram(Eigen::all, active);
      for (int j = 0; j < v; ++j) {
        const double s2 = sigma2(j);
        const Eigen::MatrixXd ps = p * sigma_post[j];
        s_all.col(j) = (gram_diag - ps.cwiseProduct(p).rowwise().sum() / s2) / s2;
        q_all.col(j) = (gt.col(j) - p * mu_post[j]) / s2;
      }
    }

    int best_i = -1;
    UpdateAction best_action = UpdateAction::Reestimate;
    double best_dl = -kInf;
    double best_alpha_new = kInf;
    bool any_addable = false;
    std::vector<SparsityQualityJ> sq(v);
    Eigen::VectorXd s_vec(v);
    Eigen::VectorXd q_vec(v);
    for (int i = 0; i <= n; ++i) {
      const double a_old = alpha(i);
      const bool is_active = std::isfinite(a_old);
      bool degenerate = false;
      for (int j = 0; j < v; ++j) {
        sq[j].s_prime = s_all(i, j);
        sq[j].q_prime = q_all(i, j);
        sq[j].s = sq[j].s_prime;
        sq[j].q = sq[j].q_prime;
        sq[j].degenerate = false;
        if (is_active) {
          const double den = a_old - sq[j].s_prime;
          if (den > promotion_guard(a_old)) {
            sq[j].s = a_old * sq[j].s_prime / den;
            sq[j].q = a_old * sq[j].q_prime / den;
          } else {
            sq[j].degenerate = true;
            degenerate = true;
          }
        }
      }

      UpdateAction action = UpdateAction::Delete;
      double a_new = kInf;
      double dl = -kInf;
      if (is_active && degenerate) {
        // promotion denominator vanished: deletion is the only defined move
        dl = delta_L_baseline(UpdateAction::Delete, sq, a_old, kInf);
      } else {
        for (int j = 0; j < v; ++j) {
          s_vec(j) = sq[j].s;
          q_vec(j) = sq[j].q;
        }
        const std::vector<double> roots = alpha_candidates_baseline(s_vec, q_vec);
        if (roots.empty()) {
          if (!is_active) continue;  // no stationary precision, nothing to add
          dl = delta_L_baseline(UpdateAction::Delete, sq, a_old, kInf);
        } else {
          if (!is_active) any_addable = true;
          action = is_active ? UpdateAction::Reestimate : UpdateAction::Add;
          const double from = is_active ? a_old : kInf;
          for (double r : roots) {
            const double cand = delta_L_baseline(action, sq, from, r);
            if (cand > dl) {
              dl = cand;
              a_new = r;
            }
          }
        }
      }

      if (dl > best_dl) {
        best_dl = dl;
        best_i = i;
        best_action = action;
        best_alpha_new = a_new;
      }
    }

    if (best_i < 0 || !std::isfinite(best_dl)) {
      if (active.empty())
        throw FitError("no informative basis function for these targets");
      throw NumericalError("fit: action selection stalled with no admissible update");
    }

    if (opts.record_trace)
      trace.push_back({alpha, sigma2, best_i, best_action, best_alpha_new, best_dl});

    if (best_action == UpdateAction::Reestimate &&
        std::abs(std::log(alpha(best_i) / best_alpha_new)) < opts.tolerance && !any_addable)
      converged = true;

    // noise re-estimate from the current posteriors, skipped on the first
    // pass; applied before the action
    if (iteration != 1) {
      const Eigen::MatrixXd da =
          active.empty() ? Eigen::MatrixXd(n, 0) : Eigen::MatrixXd(design(Eigen::all, active));
      const Eigen::VectorXd aa =
          active.empty() ? Eigen::VectorXd() : Eigen::VectorXd(alpha(active));
      for (int j = 0; j < v; ++j) {
        const Eigen::VectorXd diag =
            active.empty() ? Eigen::VectorXd() : Eigen::VectorXd(sigma_post[j].diagonal());
        const double updated = sigma2_update_j(targets.col(j), da, mu_post[j], aa, diag);
        sigma2(j) = std::max(updated, sigma2_floor(j));
      }
    }

    switch (best_action) {
      case UpdateAction::Add:
        alpha(best_i) = best_alpha_new;
        active.insert(std::upper_bound(active.begin(), active.end(), best_i), best_i);
        break;
      case UpdateAction::Reestimate:
        alpha(best_i) = best_alpha_new;
        break;
      case UpdateAction::Delete:
        alpha(best_i) = kInf;
        active.erase(std::find(active.begin(), active.end(), best_i));
        break;
    }
    expectation();
  }

  BaselineModel model;
  model.kernel = cfg;
  model.state.alpha = alpha;
  model.state.active_set = active;
  model.state.sigma2 = sigma2;
  model.posterior.sigma = sigma_post;
  model.posterior.mu = mu_post;
  model.sigma2_mp = sigma2;
  model.iterations = iteration;
  model.truncated = !converged;
  model.bias_active = !active.empty() && active.front() == 0;
  std::vector<int> kernel_rows;
  for (int idx : active)
    if (idx > 0) kernel_rows.push_back(idx - 1);
  model.rv_inputs = inputs(kernel_rows, Eigen::all);
  model.log_marginal = log_marginal_baseline(targets, model.state, design);
  model.trace = std::move(trace);
  return model;
}

BaselinePrediction predict_baseline(const BaselineModel& model,
                                    const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (model.rv_inputs.rows() > 0 && x.size() != model.rv_inputs.cols())
    throw std::invalid_argument("predict: query dimension does not match the model");
  const Eigen::VectorXd phi =
      active_basis(model.rv_inputs, model.bias_active, x, model.kernel);
  const int v = static_cast<int>(model.sigma2_mp.size());
  BaselinePrediction out;
  out.mean.resize(v);
  out.var.resize(v);
  for (int j = 0; j < v; ++j) {
    out.mean(j) = phi.dot(model.posterior.mu[j]);
    double extra = 0.0;
    if (model.posterior.sigma[j].size() > 0)
      extra = phi.dot(model.posterior.sigma[j] * phi);
    out.var(j) = model.sigma2_mp(j) + extra;
  }
  return out;
}

Eigen::MatrixXd estimate_full_covariance(const BaselineModel& model,
                                         const Eigen::MatrixXd& targets,
                                         const Eigen::MatrixXd& design_active) {
  const int n = static_cast<int>(targets.rows());
  const int v = static_cast<int>(targets.cols());
  if (n < 2) throw std::invalid_argument("covariance estimate: at least two samples required");

  Eigen::MatrixXd resid = targets;
  for (int j = 0; j < v; ++j)
    if (model.posterior.mu[j].size() > 0) resid.col(j) -= design_active * model.posterior.mu[j];
  Eigen::MatrixXd omega_tilde = resid.transpose() * resid / (n - 1);
  omega_tilde = 0.5 * (omega_tilde + omega_tilde.transpose()).eval();

  Eigen::VectorXd dtil(v);
  for (int j = 0; j < v; ++j) {
    if (!(omega_tilde(j, j) > 0.0))
      throw NumericalError("covariance estimate: degenerate residuals");
    dtil(j) = std::sqrt(omega_tilde(j, j));
  }
  const Eigen::VectorXd dhat = model.sigma2_mp.cwiseSqrt();
  Eigen::MatrixXd out(v, v);
  for (int a = 0; a < v; ++a)
    for (int b = 0; b < v; ++b)
      out(a, b) = dhat(a) * dhat(b) * omega_tilde(a, b) / (dtil(a) * dtil(b));
  return out;
}

}  // namespace mrvr
