#include "mrvr/fast_mrvr.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mrvr/errors.hpp"
#include "mrvr/linalg.hpp"

namespace mrvr {
namespace {

constexpr double kInf = kInactiveAlpha;
constexpr double kLog2Pi = 1.8378770664093453;

double quad_form(const Eigen::RowVectorXd& q, const Eigen::MatrixXd& omega_inv) {
  return (q * omega_inv).dot(q);
}

// 2 * delta log marginal for moving one candidate, all in terms of the
// primed statistics and trq = q' Omega^-1 q'^T.
double delta_add(double s_prime, double trq, int v) {
  if (!(trq > 0.0) || !(s_prime > 0.0)) return -kInf;
  const double vs = v * s_prime;
  return (trq - vs) / s_prime + v * std::log(vs / trq);
}

double delta_reest(double s_prime, double trq, double a_old, double a_new, int v) {
  const double d = 1.0 / a_new - 1.0 / a_old;
  if (d == 0.0) return 0.0;
  const double arg = s_prime * d;
  if (arg <= -1.0) return -kInf;
  const double val = trq / (s_prime + 1.0 / d) - v * std::log1p(arg);
  return std::isfinite(val) ? val : -kInf;
}

double delta_del(double s_prime, double trq, double a_old, int v) {
  if (s_prime >= a_old) return -kInf;
  return trq / (s_prime - a_old) - v * std::log1p(-s_prime / a_old);
}

double promotion_guard(double alpha) { return 1e-12 * std::max(1.0, alpha); }

}  // namespace

FastPosterior posterior_update(const Eigen::MatrixXd& design_active,
                               const Eigen::VectorXd& alpha_active,
                               const Eigen::MatrixXd& targets) {
  FastPosterior post;
  const int m = static_cast<int>(design_active.cols());
  if (m == 0) {
    post.sigma.resize(0, 0);
    post.weight_mean.resize(0, targets.cols());
    return post;
  }
  if (alpha_active.size() != m)
    throw std::invalid_argument("posterior_update: alpha size must match the active design");
  Eigen::MatrixXd prec = design_active.transpose() * design_active;
  prec.diagonal() += alpha_active;
  const auto llt = chol_pd(prec, "posterior update: weight precision");
  Eigen::MatrixXd sigma = invert_from_llt(llt);
  post.sigma = 0.5 * (sigma + sigma.transpose());
  post.weight_mean = post.sigma * (design_active.transpose() * targets);
  return post;
}

SparsityQuality sq_stats(int i,
                         const FastHyperState& state,
                         const Eigen::MatrixXd& design,
                         const Eigen::MatrixXd& targets,
                         const Eigen::MatrixXd& projection) {
  if (i < 0 || i >= design.cols())
    throw std::invalid_argument("sq_stats: candidate index out of range");
  SparsityQuality sq;
  const auto phi = design.col(i);
  if (projection.size() == 0) {
    sq.s_prime = phi.squaredNorm();
    sq.q_prime = phi.transpose() * targets;
  } else {
    const Eigen::VectorXd pphi = projection * phi;
    sq.s_prime = phi.squaredNorm() - phi.dot(pphi);
    sq.q_prime = (phi - pphi).transpose() * targets;
  }

  const double alpha = state.alpha(i);
  if (std::isfinite(alpha)) {
    const double den = alpha - sq.s_prime;
    if (den <= promotion_guard(alpha)) {
      sq.degenerate = true;
      sq.s = sq.s_prime;
      sq.q = sq.q_prime;
      sq.theta = -kInf;
      return sq;
    }
    const double f = alpha / den;
    sq.s = f * sq.s_prime;
    sq.q = f * sq.q_prime;
  } else {
    sq.s = sq.s_prime;
    sq.q = sq.q_prime;
  }
  const auto llt = chol_pd_jittered(state.omega, "candidate statistics: noise covariance");
  const Eigen::MatrixXd omega_inv = invert_from_llt(llt);
  sq.theta = quad_form(sq.q, omega_inv) / state.omega.rows() - sq.s;
  return sq;
}

double alpha_star_fast(const SparsityQuality& sq) {
  if (sq.degenerate || !(sq.theta > 0.0)) return kInactiveAlpha;
  const double a = sq.s * sq.s / sq.theta;
  return (std::isfinite(a) && a > 0.0) ? a : kInactiveAlpha;
}

double delta_L_fast(UpdateAction action,
                    const SparsityQuality& sq,
                    double alpha_old,
                    double alpha_new,
                    const Eigen::MatrixXd& omega) {
  const bool old_active = std::isfinite(alpha_old);
  const bool new_active = std::isfinite(alpha_new);
  switch (action) {
    case UpdateAction::Add:
      if (old_active || !new_active)
        throw std::invalid_argument("delta_L_fast: add requires inactive -> finite precision");
      break;
    case UpdateAction::Reestimate:
      if (!old_active || !new_active)
        throw std::invalid_argument("delta_L_fast: re-estimate requires finite precisions");
      break;
    case UpdateAction::Delete:
      if (!old_active || new_active)
        throw std::invalid_argument("delta_L_fast: delete requires finite -> inactive precision");
      break;
  }
  const int v = static_cast<int>(omega.rows());
  const auto llt = chol_pd_jittered(omega, "likelihood change: noise covariance");
  const Eigen::MatrixXd omega_inv = invert_from_llt(llt);
  const double trq = quad_form(sq.q_prime, omega_inv);
  switch (action) {
    case UpdateAction::Add:
      return delta_add(sq.s_prime, trq, v);
    case UpdateAction::Reestimate:
      return delta_reest(sq.s_prime, trq, alpha_old, alpha_new, v);
    case UpdateAction::Delete:
      return delta_del(sq.s_prime, trq, alpha_old, v);
  }
  throw std::invalid_argument("delta_L_fast: unknown action");
}

Eigen::MatrixXd omega_update(const Eigen::MatrixXd& targets,
                             const Eigen::MatrixXd& design_active,
                             const Eigen::MatrixXd& weight_mean) {
  const double n = static_cast<double>(targets.rows());
  Eigen::MatrixXd w;
  if (design_active.size() == 0 || weight_mean.size() == 0)
    w = targets.transpose() * targets / n;
  else
    w = targets.transpose() * (targets - design_active * weight_mean) / n;
  return 0.5 * (w + w.transpose());
}

double log_marginal_fast(const Eigen::MatrixXd& targets,
                         const FastHyperState& state,
                         const Eigen::MatrixXd& omega,
                         const Eigen::MatrixXd& design) {
  const int n = static_cast<int>(targets.rows());
  const int v = static_cast<int>(targets.cols());
  const auto llt_omega = chol_pd_jittered(omega, "marginal likelihood: noise covariance");
  const double logdet_omega = logdet_from_llt(llt_omega);

  double logdet_c = 0.0;
  Eigen::MatrixXd inner;
  if (state.active_set.empty()) {
    inner = targets.transpose() * targets;
  } else {
    const Eigen::MatrixXd da = design(Eigen::all, state.active_set);
    const Eigen::VectorXd aa = state.alpha(state.active_set);
    Eigen::MatrixXd prec = da.transpose() * da;
    prec.diagonal() += aa;
    const auto llt_prec = chol_pd(prec, "marginal likelihood: weight precision");
    // |I + Phi A^-1 Phi'| = |Phi'Phi + A| / |A|
    logdet_c = logdet_from_llt(llt_prec) - aa.array().log().sum();
    const Eigen::MatrixXd wmean = llt_prec.solve(da.transpose() * targets);
    inner = targets.transpose() * (targets - da * wmean);
  }
  const double trace_term = llt_omega.solve(inner).trace();
  return -0.5 * (v * n * kLog2Pi + n * logdet_omega + v * logdet_c + trace_term);
}

FastModel fit_fast(const Eigen::MatrixXd& inputs,
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
  if (opts.max_iterations < 1) throw std::invalid_argument("fit: max_iterations must be positive");
  if (!(opts.tolerance > 0.0)) throw std::invalid_argument("fit: tolerance must be positive");

  const Eigen::MatrixXd design = build_design_matrix(inputs, cfg);
  const Eigen::MatrixXd gram = design.transpose() * design;
  const Eigen::MatrixXd gt = design.transpose() * targets;
  const Eigen::VectorXd gram_diag = gram.diagonal();

  const Eigen::MatrixXd centered = targets.rowwise() - targets.colwise().mean();
  Eigen::MatrixXd omega = (0.1 / (n - 1)) * (centered.transpose() * centered);

  Eigen::VectorXd alpha = Eigen::VectorXd::Constant(n + 1, kInf);
  std::vector<int> active;
  Eigen::MatrixXd sigma(0, 0);
  Eigen::MatrixXd wmean(0, v);
  std::vector<FastIterationRecord> trace;

  const auto expectation = [&]() {
    if (active.empty()) {
      sigma.resize(0, 0);
      wmean.resize(0, v);
      return;
    }
    Eigen::MatrixXd prec = gram(active, active);
    prec.diagonal() += Eigen::VectorXd(alpha(active));
    const auto llt = chol_pd(prec, "fit: weight precision");
    const Eigen::MatrixXd inv = invert_from_llt(llt);
    sigma = 0.5 * (inv + inv.transpose());
    wmean = sigma * gt(active, Eigen::all);
  };

  int iteration = 0;
  bool converged = false;
  while (!converged && iteration < opts.max_iterations) {
    ++iteration;
    const auto llt_omega = chol_pd_jittered(omega, "fit: noise covariance");
    const Eigen::MatrixXd omega_inv = invert_from_llt(llt_omega);

    // statistics of every candidate against the current posterior
    Eigen::VectorXd s_all;
    Eigen::MatrixXd q_all;
    if (active.empty()) {
      s_all = gram_diag;
      q_all = gt;
    } else {
      const Eigen::MatrixXd p = gram(Eigen::all, active);
      const Eigen::MatrixXd ps = p * sigma;
      s_all = gram_diag - ps.cwiseProduct(p).rowwise().sum();
      q_all = gt - p * wmean;
    }

    int best_i = -1;
    UpdateAction best_action = UpdateAction::Reestimate;
    double best_dl = -kInf;
    double best_alpha_new = kInf;
    bool any_addable = false;
    for (int i = 0; i <= n; ++i) {
      const double s_p = s_all(i);
      const Eigen::RowVectorXd q_p = q_all.row(i);
      const double trq = quad_form(q_p, omega_inv);
      UpdateAction action;
      double a_new;
      double dl;
      if (!std::isfinite(alpha(i))) {
        if (!(s_p > 0.0)) continue;
        const double theta = trq / v - s_p;
        if (!(theta > 0.0)) continue;
        a_new = s_p * s_p / theta;
        if (!std::isfinite(a_new) || !(a_new > 0.0)) continue;
        any_addable = true;
        action = UpdateAction::Add;
        dl = delta_add(s_p, trq, v);
      } else {
        const double a_old = alpha(i);
        const double den = a_old - s_p;
        action = UpdateAction::Delete;
        a_new = kInf;
        if (den > promotion_guard(a_old)) {
          const double f = a_old / den;
          const double theta = f * f * trq / v - f * s_p;
          if (theta > 0.0) {
            const double cand = (f * s_p) * (f * s_p) / theta;
            if (std::isfinite(cand) && cand > 0.0) {
              action = UpdateAction::Reestimate;
              a_new = cand;
            }
          }
        }
        dl = (action == UpdateAction::Delete) ? delta_del(s_p, trq, a_old, v)
                                              : delta_reest(s_p, trq, a_old, a_new, v);
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
      trace.push_back({alpha, omega, best_i, best_action, best_alpha_new, best_dl});

    if (best_action == UpdateAction::Reestimate &&
        std::abs(std::log(alpha(best_i) / best_alpha_new)) < opts.tolerance && !any_addable)
      converged = true;

    const std::vector<int> prev_active = active;
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

    // noise covariance refit from the previous posterior, skipped on the
    // first pass
    if (iteration != 1) {
      if (prev_active.empty())
        omega = omega_update(targets, Eigen::MatrixXd(), Eigen::MatrixXd());
      else
        omega = omega_update(targets, design(Eigen::all, prev_active), wmean);
    }
    expectation();
  }

  FastModel model;
  model.kernel = cfg;
  model.state.alpha = alpha;
  model.state.active_set = active;
  model.state.omega = omega;
  model.posterior.sigma = sigma;
  model.posterior.weight_mean = wmean;
  model.omega_mp = omega;
  model.iterations = iteration;
  model.truncated = !converged;
  model.bias_active = !active.empty() && active.front() == 0;
  const int rv_count = static_cast<int>(active.size()) - (model.bias_active ? 1 : 0);
  model.rv_inputs.resize(rv_count, inputs.cols());
  int row = 0;
  for (int idx : active)
    if (idx > 0) model.rv_inputs.row(row++) = inputs.row(idx - 1);
  model.log_marginal = log_marginal_fast(targets, model.state, omega, design);
  model.trace = std::move(trace);
  return model;
}

FastPrediction predict_fast(const FastModel& model,
                            const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (model.rv_inputs.rows() > 0 && x.size() != model.rv_inputs.cols())
    throw std::invalid_argument("predict: query dimension does not match the model");
  const Eigen::VectorXd phi = active_basis(model.rv_inputs, model.bias_active, x, model.kernel);
  FastPrediction pred;
  pred.mean = phi.transpose() * model.posterior.weight_mean;
  const double mult =
      1.0 + (model.posterior.sigma.size() > 0 ? phi.dot(model.posterior.sigma * phi) : 0.0);
  pred.cov = mult * model.omega_mp;
  return pred;
}

}  // namespace mrvr
