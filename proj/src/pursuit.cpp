#include "mlsc/pursuit.hpp"

#include "mlsc/metrics.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mlsc {

VectorXd hard_threshold(const VectorXd& v, int s) {
  if (s < 0 || s > v.size())
    throw std::invalid_argument("hard_threshold: s outside [0, len]");
  std::vector<int> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return std::abs(v[a]) > std::abs(v[b]);  // stable: ties keep the lower index
  });
  VectorXd out = VectorXd::Zero(v.size());
  for (int t = 0; t < s; ++t) out[order[t]] = v[order[t]];
  return out;
}

VectorXd soft_threshold(const VectorXd& v, double t) {
  return v.unaryExpr([t](double x) {
    if (x > t) return x - t;
    if (x < -t) return x + t;
    return 0.0;
  });
}

namespace {

// Precomputed pieces of 0.5 ||D g - y||^2: Gram, D'y, ||y||^2, and a step
// bound. Shared across the many solves of a bisection sweep.
struct QuadraticForm {
  MatrixXd gram;
  VectorXd dty;
  double y_sq = 0.0;
  double lip = 1.0;

  static QuadraticForm build(const MatrixXd& d, const VectorXd& y) {
    QuadraticForm q;
    q.gram = d.transpose() * d;
    q.dty = d.transpose() * y;
    q.y_sq = y.squaredNorm();
    // lambda_max(D'D) by power iteration, padded a little for a safe step.
    VectorXd v = VectorXd::Ones(q.gram.cols());
    v.normalize();
    double lam = 0.0;
    for (int it = 0; it < 100; ++it) {
      VectorXd w = q.gram * v;
      const double nrm = w.norm();
      if (nrm == 0.0) {
        lam = 1.0;
        break;
      }
      w /= nrm;
      const bool settled = std::abs(nrm - lam) <= 1e-12 * nrm;
      lam = nrm;
      v = w;
      if (settled && it >= 8) break;
    }
    q.lip = std::max(lam, 1e-300) * 1.01;
    return q;
  }

  double residual_sq(const VectorXd& g) const {
    return std::max(0.0, g.dot(gram * g) - 2.0 * dty.dot(g) + y_sq);
  }
};

double kkt_violation(const VectorXd& grad, const VectorXd& gamma, double eta) {
  double viol = 0.0;
  for (Eigen::Index j = 0; j < gamma.size(); ++j) {
    if (gamma[j] != 0.0) {
      viol = std::max(viol, std::abs(grad[j] + eta * (gamma[j] > 0 ? 1.0 : -1.0)));
    } else {
      viol = std::max(viol, std::max(0.0, std::abs(grad[j]) - eta));
    }
  }
  return viol;
}

LassoResult fista(const QuadraticForm& q, double eta, const SolverParams& params,
                  const VectorXd* warm_start) {
  const double tol = params.lasso_tol * std::max(1.0, q.dty.cwiseAbs().maxCoeff());
  LassoResult res;
  VectorXd gamma = warm_start ? *warm_start : VectorXd::Zero(q.gram.cols());
  VectorXd z = gamma;
  double t = 1.0;
  for (int it = 1; it <= params.max_iters; ++it) {
    const VectorXd grad_z = q.gram * z - q.dty;
    VectorXd gamma_new = soft_threshold(z - grad_z / q.lip, eta / q.lip);
    // Adaptive restart: drop momentum when it points against descent.
    if ((z - gamma_new).dot(gamma_new - gamma) > 0.0) {
      t = 1.0;
      z = gamma;
      continue;
    }
    const double t_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    z = gamma_new + ((t - 1.0) / t_new) * (gamma_new - gamma);
    gamma = gamma_new;
    t = t_new;
    res.iters = it;
    res.kkt_residual = kkt_violation(q.gram * gamma - q.dty, gamma, eta);
    if (res.kkt_residual <= tol) {
      res.gamma = gamma;
      res.status = SolveStatus::Converged;
      return res;
    }
  }
  res.gamma = gamma;
  res.status = SolveStatus::MaxIters;
  return res;
}

}  // namespace

LassoResult lasso(const MatrixXd& d, const VectorXd& y, const SolverParams& params,
                  const VectorXd* warm_start) {
  if (d.rows() != y.size()) throw std::invalid_argument("lasso: dimension mismatch");
  return fista(QuadraticForm::build(d, y), params.eta, params, warm_start);
}

BudgetLassoResult lasso_l1_budget(const MatrixXd& d, const VectorXd& y, double budget,
                                  const SolverParams& params, int bisection_steps) {
  if (budget < 0) throw std::invalid_argument("lasso_l1_budget: negative budget");
  const QuadraticForm q = QuadraticForm::build(d, y);
  BudgetLassoResult out;

  LassoResult ls = fista(q, 0.0, params, nullptr);
  ++out.solves;
  if (ls.gamma.lpNorm<1>() <= budget) {  // constraint inactive
    out.gamma = ls.gamma;
    out.eta = 0.0;
    out.status = ls.status;
    return out;
  }

  double lo = 0.0;  // l1(lo) >= budget
  double hi = std::max(1e-300, q.dty.cwiseAbs().maxCoeff());  // solution 0
  VectorXd warm = ls.gamma;
  VectorXd best = VectorXd::Zero(d.cols());
  double best_eta = hi;
  SolveStatus status = SolveStatus::Converged;
  for (int step = 0; step < bisection_steps; ++step) {
    const double eta = 0.5 * (lo + hi);
    LassoResult r = fista(q, eta, params, &warm);
    ++out.solves;
    warm = r.gamma;
    if (r.status == SolveStatus::MaxIters) status = SolveStatus::MaxIters;
    if (r.gamma.lpNorm<1>() >= budget) {
      lo = eta;
    } else {
      hi = eta;
      best = r.gamma;
      best_eta = eta;
    }
  }
  out.gamma = best;
  out.eta = best_eta;
  out.status = status;
  return out;
}

EtaSelection select_eta_by_residual(const MatrixXd& d, const VectorXd& y, double target_sq,
                                    const SolverParams& params, int steps) {
  const QuadraticForm q = QuadraticForm::build(d, y);
  EtaSelection sel;
  const double scale = q.dty.cwiseAbs().maxCoeff();
  if (scale == 0.0) {
    sel.gamma = VectorXd::Zero(d.cols());
    return sel;
  }
  if (target_sq <= 0.0) {
    sel.gamma = fista(q, 0.0, params, nullptr).gamma;
    sel.solves = 1;
    return sel;
  }
  if (q.y_sq <= target_sq) {  // the zero vector already fits
    sel.eta = scale;
    sel.gamma = VectorXd::Zero(d.cols());
    return sel;
  }

  double lo = std::log(scale * 1e-10);
  double hi = std::log(scale);
  LassoResult r = fista(q, std::exp(lo), params, nullptr);
  ++sel.solves;
  VectorXd warm = r.gamma;
  if (q.residual_sq(r.gamma) > target_sq) {
    // Even a vanishing penalty cannot meet the target; fall back to eta = 0.
    sel.gamma = fista(q, 0.0, params, &warm).gamma;
    ++sel.solves;
    sel.eta = 0.0;
    return sel;
  }
  sel.eta = std::exp(lo);
  sel.gamma = r.gamma;
  for (int step = 0; step < steps; ++step) {
    const double mid = 0.5 * (lo + hi);
    r = fista(q, std::exp(mid), params, &warm);
    ++sel.solves;
    warm = r.gamma;
    if (q.residual_sq(r.gamma) <= target_sq) {
      lo = mid;
      sel.eta = std::exp(mid);
      sel.gamma = r.gamma;
    } else {
      hi = mid;
    }
  }
  return sel;
}

AdmmResult constrained_lasso_admm(const MatrixXd& deff, const VectorXd& y,
                                  const MatrixXd& kernel, const SolverParams& params,
                                  const AdmmWarmStart* warm) {
  if (deff.cols() != kernel.rows())
    throw std::invalid_argument("constrained_lasso_admm: cols(Deff) != rows(K)");
  if (kernel.cols() == 0)
    throw std::invalid_argument("constrained_lasso_admm: empty kernel basis");
  if (params.rho <= 0) throw std::invalid_argument("constrained_lasso_admm: rho <= 0");
  const Eigen::Index m = kernel.rows();
  const Eigen::Index dim = kernel.cols();

  const MatrixXd me = deff * kernel;
  const MatrixXd sys = me.transpose() * me + params.rho * MatrixXd::Identity(dim, dim);
  const Eigen::LLT<MatrixXd> chol(sys);
  const VectorXd mty = me.transpose() * y;

  AdmmResult res;
  res.alpha = warm ? warm->alpha : VectorXd::Zero(dim);
  res.split_gamma = warm ? warm->split_gamma : VectorXd(kernel * res.alpha);
  res.dual_u = warm ? warm->dual_u : VectorXd::Zero(m);
  if (res.alpha.size() != dim || res.split_gamma.size() != m || res.dual_u.size() != m)
    throw std::invalid_argument("constrained_lasso_admm: warm start dimension mismatch");

  VectorXd k_alpha = kernel * res.alpha;
  res.status = SolveStatus::MaxIters;
  for (int it = 1; it <= params.max_iters; ++it) {
    const VectorXd prev_split = res.split_gamma;
    res.split_gamma = soft_threshold(k_alpha + res.dual_u, params.eta / params.rho);
    res.alpha = chol.solve(mty + params.rho * (kernel.transpose() * (res.split_gamma - res.dual_u)));
    k_alpha = kernel * res.alpha;
    const VectorXd r = k_alpha - res.split_gamma;
    res.dual_u += params.rho * r;
    res.iters = it;
    res.primal_residual = r.norm();
    res.dual_residual = params.rho * (kernel.transpose() * (res.split_gamma - prev_split)).norm();
    if (res.primal_residual <= params.tol_primal && res.dual_residual <= params.tol_dual) {
      res.status = SolveStatus::Converged;
      break;
    }
  }
  res.gamma_k = k_alpha;
  return res;
}

PursuitResult stack_from_deepest(const MultiLayerModel& model, const VectorXd& gamma_k,
                                 double eta_used, SolveStatus status) {
  const auto prods = suffix_products(model);
  PursuitResult out;
  out.status = status;
  out.eta_used = eta_used;
  out.stack.gammas.resize(model.depth());
  out.stack.gammas.back() = gamma_k;
  for (int i = model.depth() - 1; i >= 1; --i)
    out.stack.gammas[i - 1] = prods[i - 1] * gamma_k;
  out.stack.x = model.layer(1).mat() * out.stack.gammas[0];
  out.chain_residuals = validate_stack(model, out.stack, 0.0).residuals;
  return out;
}

PursuitResult layered_pursuit_thresholding(const MultiLayerModel& model, const VectorXd& y,
                                           const std::vector<int>& sparsities) {
  if (static_cast<int>(sparsities.size()) != model.depth())
    throw std::invalid_argument("layered_pursuit: need one sparsity per layer");
  PursuitResult out;
  out.stack.x = y;
  VectorXd prev = y;
  for (int i = 1; i <= model.depth(); ++i) {
    VectorXd g = hard_threshold(model.layer(i).mat().transpose() * prev, sparsities[i - 1]);
    out.stack.gammas.push_back(g);
    prev = g;
  }
  out.chain_residuals = validate_stack(model, out.stack, 0.0).residuals;
  return out;
}

PursuitResult layered_pursuit_bp(const MultiLayerModel& model, const VectorXd& y,
                                 const std::vector<double>& l1_budgets,
                                 const SolverParams& params) {
  if (static_cast<int>(l1_budgets.size()) != model.depth())
    throw std::invalid_argument("layered_pursuit: need one budget per layer");
  PursuitResult out;
  out.stack.x = y;
  VectorXd prev = y;
  for (int i = 1; i <= model.depth(); ++i) {
    BudgetLassoResult r = lasso_l1_budget(model.layer(i).mat(), prev, l1_budgets[i - 1], params);
    if (r.status == SolveStatus::MaxIters) out.status = SolveStatus::MaxIters;
    out.stack.gammas.push_back(r.gamma);
    prev = r.gamma;
  }
  out.chain_residuals = validate_stack(model, out.stack, 0.0).residuals;
  return out;
}

PursuitResult projection_pursuit_thresholding(const MultiLayerModel& model, const VectorXd& y,
                                              int deep_sparsity) {
  const MatrixXd deff = full_effective_dictionary(model).mat();
  VectorXd gk = hard_threshold(deff.transpose() * y, deep_sparsity);
  return stack_from_deepest(model, gk);
}

PursuitResult projection_pursuit_bp(const MultiLayerModel& model, const VectorXd& y,
                                    double l1_budget, const SolverParams& params) {
  const MatrixXd deff = full_effective_dictionary(model).mat();
  BudgetLassoResult r = lasso_l1_budget(deff, y, l1_budget, params);
  return stack_from_deepest(model, r.gamma, r.eta, r.status);
}

PursuitResult projection_pursuit_bp_penalized(const MultiLayerModel& model, const VectorXd& y,
                                              const SolverParams& params) {
  const MatrixXd deff = full_effective_dictionary(model).mat();
  LassoResult r = lasso(deff, y, params);
  return stack_from_deepest(model, r.gamma, params.eta, r.status);
}

double layer_selection_score(const LayerSelectionState& s) {
  const int remaining = s.cosparsity - s.found;
  if (remaining <= 0) throw std::invalid_argument("layer_selection_score: layer complete");
  const double penalty =
      (1.0 + s.mu_row * (remaining - 1)) / std::sqrt(static_cast<double>(remaining));
  return s.gamma_min / (1.0 + penalty);
}

int choose_layer(const std::vector<LayerSelectionState>& states) {
  int best = -1;
  double best_score = 0.0;
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (states[i].found >= states[i].cosparsity) continue;
    const double score = layer_selection_score(states[i]);
    if (best < 0 || score > best_score) {
      best = static_cast<int>(i) + 1;
      best_score = score;
    }
  }
  if (best < 0) throw std::runtime_error("choose_layer: co-support complete");
  return best;
}

PursuitResult holistic_pursuit(const MultiLayerModel& model, const VectorXd& y,
                               const HolisticOptions& options) {
  const int k = model.depth();
  const int mk = model.layer_dim(k);
  const MatrixXd deff = full_effective_dictionary(model).mat();
  const auto prods = suffix_products(model);

  int ell_tot = 0;
  std::vector<LayerSelectionState> states(k - 1);
  if (!options.unknown_ell) {
    if (static_cast<int>(options.cosparsities.size()) != k - 1)
      throw std::invalid_argument("holistic_pursuit: need ell_i per mid-layer");
    if (!options.gamma_mins.empty() &&
        static_cast<int>(options.gamma_mins.size()) != k - 1)
      throw std::invalid_argument("holistic_pursuit: gamma_mins size mismatch");
    for (int i = 1; i < k; ++i) {
      states[i - 1].cosparsity = options.cosparsities[i - 1];
      states[i - 1].gamma_min =
          options.gamma_mins.empty() ? 1.0 : options.gamma_mins[i - 1];
      states[i - 1].mu_row = prods[i - 1].rows() >= 2
                                 ? row_mutual_coherence(Dictionary(prods[i - 1]))
                                 : 0.0;
      ell_tot += options.cosparsities[i - 1];
    }
  } else if (options.total_cosparsity <= 0 && options.residual_stop <= 0.0) {
    throw std::invalid_argument("holistic_pursuit: unknown-ell mode needs a stop rule");
  }

  PursuitResult out;
  std::vector<IndexSet> found(k - 1);
  MatrixXd phi_rows(0, mk);
  MatrixXd kernel = MatrixXd::Identity(mk, mk);
  AdmmWarmStart warm;
  bool have_warm = false;
  bool hit_max_iters = false;
  VectorXd gamma_k = VectorXd::Zero(mk);

  int total_found = 0;
  while (true) {
    const bool more =
        options.unknown_ell
            ? (options.total_cosparsity <= 0 || total_found < options.total_cosparsity)
            : total_found < ell_tot;
    if (!more) break;

    AdmmResult est = constrained_lasso_admm(deff, y, kernel, options.solver,
                                            have_warm ? &warm : nullptr);
    if (est.status == SolveStatus::MaxIters) hit_max_iters = true;
    gamma_k = est.gamma_k;
    const double residual = (y - deff * gamma_k).norm();
    if (options.unknown_ell && options.residual_stop > 0.0 && residual <= options.residual_stop)
      break;

    // Pick the (layer, row) to declare as a new co-support element.
    int g = 0, j = 0;
    if (!options.unknown_ell) {
      g = choose_layer(states);
      double best = std::numeric_limits<double>::infinity();
      const IndexSet& taken = found[g - 1];
      for (int p = 1; p <= model.layer_dim(g); ++p) {
        if (std::binary_search(taken.begin(), taken.end(), p)) continue;
        const double v = std::abs(prods[g - 1].row(p - 1).dot(gamma_k));
        if (v < best) {
          best = v;
          j = p;
        }
      }
    } else {
      double best = std::numeric_limits<double>::infinity();
      for (int i = 1; i < k; ++i) {
        const IndexSet& taken = found[i - 1];
        for (int p = 1; p <= model.layer_dim(i); ++p) {
          if (std::binary_search(taken.begin(), taken.end(), p)) continue;
          const double v = std::abs(prods[i - 1].row(p - 1).dot(gamma_k));
          if (v < best) {
            best = v;
            g = i;
            j = p;
          }
        }
      }
      if (g == 0) break;  // every row consumed
    }

    found[g - 1].insert(std::upper_bound(found[g - 1].begin(), found[g - 1].end(), j), j);
    if (!options.unknown_ell) ++states[g - 1].found;
    ++total_found;
    phi_rows.conservativeResize(phi_rows.rows() + 1, Eigen::NoChange);
    phi_rows.row(phi_rows.rows() - 1) = prods[g - 1].row(j - 1);

    out.log.push_back({total_found, g, j, residual});
    KernelBasis kb = orthonormal_kernel(phi_rows, mk);
    kernel = std::move(kb.basis);
    out.kernel_dims.push_back(static_cast<int>(kernel.cols()));
    if (kernel.cols() == 0) {
      out.status = SolveStatus::Infeasible;
      out.cosupports_found = std::move(found);
      PursuitResult partial = stack_from_deepest(model, gamma_k, options.solver.eta,
                                                  SolveStatus::Infeasible);
      partial.log = std::move(out.log);
      partial.kernel_dims = std::move(out.kernel_dims);
      partial.cosupports_found = std::move(out.cosupports_found);
      return partial;
    }

    warm.alpha = kernel.transpose() * gamma_k;
    warm.split_gamma = est.split_gamma;
    warm.dual_u = est.dual_u;
    have_warm = true;
  }

  AdmmResult final_est = constrained_lasso_admm(deff, y, kernel, options.solver,
                                                have_warm ? &warm : nullptr);
  if (final_est.status == SolveStatus::MaxIters) hit_max_iters = true;
  gamma_k = final_est.gamma_k;
  if (options.final_hard_threshold)
    gamma_k = hard_threshold(gamma_k, *options.final_hard_threshold);

  PursuitResult result = stack_from_deepest(
      model, gamma_k, options.solver.eta,
      hit_max_iters ? SolveStatus::MaxIters : SolveStatus::Converged);
  result.log = std::move(out.log);
  result.kernel_dims = std::move(out.kernel_dims);
  result.cosupports_found = std::move(found);
  return result;
}

RecoveryScore score_recovery(const PursuitResult& result, const SupportPattern& truth,
                             double tol_rel) {
  const SupportPattern est = result.stack.induced_pattern(tol_rel);
  RecoveryScore score;
  const std::size_t k = est.supports.size();
  if (truth.supports.size() != k)
    throw std::invalid_argument("score_recovery: depth mismatch");
  score.deep_support_exact = est.supports.back() == truth.supports.back();
  score.cosupports_exact = true;
  for (std::size_t i = 0; i + 1 < k; ++i)
    score.cosupports_exact =
        score.cosupports_exact && est.cosupports[i] == truth.cosupports[i];
  for (std::size_t i = 0; i < k; ++i)
    score.per_layer_support_exact.push_back(est.supports[i] == truth.supports[i]);
  return score;
}

}  // namespace mlsc
