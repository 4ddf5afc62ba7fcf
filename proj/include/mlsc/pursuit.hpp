#pragma once

#include "mlsc/core.hpp"

#include <optional>

// Pursuit algorithms. One l1 solver core (proximal gradient with momentum)
// serves the plain Lasso paths; the holistic pursuit estimates the deepest
// representation with an ADMM solver for the kernel-constrained Lasso and
// grows the mid-layer co-supports one row per iteration.

namespace mlsc {

struct SolverParams {
  double eta = 0.0;        // l1 penalty weight
  double rho = 1.0;        // ADMM penalty
  int max_iters = 5000;
  double tol_primal = 1e-8;
  double tol_dual = 1e-8;
  double lasso_tol = 1e-9;  // KKT residual tolerance, relative to max(1, ||D'y||_inf)
};

enum class SolveStatus { Converged, MaxIters, Infeasible };

/// Keeps the s largest-magnitude entries (ties to the lowest index), zeroes the rest.
VectorXd hard_threshold(const VectorXd& v, int s);

/// Entrywise soft threshold at level t >= 0.
VectorXd soft_threshold(const VectorXd& v, double t);

struct LassoResult {
  VectorXd gamma;
  int iters = 0;
  double kkt_residual = 0.0;
  SolveStatus status = SolveStatus::Converged;
};

/// min 0.5 ||D g - y||^2 + eta ||g||_1 by accelerated proximal gradient with
/// adaptive restart; stops at the subgradient optimality tolerance.
LassoResult lasso(const MatrixXd& d, const VectorXd& y, const SolverParams& params,
                  const VectorXd* warm_start = nullptr);

struct BudgetLassoResult {
  VectorXd gamma;
  double eta = 0.0;  // penalty level matched to the budget
  int solves = 0;
  SolveStatus status = SolveStatus::Converged;
};

/// Constraint form P1: min ||D g - y||^2 s.t. ||g||_1 <= budget, solved by
/// bisecting eta against the (monotone) l1 norm of the penalized solution.
BudgetLassoResult lasso_l1_budget(const MatrixXd& d, const VectorXd& y, double budget,
                                  const SolverParams& params, int bisection_steps = 60);

struct EtaSelection {
  double eta = 0.0;
  VectorXd gamma;  // solution at the selected eta
  int solves = 0;
};

/// Largest eta whose solution keeps ||y - D g||^2 <= target_sq; log-grid
/// bisection with warm starts. target_sq <= 0 degenerates to eta = 0.
EtaSelection select_eta_by_residual(const MatrixXd& d, const VectorXd& y, double target_sq,
                                    const SolverParams& params, int steps = 30);

struct AdmmResult {
  VectorXd gamma_k;      // K alpha: feasible by construction
  VectorXd alpha;
  VectorXd split_gamma;  // the thresholded split variable
  VectorXd dual_u;
  int iters = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  SolveStatus status = SolveStatus::Converged;
};

struct AdmmWarmStart {
  VectorXd alpha;
  VectorXd split_gamma;
  VectorXd dual_u;
};

/// ADMM for min 0.5 ||y - Deff K a||^2 + eta ||g||_1 s.t. g = K a.
/// K must have orthonormal columns; the alpha-step system is factored once.
AdmmResult constrained_lasso_admm(const MatrixXd& deff, const VectorXd& y,
                                  const MatrixXd& kernel, const SolverParams& params,
                                  const AdmmWarmStart* warm = nullptr);

// ---------------------------------------------------------------------------
// Full pursuits
// ---------------------------------------------------------------------------

struct PursuitLogEntry {
  int iteration = 0;
  int layer = 0;            // g chosen by the selection rule
  int row = 0;              // j added to the co-support (1-based)
  double signal_residual = 0.0;  // ||y - D_(k) gamma_k|| when the row was picked
};

struct PursuitResult {
  RepresentationStack stack;
  std::vector<double> chain_residuals;       // ||gamma_{i-1} - D_i gamma_i||
  SolveStatus status = SolveStatus::Converged;
  double eta_used = 0.0;
  std::vector<PursuitLogEntry> log;          // holistic iterations
  std::vector<IndexSet> cosupports_found;    // holistic: one per mid-layer
  std::vector<int> kernel_dims;              // holistic: cols(K) after each update
};

/// Synthesis-consistent stack induced by a deepest-layer estimate: mid-layers
/// are the suffix-product propagations, x the synthesized signal.
PursuitResult stack_from_deepest(const MultiLayerModel& model, const VectorXd& gamma_k,
                                 double eta_used = 0.0,
                                 SolveStatus status = SolveStatus::Converged);

PursuitResult layered_pursuit_thresholding(const MultiLayerModel& model, const VectorXd& y,
                                           const std::vector<int>& sparsities);
PursuitResult layered_pursuit_bp(const MultiLayerModel& model, const VectorXd& y,
                                 const std::vector<double>& l1_budgets,
                                 const SolverParams& params);

PursuitResult projection_pursuit_thresholding(const MultiLayerModel& model, const VectorXd& y,
                                              int deep_sparsity);
PursuitResult projection_pursuit_bp(const MultiLayerModel& model, const VectorXd& y,
                                    double l1_budget, const SolverParams& params);
/// Penalized-form variant used by the experiment harness (eta from params.eta).
PursuitResult projection_pursuit_bp_penalized(const MultiLayerModel& model, const VectorXd& y,
                                              const SolverParams& params);

/// State of one mid-layer for the selection rule.
struct LayerSelectionState {
  double gamma_min = 1.0;  // 1.0 when unknown (the factor is dropped)
  double mu_row = 0.0;     // row mutual coherence of D_(i+1,k)
  int cosparsity = 0;      // ell_i
  int found = 0;           // |hat Lambda_i^c|
};

double layer_selection_score(const LayerSelectionState& s);

/// argmax of the selection score over layers with found < cosparsity
/// (1-based; ties to the lowest layer). Throws if the co-support is complete.
int choose_layer(const std::vector<LayerSelectionState>& states);

struct HolisticOptions {
  std::vector<int> cosparsities;    // ell_i per mid-layer (ignored in unknown_ell mode)
  std::vector<double> gamma_mins;   // empty: unknown-gamma^min variant
  SolverParams solver;              // eta taken from solver.eta
  std::optional<int> final_hard_threshold;  // optionally clamp gamma_k to s_k

  // Experimental: unknown co-sparsity levels. Greedily picks the globally
  // smallest row response until total_cosparsity rows were added or the
  // signal residual falls below residual_stop (if positive).
  bool unknown_ell = false;
  int total_cosparsity = 0;
  double residual_stop = 0.0;
};

PursuitResult holistic_pursuit(const MultiLayerModel& model, const VectorXd& y,
                               const HolisticOptions& options);

/// Support / co-support agreement against a ground-truth pattern, at the
/// shared relative zero tolerance.
struct RecoveryScore {
  bool deep_support_exact = false;
  bool cosupports_exact = false;  // mid-layer zero patterns match
  std::vector<bool> per_layer_support_exact;
};
RecoveryScore score_recovery(const PursuitResult& result, const SupportPattern& truth,
                             double tol_rel = 1e-6);

}  // namespace mlsc
