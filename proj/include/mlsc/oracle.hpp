#pragma once

#include "mlsc/core.hpp"

#include <cstdint>
#include <optional>

// Known-support (oracle) estimators for the layer-wise, projection and
// holistic approaches, the bias of the row-restricted variant, and the
// error-bound evaluators. All estimators are linear maps of y, so expected
// errors under N(0, sigma^2 I) noise are sigma^2 trace(T T') exactly.

namespace mlsc {

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

struct LayerOracle {
  IndexSet support;           // Lambda_i
  MatrixXd estimator;         // maps y to gamma_i^{Lambda_i} (s_i x n)
  VectorXd gamma;             // full-length estimate for the supplied y
  double expected_error = 0;  // sigma^2 trace(estimator estimator')
};

struct OracleEstimate {
  std::vector<LayerOracle> layers;  // index i-1 holds layer i
  const LayerOracle& deepest() const { return layers.back(); }
};

/// Least squares on the support: gamma^Lambda = pinv(D^Lambda) y.
/// Throws on a rank-deficient sub-dictionary.
OracleEstimate oracle_single_layer(const Dictionary& d, const VectorXd& y,
                                   const IndexSet& support, double sigma);

/// Cascaded pseudo-inverses with full-column sub-dictionaries (the unbiased variant).
OracleEstimate oracle_layered(const MultiLayerModel& model, const VectorXd& y,
                              const std::vector<IndexSet>& supports, double sigma);

/// Deepest layer by restricted least squares on D_(k); mid-layers through the
/// row/column-restricted products.
OracleEstimate oracle_projection(const MultiLayerModel& model, const VectorXd& y,
                                 const std::vector<IndexSet>& supports, double sigma);

/// Kernel-constrained least squares on D_(k)^{Lambda_k} K; mid-layers as in
/// the projection case.
OracleEstimate oracle_holistic(const MultiLayerModel& model, const VectorXd& y,
                               const std::vector<IndexSet>& supports,
                               const std::vector<IndexSet>& mid_cosupports, double sigma);

/// Bias of the row-restricted cascade estimator,
/// pinv(R) (D_(k)^{Lambda_k} - R) gamma_true^{Lambda_k} with
/// R = D_1^{Lambda_1} D_2^{Lambda_1,Lambda_2} ... D_k^{Lambda_{k-1},Lambda_k}.
VectorXd oracle_bias_row_restricted(const MultiLayerModel& model,
                                    const std::vector<IndexSet>& supports,
                                    const VectorXd& gamma_true_deep);

/// The row-restricted cascade matrix R itself (deep estimator is pinv(R) y).
MatrixXd row_restricted_cascade(const MultiLayerModel& model,
                                const std::vector<IndexSet>& supports);

// ---------------------------------------------------------------------------
// Bound evaluators
// ---------------------------------------------------------------------------

/// RIP / Subset-RIP constants feeding the bound formulas. Vectors are indexed
/// by layer j = 2..k (entry j-2).
struct OracleBoundConstants {
  double delta_d1 = 0.0;                 // delta_{s_1} of D_1
  std::vector<double> delta_dj;          // delta_{s_j} of D_j
  std::vector<double> subset_delta_dj;   // delta_{s_{j-1}, s_j} of D_j
  double delta_deff = 0.0;               // delta_{s_k} of D_(k)
};

struct OracleBounds {
  std::vector<Interval> layered;     // per layer i
  std::vector<Interval> projection;  // per layer i
  std::vector<Interval> holistic;    // per layer i
  Interval single_layer;             // deepest-layer interval sigma^2 s_k / (1 -+ delta)
};

/// Pure arithmetic evaluation of the bound formulas. Throws when any needed
/// 1 - delta factor is nonpositive.
OracleBounds evaluate_oracle_bounds(const std::vector<int>& sparsities,
                                    const std::vector<int>& layer_rows,  // rows of D_1..D_k
                                    int kernel_rank, double sigma,
                                    const OracleBoundConstants& constants);

/// Convenience overload taking dimensions from the model and sparsities from
/// the supports; kernel_rank is rank(Phi^{Lambda_k}).
OracleBounds evaluate_oracle_bounds(const MultiLayerModel& model,
                                    const std::vector<IndexSet>& supports, int kernel_rank,
                                    double sigma, const OracleBoundConstants& constants);

// ---------------------------------------------------------------------------
// Monte Carlo verification
// ---------------------------------------------------------------------------

struct MonteCarloStats {
  VectorXd mean_error;   // per-coordinate mean of (T y - truth)
  VectorXd se_mean;      // standard error of each coordinate mean
  double mse = 0.0;      // mean of ||T y - truth||^2
  double se_mse = 0.0;   // standard error of the mse estimate
  int trials = 0;
};

/// Draws y = x + sigma z repeatedly and measures estimator error against the
/// restricted truth vector (aligned with the estimator's output).
MonteCarloStats monte_carlo_estimator_error(const MatrixXd& estimator,
                                            const VectorXd& truth_restricted, const VectorXd& x,
                                            double sigma, int trials, std::uint64_t seed);

/// SVD pseudo-inverse; throws if the matrix is column-rank-deficient at the
/// shared rank threshold.
MatrixXd pseudo_inverse_full_column_rank(const MatrixXd& m);

}  // namespace mlsc
