#pragma once

#include "mlsc/core.hpp"

#include <cstdint>

// Dictionary diagnostics and theorem-condition evaluators: coherence measures,
// spark, RIP / Subset-RIP constants and the uniqueness / stability checks they
// feed. Exhaustive enumerations are exact maxima; sampled modes report a lower
// bound and say so.

namespace mlsc {

/// max_{i != j} |d_i' d_j| / (||d_i|| ||d_j||). Throws on a zero column.
double mutual_coherence(const Dictionary& d);

/// Row analogue, computed on the row-normalized matrix by default. Pass
/// normalize_rows = false for the raw diagnostic variant.
double row_mutual_coherence(const Dictionary& d, bool normalize_rows = true);

struct SparkResult {
  int value = 0;
  bool is_sentinel = false;  // full column rank: value = min(n,m)+1 stands in
  bool exceeds_cap = false;  // m > cap, nothing computed
};

/// Smallest number of linearly dependent columns, by exhaustive subset search
/// (numerical rank at the shared threshold). Exhaustive search requires
/// m <= max_cols.
SparkResult spark(const Dictionary& d, int max_cols = 20);

enum class EnumerationMode { Exhaustive, Sampled };

struct RipEstimate {
  double delta = 0.0;
  bool lower_bound_only = false;  // sampled mode never overshoots the true constant
  long subsets_examined = 0;
};

/// delta_s: max over s-column subsets of max(lambda_max - 1, 1 - lambda_min)
/// of the subset Gram. Exhaustive mode requires C(m,s) <= 1e6.
RipEstimate rip_constant(const Dictionary& d, int s, EnumerationMode mode,
                         int sample_count = 2000, std::uint64_t seed = 0);

/// delta_{s_R,s_C}: same deviation measured against the center s_R / n over
/// all (row subset, column subset) pairs. Exhaustive mode requires
/// C(n,s_R) * C(m,s_C) <= 1e6.
RipEstimate subset_rip_constant(const Dictionary& d, int s_rows, int s_cols,
                                EnumerationMode mode, int sample_count = 2000,
                                std::uint64_t seed = 0);

struct UniquenessLayeredReport {
  bool unique = false;
  std::vector<double> mus;      // mu(D_i)
  std::vector<double> margins;  // 0.5 (1 + 1/mu_i) - s_i
};
UniquenessLayeredReport uniqueness_layered(const MultiLayerModel& model,
                                           const std::vector<int>& sparsities);
UniquenessLayeredReport uniqueness_layered(const MultiLayerModel& model,
                                           const RepresentationStack& stack);

struct UniquenessEffectiveReport {
  bool unique = false;
  double mu_effective = 0.0;
  double threshold = 0.0;  // 0.5 (1 + 1/mu(D_(k)))
  int deep_sparsity = 0;
};
UniquenessEffectiveReport uniqueness_effective(const MultiLayerModel& model, int deep_sparsity);
UniquenessEffectiveReport uniqueness_effective(const MultiLayerModel& model,
                                               const RepresentationStack& stack);

struct UniquenessHolisticReport {
  bool unique = false;
  double threshold = 0.0;       // (spark - 1)/2 + r
  int rank = 0;                 // r = rank(Phi^{Lambda_k})
  double spark_bound = 0.0;     // spark value, or 1 + 1/mu when capped
  bool conservative = false;    // spark replaced by its coherence lower bound
  int deep_sparsity = 0;
};
UniquenessHolisticReport uniqueness_holistic(const MultiLayerModel& model,
                                             const RepresentationStack& stack,
                                             int spark_cap = 20);

/// Theorem-3.2 bounds 4 eps^2 prod_{j<=i} 1/(1 - (2 s_j - 1) mu(D_j)) per
/// layer; throws when a factor's denominator is nonpositive.
std::vector<double> stability_bound(const MultiLayerModel& model,
                                    const std::vector<int>& sparsities, double eps);
std::vector<double> stability_bound(const MultiLayerModel& model,
                                    const RepresentationStack& stack, double eps);

struct HolisticConditionReport {
  std::vector<bool> iteration_ok;  // one entry per holistic iteration
  std::vector<double> lhs;
  std::vector<double> rhs;
  std::vector<int> chosen_layer;   // layer receiving the new co-support element
  bool all_ok = false;
};

/// Evaluates the per-iteration success condition of the holistic recovery
/// guarantee, simulating the greedy layer selection: at step j the layer with
/// the largest selection score receives the next co-support element.
/// kappa_L is the constrained-Lasso constant, supplied by the caller.
HolisticConditionReport holistic_condition_check(const MultiLayerModel& model,
                                                 int deep_sparsity, double sigma,
                                                 double kappa_l,
                                                 const std::vector<double>& gamma_mins,
                                                 const std::vector<int>& cosparsities);

}  // namespace mlsc
