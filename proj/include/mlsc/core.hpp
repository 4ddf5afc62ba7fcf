#pragma once

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

// Core data types of the multi-layer sparse coding model: dictionaries,
// layered representations, support patterns, and the analysis-constraint
// matrices (Phi, its column restriction, and the kernel basis K).
//
// Index convention: layer indices and entry indices are 1-based in every
// public interface. Internally Eigen is 0-based; conversion happens at the
// selection helpers below.

namespace mlsc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Sorted, duplicate-free set of 1-based indices.
using IndexSet = std::vector<int>;

// ---------------------------------------------------------------------------
// Index / selection helpers
// ---------------------------------------------------------------------------

/// Returns a sorted duplicate-free copy; throws if any index lies outside [1, bound].
IndexSet normalize_index_set(const IndexSet& idx, int bound, const std::string& what);

/// Complement of a (sorted, 1-based) index set within {1..bound}.
IndexSet complement(const IndexSet& idx, int bound);

/// Columns of `m` indexed by the 1-based set `cols`, in set order.
MatrixXd select_columns(const MatrixXd& m, const IndexSet& cols);

/// Rows of `m` indexed by the 1-based set `rows`, in set order.
MatrixXd select_rows(const MatrixXd& m, const IndexSet& rows);

/// Entries of `v` indexed by the 1-based set `idx`, in set order.
VectorXd select_entries(const VectorXd& v, const IndexSet& idx);

/// Scatter `vals` (aligned with `idx`) into a zero vector of length `size`.
VectorXd scatter(const VectorXd& vals, const IndexSet& idx, int size);

/// 1-based indices of entries with |v_i| > tol.
IndexSet support_of(const VectorXd& v, double tol = 0.0);

// ---------------------------------------------------------------------------
// Model types
// ---------------------------------------------------------------------------

/// A dense real dictionary. Entries must be finite and both dimensions >= 1.
class Dictionary {
 public:
  explicit Dictionary(MatrixXd entries);

  const MatrixXd& mat() const { return entries_; }
  int rows() const { return static_cast<int>(entries_.rows()); }
  int cols() const { return static_cast<int>(entries_.cols()); }

 private:
  MatrixXd entries_;
};

/// Ordered dictionary chain {D_1, ..., D_k} with cols(D_i) = rows(D_{i+1}).
class MultiLayerModel {
 public:
  explicit MultiLayerModel(std::vector<Dictionary> layers);

  int depth() const { return static_cast<int>(layers_.size()); }
  int signal_dim() const { return layers_.front().rows(); }
  /// Atom count of layer i (1-based).
  int layer_dim(int i) const { return layer(i).cols(); }
  const Dictionary& layer(int i) const;
  const std::vector<Dictionary>& layers() const { return layers_; }

  /// [n, m_1, ..., m_k].
  std::vector<int> dims() const;

 private:
  std::vector<Dictionary> layers_;
};

/// Effective dictionary D_(i,j) = D_i D_{i+1} ... D_j, 1 <= i <= j <= k.
Dictionary effective_dictionary(const MultiLayerModel& model, int i, int j);

/// D_(k) = D_(1,k), the full synthesis operator.
Dictionary full_effective_dictionary(const MultiLayerModel& model);

/// Suffix products P[i] = D_(i+1,k) for mid-layers i = 1..k-1 (1-based key i-1
/// in the returned vector). These are the analysis operators acting on gamma_k.
std::vector<MatrixXd> suffix_products(const MultiLayerModel& model);

/// Per-layer supports and co-supports (all 1-based, sorted).
struct SupportPattern {
  std::vector<IndexSet> supports;    // Lambda_i, one per layer
  std::vector<IndexSet> cosupports;  // Lambda_i^c, one per layer

  int sparsity(int i) const { return static_cast<int>(supports.at(i - 1).size()); }
  int cosparsity(int i) const { return static_cast<int>(cosupports.at(i - 1).size()); }
  int total_cosparsity_mid(int depth) const;  // sum of ell_i over i < depth
};

/// The vectors {gamma_1..gamma_k} together with the synthesized signal x.
struct RepresentationStack {
  VectorXd x;                   // gamma_0
  std::vector<VectorXd> gammas; // gamma_1..gamma_k

  int depth() const { return static_cast<int>(gammas.size()); }
  const VectorXd& deepest() const { return gammas.back(); }

  /// supp/cosupp per layer with the shared relative zero tolerance
  /// (|entry| <= tol_rel * ||gamma_i||_2 counts as zero).
  SupportPattern induced_pattern(double tol_rel = 1e-9) const;
};

/// Per-layer consistency report for a stack against a model.
struct StackValidation {
  std::vector<double> residuals;     // ||gamma_{i-1} - D_i gamma_i||_2, gamma_0 = x
  std::vector<bool> within_tol;
  std::vector<int> l0_counts;        // ||gamma_i||_0 at the shared zero tolerance
  bool ok = false;                   // all residuals within tol
};

StackValidation validate_stack(const MultiLayerModel& model,
                               const RepresentationStack& stack, double tol);

// ---------------------------------------------------------------------------
// Analysis constraints
// ---------------------------------------------------------------------------

/// Relative singular-value threshold for numerical rank decisions, shared
/// project-wide: sigma_t counts as zero iff sigma_t <= kRankTol * sigma_max.
inline constexpr double kRankRelTol = 1e-10;

/// Phi (co-support rows of the suffix products), its restriction to the deep
/// support, and an orthonormal basis K of ker(Phi^{Lambda_k}).
struct AnalysisConstraint {
  MatrixXd phi_full;       // sum(ell_i) x m_k
  MatrixXd phi_restricted; // sum(ell_i) x s_k
  MatrixXd kernel_basis;   // s_k x (s_k - r), orthonormal columns
  int rank = 0;            // r = rank(Phi^{Lambda_k})

  int deep_support_size() const { return static_cast<int>(phi_restricted.cols()); }
  int kernel_dim() const { return static_cast<int>(kernel_basis.cols()); }
};

/// Orthonormal basis of ker(A) via SVD with the shared relative rank
/// threshold. A 0-row A yields the identity. Each basis column is sign-fixed
/// so its first non-negligible entry is positive.
struct KernelBasis {
  MatrixXd basis;
  int rank = 0;
};
KernelBasis orthonormal_kernel(const MatrixXd& a, int ambient_dim);

/// Builds Phi by stacking rows Lambda_i^c of D_(i+1,k) for i = 1..k-1 in layer
/// order, restricts columns to `deep_support`, and computes rank + kernel.
/// `cosupports` has one entry per mid-layer (k-1 sets; sets may be empty).
AnalysisConstraint build_phi(const MultiLayerModel& model,
                             const std::vector<IndexSet>& cosupports,
                             const IndexSet& deep_support);

}  // namespace mlsc
