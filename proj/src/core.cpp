#include "mlsc/core.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace mlsc {

IndexSet normalize_index_set(const IndexSet& idx, int bound, const std::string& what) {
  IndexSet out = idx;
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  if (out.size() != idx.size())
    throw std::invalid_argument(what + ": duplicate indices");
  if (!out.empty() && (out.front() < 1 || out.back() > bound))
    throw std::invalid_argument(what + ": index outside [1, " + std::to_string(bound) + "]");
  return out;
}

IndexSet complement(const IndexSet& idx, int bound) {
  IndexSet out;
  out.reserve(bound - idx.size());
  std::size_t p = 0;
  for (int i = 1; i <= bound; ++i) {
    if (p < idx.size() && idx[p] == i) {
      ++p;
    } else {
      out.push_back(i);
    }
  }
  return out;
}

MatrixXd select_columns(const MatrixXd& m, const IndexSet& cols) {
  MatrixXd out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(j) = m.col(cols[j] - 1);
  return out;
}

MatrixXd select_rows(const MatrixXd& m, const IndexSet& rows) {
  MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(i) = m.row(rows[i] - 1);
  return out;
}

VectorXd select_entries(const VectorXd& v, const IndexSet& idx) {
  VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = v[idx[i] - 1];
  return out;
}

VectorXd scatter(const VectorXd& vals, const IndexSet& idx, int size) {
  if (vals.size() != static_cast<Eigen::Index>(idx.size()))
    throw std::invalid_argument("scatter: value/index length mismatch");
  VectorXd out = VectorXd::Zero(size);
  for (std::size_t i = 0; i < idx.size(); ++i) out[idx[i] - 1] = vals[i];
  return out;
}

IndexSet support_of(const VectorXd& v, double tol) {
  IndexSet out;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (std::abs(v[i]) > tol) out.push_back(static_cast<int>(i) + 1);
  return out;
}

Dictionary::Dictionary(MatrixXd entries) : entries_(std::move(entries)) {
  if (entries_.rows() < 1 || entries_.cols() < 1)
    throw std::invalid_argument("Dictionary: empty matrix");
  if (!entries_.allFinite())
    throw std::invalid_argument("Dictionary: non-finite entries");
}

MultiLayerModel::MultiLayerModel(std::vector<Dictionary> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw std::invalid_argument("MultiLayerModel: no layers");
  for (std::size_t i = 0; i + 1 < layers_.size(); ++i) {
    if (layers_[i].cols() != layers_[i + 1].rows())
      throw std::invalid_argument("MultiLayerModel: cols(D_" + std::to_string(i + 1) +
                                  ") != rows(D_" + std::to_string(i + 2) + ")");
  }
}

const Dictionary& MultiLayerModel::layer(int i) const {
  if (i < 1 || i > depth())
    throw std::out_of_range("MultiLayerModel::layer: index " + std::to_string(i));
  return layers_[i - 1];
}

std::vector<int> MultiLayerModel::dims() const {
  std::vector<int> d;
  d.push_back(signal_dim());
  for (const auto& l : layers_) d.push_back(l.cols());
  return d;
}

Dictionary effective_dictionary(const MultiLayerModel& model, int i, int j) {
  if (i < 1 || j > model.depth() || i > j)
    throw std::out_of_range("effective_dictionary: bad layer range (" + std::to_string(i) +
                            "," + std::to_string(j) + ")");
  MatrixXd prod = model.layer(i).mat();
  for (int l = i + 1; l <= j; ++l) prod = prod * model.layer(l).mat();
  return Dictionary(std::move(prod));
}

Dictionary full_effective_dictionary(const MultiLayerModel& model) {
  return effective_dictionary(model, 1, model.depth());
}

std::vector<MatrixXd> suffix_products(const MultiLayerModel& model) {
  const int k = model.depth();
  std::vector<MatrixXd> prods(static_cast<std::size_t>(std::max(0, k - 1)));
  MatrixXd acc;
  for (int i = k - 1; i >= 1; --i) {
    if (i == k - 1) {
      acc = model.layer(k).mat();
    } else {
      acc = model.layer(i + 1).mat() * acc;
    }
    prods[i - 1] = acc;
  }
  return prods;
}

int SupportPattern::total_cosparsity_mid(int depth) const {
  int tot = 0;
  for (int i = 1; i < depth; ++i) tot += cosparsity(i);
  return tot;
}

SupportPattern RepresentationStack::induced_pattern(double tol_rel) const {
  SupportPattern p;
  for (const auto& g : gammas) {
    const double tol = tol_rel * g.norm();
    IndexSet supp = support_of(g, tol);
    p.cosupports.push_back(complement(supp, static_cast<int>(g.size())));
    p.supports.push_back(std::move(supp));
  }
  return p;
}

StackValidation validate_stack(const MultiLayerModel& model,
                               const RepresentationStack& stack, double tol) {
  if (stack.depth() != model.depth())
    throw std::invalid_argument("validate_stack: depth mismatch");
  StackValidation rep;
  rep.ok = true;
  const VectorXd* prev = &stack.x;
  for (int i = 1; i <= model.depth(); ++i) {
    const VectorXd& g = stack.gammas[i - 1];
    if (g.size() != model.layer(i).cols())
      throw std::invalid_argument("validate_stack: gamma_" + std::to_string(i) + " length");
    const double res = (*prev - model.layer(i).mat() * g).norm();
    rep.residuals.push_back(res);
    rep.within_tol.push_back(res <= tol);
    rep.ok = rep.ok && res <= tol;
    rep.l0_counts.push_back(static_cast<int>(support_of(g, 1e-9 * g.norm()).size()));
    prev = &g;
  }
  return rep;
}

KernelBasis orthonormal_kernel(const MatrixXd& a, int ambient_dim) {
  KernelBasis kb;
  if (a.rows() == 0) {
    kb.basis = MatrixXd::Identity(ambient_dim, ambient_dim);
    kb.rank = 0;
    return kb;
  }
  if (a.cols() != ambient_dim)
    throw std::invalid_argument("orthonormal_kernel: column count != ambient dim");
  Eigen::JacobiSVD<MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double cutoff = sv.size() > 0 ? kRankRelTol * sv[0] : 0.0;
  int r = 0;
  for (Eigen::Index t = 0; t < sv.size(); ++t)
    if (sv[t] > cutoff) ++r;
  kb.rank = r;
  kb.basis = svd.matrixV().rightCols(ambient_dim - r);
  // Deterministic sign: first non-negligible entry of each column positive.
  for (Eigen::Index j = 0; j < kb.basis.cols(); ++j) {
    const double colmax = kb.basis.col(j).cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < kb.basis.rows(); ++i) {
      const double v = kb.basis(i, j);
      if (std::abs(v) > 1e-12 * colmax) {
        if (v < 0) kb.basis.col(j) = -kb.basis.col(j);
        break;
      }
    }
  }
  return kb;
}

AnalysisConstraint build_phi(const MultiLayerModel& model,
                             const std::vector<IndexSet>& cosupports,
                             const IndexSet& deep_support) {
  const int k = model.depth();
  if (static_cast<int>(cosupports.size()) != k - 1)
    throw std::invalid_argument("build_phi: need one co-support per mid-layer");
  const int mk = model.layer_dim(k);
  IndexSet lam_k = normalize_index_set(deep_support, mk, "build_phi: deep support");
  if (lam_k.empty()) throw std::invalid_argument("build_phi: empty deep support");

  const auto prods = suffix_products(model);
  int total_rows = 0;
  std::vector<IndexSet> cos(cosupports.size());
  for (int i = 1; i < k; ++i) {
    cos[i - 1] = normalize_index_set(cosupports[i - 1], model.layer_dim(i),
                                     "build_phi: co-support of layer " + std::to_string(i));
    total_rows += static_cast<int>(cos[i - 1].size());
  }

  AnalysisConstraint ac;
  ac.phi_full.resize(total_rows, mk);
  int row = 0;
  for (int i = 1; i < k; ++i) {
    if (cos[i - 1].empty()) continue;
    ac.phi_full.middleRows(row, cos[i - 1].size()) = select_rows(prods[i - 1], cos[i - 1]);
    row += static_cast<int>(cos[i - 1].size());
  }
  ac.phi_restricted = total_rows == 0
                          ? MatrixXd(0, static_cast<Eigen::Index>(lam_k.size()))
                          : select_columns(ac.phi_full, lam_k);
  KernelBasis kb = orthonormal_kernel(ac.phi_restricted, static_cast<int>(lam_k.size()));
  ac.kernel_basis = std::move(kb.basis);
  ac.rank = kb.rank;
  return ac;
}

}  // namespace mlsc
