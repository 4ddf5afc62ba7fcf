#include "mlsc/metrics.hpp"

#include "mlsc/pursuit.hpp"
#include "mlsc/rng.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>

namespace mlsc {

namespace {

constexpr long kExhaustiveLimit = 1'000'000;

// Number of size-t subsets of {1..n}, saturating at kExhaustiveLimit + 1.
long subset_count(int n, int t) {
  double c = 1.0;
  for (int i = 1; i <= t; ++i) {
    c *= static_cast<double>(n - t + i) / i;
    if (c > static_cast<double>(kExhaustiveLimit) + 1) return kExhaustiveLimit + 1;
  }
  return static_cast<long>(c + 0.5);
}

// Visits all size-t subsets of {1..n} (1-based, sorted) until f returns false.
template <typename F>
void for_each_subset(int n, int t, F&& f) {
  if (t == 0) {
    IndexSet empty;
    f(empty);
    return;
  }
  IndexSet idx(t);
  for (int i = 0; i < t; ++i) idx[i] = i + 1;
  while (true) {
    if (!f(idx)) return;
    int pos = t - 1;
    while (pos >= 0 && idx[pos] == n - (t - 1 - pos)) --pos;
    if (pos < 0) return;
    ++idx[pos];
    for (int j = pos + 1; j < t; ++j) idx[j] = idx[j - 1] + 1;
  }
}

double gram_deviation(const MatrixXd& sub, double center) {
  const MatrixXd gram = sub.transpose() * sub;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(gram, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  return std::max(ev.maxCoeff() - center, center - ev.minCoeff());
}

int numerical_rank(const MatrixXd& m) {
  Eigen::JacobiSVD<MatrixXd> svd(m);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0) return 0;
  const double cutoff = kRankRelTol * sv[0];
  int r = 0;
  for (Eigen::Index t = 0; t < sv.size(); ++t)
    if (sv[t] > cutoff) ++r;
  return r;
}

}  // namespace

double mutual_coherence(const Dictionary& d) {
  const MatrixXd& m = d.mat();
  if (m.cols() < 2) throw std::invalid_argument("mutual_coherence: fewer than 2 columns");
  VectorXd norms = m.colwise().norm();
  for (Eigen::Index j = 0; j < norms.size(); ++j)
    if (norms[j] == 0.0) throw std::invalid_argument("mutual_coherence: zero column");
  MatrixXd gram = m.transpose() * m;
  double mu = 0.0;
  for (Eigen::Index i = 0; i < m.cols(); ++i)
    for (Eigen::Index j = i + 1; j < m.cols(); ++j)
      mu = std::max(mu, std::abs(gram(i, j)) / (norms[i] * norms[j]));
  return mu;
}

double row_mutual_coherence(const Dictionary& d, bool normalize_rows) {
  const MatrixXd& m = d.mat();
  if (m.rows() < 2) throw std::invalid_argument("row_mutual_coherence: fewer than 2 rows");
  MatrixXd rows = m;
  if (normalize_rows) {
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
      const double nrm = rows.row(i).norm();
      if (nrm == 0.0) throw std::invalid_argument("row_mutual_coherence: zero row");
      rows.row(i) /= nrm;
    }
  }
  double mu = 0.0;
  MatrixXd gram = rows * rows.transpose();
  for (Eigen::Index p = 0; p < rows.rows(); ++p)
    for (Eigen::Index j = p + 1; j < rows.rows(); ++j)
      mu = std::max(mu, std::abs(gram(p, j)));
  return mu;
}

SparkResult spark(const Dictionary& d, int max_cols) {
  SparkResult result;
  const int n = d.rows();
  const int m = d.cols();
  if (m > max_cols) {
    result.exceeds_cap = true;
    return result;
  }
  // Any t > n columns are dependent, so only t <= min(n, m) needs enumeration.
  const int t_max = std::min(n, m);
  for (int t = 2; t <= t_max; ++t) {
    bool found = false;
    for_each_subset(m, t, [&](const IndexSet& cols) {
      if (numerical_rank(select_columns(d.mat(), cols)) < t) {
        found = true;
        return false;
      }
      return true;
    });
    if (found) {
      result.value = t;
      return result;
    }
  }
  if (m > n) {
    result.value = n + 1;  // n+1 columns in R^n are always dependent
  } else {
    result.value = std::min(n, m) + 1;
    result.is_sentinel = true;
  }
  return result;
}

namespace {

RipEstimate deviation_over_subsets(const MatrixXd& m, int s_rows, int s_cols, double center,
                                   EnumerationMode mode, int sample_count, std::uint64_t seed,
                                   bool restrict_rows) {
  const int n = static_cast<int>(m.rows());
  const int cols = static_cast<int>(m.cols());
  RipEstimate est;
  if (mode == EnumerationMode::Exhaustive) {
    const long rows_c = restrict_rows ? subset_count(n, s_rows) : 1;
    const long cols_c = subset_count(cols, s_cols);
    if (rows_c > kExhaustiveLimit / std::max(1L, cols_c))
      throw std::invalid_argument("exhaustive RIP enumeration infeasible at these sizes");
    if (restrict_rows) {
      for_each_subset(n, s_rows, [&](const IndexSet& ridx) {
        const MatrixXd rsel = select_rows(m, ridx);
        for_each_subset(cols, s_cols, [&](const IndexSet& cidx) {
          est.delta = std::max(est.delta, gram_deviation(select_columns(rsel, cidx), center));
          ++est.subsets_examined;
          return true;
        });
        return true;
      });
    } else {
      for_each_subset(cols, s_cols, [&](const IndexSet& cidx) {
        est.delta = std::max(est.delta, gram_deviation(select_columns(m, cidx), center));
        ++est.subsets_examined;
        return true;
      });
    }
  } else {
    Rng rng(seed);
    est.lower_bound_only = true;
    for (int t = 0; t < sample_count; ++t) {
      MatrixXd sub = restrict_rows ? select_rows(m, rng.subset(n, s_rows)) : m;
      sub = select_columns(sub, rng.subset(cols, s_cols));
      est.delta = std::max(est.delta, gram_deviation(sub, center));
      ++est.subsets_examined;
    }
  }
  return est;
}

}  // namespace

RipEstimate rip_constant(const Dictionary& d, int s, EnumerationMode mode, int sample_count,
                         std::uint64_t seed) {
  if (s < 1 || s > d.cols()) throw std::invalid_argument("rip_constant: s outside [1, m]");
  return deviation_over_subsets(d.mat(), 0, s, 1.0, mode, sample_count, seed, false);
}

RipEstimate subset_rip_constant(const Dictionary& d, int s_rows, int s_cols,
                                EnumerationMode mode, int sample_count, std::uint64_t seed) {
  if (s_rows < 1 || s_rows > d.rows())
    throw std::invalid_argument("subset_rip_constant: s_R outside [1, n]");
  if (s_cols < 1 || s_cols > d.cols())
    throw std::invalid_argument("subset_rip_constant: s_C outside [1, m]");
  const double center = static_cast<double>(s_rows) / d.rows();
  return deviation_over_subsets(d.mat(), s_rows, s_cols, center, mode, sample_count, seed, true);
}

UniquenessLayeredReport uniqueness_layered(const MultiLayerModel& model,
                                           const std::vector<int>& sparsities) {
  if (static_cast<int>(sparsities.size()) != model.depth())
    throw std::invalid_argument("uniqueness_layered: need one sparsity per layer");
  UniquenessLayeredReport rep;
  rep.unique = true;
  for (int i = 1; i <= model.depth(); ++i) {
    const double mu = mutual_coherence(model.layer(i));
    const double threshold = 0.5 * (1.0 + 1.0 / mu);
    rep.mus.push_back(mu);
    rep.margins.push_back(threshold - sparsities[i - 1]);
    rep.unique = rep.unique && sparsities[i - 1] < threshold;
  }
  return rep;
}

UniquenessLayeredReport uniqueness_layered(const MultiLayerModel& model,
                                           const RepresentationStack& stack) {
  std::vector<int> s;
  for (const auto& supp : stack.induced_pattern().supports)
    s.push_back(static_cast<int>(supp.size()));
  return uniqueness_layered(model, s);
}

UniquenessEffectiveReport uniqueness_effective(const MultiLayerModel& model, int deep_sparsity) {
  UniquenessEffectiveReport rep;
  rep.mu_effective = mutual_coherence(full_effective_dictionary(model));
  rep.threshold = 0.5 * (1.0 + 1.0 / rep.mu_effective);
  rep.deep_sparsity = deep_sparsity;
  rep.unique = deep_sparsity < rep.threshold;
  return rep;
}

UniquenessEffectiveReport uniqueness_effective(const MultiLayerModel& model,
                                               const RepresentationStack& stack) {
  const auto pattern = stack.induced_pattern();
  return uniqueness_effective(model, pattern.sparsity(model.depth()));
}

UniquenessHolisticReport uniqueness_holistic(const MultiLayerModel& model,
                                             const RepresentationStack& stack, int spark_cap) {
  const auto pattern = stack.induced_pattern();
  std::vector<IndexSet> cosupports(pattern.cosupports.begin(), pattern.cosupports.end() - 1);
  const AnalysisConstraint ac =
      build_phi(model, cosupports, pattern.supports.back());

  UniquenessHolisticReport rep;
  rep.rank = ac.rank;
  rep.deep_sparsity = pattern.sparsity(model.depth());
  const Dictionary deff = full_effective_dictionary(model);
  const SparkResult sp = spark(deff, spark_cap);
  if (sp.exceeds_cap) {
    rep.conservative = true;
    rep.spark_bound = 1.0 + 1.0 / mutual_coherence(deff);
  } else {
    rep.spark_bound = sp.value;
  }
  rep.threshold = 0.5 * (rep.spark_bound - 1.0) + rep.rank;
  rep.unique = rep.deep_sparsity <= rep.threshold;
  return rep;
}

std::vector<double> stability_bound(const MultiLayerModel& model,
                                    const std::vector<int>& sparsities, double eps) {
  if (static_cast<int>(sparsities.size()) != model.depth())
    throw std::invalid_argument("stability_bound: need one sparsity per layer");
  std::vector<double> bounds;
  double prod = 1.0;
  for (int j = 1; j <= model.depth(); ++j) {
    const double mu = mutual_coherence(model.layer(j));
    const double denom = 1.0 - (2.0 * sparsities[j - 1] - 1.0) * mu;
    if (denom <= 0.0)
      throw std::runtime_error("stability condition violated at layer " + std::to_string(j));
    prod /= denom;
    bounds.push_back(4.0 * eps * eps * prod);
  }
  return bounds;
}

std::vector<double> stability_bound(const MultiLayerModel& model,
                                    const RepresentationStack& stack, double eps) {
  std::vector<int> s;
  for (const auto& supp : stack.induced_pattern().supports)
    s.push_back(static_cast<int>(supp.size()));
  return stability_bound(model, s, eps);
}

HolisticConditionReport holistic_condition_check(const MultiLayerModel& model,
                                                 int deep_sparsity, double sigma,
                                                 double kappa_l,
                                                 const std::vector<double>& gamma_mins,
                                                 const std::vector<int>& cosparsities) {
  if (kappa_l <= 0.0) throw std::invalid_argument("holistic_condition_check: kappa_L <= 0");
  const int k = model.depth();
  if (static_cast<int>(cosparsities.size()) != k - 1 ||
      static_cast<int>(gamma_mins.size()) != k - 1)
    throw std::invalid_argument("holistic_condition_check: need k-1 mid-layer entries");

  const auto prods = suffix_products(model);
  std::vector<LayerSelectionState> states(k - 1);
  int ell_tot = 0;
  for (int i = 1; i < k; ++i) {
    states[i - 1].gamma_min = gamma_mins[i - 1];
    states[i - 1].cosparsity = cosparsities[i - 1];
    states[i - 1].mu_row =
        cosparsities[i - 1] > 0 ? row_mutual_coherence(Dictionary(prods[i - 1])) : 0.0;
    ell_tot += cosparsities[i - 1];
  }

  HolisticConditionReport rep;
  rep.all_ok = true;
  const double noise_scale =
      (8.0 * sigma / kappa_l) * std::sqrt(std::log(static_cast<double>(model.layer_dim(k))) /
                                          model.signal_dim());
  for (int j = 1; j <= ell_tot; ++j) {
    const int g = choose_layer(states);
    const double rhs = layer_selection_score(states[g - 1]);
    const double lhs = std::sqrt(static_cast<double>(std::max(deep_sparsity - j, j))) * noise_scale;
    rep.lhs.push_back(lhs);
    rep.rhs.push_back(rhs);
    rep.chosen_layer.push_back(g);
    rep.iteration_ok.push_back(lhs <= rhs);
    rep.all_ok = rep.all_ok && lhs <= rhs;
    ++states[g - 1].found;
  }
  return rep;
}

}  // namespace mlsc
