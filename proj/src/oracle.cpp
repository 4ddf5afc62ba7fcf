#include "mlsc/oracle.hpp"

#include "mlsc/rng.hpp"

#include <Eigen/SVD>

#include <cmath>

namespace mlsc {

MatrixXd pseudo_inverse_full_column_rank(const MatrixXd& m) {
  Eigen::JacobiSVD<MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv[sv.size() - 1] <= kRankRelTol * sv[0])
    throw std::runtime_error("pseudo_inverse: rank-deficient sub-dictionary");
  return svd.matrixV() * sv.cwiseInverse().asDiagonal() * svd.matrixU().transpose();
}

namespace {

double expected_error_of(const MatrixXd& estimator, double sigma) {
  return sigma * sigma * estimator.squaredNorm();  // trace(T T') = ||T||_F^2
}

LayerOracle make_layer(const IndexSet& support, MatrixXd estimator, const VectorXd& y,
                       double sigma, int full_len) {
  LayerOracle lo;
  lo.support = support;
  lo.gamma = scatter(estimator * y, support, full_len);
  lo.expected_error = expected_error_of(estimator, sigma);
  lo.estimator = std::move(estimator);
  return lo;
}

void check_supports(const MultiLayerModel& model, const std::vector<IndexSet>& supports) {
  if (static_cast<int>(supports.size()) != model.depth())
    throw std::invalid_argument("oracle: need one support per layer");
}

}  // namespace

OracleEstimate oracle_single_layer(const Dictionary& d, const VectorXd& y,
                                   const IndexSet& support, double sigma) {
  const IndexSet lam = normalize_index_set(support, d.cols(), "oracle support");
  if (lam.empty()) throw std::invalid_argument("oracle_single_layer: empty support");
  OracleEstimate est;
  est.layers.push_back(make_layer(
      lam, pseudo_inverse_full_column_rank(select_columns(d.mat(), lam)), y, sigma, d.cols()));
  return est;
}

OracleEstimate oracle_layered(const MultiLayerModel& model, const VectorXd& y,
                              const std::vector<IndexSet>& supports, double sigma) {
  check_supports(model, supports);
  OracleEstimate est;
  MatrixXd cascade;  // U_(i,1)
  for (int i = 1; i <= model.depth(); ++i) {
    const IndexSet lam = normalize_index_set(supports[i - 1], model.layer_dim(i),
                                             "oracle support " + std::to_string(i));
    const MatrixXd cols = select_columns(model.layer(i).mat(), lam);
    if (i == 1) {
      cascade = pseudo_inverse_full_column_rank(cols);
    } else {
      // (D_i^{Li}' D_i^{Li})^{-1} D_i^{L_{i-1},L_i}' applied to the previous stage.
      const MatrixXd pinv = pseudo_inverse_full_column_rank(cols);
      const MatrixXd gram_inv = pinv * pinv.transpose();
      const MatrixXd row_cols = select_rows(cols, supports[i - 2]);
      cascade = gram_inv * row_cols.transpose() * cascade;
    }
    est.layers.push_back(make_layer(lam, cascade, y, sigma, model.layer_dim(i)));
  }
  return est;
}

namespace {

// bar{D}_{i+1} = D_{i+1}^{L_i, L_{i+1}} ... D_k^{L_{k-1}, L_k} per mid-layer i,
// the restricted propagation maps of the projection estimator.
std::vector<MatrixXd> restricted_suffixes(const MultiLayerModel& model,
                                          const std::vector<IndexSet>& supports) {
  const int k = model.depth();
  std::vector<MatrixXd> out(std::max(0, k - 1));
  MatrixXd acc;
  for (int i = k - 1; i >= 1; --i) {
    const MatrixXd block = select_rows(
        select_columns(model.layer(i + 1).mat(), supports[i]), supports[i - 1]);
    acc = (i == k - 1) ? block : MatrixXd(block * acc);
    out[i - 1] = acc;
  }
  return out;
}

}  // namespace

OracleEstimate oracle_projection(const MultiLayerModel& model, const VectorXd& y,
                                 const std::vector<IndexSet>& supports, double sigma) {
  check_supports(model, supports);
  const int k = model.depth();
  const MatrixXd deff_cols =
      select_columns(full_effective_dictionary(model).mat(), supports[k - 1]);
  const MatrixXd deep = pseudo_inverse_full_column_rank(deff_cols);
  const auto bars = restricted_suffixes(model, supports);

  OracleEstimate est;
  est.layers.resize(k);
  est.layers[k - 1] = make_layer(supports[k - 1], deep, y, sigma, model.layer_dim(k));
  for (int i = 1; i < k; ++i)
    est.layers[i - 1] =
        make_layer(supports[i - 1], bars[i - 1] * deep, y, sigma, model.layer_dim(i));
  return est;
}

OracleEstimate oracle_holistic(const MultiLayerModel& model, const VectorXd& y,
                               const std::vector<IndexSet>& supports,
                               const std::vector<IndexSet>& mid_cosupports, double sigma) {
  check_supports(model, supports);
  const int k = model.depth();
  const AnalysisConstraint ac = build_phi(model, mid_cosupports, supports[k - 1]);
  if (ac.kernel_dim() == 0)
    throw std::runtime_error("oracle_holistic: empty kernel (r >= s_k)");
  const MatrixXd deff_cols =
      select_columns(full_effective_dictionary(model).mat(), supports[k - 1]);
  const MatrixXd deep =
      ac.kernel_basis * pseudo_inverse_full_column_rank(deff_cols * ac.kernel_basis);
  const auto bars = restricted_suffixes(model, supports);

  OracleEstimate est;
  est.layers.resize(k);
  est.layers[k - 1] = make_layer(supports[k - 1], deep, y, sigma, model.layer_dim(k));
  for (int i = 1; i < k; ++i)
    est.layers[i - 1] =
        make_layer(supports[i - 1], bars[i - 1] * deep, y, sigma, model.layer_dim(i));
  return est;
}

MatrixXd row_restricted_cascade(const MultiLayerModel& model,
                                const std::vector<IndexSet>& supports) {
  check_supports(model, supports);
  MatrixXd r = select_columns(model.layer(1).mat(), supports[0]);
  for (int i = 2; i <= model.depth(); ++i)
    r *= select_rows(select_columns(model.layer(i).mat(), supports[i - 1]), supports[i - 2]);
  return r;
}

VectorXd oracle_bias_row_restricted(const MultiLayerModel& model,
                                    const std::vector<IndexSet>& supports,
                                    const VectorXd& gamma_true_deep) {
  const int k = model.depth();
  if (gamma_true_deep.size() != model.layer_dim(k))
    throw std::invalid_argument("oracle_bias: gamma length != m_k");
  const MatrixXd r = row_restricted_cascade(model, supports);
  const MatrixXd deff_cols =
      select_columns(full_effective_dictionary(model).mat(), supports[k - 1]);
  const VectorXd gk = select_entries(gamma_true_deep, supports[k - 1]);
  return pseudo_inverse_full_column_rank(r) * ((deff_cols - r) * gk);
}

namespace {

double guard_denominator(double v, const char* what) {
  if (v <= 0.0) throw std::runtime_error(std::string("oracle bound: nonpositive 1 - delta (") +
                                         what + ")");
  return v;
}

}  // namespace

OracleBounds evaluate_oracle_bounds(const std::vector<int>& sparsities,
                                    const std::vector<int>& layer_rows, int kernel_rank,
                                    double sigma, const OracleBoundConstants& constants) {
  const int k = static_cast<int>(sparsities.size());
  if (static_cast<int>(layer_rows.size()) != k)
    throw std::invalid_argument("oracle bounds: layer_rows size mismatch");
  if (static_cast<int>(constants.delta_dj.size()) != k - 1 ||
      static_cast<int>(constants.subset_delta_dj.size()) != k - 1)
    throw std::invalid_argument("oracle bounds: constants sized for k-1 deeper layers");

  OracleBounds out;
  const double s2 = sigma * sigma;

  // Layered, Eq.-style cascade: start from the single-layer interval of D_1 and
  // multiply per-layer factors downward.
  double lo_prod = 1.0 / (1.0 + constants.delta_d1);
  double hi_prod = 1.0 / guard_denominator(1.0 - constants.delta_d1, "D_1");
  out.layered.push_back({s2 * sparsities[0] * lo_prod, s2 * sparsities[0] * hi_prod});
  for (int j = 2; j <= k; ++j) {
    const double ratio = static_cast<double>(sparsities[j - 2]) / layer_rows[j - 1];
    const double dj = constants.delta_dj[j - 2];
    const double sub = constants.subset_delta_dj[j - 2];
    lo_prod *= (ratio - sub) / ((1.0 + dj) * (1.0 + dj));
    const double denom = guard_denominator(1.0 - dj, "D_j");
    hi_prod *= (ratio + sub) / (denom * denom);
    out.layered.push_back({s2 * sparsities[j - 1] * lo_prod, s2 * sparsities[j - 1] * hi_prod});
  }

  // Projection / holistic: c-products accumulate from the deep end.
  const double deff_lo = 1.0 + constants.delta_deff;
  const double deff_hi = guard_denominator(1.0 - constants.delta_deff, "D_(k)");
  const double sk = sparsities[k - 1];
  const double sk_r = sk - kernel_rank;
  out.projection.resize(k);
  out.holistic.resize(k);
  double c_lo = 1.0;
  double c_hi = 1.0;
  for (int i = k; i >= 1; --i) {
    if (i < k) {
      const double ratio = static_cast<double>(sparsities[i - 1]) / layer_rows[i];
      c_lo *= ratio - constants.subset_delta_dj[i - 1];
      c_hi *= ratio + constants.subset_delta_dj[i - 1];
    }
    out.projection[i - 1] = {s2 * sk * c_lo / deff_lo, s2 * sk * c_hi / deff_hi};
    out.holistic[i - 1] = {s2 * sk_r * c_lo / deff_lo, s2 * sk_r * c_hi / deff_hi};
  }
  out.single_layer = {s2 * sk / deff_lo, s2 * sk / deff_hi};
  return out;
}

OracleBounds evaluate_oracle_bounds(const MultiLayerModel& model,
                                    const std::vector<IndexSet>& supports, int kernel_rank,
                                    double sigma, const OracleBoundConstants& constants) {
  check_supports(model, supports);
  std::vector<int> s, rows;
  for (int i = 1; i <= model.depth(); ++i) {
    s.push_back(static_cast<int>(supports[i - 1].size()));
    rows.push_back(model.layer(i).rows());
  }
  return evaluate_oracle_bounds(s, rows, kernel_rank, sigma, constants);
}

MonteCarloStats monte_carlo_estimator_error(const MatrixXd& estimator,
                                            const VectorXd& truth_restricted, const VectorXd& x,
                                            double sigma, int trials, std::uint64_t seed) {
  if (estimator.cols() != x.size())
    throw std::invalid_argument("monte_carlo: estimator/signal dims");
  if (estimator.rows() != truth_restricted.size())
    throw std::invalid_argument("monte_carlo: estimator/truth dims");
  if (trials < 2) throw std::invalid_argument("monte_carlo: trials < 2");

  const Eigen::Index p = estimator.rows();
  VectorXd sum = VectorXd::Zero(p);
  VectorXd sum_sq = VectorXd::Zero(p);
  double mse_sum = 0.0, mse_sum_sq = 0.0;
  VectorXd noise(x.size());
  for (int t = 0; t < trials; ++t) {
    Rng rng(substream_seed(seed, static_cast<std::uint64_t>(t)));
    for (Eigen::Index i = 0; i < noise.size(); ++i) noise[i] = sigma * rng.normal();
    const VectorXd err = estimator * (x + noise) - truth_restricted;
    sum += err;
    sum_sq += err.cwiseAbs2();
    const double e2 = err.squaredNorm();
    mse_sum += e2;
    mse_sum_sq += e2 * e2;
  }
  MonteCarloStats st;
  st.trials = trials;
  st.mean_error = sum / trials;
  VectorXd var = (sum_sq - sum.cwiseAbs2() / trials) / (trials - 1);
  st.se_mean = (var.cwiseMax(0.0) / trials).cwiseSqrt();
  st.mse = mse_sum / trials;
  const double mse_var = (mse_sum_sq - mse_sum * mse_sum / trials) / (trials - 1);
  st.se_mse = std::sqrt(std::max(0.0, mse_var) / trials);
  return st;
}

}  // namespace mlsc
