#include "mlsc/sampler.hpp"

#include <cmath>

namespace mlsc {

Dictionary sample_dictionary(int rows, int cols, double variance, std::uint64_t seed) {
  if (variance <= 0) throw std::invalid_argument("sample_dictionary: variance <= 0");
  Rng rng(seed);
  const double sd = std::sqrt(variance);
  MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = sd * rng.normal();
  return Dictionary(std::move(m));
}

namespace {

// Checks the exact-pattern and gamma_min conditions for a propagated stack.
// gamma_k is checked against Lambda_k; each mid-layer against Lambda_i^c.
bool pattern_ok(const std::vector<VectorXd>& gammas, const IndexSet& deep_support,
                const std::vector<IndexSet>& cosupports, const SamplerConfig& cfg) {
  const VectorXd& gk = gammas.back();
  const double tol_k = cfg.zero_tol_rel * gk.norm();
  if (gk.norm() == 0.0) return false;
  std::size_t p = 0;
  for (Eigen::Index j = 0; j < gk.size(); ++j) {
    const bool on_support = p < deep_support.size() && deep_support[p] == j + 1;
    if (on_support) ++p;
    if (on_support && std::abs(gk[j]) <= tol_k) return false;  // accidental zero
  }
  for (std::size_t i = 0; i + 1 < gammas.size(); ++i) {
    const VectorXd& g = gammas[i];
    const double tol = cfg.zero_tol_rel * g.norm();
    const IndexSet& cos = cosupports[i];
    std::size_t q = 0;
    for (Eigen::Index j = 0; j < g.size(); ++j) {
      const bool on_cosupport = q < cos.size() && cos[q] == j + 1;
      if (on_cosupport) ++q;
      if (on_cosupport) {
        if (std::abs(g[j]) > tol) return false;  // constraint violated
      } else {
        if (std::abs(g[j]) <= tol) return false;  // accidental zero on support
        if (std::abs(g[j]) < cfg.gamma_min) return false;
      }
    }
  }
  return true;
}

}  // namespace

SampledSignal sample_signal(const MultiLayerModel& model, const SamplerConfig& config,
                            std::uint64_t seed) {
  const int k = model.depth();
  if (static_cast<int>(config.cosparsities.size()) != k - 1)
    throw std::invalid_argument("sample_signal: cosparsities size != k-1");
  const int mk = model.layer_dim(k);
  if (config.deep_sparsity < 1 || config.deep_sparsity > mk)
    throw std::invalid_argument("sample_signal: deep sparsity outside [1, m_k]");
  for (int i = 1; i < k; ++i)
    if (config.cosparsities[i - 1] < 0 || config.cosparsities[i - 1] > model.layer_dim(i))
      throw std::invalid_argument("sample_signal: cosparsity outside [0, m_i]");

  Rng rng(seed);
  const auto prods = suffix_products(model);
  const MatrixXd deff = full_effective_dictionary(model).mat();

  for (int support_attempt = 0; support_attempt <= config.max_resample; ++support_attempt) {
    IndexSet lam_k = rng.subset(mk, config.deep_sparsity);
    std::vector<IndexSet> cosupports;
    for (int i = 1; i < k; ++i)
      cosupports.push_back(rng.subset(model.layer_dim(i), config.cosparsities[i - 1]));

    AnalysisConstraint ac = build_phi(model, cosupports, lam_k);
    if (ac.kernel_dim() == 0) continue;  // r >= s_k: only gamma_k = 0 fits

    for (int alpha_attempt = 0; alpha_attempt <= config.max_resample; ++alpha_attempt) {
      VectorXd alpha(ac.kernel_dim());
      for (Eigen::Index t = 0; t < alpha.size(); ++t) alpha[t] = rng.normal();
      VectorXd gk = scatter(ac.kernel_basis * alpha, lam_k, mk);

      std::vector<VectorXd> gammas(k);
      gammas[k - 1] = gk;
      for (int i = k - 1; i >= 1; --i) gammas[i - 1] = prods[i - 1] * gk;
      if (!pattern_ok(gammas, lam_k, cosupports, config)) continue;

      SampledSignal out;
      out.stack.gammas = std::move(gammas);
      out.stack.x = deff * gk;
      out.alpha = std::move(alpha);
      out.constraint = std::move(ac);
      for (int i = 1; i < k; ++i) {
        out.pattern.cosupports.push_back(cosupports[i - 1]);
        out.pattern.supports.push_back(complement(cosupports[i - 1], model.layer_dim(i)));
      }
      out.pattern.supports.push_back(lam_k);
      out.pattern.cosupports.push_back(complement(lam_k, mk));
      return out;
    }
  }
  throw DegenerateModel("sample_signal: resample budget exhausted (model degenerate or "
                        "gamma_min too demanding)");
}

NoisyObservation add_noise(const VectorXd& x, const NoiseSpec& spec) {
  if (spec.sigma.has_value() == spec.snr_db.has_value())
    throw std::invalid_argument("add_noise: give exactly one of sigma / snr_db");
  double sigma;
  if (spec.sigma) {
    if (*spec.sigma < 0) throw std::invalid_argument("add_noise: sigma < 0");
    sigma = *spec.sigma;
  } else {
    const double x2 = x.squaredNorm();
    if (x2 == 0.0) throw std::invalid_argument("add_noise: zero signal in snr_db mode");
    sigma = std::sqrt(x2 / (static_cast<double>(x.size()) * std::pow(10.0, *spec.snr_db / 10.0)));
  }
  Rng rng(spec.seed);
  VectorXd e(x.size());
  for (Eigen::Index i = 0; i < e.size(); ++i) e[i] = sigma * rng.normal();
  NoisyObservation obs;
  obs.y = x + e;
  obs.sigma = sigma;
  const double e2 = e.squaredNorm();
  obs.realized_snr_db = e2 > 0 ? 10.0 * std::log10(x.squaredNorm() / e2)
                               : std::numeric_limits<double>::infinity();
  return obs;
}

}  // namespace mlsc
