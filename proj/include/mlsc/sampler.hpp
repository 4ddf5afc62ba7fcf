#pragma once

#include "mlsc/core.hpp"
#include "mlsc/rng.hpp"

#include <cstdint>
#include <optional>

// Sampling of model instances and signals. A signal is drawn by choosing the
// deep support and mid-layer co-supports, building the kernel basis K of
// Phi^{Lambda_k}, placing K*alpha (alpha standard Gaussian) on the deep
// support, and propagating through the suffix products. Every sampled stack
// satisfies the model constraints exactly up to floating-point error.

namespace mlsc {

/// Thrown when sampling cannot produce a valid signal (e.g. r >= s_k leaves a
/// zero-dimensional kernel) within the configured attempts.
struct DegenerateModel : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NoiseSpec {
  std::optional<double> sigma;   // per-entry Gaussian std
  std::optional<double> snr_db;  // alternative: target SNR in dB
  std::uint64_t seed = 0;
};

struct NoisyObservation {
  VectorXd y;
  double sigma = 0.0;             // std actually used
  double realized_snr_db = 0.0;   // 10 log10(||x||^2 / ||e||^2)
};

struct SamplerConfig {
  std::vector<int> cosparsities;  // ell_i for mid-layers, size k-1
  int deep_sparsity = 0;          // s_k
  double gamma_min = 0.0;         // minimum |gamma_i| on mid-layer supports
  int max_resample = 50;          // alpha redraws per support draw, and support redraws
  double zero_tol_rel = 1e-9;     // |entry| <= tol * ||gamma_i||_2 counts as zero
};

struct SampledSignal {
  RepresentationStack stack;
  SupportPattern pattern;         // drawn supports/co-supports (all layers)
  AnalysisConstraint constraint;  // Phi, Phi^{Lambda_k}, K, r for the drawn supports
  VectorXd alpha;                 // kernel coefficients actually used
};

/// I.i.d. Gaussian dictionary with the given entry variance; deterministic
/// under `seed` (entries drawn in column-major order).
Dictionary sample_dictionary(int rows, int cols, double variance, std::uint64_t seed);

SampledSignal sample_signal(const MultiLayerModel& model, const SamplerConfig& config,
                            std::uint64_t seed);

NoisyObservation add_noise(const VectorXd& x, const NoiseSpec& spec);

}  // namespace mlsc
