#pragma once

#include "mlsc/core.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

// Monte Carlo experiment harness for the two-layer recovery sweeps: per-cell
// trials over (ell_1, s_2, SNR), seeded substreams per trial so results do not
// depend on the worker count, and CSV/JSON reporting.

namespace mlsc {

struct ExperimentConfig {
  int n = 50;
  std::vector<int> m = {100, 50};          // m_1, m_2
  std::vector<int> ell1_values = {2, 4, 6, 8, 10};
  int s2_minus_ell1 = 1;                   // s_2 = ell_1 + this, unless s2_values given
  std::vector<int> s2_values;              // optional explicit s_2 axis (full grid)
  std::vector<double> snr_db_values = {25.0};
  int trials = 500;
  std::uint64_t master_seed = 1;
  std::vector<std::string> algorithms = {"holistic", "projection-bp"};
  std::string eta_rule = "residual";       // "residual" (max eta fitting n sigma^2) or "fixed"
  double eta_fixed = 0.0;
  bool fixed_dict = false;                 // one dictionary draw per cell instead of per trial
  double gamma_min = 0.0;
  int workers = 1;
  int admm_max_iters = 5000;
  double admm_tol = 1e-8;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

/// SNR values at or above this stand for the noiseless sigma = 0 case.
inline constexpr double kNoiselessSnrDb = 1e6;

struct AlgoOutcome {
  double sq_err = 0.0;             // ||gamma_hat_2 - gamma_2||^2
  double sq_err_norm = 0.0;        // divided by ||gamma_2||^2
  bool support_ok = false;         // full pattern (deep support + mid co-supports)
  double mid_residual_ratio = 0.0; // ||gamma_hat_1 - D_2 gamma_hat_2|| / ||gamma_1||
  double runtime_ms = 0.0;
};

struct TrialRecord {
  int cell_index = 0;
  int ell1 = 0;
  int s2 = 0;
  double snr_db = 0.0;
  int trial = 0;
  std::uint64_t seed = 0;
  bool degenerate = false;
  std::map<std::string, AlgoOutcome> algo;
};

struct CellAggregate {
  int ell1 = 0;
  int s2 = 0;
  double snr_db = 0.0;
  std::string algo;
  double mean_sq_err = 0.0;
  double stderr_sq_err = 0.0;
  double mean_sq_err_norm = 0.0;
  double stderr_sq_err_norm = 0.0;
  double support_rate = 0.0;
  int trials = 0;
};

struct ExperimentRun {
  std::vector<TrialRecord> records;
  std::vector<CellAggregate> aggregates;
  std::vector<std::string> degenerate_cells;
};

ExperimentRun run_experiment(const ExperimentConfig& config);

/// Writes results.csv (exact column set), results_normalized.csv, trials.csv
/// and summary.json (config echo + per-cell holistic/projection ratios).
void emit_report(const ExperimentRun& run, const ExperimentConfig& config,
                 const std::filesystem::path& out_dir);

}  // namespace mlsc
