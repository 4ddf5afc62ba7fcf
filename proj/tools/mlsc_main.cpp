// mlsc command line: model generation, signal sampling, diagnostics, pursuit
// and the Monte Carlo experiment harness. File formats are the shared CSV /
// JSON conventions of mlsc::io.

#include "mlsc/experiment.hpp"
#include "mlsc/io.hpp"
#include "mlsc/metrics.hpp"
#include "mlsc/oracle.hpp"
#include "mlsc/pursuit.hpp"
#include "mlsc/rng.hpp"
#include "mlsc/sampler.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>

namespace {

using namespace mlsc;
using nlohmann::json;
namespace fs = std::filesystem;

json index_sets_json(const std::vector<IndexSet>& sets) {
  json arr = json::array();
  for (const auto& s : sets) arr.push_back(s);
  return arr;
}

std::vector<IndexSet> index_sets_from_json(const json& j) {
  std::vector<IndexSet> out;
  for (const auto& s : j) out.push_back(s.get<IndexSet>());
  return out;
}

int cmd_genmodel(const std::vector<int>& dims, std::uint64_t seed, double variance,
                 const std::string& out_dir) {
  if (dims.size() < 2) throw std::runtime_error("--dims needs at least n,m1");
  std::vector<Dictionary> layers;
  for (std::size_t i = 1; i < dims.size(); ++i) {
    // Reference law: first layer 1/n, deeper layers 1/m_i; a positive
    // --variance overrides it everywhere.
    const double var = variance > 0 ? variance : (i == 1 ? 1.0 / dims[0] : 1.0 / dims[i]);
    layers.push_back(sample_dictionary(dims[i - 1], dims[i], var,
                                       substream_seed(seed, i)));
  }
  io::write_model_dir(out_dir, MultiLayerModel(std::move(layers)));
  std::cout << "model written to " << out_dir << "\n";
  return 0;
}

int cmd_sample(const std::string& model_dir, int s_deep, const std::vector<int>& ells,
               double gamma_min, std::uint64_t seed, double sigma, double snr_db,
               const std::string& out_dir) {
  const MultiLayerModel model = io::read_model_dir(model_dir);
  SamplerConfig cfg;
  cfg.deep_sparsity = s_deep;
  cfg.cosparsities = ells;
  cfg.gamma_min = gamma_min;
  const SampledSignal sig = sample_signal(model, cfg, seed);

  fs::create_directories(out_dir);
  io::write_vector_csv(fs::path(out_dir) / "x.csv", sig.stack.x);
  for (int i = 1; i <= model.depth(); ++i)
    io::write_vector_csv(fs::path(out_dir) / ("gamma" + std::to_string(i) + ".csv"),
                         sig.stack.gammas[i - 1]);

  json manifest;
  manifest["seed"] = seed;
  manifest["deep_sparsity"] = s_deep;
  manifest["cosparsities"] = ells;
  manifest["gamma_min"] = gamma_min;
  manifest["supports"] = index_sets_json(sig.pattern.supports);
  manifest["cosupports"] = index_sets_json(sig.pattern.cosupports);
  manifest["kernel_rank"] = sig.constraint.rank;

  if (sigma >= 0 || snr_db > -1e300) {
    NoiseSpec noise;
    if (sigma >= 0) {
      noise.sigma = sigma;
    } else {
      noise.snr_db = snr_db;
    }
    noise.seed = substream_seed(seed, 0xA0);
    const NoisyObservation obs = add_noise(sig.stack.x, noise);
    io::write_vector_csv(fs::path(out_dir) / "y.csv", obs.y);
    manifest["sigma"] = obs.sigma;
    manifest["realized_snr_db"] = obs.realized_snr_db;
  }
  std::ofstream mf(fs::path(out_dir) / "sample.json");
  mf << manifest.dump(2) << '\n';
  std::cout << "sample written to " << out_dir << "\n";
  return 0;
}

int cmd_metrics(const std::string& model_dir, const std::vector<int>& sparsities, double eps,
                int spark_cap, int delta_s_max, const std::string& mode_name,
                const std::string& sample_dir) {
  const MultiLayerModel model = io::read_model_dir(model_dir);
  const EnumerationMode mode =
      mode_name == "exhaustive" ? EnumerationMode::Exhaustive : EnumerationMode::Sampled;
  const Dictionary deff = full_effective_dictionary(model);

  json rep;
  {
    json mu;
    for (int i = 1; i <= model.depth(); ++i)
      mu["D" + std::to_string(i)] = mutual_coherence(model.layer(i));
    mu["Deff"] = mutual_coherence(deff);
    rep["mu"] = mu;
  }
  {
    json mur;
    const auto prods = suffix_products(model);
    for (int i = 1; i < model.depth(); ++i) {
      const std::string key = "D(" + std::to_string(i + 1) + "," +
                              std::to_string(model.depth()) + ")";
      mur[key] = prods[i - 1].rows() >= 2 ? row_mutual_coherence(Dictionary(prods[i - 1])) : 0.0;
      mur[key + ":raw"] =
          prods[i - 1].rows() >= 2 ? row_mutual_coherence(Dictionary(prods[i - 1]), false) : 0.0;
    }
    rep["mu_R"] = mur;
  }
  {
    const SparkResult sp = spark(deff, spark_cap);
    json sj;
    sj["exceeds_cap"] = sp.exceeds_cap;
    if (!sp.exceeds_cap) {
      sj["value"] = sp.value;
      sj["is_sentinel"] = sp.is_sentinel;
    } else {
      sj["coherence_lower_bound"] = 1.0 + 1.0 / mutual_coherence(deff);
    }
    rep["spark"] = sj;
  }
  {
    json table;
    for (int s = 1; s <= std::min(delta_s_max, deff.cols()); ++s) {
      const RipEstimate est = rip_constant(deff, s, mode);
      table[std::to_string(s)] = {{"delta", est.delta},
                                  {"lower_bound_only", est.lower_bound_only}};
    }
    rep["delta_s"] = table;
  }
  if (!sparsities.empty()) {
    if (static_cast<int>(sparsities.size()) != model.depth())
      throw std::runtime_error("--sparsities needs one value per layer");
    json table;
    for (int j = 2; j <= model.depth(); ++j) {
      const RipEstimate est = subset_rip_constant(model.layer(j), sparsities[j - 2],
                                                  sparsities[j - 1], mode);
      table["D" + std::to_string(j)] = {{"delta", est.delta},
                                        {"lower_bound_only", est.lower_bound_only}};
    }
    rep["subset_delta"] = table;

    const auto layered = uniqueness_layered(model, sparsities);
    rep["uniqueness"]["layered"] = {{"unique", layered.unique},
                                    {"margins", layered.margins}};
    const auto effective = uniqueness_effective(model, sparsities.back());
    rep["uniqueness"]["effective"] = {{"unique", effective.unique},
                                      {"threshold", effective.threshold}};
    try {
      rep["stability_bounds"] = stability_bound(model, sparsities, eps);
    } catch (const std::exception& e) {
      rep["stability_bounds"] = e.what();
    }
  }
  if (!sample_dir.empty()) {
    std::ifstream mf(fs::path(sample_dir) / "sample.json");
    if (!mf) throw std::runtime_error("missing sample.json in " + sample_dir);
    const json sample = json::parse(mf);
    RepresentationStack stack;
    stack.x = io::read_vector_csv(fs::path(sample_dir) / "x.csv");
    for (int i = 1; i <= model.depth(); ++i)
      stack.gammas.push_back(
          io::read_vector_csv(fs::path(sample_dir) / ("gamma" + std::to_string(i) + ".csv")));
    const auto hol = uniqueness_holistic(model, stack, spark_cap);
    rep["uniqueness"]["holistic"] = {{"unique", hol.unique},
                                     {"threshold", hol.threshold},
                                     {"rank", hol.rank},
                                     {"conservative", hol.conservative}};
  }
  std::cout << rep.dump(2) << '\n';
  return 0;
}

json pursuit_result_json(const PursuitResult& result) {
  json j;
  j["status"] = result.status == SolveStatus::Converged
                    ? "converged"
                    : (result.status == SolveStatus::MaxIters ? "max-iters" : "infeasible");
  j["eta_used"] = result.eta_used;
  j["chain_residuals"] = result.chain_residuals;
  json log = json::array();
  for (const auto& e : result.log)
    log.push_back({{"iteration", e.iteration},
                   {"layer", e.layer},
                   {"row", e.row},
                   {"signal_residual", e.signal_residual}});
  j["log"] = log;
  if (!result.cosupports_found.empty())
    j["cosupports_found"] = index_sets_json(result.cosupports_found);
  if (!result.kernel_dims.empty()) j["kernel_dims"] = result.kernel_dims;
  return j;
}

int cmd_pursue(const std::string& algo, const std::string& model_dir, const std::string& y_file,
               const std::vector<int>& sparsities, const std::vector<double>& budgets,
               int s_deep, double budget, double eta, const std::vector<int>& ells,
               const std::vector<double>& gamma_mins, double rho, int max_iters, double tol,
               const std::string& out_dir) {
  const MultiLayerModel model = io::read_model_dir(model_dir);
  const VectorXd y = io::read_vector_csv(y_file);
  SolverParams params;
  params.eta = eta;
  params.rho = rho;
  params.max_iters = max_iters;
  params.tol_primal = tol;
  params.tol_dual = tol;

  PursuitResult result;
  if (algo == "layered-thr") {
    result = layered_pursuit_thresholding(model, y, sparsities);
  } else if (algo == "layered-bp") {
    result = layered_pursuit_bp(model, y, budgets, params);
  } else if (algo == "projection-thr") {
    result = projection_pursuit_thresholding(model, y, s_deep);
  } else if (algo == "projection-bp") {
    result = projection_pursuit_bp(model, y, budget, params);
  } else if (algo == "holistic") {
    HolisticOptions opt;
    opt.cosparsities = ells;
    opt.gamma_mins = gamma_mins;
    opt.solver = params;
    result = holistic_pursuit(model, y, opt);
  } else {
    throw std::runtime_error("unknown --algo " + algo);
  }

  fs::create_directories(out_dir);
  for (int i = 1; i <= model.depth(); ++i)
    io::write_vector_csv(fs::path(out_dir) / ("gamma" + std::to_string(i) + "_hat.csv"),
                         result.stack.gammas[i - 1]);
  std::ofstream rf(fs::path(out_dir) / "result.json");
  rf << pursuit_result_json(result).dump(2) << '\n';
  std::cout << pursuit_result_json(result).dump(2) << '\n';
  return 0;
}

int cmd_oracle(const std::string& model_dir, const std::string& sample_dir,
               const std::string& approach, double sigma, int mc_trials,
               const std::string& constants_mode, std::uint64_t seed) {
  const MultiLayerModel model = io::read_model_dir(model_dir);
  std::ifstream mf(fs::path(sample_dir) / "sample.json");
  if (!mf) throw std::runtime_error("missing sample.json in " + sample_dir);
  const json sample = json::parse(mf);
  const VectorXd x = io::read_vector_csv(fs::path(sample_dir) / "x.csv");
  const auto supports = index_sets_from_json(sample.at("supports"));
  const auto cosupports = index_sets_from_json(sample.at("cosupports"));
  std::vector<IndexSet> mid_cos(cosupports.begin(), cosupports.end() - 1);

  RepresentationStack truth;
  truth.x = x;
  for (int i = 1; i <= model.depth(); ++i)
    truth.gammas.push_back(
        io::read_vector_csv(fs::path(sample_dir) / ("gamma" + std::to_string(i) + ".csv")));

  const VectorXd y = x;  // estimators are linear; Monte Carlo adds the noise
  OracleEstimate est;
  int rank = 0;
  if (approach == "layered") {
    est = oracle_layered(model, y, supports, sigma);
  } else if (approach == "projection") {
    est = oracle_projection(model, y, supports, sigma);
  } else if (approach == "holistic") {
    est = oracle_holistic(model, y, supports, mid_cos, sigma);
    rank = build_phi(model, mid_cos, supports.back()).rank;
  } else {
    throw std::runtime_error("unknown --approach " + approach);
  }

  json rep;
  rep["approach"] = approach;
  rep["sigma"] = sigma;
  json layers = json::array();
  for (int i = 1; i <= model.depth(); ++i) {
    const LayerOracle& lo = est.layers[i - 1];
    json lj;
    lj["layer"] = i;
    lj["expected_error"] = lo.expected_error;
    if (mc_trials > 1) {
      const VectorXd truth_restricted = select_entries(truth.gammas[i - 1], lo.support);
      const MonteCarloStats st =
          monte_carlo_estimator_error(lo.estimator, truth_restricted, x, sigma, mc_trials,
                                      substream_seed(seed, static_cast<std::uint64_t>(i)));
      lj["monte_carlo_mse"] = st.mse;
      lj["monte_carlo_se"] = st.se_mse;
    }
    layers.push_back(lj);
  }
  rep["layers"] = layers;

  if (constants_mode != "none") {
    const EnumerationMode mode = constants_mode == "exhaustive" ? EnumerationMode::Exhaustive
                                                                : EnumerationMode::Sampled;
    OracleBoundConstants c;
    bool sampled_flag = false;
    std::vector<int> s;
    for (const auto& supp : supports) s.push_back(static_cast<int>(supp.size()));
    auto grab = [&](const RipEstimate& e) {
      sampled_flag = sampled_flag || e.lower_bound_only;
      return e.delta;
    };
    c.delta_d1 = grab(rip_constant(model.layer(1), s[0], mode));
    for (int j = 2; j <= model.depth(); ++j) {
      c.delta_dj.push_back(grab(rip_constant(model.layer(j), s[j - 1], mode)));
      c.subset_delta_dj.push_back(
          grab(subset_rip_constant(model.layer(j), s[j - 2], s[j - 1], mode)));
    }
    c.delta_deff = grab(rip_constant(full_effective_dictionary(model), s.back(), mode));
    try {
      const OracleBounds bounds = evaluate_oracle_bounds(model, supports, rank, sigma, c);
      const auto& relevant = approach == "layered"
                                 ? bounds.layered
                                 : (approach == "projection" ? bounds.projection
                                                             : bounds.holistic);
      json bj = json::array();
      for (const auto& iv : relevant) bj.push_back({{"lower", iv.lower}, {"upper", iv.upper}});
      rep["bounds"] = bj;
      rep["bounds_are_lower_bound_estimates"] = sampled_flag;
    } catch (const std::exception& e) {
      rep["bounds"] = e.what();
    }
  }
  std::cout << rep.dump(2) << '\n';
  return 0;
}

int cmd_experiment(const std::string& config_file, const std::string& out_dir, int workers,
                   std::int64_t seed_override) {
  std::ifstream in(config_file);
  if (!in) throw std::runtime_error("cannot open config: " + config_file);
  ExperimentConfig cfg = json::parse(in).get<ExperimentConfig>();
  if (workers > 0) cfg.workers = workers;
  if (seed_override >= 0) cfg.master_seed = static_cast<std::uint64_t>(seed_override);

  const ExperimentRun run = run_experiment(cfg);
  emit_report(run, cfg, out_dir);
  std::cout << "experiment written to " << out_dir << " (" << run.records.size()
            << " trial records)\n";
  if (!run.degenerate_cells.empty()) {
    for (const auto& c : run.degenerate_cells)
      std::cerr << "degenerate cell: " << c << "\n";
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-layer sparse coding toolbox"};
  app.require_subcommand(1);

  // genmodel
  std::vector<int> dims;
  std::uint64_t gm_seed = 1;
  double gm_variance = 0.0;
  std::string gm_out;
  auto* genmodel = app.add_subcommand("genmodel", "sample a Gaussian dictionary chain");
  genmodel->add_option("--dims", dims, "n,m1,...,mk")->required()->delimiter(',');
  genmodel->add_option("--seed", gm_seed, "rng seed");
  genmodel->add_option("--variance", gm_variance, "entry variance (default: 1/n, then 1/m_i)");
  genmodel->add_option("--out", gm_out, "output model directory")->required();

  // sample
  std::string sm_model, sm_out;
  int sm_sdeep = 1;
  std::vector<int> sm_ells;
  double sm_gamma_min = 0.0, sm_sigma = -1.0, sm_snr = -1e301;
  std::uint64_t sm_seed = 1;
  auto* samplecmd = app.add_subcommand("sample", "draw a signal from the model");
  samplecmd->add_option("--model", sm_model)->required();
  samplecmd->add_option("--s-deep", sm_sdeep, "deepest-layer sparsity")->required();
  samplecmd->add_option("--ell", sm_ells, "mid-layer co-sparsities")->delimiter(',');
  samplecmd->add_option("--gamma-min", sm_gamma_min);
  samplecmd->add_option("--seed", sm_seed);
  samplecmd->add_option("--sigma", sm_sigma, "noise std (emits y.csv)");
  samplecmd->add_option("--snr-db", sm_snr, "target SNR in dB (emits y.csv)");
  samplecmd->add_option("--out", sm_out)->required();

  // metrics
  std::string mt_model, mt_mode = "exhaustive", mt_sample;
  std::vector<int> mt_sparsities;
  double mt_eps = 0.0;
  int mt_spark_cap = 20, mt_delta_s_max = 4;
  auto* metricscmd = app.add_subcommand("metrics", "dictionary diagnostics as JSON");
  metricscmd->add_option("--model", mt_model)->required();
  metricscmd->add_option("--sparsities", mt_sparsities)->delimiter(',');
  metricscmd->add_option("--eps", mt_eps, "noise energy for stability bounds");
  metricscmd->add_option("--spark-cap", mt_spark_cap);
  metricscmd->add_option("--delta-s-max", mt_delta_s_max);
  metricscmd->add_option("--mode", mt_mode)->check(CLI::IsMember({"exhaustive", "sampled"}));
  metricscmd->add_option("--sample", mt_sample, "sample dir for holistic uniqueness");

  // pursue
  std::string pu_algo, pu_model, pu_y, pu_out;
  std::vector<int> pu_sparsities, pu_ells;
  std::vector<double> pu_budgets, pu_gamma_mins;
  int pu_sdeep = 1, pu_max_iters = 5000;
  double pu_budget = 0.0, pu_eta = 0.0, pu_rho = 1.0, pu_tol = 1e-8;
  auto* pursuecmd = app.add_subcommand("pursue", "run a pursuit algorithm");
  pursuecmd->add_option("--algo", pu_algo)
      ->required()
      ->check(CLI::IsMember(
          {"layered-thr", "layered-bp", "projection-thr", "projection-bp", "holistic"}));
  pursuecmd->add_option("--model", pu_model)->required();
  pursuecmd->add_option("--y", pu_y, "observed signal CSV")->required();
  pursuecmd->add_option("--sparsities", pu_sparsities)->delimiter(',');
  pursuecmd->add_option("--budgets", pu_budgets, "per-layer l1 budgets")->delimiter(',');
  pursuecmd->add_option("--s-deep", pu_sdeep);
  pursuecmd->add_option("--budget", pu_budget, "deepest-layer l1 budget");
  pursuecmd->add_option("--eta", pu_eta);
  pursuecmd->add_option("--ell", pu_ells)->delimiter(',');
  pursuecmd->add_option("--gamma-min", pu_gamma_mins)->delimiter(',');
  pursuecmd->add_option("--rho", pu_rho);
  pursuecmd->add_option("--max-iters", pu_max_iters);
  pursuecmd->add_option("--tol", pu_tol);
  pursuecmd->add_option("--out", pu_out)->required();

  // oracle
  std::string or_model, or_sample, or_approach, or_constants = "none";
  double or_sigma = 0.0;
  int or_trials = 0;
  std::uint64_t or_seed = 1;
  auto* oraclecmd = app.add_subcommand("oracle", "known-support estimators");
  oraclecmd->add_option("--model", or_model)->required();
  oraclecmd->add_option("--sample", or_sample)->required();
  oraclecmd->add_option("--approach", or_approach)
      ->required()
      ->check(CLI::IsMember({"layered", "projection", "holistic"}));
  oraclecmd->add_option("--sigma", or_sigma)->required();
  oraclecmd->add_option("--mc-trials", or_trials);
  oraclecmd->add_option("--constants", or_constants)
      ->check(CLI::IsMember({"none", "exhaustive", "sampled"}));
  oraclecmd->add_option("--seed", or_seed);

  // experiment
  std::string ex_config, ex_out;
  int ex_workers = 0;
  std::int64_t ex_seed = -1;
  auto* expcmd = app.add_subcommand("experiment", "seeded Monte Carlo sweep");
  expcmd->add_option("--config", ex_config)->required();
  expcmd->add_option("--out", ex_out)->required();
  expcmd->add_option("--workers", ex_workers);
  expcmd->add_option("--seed", ex_seed, "override master seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*genmodel) return cmd_genmodel(dims, gm_seed, gm_variance, gm_out);
    if (*samplecmd)
      return cmd_sample(sm_model, sm_sdeep, sm_ells, sm_gamma_min, sm_seed, sm_sigma, sm_snr,
                        sm_out);
    if (*metricscmd)
      return cmd_metrics(mt_model, mt_sparsities, mt_eps, mt_spark_cap, mt_delta_s_max, mt_mode,
                         mt_sample);
    if (*pursuecmd)
      return cmd_pursue(pu_algo, pu_model, pu_y, pu_sparsities, pu_budgets, pu_sdeep, pu_budget,
                        pu_eta, pu_ells, pu_gamma_mins, pu_rho, pu_max_iters, pu_tol, pu_out);
    if (*oraclecmd)
      return cmd_oracle(or_model, or_sample, or_approach, or_sigma, or_trials, or_constants,
                        or_seed);
    if (*expcmd) return cmd_experiment(ex_config, ex_out, ex_workers, ex_seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
