#include "mlsc/experiment.hpp"

#include "mlsc/io.hpp"
#include "mlsc/pursuit.hpp"
#include "mlsc/rng.hpp"
#include "mlsc/sampler.hpp"

#include <atomic>
#include <mutex>
#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>

namespace mlsc {

using nlohmann::json;

void to_json(json& j, const ExperimentConfig& c) {
  j = json{{"n", c.n},
           {"m", c.m},
           {"ell1_values", c.ell1_values},
           {"s2_minus_ell1", c.s2_minus_ell1},
           {"s2_values", c.s2_values},
           {"snr_db_values", c.snr_db_values},
           {"trials", c.trials},
           {"master_seed", c.master_seed},
           {"algorithms", c.algorithms},
           {"eta_rule", c.eta_rule},
           {"eta_fixed", c.eta_fixed},
           {"fixed_dict", c.fixed_dict},
           {"gamma_min", c.gamma_min},
           {"workers", c.workers},
           {"admm_max_iters", c.admm_max_iters},
           {"admm_tol", c.admm_tol}};
}

void from_json(const json& j, ExperimentConfig& c) {
  c = ExperimentConfig{};
  j.at("n").get_to(c.n);
  j.at("m").get_to(c.m);
  j.at("ell1_values").get_to(c.ell1_values);
  if (j.contains("s2_minus_ell1")) j.at("s2_minus_ell1").get_to(c.s2_minus_ell1);
  if (j.contains("s2_values")) j.at("s2_values").get_to(c.s2_values);
  j.at("snr_db_values").get_to(c.snr_db_values);
  if (j.contains("trials")) j.at("trials").get_to(c.trials);
  if (j.contains("master_seed")) j.at("master_seed").get_to(c.master_seed);
  if (j.contains("algorithms")) j.at("algorithms").get_to(c.algorithms);
  if (j.contains("eta_rule")) j.at("eta_rule").get_to(c.eta_rule);
  if (j.contains("eta_fixed")) j.at("eta_fixed").get_to(c.eta_fixed);
  if (j.contains("fixed_dict")) j.at("fixed_dict").get_to(c.fixed_dict);
  if (j.contains("gamma_min")) j.at("gamma_min").get_to(c.gamma_min);
  if (j.contains("workers")) j.at("workers").get_to(c.workers);
  if (j.contains("admm_max_iters")) j.at("admm_max_iters").get_to(c.admm_max_iters);
  if (j.contains("admm_tol")) j.at("admm_tol").get_to(c.admm_tol);
}

namespace {

struct Cell {
  int ell1 = 0;
  int s2 = 0;
  double snr_db = 0.0;
};

std::vector<Cell> enumerate_cells(const ExperimentConfig& c) {
  std::vector<Cell> cells;
  for (double snr : c.snr_db_values) {
    for (int ell1 : c.ell1_values) {
      if (c.s2_values.empty()) {
        cells.push_back({ell1, ell1 + c.s2_minus_ell1, snr});
      } else {
        for (int s2 : c.s2_values) cells.push_back({ell1, s2, snr});
      }
    }
  }
  return cells;
}

std::string cell_name(const Cell& cell) {
  return "ell1=" + std::to_string(cell.ell1) + ",s2=" + std::to_string(cell.s2) +
         ",snr_db=" + io::format_double(cell.snr_db);
}

// Seed tags for the independent substreams of one trial.
enum : std::uint64_t { kTagDict1 = 0x11, kTagDict2 = 0x12, kTagSignal = 0x21, kTagNoise = 0x31 };

TrialRecord run_trial(const ExperimentConfig& cfg, const Cell& cell, int cell_index, int trial) {
  TrialRecord rec;
  rec.cell_index = cell_index;
  rec.ell1 = cell.ell1;
  rec.s2 = cell.s2;
  rec.snr_db = cell.snr_db;
  rec.trial = trial;
  rec.seed = substream_seed(cfg.master_seed, static_cast<std::uint64_t>(cell_index),
                            static_cast<std::uint64_t>(trial));

  // Dictionary law of the reference experiment: D_1 ~ N(0, 1/n), D_2 ~ N(0, 1/m_2).
  const std::uint64_t dict_base =
      cfg.fixed_dict ? substream_seed(cfg.master_seed, static_cast<std::uint64_t>(cell_index),
                                      0xF17EDDull)
                     : rec.seed;
  Dictionary d1 = sample_dictionary(cfg.n, cfg.m[0], 1.0 / cfg.n,
                                    substream_seed(dict_base, kTagDict1));
  Dictionary d2 = sample_dictionary(cfg.m[0], cfg.m[1], 1.0 / cfg.m[1],
                                    substream_seed(dict_base, kTagDict2));
  MultiLayerModel model({std::move(d1), std::move(d2)});

  SamplerConfig sampler;
  sampler.cosparsities = {cell.ell1};
  sampler.deep_sparsity = cell.s2;
  sampler.gamma_min = cfg.gamma_min;
  const SampledSignal sig = sample_signal(model, sampler, substream_seed(rec.seed, kTagSignal));

  const bool noiseless = cell.snr_db >= kNoiselessSnrDb;
  NoiseSpec noise;
  if (noiseless) {
    noise.sigma = 0.0;
  } else {
    noise.snr_db = cell.snr_db;
  }
  noise.seed = substream_seed(rec.seed, kTagNoise);
  const NoisyObservation obs = add_noise(sig.stack.x, noise);
  const double sigma = obs.sigma;

  SolverParams params;
  params.max_iters = cfg.admm_max_iters;
  params.tol_primal = cfg.admm_tol;
  params.tol_dual = cfg.admm_tol;

  const VectorXd& gamma2 = sig.stack.deepest();
  const VectorXd& gamma1 = sig.stack.gammas[0];
  const double gamma2_sq = gamma2.squaredNorm();

  // The eta rule is evaluated once per trial on the unconstrained (outer
  // shell) problem and shared by the basis-pursuit style algorithms.
  bool need_eta = false;
  for (const auto& a : cfg.algorithms)
    if (a == "holistic" || a == "projection-bp") need_eta = true;
  double eta = cfg.eta_fixed;
  VectorXd projection_gamma;
  if (need_eta) {
    const MatrixXd deff = full_effective_dictionary(model).mat();
    if (cfg.eta_rule == "residual") {
      const double target = static_cast<double>(cfg.n) * sigma * sigma;
      EtaSelection sel = select_eta_by_residual(deff, obs.y, target, params);
      eta = sel.eta;
      projection_gamma = sel.gamma;
    } else if (cfg.eta_rule == "fixed") {
      SolverParams p = params;
      p.eta = eta;
      projection_gamma = lasso(deff, obs.y, p).gamma;
    } else {
      throw std::invalid_argument("unknown eta rule: " + cfg.eta_rule);
    }
  }

  for (const auto& name : cfg.algorithms) {
    const auto start = std::chrono::steady_clock::now();
    PursuitResult result;
    if (name == "holistic") {
      HolisticOptions opt;
      opt.cosparsities = {cell.ell1};
      if (cfg.gamma_min > 0) opt.gamma_mins = {cfg.gamma_min};
      opt.solver = params;
      opt.solver.eta = eta;
      result = holistic_pursuit(model, obs.y, opt);
    } else if (name == "projection-bp") {
      result = stack_from_deepest(model, projection_gamma, eta);
    } else if (name == "projection-thr") {
      result = projection_pursuit_thresholding(model, obs.y, cell.s2);
    } else if (name == "layered-thr") {
      result = layered_pursuit_thresholding(
          model, obs.y, {cfg.m[0] - cell.ell1, cell.s2});
    } else if (name == "layered-bp") {
      result = layered_pursuit_bp(model, obs.y,
                                  {gamma1.lpNorm<1>(), gamma2.lpNorm<1>()}, params);
    } else {
      throw std::invalid_argument("unknown algorithm: " + name);
    }
    const auto stop = std::chrono::steady_clock::now();

    AlgoOutcome out;
    out.sq_err = (result.stack.deepest() - gamma2).squaredNorm();
    out.sq_err_norm = gamma2_sq > 0 ? out.sq_err / gamma2_sq : 0.0;
    const RecoveryScore score = score_recovery(result, sig.pattern);
    out.support_ok = score.deep_support_exact && score.cosupports_exact;
    out.mid_residual_ratio =
        result.chain_residuals.size() > 1 && gamma1.norm() > 0
            ? result.chain_residuals[1] / gamma1.norm()
            : 0.0;
    out.runtime_ms = std::chrono::duration<double, std::milli>(stop - start).count();
    rec.algo[name] = out;
  }
  return rec;
}

}  // namespace

ExperimentRun run_experiment(const ExperimentConfig& cfg) {
  if (cfg.m.size() != 2)
    throw std::invalid_argument("run_experiment: the sweep harness covers two-layer models");
  if (cfg.trials < 1) throw std::invalid_argument("run_experiment: trials < 1");
  const std::vector<Cell> cells = enumerate_cells(cfg);

  ExperimentRun run;
  run.records.resize(cells.size() * static_cast<std::size_t>(cfg.trials));
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::string failure;
  std::mutex failure_mutex;

  auto worker = [&]() {
    while (true) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= run.records.size() || failed.load()) break;
      const int cell_index = static_cast<int>(idx / cfg.trials);
      const int trial = static_cast<int>(idx % cfg.trials);
      try {
        run.records[idx] = run_trial(cfg, cells[cell_index], cell_index, trial);
      } catch (const DegenerateModel&) {
        TrialRecord rec;
        rec.cell_index = cell_index;
        rec.ell1 = cells[cell_index].ell1;
        rec.s2 = cells[cell_index].s2;
        rec.snr_db = cells[cell_index].snr_db;
        rec.trial = trial;
        rec.degenerate = true;
        run.records[idx] = rec;
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        failure = e.what();
        failed.store(true);
        break;
      }
    }
  };

  const int nworkers = std::max(1, cfg.workers);
  if (nworkers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < nworkers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failed.load()) throw std::runtime_error("experiment trial failed: " + failure);

  // Deterministic fold in trial-index order.
  for (std::size_t c = 0; c < cells.size(); ++c) {
    bool cell_degenerate = false;
    for (const auto& name : cfg.algorithms) {
      CellAggregate agg;
      agg.ell1 = cells[c].ell1;
      agg.s2 = cells[c].s2;
      agg.snr_db = cells[c].snr_db;
      agg.algo = name;
      double sum = 0, sum_sq = 0, sum_n = 0, sum_n_sq = 0;
      int ok = 0, count = 0;
      for (int t = 0; t < cfg.trials; ++t) {
        const TrialRecord& rec = run.records[c * cfg.trials + t];
        if (rec.degenerate) {
          cell_degenerate = true;
          continue;
        }
        const AlgoOutcome& out = rec.algo.at(name);
        sum += out.sq_err;
        sum_sq += out.sq_err * out.sq_err;
        sum_n += out.sq_err_norm;
        sum_n_sq += out.sq_err_norm * out.sq_err_norm;
        ok += out.support_ok ? 1 : 0;
        ++count;
      }
      agg.trials = count;
      if (count > 0) {
        agg.mean_sq_err = sum / count;
        agg.mean_sq_err_norm = sum_n / count;
        agg.support_rate = static_cast<double>(ok) / count;
        if (count > 1) {
          agg.stderr_sq_err =
              std::sqrt(std::max(0.0, (sum_sq - sum * sum / count) / (count - 1)) / count);
          agg.stderr_sq_err_norm =
              std::sqrt(std::max(0.0, (sum_n_sq - sum_n * sum_n / count) / (count - 1)) / count);
        }
      }
      run.aggregates.push_back(std::move(agg));
    }
    if (cell_degenerate) run.degenerate_cells.push_back(cell_name(cells[c]));
  }
  return run;
}

void emit_report(const ExperimentRun& run, const ExperimentConfig& cfg,
                 const std::filesystem::path& out_dir) {
  if (run.records.empty()) throw std::invalid_argument("emit_report: empty record set");
  std::filesystem::create_directories(out_dir);

  auto write_aggregates = [&](const std::filesystem::path& path, bool normalized) {
    std::ofstream out(path);
    out << "ell1,s2,snr_db,algo,mean_sq_err,stderr_sq_err,support_rate,trials,seed\n";
    for (const auto& a : run.aggregates) {
      out << a.ell1 << ',' << a.s2 << ',' << io::format_double(a.snr_db) << ',' << a.algo << ','
          << io::format_double(normalized ? a.mean_sq_err_norm : a.mean_sq_err) << ','
          << io::format_double(normalized ? a.stderr_sq_err_norm : a.stderr_sq_err) << ','
          << io::format_double(a.support_rate) << ',' << a.trials << ',' << cfg.master_seed
          << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
  };
  write_aggregates(out_dir / "results.csv", false);
  write_aggregates(out_dir / "results_normalized.csv", true);

  {
    std::ofstream out(out_dir / "trials.csv");
    out << "ell1,s2,snr_db,trial,seed,algo,sq_err,sq_err_norm,support_ok,mid_residual_ratio,"
           "runtime_ms\n";
    for (const auto& rec : run.records) {
      if (rec.degenerate) continue;
      for (const auto& [name, o] : rec.algo) {
        out << rec.ell1 << ',' << rec.s2 << ',' << io::format_double(rec.snr_db) << ','
            << rec.trial << ',' << rec.seed << ',' << name << ','
            << io::format_double(o.sq_err) << ',' << io::format_double(o.sq_err_norm) << ','
            << (o.support_ok ? 1 : 0) << ',' << io::format_double(o.mid_residual_ratio) << ','
            << io::format_double(o.runtime_ms) << '\n';
      }
    }
    if (!out) throw std::runtime_error("write failed: trials.csv");
  }

  json summary;
  summary["config"] = cfg;
  summary["degenerate_cells"] = run.degenerate_cells;
  json ratios = json::array();
  for (std::size_t i = 0; i < run.aggregates.size(); ++i) {
    const auto& a = run.aggregates[i];
    if (a.algo != "holistic") continue;
    for (std::size_t j = 0; j < run.aggregates.size(); ++j) {
      const auto& b = run.aggregates[j];
      if (b.algo == "projection-bp" && b.ell1 == a.ell1 && b.s2 == a.s2 &&
          b.snr_db == a.snr_db && b.mean_sq_err > 0) {
        ratios.push_back({{"ell1", a.ell1},
                          {"s2", a.s2},
                          {"snr_db", a.snr_db},
                          {"holistic_over_projection", a.mean_sq_err / b.mean_sq_err}});
      }
    }
  }
  summary["holistic_projection_ratios"] = ratios;
  std::ofstream out(out_dir / "summary.json");
  out << summary.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed: summary.json");
}

}  // namespace mlsc
