#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <fstream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "mkv/analysis.hpp"
#include "mkv/config.hpp"
#include "mkv/dynamics.hpp"
#include "mkv/errors.hpp"
#include "mkv/estimators.hpp"
#include "mkv/planner.hpp"

namespace mkv {

// Concrete (t, n, N, M, schedule) for one run, either taken verbatim from
// the config or produced by the planner.
struct ResolvedParams {
  double t = 1.0;
  std::uint64_t n = 1;
  std::uint64_t N = 1;
  std::uint64_t M = 1;
  ParticleSchedule::Kind schedule = ParticleSchedule::Kind::Constant;
  std::optional<double> predicted_cost;
};

inline ResolvedParams resolve_params(const ExperimentConfig& cfg) {
  ResolvedParams p;
  if (cfg.uses_planner()) {
    PlannerInput in;
    in.algorithm = cfg.algorithm;
    in.epsilon = *cfg.epsilon;
    in.lambda = cfg.lambda.value_or(1.0);
    in.cost_constant = cfg.cost_constant;
    in.self_variant = cfg.schedule == "harmonic" ? SelfVariant::Harmonic
                                                 : SelfVariant::ConstantOne;
    const ParameterPlan planned = plan(in);
    p.t = planned.t;
    p.n = planned.n;
    p.N = planned.N;
    p.M = planned.M;
    p.schedule = planned.schedule;
    p.predicted_cost = planned.predicted_cost;
  } else {
    p.t = *cfg.t;
    p.n = *cfg.n;
    p.N = *cfg.N;
    p.M = cfg.M;
    p.schedule = cfg.schedule == "harmonic" ? ParticleSchedule::Kind::Harmonic
                                            : ParticleSchedule::Kind::Constant;
  }
  return p;
}

inline ModelSpec build_model(const ExperimentConfig& cfg) {
  InitialLaw initial = InitialLaw::point_mass({cfg.x0});
  if (cfg.initial_kind == "gaussian")
    initial = InitialLaw::gaussian({cfg.initial_mean}, {cfg.initial_cov});
  else if (cfg.initial_kind == "file")
    initial = InitialLaw::empirical_file(cfg.initial_path);
  const KernelStyle style = cfg.kernel_style == "feature"
                                ? KernelStyle::FeatureAverage
                                : KernelStyle::Pairwise;
  return linear_model(cfg.alpha, cfg.beta, style, std::move(initial));
}

inline std::optional<double> resolve_reference(const ExperimentConfig& cfg) {
  if (cfg.reference == "none") return std::nullopt;
  if (cfg.reference != "auto") return std::stod(cfg.reference);
  if (cfg.observable == "x" || cfg.observable == "coord:0")
    return invariant_moment(cfg.alpha, cfg.beta, 1);
  if (cfg.observable == "x2" || cfg.observable == "squared_norm")
    return invariant_moment(cfg.alpha, cfg.beta, 2);
  return std::nullopt;
}

inline EstimatorKind estimator_for(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::EA: return EstimatorKind::EA;
    case Algorithm::MCA: return EstimatorKind::MCA;
    case Algorithm::AEA: return EstimatorKind::AEA;
    case Algorithm::C_AEA: return EstimatorKind::C_AEA;
    case Algorithm::ES_AEA:
    case Algorithm::CS_AEA: return EstimatorKind::CS_AEA;
  }
  throw ConfigError("estimator_for: unknown algorithm");
}

// One fully deterministic replication: all randomness derives from
// (cfg.seed + replication index).
inline ExperimentResult run_replication(const ExperimentConfig& cfg,
                                        const ResolvedParams& params,
                                        std::uint64_t replication,
                                        const TrajectorySink& trajectory = nullptr) {
  const auto start = std::chrono::steady_clock::now();
  const ModelSpec model = build_model(cfg);
  const TimeGrid grid(params.n, params.t);
  const ParticleSchedule schedule =
      params.schedule == ParticleSchedule::Kind::Harmonic
          ? ParticleSchedule::harmonic(params.N, params.n)
          : ParticleSchedule::constant(params.N);
  const DynamicsKind kind =
      cfg.self_dynamics() ? DynamicsKind::SELF : DynamicsKind::IPS;
  const std::uint64_t rep_seed = cfg.seed + replication;

  ErgodicAccumulator acc(observable_from_name(cfg.observable), cfg.burn_in);
  SimResult sim;
  try {
    sim = simulate(model, grid, params.M, schedule, kind, {&acc}, rep_seed, 0,
                   trajectory);
  } catch (const DivergenceError& e) {
    throw DivergenceError(std::string(e.what()) + " (replication seed " +
                          std::to_string(rep_seed) + ")");
  }

  ExperimentResult result;
  result.algorithm = algorithm_name(cfg.algorithm);
  result.t = params.t;
  result.n = params.n;
  result.N = params.N;
  result.M = params.M;
  result.schedule = params.schedule == ParticleSchedule::Kind::Harmonic
                        ? "harmonic"
                        : "constant";
  result.seed = rep_seed;
  result.estimate = finalize(estimator_for(cfg.algorithm), acc);
  result.reference = resolve_reference(cfg);
  if (result.reference)
    result.error = std::abs(result.estimate - *result.reference);
  result.ledger = sim.ledger;
  const auto end = std::chrono::steady_clock::now();
  result.wall_time_s =
      cfg.zero_timings
          ? 0.0
          : std::chrono::duration<double>(end - start).count();
  return result;
}

// ---------------------------------------------------------------------------
// Serialisation

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string csv_header() {
  return "algorithm,t,n,N,M,schedule,seed,estimate,reference,abs_error,"
         "kernel_evals,noise_draws,wall_time_s";
}

inline std::string csv_row(const ExperimentResult& r) {
  std::string row = r.algorithm;
  row += ',' + format_double(r.t);
  row += ',' + std::to_string(r.n);
  row += ',' + std::to_string(r.N);
  row += ',' + std::to_string(r.M);
  row += ',' + r.schedule;
  row += ',' + std::to_string(r.seed);
  row += ',' + format_double(r.estimate);
  row += ',';
  if (r.reference) row += format_double(*r.reference);
  row += ',';
  if (r.error) row += format_double(*r.error);
  row += ',' + std::to_string(r.ledger.kernel_evals);
  row += ',' + std::to_string(r.ledger.noise_draws);
  row += ',' + format_double(r.wall_time_s);
  return row;
}

inline nlohmann::json summarize(const std::vector<ExperimentResult>& rows) {
  nlohmann::json j;
  if (rows.empty()) return j;
  j["algorithm"] = rows.front().algorithm;
  j["t"] = rows.front().t;
  j["n"] = rows.front().n;
  j["N"] = rows.front().N;
  j["M"] = rows.front().M;
  j["schedule"] = rows.front().schedule;
  j["replications"] = rows.size();
  double sum = 0.0;
  for (const auto& r : rows) sum += r.estimate;
  const double mean = sum / static_cast<double>(rows.size());
  j["mean"] = mean;
  if (rows.size() > 1) {
    double sq = 0.0;
    for (const auto& r : rows) sq += (r.estimate - mean) * (r.estimate - mean);
    j["sample_std"] = std::sqrt(sq / static_cast<double>(rows.size() - 1));
  }
  if (rows.front().reference) {
    j["reference"] = *rows.front().reference;
    double sq_ref = 0.0;
    for (const auto& r : rows)
      sq_ref += (r.estimate - *r.reference) * (r.estimate - *r.reference);
    j["mse"] = std::sqrt(sq_ref / static_cast<double>(rows.size()));
  }
  return j;
}

// ---------------------------------------------------------------------------
// Orchestration

// Runs all replications (across a bounded worker pool when workers > 1) and
// writes <output>.csv plus <output>.json. Replication order in the output is
// fixed regardless of scheduling.
inline std::vector<ExperimentResult> run_experiment(
    const ExperimentConfig& cfg) {
  const ResolvedParams params = resolve_params(cfg);
  const std::uint64_t R = cfg.replications;
  std::vector<ExperimentResult> rows(R);
  std::vector<std::string> trajectories(R);

  const std::uint64_t workers = std::min<std::uint64_t>(cfg.workers, R);
  std::atomic<std::uint64_t> next{0};
  std::atomic<bool> failed{false};
  std::string failure;
  std::mutex failure_mutex;

  auto work = [&]() {
    for (;;) {
      const std::uint64_t rep = next.fetch_add(1);
      if (rep >= R || failed.load()) return;
      try {
        TrajectorySink sink = nullptr;
        if (cfg.dump_trajectory) {
          std::string* buffer = &trajectories[rep];
          sink = [buffer](std::uint64_t step, std::size_t ensemble,
                          std::size_t particle, std::span<const double> x) {
            *buffer += std::to_string(step) + ',' + std::to_string(ensemble) +
                       ',' + std::to_string(particle);
            for (double v : x) *buffer += ',' + format_double(v);
            *buffer += '\n';
          };
        }
        rows[rep] = run_replication(cfg, params, rep, sink);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        failed.store(true);
        if (failure.empty()) failure = e.what();
      }
    }
  };

  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::uint64_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (failed.load()) throw DivergenceError(failure);

  std::ofstream csv(cfg.output + ".csv");
  if (!csv) throw IoError("cannot write " + cfg.output + ".csv");
  csv << csv_header() << '\n';
  for (const auto& r : rows) csv << csv_row(r) << '\n';

  nlohmann::json summary = summarize(rows);
  if (params.predicted_cost) summary["predicted_cost"] = *params.predicted_cost;
  std::ofstream json_out(cfg.output + ".json");
  if (!json_out) throw IoError("cannot write " + cfg.output + ".json");
  json_out << summary.dump(2) << '\n';

  if (cfg.dump_trajectory) {
    std::ofstream traj(cfg.output + "_trajectory.csv");
    if (!traj) throw IoError("cannot write " + cfg.output + "_trajectory.csv");
    traj << "step,ensemble,particle,x\n";
    for (const auto& chunk : trajectories) traj << chunk;
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Parameter sweeps

enum class SweepAxis { N, n, t, epsilon };

inline SweepAxis sweep_axis_from_name(const std::string& s) {
  if (s == "N") return SweepAxis::N;
  if (s == "n") return SweepAxis::n;
  if (s == "t") return SweepAxis::t;
  if (s == "epsilon" || s == "eps") return SweepAxis::epsilon;
  throw ConfigError("unknown sweep axis: " + s);
}

struct SweepResult {
  std::vector<ExperimentResult> rows;
  std::optional<RateFit> fit;  // log error vs (log N | log n | t | log eps)
};

// One experiment per axis value; the fitted slope of the mean absolute error
// is appended to the JSON summary. Needs a reference to fit against.
inline SweepResult run_sweep(const ExperimentConfig& base, SweepAxis axis,
                             const std::vector<double>& values) {
  if (values.size() < 3)
    throw ConfigError("sweep: need at least 3 axis values");
  SweepResult result;
  std::vector<std::pair<double, double>> points;
  nlohmann::json sweeps = nlohmann::json::array();

  for (double value : values) {
    ExperimentConfig cfg = base;
    cfg.output = base.output + "_sweep_tmp";
    switch (axis) {
      case SweepAxis::N: cfg.N = static_cast<std::uint64_t>(value); break;
      case SweepAxis::n: cfg.n = static_cast<std::uint64_t>(value); break;
      case SweepAxis::t: cfg.t = value; break;
      case SweepAxis::epsilon: cfg.epsilon = value; break;
    }
    const ResolvedParams params = resolve_params(cfg);
    std::vector<ExperimentResult> rows(cfg.replications);
    for (std::uint64_t rep = 0; rep < cfg.replications; ++rep)
      rows[rep] = run_replication(cfg, params, rep);
    double mean = 0.0;
    for (const auto& r : rows) mean += r.estimate;
    mean /= static_cast<double>(rows.size());

    nlohmann::json entry = summarize(rows);
    entry["axis_value"] = value;
    if (params.predicted_cost) entry["predicted_cost"] = *params.predicted_cost;
    sweeps.push_back(entry);

    const std::optional<double> reference = resolve_reference(cfg);
    if (reference) {
      const double err = std::abs(mean - *reference);
      double x = value;
      if (axis == SweepAxis::N || axis == SweepAxis::n ||
          axis == SweepAxis::epsilon)
        x = std::log(value);
      if (err > 0.0) points.emplace_back(x, err);
    }
    for (auto& r : rows) result.rows.push_back(std::move(r));
  }

  nlohmann::json summary;
  summary["sweep"] = sweeps;
  if (points.size() >= 3) {
    result.fit = fit_rate(points);
    summary["fit"] = {{"slope", result.fit->slope},
                      {"intercept", result.fit->intercept},
                      {"r_squared", result.fit->r_squared}};
  }

  std::ofstream csv(base.output + ".csv");
  if (!csv) throw IoError("cannot write " + base.output + ".csv");
  csv << csv_header() << '\n';
  for (const auto& r : result.rows) csv << csv_row(r) << '\n';
  std::ofstream json_out(base.output + ".json");
  if (!json_out) throw IoError("cannot write " + base.output + ".json");
  json_out << summary.dump(2) << '\n';
  return result;
}

}  // namespace mkv
