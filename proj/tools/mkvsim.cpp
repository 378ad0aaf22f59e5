#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mkv/bench.hpp"
#include "mkv/config.hpp"
#include "mkv/experiment.hpp"
#include "mkv/planner.hpp"

namespace {

std::uint64_t default_workers() {
  if (const char* env = std::getenv("MKV_WORKERS")) {
    const long v = std::atol(env);
    if (v >= 1) return static_cast<std::uint64_t>(v);
  }
  return 1;
}

int run_command(const std::string& config_path,
                const std::optional<std::uint64_t>& workers,
                const std::optional<std::string>& output,
                const std::optional<std::uint64_t>& seed,
                const std::optional<std::uint64_t>& replications) {
  mkv::ExperimentConfig cfg = mkv::parse_config(config_path);
  cfg.workers = workers.value_or(default_workers());
  if (output) cfg.output = *output;
  if (seed) cfg.seed = *seed;
  if (replications) cfg.replications = *replications;
  const auto rows = mkv::run_experiment(cfg);
  const nlohmann::json summary = mkv::summarize(rows);
  std::cout << summary.dump(2) << '\n';
  std::cerr << "wrote " << cfg.output << ".csv and " << cfg.output << ".json\n";
  return 0;
}

int sweep_command(const std::string& config_path, const std::string& axis,
                  const std::vector<double>& values,
                  const std::optional<std::string>& output) {
  mkv::ExperimentConfig cfg = mkv::parse_config(config_path);
  if (output) cfg.output = *output;
  const mkv::SweepAxis sweep_axis = mkv::sweep_axis_from_name(axis);
  if (sweep_axis == mkv::SweepAxis::epsilon && !cfg.uses_planner())
    cfg.epsilon = values.front();
  const mkv::SweepResult result = mkv::run_sweep(cfg, sweep_axis, values);
  if (result.fit) {
    std::cout << "fitted slope: " << result.fit->slope
              << " (r^2 = " << result.fit->r_squared << ")\n";
  }
  std::cerr << "wrote " << cfg.output << ".csv and " << cfg.output << ".json\n";
  return 0;
}

int plan_command(const std::string& algorithm, double epsilon, double lambda,
                 double cost_constant, const std::string& variant) {
  mkv::PlannerInput input;
  input.algorithm = mkv::algorithm_from_name(algorithm);
  input.epsilon = epsilon;
  input.lambda = lambda;
  input.cost_constant = cost_constant;
  input.self_variant = variant == "constant-one" ? mkv::SelfVariant::ConstantOne
                                                 : mkv::SelfVariant::Harmonic;
  const mkv::ParameterPlan p = mkv::plan(input);
  nlohmann::json j;
  j["algorithm"] = mkv::algorithm_name(p.algorithm);
  j["t"] = p.t;
  j["n"] = p.n;
  j["N"] = p.N;
  j["M"] = p.M;
  j["schedule"] = p.schedule == mkv::ParticleSchedule::Kind::Harmonic
                      ? "harmonic"
                      : "constant";
  j["predicted_cost"] = p.predicted_cost;
  j["asymptotic_cost"] =
      mkv::asymptotic_cost_order(p.algorithm, epsilon, lambda);
  std::cout << j.dump(2) << '\n';
  return 0;
}

int bench_command(bool quick, std::uint64_t seed,
                  const std::optional<std::string>& output) {
  const std::vector<mkv::BenchCheck> checks = mkv::run_bench(quick, seed);
  std::string csv = "check_name,expected,observed,pass\n";
  bool all_pass = true;
  for (const auto& c : checks) {
    csv += c.name + ",\"" + c.expected + "\"," + mkv::format_double(c.observed) +
           ',' + (c.pass ? "true" : "false") + '\n';
    all_pass = all_pass && c.pass;
  }
  std::cout << csv;
  if (output) {
    std::ofstream out(*output);
    if (!out) throw mkv::IoError("cannot write " + *output);
    out << csv;
  }
  return all_pass ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mkvsim: simulation and benchmarking for ergodic mean-field SDEs"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> workers, seed, replications;
  std::optional<std::string> output;

  auto* run = app.add_subcommand("run", "run one experiment from a config file");
  run->add_option("config", config_path, "INI config file")->required();
  run->add_option("--workers", workers, "worker threads (default $MKV_WORKERS or 1)");
  run->add_option("--output", output, "output path prefix");
  run->add_option("--seed", seed, "override base seed");
  run->add_option("--replications", replications, "override replication count");

  std::string axis;
  std::vector<double> values;
  auto* sweep = app.add_subcommand("sweep", "sweep one parameter axis");
  sweep->add_option("config", config_path, "INI config file")->required();
  sweep->add_option("--axis", axis, "N | n | t | epsilon")->required();
  sweep->add_option("--values", values, "axis values (at least 3)")
      ->required()
      ->delimiter(',');
  sweep->add_option("--output", output, "output path prefix");

  std::string algorithm = "aea", variant = "harmonic";
  double epsilon = 0.1, lambda = 1.0, cost_constant = 1.0;
  auto* plan = app.add_subcommand("plan", "allocate parameters for a tolerance");
  plan->add_option("--algorithm", algorithm,
                   "ea | mca | aea | c-aea | es-aea | cs-aea")
      ->required();
  plan->add_option("--epsilon", epsilon, "target tolerance in (0,1)")->required();
  plan->add_option("--lambda", lambda, "assumed ergodicity rate");
  plan->add_option("--cost-constant", cost_constant, "allocation multiplier");
  plan->add_option("--variant", variant,
                   "es-aea parameterisation: harmonic | constant-one");

  bool quick = false;
  std::uint64_t bench_seed = 2024;
  auto* bench = app.add_subcommand("bench", "empirical assumption checks");
  bench->add_flag("--quick", quick, "reduced particle counts and replications");
  bench->add_option("--seed", bench_seed, "base seed");
  bench->add_option("--output", output, "also write the CSV to this file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed())
      return run_command(config_path, workers, output, seed, replications);
    if (sweep->parsed()) return sweep_command(config_path, axis, values, output);
    if (plan->parsed())
      return plan_command(algorithm, epsilon, lambda, cost_constant, variant);
    if (bench->parsed()) return bench_command(quick, bench_seed, output);
  } catch (const mkv::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const mkv::DivergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const mkv::NumericError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
