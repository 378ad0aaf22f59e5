#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mkv/errors.hpp"
#include "mkv/grid.hpp"
#include "mkv/ledger.hpp"
#include "mkv/model.hpp"
#include "mkv/rng.hpp"
#include "mkv/schedule.hpp"

namespace mkv {

enum class DynamicsKind { IPS, SELF };

// State of M independent ensembles of particles at one grid time. For
// self-interacting dynamics the cloud additionally carries either the full
// history buffer (naive pairwise mode) or per-particle running feature sums
// (O(N) fast path).
struct ParticleCloud {
  std::size_t ensembles = 1;
  std::size_t dim = 1;
  std::size_t capacity = 1;      // storage per ensemble, in particles
  std::size_t active = 1;        // particles active in the current step
  std::uint64_t step = 0;        // completed steps; states sit at grid index `step`

  std::vector<std::vector<double>> states;  // [ensemble][capacity*dim]

  bool keep_history = false;
  // [ensemble][(step+1) frames of capacity*dim]; frame m = states at index m
  std::vector<std::vector<double>> history;

  bool keep_features = false;
  std::size_t feature_dim = 0;
  // [ensemble][capacity*feature_dim]; running sums over frames 0..step
  std::vector<std::vector<double>> feature_sums;

  std::span<const double> state(std::size_t ensemble, std::size_t particle) const {
    return {states[ensemble].data() + particle * dim, dim};
  }

  std::span<const double> history_state(std::size_t ensemble, std::uint64_t frame,
                                        std::size_t particle) const {
    return {history[ensemble].data() + (frame * capacity + particle) * dim, dim};
  }
};

using TrajectorySink = std::function<void(
    std::uint64_t step, std::size_t ensemble, std::size_t particle,
    std::span<const double> state)>;

namespace detail {

inline bool needs_history(const ModelSpec& model) {
  return model.drift.mode == InteractionKernel::Mode::Pairwise ||
         model.diffusion.mode == InteractionKernel::Mode::Pairwise;
}

inline bool needs_features(const ModelSpec& model) {
  return model.drift.mode == InteractionKernel::Mode::FeatureAverage ||
         model.diffusion.mode == InteractionKernel::Mode::FeatureAverage;
}

inline void append_history_frame(ParticleCloud& cloud, const ModelSpec& model,
                                 CostLedger* ledger) {
  for (std::size_t j = 0; j < cloud.ensembles; ++j) {
    if (cloud.keep_history)
      cloud.history[j].insert(cloud.history[j].end(), cloud.states[j].begin(),
                              cloud.states[j].end());
    if (cloud.keep_features) {
      Vec h(cloud.feature_dim);
      for (std::size_t i = 0; i < cloud.active; ++i) {
        model.drift.feature(cloud.state(j, i), h);
        if (ledger) ledger->kernel_evals += 1;
        for (std::size_t c = 0; c < cloud.feature_dim; ++c)
          cloud.feature_sums[j][i * cloud.feature_dim + c] += h[c];
      }
    }
  }
}

inline void check_finite(std::span<const double> x, std::uint64_t step,
                         std::size_t ensemble, std::size_t particle) {
  for (double v : x)
    if (!std::isfinite(v))
      throw DivergenceError("non-finite state at step " + std::to_string(step) +
                            ", ensemble " + std::to_string(ensemble) +
                            ", particle " + std::to_string(particle));
}

}  // namespace detail

inline ParticleCloud init_cloud(const ModelSpec& model, std::size_t ensembles,
                                const ParticleSchedule& schedule,
                                DynamicsKind kind, std::uint64_t seed,
                                std::uint64_t replication = 0,
                                CostLedger* ledger = nullptr) {
  ParticleCloud cloud;
  cloud.ensembles = ensembles;
  cloud.dim = model.dim;
  cloud.capacity = schedule.capacity();
  cloud.active = schedule.active_at(0);
  cloud.states.assign(ensembles, std::vector<double>(cloud.capacity * cloud.dim));
  for (std::size_t j = 0; j < ensembles; ++j)
    for (std::size_t i = 0; i < cloud.capacity; ++i) {
      RngStream rng(seed, StreamDomain::InitialCondition, {replication, j, i});
      const Vec x = sample_one(model.initial_law, rng);
      if (x.size() != cloud.dim)
        throw ConfigError("init_cloud: initial law dimension mismatch");
      std::copy(x.begin(), x.end(), cloud.states[j].begin() + i * cloud.dim);
    }
  if (kind == DynamicsKind::SELF) {
    cloud.keep_history = detail::needs_history(model);
    cloud.keep_features = detail::needs_features(model);
    if (cloud.keep_history)
      cloud.history.assign(ensembles, std::vector<double>());
    if (cloud.keep_features) {
      cloud.feature_dim = model.drift.feature_dim;
      cloud.feature_sums.assign(
          ensembles, std::vector<double>(cloud.capacity * cloud.feature_dim, 0.0));
    }
    detail::append_history_frame(cloud, model, ledger);
  }
  return cloud;
}

// One Euler step of the interacting particle system: each particle moves by
// b(x, mu)/n + sigma(x, mu)*dW against its ensemble's empirical measure at
// the current grid time.
inline void euler_step_ips(ParticleCloud& cloud, const ModelSpec& model,
                           const TimeGrid& grid, std::uint64_t seed,
                           std::uint64_t replication, CostLedger& ledger) {
  if (cloud.step >= grid.num_steps())
    throw PreconditionError("euler_step_ips: past end of grid");
  const double h = grid.step_size();
  const double sqrt_h = std::sqrt(h);
  const std::size_t d = cloud.dim;
  const std::size_t kdim = model.noise_dim;
  Vec drift(d), sigma(d * kdim), noise(kdim), next(cloud.active * d);

  for (std::size_t j = 0; j < cloud.ensembles; ++j) {
    const EmpiricalMeasure mu =
        EmpiricalMeasure::from_flat(cloud.states[j].data(), cloud.active, d);
    // Shared feature mean: the O(N) path when the kernel supports it.
    Vec drift_hbar, sigma_hbar;
    if (model.drift.mode == InteractionKernel::Mode::FeatureAverage)
      drift_hbar = feature_mean(model.drift, mu, &ledger);
    if (model.diffusion.mode == InteractionKernel::Mode::FeatureAverage)
      sigma_hbar = feature_mean(model.diffusion, mu, &ledger);

    for (std::size_t i = 0; i < cloud.active; ++i) {
      const auto x = cloud.state(j, i);
      if (model.drift.mode == InteractionKernel::Mode::FeatureAverage)
        eval_with_feature_mean(model.drift, x, drift_hbar, drift, &ledger);
      else
        eval_kernel(model.drift, x, mu, drift, &ledger);
      if (model.diffusion.mode == InteractionKernel::Mode::FeatureAverage)
        eval_with_feature_mean(model.diffusion, x, sigma_hbar, sigma, &ledger);
      else
        eval_kernel(model.diffusion, x, mu, sigma, &ledger);

      RngStream rng(seed, StreamDomain::Noise, {replication, j, i});
      for (std::size_t c = 0; c < kdim; ++c)
        noise[c] = sqrt_h * rng.normal_at(cloud.step * kdim + c);
      ledger.noise_draws += kdim;

      for (std::size_t r = 0; r < d; ++r) {
        double v = x[r] + h * drift[r];
        for (std::size_t c = 0; c < kdim; ++c)
          v += sigma[r * kdim + c] * noise[c];
        next[i * d + r] = v;
      }
      detail::check_finite({next.data() + i * d, d}, cloud.step + 1, j, i);
    }
    std::copy(next.begin(), next.end(), cloud.states[j].begin());
  }
  ++cloud.step;
  ledger.steps += 1;
}

// One Euler step of the self-interacting system. At 1-based step k the drift
// of particle i averages b(x_i, .) over all k history frames of the N_k
// active particles; the first step averages against the initial state alone.
inline void euler_step_self(ParticleCloud& cloud, const ModelSpec& model,
                            const TimeGrid& grid,
                            const ParticleSchedule& schedule,
                            std::uint64_t seed, std::uint64_t replication,
                            CostLedger& ledger) {
  if (cloud.step >= grid.num_steps())
    throw PreconditionError("euler_step_self: past end of grid");
  const std::uint64_t k = cloud.step + 1;
  const std::uint64_t requested = schedule.active_at(k);
  if (requested > cloud.active)
    throw ConfigError("euler_step_self: schedule requests more particles than available");
  cloud.active = requested;

  const double h = grid.step_size();
  const double sqrt_h = std::sqrt(h);
  const std::size_t d = cloud.dim;
  const std::size_t kdim = model.noise_dim;
  Vec drift(d), sigma(d * kdim), noise(kdim), next(cloud.active * d);

  for (std::size_t j = 0; j < cloud.ensembles; ++j) {
    // Atoms: (frame m, particle p) for m < k, p < N_k. Active particles have
    // full history since the schedule only ever shrinks.
    const std::size_t n_active = cloud.active;
    const EmpiricalMeasure hist_mu{
        n_active * k, d, [&cloud, j, n_active](std::size_t a) {
          const std::size_t frame = a / n_active;
          const std::size_t particle = a % n_active;
          return cloud.history[j].data() +
                 (frame * cloud.capacity + particle) * cloud.dim;
        }};

    Vec drift_hbar, sigma_hbar;
    if (cloud.keep_features) {
      // Mean of h over the same atoms, from the per-particle running sums.
      SymmetricSum acc(cloud.feature_dim);
      for (std::size_t i = 0; i < n_active; ++i)
        acc.push({cloud.feature_sums[j].data() + i * cloud.feature_dim,
                  cloud.feature_dim});
      Vec hbar(cloud.feature_dim);
      acc.sum(hbar);
      for (double& v : hbar) v /= static_cast<double>(n_active * k);
      if (model.drift.mode == InteractionKernel::Mode::FeatureAverage)
        drift_hbar = hbar;
      if (model.diffusion.mode == InteractionKernel::Mode::FeatureAverage)
        sigma_hbar = hbar;
    }

    for (std::size_t i = 0; i < n_active; ++i) {
      const auto x = cloud.state(j, i);
      if (model.drift.mode == InteractionKernel::Mode::FeatureAverage)
        eval_with_feature_mean(model.drift, x, drift_hbar, drift, &ledger);
      else
        eval_kernel(model.drift, x, hist_mu, drift, &ledger);
      if (model.diffusion.mode == InteractionKernel::Mode::FeatureAverage)
        eval_with_feature_mean(model.diffusion, x, sigma_hbar, sigma, &ledger);
      else
        eval_kernel(model.diffusion, x, hist_mu, sigma, &ledger);

      RngStream rng(seed, StreamDomain::Noise, {replication, j, i});
      for (std::size_t c = 0; c < kdim; ++c)
        noise[c] = sqrt_h * rng.normal_at(cloud.step * kdim + c);
      ledger.noise_draws += kdim;

      for (std::size_t r = 0; r < d; ++r) {
        double v = x[r] + h * drift[r];
        for (std::size_t c = 0; c < kdim; ++c)
          v += sigma[r * kdim + c] * noise[c];
        next[i * d + r] = v;
      }
      detail::check_finite({next.data() + i * d, d}, k, j, i);
    }
    std::copy(next.begin(), next.end(), cloud.states[j].begin());
  }
  ++cloud.step;
  ledger.steps += 1;
  detail::append_history_frame(cloud, model, &ledger);
}

// Streaming consumer of simulation output. observe() is called once per grid
// index 0..ceil(tn)-1 (the left endpoints), final() once with the end state.
class Accumulator {
 public:
  virtual ~Accumulator() = default;
  virtual void observe(const ParticleCloud& cloud, const TimeGrid& grid) = 0;
  virtual void final(const ParticleCloud& cloud) = 0;
};

struct SimResult {
  ParticleCloud cloud;
  CostLedger ledger;
};

inline SimResult simulate(const ModelSpec& model, const TimeGrid& grid,
                          std::size_t ensembles,
                          const ParticleSchedule& schedule, DynamicsKind kind,
                          const std::vector<Accumulator*>& sinks,
                          std::uint64_t seed, std::uint64_t replication = 0,
                          const TrajectorySink& trajectory = nullptr) {
  if (kind == DynamicsKind::IPS &&
      schedule.kind != ParticleSchedule::Kind::Constant)
    throw ConfigError("simulate: IPS dynamics requires a constant schedule");

  CostLedger ledger;
  ParticleCloud cloud =
      init_cloud(model, ensembles, schedule, kind, seed, replication, &ledger);
  const std::uint64_t steps = grid.num_steps();
  for (std::uint64_t k = 1; k <= steps; ++k) {
    // The left endpoint consumed by step k is observed with step k's active
    // particle count.
    if (kind == DynamicsKind::SELF) {
      const std::uint64_t requested = schedule.active_at(k);
      if (requested > cloud.active)
        throw ConfigError("simulate: schedule requests more particles than available");
      cloud.active = requested;
    }
    for (Accumulator* sink : sinks) sink->observe(cloud, grid);
    if (trajectory)
      for (std::size_t j = 0; j < cloud.ensembles; ++j)
        for (std::size_t i = 0; i < cloud.active; ++i)
          trajectory(cloud.step, j, i, cloud.state(j, i));
    if (kind == DynamicsKind::IPS)
      euler_step_ips(cloud, model, grid, seed, replication, ledger);
    else
      euler_step_self(cloud, model, grid, schedule, seed, replication, ledger);
  }
  for (Accumulator* sink : sinks) sink->final(cloud);
  if (trajectory)
    for (std::size_t j = 0; j < cloud.ensembles; ++j)
      for (std::size_t i = 0; i < cloud.active; ++i)
        trajectory(cloud.step, j, i, cloud.state(j, i));
  return {std::move(cloud), ledger};
}

// Runs the same model through its naive pairwise and feature-average
// realisations with identical seeds and reports the largest state deviation
// seen at any step.
inline double fast_path_check(const ModelSpec& naive, const ModelSpec& fast,
                              const TimeGrid& grid, std::size_t particles,
                              std::size_t ensembles, DynamicsKind kind,
                              std::uint64_t seed) {
  const ParticleSchedule schedule = ParticleSchedule::constant(particles);
  CostLedger la, lb;
  ParticleCloud a = init_cloud(naive, ensembles, schedule, kind, seed, 0, &la);
  ParticleCloud b = init_cloud(fast, ensembles, schedule, kind, seed, 0, &lb);
  double max_dev = 0.0;
  const std::uint64_t steps = grid.num_steps();
  for (std::uint64_t k = 1; k <= steps; ++k) {
    if (kind == DynamicsKind::IPS) {
      euler_step_ips(a, naive, grid, seed, 0, la);
      euler_step_ips(b, fast, grid, seed, 0, lb);
    } else {
      euler_step_self(a, naive, grid, schedule, seed, 0, la);
      euler_step_self(b, fast, grid, schedule, seed, 0, lb);
    }
    for (std::size_t j = 0; j < ensembles; ++j)
      for (std::size_t c = 0; c < particles * a.dim; ++c)
        max_dev = std::max(max_dev, std::abs(a.states[j][c] - b.states[j][c]));
  }
  return max_dev;
}

}  // namespace mkv
