#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mkv/dynamics.hpp"
#include "mkv/errors.hpp"
#include "mkv/model.hpp"

namespace mkv {

enum class EstimatorKind { EA, MCA, AEA, C_AEA, CS_AEA };

inline const char* estimator_name(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::EA: return "ea";
    case EstimatorKind::MCA: return "mca";
    case EstimatorKind::AEA: return "aea";
    case EstimatorKind::C_AEA: return "c-aea";
    case EstimatorKind::CS_AEA: return "cs-aea";
  }
  return "?";
}

// Streaming time-averages of one observable over every particle of every
// ensemble. All five estimators finalize from this one pass: per-particle
// left-endpoint Riemann sums, per-step cross-particle means, and the final
// snapshot.
class ErgodicAccumulator final : public Accumulator {
 public:
  explicit ErgodicAccumulator(Observable observable, double burn_in = 0.0)
      : observable_(std::move(observable)), burn_in_(burn_in) {
    if (burn_in < 0.0) throw ConfigError("accumulator: burn-in must be >= 0");
  }

  void observe(const ParticleCloud& cloud, const TimeGrid& grid) override {
    ensure_storage(cloud);
    const double t_k = grid.point(cloud.step);
    if (t_k < burn_in_ - 1e-12) return;
    std::vector<double> values(cloud.active);
    for (std::size_t j = 0; j < cloud.ensembles; ++j) {
      SymmetricSum cross(1);
      for (std::size_t i = 0; i < cloud.active; ++i) {
        values[i] = eval_observable(observable_, cloud.state(j, i));
        sums_[j][i] += values[i];
        counts_[j][i] += 1;
        cross.push({&values[i], 1});
      }
      double mean = 0.0;
      cross.mean({&mean, 1});
      cross_sums_[j] += mean;
    }
    cross_count_ += 1;
  }

  void final(const ParticleCloud& cloud) override {
    ensure_storage(cloud);
    final_active_ = cloud.active;
    for (std::size_t j = 0; j < cloud.ensembles; ++j) {
      finals_[j].resize(cloud.active);
      for (std::size_t i = 0; i < cloud.active; ++i)
        finals_[j][i] = eval_observable(observable_, cloud.state(j, i));
    }
  }

  std::uint64_t observed_steps() const noexcept { return cross_count_; }
  std::size_t ensembles() const noexcept { return sums_.size(); }
  const Observable& observable() const noexcept { return observable_; }

  // Per-particle time-average (only steps where the particle was active).
  double particle_average(std::size_t ensemble, std::size_t particle) const {
    if (counts_[ensemble][particle] == 0)
      throw PreconditionError("accumulator: no observations for particle");
    return sums_[ensemble][particle] /
           static_cast<double>(counts_[ensemble][particle]);
  }

  // Mean over particles of per-particle time-averages for one ensemble.
  double ensemble_aea(std::size_t ensemble) const {
    SymmetricSum acc(1);
    for (std::size_t i = 0; i < sums_[ensemble].size(); ++i) {
      if (counts_[ensemble][i] == 0) continue;
      const double avg = particle_average(ensemble, i);
      acc.push({&avg, 1});
    }
    if (acc.count() == 0)
      throw PreconditionError("accumulator: no observations ingested");
    double out = 0.0;
    acc.mean({&out, 1});
    return out;
  }

  // Time-average of per-step cross-particle means; under a shrinking
  // schedule each step averages exactly the particles active at that step.
  double ensemble_time_space_average(std::size_t ensemble) const {
    if (cross_count_ == 0)
      throw PreconditionError("accumulator: no observations ingested");
    return cross_sums_[ensemble] / static_cast<double>(cross_count_);
  }

  double final_snapshot_mean(std::size_t ensemble) const {
    if (finals_[ensemble].empty())
      throw PreconditionError("accumulator: no final snapshot");
    SymmetricSum acc(1);
    for (double v : finals_[ensemble]) acc.push({&v, 1});
    double out = 0.0;
    acc.mean({&out, 1});
    return out;
  }

 private:
  void ensure_storage(const ParticleCloud& cloud) {
    if (!sums_.empty()) return;
    sums_.assign(cloud.ensembles, std::vector<double>(cloud.capacity, 0.0));
    counts_.assign(cloud.ensembles,
                   std::vector<std::uint64_t>(cloud.capacity, 0));
    cross_sums_.assign(cloud.ensembles, 0.0);
    finals_.assign(cloud.ensembles, {});
  }

  Observable observable_;
  double burn_in_;
  std::vector<std::vector<double>> sums_;
  std::vector<std::vector<std::uint64_t>> counts_;
  std::vector<double> cross_sums_;
  std::uint64_t cross_count_ = 0;
  std::vector<std::vector<double>> finals_;
  std::size_t final_active_ = 0;
};

// (EA): ergodic average along the first particle of the first ensemble.
inline double finalize_ea(const ErgodicAccumulator& acc) {
  if (acc.observed_steps() == 0)
    throw PreconditionError("finalize_ea: zero steps ingested");
  return acc.particle_average(0, 0);
}

// (MCA): spatial mean of f over the first ensemble at the final time.
inline double finalize_mca(const ParticleCloud& cloud, const Observable& f) {
  SymmetricSum acc(1);
  for (std::size_t i = 0; i < cloud.active; ++i) {
    const double v = eval_observable(f, cloud.state(0, i));
    acc.push({&v, 1});
  }
  double out = 0.0;
  acc.mean({&out, 1});
  return out;
}

inline double finalize_mca(const ErgodicAccumulator& acc) {
  return acc.final_snapshot_mean(0);
}

// (AEA): mean over particles of per-particle ergodic averages.
inline double finalize_aea(const ErgodicAccumulator& acc) {
  if (acc.observed_steps() == 0)
    throw PreconditionError("finalize_aea: zero steps ingested");
  return acc.ensemble_aea(0);
}

// (C-AEA): mean over ensembles of per-ensemble AEA values.
inline double finalize_c_aea(const ErgodicAccumulator& acc) {
  if (acc.observed_steps() == 0)
    throw PreconditionError("finalize_c_aea: zero steps ingested");
  SymmetricSum mean(1);
  for (std::size_t j = 0; j < acc.ensembles(); ++j) {
    const double v = acc.ensemble_aea(j);
    mean.push({&v, 1});
  }
  double out = 0.0;
  mean.mean({&out, 1});
  return out;
}

// (CS-AEA): mean over ensembles of averaged ergodic averages of the active
// particles of each self-interacting system.
inline double finalize_cs_aea(const ErgodicAccumulator& acc) {
  if (acc.observed_steps() == 0)
    throw PreconditionError("finalize_cs_aea: zero steps ingested");
  SymmetricSum mean(1);
  for (std::size_t j = 0; j < acc.ensembles(); ++j) {
    const double v = acc.ensemble_time_space_average(j);
    mean.push({&v, 1});
  }
  double out = 0.0;
  mean.mean({&out, 1});
  return out;
}

inline double finalize(EstimatorKind kind, const ErgodicAccumulator& acc) {
  switch (kind) {
    case EstimatorKind::EA: return finalize_ea(acc);
    case EstimatorKind::MCA: return finalize_mca(acc);
    case EstimatorKind::AEA: return finalize_aea(acc);
    case EstimatorKind::C_AEA: return finalize_c_aea(acc);
    case EstimatorKind::CS_AEA: return finalize_cs_aea(acc);
  }
  throw ConfigError("finalize: unknown estimator");
}

struct ExperimentResult {
  std::string algorithm;
  double t = 0.0;
  std::uint64_t n = 0;
  std::uint64_t N = 0;
  std::uint64_t M = 0;
  std::string schedule;
  std::uint64_t seed = 0;
  double estimate = 0.0;
  std::optional<double> reference;
  std::optional<double> error;  // |estimate - reference| when reference set
  CostLedger ledger;
  double wall_time_s = 0.0;
};

}  // namespace mkv
