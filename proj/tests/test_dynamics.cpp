#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <numeric>

#include "mkv/dynamics.hpp"
#include "mkv/estimators.hpp"

using namespace mkv;

namespace {

// b(x, y) = -alpha*x + beta*y with zero diffusion, for hand-checkable steps.
ModelSpec linear_drift_no_noise(double alpha, double beta, double x0) {
  ModelSpec model;
  model.dim = 1;
  model.noise_dim = 1;
  model.drift = InteractionKernel::make_pairwise(
      1, [alpha, beta](std::span<const double> x, std::span<const double> y,
                       std::span<double> out) {
        out[0] = -alpha * x[0] + beta * y[0];
      });
  model.diffusion = InteractionKernel::make_constant({0.0});
  model.initial_law = InitialLaw::point_mass({x0});
  return model;
}

ModelSpec frozen_model(double x0) {
  ModelSpec model = linear_drift_no_noise(0.0, 0.0, x0);
  model.drift = InteractionKernel::make_constant({0.0});
  return model;
}

}  // namespace

TEST_CASE("grid projection kappa") {
  REQUIRE(kappa(0.37, 10) == Catch::Approx(0.3).margin(1e-15));
  REQUIRE(kappa(0.3, 10) == Catch::Approx(0.3).margin(1e-15));
  REQUIRE(kappa(5.999, 2) == Catch::Approx(5.5).margin(1e-15));

  SECTION("idempotent on grid points and nondecreasing") {
    double prev = 0.0;
    for (double s = 0.0; s <= 3.0; s += 0.013) {
      const double k = kappa(s, 7);
      REQUIRE(kappa(k, 7) == k);
      REQUIRE(k >= prev);
      REQUIRE(k <= s);
      prev = k;
    }
  }

  REQUIRE_THROWS_AS(kappa(-0.1, 10), PreconditionError);
  REQUIRE_THROWS_AS(kappa(1.0, 0), PreconditionError);
}

TEST_CASE("time grid step counts") {
  REQUIRE(TimeGrid(4, 1.0).num_steps() == 4);
  REQUIRE(TimeGrid(4, 1.3).num_steps() == 6);  // ceil(5.2)
  REQUIRE(TimeGrid(10, 0.05).num_steps() == 1);
  REQUIRE(TimeGrid(3, 2.0).num_steps() == 6);  // integer product, no off-by-one
  REQUIRE_THROWS_AS(TimeGrid(0, 1.0), ConfigError);
  REQUIRE_THROWS_AS(TimeGrid(4, 0.0), ConfigError);
}

TEST_CASE("zero dynamics leaves states unchanged") {
  const ModelSpec model = frozen_model(2.5);
  const TimeGrid grid(4, 1.0);
  for (DynamicsKind kind : {DynamicsKind::IPS, DynamicsKind::SELF}) {
    const SimResult sim = simulate(model, grid, 2, ParticleSchedule::constant(3),
                                   kind, {}, 5);
    REQUIRE(sim.ledger.steps == 4);
    REQUIRE(sim.cloud.step == 4);
    for (std::size_t j = 0; j < 2; ++j)
      for (std::size_t i = 0; i < 3; ++i)
        REQUIRE(sim.cloud.state(j, i)[0] == 2.5);
  }
}

TEST_CASE("single-particle euler step matches hand evaluation") {
  // With N=1 the empirical mean is the particle itself, so the drift is
  // (-alpha + beta) x and the update is x + (-alpha+beta)x/n + dW.
  const double alpha = 1.2, beta = 0.3, x0 = 1.7;
  const std::uint64_t n = 5, seed = 31;
  ModelSpec model = linear_model(alpha, beta, KernelStyle::Pairwise,
                                 InitialLaw::point_mass({x0}));
  const TimeGrid grid(n, 1.0 / static_cast<double>(n));  // one step

  const SimResult sim = simulate(model, grid, 1, ParticleSchedule::constant(1),
                                 DynamicsKind::IPS, {}, seed);
  const RngStream noise(seed, StreamDomain::Noise, {0, 0, 0});
  const double h = 1.0 / static_cast<double>(n);
  const double expected =
      x0 + (-alpha + beta) * x0 * h + std::sqrt(h) * noise.normal_at(0);
  REQUIRE(sim.cloud.state(0, 0)[0] == expected);
  REQUIRE(sim.ledger.noise_draws == 1);
}

TEST_CASE("two-particle drift-only euler step") {
  // States (0, 2) with b(x,y) = -x + y, n = 1: drift of each particle is
  // -x_i + mean(0,2) = (1, -1), so one step maps (0,2) to (1,1).
  ModelSpec model = linear_drift_no_noise(1.0, 1.0, 0.0);
  model.initial_law = InitialLaw::point_mass({0.0});
  const TimeGrid grid(1, 1.0);
  CostLedger ledger;
  ParticleCloud cloud = init_cloud(model, 1, ParticleSchedule::constant(2),
                                   DynamicsKind::IPS, 1, 0, &ledger);
  cloud.states[0] = {0.0, 2.0};
  euler_step_ips(cloud, model, grid, 1, 0, ledger);
  REQUIRE(cloud.state(0, 0)[0] == 1.0);
  REQUIRE(cloud.state(0, 1)[0] == 1.0);
  REQUIRE(cloud.step == 1);
}

TEST_CASE("self-interacting steps average over the path history") {
  const TimeGrid grid(1, 2.0);
  const ParticleSchedule schedule = ParticleSchedule::constant(1);

  // Step 1: history is the initial state alone; with b(x,y) = -x the drift at
  // x0 = 1 is -1, so the state moves to 0.
  ModelSpec decay = linear_drift_no_noise(1.0, 0.0, 1.0);
  CostLedger ledger;
  ParticleCloud cloud =
      init_cloud(decay, 1, schedule, DynamicsKind::SELF, 2, 0, &ledger);
  euler_step_self(cloud, decay, grid, schedule, 2, 0, ledger);
  REQUIRE(cloud.state(0, 0)[0] == 0.0);

  // Step 2: history frames are {1, 0}; with b(x,y) = y the drift is their
  // mean 0.5 and the state moves from 0 to 0.5.
  const ModelSpec average = linear_drift_no_noise(0.0, 1.0, 1.0);
  euler_step_self(cloud, average, grid, schedule, 2, 0, ledger);
  REQUIRE(cloud.state(0, 0)[0] == 0.5);
}

TEST_CASE("ledger counts kernel evaluations exactly") {
  SECTION("pairwise interacting particle system") {
    const ModelSpec model = linear_model(1.0, 0.5, KernelStyle::Pairwise);
    const TimeGrid grid(4, 1.3);  // 6 steps
    const SimResult sim = simulate(model, grid, 2,
                                   ParticleSchedule::constant(3),
                                   DynamicsKind::IPS, {}, 3);
    REQUIRE(sim.ledger.kernel_evals == 2 * 6 * 3 * 3);
    REQUIRE(sim.ledger.noise_draws == 2 * 6 * 3);
  }

  SECTION("self-interacting, constant schedule") {
    const ModelSpec model = linear_model(1.0, 0.5, KernelStyle::Pairwise);
    const TimeGrid grid(3, 1.0);  // 3 steps
    const SimResult sim = simulate(model, grid, 1,
                                   ParticleSchedule::constant(2),
                                   DynamicsKind::SELF, {}, 3);
    // step k costs N^2 * k history evaluations: 4*(1+2+3) = 24
    REQUIRE(sim.ledger.kernel_evals == 24);
  }

  SECTION("self-interacting, harmonic schedule") {
    const ModelSpec model = linear_model(1.0, 0.5, KernelStyle::Pairwise);
    const ParticleSchedule schedule = ParticleSchedule::harmonic(2, 3);
    const TimeGrid grid(3, 1.0);
    const SimResult sim =
        simulate(model, grid, 1, schedule, DynamicsKind::SELF, {}, 3);
    std::uint64_t expected = 0;
    for (std::uint64_t k = 1; k <= 3; ++k) {
      const std::uint64_t nk = schedule.active_at(k);
      expected += nk * nk * k;
    }
    REQUIRE(expected == 66);  // 36*1 + 9*2 + 4*3
    REQUIRE(sim.ledger.kernel_evals == expected);
  }
}

TEST_CASE("harmonic schedule shape") {
  const ParticleSchedule s = ParticleSchedule::harmonic(2, 3);
  REQUIRE(s.active_at(0) == 6);
  REQUIRE(s.active_at(1) == 6);
  REQUIRE(s.active_at(2) == 3);
  REQUIRE(s.active_at(3) == 2);
  REQUIRE(s.active_at(1000) == 1);  // floored at one particle
  REQUIRE(s.capacity() == 6);

  const ParticleSchedule capped = ParticleSchedule::harmonic(4, 10, 8);
  REQUIRE(capped.active_at(1) == 8);
  REQUIRE(capped.capacity() == 8);

  const ParticleSchedule c = ParticleSchedule::constant(5);
  REQUIRE(c.active_at(0) == 5);
  REQUIRE(c.active_at(99) == 5);
  REQUIRE_THROWS_AS(ParticleSchedule::constant(0), ConfigError);
}

TEST_CASE("frozen particles keep their last state") {
  const ModelSpec model = linear_model(1.0, 0.5, KernelStyle::Pairwise);
  const ParticleSchedule schedule = ParticleSchedule::harmonic(2, 3);
  const TimeGrid grid(3, 1.0);
  CostLedger ledger;
  ParticleCloud cloud =
      init_cloud(model, 1, schedule, DynamicsKind::SELF, 17, 0, &ledger);
  euler_step_self(cloud, model, grid, schedule, 17, 0, ledger);  // 6 active
  const std::vector<double> after_step1 = cloud.states[0];
  euler_step_self(cloud, model, grid, schedule, 17, 0, ledger);  // 3 active
  REQUIRE(cloud.active == 3);
  for (std::size_t i = 3; i < 6; ++i)
    REQUIRE(cloud.states[0][i] == after_step1[i]);
  const std::vector<double> after_step2 = cloud.states[0];
  euler_step_self(cloud, model, grid, schedule, 17, 0, ledger);  // 2 active
  REQUIRE(cloud.active == 2);
  REQUIRE(cloud.states[0][2] == after_step2[2]);
}

TEST_CASE("empirical-measure reductions ignore atom order") {
  const ModelSpec model = linear_model(1.0, 0.5, KernelStyle::Pairwise);
  const Vec atoms = {1e15, 0.3, -1e15, 2.0, -0.7};
  const Vec x = {1.0};
  const auto forward = EmpiricalMeasure::from_flat(atoms.data(), 5, 1);
  const EmpiricalMeasure reversed{
      5, 1, [&atoms](std::size_t i) { return atoms.data() + (4 - i); }};
  const Vec a = eval_drift(model.drift, x, forward);
  const Vec b = eval_drift(model.drift, x, reversed);
  REQUIRE(a[0] == b[0]);
}

TEST_CASE("ensembles are mutually independent") {
  const ModelSpec model = linear_model(1.0, 0.5, KernelStyle::Pairwise);
  const TimeGrid grid(8, 2.0);
  const SimResult one = simulate(model, grid, 1, ParticleSchedule::constant(4),
                                 DynamicsKind::IPS, {}, 77);
  const SimResult two = simulate(model, grid, 2, ParticleSchedule::constant(4),
                                 DynamicsKind::IPS, {}, 77);
  REQUIRE(one.cloud.states[0] == two.cloud.states[0]);
  REQUIRE(two.cloud.states[0] != two.cloud.states[1]);
}

TEST_CASE("simulation is bit-deterministic") {
  const ModelSpec model = linear_model(1.0, 0.5, KernelStyle::FeatureAverage);
  const TimeGrid grid(10, 3.0);
  const SimResult a = simulate(model, grid, 2, ParticleSchedule::constant(8),
                               DynamicsKind::IPS, {}, 123);
  const SimResult b = simulate(model, grid, 2, ParticleSchedule::constant(8),
                               DynamicsKind::IPS, {}, 123);
  REQUIRE(a.cloud.states == b.cloud.states);
  REQUIRE(a.ledger.kernel_evals == b.ledger.kernel_evals);
  REQUIRE(a.ledger.noise_draws == b.ledger.noise_draws);

  const SimResult c = simulate(model, grid, 2, ParticleSchedule::constant(8),
                               DynamicsKind::IPS, {}, 124);
  REQUIRE(a.cloud.states != c.cloud.states);
}

TEST_CASE("feature fast path tracks the naive pairwise path") {
  const ModelSpec naive = linear_model(1.0, 0.5, KernelStyle::Pairwise);
  const ModelSpec fast = linear_model(1.0, 0.5, KernelStyle::FeatureAverage);

  SECTION("interacting particle system") {
    const double dev =
        fast_path_check(naive, fast, TimeGrid(10, 2.0), 16, 2,
                        DynamicsKind::IPS, 5);
    REQUIRE(dev <= 1e-10);
  }

  SECTION("self-interacting system with running feature sums") {
    const double dev =
        fast_path_check(naive, fast, TimeGrid(10, 2.0), 8, 1,
                        DynamicsKind::SELF, 5);
    REQUIRE(dev <= 1e-10);
  }

  SECTION("single particle is exact") {
    const double dev = fast_path_check(naive, fast, TimeGrid(10, 1.0), 1, 1,
                                       DynamicsKind::IPS, 5);
    REQUIRE(dev == 0.0);
  }
}

TEST_CASE("divergence is reported with its location") {
  ModelSpec model;
  model.drift = InteractionKernel::make_pairwise(
      1, [](std::span<const double> x, std::span<const double>,
            std::span<double> out) { out[0] = x[0] * x[0] * x[0]; });
  model.diffusion = InteractionKernel::make_constant({0.0});
  model.initial_law = InitialLaw::point_mass({2.0});
  try {
    simulate(model, TimeGrid(1, 12.0), 1, ParticleSchedule::constant(1),
             DynamicsKind::IPS, {}, 1);
    FAIL("expected a divergence error");
  } catch (const DivergenceError& e) {
    REQUIRE(std::string(e.what()).find("step") != std::string::npos);
    REQUIRE(std::string(e.what()).find("particle") != std::string::npos);
  }
}

TEST_CASE("schedule constraints") {
  const ModelSpec model = linear_model(1.0, 0.5);
  REQUIRE_THROWS_AS(
      simulate(model, TimeGrid(2, 1.0), 1, ParticleSchedule::harmonic(2, 2),
               DynamicsKind::IPS, {}, 1),
      ConfigError);
}

TEST_CASE("accumulators see every grid step") {
  const ModelSpec model = linear_model(1.0, 0.5, KernelStyle::FeatureAverage);
  ErgodicAccumulator acc(coordinate_observable(0));
  simulate(model, TimeGrid(4, 1.3), 1, ParticleSchedule::constant(2),
           DynamicsKind::IPS, {&acc}, 1);
  REQUIRE(acc.observed_steps() == 6);
}
