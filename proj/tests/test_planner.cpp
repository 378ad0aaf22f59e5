#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mkv/dynamics.hpp"
#include "mkv/planner.hpp"

using namespace mkv;

TEST_CASE("parameter allocations at epsilon = 0.1") {
  PlannerInput in;
  in.epsilon = 0.1;
  in.lambda = 1.0;

  SECTION("monte carlo average") {
    in.algorithm = Algorithm::MCA;
    const ParameterPlan p = plan(in);
    REQUIRE(p.t == Catch::Approx(std::log(10.0)).margin(1e-12));
    REQUIRE(p.N == 100);
    REQUIRE(p.n == 10);
    REQUIRE(p.M == 1);
  }

  SECTION("averaged ergodic average") {
    in.algorithm = Algorithm::AEA;
    const ParameterPlan p = plan(in);
    REQUIRE(p.t == Catch::Approx(10.0).margin(1e-12));
    REQUIRE(p.N == 10);
    REQUIRE(p.n == 10);
    REQUIRE(p.M == 1);
  }

  SECTION("ensemble averaged ergodic average") {
    in.algorithm = Algorithm::C_AEA;
    const ParameterPlan p = plan(in);
    REQUIRE(p.t == Catch::Approx(std::log(10.0)).margin(1e-12));
    REQUIRE(p.N == 10);
    REQUIRE(p.n == 10);
    REQUIRE(p.M == 5);  // ceil(10 / ln 10)
  }

  SECTION("ensemble self-interacting") {
    in.algorithm = Algorithm::CS_AEA;
    const ParameterPlan p = plan(in);
    REQUIRE(p.t == Catch::Approx(std::log(10.0)).margin(1e-12));
    REQUIRE(p.N == 1);
    // M = ceil(e^{2 lambda t} / t) = ceil(100 / ln 10)
    REQUIRE(p.M == 44);
  }

  SECTION("self-interacting, both parameterisations") {
    in.algorithm = Algorithm::ES_AEA;
    in.self_variant = SelfVariant::Harmonic;
    ParameterPlan p = plan(in);
    REQUIRE(p.schedule == ParticleSchedule::Kind::Harmonic);
    REQUIRE(p.N == 44);  // ceil(100 / ln 10)
    in.self_variant = SelfVariant::ConstantOne;
    p = plan(in);
    REQUIRE(p.t == Catch::Approx(100.0).margin(1e-12));
    REQUIRE(p.N == 1);
  }
}

TEST_CASE("plan rejects invalid input") {
  PlannerInput in;
  in.epsilon = 1.5;
  REQUIRE_THROWS_AS(plan(in), ConfigError);
  in.epsilon = 0.1;
  in.lambda = 0.0;
  REQUIRE_THROWS_AS(plan(in), ConfigError);
}

TEST_CASE("closed-form cost arithmetic") {
  REQUIRE(theoretical_cost(Algorithm::MCA, 2.0, 10, 100, 1) == 200000.0);
  REQUIRE(theoretical_cost(Algorithm::ES_AEA, 2.0, 2, 3, 1,
                           ParticleSchedule::Kind::Harmonic) ==
          Catch::Approx(75.0).margin(1e-9));  // 36 * (1 + 1/2 + 1/3 + 1/4)
  REQUIRE(theoretical_cost(Algorithm::ES_AEA, 2.0, 2, 1, 1,
                           ParticleSchedule::Kind::Constant) == 10.0);
  REQUIRE_THROWS_AS(theoretical_cost(Algorithm::MCA, 0.0, 1, 1, 1), ConfigError);
}

TEST_CASE("leading-order costs") {
  REQUIRE(asymptotic_cost_order(Algorithm::MCA, 0.1, 1.0) ==
          Catch::Approx(std::log(10.0) * 1e5).margin(1e-6));
  REQUIRE(asymptotic_cost_order(Algorithm::AEA, 0.1, 1.0) ==
          Catch::Approx(1e4).margin(1e-8));
  REQUIRE(asymptotic_cost_order(Algorithm::CS_AEA, 0.1, 1.0) ==
          Catch::Approx(1e4 * std::log(10.0)).margin(1e-6));
}

TEST_CASE("allocations grow as epsilon shrinks") {
  const std::vector<double> eps = {0.2, 0.1, 0.05, 0.02};
  for (Algorithm a : {Algorithm::EA, Algorithm::MCA, Algorithm::AEA,
                      Algorithm::C_AEA, Algorithm::ES_AEA, Algorithm::CS_AEA}) {
    PlannerInput in;
    in.algorithm = a;
    in.lambda = 1.0;
    ParameterPlan prev;
    bool first = true;
    for (double e : eps) {
      in.epsilon = e;
      const ParameterPlan p = plan(in);
      if (!first) {
        REQUIRE(p.t >= prev.t);
        REQUIRE(p.n >= prev.n);
        REQUIRE(p.N >= prev.N);
        REQUIRE(p.M >= prev.M);
      }
      prev = p;
      first = false;
    }
  }
}

TEST_CASE("cost is strictly increasing in each parameter") {
  const double base = theoretical_cost(Algorithm::MCA, 2.0, 10, 20, 1);
  REQUIRE(theoretical_cost(Algorithm::MCA, 3.0, 10, 20, 1) > base);
  REQUIRE(theoretical_cost(Algorithm::MCA, 2.0, 11, 20, 1) > base);
  REQUIRE(theoretical_cost(Algorithm::MCA, 2.0, 10, 21, 1) > base);
  const double self_base = theoretical_cost(
      Algorithm::CS_AEA, 2.0, 4, 2, 3, ParticleSchedule::Kind::Constant);
  REQUIRE(theoretical_cost(Algorithm::CS_AEA, 2.0, 4, 2, 4,
                           ParticleSchedule::Kind::Constant) > self_base);
}

TEST_CASE("planned cost tracks the leading order within a constant factor") {
  for (Algorithm a : {Algorithm::EA, Algorithm::MCA, Algorithm::AEA,
                      Algorithm::C_AEA, Algorithm::ES_AEA, Algorithm::CS_AEA}) {
    for (double e : {0.2, 0.1, 0.05, 0.02}) {
      PlannerInput in;
      in.algorithm = a;
      in.epsilon = e;
      in.lambda = 1.0;
      const ParameterPlan p = plan(in);
      const double ratio = p.predicted_cost / asymptotic_cost_order(a, e, 1.0);
      INFO(algorithm_name(a) << " eps=" << e << " ratio=" << ratio);
      REQUIRE(ratio >= 0.1);
      REQUIRE(ratio <= 10.0);
    }
  }
}

TEST_CASE("ledger consistency for naive runs") {
  SECTION("interacting particle system") {
    const ModelSpec model = linear_model(1.0, 0.5, KernelStyle::Pairwise);
    const SimResult sim = simulate(model, TimeGrid(4, 1.0), 1,
                                   ParticleSchedule::constant(5),
                                   DynamicsKind::IPS, {}, 1);
    const ConsistencyReport report = consistency_check(
        Algorithm::MCA, 1.0, 4, 5, 1, ParticleSchedule::Kind::Constant,
        sim.ledger);
    REQUIRE(report.observed == 100);
    REQUIRE(report.theoretical == 100.0);
    REQUIRE(report.match);
  }

  SECTION("self-interacting, constant schedule") {
    const ModelSpec model = linear_model(1.0, 0.5, KernelStyle::Pairwise);
    const SimResult sim = simulate(model, TimeGrid(3, 1.0), 1,
                                   ParticleSchedule::constant(2),
                                   DynamicsKind::SELF, {}, 1);
    const ConsistencyReport report = consistency_check(
        Algorithm::ES_AEA, 1.0, 3, 2, 1, ParticleSchedule::Kind::Constant,
        sim.ledger);
    REQUIRE(report.observed == 24);
    REQUIRE(report.match);
  }

  SECTION("self-interacting, harmonic schedule") {
    const ModelSpec model = linear_model(1.0, 0.5, KernelStyle::Pairwise);
    const ParticleSchedule schedule = ParticleSchedule::harmonic(2, 3);
    const SimResult sim = simulate(model, TimeGrid(3, 1.0), 1, schedule,
                                   DynamicsKind::SELF, {}, 1);
    const ConsistencyReport report = consistency_check(
        Algorithm::ES_AEA, 1.0, 3, 2, 1, ParticleSchedule::Kind::Harmonic,
        sim.ledger);
    REQUIRE(report.match);
  }

  SECTION("fast path does fewer evaluations") {
    const ModelSpec model = linear_model(1.0, 0.5, KernelStyle::FeatureAverage);
    const SimResult sim = simulate(model, TimeGrid(4, 1.0), 1,
                                   ParticleSchedule::constant(5),
                                   DynamicsKind::IPS, {}, 1);
    const ConsistencyReport report = consistency_check(
        Algorithm::MCA, 1.0, 4, 5, 1, ParticleSchedule::Kind::Constant,
        sim.ledger);
    REQUIRE_FALSE(report.match);
    REQUIRE(report.ratio < 1.0);
  }
}

TEST_CASE("algorithm names round-trip") {
  for (Algorithm a : {Algorithm::EA, Algorithm::MCA, Algorithm::AEA,
                      Algorithm::C_AEA, Algorithm::ES_AEA, Algorithm::CS_AEA}) {
    REQUIRE(algorithm_from_name(algorithm_name(a)) == a);
  }
  REQUIRE_THROWS_AS(algorithm_from_name("nope"), ConfigError);
}
