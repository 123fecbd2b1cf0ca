#include <doctest.h>

#include <cmath>
#include <memory>

#include "sddectl/car_following.hpp"
#include "sddectl/rng.hpp"
#include "sddectl/verification.hpp"

using namespace sddectl;

namespace {

Vec v1d(double x) { return (Vec(1) << x).finished(); }

SddeModel scalar_model(std::function<double(const HistorySegment&)> f, double g,
                       double rho) {
  SddeModel model;
  model.state_dim = model.input_dim = model.noise_dim = 1;
  model.drift = [f](const HistorySegment& phi) { return v1d(f(phi)); };
  model.input_map = [g](const HistorySegment&) {
    return Mat(Mat::Constant(1, 1, g));
  };
  model.diffusion = [rho](const HistorySegment&) {
    return Mat(Mat::Constant(1, 1, rho));
  };
  return model;
}

const Controller kZeroControl = [](const HistorySegment&) {
  return Vec(Vec::Zero(1));
};

/// Safe set h = 1 - x for a scalar state.
Scbkf scalar_scbkf() {
  auto h = std::make_shared<PointwiseIntegralFunctional>(
      "one_minus_x", [](const Vec& x) { return 1.0 - x[0]; },
      [](const Vec&) { return Vec(Vec::Constant(1, -1.0)); },
      [](const Vec&) { return Mat(Mat::Zero(1, 1)); },
      [](const Vec&) { return 0.0; });
  Scbkf scbkf;
  scbkf.h = h;
  scbkf.barrier = std::make_shared<LogReciprocalBarrier>(h);
  scbkf.gamma2 = ClassKFunction::identity();
  scbkf.alpha1 = ClassKFunction("lower", [](double s) { return s; },
                                ClassKFunction::Kind::K);
  scbkf.alpha2 = ClassKFunction(
      "upper", [](double s) { return s <= 0.0 ? 0.0 : 1.0 / std::log1p(1.0 / s); },
      ClassKFunction::Kind::K);
  return scbkf;
}

Sclkf scalar_sclkf() {
  Sclkf sclkf;
  sclkf.functional = std::make_shared<PointwiseIntegralFunctional>(
      "square", [](const Vec& x) { return x[0] * x[0]; },
      [](const Vec& x) { return Vec(2.0 * x); },
      [](const Vec&) { return Mat(Mat::Constant(1, 1, 2.0)); },
      [](const Vec&) { return 0.0; });
  return sclkf;
}

}  // namespace

TEST_SUITE_BEGIN("verification");

TEST_CASE("wilson interval: basics and coverage sanity") {
  const WilsonInterval degenerate = wilson_interval(0, 0);
  CHECK(degenerate.lo == 0.0);
  CHECK(degenerate.hi == 1.0);

  const WilsonInterval all = wilson_interval(100, 100);
  CHECK(all.hi == 1.0);
  CHECK(all.lo > 0.95);
  CHECK(all.lo < 1.0);

  const WilsonInterval half = wilson_interval(50, 100);
  CHECK(half.lo < 0.5);
  CHECK(half.hi > 0.5);

  SUBCASE("interval contains the point estimate") {
    GaussianRng rng(3);
    for (int rep = 0; rep < 200; ++rep) {
      const std::int64_t n = 1 + static_cast<std::int64_t>(rng.uniform01() * 500);
      const std::int64_t s = static_cast<std::int64_t>(rng.uniform01() * (n + 1));
      const WilsonInterval ci = wilson_interval(std::min(s, n), n);
      const double p = static_cast<double>(std::min(s, n)) / n;
      CHECK(ci.lo <= p + 1e-12);
      CHECK(ci.hi >= p - 1e-12);
    }
  }

  SUBCASE("covers a Bernoulli(0.9) truth in at least 90 of 100 repetitions") {
    GaussianRng rng(12345);
    int covered = 0;
    for (int rep = 0; rep < 100; ++rep) {
      std::int64_t hits = 0;
      const std::int64_t trials = 1000;
      for (std::int64_t t = 0; t < trials; ++t) {
        if (rng.uniform01() < 0.9) {
          ++hits;
        }
      }
      const WilsonInterval ci = wilson_interval(hits, trials);
      if (ci.lo <= 0.9 && 0.9 <= ci.hi) {
        ++covered;
      }
    }
    CHECK(covered >= 90);
  }
}

TEST_CASE("estimate_safety: sure-safe and sure-unsafe constructions") {
  const Scbkf scbkf = scalar_scbkf();

  SUBCASE("noise-free h held constant positive gives probability one") {
    const SddeModel still = scalar_model([](const HistorySegment&) { return 0.0; },
                                         0.0, 0.0);
    const MonteCarloReport report =
        estimate_safety(still, kZeroControl, scbkf, [](double) { return v1d(0.5); },
                        0.05, 0.2, 0.05, 50, 7);
    CHECK(report.safety_probability == 1.0);
    CHECK(report.safe_paths == 50);
    CHECK(report.failed_paths == 0);
    CHECK(report.safety_ci.hi == 1.0);
    CHECK(report.safety_ci.lo < 1.0);
  }

  SUBCASE("deterministic exit at t = 1 gives probability zero") {
    // dx/dt = 1 from x = 0: h = 1 - x crosses zero at t = 1
    const SddeModel ramp = scalar_model([](const HistorySegment&) { return 1.0; },
                                        0.0, 0.0);
    const MonteCarloReport report =
        estimate_safety(ramp, kZeroControl, scbkf, [](double) { return v1d(0.0); },
                        0.05, 2.0, 0.05, 20, 7);
    CHECK(report.safety_probability == 0.0);
    CHECK(report.completed_paths == 20);  // nothing throws, h simply goes negative
  }
}

TEST_CASE("estimate_safety: reproducibility and thread invariance") {
  const Scbkf scbkf = scalar_scbkf();
  const SddeModel noisy = scalar_model(
      [](const HistorySegment& phi) { return -0.4 * phi.newest()[0]; }, 0.0, 0.35);
  const auto init = [](double) { return v1d(0.2); };
  BatchOptions opt1;
  opt1.threads = 1;
  opt1.terminal_error = [](const Vec& x) { return std::abs(x[0]); };
  BatchOptions opt4 = opt1;
  opt4.threads = 4;

  const MonteCarloReport a =
      estimate_safety(noisy, kZeroControl, scbkf, init, 0.05, 1.0, 0.05, 64, 99, opt1);
  const MonteCarloReport b =
      estimate_safety(noisy, kZeroControl, scbkf, init, 0.05, 1.0, 0.05, 64, 99, opt4);
  const MonteCarloReport c =
      estimate_safety(noisy, kZeroControl, scbkf, init, 0.05, 1.0, 0.05, 64, 100, opt1);

  CHECK(a.safe_paths == b.safe_paths);
  CHECK(a.safety_probability == b.safety_probability);
  CHECK(a.mean_terminal_error == b.mean_terminal_error);
  REQUIRE(a.per_path.size() == b.per_path.size());
  bool identical_minima = true;
  bool any_difference = false;
  for (std::size_t i = 0; i < a.per_path.size(); ++i) {
    identical_minima = identical_minima && (a.per_path[i].min_h == b.per_path[i].min_h);
    any_difference = any_difference || (a.per_path[i].min_h != c.per_path[i].min_h);
  }
  CHECK(identical_minima);
  CHECK(any_difference);  // different seed, different draws
}

TEST_CASE("estimate_stability: frozen system and analytic decay") {
  const Sclkf sclkf = scalar_sclkf();

  SUBCASE("zero model from the origin keeps E[V] identically zero") {
    const SddeModel zero = scalar_model([](const HistorySegment&) { return 0.0; },
                                        0.0, 0.0);
    const StabilityReport report = estimate_stability(
        zero, kZeroControl, sclkf, [](double) { return v1d(0.0); }, 0.05, 0.5,
        0.05, 10, 3);
    for (double value : report.mean_lyapunov) {
      CHECK(value == 0.0);
    }
    CHECK(report.eventually_decreasing);
  }

  SUBCASE("dx = -x dt decays as V(0) exp(-2t) within one percent") {
    const SddeModel linear = scalar_model(
        [](const HistorySegment& phi) { return -phi.newest()[0]; }, 0.0, 0.0);
    StabilityOptions options;
    options.batch.terminal_error = [](const Vec& x) { return std::abs(x[0]); };
    const StabilityReport report = estimate_stability(
        linear, kZeroControl, sclkf, [](double) { return v1d(1.0); }, 0.01, 1.0,
        1e-3, 1, 3, options);
    const double expected = std::exp(-2.0);
    CHECK(std::abs(report.mean_lyapunov.back() - expected) < 0.01 * expected);
    CHECK(report.eventually_decreasing);
    CHECK(report.max_uptick <= 0.0);
  }
}

TEST_CASE("identity suite: vacuous pass and fault injection") {
  const CarFollowingScenario scenario = preset(PresetFamily::Fig2NoiseLevels, 2);
  IdentityBundle bundle{scenario.model, scenario.sclkf,
                        scenario.params.sontag_lambda, 1e-12, scenario.controller};
  const auto sampler = interior_buffer_sampler(scenario, 4);

  SUBCASE("count = 0 passes with empty margins") {
    const IdentityReport report = identity_suite(bundle, sampler, 0);
    CHECK(report.all_pass);
    for (const auto& check : report.checks) {
      CHECK(check.evaluated == 0);
      CHECK(check.worst_abs == 0.0);
    }
  }

  SUBCASE("car-following preset satisfies all identities on 1000 buffers") {
    const IdentityReport report = identity_suite(bundle, sampler, 1000);
    CHECK(report.all_pass);
    for (const auto& check : report.checks) {
      CHECK(check.violations == 0);
      CHECK(check.evaluated > 0);
    }
  }

  SUBCASE("a sign-flipped J2 breaks the drift identity by about 2|F|") {
    const HistorySegment phi = sampler(0);
    const SlidingTerms terms =
        sliding_terms(scenario.surface, scenario.model, phi);
    const AuxJ aux = aux_j(scenario.model, phi, terms.G);
    const double hj2h = terms.H.dot(Vec(aux.J2 * terms.H));
    const double k =
        switching_gain(scenario.params.gain, scenario.params.smoothing, terms.U);
    // corrupted controller built from -J2
    const double u_bad = -(-hj2h + terms.L + k) / terms.G.squaredNorm() * terms.G[0];
    const double drift_bad = terms.F + terms.G[0] * u_bad + terms.L;
    CHECK(std::abs(drift_bad - (-k)) ==
          doctest::Approx(2.0 * std::abs(terms.F)).epsilon(1e-6));
  }
}

TEST_CASE("feasibility spot check reports unconstrained buffers") {
  const CarFollowingScenario scenario = preset(PresetFamily::Fig1InitialStates, 2);
  const auto sampler = interior_buffer_sampler(scenario, 21);
  const FeasibilityReport report = feasibility_spot_check(
      scenario.model, scenario.sclkf, scenario.scbkf, sampler, 200);
  CHECK(report.buffers == 200);
  // the input row of V is 2(x1 - v_d) and of B is nonzero in the interior,
  // so sampled buffers are essentially always unconstrained
  CHECK(report.sclkf_unconstrained == 200);
  CHECK(report.scbkf_unconstrained == 200);
  CHECK(report.sclkf_violations == 0);
  CHECK(report.scbkf_violations == 0);
}

TEST_CASE("boundary check: barrier surfaces pass, degenerate surfaces warn") {
  const CarFollowingScenario scenario = preset(PresetFamily::Fig1InitialStates, 1);
  const HistorySegment xi = HistorySegment::constant(
      scenario.params.delay, scenario.params.dt, scenario.params.initial_state);

  SUBCASE("count = 0 is a vacuous pass") {
    const BoundaryReport report =
        boundary_check(scenario.surface, scenario.scbkf, xi, 0, 5);
    CHECK(report.pass);
    CHECK(report.samples == 0);
  }

  SUBCASE("the additive barrier surface dominates U at the boundary") {
    const BoundaryReport report =
        boundary_check(scenario.surface, scenario.scbkf, xi, 25, 5);
    CHECK(report.pass);
    CHECK(report.min_ratio >= 1.0);
  }

  SUBCASE("beta = 0 surfaces can fall below the reference") {
    SlidingSurface no_barrier = scenario.surface;
    no_barrier.psi = PsiFunction::weighted_sum(1.0, 0.0);
    const BoundaryReport report =
        boundary_check(no_barrier, scenario.scbkf, xi, 25, 5);
    // V at the projected boundary buffers is not forced above V(xi)
    CHECK(report.min_ratio < 1e6);  // finite, no blow-up without the barrier term
  }

  SUBCASE("exterior reference buffers are rejected") {
    const HistorySegment outside = HistorySegment::constant(
        scenario.params.delay, scenario.params.dt,
        (Vec(3) << 10.0, 10.0, 0.0).finished());
    CHECK_THROWS_AS(boundary_check(scenario.surface, scenario.scbkf, outside, 5, 5),
                    SamplingError);
  }
}

TEST_SUITE_END();
