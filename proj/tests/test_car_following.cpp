#include <doctest.h>

#include <cmath>

#include "sddectl/car_following.hpp"
#include "sddectl/simulate.hpp"
#include "support/test_helpers.hpp"

using namespace sddectl;

namespace {

HistorySegment constant_history(const CarFollowingParams& params, double x1,
                                double x2, double x3) {
  return HistorySegment::constant(params.delay, params.dt,
                                  (Vec(3) << x1, x2, x3).finished());
}

}  // namespace

TEST_SUITE_BEGIN("car_following");

TEST_CASE("drift: delayed drag cancellation and relative speed") {
  CarFollowingParams params;
  const SddeModel model = build_model(params);

  SUBCASE("constant history cancels the drag estimate") {
    const HistorySegment phi = constant_history(params, 13.0, 10.0, 120.0);
    const Vec f = model.f(phi);
    CHECK(f[0] == 0.0);
    CHECK(f[1] == 0.0);  // zero lead acceleration by default
    CHECK(f[2] == doctest::Approx(10.0 - 13.0));
  }

  SUBCASE("equal speeds freeze the gap") {
    const HistorySegment phi = constant_history(params, 10.0, 10.0, 77.0);
    CHECK(model.f(phi)[2] == 0.0);
  }

  SUBCASE("delayed speed enters through the drag difference") {
    CarFollowingParams p = params;
    HistorySegment phi = constant_history(p, 12.0, 10.0, 120.0);
    // push newer samples at a different speed so oldest != newest
    for (int i = 0; i < 100; ++i) {
      phi.push((Vec(3) << 15.0, 10.0, 120.0).finished());
    }
    const double expected = drag_force(p, 12.0) - drag_force(p, 15.0);
    CHECK(model.f(phi)[0] == doctest::Approx(expected));
  }
}

TEST_CASE("diffusion: noise scale times (x1, 0, x3)") {
  CarFollowingParams params;
  params.noise_scale = 0.05;
  const SddeModel model = build_model(params);
  const HistorySegment phi = constant_history(params, 16.0, 10.0, 150.0);
  const Mat rho = model.rho(phi);
  CHECK(rho(0, 0) == doctest::Approx(0.8));
  CHECK(rho(1, 0) == 0.0);
  CHECK(rho(2, 0) == doctest::Approx(7.5));
}

TEST_CASE("input map is the unit force on the follower velocity") {
  CarFollowingParams params;
  const SddeModel model = build_model(params);
  const Mat g = model.g(constant_history(params, 16.0, 10.0, 150.0));
  CHECK(g(0, 0) == 1.0);
  CHECK(g(1, 0) == 0.0);
  CHECK(g(2, 0) == 0.0);
}

TEST_CASE("functional values on the benchmark buffers") {
  CarFollowingParams params;
  const CarFollowingFunctionals fns = build_functionals(params);

  const HistorySegment phi16 = constant_history(params, 16.0, 10.0, 150.0);
  CHECK(fns.sclkf.functional->value(phi16) == doctest::Approx(43.2).epsilon(1e-12));

  const HistorySegment phi10 = constant_history(params, 10.0, 10.0, 150.0);
  CHECK(fns.scbkf.eval_h(phi10) == doctest::Approx(97.152).epsilon(1e-12));

  SUBCASE("surface value combines both") {
    const SlidingSurface surface = build_surface(params);
    // V = 144 * 1.2 = 172.8, B = ln(1 + 1/97.152), U = V + 50 B
    const double expected =
        172.8 + 50.0 * std::log1p(1.0 / 97.152);
    CHECK(surface.value(phi10) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(surface.value(phi10) == doctest::Approx(173.312).epsilon(1e-4));
  }
}

TEST_CASE("presets pin the published family parameters") {
  const CarFollowingScenario fig1 = preset(PresetFamily::Fig1InitialStates, 1);
  CHECK(fig1.params.initial_state[0] == 10.0);
  CHECK(fig1.params.initial_state[1] == 10.0);
  CHECK(fig1.params.initial_state[2] == 150.0);
  CHECK(fig1.params.noise_scale == 0.05);
  CHECK(fig1.params.gain == 10.0);
  CHECK(fig1.params.smoothing == 0.1);
  CHECK(fig1.params.dt == 1e-3);
  CHECK(fig1.params.horizon == 60.0);

  const CarFollowingScenario fig2 = preset(PresetFamily::Fig2NoiseLevels, 3);
  CHECK(fig2.params.initial_state[0] == 16.0);
  CHECK(fig2.params.noise_scale == 3.0);
  CHECK(fig2.params.gain == 15.0);

  CHECK_THROWS_AS(preset(PresetFamily::Fig1InitialStates, 7), ConfigError);
  CHECK_THROWS_AS(preset(PresetFamily::Fig1InitialStates, 0), ConfigError);
  CHECK_THROWS_AS(preset(PresetFamily::Fig2NoiseLevels, 11), ConfigError);
}

TEST_CASE("safe-set membership implies a nonnegative pointwise margin") {
  const CarFollowingScenario scenario = preset(PresetFamily::Fig1InitialStates, 4);
  const auto sampler = interior_buffer_sampler(scenario, 321);
  const auto margin = scenario.pointwise_margin();
  for (int rep = 0; rep < 500; ++rep) {
    const HistorySegment phi = sampler(static_cast<std::uint64_t>(rep));
    if (scenario.scbkf.eval_h(phi) >= 0.0) {
      CHECK(margin(Vec(phi.newest())) >= 0.0);
    }
  }
}

TEST_CASE("lead acceleration profiles") {
  const LeadAccelProfile zero;
  CHECK(zero(0.0) == 0.0);
  CHECK(zero(100.0) == 0.0);

  const LeadAccelProfile ramp = LeadAccelProfile::ramp(2.5, 4.8);
  CHECK(ramp(0.0) == 2.5);
  CHECK(ramp(4.79) == 2.5);
  CHECK(ramp(4.8) == 0.0);
  CHECK(ramp(60.0) == 0.0);

  const LeadAccelProfile steps({0.0, 1.0, 2.0}, {1.0, -1.0, 0.5});
  CHECK(steps(0.5) == 1.0);
  CHECK(steps(1.5) == -1.0);
  CHECK(steps(2.5) == 0.5);

  CHECK_THROWS_AS(LeadAccelProfile({0.0}, {3.0}), ConfigError);  // out of bounds
  CHECK_THROWS_AS(LeadAccelProfile({1.0}, {1.0}), ConfigError);  // not from 0
  CHECK_THROWS_AS(LeadAccelProfile({0.0, 0.0}, {1.0, 1.0}), ConfigError);

  SUBCASE("profile feeds the drift through the buffer clock") {
    CarFollowingParams params;
    params.lead_accel = LeadAccelProfile::ramp(2.0, 1.0);
    const SddeModel model = build_model(params);
    HistorySegment phi = constant_history(params, 16.0, 10.0, 150.0);
    CHECK(model.f(phi)[1] == 2.0);
    while (phi.time() < 1.5) {
      phi.push(Vec(phi.newest()));
    }
    CHECK(model.f(phi)[1] == 0.0);
  }
}

TEST_CASE("closed-loop sanity: one noiseless second of the benchmark") {
  CarFollowingParams params;
  params.noise_scale = 0.0;
  params.horizon = 1.0;
  const CarFollowingScenario scenario = make_scenario(params);
  const Controller controller = [&](const HistorySegment& phi) {
    return sliding_control(scenario.controller, phi);
  };
  const std::vector<LogSpec> logs = {
      {"h", [&](const HistorySegment& phi) { return scenario.scbkf.eval_h(phi); }}};
  const SimulationTrace trace =
      simulate(scenario.model, controller, scenario.initializer(),
               params.delay, params.horizon, params.dt, 11, logs);
  REQUIRE(trace.completed());
  // the follower accelerates toward the desired velocity and stays safe
  CHECK(trace.states.back()[0] > 16.0);
  CHECK(trace.states.back()[0] < 30.0);
  // every logged step: membership in the safe set implies the plain margin
  for (std::size_t s = 0; s < trace.states.size(); ++s) {
    const Vec& x = trace.states[s];
    CHECK(x[2] - params.headway * x[0] > 0.0);
    if (trace.log_values[0][s] >= 0.0) {
      CHECK(x[2] - params.headway * x[0] >= 0.0);
    }
  }
}

TEST_CASE("transversality margin along simulated preset paths") {
  // G = H1 must stay clear of zero along typical closed-loop paths; report
  // any violation through the controller's hard error
  const CarFollowingScenario scenario = preset(PresetFamily::Fig1InitialStates, 3);
  const Controller controller = [&](const HistorySegment& phi) {
    return sliding_control(scenario.controller, phi);
  };
  const SimulationTrace trace =
      simulate(scenario.model, controller, scenario.initializer(),
               scenario.params.delay, 2.0, scenario.params.dt, 2026);
  CHECK(trace.completed());
}

TEST_SUITE_END();
