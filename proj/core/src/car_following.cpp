#include "sddectl/car_following.hpp"

#include <cmath>
#include <memory>
#include <utility>

#include "sddectl/rng.hpp"

namespace sddectl {

namespace {
constexpr double kLeadAccelBound = 2.5;  // m/s^2
}

LeadAccelProfile::LeadAccelProfile(std::vector<double> times,
                                   std::vector<double> values)
    : times_(std::move(times)), values_(std::move(values)) {
  if (times_.size() != values_.size() || times_.empty()) {
    throw ConfigError("lead_accel: times and values must be equal-length, nonempty");
  }
  if (times_.front() != 0.0) {
    throw ConfigError("lead_accel: first segment must start at t = 0");
  }
  for (std::size_t i = 0; i + 1 < times_.size(); ++i) {
    if (!(times_[i] < times_[i + 1])) {
      throw ConfigError("lead_accel: times must be strictly increasing");
    }
  }
  for (double a : values_) {
    if (!(std::abs(a) <= kLeadAccelBound)) {
      throw ConfigError("lead_accel: |a| must stay within " +
                        std::to_string(kLeadAccelBound) + " m/s^2");
    }
  }
}

double LeadAccelProfile::operator()(double t) const {
  if (times_.empty() || t < times_.front()) {
    return 0.0;
  }
  std::size_t i = times_.size() - 1;
  while (i > 0 && t < times_[i]) {
    --i;
  }
  return values_[i];
}

LeadAccelProfile LeadAccelProfile::constant(double accel) {
  return LeadAccelProfile({0.0}, {accel});
}

LeadAccelProfile LeadAccelProfile::ramp(double accel, double t_end) {
  if (!(t_end > 0.0)) {
    throw ConfigError("lead_accel ramp: t_end must be positive");
  }
  return LeadAccelProfile({0.0, t_end}, {accel, 0.0});
}

void CarFollowingParams::validate() const {
  if (!(mass > 0.0)) {
    throw ConfigError("car_following: mass must be positive");
  }
  if (!(delay > 0.0)) {
    throw ConfigError("car_following: delay must be positive");
  }
  if (!(headway > 0.0)) {
    throw ConfigError("car_following: headway must be positive");
  }
  if (noise_scale < 0.0) {
    throw ConfigError("car_following: noise_scale must be nonnegative");
  }
  if (!(varrho > 0.0) || !(gain > 0.0) || !(smoothing > 0.0)) {
    throw ConfigError("car_following: varrho, gain and smoothing must be positive");
  }
  if (initial_state.size() != 3) {
    throw ConfigError("car_following: initial state must have dimension 3");
  }
  if (!(dt > 0.0) || !(horizon > 0.0)) {
    throw ConfigError("car_following: dt and horizon must be positive");
  }
  checked_grid_ratio(delay, dt);
}

double drag_force(const CarFollowingParams& params, double velocity) {
  return (params.drag0 + params.drag1 * velocity +
          params.drag2 * velocity * velocity) /
         params.mass;
}

SddeModel build_model(const CarFollowingParams& params) {
  params.validate();
  SddeModel model;
  model.state_dim = 3;
  model.input_dim = 1;
  model.noise_dim = 1;
  const CarFollowingParams p = params;
  model.drift = [p](const HistorySegment& phi) {
    const SampleRef now = phi.newest();
    const SampleRef delayed = phi.oldest();
    Vec f(3);
    f[0] = drag_force(p, delayed[0]) - drag_force(p, now[0]);
    f[1] = p.lead_accel(phi.time());
    f[2] = now[1] - now[0];
    return f;
  };
  model.input_map = [](const HistorySegment&) {
    Mat g = Mat::Zero(3, 1);
    g(0, 0) = 1.0;
    return g;
  };
  const double scale = params.noise_scale;
  model.diffusion = [scale](const HistorySegment& phi) {
    const SampleRef now = phi.newest();
    Mat rho = Mat::Zero(3, 1);
    rho(0, 0) = scale * now[0];
    rho(2, 0) = scale * now[2];
    return rho;
  };
  return model;
}

CarFollowingFunctionals build_functionals(const CarFollowingParams& params) {
  params.validate();
  CarFollowingFunctionals out;

  auto tracking = std::make_shared<QuadraticTrackingFunctional>(
      0, params.desired_velocity, 3);
  const double v_d = params.desired_velocity;
  const double window_gain = 1.0 + params.delay;
  out.sclkf.functional = tracking;
  out.sclkf.gamma1 = ClassKFunction::identity();
  // The tracking functional vanishes on the x1 = v_d manifold rather than at
  // the origin, so the sandwich can only hold away from that set; both
  // bounds are registration choices checked by sampling.
  out.sclkf.alpha1 = ClassKFunction::power(1e-14, 3.0);
  out.sclkf.alpha2 = ClassKFunction(
      "tracking_upper",
      [v_d, window_gain](double s) {
        return window_gain * ((s + v_d) * (s + v_d) - v_d * v_d);
      },
      ClassKFunction::Kind::KInfinity);

  auto margin = std::make_shared<HeadwayMarginFunctional>(
      0, 2, params.headway, params.quad_coeff, 3);
  out.scbkf.h = margin;
  out.scbkf.barrier = std::make_shared<LogReciprocalBarrier>(margin);
  out.scbkf.gamma2 = ClassKFunction::identity();
  // ln(1 + 1/h) is bracketed by 1/(1+h) and 1/h, so h <= 1/B <= 1/ln(1+1/h)
  // with the upper bound tight by construction.
  out.scbkf.alpha1 = ClassKFunction("reciprocal_lower", [](double s) { return s; },
                                    ClassKFunction::Kind::K);
  out.scbkf.alpha2 = ClassKFunction(
      "reciprocal_upper",
      [](double s) { return s <= 0.0 ? 0.0 : 1.0 / std::log1p(1.0 / s); },
      ClassKFunction::Kind::K);
  return out;
}

SlidingSurface build_surface(const CarFollowingParams& params) {
  CarFollowingFunctionals fns = build_functionals(params);
  SlidingSurface surface;
  surface.sclkf = std::move(fns.sclkf);
  surface.scbkf = std::move(fns.scbkf);
  surface.psi = PsiFunction::weighted_sum(1.0, params.varrho);
  surface.trace_weighting = params.trace_weighting;
  return surface;
}

SlidingController build_sliding_controller(const CarFollowingParams& params) {
  SlidingController controller;
  controller.surface = build_surface(params);
  controller.model = build_model(params);
  controller.gain = params.gain;
  controller.smoothing = params.smoothing;
  controller.transversality_tol = params.transversality_tol;
  return controller;
}

std::function<Vec(double)> CarFollowingScenario::initializer() const {
  const Vec xi = params.initial_state;
  return [xi](double) { return xi; };
}

std::function<double(const Vec&)> CarFollowingScenario::pointwise_margin() const {
  const double headway = params.headway;
  return [headway](const Vec& x) { return x[2] - headway * x[0]; };
}

std::function<double(const Vec&)> CarFollowingScenario::terminal_velocity_error()
    const {
  const double v_d = params.desired_velocity;
  return [v_d](const Vec& x) { return std::abs(x[0] - v_d); };
}

CarFollowingScenario make_scenario(const CarFollowingParams& params,
                                   std::string name) {
  CarFollowingScenario scenario;
  scenario.name = std::move(name);
  scenario.params = params;
  scenario.model = build_model(params);
  CarFollowingFunctionals fns = build_functionals(params);
  scenario.sclkf = fns.sclkf;
  scenario.scbkf = fns.scbkf;
  scenario.surface = build_surface(params);
  scenario.controller = build_sliding_controller(params);
  return scenario;
}

CarFollowingScenario preset(PresetFamily family, int index) {
  CarFollowingParams params;
  std::string name;
  switch (family) {
    case PresetFamily::Fig1InitialStates:
      if (index < 1 || index > 6) {
        throw ConfigError("preset fig1_l: index must be in 1..6");
      }
      params.initial_state =
          (Vec(3) << 8.0 + 2.0 * index, 10.0, 150.0).finished();
      params.noise_scale = 0.05;
      params.gain = 10.0;
      name = "fig1_l" + std::to_string(index);
      break;
    case PresetFamily::Fig2NoiseLevels:
      if (index < 1 || index > 10) {
        throw ConfigError("preset fig2_ell: index must be in 1..10");
      }
      params.initial_state = (Vec(3) << 16.0, 10.0, 150.0).finished();
      params.noise_scale = static_cast<double>(index);
      params.gain = 15.0;
      name = "fig2_ell" + std::to_string(index);
      break;
    default:
      throw ConfigError("preset: unknown family");
  }
  return make_scenario(params, name);
}

PresetFamily preset_family_from_name(const std::string& name) {
  if (name == "fig1_l") {
    return PresetFamily::Fig1InitialStates;
  }
  if (name == "fig2_ell") {
    return PresetFamily::Fig2NoiseLevels;
  }
  throw ConfigError("unknown preset family '" + name + "'");
}

int preset_family_size(PresetFamily family) {
  return family == PresetFamily::Fig1InitialStates ? 6 : 10;
}

std::function<HistorySegment(std::uint64_t)> interior_buffer_sampler(
    const CarFollowingScenario& scenario, std::uint64_t seed, double grid_step) {
  const double dt = grid_step > 0.0 ? grid_step : scenario.params.dt;
  const double delay = scenario.params.delay;
  const Vec base = scenario.params.initial_state;
  const Scbkf scbkf = scenario.scbkf;
  // Perturbation scale per component: a few m/s on the velocities, tens of
  // meters on the gap.
  const Vec scales = (Vec(3) << 3.0, 3.0, 30.0).finished();

  return [=](std::uint64_t index) {
    // One independent stream per index so samples do not depend on call order.
    GaussianRng rng(seed ^ (0x9e3779b97f4a7c15ULL * (index + 1)));
    for (int attempt = 0; attempt < 1000; ++attempt) {
      Vec offset(3), slope(3);
      for (int c = 0; c < 3; ++c) {
        offset[c] = scales[c] * rng.normal();
        slope[c] = 0.5 * scales[c] * rng.normal();
      }
      HistorySegment candidate(
          delay, dt, 3,
          [&](double theta) {
            return Vec(base + offset + (theta / delay) * slope);
          });
      if (scbkf.eval_h(candidate) > 1e-6) {
        return candidate;
      }
    }
    throw SamplingError("interior_buffer_sampler: rejection sampling exhausted");
  };
}

}  // namespace sddectl
