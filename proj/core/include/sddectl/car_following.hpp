#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sddectl/controllers.hpp"
#include "sddectl/functionals.hpp"
#include "sddectl/model.hpp"
#include "sddectl/types.hpp"

namespace sddectl {

/// Piecewise-constant lead-car acceleration schedule, right-continuous in t
/// and clamped to the declared [-2.5, 2.5] m/s^2 envelope at construction.
class LeadAccelProfile {
 public:
  LeadAccelProfile() = default;  // identically zero
  LeadAccelProfile(std::vector<double> times, std::vector<double> values);

  double operator()(double t) const;

  static LeadAccelProfile constant(double accel);
  /// accel on [0, t_end), zero afterwards.
  static LeadAccelProfile ramp(double accel, double t_end);

  const std::vector<double>& times() const noexcept { return times_; }
  const std::vector<double>& values() const noexcept { return values_; }

 private:
  std::vector<double> times_;   // segment start times, increasing, times_[0] = 0
  std::vector<double> values_;  // acceleration on [times_[i], times_[i+1])
};

/// Parameters of the two-car benchmark. State x = (x1, x2, x3): follower
/// velocity, leader velocity, inter-car distance. Defaults reproduce the
/// shipped scenario presets.
struct CarFollowingParams {
  double mass = 1650.0;  // kg
  double drag0 = 0.1;
  double drag1 = 5.0;
  double drag2 = 0.25;
  double desired_velocity = 22.0;  // m/s
  double varrho = 50.0;            // barrier weight in U = V + varrho B
  double delay = 0.2;              // s
  double headway = 1.8;            // s
  double quad_coeff = 0.01;        // weight of the integral penalty in h
  double noise_scale = 0.05;       // diffusion = noise_scale * (x1, 0, x3)
  double gain = 10.0;              // switching gain K
  double smoothing = 0.1;          // switching smoothing varpi
  double transversality_tol = 1e-10;
  double sontag_lambda = 1.0;
  TraceWeighting trace_weighting = TraceWeighting::AsPrinted;
  LeadAccelProfile lead_accel;  // zero by default
  Vec initial_state = (Vec(3) << 16.0, 10.0, 150.0).finished();
  double dt = 1e-3;
  double horizon = 60.0;

  void validate() const;
};

/// Aggregate drag force per unit mass: (a0 + a1 v + a2 v^2) / M.
double drag_force(const CarFollowingParams& params, double velocity);

/// Drift uses the delayed drag estimate:
///   f = (F(phi(-delta)) - F(phi(0)), a(t), phi2(0) - phi1(0)),
/// g = (1, 0, 0)^T and diffusion = noise_scale * (phi1(0), 0, phi3(0))
/// against scalar noise.
SddeModel build_model(const CarFollowingParams& params);

struct CarFollowingFunctionals {
  Sclkf sclkf;
  Scbkf scbkf;
};

/// Tracking SCLKF (squared velocity error, pointwise plus window integral)
/// and headway SCBKF (logarithmic reciprocal barrier over the headway
/// margin functional), with the comparison functions fixed at registration.
CarFollowingFunctionals build_functionals(const CarFollowingParams& params);

/// U = V + varrho * B.
SlidingSurface build_surface(const CarFollowingParams& params);

SlidingController build_sliding_controller(const CarFollowingParams& params);

/// Fully assembled scenario. The initializer is the constant history at
/// `params.initial_state`.
struct CarFollowingScenario {
  std::string name;
  CarFollowingParams params;
  SddeModel model;
  Sclkf sclkf;
  Scbkf scbkf;
  SlidingSurface surface;
  SlidingController controller;

  std::function<Vec(double)> initializer() const;
  /// Pointwise safety margin x3 - headway * x1.
  std::function<double(const Vec&)> pointwise_margin() const;
  /// |x1 - desired_velocity| scored at the end of the horizon.
  std::function<double(const Vec&)> terminal_velocity_error() const;
};

CarFollowingScenario make_scenario(const CarFollowingParams& params,
                                   std::string name = "car_following");

enum class PresetFamily { Fig1InitialStates, Fig2NoiseLevels };

/// Scenario presets:
///   Fig1InitialStates, index l in {1..6}: xi = (8 + 2l, 10, 150),
///     noise_scale 0.05, gain 10.
///   Fig2NoiseLevels, index ell in {1..10}: xi = (16, 10, 150),
///     noise_scale ell, gain 15.
/// Both run dt = 1e-3, horizon 60 s, smoothing 0.1.
CarFollowingScenario preset(PresetFamily family, int index);

PresetFamily preset_family_from_name(const std::string& name);
int preset_family_size(PresetFamily family);

/// Deterministic sampler of random interior buffers around the scenario's
/// initial state (affine-in-theta perturbations, rejection on h <= 0).
/// `grid_step` may refine the scenario grid for finite-difference work.
std::function<HistorySegment(std::uint64_t)> interior_buffer_sampler(
    const CarFollowingScenario& scenario, std::uint64_t seed,
    double grid_step = 0.0);

}  // namespace sddectl
