#pragma once

#include <functional>
#include <string>

#include "sddectl/history.hpp"
#include "sddectl/types.hpp"

namespace sddectl {

/// Control-affine stochastic delay model
///
///   dx(t) = (f(x_t) + g(x_t) u) dt + rho(x_t) dw(t)
///
/// where every right-hand side term is a functional of the whole history
/// segment x_t. `drift` maps to an n-vector, `input_map` to an n x m matrix
/// and `diffusion` to an n x p matrix. All three must be safe to call
/// concurrently from multiple simulation paths.
struct SddeModel {
  int state_dim = 0;  // n
  int input_dim = 0;  // m
  int noise_dim = 0;  // p

  std::function<Vec(const HistorySegment&)> drift;      // f
  std::function<Mat(const HistorySegment&)> input_map;  // g
  std::function<Mat(const HistorySegment&)> diffusion;  // rho

  /// Set when the model is declared to have the origin as equilibrium
  /// (f, g, rho all vanish on the zero history). Checked by
  /// `check_zero_equilibrium`, which factories call when the flag is set.
  bool zero_equilibrium = false;

  /// Shape-checked evaluations.
  Vec f(const HistorySegment& phi) const;
  Mat g(const HistorySegment& phi) const;
  Mat rho(const HistorySegment& phi) const;

  /// Verifies f, g, rho vanish (within 1e-12) on the zero buffer of the
  /// given grid. Throws DomainError on violation.
  void check_zero_equilibrium(double delay, double grid_step) const;
};

/// One explicit Euler-Maruyama step from the newest state of `hist`:
/// phi(0) + (f(phi) + g(phi) u) dt + rho(phi) dW. `dt` must equal the
/// buffer's grid step so that pushing the result advances the window by
/// exactly one grid cell.
Vec em_step(const SddeModel& model, const HistorySegment& hist, const Vec& u,
            double dt, const Vec& dW);

}  // namespace sddectl
