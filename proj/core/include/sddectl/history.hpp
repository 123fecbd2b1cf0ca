#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "sddectl/types.hpp"

namespace sddectl {

/// Uniform-grid sample of the delayed state over the window [-delay, 0].
///
/// The buffer owns `delay/grid_step + 1` samples at times
/// -delay, -delay + grid_step, ..., 0 and exposes interpolation, the sup
/// norm and trapezoid quadrature over the window. The grid step must divide
/// the delay exactly, so the lookup at -delay is always grid-exact.
///
/// Value semantics throughout: copies are independent, `push` mutates only
/// the object it is called on, and a buffer can be handed to another thread.
class HistorySegment {
 public:
  /// Builds a buffer by sampling `init` at every grid point.
  /// `start_time` is the wall-clock time of the theta = 0 sample; it is
  /// advanced by `grid_step` on every push and feeds time-varying model
  /// terms such as a scheduled lead acceleration.
  HistorySegment(double delay, double grid_step, int state_dim,
                 const std::function<Vec(double)>& init, double start_time = 0.0);

  /// Constant-in-theta buffer.
  static HistorySegment constant(double delay, double grid_step, const Vec& value,
                                 double start_time = 0.0);

  /// All-zero buffer (used for equilibrium checks).
  static HistorySegment zero(double delay, double grid_step, int state_dim);

  double delay() const noexcept { return delay_; }
  double grid_step() const noexcept { return grid_step_; }
  int state_dim() const noexcept { return state_dim_; }
  Eigen::Index sample_count() const noexcept { return static_cast<Eigen::Index>(count_); }
  /// Time of the newest (theta = 0) sample.
  double time() const noexcept { return time_; }

  /// Grid sample by index, 0 = oldest (theta = -delay), count-1 = newest.
  SampleRef sample_at(Eigen::Index index) const;
  SampleRef newest() const { return sample_at(sample_count() - 1); }
  SampleRef oldest() const { return sample_at(0); }

  /// Linear interpolation at theta in [-delay, 0]; exact on grid points.
  /// Endpoints carry a 1e-12 * delay tolerance; anything further out is a
  /// range error.
  Vec sample(double theta) const;

  /// max over grid samples of the Euclidean norm.
  double sup_norm() const;

  /// Composite trapezoid rule for the integral of w(phi(tau)) over the
  /// window. `w` receives each grid sample as a SampleRef.
  template <typename PointwiseFn>
  double integrate(PointwiseFn&& w) const {
    const Eigen::Index n = sample_count();
    double interior = 0.0;
    for (Eigen::Index i = 1; i + 1 < n; ++i) {
      interior += invoke_integrand(w, i);
    }
    const double ends = invoke_integrand(w, 0) + invoke_integrand(w, n - 1);
    const double result = grid_step_ * (interior + 0.5 * ends);
    if (!std::isfinite(result)) {
      throw NumericError("integrate: non-finite integrand over history window");
    }
    return result;
  }

  /// Drops the oldest sample and appends `state` at theta = 0.
  void push(const Vec& state);

 private:
  HistorySegment() = default;

  void check_index(Eigen::Index index) const;
  const double* data_at(std::size_t logical_index) const;

  template <typename PointwiseFn>
  double invoke_integrand(PointwiseFn&& w, Eigen::Index i) const {
    const double v = w(sample_at(i));
    if (!std::isfinite(v)) {
      throw NumericError("integrate: integrand returned a non-finite value");
    }
    return v;
  }

  double delay_ = 0.0;
  double grid_step_ = 0.0;
  int state_dim_ = 0;
  std::size_t count_ = 0;
  std::size_t head_ = 0;  // ring position of the oldest sample
  double time_ = 0.0;
  std::vector<double> storage_;  // count_ * state_dim_ doubles, ring layout
};

/// Functional-style window shift: copy of `hist` with `state` appended.
HistorySegment advance(HistorySegment hist, const Vec& state);

/// Pointwise affine combinations on a shared grid (used by property tests
/// and by the boundary projection in the verification module).
HistorySegment lerp(const HistorySegment& a, const HistorySegment& b, double t);
HistorySegment add(const HistorySegment& a, const HistorySegment& b);
HistorySegment scale(const HistorySegment& a, double factor);

/// Decides whether `delay / grid_step` is an integer within 1e-9 relative
/// tolerance; returns the step count on success.
std::int64_t checked_grid_ratio(double delay, double grid_step);

}  // namespace sddectl
