#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sddectl/history.hpp"
#include "sddectl/model.hpp"
#include "sddectl/types.hpp"

namespace sddectl {

/// Scalar comparison function validated as class K (zero at zero, strictly
/// increasing on a sampled grid) or class K-infinity (additionally
/// unbounded, smoke-tested at 1e6). Validation runs at construction and
/// throws ConfigError on violation; the grid check samples 100 points over
/// (0, grid_max], it does not prove monotonicity.
class ClassKFunction {
 public:
  enum class Kind { K, KInfinity };

  ClassKFunction(std::string name, std::function<double(double)> fn, Kind kind,
                 double grid_max = 1e3);

  double operator()(double s) const { return fn_(s); }
  Kind kind() const noexcept { return kind_; }
  const std::string& name() const noexcept { return name_; }

  static ClassKFunction identity();
  static ClassKFunction linear(double slope, Kind kind = Kind::KInfinity);
  /// c * s^e with c > 0, e > 0.
  static ClassKFunction power(double coefficient, double exponent,
                              Kind kind = Kind::KInfinity);

 private:
  std::string name_;
  std::function<double(double)> fn_;
  Kind kind_;
};

/// Smoothly separable functional V(phi) = V1(phi(0)) + V2(phi) with the
/// pieces a stochastic drift computation needs: the gradient and Hessian of
/// the pointwise head with respect to phi(0), and the analytic Dini
/// derivative of the history tail. Implementations must be immutable and
/// shareable across threads.
///
/// For wrapped functionals (e.g. the logarithmic barrier) the head terms
/// may depend on the whole segment through the wrapped value; the contract
/// is that `grad_v1`/`hess_v1`/`dini_v2` together reproduce the exact Ito
/// drift when combined by `drift_decomposition`.
class SeparableFunctional {
 public:
  explicit SeparableFunctional(std::string name) : name_(std::move(name)) {}
  virtual ~SeparableFunctional() = default;

  double value(const HistorySegment& phi) const { return v1(phi) + v2(phi); }

  virtual double v1(const HistorySegment& phi) const = 0;
  virtual double v2(const HistorySegment& phi) const = 0;
  virtual Vec grad_v1(const HistorySegment& phi) const = 0;
  virtual Mat hess_v1(const HistorySegment& phi) const = 0;
  virtual double dini_v2(const HistorySegment& phi) const = 0;

  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

using FunctionalPtr = std::shared_ptr<const SeparableFunctional>;

/// Generic member of the integral family
///   V(phi) = v1(phi(0)) + integral over [-delay, 0] of w(phi(tau)) dtau,
/// with D+V2(phi) = w(phi(0)) - w(phi(-delay)). Built from std::function
/// pieces; the shipped scenario functionals below are hand-specialized
/// versions of the same structure.
class PointwiseIntegralFunctional final : public SeparableFunctional {
 public:
  PointwiseIntegralFunctional(std::string name,
                              std::function<double(const Vec&)> head,
                              std::function<Vec(const Vec&)> head_gradient,
                              std::function<Mat(const Vec&)> head_hessian,
                              std::function<double(const Vec&)> integrand);

  double v1(const HistorySegment& phi) const override;
  double v2(const HistorySegment& phi) const override;
  Vec grad_v1(const HistorySegment& phi) const override;
  Mat hess_v1(const HistorySegment& phi) const override;
  double dini_v2(const HistorySegment& phi) const override;

 private:
  std::function<double(const Vec&)> head_;
  std::function<Vec(const Vec&)> head_gradient_;
  std::function<Mat(const Vec&)> head_hessian_;
  std::function<double(const Vec&)> integrand_;
};

/// Velocity-tracking functional: (x_c - target)^2 at theta = 0 plus the
/// integral of the same squared error over the window.
class QuadraticTrackingFunctional final : public SeparableFunctional {
 public:
  QuadraticTrackingFunctional(int component, double target, int state_dim);

  double v1(const HistorySegment& phi) const override;
  double v2(const HistorySegment& phi) const override;
  Vec grad_v1(const HistorySegment& phi) const override;
  Mat hess_v1(const HistorySegment& phi) const override;
  double dini_v2(const HistorySegment& phi) const override;

  int component() const noexcept { return component_; }
  double target() const noexcept { return target_; }

 private:
  double error(const double* x) const { return x[component_] - target_; }

  int component_;
  double target_;
  int state_dim_;
};

/// Headway safe-set functional
///   h(phi) = phi_gap(0) - headway * phi_speed(0)
///            - quad_coeff * integral of (phi_gap - headway * phi_speed)^2.
class HeadwayMarginFunctional final : public SeparableFunctional {
 public:
  HeadwayMarginFunctional(int speed_component, int gap_component, double headway,
                          double quad_coeff, int state_dim);

  double v1(const HistorySegment& phi) const override;
  double v2(const HistorySegment& phi) const override;
  Vec grad_v1(const HistorySegment& phi) const override;
  Mat hess_v1(const HistorySegment& phi) const override;
  double dini_v2(const HistorySegment& phi) const override;

  /// Pointwise margin x_gap - headway * x_speed.
  double margin(const Vec& x) const {
    return x[gap_component_] - headway_ * x[speed_component_];
  }

 private:
  double margin_ptr(const double* x) const {
    return x[gap_component_] - headway_ * x[speed_component_];
  }

  int speed_component_;
  int gap_component_;
  double headway_;
  double quad_coeff_;
  int state_dim_;
};

/// Reciprocal barrier B = ln(1 + 1/h) over a separable safe-set functional
/// h. The head derivatives chain through the wrap with the history tail of
/// h frozen, and the tail part of D+h flows into the Dini term, so the
/// decomposition reproduces the exact Ito drift of B. Throws
/// SafeSetViolationError whenever evaluated at h <= 0.
class LogReciprocalBarrier final : public SeparableFunctional {
 public:
  explicit LogReciprocalBarrier(FunctionalPtr h);

  double v1(const HistorySegment& phi) const override;  // the whole wrap
  double v2(const HistorySegment& phi) const override;  // 0
  Vec grad_v1(const HistorySegment& phi) const override;
  Mat hess_v1(const HistorySegment& phi) const override;
  double dini_v2(const HistorySegment& phi) const override;

  const FunctionalPtr& safe_set_functional() const noexcept { return h_; }

  /// Barrier value for a known margin h > 0.
  static double value_at(double h);

 private:
  double checked_h(const HistorySegment& phi) const;

  FunctionalPtr h_;
};

/// Control Lyapunov-Krasovskii bundle: the functional plus its class-K
/// decrement rate gamma1 and the K-infinity sandwich pair declared at
/// registration. The sandwich is global in the definition but only
/// spot-checkable here; `spot_check` reports violations as warnings.
struct Sclkf {
  FunctionalPtr functional;
  ClassKFunction gamma1 = ClassKFunction::identity();
  ClassKFunction alpha1 = ClassKFunction::identity();
  ClassKFunction alpha2 = ClassKFunction::identity();

  std::vector<std::string> spot_check(std::span<const HistorySegment> buffers) const;
};

enum class Region { Interior, Boundary, Exterior };

/// Control barrier-Krasovskii bundle: barrier B, safe-set functional h, the
/// class-K bound gamma2 on the admissible drift, and the reciprocal
/// sandwich pair alpha1(h) <= 1/B <= alpha2(h).
struct Scbkf {
  FunctionalPtr barrier;
  FunctionalPtr h;
  ClassKFunction gamma2 = ClassKFunction::identity();
  ClassKFunction alpha1 = ClassKFunction::identity();
  ClassKFunction alpha2 = ClassKFunction::identity();
  double boundary_tol = 1e-9;

  double eval_h(const HistorySegment& phi) const { return h->value(phi); }

  /// Classifies phi against the safe set; |h| <= boundary_tol is Boundary.
  Region region(const HistorySegment& phi) const;

  /// Barrier value; requires phi in the interior (h > 0).
  double eval_barrier(const HistorySegment& phi) const;

  std::vector<std::string> spot_check(std::span<const HistorySegment> buffers) const;
};

/// Splits the stochastic drift of a separable functional along the model
/// into the input-independent part and the input row:
///
///   a = grad_v1 . f + 0.5 tr[rho^T hess_v1 rho] + dini_v2
///   b = g^T grad_v1
///
/// so that the full drift under input u is a + b . u.
struct DriftDecomposition {
  double a = 0.0;
  Vec b;
};

DriftDecomposition drift_decomposition(const SeparableFunctional& functional,
                                       const SddeModel& model,
                                       const HistorySegment& phi);

}  // namespace sddectl
