#include "sddectl/functionals.hpp"

#include <cmath>
#include <utility>

namespace sddectl {

// ---------------------------------------------------------------------------
// ClassKFunction

ClassKFunction::ClassKFunction(std::string name, std::function<double(double)> fn,
                               Kind kind, double grid_max)
    : name_(std::move(name)), fn_(std::move(fn)), kind_(kind) {
  if (!(grid_max > 0.0)) {
    throw ConfigError("class-K '" + name_ + "': grid_max must be positive");
  }
  if (std::abs(fn_(0.0)) > 1e-12) {
    throw ConfigError("class-K '" + name_ + "': value at 0 is not 0");
  }
  constexpr int kGridPoints = 100;
  double prev = 0.0;
  for (int i = 1; i <= kGridPoints; ++i) {
    const double s = grid_max * static_cast<double>(i) / kGridPoints;
    const double v = fn_(s);
    if (!std::isfinite(v) || v <= prev) {
      throw ConfigError("class-K '" + name_ +
                        "': not strictly increasing near s = " + std::to_string(s));
    }
    prev = v;
  }
  if (kind_ == Kind::KInfinity && !(fn_(1e6) > 1e3)) {
    throw ConfigError("class-K-infinity '" + name_ +
                      "': unboundedness smoke test failed (f(1e6) <= 1e3)");
  }
}

ClassKFunction ClassKFunction::identity() {
  return ClassKFunction("identity", [](double s) { return s; }, Kind::KInfinity);
}

ClassKFunction ClassKFunction::linear(double slope, Kind kind) {
  if (!(slope > 0.0)) {
    throw ConfigError("class-K linear: slope must be positive");
  }
  return ClassKFunction("linear_" + std::to_string(slope),
                        [slope](double s) { return slope * s; }, kind);
}

ClassKFunction ClassKFunction::power(double coefficient, double exponent, Kind kind) {
  if (!(coefficient > 0.0) || !(exponent > 0.0)) {
    throw ConfigError("class-K power: coefficient and exponent must be positive");
  }
  return ClassKFunction(
      "power_" + std::to_string(coefficient) + "_" + std::to_string(exponent),
      [coefficient, exponent](double s) { return coefficient * std::pow(s, exponent); },
      kind);
}

// ---------------------------------------------------------------------------
// PointwiseIntegralFunctional

PointwiseIntegralFunctional::PointwiseIntegralFunctional(
    std::string name, std::function<double(const Vec&)> head,
    std::function<Vec(const Vec&)> head_gradient,
    std::function<Mat(const Vec&)> head_hessian,
    std::function<double(const Vec&)> integrand)
    : SeparableFunctional(std::move(name)),
      head_(std::move(head)),
      head_gradient_(std::move(head_gradient)),
      head_hessian_(std::move(head_hessian)),
      integrand_(std::move(integrand)) {}

double PointwiseIntegralFunctional::v1(const HistorySegment& phi) const {
  return head_(Vec(phi.newest()));
}

double PointwiseIntegralFunctional::v2(const HistorySegment& phi) const {
  return phi.integrate([this](SampleRef x) { return integrand_(Vec(x)); });
}

Vec PointwiseIntegralFunctional::grad_v1(const HistorySegment& phi) const {
  return head_gradient_(Vec(phi.newest()));
}

Mat PointwiseIntegralFunctional::hess_v1(const HistorySegment& phi) const {
  return head_hessian_(Vec(phi.newest()));
}

double PointwiseIntegralFunctional::dini_v2(const HistorySegment& phi) const {
  return integrand_(Vec(phi.newest())) - integrand_(Vec(phi.oldest()));
}

// ---------------------------------------------------------------------------
// QuadraticTrackingFunctional

QuadraticTrackingFunctional::QuadraticTrackingFunctional(int component,
                                                         double target,
                                                         int state_dim)
    : SeparableFunctional("quadratic_tracking"),
      component_(component),
      target_(target),
      state_dim_(state_dim) {
  if (component < 0 || component >= state_dim) {
    throw ConfigError("quadratic_tracking: component out of range");
  }
}

double QuadraticTrackingFunctional::v1(const HistorySegment& phi) const {
  const double e = error(phi.newest().data());
  return e * e;
}

double QuadraticTrackingFunctional::v2(const HistorySegment& phi) const {
  return phi.integrate([this](SampleRef x) {
    const double e = error(x.data());
    return e * e;
  });
}

Vec QuadraticTrackingFunctional::grad_v1(const HistorySegment& phi) const {
  Vec g = Vec::Zero(state_dim_);
  g[component_] = 2.0 * error(phi.newest().data());
  return g;
}

Mat QuadraticTrackingFunctional::hess_v1(const HistorySegment&) const {
  Mat h = Mat::Zero(state_dim_, state_dim_);
  h(component_, component_) = 2.0;
  return h;
}

double QuadraticTrackingFunctional::dini_v2(const HistorySegment& phi) const {
  const double e0 = error(phi.newest().data());
  const double e1 = error(phi.oldest().data());
  return e0 * e0 - e1 * e1;
}

// ---------------------------------------------------------------------------
// HeadwayMarginFunctional

HeadwayMarginFunctional::HeadwayMarginFunctional(int speed_component,
                                                 int gap_component, double headway,
                                                 double quad_coeff, int state_dim)
    : SeparableFunctional("headway_margin"),
      speed_component_(speed_component),
      gap_component_(gap_component),
      headway_(headway),
      quad_coeff_(quad_coeff),
      state_dim_(state_dim) {
  if (speed_component < 0 || speed_component >= state_dim || gap_component < 0 ||
      gap_component >= state_dim || speed_component == gap_component) {
    throw ConfigError("headway_margin: bad component indices");
  }
  if (!(headway > 0.0) || quad_coeff < 0.0) {
    throw ConfigError("headway_margin: headway must be positive, quad_coeff >= 0");
  }
}

double HeadwayMarginFunctional::v1(const HistorySegment& phi) const {
  return margin_ptr(phi.newest().data());
}

double HeadwayMarginFunctional::v2(const HistorySegment& phi) const {
  return phi.integrate([this](SampleRef x) {
    const double s = margin_ptr(x.data());
    return -quad_coeff_ * s * s;
  });
}

Vec HeadwayMarginFunctional::grad_v1(const HistorySegment&) const {
  Vec g = Vec::Zero(state_dim_);
  g[speed_component_] = -headway_;
  g[gap_component_] = 1.0;
  return g;
}

Mat HeadwayMarginFunctional::hess_v1(const HistorySegment&) const {
  return Mat::Zero(state_dim_, state_dim_);
}

double HeadwayMarginFunctional::dini_v2(const HistorySegment& phi) const {
  const double s0 = margin_ptr(phi.newest().data());
  const double s1 = margin_ptr(phi.oldest().data());
  return -quad_coeff_ * (s0 * s0 - s1 * s1);
}

// ---------------------------------------------------------------------------
// LogReciprocalBarrier

LogReciprocalBarrier::LogReciprocalBarrier(FunctionalPtr h)
    : SeparableFunctional("log_reciprocal_barrier"), h_(std::move(h)) {
  if (!h_) {
    throw ConfigError("barrier: null safe-set functional");
  }
}

double LogReciprocalBarrier::value_at(double h) {
  return std::log1p(1.0 / h);
}

double LogReciprocalBarrier::checked_h(const HistorySegment& phi) const {
  const double h = h_->value(phi);
  if (!(h > 0.0)) {
    throw SafeSetViolationError("barrier undefined: h = " + std::to_string(h));
  }
  return h;
}

double LogReciprocalBarrier::v1(const HistorySegment& phi) const {
  return value_at(checked_h(phi));
}

double LogReciprocalBarrier::v2(const HistorySegment&) const { return 0.0; }

// d/dh ln(1 + 1/h) = -1 / (h (1 + h)); the second derivative is
// (2h + 1) / (h^2 (1 + h)^2). The chain rule below routes the phi(0)
// dependence of h through the head terms and the window dependence through
// the Dini term, which is exactly the Ito drift split of the wrapped value.

Vec LogReciprocalBarrier::grad_v1(const HistorySegment& phi) const {
  const double h = checked_h(phi);
  return Vec(-1.0 / (h * (1.0 + h)) * h_->grad_v1(phi));
}

Mat LogReciprocalBarrier::hess_v1(const HistorySegment& phi) const {
  const double h = checked_h(phi);
  const double first = -1.0 / (h * (1.0 + h));
  const double second = (2.0 * h + 1.0) / (h * h * (1.0 + h) * (1.0 + h));
  const Vec gh = h_->grad_v1(phi);
  return Mat(second * (gh * gh.transpose()) + first * h_->hess_v1(phi));
}

double LogReciprocalBarrier::dini_v2(const HistorySegment& phi) const {
  const double h = checked_h(phi);
  return -1.0 / (h * (1.0 + h)) * h_->dini_v2(phi);
}

// ---------------------------------------------------------------------------
// Sclkf / Scbkf

std::vector<std::string> Sclkf::spot_check(
    std::span<const HistorySegment> buffers) const {
  std::vector<std::string> warnings;
  for (std::size_t i = 0; i < buffers.size(); ++i) {
    const HistorySegment& phi = buffers[i];
    const double value = functional->value(phi);
    const double lower = alpha1(Vec(phi.newest()).norm());
    const double upper = alpha2(phi.sup_norm());
    if (value < lower - 1e-9 * (1.0 + std::abs(value)) ||
        value > upper + 1e-9 * (1.0 + std::abs(value))) {
      warnings.push_back("sclkf sandwich violated on sampled buffer " +
                         std::to_string(i) + ": alpha1 = " + std::to_string(lower) +
                         ", V = " + std::to_string(value) +
                         ", alpha2 = " + std::to_string(upper));
    }
  }
  return warnings;
}

Region Scbkf::region(const HistorySegment& phi) const {
  const double value = eval_h(phi);
  if (std::abs(value) <= boundary_tol) {
    return Region::Boundary;
  }
  return value > 0.0 ? Region::Interior : Region::Exterior;
}

double Scbkf::eval_barrier(const HistorySegment& phi) const {
  const double value = eval_h(phi);
  if (!(value > 0.0)) {
    throw SafeSetViolationError("barrier evaluated outside the safe set, h = " +
                                std::to_string(value));
  }
  return barrier->value(phi);
}

std::vector<std::string> Scbkf::spot_check(
    std::span<const HistorySegment> buffers) const {
  std::vector<std::string> warnings;
  for (std::size_t i = 0; i < buffers.size(); ++i) {
    const HistorySegment& phi = buffers[i];
    const double hv = eval_h(phi);
    if (!(hv > 0.0)) {
      warnings.push_back("scbkf spot check given a non-interior buffer " +
                         std::to_string(i));
      continue;
    }
    const double reciprocal = 1.0 / barrier->value(phi);
    const double lower = alpha1(hv);
    const double upper = alpha2(hv);
    const double slack = 1e-9 * (1.0 + std::abs(reciprocal));
    if (reciprocal < lower - slack || reciprocal > upper + slack) {
      warnings.push_back("scbkf reciprocal sandwich violated on buffer " +
                         std::to_string(i) + ": alpha1(h) = " + std::to_string(lower) +
                         ", 1/B = " + std::to_string(reciprocal) +
                         ", alpha2(h) = " + std::to_string(upper));
    }
  }
  return warnings;
}

// ---------------------------------------------------------------------------
// Drift decomposition

DriftDecomposition drift_decomposition(const SeparableFunctional& functional,
                                       const SddeModel& model,
                                       const HistorySegment& phi) {
  if (phi.state_dim() != model.state_dim) {
    throw DomainError("drift_decomposition: buffer dimension " +
                      std::to_string(phi.state_dim()) + " does not match model");
  }
  const Vec grad = functional.grad_v1(phi);
  const Mat hess = functional.hess_v1(phi);
  if (grad.size() != model.state_dim || hess.rows() != model.state_dim ||
      hess.cols() != model.state_dim) {
    throw DomainError("drift_decomposition: functional derivative shapes do not "
                      "match the model dimension");
  }

  const Vec f = model.f(phi);
  const Mat g = model.g(phi);
  const Mat rho = model.rho(phi);

  double trace = 0.0;
  const Mat hess_rho = hess * rho;
  for (int j = 0; j < model.noise_dim; ++j) {
    trace += rho.col(j).dot(hess_rho.col(j));
  }

  DriftDecomposition out;
  out.a = grad.dot(f) + 0.5 * trace + functional.dini_v2(phi);
  out.b = Vec(g.transpose() * grad);
  return out;
}

}  // namespace sddectl
