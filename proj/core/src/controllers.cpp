#include "sddectl/controllers.hpp"

#include <cmath>
#include <utility>

namespace sddectl {

Vec sontag_kappa(double lambda, double p, const Vec& q, double zero_threshold) {
  if (!(lambda > 0.0)) {
    throw ConfigError("sontag_kappa: lambda must be positive");
  }
  const double q2 = q.squaredNorm();
  if (q2 <= zero_threshold) {
    return Vec::Zero(q.size());
  }
  const double scale = -(p + std::sqrt(p * p + lambda * q2 * q2)) / q2;
  return Vec(scale * q);
}

Vec stabilizing_control(const SontagController& controller, const SddeModel& model,
                        const HistorySegment& phi) {
  if (phi.sup_norm() <= controller.zero_threshold) {
    return Vec::Zero(model.input_dim);
  }
  const DriftDecomposition dd =
      drift_decomposition(*controller.sclkf.functional, model, phi);
  const double a = dd.a + controller.sclkf.gamma1(controller.sclkf.functional->value(phi));
  return sontag_kappa(controller.lambda, a, dd.b, controller.zero_threshold);
}

AdmissibilityResult safety_admissible(const Scbkf& scbkf, const SddeModel& model,
                                      const HistorySegment& phi, const Vec& u) {
  const double h = scbkf.eval_h(phi);
  if (!(h > 0.0)) {
    throw SafeSetViolationError(
        "safety_admissible: buffer is not in the interior, h = " + std::to_string(h));
  }
  const DriftDecomposition dd = drift_decomposition(*scbkf.barrier, model, phi);
  const double drift = dd.a + dd.b.dot(u);
  const double margin = scbkf.gamma2(h) - drift;
  return AdmissibilityResult{margin > 0.0, margin};
}

PsiFunction PsiFunction::additive(std::function<double(double)> alpha,
                                  std::function<double(double)> alpha_derivative,
                                  std::function<double(double)> beta,
                                  std::function<double(double)> beta_derivative) {
  PsiFunction psi;
  psi.value = [alpha, beta](double v, double b) { return alpha(v) + beta(b); };
  psi.dV = [alpha_derivative](double v, double) { return alpha_derivative(v); };
  psi.dB = [beta_derivative](double, double b) { return beta_derivative(b); };
  return psi;
}

PsiFunction PsiFunction::weighted_sum(double weight_v, double weight_b) {
  if (weight_v < 0.0 || weight_b < 0.0) {
    throw ConfigError("psi weighted_sum: weights must be nonnegative");
  }
  return additive([weight_v](double v) { return weight_v * v; },
                  [weight_v](double) { return weight_v; },
                  [weight_b](double b) { return weight_b * b; },
                  [weight_b](double) { return weight_b; });
}

double SlidingSurface::value(const HistorySegment& phi) const {
  const double v = sclkf.functional->value(phi);
  const double b = scbkf.eval_barrier(phi);
  return psi.value(v, b);
}

std::vector<std::string> SlidingSurface::check_additive_positivity(
    const std::function<double(double)>& beta, double barrier_floor,
    double sample_max) const {
  std::vector<std::string> warnings;
  if (!(barrier_floor > 0.0) || !(sample_max > barrier_floor)) {
    warnings.push_back("sliding surface: invalid barrier floor sampling range");
    return warnings;
  }
  // log-spaced sample of beta over [floor, max]
  constexpr int kSamples = 64;
  const double log_lo = std::log(barrier_floor);
  const double log_hi = std::log(sample_max);
  for (int i = 0; i <= kSamples; ++i) {
    const double s =
        std::exp(log_lo + (log_hi - log_lo) * static_cast<double>(i) / kSamples);
    if (!(beta(s) > 0.0)) {
      warnings.push_back(
          "sliding surface: beta(" + std::to_string(s) +
          ") is not positive; the zero level set may touch the boundary");
      break;
    }
  }
  return warnings;
}

SlidingTerms sliding_terms(const SlidingSurface& surface, const SddeModel& model,
                           const HistorySegment& phi) {
  SlidingTerms terms;
  terms.V = surface.sclkf.functional->value(phi);
  terms.B = surface.scbkf.eval_barrier(phi);  // throws outside the interior
  terms.U = surface.psi.value(terms.V, terms.B);
  terms.psi_dV = surface.psi.dV(terms.V, terms.B);
  terms.psi_dB = surface.psi.dB(terms.V, terms.B);

  const SeparableFunctional& lyap = *surface.sclkf.functional;
  const SeparableFunctional& barrier = *surface.scbkf.barrier;

  terms.H = Vec(terms.psi_dV * lyap.grad_v1(phi) + terms.psi_dB * barrier.grad_v1(phi));

  const Vec f = model.f(phi);
  const Mat g = model.g(phi);
  const Mat rho = model.rho(phi);
  terms.F = terms.H.dot(f);
  terms.G = Vec(g.transpose() * terms.H);

  Mat hess_sum;
  if (surface.trace_weighting == TraceWeighting::AsPrinted) {
    hess_sum = lyap.hess_v1(phi) + barrier.hess_v1(phi);
  } else {
    hess_sum = terms.psi_dV * lyap.hess_v1(phi) + terms.psi_dB * barrier.hess_v1(phi);
  }
  double trace = 0.0;
  const Mat hess_rho = hess_sum * rho;
  for (int j = 0; j < model.noise_dim; ++j) {
    trace += rho.col(j).dot(hess_rho.col(j));
  }
  terms.L = terms.psi_dV * lyap.dini_v2(phi) + terms.psi_dB * barrier.dini_v2(phi) +
            0.5 * trace;
  return terms;
}

AuxJ aux_j(const SddeModel& model, const HistorySegment& phi, const Vec& G,
           double transversality_tol) {
  const double g2 = G.squaredNorm();
  if (g2 <= transversality_tol) {
    throw TransversalityError("aux_j: ||G||^2 = " + std::to_string(g2) +
                              " below tolerance " +
                              std::to_string(transversality_tol));
  }
  const Vec f = model.f(phi);
  const Mat g = model.g(phi);
  const Mat outer_gf = (g * G) * f.transpose();                // g G^T f^T
  const Mat outer_fg = f * (G.transpose() * g.transpose());    // f G g^T
  AuxJ out;
  out.J1 = (outer_gf - outer_fg) / (2.0 * g2);
  out.J2 = (outer_gf + outer_fg) / (2.0 * g2);
  return out;
}

double switching_gain(double gain, double smoothing, double surface_value) {
  return gain * surface_value / (std::abs(surface_value) + smoothing);
}

Vec sliding_control(const SlidingController& controller, const HistorySegment& phi) {
  const SlidingTerms terms = sliding_terms(controller.surface, controller.model, phi);
  const double g2 = terms.G.squaredNorm();
  if (g2 <= controller.transversality_tol) {
    throw TransversalityError("sliding_control: ||G||^2 = " + std::to_string(g2) +
                              " below tolerance " +
                              std::to_string(controller.transversality_tol));
  }
  const AuxJ aux = aux_j(controller.model, phi, terms.G, controller.transversality_tol);
  const double hj2h = terms.H.dot(Vec(aux.J2 * terms.H));
  const double k = switching_gain(controller.gain, controller.smoothing, terms.U);
  return Vec(-(hj2h + terms.L + k) / g2 * terms.G);
}

Vec SlidingController::operator()(const HistorySegment& phi) const {
  return sliding_control(*this, phi);
}

}  // namespace sddectl
