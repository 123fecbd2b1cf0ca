#pragma once

#include <functional>
#include <string>

#include "sddectl/functionals.hpp"
#include "sddectl/history.hpp"
#include "sddectl/model.hpp"
#include "sddectl/types.hpp"

namespace sddectl {

/// Universal-formula gain map
///   kappa(lambda, p, q) = -(p + sqrt(p^2 + lambda ||q||^4)) / ||q||^2 * q
/// with the zero branch taken when ||q||^2 <= zero_threshold. Total and
/// continuous; the threshold keeps the division bounded in floating point.
Vec sontag_kappa(double lambda, double p, const Vec& q,
                 double zero_threshold = 1e-12);

/// Lyapunov-Krasovskii stabilizer built from an Sclkf.
struct SontagController {
  Sclkf sclkf;
  double lambda = 1.0;
  double zero_threshold = 1e-12;
};

/// Feedback of the SontagController: zero on (numerically) zero buffers,
/// otherwise kappa applied to the drift decomposition of V with the
/// gamma1(V) margin folded into the scalar term.
Vec stabilizing_control(const SontagController& controller, const SddeModel& model,
                        const HistorySegment& phi);

/// Membership test for the safety-admissible input set: an input is
/// admissible when the stochastic drift of the barrier stays strictly below
/// gamma2(h(phi)). Returns the margin gamma2(h) - (a_B + b_B . u); the
/// buffer must be in the interior of the safe set.
struct AdmissibilityResult {
  bool admissible = false;
  double margin = 0.0;
};

AdmissibilityResult safety_admissible(const Scbkf& scbkf, const SddeModel& model,
                                      const HistorySegment& phi, const Vec& u);

/// Combination function psi(V, B) with its partial derivatives.
struct PsiFunction {
  std::function<double(double, double)> value;
  std::function<double(double, double)> dV;
  std::function<double(double, double)> dB;

  /// psi(V, B) = alpha(V) + beta(B); alpha and beta map into R+.
  static PsiFunction additive(std::function<double(double)> alpha,
                              std::function<double(double)> alpha_derivative,
                              std::function<double(double)> beta,
                              std::function<double(double)> beta_derivative);

  /// Additive form with linear weights: weight_v * V + weight_b * B.
  static PsiFunction weighted_sum(double weight_v, double weight_b);
};

/// How the second-order noise term of the surface drift weights the two
/// Hessians. `AsPrinted` sums them unweighted; `StrictIto` applies the psi
/// partials, which is the exact Ito expansion for non-identity weights. The
/// closed-loop drift identity holds under either choice since the
/// controller and the drift share one L.
enum class TraceWeighting { AsPrinted, StrictIto };

/// Sliding surface U(phi) = psi(V(phi), B(phi)) over an SCLKF / SCBKF pair.
struct SlidingSurface {
  Sclkf sclkf;
  Scbkf scbkf;
  PsiFunction psi;
  TraceWeighting trace_weighting = TraceWeighting::AsPrinted;

  /// U(phi); throws SafeSetViolationError outside the interior.
  double value(const HistorySegment& phi) const;

  /// For the additive form, samples beta over [barrier_floor, sample_max]
  /// and reports values that are not strictly positive; U = 0 then forces
  /// the barrier below the floor, which places the sliding set strictly
  /// inside the safe set.
  std::vector<std::string> check_additive_positivity(
      const std::function<double(double)>& beta, double barrier_floor,
      double sample_max = 1e6) const;
};

/// First-order data of the surface drift D+U = F + G u + L:
///   H = psi_V grad V1 + psi_B grad B1,   F = H . f,   G = g^T H,
///   L = psi_V D+V2 + psi_B D+B2 + 0.5 tr[rho^T (Hess V1 + Hess B1) rho]
/// (Hessians weighted per TraceWeighting). V, B, U values come along for
/// reuse by callers.
struct SlidingTerms {
  Vec H;
  double F = 0.0;
  Vec G;
  double L = 0.0;
  double V = 0.0;
  double B = 0.0;
  double U = 0.0;
  double psi_dV = 0.0;
  double psi_dB = 0.0;
};

SlidingTerms sliding_terms(const SlidingSurface& surface, const SddeModel& model,
                           const HistorySegment& phi);

/// Auxiliary matrices of the sliding algebra:
///   J1 = (g G^T f^T - f G g^T) / (2 ||G||^2)
///   J2 = (g G^T f^T + f G g^T) / (2 ||G||^2)
/// satisfying H J1 H^T = 0 and H (J1 + J2) H^T = F. Requires the
/// transversality condition ||G||^2 above tolerance.
struct AuxJ {
  Mat J1;
  Mat J2;
};

AuxJ aux_j(const SddeModel& model, const HistorySegment& phi, const Vec& G,
           double transversality_tol = 1e-10);

/// Safe-stabilizing sliding controller
///   u = -G^T (H J2 H^T + L + K) / ||G||^2,  K = gain * U / (|U| + smoothing)
/// which pins the closed-loop surface drift to F + G u + L = -K.
struct SlidingController {
  SlidingSurface surface;
  SddeModel model;
  double gain = 1.0;
  double smoothing = 0.1;
  double transversality_tol = 1e-10;

  Vec operator()(const HistorySegment& phi) const;
};

Vec sliding_control(const SlidingController& controller, const HistorySegment& phi);

/// Switching term K(U) = gain * U / (|U| + smoothing).
double switching_gain(double gain, double smoothing, double surface_value);

}  // namespace sddectl
