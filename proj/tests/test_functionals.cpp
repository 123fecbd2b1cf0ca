#include <doctest.h>

#include <cmath>
#include <memory>

#include "sddectl/car_following.hpp"
#include "sddectl/functionals.hpp"
#include "sddectl/rng.hpp"
#include "support/test_helpers.hpp"

using namespace sddectl;
using sddectl::testing::fd_gradient;
using sddectl::testing::scalar_fd;
using sddectl::testing::with_newest;

namespace {

Vec v1d(double x) { return (Vec(1) << x).finished(); }

HistorySegment constant3(double x1, double x2, double x3, double delay = 0.2,
                         double dt = 0.1) {
  return HistorySegment::constant(delay, dt,
                                  (Vec(3) << x1, x2, x3).finished());
}

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

}  // namespace

TEST_SUITE_BEGIN("functionals");

TEST_CASE("class-K validation: zero at zero, monotone, unbounded smoke test") {
  CHECK_NOTHROW(ClassKFunction::identity());
  CHECK_NOTHROW(ClassKFunction::linear(2.5));
  CHECK_NOTHROW(ClassKFunction::power(0.5, 2.0));
  // not zero at zero
  CHECK_THROWS_AS(ClassKFunction("offset", [](double s) { return s + 1.0; },
                                 ClassKFunction::Kind::K),
                  ConfigError);
  // not strictly increasing
  CHECK_THROWS_AS(ClassKFunction("sin", [](double s) { return std::sin(s); },
                                 ClassKFunction::Kind::K),
                  ConfigError);
  // bounded function fails the K-infinity smoke test but passes as plain K
  auto saturating = [](double s) { return s / (1.0 + s); };
  CHECK_THROWS_AS(
      ClassKFunction("sat", saturating, ClassKFunction::Kind::KInfinity, 0.9),
      ConfigError);
  CHECK_NOTHROW(ClassKFunction("sat", saturating, ClassKFunction::Kind::K, 0.9));
}

TEST_CASE("tracking functional value: hand-integrated constant history") {
  // (16 - 22)^2 * (1 + 0.2): trapezoid exact on constant integrands
  const QuadraticTrackingFunctional tracking(0, 22.0, 3);
  const HistorySegment phi = constant3(16.0, 10.0, 150.0);
  CHECK(tracking.value(phi) == doctest::Approx(43.2).epsilon(1e-12));

  SUBCASE("vanishing tail reduces to the head term") {
    const PointwiseIntegralFunctional head_only(
        "head_only", [](const Vec& x) { return x[0] * x[0]; },
        [](const Vec& x) { return Vec(2.0 * x); },
        [](const Vec&) { return Mat(Mat::Constant(1, 1, 2.0)); },
        [](const Vec&) { return 0.0; });
    const HistorySegment h1 = HistorySegment::constant(0.2, 0.1, v1d(3.0));
    CHECK(head_only.value(h1) == doctest::Approx(9.0));
  }
  SUBCASE("vanishing head and tail give zero at the origin") {
    const QuadraticTrackingFunctional centered(0, 0.0, 3);
    CHECK(centered.value(constant3(0.0, 0.0, 0.0)) == 0.0);
  }
}

TEST_CASE("headway margin value and region classification") {
  CarFollowingParams params;
  const CarFollowingFunctionals fns = build_functionals(params);

  // h = 132 - 0.01 * 0.2 * 132^2 = 97.152 at (10, _, 150)
  const HistorySegment interior = constant3(10.0, 0.0, 150.0);
  CHECK(fns.scbkf.eval_h(interior) == doctest::Approx(97.152).epsilon(1e-12));
  CHECK(fns.scbkf.region(interior) == Region::Interior);

  // d = 0: h = -18 - 0.01 * 0.2 * 324 = -18.648
  const HistorySegment exterior = constant3(10.0, 0.0, 0.0);
  CHECK(fns.scbkf.eval_h(exterior) == doctest::Approx(-18.648).epsilon(1e-12));
  CHECK(fns.scbkf.region(exterior) == Region::Exterior);

  SUBCASE("ties classify as boundary") {
    // synthetic zero-margin functional: constant zero history
    const HeadwayMarginFunctional margin(0, 2, 1.8, 0.01, 3);
    Scbkf scbkf = fns.scbkf;
    const HistorySegment zero = constant3(0.0, 0.0, 0.0);
    CHECK(margin.value(zero) == 0.0);
    CHECK(scbkf.region(zero) == Region::Boundary);
  }
}

TEST_CASE("barrier: direct value, monotone limit, violation error") {
  CarFollowingParams params;
  const CarFollowingFunctionals fns = build_functionals(params);

  CHECK(LogReciprocalBarrier::value_at(1.0) == doctest::Approx(std::log(2.0)));

  // monotone decreasing toward zero from above as h grows
  double previous = LogReciprocalBarrier::value_at(1.0);
  for (double h : {10.0, 100.0, 1e4, 1e8}) {
    const double value = LogReciprocalBarrier::value_at(h);
    CHECK(value > 0.0);
    CHECK(value < previous);
    previous = value;
  }

  const HistorySegment boundary = constant3(0.0, 0.0, 0.0);
  CHECK_THROWS_AS(fns.scbkf.eval_barrier(boundary), SafeSetViolationError);
  const HistorySegment exterior = constant3(10.0, 0.0, 0.0);
  CHECK_THROWS_AS(fns.scbkf.eval_barrier(exterior), SafeSetViolationError);
}

TEST_CASE("drift decomposition: classical Lie derivative and trace term") {
  const auto quadratic = std::make_shared<QuadraticTrackingFunctional>(0, 0.0, 1);

  SUBCASE("rho = 0, v2 ignored: a reduces to grad . f plus the Dini term") {
    const SddeModel model = scalar_model(
        [](const HistorySegment& phi) { return 2.0 * phi.newest()[0]; }, 3.0, 0.0);
    const HistorySegment phi = HistorySegment::constant(0.2, 0.1, v1d(1.5));
    const DriftDecomposition dd = drift_decomposition(*quadratic, model, phi);
    // constant history: Dini term vanishes; grad = 2 * 1.5 = 3, f = 3
    CHECK(dd.a == doctest::Approx(3.0 * 3.0));
    CHECK(dd.b[0] == doctest::Approx(3.0 * 3.0));
  }

  SUBCASE("pure diffusion with V1 = x^2 gives a = sigma^2") {
    const double sigma = 0.8;
    const SddeModel model =
        scalar_model([](const HistorySegment&) { return 0.0; }, 0.0, sigma);
    const PointwiseIntegralFunctional square(
        "square", [](const Vec& x) { return x[0] * x[0]; },
        [](const Vec& x) { return Vec(2.0 * x); },
        [](const Vec&) { return Mat(Mat::Constant(1, 1, 2.0)); },
        [](const Vec&) { return 0.0; });
    const HistorySegment phi = HistorySegment::constant(0.2, 0.1, v1d(2.0));
    const DriftDecomposition dd = drift_decomposition(square, model, phi);
    CHECK(dd.a == doctest::Approx(sigma * sigma));
    CHECK(dd.b[0] == 0.0);
  }

  SUBCASE("constant history kills the integral-family Dini term") {
    const QuadraticTrackingFunctional tracking(0, 22.0, 3);
    CHECK(tracking.dini_v2(constant3(16.0, 10.0, 150.0)) == 0.0);
  }
}

TEST_CASE("analytic gradients and Hessians match central differences") {
  GaussianRng rng(2024);
  CarFollowingParams params;
  const CarFollowingFunctionals fns = build_functionals(params);
  const auto& tracking = *fns.sclkf.functional;
  const auto& margin_fn = *fns.scbkf.h;

  for (int rep = 0; rep < 50; ++rep) {
    const Vec x = (Vec(3) << 16.0 + 3.0 * rng.normal(),
                   10.0 + 3.0 * rng.normal(), 150.0 + 20.0 * rng.normal())
                      .finished();
    const HistorySegment phi =
        with_newest(constant3(16.0, 10.0, 150.0), x);

    for (const SeparableFunctional* fn : {&tracking, &margin_fn}) {
      const Vec analytic = fn->grad_v1(phi);
      const Vec numeric = fd_gradient(
          [fn](const HistorySegment& h) { return fn->v1(h); }, phi);
      for (Eigen::Index i = 0; i < 3; ++i) {
        CHECK(std::abs(analytic[i] - numeric[i]) <=
              std::max(1e-6, 1e-4 * std::abs(analytic[i])));
      }
      // Hessian columns vs finite differences of the gradient
      const Mat hess = fn->hess_v1(phi);
      for (Eigen::Index i = 0; i < 3; ++i) {
        Vec hi = x, lo = x;
        hi[i] += 1e-5;
        lo[i] -= 1e-5;
        const Vec column = (fn->grad_v1(with_newest(phi, hi)) -
                            fn->grad_v1(with_newest(phi, lo))) /
                           2e-5;
        for (Eigen::Index j = 0; j < 3; ++j) {
          CHECK(std::abs(hess(j, i) - column[j]) <=
                std::max(1e-6, 1e-4 * std::abs(hess(j, i))));
        }
      }
    }
  }
}

TEST_CASE("barrier wrap derivatives match scalar finite differences") {
  // d/dh ln(1 + 1/h) and its second derivative, checked directly on the
  // scalar wrap; the chain-rule assembly is exercised on a random buffer.
  auto wrap = [](double h) { return std::log1p(1.0 / h); };
  for (double h : {0.5, 2.0, 50.0, 300.0}) {
    const double first = -1.0 / (h * (1.0 + h));
    const double second = (2.0 * h + 1.0) / (h * h * (1.0 + h) * (1.0 + h));
    CHECK(scalar_fd(wrap, h, 1e-6 * h) == doctest::Approx(first).epsilon(1e-6));
    CHECK(scalar_fd([&](double s) { return -1.0 / (s * (1.0 + s)); }, h,
                    1e-6 * h) == doctest::Approx(second).epsilon(1e-6));
  }

  CarFollowingParams params;
  const CarFollowingFunctionals fns = build_functionals(params);
  const HistorySegment phi = constant3(16.0, 10.0, 150.0);
  const double h = fns.scbkf.eval_h(phi);
  const Vec expected = Vec(-1.0 / (h * (1.0 + h)) * fns.scbkf.h->grad_v1(phi));
  const Vec actual = fns.scbkf.barrier->grad_v1(phi);
  CHECK((expected - actual).norm() <= 1e-12 * (1.0 + expected.norm()));
}

TEST_CASE("Dini derivative matches the forward difference of the tail") {
  // advance the window under frozen dynamics and compare (v2' - v2) / dt
  auto dini_error = [](double dt) {
    const QuadraticTrackingFunctional tracking(0, 1.0, 1);
    const HistorySegment phi(1.0, dt, 1, [](double theta) {
      return v1d(std::sin(3.0 * theta) + 0.3 * theta);
    });
    const HistorySegment shifted = advance(phi, Vec(phi.newest()));
    const double forward =
        (tracking.v2(shifted) - tracking.v2(phi)) / dt;
    return std::abs(forward - tracking.dini_v2(phi));
  };
  const double coarse = dini_error(1e-2);
  const double fine = dini_error(1e-3);
  CHECK(fine < coarse / 4.0);  // first-order agreement
}

TEST_CASE("reciprocal sandwich holds on random interior buffers") {
  const CarFollowingScenario scenario = preset(PresetFamily::Fig1InitialStates, 4);
  const auto sampler = interior_buffer_sampler(scenario, 77);
  std::vector<HistorySegment> buffers;
  for (int i = 0; i < 1000; ++i) {
    buffers.push_back(sampler(static_cast<std::uint64_t>(i)));
  }
  CHECK(scenario.scbkf.spot_check(buffers).empty());

  SUBCASE("lyapunov sandwich spot check over the same buffers") {
    CHECK(scenario.sclkf.spot_check(buffers).empty());
  }
}

TEST_CASE("barrier blows up as h tends to zero") {
  // B at h = 10^-k dominates ln(1 + 10^k) and grows monotonically
  double previous = 0.0;
  for (int k = 1; k <= 6; ++k) {
    const double h = std::pow(10.0, -k);
    const double value = LogReciprocalBarrier::value_at(h);
    CHECK(value > previous);
    CHECK(value >= 0.999 * std::log1p(std::pow(10.0, k)));
    previous = value;
  }
}

TEST_SUITE_END();
