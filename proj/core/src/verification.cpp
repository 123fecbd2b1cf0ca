#include "sddectl/verification.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <thread>

namespace sddectl {

WilsonInterval wilson_interval(std::int64_t successes, std::int64_t trials, double z) {
  if (trials <= 0) {
    return WilsonInterval{0.0, 1.0};
  }
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  return WilsonInterval{std::max(0.0, center - half), std::min(1.0, center + half)};
}

namespace {

struct BatchResult {
  std::vector<double> times;
  std::vector<std::vector<double>> curve_sums;  // over completed paths
  std::int64_t completed = 0;
  std::vector<PathSummary> per_path;
};

// Fixed path-to-bucket keying keeps floating-point reductions identical for
// any thread count: bucket b accumulates paths b, b + K, b + 2K, ... in
// order, and buckets are merged in index order at the end.
constexpr int kBuckets = 32;

BatchResult run_batch(const SddeModel& model, const Controller& controller,
                      const std::function<Vec(double)>& init, double delay,
                      double horizon, double dt, std::int64_t paths,
                      std::uint64_t seed_base, const BatchOptions& options,
                      const std::function<double(const HistorySegment&)>& min_h_eval) {
  if (paths < 1) {
    throw ConfigError("monte carlo: paths must be >= 1");
  }
  const auto steps = static_cast<std::int64_t>(std::llround(horizon / dt));
  const auto n_times = static_cast<std::size_t>(steps) + 1;
  const std::size_t n_curves = options.curves.size();

  BatchResult result;
  result.times.resize(n_times);
  for (std::size_t i = 0; i < n_times; ++i) {
    result.times[i] = static_cast<double>(i) * dt;
  }
  result.per_path.resize(static_cast<std::size_t>(paths));

  struct BucketAccum {
    std::vector<std::vector<double>> curve_sums;
    std::int64_t completed = 0;
  };
  std::vector<BucketAccum> buckets(kBuckets);
  for (auto& bucket : buckets) {
    bucket.curve_sums.assign(n_curves, std::vector<double>(n_times, 0.0));
  }

  const HistorySegment init_buffer(delay, dt, model.state_dim, init);

  auto run_one = [&](std::int64_t path_index, BucketAccum& bucket,
                     std::vector<std::vector<double>>& scratch) {
    for (auto& row : scratch) {
      row.assign(n_times, std::numeric_limits<double>::quiet_NaN());
    }
    PathSummary& summary = result.per_path[static_cast<std::size_t>(path_index)];
    summary = PathSummary{};

    const std::uint64_t seed = seed_base + static_cast<std::uint64_t>(path_index);
    auto failure = run_path(
        model, controller, init_buffer, horizon, dt, seed,
        [&](std::int64_t step, const HistorySegment& phi, const Vec&) {
          const auto s = static_cast<std::size_t>(step);
          for (std::size_t c = 0; c < n_curves; ++c) {
            try {
              scratch[c][s] = options.curves[c].eval(phi);
            } catch (const Error&) {
              // outside the functional's domain; keep NaN
            }
          }
          if (min_h_eval) {
            summary.min_h = std::min(summary.min_h, min_h_eval(phi));
          }
          if (options.pointwise_margin) {
            summary.min_margin = std::min(summary.min_margin,
                                          options.pointwise_margin(Vec(phi.newest())));
          }
          if (step == steps && options.terminal_error) {
            summary.terminal_error = options.terminal_error(Vec(phi.newest()));
          }
        });

    if (failure.has_value()) {
      summary.completed = false;
      summary.failure_step = failure->step;
      summary.failure_category = failure->category;
    } else {
      summary.completed = true;
      bucket.completed += 1;
      for (std::size_t c = 0; c < n_curves; ++c) {
        for (std::size_t s = 0; s < n_times; ++s) {
          bucket.curve_sums[c][s] += scratch[c][s];
        }
      }
    }
  };

  int threads = options.threads > 0
                    ? options.threads
                    : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min({threads, kBuckets, static_cast<int>(paths)});

  std::atomic<int> next_bucket{0};
  auto worker = [&] {
    std::vector<std::vector<double>> scratch(n_curves);
    while (true) {
      const int b = next_bucket.fetch_add(1);
      if (b >= kBuckets) {
        break;
      }
      for (std::int64_t p = b; p < paths; p += kBuckets) {
        run_one(p, buckets[static_cast<std::size_t>(b)], scratch);
      }
    }
  };

  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back(worker);
    }
    for (auto& t : pool) {
      t.join();
    }
  }

  result.curve_sums.assign(n_curves, std::vector<double>(n_times, 0.0));
  for (const auto& bucket : buckets) {
    result.completed += bucket.completed;
    for (std::size_t c = 0; c < n_curves; ++c) {
      for (std::size_t s = 0; s < n_times; ++s) {
        result.curve_sums[c][s] += bucket.curve_sums[c][s];
      }
    }
  }
  return result;
}

std::vector<std::pair<std::string, std::int64_t>> tally_failures(
    const std::vector<PathSummary>& per_path) {
  std::map<std::string, std::int64_t> counts;
  for (const PathSummary& p : per_path) {
    if (!p.completed) {
      counts[p.failure_category] += 1;
    }
  }
  return {counts.begin(), counts.end()};
}

}  // namespace

MonteCarloReport estimate_safety(const SddeModel& model, const Controller& controller,
                                 const Scbkf& scbkf,
                                 const std::function<Vec(double)>& init, double delay,
                                 double horizon, double dt, std::int64_t paths,
                                 std::uint64_t seed_base, const BatchOptions& options) {
  const Scbkf* scbkf_ptr = &scbkf;
  BatchResult result = run_batch(
      model, controller, init, delay, horizon, dt, paths, seed_base, options,
      [scbkf_ptr](const HistorySegment& phi) { return scbkf_ptr->eval_h(phi); });

  MonteCarloReport report;
  report.paths = paths;
  report.completed_paths = result.completed;
  report.failed_paths = paths - result.completed;
  report.horizon = horizon;
  report.dt = dt;
  report.seed_base = seed_base;
  report.times = std::move(result.times);
  report.per_path = std::move(result.per_path);

  double terminal_sum = 0.0;
  std::int64_t terminal_count = 0;
  for (const PathSummary& p : report.per_path) {
    if (!p.completed) {
      continue;  // failed paths count as unsafe
    }
    if (p.min_h >= 0.0) {
      report.safe_paths += 1;
    }
    if (options.pointwise_margin && p.min_margin >= 0.0) {
      report.margin_safe_paths += 1;
    }
    if (options.terminal_error && std::isfinite(p.terminal_error)) {
      terminal_sum += p.terminal_error;
      terminal_count += 1;
    }
  }
  report.safety_probability =
      static_cast<double>(report.safe_paths) / static_cast<double>(report.paths);
  report.safety_ci = wilson_interval(report.safe_paths, report.paths);
  if (options.pointwise_margin) {
    report.margin_safety_probability = static_cast<double>(report.margin_safe_paths) /
                                       static_cast<double>(report.paths);
    report.margin_ci = wilson_interval(report.margin_safe_paths, report.paths);
  }
  if (terminal_count > 0) {
    report.mean_terminal_error = terminal_sum / static_cast<double>(terminal_count);
  }

  const std::size_t n_curves = options.curves.size();
  report.curve_names.reserve(n_curves);
  report.mean_curves.resize(n_curves);
  for (std::size_t c = 0; c < n_curves; ++c) {
    report.curve_names.push_back(options.curves[c].name);
    report.mean_curves[c].resize(report.times.size());
    for (std::size_t s = 0; s < report.times.size(); ++s) {
      report.mean_curves[c][s] =
          report.completed_paths > 0
              ? result.curve_sums[c][s] / static_cast<double>(report.completed_paths)
              : std::numeric_limits<double>::quiet_NaN();
    }
  }
  report.failure_reasons = tally_failures(report.per_path);
  return report;
}

StabilityReport estimate_stability(const SddeModel& model, const Controller& controller,
                                   const Sclkf& sclkf,
                                   const std::function<Vec(double)>& init,
                                   double delay, double horizon, double dt,
                                   std::int64_t paths, std::uint64_t seed_base,
                                   const StabilityOptions& options) {
  BatchOptions batch = options.batch;
  const SeparableFunctional* lyapunov = sclkf.functional.get();
  batch.curves.insert(
      batch.curves.begin(),
      {"V", [lyapunov](const HistorySegment& phi) { return lyapunov->value(phi); }});
  BatchResult result = run_batch(model, controller, init, delay, horizon, dt, paths,
                                 seed_base, batch, nullptr);

  StabilityReport report;
  report.paths = paths;
  report.completed_paths = result.completed;
  report.failed_paths = paths - result.completed;
  report.horizon = horizon;
  report.dt = dt;
  report.seed_base = seed_base;
  report.times = std::move(result.times);

  const std::size_t n_times = report.times.size();
  report.mean_lyapunov.resize(n_times);
  for (std::size_t s = 0; s < n_times; ++s) {
    report.mean_lyapunov[s] =
        result.completed > 0
            ? result.curve_sums[0][s] / static_cast<double>(result.completed)
            : std::numeric_limits<double>::quiet_NaN();
  }

  double terminal_sum = 0.0;
  std::int64_t terminal_count = 0;
  for (const PathSummary& p : result.per_path) {
    if (p.completed && std::isfinite(p.terminal_error)) {
      terminal_sum += p.terminal_error;
      terminal_count += 1;
    }
  }
  if (terminal_count > 0) {
    report.mean_terminal_error = terminal_sum / static_cast<double>(terminal_count);
  }

  // Trailing moving average over ~window seconds, then monotonicity after
  // the burn-in. The slack absorbs round-off, not statistical noise; the
  // reported max_uptick lets callers judge marginal cases.
  const double burn_in = options.burn_in >= 0.0 ? options.burn_in : horizon / 10.0;
  const auto window = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(options.smoothing_window / dt)));
  std::vector<double> smoothed(n_times, 0.0);
  double running = 0.0;
  for (std::size_t s = 0; s < n_times; ++s) {
    running += report.mean_lyapunov[s];
    if (s >= window) {
      running -= report.mean_lyapunov[s - window];
    }
    smoothed[s] = running / static_cast<double>(std::min(s + 1, window));
  }
  const auto burn_index = static_cast<std::size_t>(std::llround(burn_in / dt));
  bool decreasing = result.completed > 0;
  double max_uptick = 0.0;
  for (std::size_t s = std::max<std::size_t>(burn_index, 1); s < n_times; ++s) {
    const double uptick = smoothed[s] - smoothed[s - 1];
    max_uptick = std::max(max_uptick, uptick);
    if (uptick > 1e-10 * (1.0 + std::abs(smoothed[s]))) {
      decreasing = false;
    }
  }
  report.eventually_decreasing = decreasing;
  report.max_uptick = max_uptick;
  return report;
}

namespace {

struct CheckAccumulator {
  IdentityCheckResult result;

  explicit CheckAccumulator(std::string name) { result.name = std::move(name); }

  void record(double lhs, double rhs, double tolerance_scale) {
    result.evaluated += 1;
    const double err = std::abs(lhs - rhs);
    result.worst_abs = std::max(result.worst_abs, err);
    if (tolerance_scale > 0.0) {
      result.worst_rel = std::max(result.worst_rel, err / tolerance_scale);
    }
    if (err > tolerance_scale) {
      result.violations += 1;
      result.pass = false;
    }
  }

  void skip() { result.skipped += 1; }
};

}  // namespace

IdentityReport identity_suite(const IdentityBundle& bundle,
                              const std::function<HistorySegment(std::uint64_t)>& sampler,
                              std::int64_t count) {
  CheckAccumulator decrement("sontag_decrement");
  CheckAccumulator hj1("h_j1_h");
  CheckAccumulator hj12("h_j1_j2_h");
  CheckAccumulator drift("sliding_drift");

  const SlidingSurface& surface = bundle.sliding.surface;

  for (std::int64_t i = 0; i < count; ++i) {
    const HistorySegment phi = sampler(static_cast<std::uint64_t>(i));

    // Sontag decrement whenever the nonzero branch of kappa is taken.
    {
      const DriftDecomposition dd =
          drift_decomposition(*bundle.sclkf.functional, bundle.model, phi);
      const double a = dd.a + bundle.sclkf.gamma1(bundle.sclkf.functional->value(phi));
      const double b2 = dd.b.squaredNorm();
      if (b2 > bundle.sontag_zero_threshold) {
        const Vec u = sontag_kappa(bundle.sontag_lambda, a, dd.b,
                                   bundle.sontag_zero_threshold);
        const double lhs = a + dd.b.dot(u);
        const double rhs = -std::sqrt(a * a + bundle.sontag_lambda * b2 * b2);
        decrement.record(lhs, rhs, 1e-9 * std::max(1.0, std::abs(rhs)));
      } else {
        decrement.skip();
      }
    }

    // Sliding algebra and the closed-loop drift identity.
    try {
      const SlidingTerms terms = sliding_terms(surface, bundle.model, phi);
      const AuxJ aux =
          aux_j(bundle.model, phi, terms.G, bundle.sliding.transversality_tol);
      const double h2 = terms.H.squaredNorm();

      const double hj1h = terms.H.dot(Vec(aux.J1 * terms.H));
      hj1.record(hj1h, 0.0, 1e-10 * (1.0 + h2 * aux.J1.norm()));

      const Mat j_sum = aux.J1 + aux.J2;
      const double hj12h = terms.H.dot(Vec(j_sum * terms.H));
      hj12.record(hj12h, terms.F, 1e-10 * (1.0 + h2 * j_sum.norm()));

      const Vec u = sliding_control(bundle.sliding, phi);
      const double lhs = terms.F + terms.G.dot(u) + terms.L;
      const double rhs =
          -switching_gain(bundle.sliding.gain, bundle.sliding.smoothing, terms.U);
      drift.record(lhs, rhs, 1e-9 * std::max(1.0, std::abs(rhs)));
    } catch (const TransversalityError&) {
      hj1.skip();
      hj12.skip();
      drift.skip();
    } catch (const SafeSetViolationError&) {
      hj1.skip();
      hj12.skip();
      drift.skip();
    }
  }

  IdentityReport report;
  report.buffers = count;
  report.checks = {decrement.result, hj1.result, hj12.result, drift.result};
  for (const auto& check : report.checks) {
    report.all_pass = report.all_pass && check.pass;
  }
  return report;
}

FeasibilityReport feasibility_spot_check(
    const SddeModel& model, const Sclkf& sclkf, const Scbkf& scbkf,
    const std::function<HistorySegment(std::uint64_t)>& sampler, std::int64_t count,
    double input_row_threshold) {
  FeasibilityReport report;
  report.buffers = count;
  for (std::int64_t i = 0; i < count; ++i) {
    const HistorySegment phi = sampler(static_cast<std::uint64_t>(i));

    const DriftDecomposition dv =
        drift_decomposition(*sclkf.functional, model, phi);
    if (dv.b.squaredNorm() > input_row_threshold) {
      report.sclkf_unconstrained += 1;
    } else {
      const double margin = -(dv.a + sclkf.gamma1(sclkf.functional->value(phi)));
      report.sclkf_worst_margin = std::min(report.sclkf_worst_margin, margin);
      if (!(margin > 0.0)) {
        report.sclkf_violations += 1;
      }
    }

    const double h = scbkf.eval_h(phi);
    if (h > 0.0) {
      const DriftDecomposition db = drift_decomposition(*scbkf.barrier, model, phi);
      if (db.b.squaredNorm() > input_row_threshold) {
        report.scbkf_unconstrained += 1;
      } else {
        const double margin = scbkf.gamma2(h) - db.a;
        report.scbkf_worst_margin = std::min(report.scbkf_worst_margin, margin);
        if (!(margin > 0.0)) {
          report.scbkf_violations += 1;
        }
      }
    }
  }
  return report;
}

BoundaryReport boundary_check(const SlidingSurface& surface, const Scbkf& scbkf,
                              const HistorySegment& xi, std::int64_t samples,
                              std::uint64_t seed,
                              const std::optional<Vec>& perturbation_scales) {
  if (!(scbkf.eval_h(xi) > 0.0)) {
    throw SamplingError("boundary_check: reference buffer is not interior");
  }
  BoundaryReport report;
  report.samples = samples;
  const double u_ref = surface.value(xi);
  report.reference_u_squared = u_ref * u_ref;
  if (samples == 0) {
    return report;  // vacuous pass
  }

  const int n = xi.state_dim();
  Vec scales;
  if (perturbation_scales.has_value()) {
    scales = *perturbation_scales;
  } else {
    scales = Vec(0.25 * (Vec::Ones(n) + Vec(xi.newest()).cwiseAbs()));
  }

  GaussianRng rng(seed);
  auto random_affine_buffer = [&](const HistorySegment& base, double magnitude) {
    Vec offset(n), slope(n);
    for (int c = 0; c < n; ++c) {
      offset[c] = magnitude * scales[c] * rng.normal();
      slope[c] = magnitude * scales[c] * rng.normal();
    }
    return HistorySegment(
        base.delay(), base.grid_step(), n,
        [&](double theta) {
          const auto idx = static_cast<Eigen::Index>(
              std::llround((theta + base.delay()) / base.grid_step()));
          return Vec(base.sample_at(idx) + offset + (theta / base.delay()) * slope);
        },
        base.time());
  };

  for (std::int64_t i = 0; i < samples; ++i) {
    HistorySegment interior = xi;
    for (int attempt = 0; attempt < 100; ++attempt) {
      HistorySegment candidate = random_affine_buffer(xi, 0.5);
      if (scbkf.eval_h(candidate) > 0.0) {
        interior = std::move(candidate);
        break;
      }
    }

    // Exterior endpoint along a random ray, doubling the magnitude.
    bool found = false;
    HistorySegment exterior = interior;
    for (int ray = 0; ray < 100 && !found; ++ray) {
      HistorySegment direction = random_affine_buffer(interior, 1.0);
      for (int doubling = 0; doubling < 40; ++doubling) {
        HistorySegment candidate =
            lerp(interior, direction, std::ldexp(1.0, doubling));
        if (!(scbkf.eval_h(candidate) > 0.0)) {
          exterior = std::move(candidate);
          found = true;
          break;
        }
      }
    }
    if (!found) {
      throw SamplingError("boundary_check: no exterior point found along 100 rays");
    }

    // Bisect toward h = 0 keeping the interior endpoint evaluable.
    HistorySegment lo = interior;  // h > 0
    HistorySegment hi = exterior;  // h <= 0
    for (int iter = 0; iter < 200 && scbkf.eval_h(lo) > 1e-10; ++iter) {
      HistorySegment mid = lerp(lo, hi, 0.5);
      if (scbkf.eval_h(mid) > 0.0) {
        lo = std::move(mid);
      } else {
        hi = std::move(mid);
      }
    }

    const double u_boundary = surface.value(lo);
    const double ratio = report.reference_u_squared > 0.0
                             ? (u_boundary * u_boundary) / report.reference_u_squared
                             : std::numeric_limits<double>::infinity();
    report.min_ratio = std::min(report.min_ratio, ratio);
  }
  report.pass = report.min_ratio >= 1.0;
  return report;
}

}  // namespace sddectl
