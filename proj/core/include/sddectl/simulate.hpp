#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sddectl/history.hpp"
#include "sddectl/model.hpp"
#include "sddectl/rng.hpp"
#include "sddectl/types.hpp"

namespace sddectl {

/// State feedback as a functional of the history segment.
using Controller = std::function<Vec(const HistorySegment&)>;

/// Named scalar functional logged along a trace (V, B, h, U, ...).
struct LogSpec {
  std::string name;
  std::function<double(const HistorySegment&)> eval;
};

/// Paths whose Euclidean norm exceeds this are aborted and recorded as
/// failed instead of poisoning batch statistics.
inline constexpr double kBlowupNorm = 1e9;

/// Why a path stopped early.
struct PathFailure {
  std::int64_t step = 0;
  std::string category;  // error category ("safe_set", "blowup", ...)
  std::string message;
};

/// Closed-loop sample path on the simulation grid. All series share the
/// same length; when `failure` is set the series end at the failing step.
struct SimulationTrace {
  std::vector<double> times;
  std::vector<Vec> states;  // x(t_i)
  std::vector<Vec> inputs;  // u evaluated on the buffer at t_i
  std::vector<std::string> log_names;
  std::vector<std::vector<double>> log_values;  // [log][step]
  std::uint64_t seed = 0;
  std::optional<PathFailure> failure;

  bool completed() const { return !failure.has_value(); }
};

/// Drives one closed-loop path with Euler-Maruyama steps and zero-order-hold
/// control, invoking `observer(step, buffer, u)` at every grid time
/// (including the final one, where no step follows). Controller errors,
/// non-finite states and the blow-up guard abort the path; the failure is
/// returned rather than thrown so batches can account for it.
///
/// The number of Gaussian draws per step is fixed, so a path is a pure
/// function of (model, controller, initial buffer, horizon, dt, seed).
template <typename Observer>
std::optional<PathFailure> run_path(const SddeModel& model,
                                    const Controller& controller,
                                    HistorySegment buffer, double horizon,
                                    double dt, std::uint64_t seed,
                                    Observer&& observer) {
  const auto steps = static_cast<std::int64_t>(std::llround(horizon / dt));
  if (!(horizon > 0.0) || steps < 1) {
    throw ConfigError("simulate: horizon must cover at least one step");
  }
  GaussianRng rng(seed);
  for (std::int64_t i = 0; i <= steps; ++i) {
    Vec u;
    try {
      u = controller(buffer);
      if (u.size() != model.input_dim || !u.allFinite()) {
        throw NumericError("controller returned an invalid input vector");
      }
    } catch (const Error& e) {
      return PathFailure{i, e.category(), e.what()};
    }
    observer(i, buffer, u);
    if (i == steps) {
      break;
    }
    const Vec dW = brownian_increment(rng, dt, model.noise_dim);
    Vec next;
    try {
      next = em_step(model, buffer, u, dt, dW);
    } catch (const Error& e) {
      return PathFailure{i + 1, e.category(), e.what()};
    }
    if (next.norm() > kBlowupNorm) {
      return PathFailure{i + 1, "blowup",
                         "state norm exceeded " + std::to_string(kBlowupNorm)};
    }
    buffer.push(next);
  }
  return std::nullopt;
}

/// Full-trace convenience wrapper around `run_path`. The initial buffer is
/// built by sampling `init` on the [-delay, 0] grid; log functionals that
/// throw at a step record NaN for that step.
SimulationTrace simulate(const SddeModel& model, const Controller& controller,
                         const std::function<Vec(double)>& init, double delay,
                         double horizon, double dt, std::uint64_t seed,
                         const std::vector<LogSpec>& logs = {});

}  // namespace sddectl
