#include "sddectl/simulate.hpp"

#include <cmath>
#include <limits>

namespace sddectl {

SimulationTrace simulate(const SddeModel& model, const Controller& controller,
                         const std::function<Vec(double)>& init, double delay,
                         double horizon, double dt, std::uint64_t seed,
                         const std::vector<LogSpec>& logs) {
  HistorySegment buffer(delay, dt, model.state_dim, init);

  SimulationTrace trace;
  trace.seed = seed;
  const auto steps = static_cast<std::int64_t>(std::llround(horizon / dt));
  trace.times.reserve(static_cast<std::size_t>(steps) + 1);
  trace.states.reserve(static_cast<std::size_t>(steps) + 1);
  trace.inputs.reserve(static_cast<std::size_t>(steps) + 1);
  trace.log_names.reserve(logs.size());
  trace.log_values.resize(logs.size());
  for (const LogSpec& log : logs) {
    trace.log_names.push_back(log.name);
  }

  trace.failure = run_path(
      model, controller, std::move(buffer), horizon, dt, seed,
      [&](std::int64_t step, const HistorySegment& phi, const Vec& u) {
        trace.times.push_back(static_cast<double>(step) * dt);
        trace.states.emplace_back(phi.newest());
        trace.inputs.push_back(u);
        for (std::size_t k = 0; k < logs.size(); ++k) {
          double value = std::numeric_limits<double>::quiet_NaN();
          try {
            value = logs[k].eval(phi);
          } catch (const Error&) {
            // outside the functional's domain (e.g. barrier past the
            // boundary); the trace keeps NaN for this step
          }
          trace.log_values[k].push_back(value);
        }
      });
  return trace;
}

}  // namespace sddectl
