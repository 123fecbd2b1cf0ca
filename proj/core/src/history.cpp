#include "sddectl/history.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sddectl {

namespace {

void require_finite(const Vec& v, const char* what) {
  if (!v.allFinite()) {
    throw DomainError(std::string(what) + ": non-finite entries");
  }
}

}  // namespace

std::int64_t checked_grid_ratio(double delay, double grid_step) {
  if (!(delay > 0.0) || !std::isfinite(delay)) {
    throw ConfigError("history: delay must be positive and finite");
  }
  if (!(grid_step > 0.0) || !std::isfinite(grid_step)) {
    throw ConfigError("history: grid_step must be positive and finite");
  }
  const double ratio = delay / grid_step;
  const auto steps = static_cast<std::int64_t>(std::llround(ratio));
  if (steps < 1 || std::abs(ratio - static_cast<double>(steps)) > 1e-9 * ratio) {
    throw ConfigError("history: delay (" + std::to_string(delay) +
                      ") is not an integer multiple of grid_step (" +
                      std::to_string(grid_step) + ")");
  }
  return steps;
}

HistorySegment::HistorySegment(double delay, double grid_step, int state_dim,
                               const std::function<Vec(double)>& init,
                               double start_time) {
  const std::int64_t steps = checked_grid_ratio(delay, grid_step);
  if (state_dim < 1 || state_dim > kMaxDim) {
    throw ConfigError("history: state_dim must be in [1, " +
                      std::to_string(kMaxDim) + "]");
  }
  delay_ = delay;
  grid_step_ = grid_step;
  state_dim_ = state_dim;
  count_ = static_cast<std::size_t>(steps) + 1;
  head_ = 0;
  time_ = start_time;
  storage_.resize(count_ * static_cast<std::size_t>(state_dim_));

  for (std::size_t i = 0; i < count_; ++i) {
    // theta = 0 evaluated exactly at the newest slot, -delay at the oldest.
    const double theta =
        (i + 1 == count_) ? 0.0 : -delay + static_cast<double>(i) * grid_step;
    const Vec value = init(theta);
    if (value.size() != state_dim_) {
      throw DomainError("history: initializer returned dimension " +
                        std::to_string(value.size()) + ", expected " +
                        std::to_string(state_dim_));
    }
    require_finite(value, "history initializer");
    std::copy(value.data(), value.data() + state_dim_,
              storage_.begin() + static_cast<std::ptrdiff_t>(i * state_dim_));
  }
}

HistorySegment HistorySegment::constant(double delay, double grid_step,
                                        const Vec& value, double start_time) {
  return HistorySegment(delay, grid_step, static_cast<int>(value.size()),
                        [&value](double) { return value; }, start_time);
}

HistorySegment HistorySegment::zero(double delay, double grid_step, int state_dim) {
  return constant(delay, grid_step, Vec::Zero(state_dim));
}

const double* HistorySegment::data_at(std::size_t logical_index) const {
  const std::size_t slot = (head_ + logical_index) % count_;
  return storage_.data() + slot * static_cast<std::size_t>(state_dim_);
}

void HistorySegment::check_index(Eigen::Index index) const {
  if (index < 0 || index >= sample_count()) {
    throw RangeError("history: sample index " + std::to_string(index) +
                     " outside [0, " + std::to_string(sample_count() - 1) + "]");
  }
}

SampleRef HistorySegment::sample_at(Eigen::Index index) const {
  check_index(index);
  return SampleRef(data_at(static_cast<std::size_t>(index)), state_dim_);
}

Vec HistorySegment::sample(double theta) const {
  const double tol = 1e-12 * delay_;
  if (theta < -delay_ - tol || theta > tol) {
    throw RangeError("history: theta " + std::to_string(theta) +
                     " outside [-" + std::to_string(delay_) + ", 0]");
  }
  const double clamped = std::clamp(theta, -delay_, 0.0);
  double position = (clamped + delay_) / grid_step_;
  auto lower = static_cast<Eigen::Index>(std::floor(position));
  double frac = position - static_cast<double>(lower);
  // Snap to the grid so lookups at grid times never drift by interpolation.
  constexpr double kSnap = 1e-9;
  if (frac > 1.0 - kSnap) {
    ++lower;
    frac = 0.0;
  } else if (frac < kSnap) {
    frac = 0.0;
  }
  lower = std::min(lower, sample_count() - 1);
  if (frac == 0.0) {
    return Vec(sample_at(lower));
  }
  const SampleRef a = sample_at(lower);
  const SampleRef b = sample_at(lower + 1);
  return Vec(a + frac * (b - a));
}

double HistorySegment::sup_norm() const {
  double best = 0.0;
  for (Eigen::Index i = 0; i < sample_count(); ++i) {
    best = std::max(best, sample_at(i).norm());
  }
  return best;
}

void HistorySegment::push(const Vec& state) {
  if (state.size() != state_dim_) {
    throw DomainError("history: push dimension " + std::to_string(state.size()) +
                      ", expected " + std::to_string(state_dim_));
  }
  require_finite(state, "history push");
  // Overwrite the oldest slot and rotate; O(1), no allocation.
  double* slot = storage_.data() + head_ * static_cast<std::size_t>(state_dim_);
  std::copy(state.data(), state.data() + state_dim_, slot);
  head_ = (head_ + 1) % count_;
  time_ += grid_step_;
}

HistorySegment advance(HistorySegment hist, const Vec& state) {
  hist.push(state);
  return hist;
}

namespace {

void require_same_grid(const HistorySegment& a, const HistorySegment& b) {
  if (a.state_dim() != b.state_dim() || a.sample_count() != b.sample_count() ||
      a.delay() != b.delay() || a.grid_step() != b.grid_step()) {
    throw DomainError("history: buffers do not share a grid");
  }
}

Eigen::Index grid_index(const HistorySegment& h, double theta) {
  return static_cast<Eigen::Index>(
      std::llround((theta + h.delay()) / h.grid_step()));
}

}  // namespace

HistorySegment lerp(const HistorySegment& a, const HistorySegment& b, double t) {
  require_same_grid(a, b);
  return HistorySegment(
      a.delay(), a.grid_step(), a.state_dim(),
      [&](double theta) {
        const Eigen::Index i = grid_index(a, theta);
        return Vec(a.sample_at(i) + t * (b.sample_at(i) - a.sample_at(i)));
      },
      a.time());
}

HistorySegment add(const HistorySegment& a, const HistorySegment& b) {
  require_same_grid(a, b);
  return HistorySegment(
      a.delay(), a.grid_step(), a.state_dim(),
      [&](double theta) {
        const Eigen::Index i = grid_index(a, theta);
        return Vec(a.sample_at(i) + b.sample_at(i));
      },
      a.time());
}

HistorySegment scale(const HistorySegment& a, double factor) {
  return HistorySegment(
      a.delay(), a.grid_step(), a.state_dim(),
      [&](double theta) { return Vec(factor * a.sample_at(grid_index(a, theta))); },
      a.time());
}

}  // namespace sddectl
