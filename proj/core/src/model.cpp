#include "sddectl/model.hpp"

#include <cmath>

namespace sddectl {

Vec SddeModel::f(const HistorySegment& phi) const {
  Vec value = drift(phi);
  if (value.size() != state_dim) {
    throw DomainError("model: drift returned dimension " +
                      std::to_string(value.size()) + ", expected " +
                      std::to_string(state_dim));
  }
  return value;
}

Mat SddeModel::g(const HistorySegment& phi) const {
  Mat value = input_map(phi);
  if (value.rows() != state_dim || value.cols() != input_dim) {
    throw DomainError("model: input map returned shape " +
                      std::to_string(value.rows()) + "x" +
                      std::to_string(value.cols()) + ", expected " +
                      std::to_string(state_dim) + "x" + std::to_string(input_dim));
  }
  return value;
}

Mat SddeModel::rho(const HistorySegment& phi) const {
  Mat value = diffusion(phi);
  if (value.rows() != state_dim || value.cols() != noise_dim) {
    throw DomainError("model: diffusion returned shape " +
                      std::to_string(value.rows()) + "x" +
                      std::to_string(value.cols()) + ", expected " +
                      std::to_string(state_dim) + "x" + std::to_string(noise_dim));
  }
  return value;
}

void SddeModel::check_zero_equilibrium(double delay, double grid_step) const {
  const HistorySegment origin = HistorySegment::zero(delay, grid_step, state_dim);
  constexpr double kTol = 1e-12;
  if (f(origin).lpNorm<Eigen::Infinity>() > kTol ||
      g(origin).lpNorm<Eigen::Infinity>() > kTol ||
      rho(origin).lpNorm<Eigen::Infinity>() > kTol) {
    throw DomainError("model: declared zero equilibrium but f, g or rho does "
                      "not vanish on the zero history");
  }
}

Vec em_step(const SddeModel& model, const HistorySegment& hist, const Vec& u,
            double dt, const Vec& dW) {
  if (std::abs(dt - hist.grid_step()) > 1e-12 * hist.grid_step()) {
    throw DomainError("em_step: dt must equal the history grid step");
  }
  if (u.size() != model.input_dim) {
    throw DomainError("em_step: input dimension " + std::to_string(u.size()) +
                      ", expected " + std::to_string(model.input_dim));
  }
  if (dW.size() != model.noise_dim) {
    throw DomainError("em_step: noise dimension " + std::to_string(dW.size()) +
                      ", expected " + std::to_string(model.noise_dim));
  }
  Vec next = hist.newest() + (model.f(hist) + model.g(hist) * u) * dt +
             model.rho(hist) * dW;
  if (!next.allFinite()) {
    throw NumericError("em_step: non-finite state");
  }
  return next;
}

}  // namespace sddectl
