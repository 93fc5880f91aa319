// Copyright 2026 The APE Harness Authors
// SPDX-License-Identifier: Apache-2.0

#include "ape/tap_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

#include "ape/errors.hpp"

namespace ape::tap {

double logistic_rate(double s, const TapParams& params) {
  if (!(s >= 0.0 && s <= params.s_max)) {
    throw DomainError(fmt::format("performance {} outside [0, {}]", s, params.s_max));
  }
  return params.k * s * (1.0 - s / params.s_max);
}

double threshold(double s_prev, const TapParams& params) {
  return logistic_rate(s_prev, params) * params.dt;
}

double logistic_step(double s, const TapParams& params, double efficacy, double noise) {
  const double next = s + logistic_rate(s, params) * efficacy * params.dt + noise;
  return std::clamp(next, 0.0, params.s_max);
}

NoiseStream::NoiseStream(double sigma, std::uint64_t seed)
    : sigma_(sigma), engine_(seed), normal_(0.0, sigma > 0.0 ? sigma : 1.0) {
  if (!(sigma >= 0.0)) throw DomainError(fmt::format("noise sigma must be >= 0 (got {})", sigma));
}

double NoiseStream::draw() {
  if (sigma_ == 0.0) return 0.0;
  return normal_(engine_);
}

Trajectory simulate_trajectory(double s0, const TapParams& params, int steps, double noise_sigma,
                               std::uint64_t seed) {
  params.validate();
  if (!(s0 > 0.0 && s0 < params.s_max)) {
    throw DomainError(fmt::format("initial performance {} must lie strictly inside (0, {})", s0, params.s_max));
  }
  if (steps < 1) throw DomainError(fmt::format("steps must be >= 1 (got {})", steps));

  NoiseStream noise(noise_sigma, seed);
  Trajectory out{{}, params, noise_sigma};
  out.values.reserve(static_cast<std::size_t>(steps) + 1);
  out.values.push_back(s0);
  double s = s0;
  for (int t = 0; t < steps; ++t) {
    s = logistic_step(s, params, 1.0, noise.draw());
    out.values.push_back(s);
  }
  return out;
}

double fit_k(std::span<const double> values, double s_max, double dt) {
  if (values.size() < 3) throw DomainError(fmt::format("fit_k needs >= 3 values (got {})", values.size()));
  for (double v : values) {
    if (!(v >= 0.0 && v <= s_max)) throw DomainError(fmt::format("fit_k value {} outside [0, {}]", v, s_max));
  }
  double num = 0.0;
  double den = 0.0;
  for (std::size_t t = 0; t + 1 < values.size(); ++t) {
    const double g = values[t] * (1.0 - values[t] / s_max) * dt;
    num += (values[t + 1] - values[t]) * g;
    den += g * g;
  }
  if (den == 0.0) throw DomainError("fit_k series is degenerate (growth term vanishes everywhere)");
  return num / den;
}

}  // namespace ape::tap
