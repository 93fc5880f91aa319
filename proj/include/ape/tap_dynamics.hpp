// Copyright 2026 The APE Harness Authors
// SPDX-License-Identifier: Apache-2.0
//
// Logistic growth model of performance under small perturbations:
//   dS/dt = k * S * (1 - S / s_max)
// discretized with an explicit Euler step of size dt.

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "ape/core_types.hpp"

namespace ape::tap {

/// k * s * (1 - s / s_max). Throws DomainError outside [0, s_max].
double logistic_rate(double s, const TapParams& params);

/// Acceptance threshold for the next step: logistic_rate(s_prev) * dt.
double threshold(double s_prev, const TapParams& params);

/// One clamped Euler step with the drift scaled by `efficacy` and an
/// additive noise term. Shared by the simulator and the scalar surrogate.
double logistic_step(double s, const TapParams& params, double efficacy, double noise);

/// Seeded Normal(0, sigma^2) source; sigma == 0 yields exact zeros
/// without advancing the generator.
class NoiseStream {
 public:
  NoiseStream(double sigma, std::uint64_t seed);

  double draw();
  double sigma() const noexcept { return sigma_; }

 private:
  double sigma_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

struct Trajectory {
  std::vector<double> values;  // S(0) .. S(steps)
  TapParams params;
  double noise_sigma = 0.0;
};

Trajectory simulate_trajectory(double s0, const TapParams& params, int steps, double noise_sigma,
                               std::uint64_t seed);

/// Least-squares rate constant for the discretized model:
///   k = sum(dS * g) / sum(g^2),  g = S * (1 - S / s_max) * dt.
/// Requires >= 3 values in [0, s_max]. Values pinned at a bound (as clamped
/// noisy trajectories produce) contribute no growth term; a series with no
/// interior point at all is degenerate.
double fit_k(std::span<const double> values, double s_max, double dt = 1.0);

}  // namespace ape::tap
