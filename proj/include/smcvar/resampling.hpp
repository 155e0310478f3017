#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "smcvar/rng.hpp"

namespace smcvar {

/// Draws `count` i.i.d. categorical indices with probabilities proportional
/// to `weights`, in O(m + count) via the uniform-spacings inverse CDF walk.
/// The returned vector is sorted by construction; multinomial offspring are
/// exchangeable so this does not change the law of the particle system.
inline std::vector<int> multinomial_resample(const std::vector<double>& weights,
                                             int count, Rng& rng,
                                             int step_for_errors = -1) {
  const auto m = weights.size();
  if (m == 0 || count < 0)
    throw std::invalid_argument("multinomial_resample: empty weights or bad count");
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (!(weights[i] > 0.0) || !std::isfinite(weights[i])) {
      std::string where = step_for_errors >= 0
                              ? " at step " + std::to_string(step_for_errors)
                              : "";
      throw std::runtime_error("multinomial_resample: non-positive or non-finite weight " +
                               std::to_string(i) + where);
    }
    total += weights[i];
  }

  // sorted uniforms from normalized exponential spacings
  std::exponential_distribution<double> exp1(1.0);
  std::vector<double> cum(static_cast<std::size_t>(count));
  double acc = 0.0;
  for (int k = 0; k < count; ++k) {
    acc += exp1(rng);
    cum[static_cast<std::size_t>(k)] = acc;
  }
  acc += exp1(rng);

  std::vector<int> indices(static_cast<std::size_t>(count));
  std::size_t j = 0;
  double wcum = weights[0];
  for (int k = 0; k < count; ++k) {
    const double target = cum[static_cast<std::size_t>(k)] / acc * total;
    while (wcum < target && j + 1 < m) wcum += weights[++j];
    indices[static_cast<std::size_t>(k)] = static_cast<int>(j);
  }
  return indices;
}

}  // namespace smcvar
