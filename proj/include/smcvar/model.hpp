#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>

#include "smcvar/rng.hpp"

namespace smcvar {

template <class State>
using TestFunction = std::function<double(const State&)>;

/// A discrete-time Feynman--Kac model: initial distribution M_0, Markov
/// kernels M_1..M_n and strictly positive potentials G_0..G_n, all over an
/// opaque state type. Potentials are evaluated in log space. Model objects
/// are immutable after construction and safe to share across threads; RNG
/// state is always passed in.
template <class State>
struct FeynmanKacModel {
  int horizon = 0;  // n
  std::function<State(Rng&)> initial_sampler;
  // p in [1, n]
  std::function<State(int, const State&, Rng&)> transition_sampler;
  // p in [0, n]; must return a finite value not exceeding the declared bound
  std::function<double(int, const State&)> log_potential;
  // declared upper bound for log G_p over all p and reachable states
  double log_potential_bound = std::numeric_limits<double>::infinity();
};

// Evaluates log G_p with the positivity/boundedness checks the model
// interface promises.
template <class State>
double checked_log_potential(const FeynmanKacModel<State>& model, int p,
                             const State& x) {
  const double lg = model.log_potential(p, x);
  if (!std::isfinite(lg)) {
    throw std::runtime_error(
        "potential evaluated to a non-positive or non-finite value at step " +
        std::to_string(p));
  }
  if (lg > model.log_potential_bound + 1e-9) {
    throw std::runtime_error("potential exceeds its declared bound at step " +
                             std::to_string(p));
  }
  return lg;
}

}  // namespace smcvar
