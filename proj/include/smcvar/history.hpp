#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace smcvar {

/// Time-varying particle counts N_p = ceil(c_p N) induced by positive
/// weights c_0..c_n and a base size N.
struct AllocationPlan {
  std::vector<double> c;
  int base_size = 0;  // N

  static AllocationPlan uniform(int horizon, int base_size) {
    AllocationPlan plan;
    plan.c.assign(static_cast<std::size_t>(horizon) + 1, 1.0);
    plan.base_size = base_size;
    return plan;
  }

  void validate() const {
    if (c.empty()) throw std::invalid_argument("allocation: empty c");
    if (base_size < 1) throw std::invalid_argument("allocation: base size < 1");
    for (double cp : c)
      if (!(cp > 0) || !std::isfinite(cp))
        throw std::invalid_argument("allocation: c_p must be positive and finite");
    for (int np : particle_counts())
      if (np < 2)
        throw std::invalid_argument("allocation: induced N_p must be >= 2");
  }

  std::vector<int> particle_counts() const {
    std::vector<int> counts;
    counts.reserve(c.size());
    for (double cp : c)
      counts.push_back(static_cast<int>(std::ceil(cp * base_size)));
    return counts;
  }
};

/// Complete record of one particle filter run: states, ancestor indices,
/// Eve indices, log potentials and the per-step normalizing increments.
/// Indices are zero-based throughout. Immutable once the run finishes.
template <class State>
struct ParticleHistory {
  int base_size = 0;          // N
  std::vector<double> c;      // c_0..c_n
  std::vector<int> counts;    // N_0..N_n
  std::vector<std::vector<State>> states;          // [p][i]
  std::vector<std::vector<int>> ancestors;         // [p][i]: parent at time p of particle i at time p+1
  std::vector<std::vector<int>> eves;              // [p][i] in [0, N_0)
  std::vector<std::vector<double>> log_potentials; // [p][i] = log G_p
  std::vector<double> log_eta_g;                   // log eta_p^N(G_p), p = 0..n

  int horizon() const { return static_cast<int>(counts.size()) - 1; }

  // log of prod_{p < upto} eta_p^N(G_p); log gamma_n^N(1) is log_gamma_one(n)
  double log_gamma_one(int upto) const {
    double s = 0.0;
    for (int p = 0; p < upto; ++p) s += log_eta_g[static_cast<std::size_t>(p)];
    return s;
  }

  bool constant_counts() const {
    for (int np : counts)
      if (np != counts[0]) return false;
    return true;
  }
};

/// Terminal-only summary retained by the streaming filter: enough for
/// V_n^N, the Chan--Lai form and the family diagnostics, in O(N) space.
template <class State>
struct TerminalHistory {
  int base_size = 0;
  std::vector<double> c;
  std::vector<int> counts;
  std::vector<State> states;          // zeta_n
  std::vector<int> eves;              // E_n
  std::vector<double> log_potentials; // log G_n
  std::vector<double> log_eta_g;

  int horizon() const { return static_cast<int>(counts.size()) - 1; }
  double log_gamma_one(int upto) const {
    double s = 0.0;
    for (int p = 0; p < upto; ++p) s += log_eta_g[static_cast<std::size_t>(p)];
    return s;
  }
  bool constant_counts() const {
    for (int np : counts)
      if (np != counts[0]) return false;
    return true;
  }
};

template <class State>
TerminalHistory<State> terminal_view(const ParticleHistory<State>& h) {
  TerminalHistory<State> t;
  t.base_size = h.base_size;
  t.c = h.c;
  t.counts = h.counts;
  const auto n = static_cast<std::size_t>(h.horizon());
  t.states = h.states[n];
  t.eves = h.eves[n];
  t.log_potentials = h.log_potentials[n];
  t.log_eta_g = h.log_eta_g;
  return t;
}

}  // namespace smcvar
