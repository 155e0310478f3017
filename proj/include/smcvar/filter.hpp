#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "smcvar/history.hpp"
#include "smcvar/model.hpp"
#include "smcvar/resampling.hpp"
#include "smcvar/rng.hpp"

namespace smcvar {

namespace detail {

// log mean exp of a log-potential vector, with max-subtraction
inline double log_mean_exp(const std::vector<double>& logs) {
  double hi = logs[0];
  for (double v : logs) hi = std::max(hi, v);
  double s = 0.0;
  for (double v : logs) s += std::exp(v - hi);
  return hi + std::log(s / static_cast<double>(logs.size()));
}

inline std::vector<double> shifted_weights(const std::vector<double>& logs) {
  double hi = logs[0];
  for (double v : logs) hi = std::max(hi, v);
  std::vector<double> w(logs.size());
  for (std::size_t i = 0; i < logs.size(); ++i) w[i] = std::exp(logs[i] - hi);
  return w;
}

}  // namespace detail

/// Runs the genealogy-tracking particle filter with multinomial resampling,
/// recording the full history (states, ancestors, Eve indices, potentials).
template <class State>
ParticleHistory<State> run_filter(const FeynmanKacModel<State>& model,
                                  const AllocationPlan& plan,
                                  std::uint64_t seed) {
  plan.validate();
  const int n = model.horizon;
  if (static_cast<int>(plan.c.size()) != n + 1)
    throw std::invalid_argument("run_filter: plan length does not match model horizon");

  Rng rng(seed);
  ParticleHistory<State> h;
  h.base_size = plan.base_size;
  h.c = plan.c;
  h.counts = plan.particle_counts();
  h.states.resize(static_cast<std::size_t>(n) + 1);
  h.ancestors.resize(static_cast<std::size_t>(n));
  h.eves.resize(static_cast<std::size_t>(n) + 1);
  h.log_potentials.resize(static_cast<std::size_t>(n) + 1);
  h.log_eta_g.resize(static_cast<std::size_t>(n) + 1);

  const int n0 = h.counts[0];
  h.states[0].reserve(static_cast<std::size_t>(n0));
  h.eves[0].resize(static_cast<std::size_t>(n0));
  h.log_potentials[0].resize(static_cast<std::size_t>(n0));
  for (int i = 0; i < n0; ++i) {
    h.states[0].push_back(model.initial_sampler(rng));
    h.eves[0][static_cast<std::size_t>(i)] = i;
    h.log_potentials[0][static_cast<std::size_t>(i)] =
        checked_log_potential(model, 0, h.states[0][static_cast<std::size_t>(i)]);
  }
  h.log_eta_g[0] = detail::log_mean_exp(h.log_potentials[0]);

  for (int p = 1; p <= n; ++p) {
    const auto sp = static_cast<std::size_t>(p);
    const int np = h.counts[sp];
    const auto w = detail::shifted_weights(h.log_potentials[sp - 1]);
    h.ancestors[sp - 1] = multinomial_resample(w, np, rng, p - 1);
    h.states[sp].reserve(static_cast<std::size_t>(np));
    h.eves[sp].resize(static_cast<std::size_t>(np));
    h.log_potentials[sp].resize(static_cast<std::size_t>(np));
    for (int i = 0; i < np; ++i) {
      const auto a = static_cast<std::size_t>(h.ancestors[sp - 1][static_cast<std::size_t>(i)]);
      h.states[sp].push_back(model.transition_sampler(p, h.states[sp - 1][a], rng));
      h.eves[sp][static_cast<std::size_t>(i)] = h.eves[sp - 1][a];
      h.log_potentials[sp][static_cast<std::size_t>(i)] =
          checked_log_potential(model, p, h.states[sp][static_cast<std::size_t>(i)]);
    }
    h.log_eta_g[sp] = detail::log_mean_exp(h.log_potentials[sp]);
  }
  return h;
}

/// Streaming variant: identical sampling path for a given seed, but retains
/// only the terminal generation together with its Eve indices.
template <class State>
TerminalHistory<State> run_filter_streaming(const FeynmanKacModel<State>& model,
                                            const AllocationPlan& plan,
                                            std::uint64_t seed) {
  plan.validate();
  const int n = model.horizon;
  if (static_cast<int>(plan.c.size()) != n + 1)
    throw std::invalid_argument("run_filter: plan length does not match model horizon");

  Rng rng(seed);
  TerminalHistory<State> t;
  t.base_size = plan.base_size;
  t.c = plan.c;
  t.counts = plan.particle_counts();
  t.log_eta_g.resize(static_cast<std::size_t>(n) + 1);

  std::vector<State> cur;
  std::vector<int> eves;
  std::vector<double> logg;
  const int n0 = t.counts[0];
  cur.reserve(static_cast<std::size_t>(n0));
  eves.resize(static_cast<std::size_t>(n0));
  logg.resize(static_cast<std::size_t>(n0));
  for (int i = 0; i < n0; ++i) {
    cur.push_back(model.initial_sampler(rng));
    eves[static_cast<std::size_t>(i)] = i;
    logg[static_cast<std::size_t>(i)] =
        checked_log_potential(model, 0, cur[static_cast<std::size_t>(i)]);
  }
  t.log_eta_g[0] = detail::log_mean_exp(logg);

  for (int p = 1; p <= n; ++p) {
    const int np = t.counts[static_cast<std::size_t>(p)];
    const auto w = detail::shifted_weights(logg);
    const auto anc = multinomial_resample(w, np, rng, p - 1);
    std::vector<State> next;
    next.reserve(static_cast<std::size_t>(np));
    std::vector<int> next_eves(static_cast<std::size_t>(np));
    std::vector<double> next_logg(static_cast<std::size_t>(np));
    for (int i = 0; i < np; ++i) {
      const auto a = static_cast<std::size_t>(anc[static_cast<std::size_t>(i)]);
      next.push_back(model.transition_sampler(p, cur[a], rng));
      next_eves[static_cast<std::size_t>(i)] = eves[a];
      next_logg[static_cast<std::size_t>(i)] =
          checked_log_potential(model, p, next[static_cast<std::size_t>(i)]);
    }
    cur = std::move(next);
    eves = std::move(next_eves);
    logg = std::move(next_logg);
    t.log_eta_g[static_cast<std::size_t>(p)] = detail::log_mean_exp(logg);
  }
  t.states = std::move(cur);
  t.eves = std::move(eves);
  t.log_potentials = std::move(logg);
  return t;
}

/// Builds a history from an injected genealogy (states, ancestors and log
/// potentials), computing Eve indices and normalizing increments. Intended
/// for tests and hand-built oracle instances.
template <class State>
ParticleHistory<State> history_from_genealogy(
    std::vector<std::vector<State>> states,
    std::vector<std::vector<int>> ancestors,
    std::vector<std::vector<double>> log_potentials,
    std::vector<double> c = {}, int base_size = 0) {
  if (states.empty() || states.size() != ancestors.size() + 1 ||
      states.size() != log_potentials.size())
    throw std::invalid_argument("history_from_genealogy: inconsistent shapes");
  ParticleHistory<State> h;
  const auto n = states.size() - 1;
  h.states = std::move(states);
  h.ancestors = std::move(ancestors);
  h.log_potentials = std::move(log_potentials);
  for (const auto& gen : h.states) h.counts.push_back(static_cast<int>(gen.size()));
  h.c = c.empty() ? std::vector<double>(n + 1, 1.0) : std::move(c);
  h.base_size = base_size > 0 ? base_size : h.counts[0];
  h.eves.resize(n + 1);
  h.eves[0].resize(static_cast<std::size_t>(h.counts[0]));
  for (int i = 0; i < h.counts[0]; ++i) h.eves[0][static_cast<std::size_t>(i)] = i;
  for (std::size_t p = 1; p <= n; ++p) {
    if (h.ancestors[p - 1].size() != static_cast<std::size_t>(h.counts[p]) ||
        h.log_potentials[p].size() != static_cast<std::size_t>(h.counts[p]))
      throw std::invalid_argument("history_from_genealogy: inconsistent shapes");
    h.eves[p].resize(static_cast<std::size_t>(h.counts[p]));
    for (std::size_t i = 0; i < h.eves[p].size(); ++i) {
      const int a = h.ancestors[p - 1][i];
      if (a < 0 || a >= h.counts[p - 1])
        throw std::invalid_argument("history_from_genealogy: ancestor out of range");
      h.eves[p][i] = h.eves[p - 1][static_cast<std::size_t>(a)];
    }
  }
  for (const auto& lg : h.log_potentials)
    h.log_eta_g.push_back(detail::log_mean_exp(lg));
  return h;
}

/// Point estimates delivered by one run: predictive and updated versions of
/// eta and gamma applied to phi.
struct PointEstimates {
  double eta = 0;        // eta_n^N(phi)
  double gamma = 0;      // gamma_n^N(phi)
  double eta_hat = 0;    // updated eta
  double gamma_hat = 0;  // updated gamma
  double log_gamma_one = 0;      // log gamma_n^N(1)
  double log_gamma_hat_one = 0;  // log of updated gamma_n^N(1)
};

namespace detail {

template <class State, class Phi>
std::vector<double> phi_values(const std::vector<State>& states, Phi&& phi) {
  std::vector<double> vals(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    vals[i] = phi(states[i]);
    if (std::isnan(vals[i]))
      throw std::runtime_error("test function evaluated to NaN");
  }
  return vals;
}

inline PointEstimates point_estimates_from(const std::vector<double>& phin,
                                           const std::vector<double>& loggn,
                                           double log_gamma_ratio,
                                           double log_eta_gn) {
  PointEstimates pe;
  const auto nn = static_cast<double>(phin.size());
  double sum = 0.0;
  for (double v : phin) sum += v;
  pe.eta = sum / nn;
  pe.log_gamma_one = log_gamma_ratio;
  pe.gamma = std::exp(log_gamma_ratio) * pe.eta;
  double hi = loggn[0];
  for (double v : loggn) hi = std::max(hi, v);
  double gsum = 0.0, gphisum = 0.0;
  for (std::size_t i = 0; i < phin.size(); ++i) {
    const double g = std::exp(loggn[i] - hi);
    gsum += g;
    gphisum += g * phin[i];
  }
  pe.eta_hat = gphisum / gsum;
  pe.log_gamma_hat_one = log_gamma_ratio + log_eta_gn;
  pe.gamma_hat = std::exp(pe.log_gamma_hat_one) * pe.eta_hat;
  return pe;
}

}  // namespace detail

template <class State, class Phi>
PointEstimates point_estimates(const ParticleHistory<State>& h, Phi&& phi) {
  const auto n = static_cast<std::size_t>(h.horizon());
  const auto phin = detail::phi_values(h.states[n], phi);
  return detail::point_estimates_from(phin, h.log_potentials[n],
                                      h.log_gamma_one(static_cast<int>(n)),
                                      h.log_eta_g[n]);
}

template <class State, class Phi>
PointEstimates point_estimates(const TerminalHistory<State>& h, Phi&& phi) {
  const int n = h.horizon();
  const auto phin = detail::phi_values(h.states, phi);
  return detail::point_estimates_from(phin, h.log_potentials,
                                      h.log_gamma_one(n),
                                      h.log_eta_g[static_cast<std::size_t>(n)]);
}

}  // namespace smcvar
