#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "smcvar/filter.hpp"
#include "smcvar/varest.hpp"

namespace smcvar {

/// Neyman-style allocation: c_p proportional to sqrt(a_p), normalized to
/// sum to n + 1; `objective` is the minimized value of sum a_p / c_p.
/// Entries with a_p = 0 get c_p = 0 and must be floored by the caller
/// before use as a plan.
struct OptimalAllocation {
  std::vector<double> c;
  double objective = 0;
};

inline OptimalAllocation optimal_allocation(const std::vector<double>& a) {
  if (a.empty()) throw std::invalid_argument("optimal_allocation: empty input");
  double root_sum = 0.0;
  for (double ap : a) {
    if (!(ap >= 0) || !std::isfinite(ap))
      throw std::invalid_argument("optimal_allocation: terms must be non-negative");
    root_sum += std::sqrt(ap);
  }
  if (root_sum == 0.0)
    throw std::invalid_argument("optimal_allocation: all terms zero");
  OptimalAllocation out;
  const double total = static_cast<double>(a.size());
  out.c.resize(a.size());
  for (std::size_t p = 0; p < a.size(); ++p)
    out.c[p] = total * std::sqrt(a[p]) / root_sum;
  out.objective = root_sum * root_sum / total;
  return out;
}

/// Default floor for the two-stage procedure.
inline double default_allocation_floor(int base_size) {
  return 2.0 / std::log2(static_cast<double>(base_size));
}

struct TwoStageResult {
  AllocationPlan plan;
  std::vector<double> stage1_vpn;
  double improvement_ratio = 1.0;  // sum v / sum v / c, from the pilot run
};

/// Two-stage approximation of the optimal allocation: a pilot run with
/// c_p = 1 estimates the v_{p,n}^N profile, which is floored at g(N) and
/// normalized to sum to n + 1.
template <class State, class Phi, class Floor>
TwoStageResult two_stage_allocation(const FeynmanKacModel<State>& model,
                                    Phi&& phi, int base_size, Floor&& floor_fn,
                                    std::uint64_t seed) {
  const auto pilot = run_filter(model, AllocationPlan::uniform(model.horizon, base_size),
                                split_seed(seed, 0));
  TwoStageResult out;
  out.stage1_vpn = compute_vpnN_all(pilot, phi);
  const double g = floor_fn(base_size);
  if (!(g > 0))
    throw std::invalid_argument("two_stage_allocation: floor must be positive");
  std::vector<double> c(out.stage1_vpn.size());
  double csum = 0.0;
  for (std::size_t p = 0; p < c.size(); ++p) {
    c[p] = std::max(out.stage1_vpn[p], g);
    csum += c[p];
  }
  const double total = static_cast<double>(c.size());
  double vsum = 0.0, vweighted = 0.0;
  for (std::size_t p = 0; p < c.size(); ++p) {
    c[p] *= total / csum;
    vsum += out.stage1_vpn[p];
    vweighted += out.stage1_vpn[p] / c[p];
  }
  out.plan.c = std::move(c);
  out.plan.base_size = base_size;
  out.improvement_ratio = vweighted != 0.0 ? vsum / vweighted : 1.0;
  return out;
}

template <class State, class Phi>
TwoStageResult two_stage_allocation(const FeynmanKacModel<State>& model,
                                    Phi&& phi, int base_size, std::uint64_t seed) {
  return two_stage_allocation(model, phi, base_size,
                              [](int nb) { return default_allocation_floor(nb); },
                              seed);
}

struct AdaptiveRunResult {
  std::vector<int> size_trajectory;  // N^(0), ..., N^(tau)
  std::vector<double> v_values;      // V at each stage
  double delta = 0;
  bool capped = false;  // iteration cap hit before V entered [0, delta]
  VarianceReport final_report;  // from a fresh run at N^(tau)
};

/// Doubles N until V_n^N(phi) (or its updated version) lands in [0, delta],
/// then reports from one final independent run at the accepted size. Stage
/// seeds derive from the master seed by the documented splitting rule.
template <class State, class Phi>
AdaptiveRunResult adaptive_filter(const FeynmanKacModel<State>& model, Phi&& phi,
                                  int initial_size, double delta,
                                  std::uint64_t seed, bool updated = false,
                                  int max_doublings = 30) {
  if (initial_size < 2)
    throw std::invalid_argument("adaptive_filter: initial size must be >= 2");
  if (!(delta > 0))
    throw std::invalid_argument("adaptive_filter: delta must be positive");
  AdaptiveRunResult out;
  out.delta = delta;
  int size = initial_size;
  for (int stage = 0;; ++stage) {
    const auto term = run_filter_streaming(
        model, AllocationPlan::uniform(model.horizon, size),
        split_seed(seed, static_cast<std::uint64_t>(stage)));
    double v = compute_V(term, phi);
    if (updated) {
      const auto hv = detail::hat_values(detail::phi_values(term.states, phi),
                                         term.log_potentials);
      v = detail::compute_V_core(term.counts, term.eves, hv.phi_hat) /
          (hv.eta_g * hv.eta_g);
    }
    out.size_trajectory.push_back(size);
    out.v_values.push_back(v);
    if (v >= 0.0 && v <= delta) break;
    if (stage == max_doublings) {
      out.capped = true;
      break;
    }
    size *= 2;
  }
  const auto final_run =
      run_filter(model, AllocationPlan::uniform(model.horizon, size),
                 split_seed(seed, 1'000'000));
  out.final_report = make_report(final_run, phi);
  return out;
}

struct ReplicateStudy {
  double standard_estimate = 0;  // sample variance of gamma_i(phi) / M
  double v_based_estimate = 0;   // mean of (gamma_i(1)/M)^2 V_i(phi)
  int replicates = 0;
};

/// Replicate-based comparison of the two variance estimates for
/// gamma_n^N(phi) / gamma_n(1). M is the sample mean of gamma_i(1) over the
/// replicates. With `updated` both estimates target the updated quantity.
template <class State, class Phi>
ReplicateStudy replicate_variance_study(const FeynmanKacModel<State>& model,
                                        Phi&& phi, int base_size, int replicates,
                                        std::uint64_t seed, bool updated = false) {
  if (replicates < 2)
    throw std::invalid_argument("replicate_variance_study: need >= 2 replicates");
  std::vector<double> log_g1(static_cast<std::size_t>(replicates));
  std::vector<double> g_phi_rel(static_cast<std::size_t>(replicates));
  std::vector<double> v(static_cast<std::size_t>(replicates));
  const int n = model.horizon;
  for (int i = 0; i < replicates; ++i) {
    const auto term = run_filter_streaming(
        model, AllocationPlan::uniform(n, base_size),
        split_seed(seed, static_cast<std::uint64_t>(i)));
    const auto pe = point_estimates(term, phi);
    const auto si = static_cast<std::size_t>(i);
    if (updated) {
      log_g1[si] = pe.log_gamma_hat_one;
      g_phi_rel[si] = pe.eta_hat;
      const auto hv = detail::hat_values(detail::phi_values(term.states, phi),
                                         term.log_potentials);
      v[si] = detail::compute_V_core(term.counts, term.eves, hv.phi_hat) /
              (hv.eta_g * hv.eta_g);
    } else {
      log_g1[si] = pe.log_gamma_one;
      g_phi_rel[si] = pe.eta;
      v[si] = compute_V(term, phi);
    }
  }
  // work relative to max log gamma_i(1) so that small evidences stay usable
  double hi = log_g1[0];
  for (double l : log_g1) hi = std::max(hi, l);
  double msum = 0.0;
  for (double l : log_g1) msum += std::exp(l - hi);
  const double m_rel = msum / replicates;  // M * exp(-hi)

  ReplicateStudy out;
  out.replicates = replicates;
  double mean = 0.0;
  std::vector<double> ratio(static_cast<std::size_t>(replicates));
  for (std::size_t i = 0; i < ratio.size(); ++i) {
    ratio[i] = std::exp(log_g1[i] - hi) / m_rel;
    mean += ratio[i] * g_phi_rel[i];
  }
  mean /= replicates;
  for (std::size_t i = 0; i < ratio.size(); ++i) {
    const double d = ratio[i] * g_phi_rel[i] - mean;
    out.standard_estimate += d * d;
    out.v_based_estimate += ratio[i] * ratio[i] * v[i];
  }
  out.standard_estimate /= replicates - 1;
  out.v_based_estimate /= replicates;
  return out;
}

}  // namespace smcvar
