#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "smcvar/filter.hpp"
#include "smcvar/history.hpp"

namespace smcvar {

namespace detail {

inline double count_product(const std::vector<int>& counts, int skip = -1,
                            bool include_last = true) {
  double prod = 1.0;
  const int n = static_cast<int>(counts.size()) - 1;
  for (int p = 0; p <= n; ++p) {
    if (p == skip) continue;
    if (p == n && !include_last) continue;
    const double np = counts[static_cast<std::size_t>(p)];
    prod *= np / (np - 1.0);
  }
  return prod;
}

// sums of terminal values grouped by Eve family
inline std::vector<double> family_sums(const std::vector<int>& eves,
                                       const std::vector<double>& vals, int n0) {
  std::vector<double> fam(static_cast<std::size_t>(n0), 0.0);
  for (std::size_t i = 0; i < eves.size(); ++i)
    fam[static_cast<std::size_t>(eves[i])] += vals[i];
  return fam;
}

// conditional-expectation part of mu_{0_n}^N: the distinct-Eve pair sum
// over N_n^2, via the family-sum factorization
inline double mu0_part(const std::vector<int>& counts,
                       const std::vector<int>& eve_n,
                       const std::vector<double>& phi,
                       const std::vector<double>& psi) {
  const int n0 = counts[0];
  const double nn = counts.back();
  const auto famp = family_sums(eve_n, phi, n0);
  const auto famq = family_sums(eve_n, psi, n0);
  double totp = 0.0, totq = 0.0, famdot = 0.0;
  for (double v : phi) totp += v;
  for (double v : psi) totq += v;
  for (int e = 0; e < n0; ++e)
    famdot += famp[static_cast<std::size_t>(e)] * famq[static_cast<std::size_t>(e)];
  return (totp * totq - famdot) / (nn * nn);
}

// Conditional-expectation parts of mu_{e_p}^N for every p at once, by one
// backward sweep over the genealogy. m_p(k) accumulates the terminal phi
// mass whose time-p ancestor is k; grouping m-products by Eve and peeling
// off the coalescence level gives the exact pair sums in O(sum_p N_p).
template <class State>
std::vector<double> mu_ep_parts(const ParticleHistory<State>& h,
                                const std::vector<double>& phi,
                                const std::vector<double>& psi) {
  const int n = h.horizon();
  const int n0 = h.counts[0];
  const double nn = h.counts[static_cast<std::size_t>(n)];
  std::vector<double> parts(static_cast<std::size_t>(n) + 1, 0.0);

  std::vector<double> mp = phi, mq = psi;          // m at the current level
  std::vector<double> eve_dot_next;                // eve-grouped m-products one level up
  for (int p = n; p >= 0; --p) {
    const auto sp = static_cast<std::size_t>(p);
    std::vector<double> eve_dot(static_cast<std::size_t>(n0), 0.0);
    for (std::size_t k = 0; k < mp.size(); ++k)
      eve_dot[static_cast<std::size_t>(h.eves[sp][k])] += mp[k] * mq[k];

    // G-mass of each Eve family at time p-1 (the fresh-draw escape factor)
    std::vector<double> eve_w;
    if (p > 0) {
      const auto& lg = h.log_potentials[sp - 1];
      double hi = lg[0];
      for (double v : lg) hi = std::max(hi, v);
      eve_w.assign(static_cast<std::size_t>(n0), 0.0);
      double tot = 0.0;
      for (std::size_t l = 0; l < lg.size(); ++l) {
        const double w = std::exp(lg[l] - hi);
        eve_w[static_cast<std::size_t>(h.eves[sp - 1][l])] += w;
        tot += w;
      }
      for (double& w : eve_w) w /= tot;
    }

    double acc = 0.0;
    for (int e = 0; e < n0; ++e) {
      const auto se = static_cast<std::size_t>(e);
      const double diff =
          eve_dot[se] - (p < n ? eve_dot_next[se] : 0.0);
      acc += (p > 0 ? 1.0 - eve_w[se] : 1.0) * diff;
    }
    parts[sp] = acc / (nn * nn);
    eve_dot_next = std::move(eve_dot);

    if (p > 0) {
      std::vector<double> pm(static_cast<std::size_t>(h.counts[sp - 1]), 0.0);
      std::vector<double> qm(static_cast<std::size_t>(h.counts[sp - 1]), 0.0);
      const auto& anc = h.ancestors[sp - 1];
      for (std::size_t k = 0; k < mp.size(); ++k) {
        pm[static_cast<std::size_t>(anc[k])] += mp[k];
        qm[static_cast<std::size_t>(anc[k])] += mq[k];
      }
      mp = std::move(pm);
      mq = std::move(qm);
    }
  }
  return parts;
}

inline double compute_V_core(const std::vector<int>& counts,
                             const std::vector<int>& eve_n,
                             const std::vector<double>& phi) {
  const double nn = counts.back();
  double tot = 0.0;
  for (double v : phi) tot += v;
  const double eta = tot / nn;
  const double cross = mu0_part(counts, eve_n, phi, phi) * nn * nn;
  return eta * eta -
         count_product(counts, -1, false) * cross / (nn * (nn - 1.0));
}

// phi-hat values shifted by exp(-max log G_n), together with the equally
// shifted eta_n^N(G_n); the shift cancels in every hat estimator
struct HatValues {
  std::vector<double> phi_hat;
  double eta_g = 0;
};

inline HatValues hat_values(const std::vector<double>& phi,
                            const std::vector<double>& log_gn) {
  HatValues out;
  double hi = log_gn[0];
  for (double v : log_gn) hi = std::max(hi, v);
  out.phi_hat.resize(phi.size());
  double gsum = 0.0;
  for (std::size_t i = 0; i < phi.size(); ++i) {
    const double g = std::exp(log_gn[i] - hi);
    out.phi_hat[i] = g * phi[i];
    gsum += g;
  }
  out.eta_g = gsum / static_cast<double>(phi.size());
  return out;
}

inline void require_constant_counts(bool ok, const char* what) {
  if (!ok)
    throw std::runtime_error(std::string(what) +
                             ": unsupported for time-varying particle numbers");
}

}  // namespace detail

/// Unbiased single-run variance estimator V_n^N(phi) of Monte Carlo error,
/// computed from the terminal Eve partition. May be negative.
template <class State, class Phi>
double compute_V(const ParticleHistory<State>& h, Phi&& phi) {
  const auto n = static_cast<std::size_t>(h.horizon());
  return detail::compute_V_core(h.counts, h.eves[n],
                                detail::phi_values(h.states[n], phi));
}

template <class State, class Phi>
double compute_V(const TerminalHistory<State>& h, Phi&& phi) {
  return detail::compute_V_core(h.counts, h.eves,
                                detail::phi_values(h.states, phi));
}

/// mu_{0_n}^N(phi (x) psi): the no-coincidence particle measure.
template <class State, class Phi, class Psi>
double compute_mu0N(const ParticleHistory<State>& h, Phi&& phi, Psi&& psi) {
  const auto n = static_cast<std::size_t>(h.horizon());
  const double g = std::exp(h.log_gamma_one(static_cast<int>(n)));
  return detail::count_product(h.counts) * g * g *
         detail::mu0_part(h.counts, h.eves[n],
                          detail::phi_values(h.states[n], phi),
                          detail::phi_values(h.states[n], psi));
}

template <class State, class Phi>
double compute_mu0N(const ParticleHistory<State>& h, Phi&& phi) {
  return compute_mu0N(h, phi, phi);
}

/// mu_{e_p}^N(phi (x) psi) for all p in one backward sweep.
template <class State, class Phi, class Psi>
std::vector<double> compute_mu_epN_all(const ParticleHistory<State>& h,
                                       Phi&& phi, Psi&& psi) {
  const auto n = static_cast<std::size_t>(h.horizon());
  const auto pv = detail::phi_values(h.states[n], phi);
  const auto qv = detail::phi_values(h.states[n], psi);
  auto parts = detail::mu_ep_parts(h, pv, qv);
  const double g = std::exp(h.log_gamma_one(static_cast<int>(n)));
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const double np = h.counts[p];
    parts[p] *= np * detail::count_product(h.counts, static_cast<int>(p)) * g * g;
  }
  return parts;
}

template <class State, class Phi, class Psi>
double compute_mu_epN(const ParticleHistory<State>& h, int p, Phi&& phi, Psi&& psi) {
  return compute_mu_epN_all(h, phi, psi)[static_cast<std::size_t>(p)];
}

template <class State, class Phi>
double compute_mu_epN(const ParticleHistory<State>& h, int p, Phi&& phi) {
  return compute_mu_epN(h, p, phi, phi);
}

/// Per-timestep asymptotic-variance estimators
/// v_{p,n}^N = (mu_{e_p}^N - mu_{0_n}^N) / gamma_n^N(1)^2, formed without
/// ever touching gamma_n^N(1)^2.
template <class State, class Phi>
std::vector<double> compute_vpnN_all(const ParticleHistory<State>& h, Phi&& phi) {
  const auto n = static_cast<std::size_t>(h.horizon());
  const auto pv = detail::phi_values(h.states[n], phi);
  const auto parts = detail::mu_ep_parts(h, pv, pv);
  const double part0 = detail::mu0_part(h.counts, h.eves[n], pv, pv);
  const double prod_all = detail::count_product(h.counts);
  std::vector<double> v(parts.size());
  for (std::size_t p = 0; p < parts.size(); ++p)
    v[p] = prod_all * ((h.counts[p] - 1.0) * parts[p] - part0);
  return v;
}

template <class State, class Phi>
double compute_vpnN(const ParticleHistory<State>& h, int p, Phi&& phi) {
  return compute_vpnN_all(h, phi)[static_cast<std::size_t>(p)];
}

template <class State, class Phi>
double compute_vnN(const ParticleHistory<State>& h, Phi&& phi) {
  const auto v = compute_vpnN_all(h, phi);
  double s = 0.0;
  for (std::size_t p = 0; p < v.size(); ++p) s += v[p] / h.c[p];
  return s;
}

struct UpdatedEstimators {
  double V_hat = 0;
  std::vector<double> vpn_hat;
  double vn_hat = 0;
};

/// Hat (updated-measure) estimators, rerouted through the plain ones with
/// phi-hat = G_n * phi and divided by eta_n^N(G_n)^2.
template <class State, class Phi>
UpdatedEstimators updated_estimators(const ParticleHistory<State>& h, Phi&& phi) {
  const auto n = static_cast<std::size_t>(h.horizon());
  const auto pv = detail::phi_values(h.states[n], phi);
  const auto hv = detail::hat_values(pv, h.log_potentials[n]);
  UpdatedEstimators out;
  const double scale = hv.eta_g * hv.eta_g;
  out.V_hat =
      detail::compute_V_core(h.counts, h.eves[n], hv.phi_hat) / scale;
  const auto parts = detail::mu_ep_parts(h, hv.phi_hat, hv.phi_hat);
  const double part0 = detail::mu0_part(h.counts, h.eves[n], hv.phi_hat, hv.phi_hat);
  const double prod_all = detail::count_product(h.counts);
  out.vpn_hat.resize(parts.size());
  for (std::size_t p = 0; p < parts.size(); ++p) {
    out.vpn_hat[p] =
        prod_all * ((h.counts[p] - 1.0) * parts[p] - part0) / scale;
    out.vn_hat += out.vpn_hat[p] / h.c[p];
  }
  return out;
}

namespace detail {

inline double chan_lai_core(const std::vector<int>& counts,
                            const std::vector<int>& eve_n,
                            const std::vector<double>& phi,
                            const std::vector<double>& log_gn) {
  bool constant = true;
  for (int np : counts) constant = constant && np == counts[0];
  require_constant_counts(constant, "chan_lai_estimator");
  const int n0 = counts[0];
  const double nn = counts.back();
  double hi = log_gn[0];
  for (double v : log_gn) hi = std::max(hi, v);
  double gsum = 0.0, gphi = 0.0;
  std::vector<double> g(phi.size());
  for (std::size_t i = 0; i < phi.size(); ++i) {
    g[i] = std::exp(log_gn[i] - hi);
    gsum += g[i];
    gphi += g[i] * phi[i];
  }
  const double eta_hat = gphi / gsum;
  std::vector<double> bracket(static_cast<std::size_t>(n0), 0.0);
  for (std::size_t i = 0; i < phi.size(); ++i)
    bracket[static_cast<std::size_t>(eve_n[i])] += g[i] * (phi[i] - eta_hat);
  double s = 0.0;
  for (double b : bracket) s += (b / gsum) * (b / gsum);
  return nn * s;
}

}  // namespace detail

/// The Chan--Lai asymptotic-variance estimator; defined for constant N only.
template <class State, class Phi>
double chan_lai_estimator(const ParticleHistory<State>& h, Phi&& phi) {
  const auto n = static_cast<std::size_t>(h.horizon());
  return detail::chan_lai_core(h.counts, h.eves[n],
                               detail::phi_values(h.states[n], phi),
                               h.log_potentials[n]);
}

template <class State, class Phi>
double chan_lai_estimator(const TerminalHistory<State>& h, Phi&& phi) {
  return detail::chan_lai_core(h.counts, h.eves,
                               detail::phi_values(h.states, phi),
                               h.log_potentials);
}

/// Per-Eve descendant counts and familial deviations, with the two
/// sample-variance statistics that approximate N V_n^N(1) and
/// N V_n^N(phi - eta_n^N(phi)) up to O(1/N). Constant N only.
struct FamilyDiagnostics {
  std::vector<double> descendant_counts;  // #_n^i, i in [N_0]
  std::vector<double> deviations;         // Delta_n^i
  double count_statistic = 0;      // N^{-1} sum (#-1)^2 - n
  double deviation_statistic = 0;  // N^{-1} sum (# Delta)^2
};

namespace detail {

inline FamilyDiagnostics corollary1_core(const std::vector<int>& counts,
                                         const std::vector<int>& eve_n,
                                         const std::vector<double>& phi) {
  bool constant = true;
  for (int np : counts) constant = constant && np == counts[0];
  require_constant_counts(constant, "corollary1_diagnostics");
  const int n0 = counts[0];
  const int n = static_cast<int>(counts.size()) - 1;
  const double nn = counts.back();
  FamilyDiagnostics d;
  d.descendant_counts.assign(static_cast<std::size_t>(n0), 0.0);
  std::vector<double> fam(static_cast<std::size_t>(n0), 0.0);
  double tot = 0.0;
  for (std::size_t i = 0; i < phi.size(); ++i) {
    d.descendant_counts[static_cast<std::size_t>(eve_n[i])] += 1.0;
    fam[static_cast<std::size_t>(eve_n[i])] += phi[i];
    tot += phi[i];
  }
  const double eta = tot / nn;
  d.deviations.assign(static_cast<std::size_t>(n0), 0.0);
  for (int e = 0; e < n0; ++e) {
    const auto se = static_cast<std::size_t>(e);
    if (d.descendant_counts[se] > 0)
      d.deviations[se] = fam[se] / d.descendant_counts[se] - eta;
    const double cm1 = d.descendant_counts[se] - 1.0;
    d.count_statistic += cm1 * cm1;
    const double cd = d.descendant_counts[se] * d.deviations[se];
    d.deviation_statistic += cd * cd;
  }
  d.count_statistic = d.count_statistic / nn - n;
  d.deviation_statistic /= nn;
  return d;
}

}  // namespace detail

template <class State, class Phi>
FamilyDiagnostics corollary1_diagnostics(const ParticleHistory<State>& h, Phi&& phi) {
  const auto n = static_cast<std::size_t>(h.horizon());
  return detail::corollary1_core(h.counts, h.eves[n],
                                 detail::phi_values(h.states[n], phi));
}

template <class State, class Phi>
FamilyDiagnostics corollary1_diagnostics(const TerminalHistory<State>& h, Phi&& phi) {
  return detail::corollary1_core(h.counts, h.eves,
                                 detail::phi_values(h.states, phi));
}

/// Estimate of the O(1/N) asymptotic bias of eta_n^N(phi), via the
/// asymmetric-argument mu_{e_p}^N with a centered second slot. Constant N.
template <class State, class Phi>
double bias_estimate(const ParticleHistory<State>& h, Phi&& phi) {
  detail::require_constant_counts(h.constant_counts(), "bias_estimate");
  const auto n = static_cast<std::size_t>(h.horizon());
  const auto pv = detail::phi_values(h.states[n], phi);
  double tot = 0.0;
  for (double v : pv) tot += v;
  const double eta = tot / static_cast<double>(pv.size());
  std::vector<double> ones(pv.size(), 1.0);
  std::vector<double> centered(pv.size());
  for (std::size_t i = 0; i < pv.size(); ++i) centered[i] = pv[i] - eta;
  const auto parts = detail::mu_ep_parts(h, ones, centered);
  const double prod_all = detail::count_product(h.counts);
  double bias = 0.0;
  for (std::size_t p = 0; p + 1 < parts.size(); ++p)
    bias -= prod_all * (h.counts[p] - 1.0) * parts[p];
  return bias;
}

/// Everything a run can report about phi, plus the constant-N extras when
/// they apply.
struct VarianceReport {
  int horizon = 0;
  int base_size = 0;
  PointEstimates point;
  double V = 0;            // V_n^N(phi)
  double NV = 0;           // N V_n^N(phi)
  double NV_centered = 0;  // N V_n^N(phi - eta_n^N(phi))
  std::vector<double> vpn;
  double vn = 0;
  double V_hat = 0;
  double NV_hat = 0;
  double NV_hat_centered = 0;
  std::vector<double> vpn_hat;
  double vn_hat = 0;
  std::optional<double> chan_lai;
  std::optional<double> bias;
  std::optional<double> count_statistic;
  std::optional<double> deviation_statistic;
};

template <class State, class Phi>
VarianceReport make_report(const ParticleHistory<State>& h, Phi&& phi) {
  VarianceReport r;
  r.horizon = h.horizon();
  r.base_size = h.base_size;
  r.point = point_estimates(h, phi);
  const auto n = static_cast<std::size_t>(h.horizon());
  const auto pv = detail::phi_values(h.states[n], phi);
  const double N = h.base_size;

  r.V = detail::compute_V_core(h.counts, h.eves[n], pv);
  r.NV = N * r.V;
  std::vector<double> centered(pv.size());
  for (std::size_t i = 0; i < pv.size(); ++i) centered[i] = pv[i] - r.point.eta;
  r.NV_centered = N * detail::compute_V_core(h.counts, h.eves[n], centered);

  r.vpn = compute_vpnN_all(h, phi);
  for (std::size_t p = 0; p < r.vpn.size(); ++p) r.vn += r.vpn[p] / h.c[p];

  const auto hats = updated_estimators(h, phi);
  r.V_hat = hats.V_hat;
  r.NV_hat = N * hats.V_hat;
  r.vpn_hat = hats.vpn_hat;
  r.vn_hat = hats.vn_hat;
  std::vector<double> hat_centered(pv.size());
  for (std::size_t i = 0; i < pv.size(); ++i)
    hat_centered[i] = pv[i] - r.point.eta_hat;
  const auto hv = detail::hat_values(hat_centered, h.log_potentials[n]);
  r.NV_hat_centered = N *
                      detail::compute_V_core(h.counts, h.eves[n], hv.phi_hat) /
                      (hv.eta_g * hv.eta_g);

  if (h.constant_counts()) {
    r.chan_lai = detail::chan_lai_core(h.counts, h.eves[n], pv, h.log_potentials[n]);
    r.bias = bias_estimate(h, phi);
    const auto d = detail::corollary1_core(h.counts, h.eves[n], pv);
    r.count_statistic = d.count_statistic;
    r.deviation_statistic = d.deviation_statistic;
  }
  return r;
}

}  // namespace smcvar
