#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "smcvar/history.hpp"

namespace smcvar {

/// Exhaustive enumeration of the genealogical tracing pair (K1, K2) given a
/// recorded run. For every coincidence pattern b (bit p set when the paths
/// meet at time p) it accumulates the exact conditional probability mass and
/// the phi x psi weighted mass. Ground truth for the fast estimators; only
/// viable on tiny instances.
struct TracingEnumeration {
  int horizon = 0;
  std::unordered_map<std::uint64_t, double> mass;      // P(pattern = b | A, zeta)
  std::unordered_map<std::uint64_t, double> weighted;  // E[1{pattern=b} phi psi | A, zeta]
  std::vector<double> pair_mass;  // per terminal pair (i * N_n + j): total K2 path probability
  long long paths = 0;
};

namespace detail {

inline void check_enum_size(const std::vector<int>& counts, double guard) {
  double prod = 1.0;
  for (int np : counts) prod *= np;
  if (prod > guard)
    throw std::runtime_error("tracing enumeration refused: instance too large");
  if (counts.size() > 62)
    throw std::runtime_error("tracing enumeration refused: horizon too long");
}

}  // namespace detail

template <class State>
TracingEnumeration enumerate_tracing(const ParticleHistory<State>& h,
                                     const std::vector<double>& phi,
                                     const std::vector<double>& psi,
                                     double path_guard = 1e6) {
  detail::check_enum_size(h.counts, path_guard);
  const int n = h.horizon();
  const int nn = h.counts[static_cast<std::size_t>(n)];

  // normalized categorical weights at each time
  std::vector<std::vector<double>> w(static_cast<std::size_t>(n) + 1);
  for (int p = 0; p <= n; ++p) {
    const auto& lg = h.log_potentials[static_cast<std::size_t>(p)];
    double hi = lg[0];
    for (double v : lg) hi = std::max(hi, v);
    double tot = 0.0;
    w[static_cast<std::size_t>(p)].resize(lg.size());
    for (std::size_t l = 0; l < lg.size(); ++l) {
      w[static_cast<std::size_t>(p)][l] = std::exp(lg[l] - hi);
      tot += w[static_cast<std::size_t>(p)][l];
    }
    for (double& v : w[static_cast<std::size_t>(p)]) v /= tot;
  }

  TracingEnumeration out;
  out.horizon = n;
  out.pair_mass.assign(static_cast<std::size_t>(nn) * static_cast<std::size_t>(nn), 0.0);
  const double pair_prob = 1.0 / (static_cast<double>(nn) * nn);

  std::vector<int> k1(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i < nn; ++i) {
    k1[static_cast<std::size_t>(n)] = i;
    for (int p = n; p > 0; --p)
      k1[static_cast<std::size_t>(p) - 1] =
          h.ancestors[static_cast<std::size_t>(p) - 1]
                     [static_cast<std::size_t>(k1[static_cast<std::size_t>(p)])];
    for (int j = 0; j < nn; ++j) {
      const double val = phi[static_cast<std::size_t>(i)] * psi[static_cast<std::size_t>(j)];
      double pair_total = 0.0;
      // depth-first over the K2 probability tree
      struct Frame {
        int p;
        int k2;
        double prob;
        std::uint64_t bits;
      };
      std::vector<Frame> stack{{n, j, 1.0, 0}};
      while (!stack.empty()) {
        Frame f = stack.back();
        stack.pop_back();
        if (++out.paths > static_cast<long long>(path_guard) * 4)
          throw std::runtime_error("tracing enumeration refused: path guard hit");
        const bool meet = f.k2 == k1[static_cast<std::size_t>(f.p)];
        if (meet) f.bits |= std::uint64_t{1} << f.p;
        if (f.p == 0) {
          out.mass[f.bits] += pair_prob * f.prob;
          out.weighted[f.bits] += pair_prob * f.prob * val;
          pair_total += f.prob;
          continue;
        }
        if (!meet) {
          stack.push_back({f.p - 1,
                           h.ancestors[static_cast<std::size_t>(f.p) - 1]
                                      [static_cast<std::size_t>(f.k2)],
                           f.prob, f.bits});
        } else {
          const auto& wp = w[static_cast<std::size_t>(f.p) - 1];
          for (std::size_t l = 0; l < wp.size(); ++l)
            stack.push_back({f.p - 1, static_cast<int>(l), f.prob * wp[l], f.bits});
        }
      }
      out.pair_mass[static_cast<std::size_t>(i) * static_cast<std::size_t>(nn) +
                    static_cast<std::size_t>(j)] = pair_total;
    }
  }
  return out;
}

/// Eq.-(12) scale factor for a coincidence pattern b.
inline double mu_b_scale(const std::vector<int>& counts, std::uint64_t b) {
  double prod = 1.0;
  for (std::size_t p = 0; p < counts.size(); ++p) {
    const double np = counts[p];
    prod *= (b >> p) & 1 ? np : np / (np - 1.0);
  }
  return prod;
}

/// Brute-force mu_b^N(phi (x) psi) from the enumeration.
template <class State>
double brute_force_mu(const ParticleHistory<State>& h, std::uint64_t b,
                      const std::vector<double>& phi,
                      const std::vector<double>& psi,
                      const TracingEnumeration* pre = nullptr) {
  TracingEnumeration local;
  if (!pre) {
    local = enumerate_tracing(h, phi, psi);
    pre = &local;
  }
  const double g = std::exp(h.log_gamma_one(h.horizon()));
  const auto it = pre->weighted.find(b);
  const double wmass = it == pre->weighted.end() ? 0.0 : it->second;
  return mu_b_scale(h.counts, b) * g * g * wmass;
}

inline std::uint64_t pattern_ep(int p) { return std::uint64_t{1} << p; }

}  // namespace smcvar
