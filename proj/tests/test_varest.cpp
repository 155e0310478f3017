#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "smcvar/filter.hpp"
#include "smcvar/models.hpp"
#include "smcvar/oracle_enum.hpp"
#include "smcvar/varest.hpp"

using namespace smcvar;

namespace {

// O(N^2) reference for V_n^N straight from its definition
template <class State, class Phi>
double naive_V(const ParticleHistory<State>& h, Phi&& phi) {
  const auto n = static_cast<std::size_t>(h.horizon());
  const auto& eve = h.eves[n];
  const double nn = h.counts[n];
  double tot = 0.0, cross = 0.0;
  std::vector<double> pv;
  for (const auto& x : h.states[n]) pv.push_back(phi(x));
  for (double v : pv) tot += v;
  for (std::size_t i = 0; i < pv.size(); ++i)
    for (std::size_t j = 0; j < pv.size(); ++j)
      if (eve[i] != eve[j]) cross += pv[i] * pv[j];
  double prod = 1.0;
  for (std::size_t p = 0; p + 1 < h.counts.size(); ++p)
    prod *= h.counts[p] / (h.counts[p] - 1.0);
  const double eta = tot / nn;
  return eta * eta - prod * cross / (nn * (nn - 1.0));
}

ParticleHistory<double> tiny_run(std::uint64_t seed, int n, std::vector<double> c,
                                 int base) {
  LgssmParams p;
  p.observations.assign(static_cast<std::size_t>(n) + 1, 0.0);
  for (int t = 0; t <= n; ++t)
    p.observations[(std::size_t)t] = std::cos(0.9 * t) - 0.1;
  AllocationPlan plan;
  plan.c = c.empty() ? std::vector<double>((std::size_t)n + 1, 1.0) : std::move(c);
  plan.base_size = base;
  return run_filter(make_lgssm(p), plan, seed);
}

}  // namespace

TEST_CASE("worked genealogy: V(1) = -1") {
  std::vector<std::vector<double>> states = {
      {0, 0, 0, 0}, {0, 0, 0}, {0, 0, 0}, {0, 0, 0, 0}};
  std::vector<std::vector<int>> ancestors = {{0, 1, 3}, {1, 0, 1}, {2, 1, 1, 2}};
  std::vector<std::vector<double>> logg = {
      {0, 0, 0, 0}, {0, 0, 0}, {0, 0, 0}, {0, 0, 0, 0}};
  const auto h = history_from_genealogy(states, ancestors, logg);
  CHECK(compute_V(h, [](double) { return 1.0; }) == -1.0);
}

TEST_CASE("V matches the O(N^2) definition on time-varying runs") {
  auto phi = [](double x) { return x; };
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    const auto h = tiny_run(seed, 4, {1.0, 2.0, 1.0, 1.5, 1.0}, 9);
    CHECK(compute_V(h, phi) == doctest::Approx(naive_V(h, phi)).epsilon(1e-12));
    const auto t = terminal_view(h);
    CHECK(compute_V(t, phi) == doctest::Approx(naive_V(h, phi)).epsilon(1e-12));
  }
}

TEST_CASE("V can be negative and is not clipped") {
  bool saw_negative = false;
  auto one = [](double) { return 1.0; };
  for (std::uint64_t seed = 0; seed < 50 && !saw_negative; ++seed)
    saw_negative = compute_V(tiny_run(seed, 3, {}, 4), one) < 0.0;
  CHECK(saw_negative);
}

TEST_CASE("mu_{0_n} and mu_{e_p} agree with brute-force tracing enumeration") {
  auto phi = [](double x) { return x + 0.3; };
  auto psi = [](double x) { return 1.0 - x; };
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    const auto h = tiny_run(seed, 3, {1.0, 1.5, 1.0, 1.0}, 3);
    const auto n = (std::size_t)h.horizon();
    const auto pv = detail::phi_values(h.states[n], phi);
    const auto qv = detail::phi_values(h.states[n], psi);
    const auto pre = enumerate_tracing(h, pv, qv);

    const double mu0 = compute_mu0N(h, phi, psi);
    const double mu0_bf = brute_force_mu(h, 0, pv, qv, &pre);
    CHECK(mu0 == doctest::Approx(mu0_bf).epsilon(1e-11));

    const auto mue = compute_mu_epN_all(h, phi, psi);
    for (int p = 0; p <= h.horizon(); ++p) {
      const double bf = brute_force_mu(h, pattern_ep(p), pv, qv, &pre);
      CHECK(mue[(std::size_t)p] == doctest::Approx(bf).epsilon(1e-11));
    }
  }
}

TEST_CASE("v_{p,n}^N is (mu_{e_p} - mu_0) / gamma(1)^2") {
  auto phi = [](double x) { return x; };
  const auto h = tiny_run(21, 2, {}, 4);
  const double g = std::exp(h.log_gamma_one(h.horizon()));
  const auto v = compute_vpnN_all(h, phi);
  const auto mue = compute_mu_epN_all(h, phi, phi);
  const double mu0 = compute_mu0N(h, phi);
  for (int p = 0; p <= h.horizon(); ++p)
    CHECK(v[(std::size_t)p] ==
          doctest::Approx((mue[(std::size_t)p] - mu0) / (g * g)).epsilon(1e-10));
  CHECK(compute_vnN(h, phi) ==
        doctest::Approx(v[0] + v[1] + v[2]).epsilon(1e-12));
}

TEST_CASE("coincidence measures reconstruct the squared estimate") {
  // summing the conditional pattern masses weighted by their scale inverse
  // recovers eta(phi) eta(psi); with the gamma factor this is Eq. (13)
  auto phi = [](double x) { return x; };
  auto psi = [](double x) { return x * x; };
  const auto h = tiny_run(31, 3, {1.0, 1.0, 1.5, 1.0}, 3);
  const auto n = (std::size_t)h.horizon();
  const auto pv = detail::phi_values(h.states[n], phi);
  const auto qv = detail::phi_values(h.states[n], psi);
  const auto pre = enumerate_tracing(h, pv, qv);
  double recon = 0.0, mass = 0.0;
  for (const auto& [b, wmass] : pre.weighted) recon += wmass;
  for (const auto& [b, m] : pre.mass) mass += m;
  const auto pe = point_estimates(h, phi);
  const auto pe2 = point_estimates(h, psi);
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(recon == doctest::Approx(pe.eta * pe2.eta).epsilon(1e-10));
}

TEST_CASE("horizon zero: V reduces to the independent-sample form") {
  const auto h = tiny_run(41, 0, {}, 20);
  auto phi = [](double x) { return x; };
  const auto n = (std::size_t)0;
  const auto pv = detail::phi_values(h.states[n], phi);
  double s = 0.0, s2 = 0.0;
  const double nn = 20.0;
  for (double v : pv) {
    s += v;
    s2 += v * v;
  }
  const double eta = s / nn;
  // with all-distinct roots: V = eta^2 - (sum^2 - sum of squares)/(N(N-1))
  const double expect = eta * eta - (s * s - s2) / (nn * (nn - 1.0));
  CHECK(compute_V(h, phi) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(compute_vpnN(h, 0, phi) == doctest::Approx(nn * expect).epsilon(1e-12));
}

TEST_CASE("horizon zero: v_{0,0}/N equals V exactly") {
  auto phi = [](double x) { return x * x - 0.5; };
  for (std::uint64_t seed : {91u, 92u, 93u}) {
    const auto h = tiny_run(seed, 0, {}, 11);
    CHECK(compute_vpnN(h, 0, phi) / 11.0 ==
          doctest::Approx(compute_V(h, phi)).epsilon(1e-12));
  }
}

TEST_CASE("degenerate genealogy: single surviving family") {
  // every particle descends from root 0, so the cross term vanishes and
  // V(phi) = eta(phi)^2 exactly
  std::vector<std::vector<double>> states = {{0.5, -1.0, 2.0}, {1.0, 2.0, 3.0}};
  std::vector<std::vector<int>> ancestors = {{0, 0, 0}};
  std::vector<std::vector<double>> logg = {{0, 0, 0}, {0, 0, 0}};
  const auto h = history_from_genealogy(states, ancestors, logg);
  auto phi = [](double x) { return x; };
  CHECK(compute_V(h, phi) == doctest::Approx(4.0).epsilon(1e-14));
}

TEST_CASE("constant potentials make the hat estimators equal the plain ones") {
  std::vector<std::vector<double>> states = {{0.4, -0.2, 1.1, 0.6},
                                             {0.9, -1.2, 0.1, 0.7}};
  std::vector<std::vector<int>> ancestors = {{0, 1, 1, 3}};
  std::vector<std::vector<double>> logg = {{-2, -2, -2, -2}, {-2, -2, -2, -2}};
  const auto h = history_from_genealogy(states, ancestors, logg);
  auto phi = [](double x) { return x; };
  const auto u = updated_estimators(h, phi);
  CHECK(u.V_hat == doctest::Approx(compute_V(h, phi)).epsilon(1e-12));
  const auto v = compute_vpnN_all(h, phi);
  CHECK(u.vpn_hat[0] == doctest::Approx(v[0]).epsilon(1e-12));
  CHECK(u.vpn_hat[1] == doctest::Approx(v[1]).epsilon(1e-12));
}

TEST_CASE("Chan-Lai estimator: equality and constant-N guard") {
  const auto h = tiny_run(51, 3, {}, 32);
  auto phi = [](double x) { return x; };
  const auto r = make_report(h, phi);
  double scale = 1.0;
  for (int q = 0; q <= 3; ++q) scale *= 32.0 / 31.0;
  CHECK(*r.chan_lai ==
        doctest::Approx(r.NV_hat_centered / scale).epsilon(1e-10));

  const auto hv = tiny_run(52, 2, {1.0, 2.0, 1.0}, 8);
  CHECK_THROWS(chan_lai_estimator(hv, phi));
}

TEST_CASE("family diagnostics invariants") {
  const auto h = tiny_run(61, 4, {}, 64);
  auto phi = [](double x) { return x; };
  const auto d = corollary1_diagnostics(h, phi);
  double csum = 0.0, cdsum = 0.0;
  for (std::size_t i = 0; i < d.descendant_counts.size(); ++i) {
    csum += d.descendant_counts[i];
    cdsum += d.descendant_counts[i] * d.deviations[i];
  }
  CHECK(csum == doctest::Approx(64.0).epsilon(1e-12));
  CHECK(cdsum == doctest::Approx(0.0).scale(64.0).epsilon(1e-12));

  const auto hv = tiny_run(62, 2, {1.0, 2.0, 1.0}, 8);
  CHECK_THROWS(corollary1_diagnostics(hv, phi));
}

TEST_CASE("bias estimate vanishes for constant test functions") {
  const auto h = tiny_run(71, 3, {}, 16);
  const double b = bias_estimate(h, [](double) { return 3.7; });
  CHECK(b == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  const auto hv = tiny_run(72, 2, {1.0, 2.0, 1.0}, 8);
  CHECK_THROWS(bias_estimate(hv, [](double x) { return x; }));
}

TEST_CASE("report internal consistency") {
  const auto h = tiny_run(81, 3, {}, 24);
  auto phi = [](double x) { return x; };
  const auto r = make_report(h, phi);
  CHECK(r.horizon == 3);
  CHECK(r.base_size == 24);
  CHECK(r.NV == doctest::Approx(24.0 * r.V).epsilon(1e-14));
  CHECK(r.vpn.size() == 4);
  double vn = 0.0;
  for (double v : r.vpn) vn += v;  // c = 1 everywhere
  CHECK(r.vn == doctest::Approx(vn).epsilon(1e-12));
  CHECK(r.V == doctest::Approx(compute_V(h, phi)).epsilon(1e-14));
  CHECK(r.bias.has_value());
  CHECK(r.count_statistic.has_value());
}
