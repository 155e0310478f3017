#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "smcvar/filter.hpp"
#include "smcvar/models.hpp"
#include "smcvar/oracle_enum.hpp"
#include "smcvar/oracle_gauss.hpp"

using namespace smcvar;

namespace {

ParticleHistory<double> tiny_run(std::uint64_t seed, int n, int base) {
  LgssmParams p;
  p.observations.assign((std::size_t)n + 1, 0.0);
  for (int t = 0; t <= n; ++t) p.observations[(std::size_t)t] = 0.5 * t - 0.4;
  return run_filter(make_lgssm(p), AllocationPlan::uniform(n, base), seed);
}

// Q_{p,n}(f)(x) = G_p(x) \int M_{p+1}(x, dx') Q_{p+1,n}(f)(x') on a grid,
// by trapezoid quadrature; a slow but independent reference.
struct GridFk {
  std::vector<double> xs;
  LgssmParams p;

  double kernel(double x, double xp) const {
    return std::exp(log_normal_pdf(xp, p.a * x, p.transition_var));
  }
  double pot(int t, double x) const {
    return std::exp(log_normal_pdf(p.observations[(std::size_t)t], x,
                                   p.observation_var));
  }
  std::vector<double> backward(int n, const std::vector<double>& f_terminal) const {
    std::vector<double> q = f_terminal;  // Q_{n,n}(f) = f
    const double dx = xs[1] - xs[0];
    for (int t = n - 1; t >= 0; --t) {
      std::vector<double> next((std::size_t)xs.size());
      for (std::size_t i = 0; i < xs.size(); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < xs.size(); ++j) {
          const double w = (j == 0 || j + 1 == xs.size()) ? 0.5 : 1.0;
          acc += w * kernel(xs[i], xs[j]) * q[j];
        }
        next[i] = pot(t, xs[i]) * acc * dx;
      }
      q = std::move(next);
    }
    return q;
  }
  // eta_p moments under the exact predictive law
  double integrate(const std::vector<double>& f, double m, double v) const {
    const double dx = xs[1] - xs[0];
    double acc = 0.0;
    for (std::size_t j = 0; j < xs.size(); ++j) {
      const double w = (j == 0 || j + 1 == xs.size()) ? 0.5 : 1.0;
      acc += w * f[j] * std::exp(log_normal_pdf(xs[j], m, v));
    }
    return acc * dx;
  }
};

}  // namespace

TEST_CASE("tracing enumeration: pair masses and total mass are 1") {
  const auto h = tiny_run(3, 3, 3);
  const auto n = (std::size_t)h.horizon();
  std::vector<double> ones(h.states[n].size(), 1.0);
  const auto e = enumerate_tracing(h, ones, ones);
  for (double pm : e.pair_mass) CHECK(pm == doctest::Approx(1.0).epsilon(1e-12));
  double tot = 0.0;
  for (const auto& [b, m] : e.mass) tot += m;
  CHECK(tot == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("no-coincidence mass equals the distinct-root pair frequency") {
  // a trace pair avoids every coincidence exactly when the two terminal
  // particles descend from different roots
  for (std::uint64_t seed : {5u, 6u, 7u}) {
    const auto h = tiny_run(seed, 3, 3);
    const auto n = (std::size_t)h.horizon();
    std::vector<double> ones(h.states[n].size(), 1.0);
    const auto e = enumerate_tracing(h, ones, ones);
    int distinct = 0;
    const auto& eve = h.eves[n];
    for (std::size_t i = 0; i < eve.size(); ++i)
      for (std::size_t j = 0; j < eve.size(); ++j)
        if (eve[i] != eve[j]) ++distinct;
    const double nn = (double)eve.size();
    const auto it = e.mass.find(0);
    const double m0 = it == e.mass.end() ? 0.0 : it->second;
    CHECK(m0 == doctest::Approx(distinct / (nn * nn)).epsilon(1e-12));
  }
}

TEST_CASE("two-particle one-step genealogy enumerated by hand") {
  // N = (2, 2), equal weights, ancestors (0, 1): the only coincidences are
  // K1_1 = K2_1 (prob 1/2, then a fresh uniform draw at time 0 coincides
  // with prob 1/2) and the inherited time-0 coincidence.
  std::vector<std::vector<double>> states = {{0.0, 1.0}, {0.0, 1.0}};
  std::vector<std::vector<int>> ancestors = {{0, 1}};
  std::vector<std::vector<double>> logg = {{0, 0}, {0, 0}};
  const auto h = history_from_genealogy(states, ancestors, logg);
  std::vector<double> ones(2, 1.0);
  const auto e = enumerate_tracing(h, ones, ones);
  // patterns (as bitmasks over times 0..1): 00 -> 1/2, 11 -> 1/4, 10 -> 1/4
  CHECK(e.mass.at(0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(e.mass.at(0b11) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(e.mass.at(0b10) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(e.mass.size() == 3);
}

TEST_CASE("Kalman filter: single observation evidence") {
  LgssmParams p;
  p.observations = {0.7};
  const auto kf = kalman_filter(p);
  CHECK(kf.log_gamma_hat_one() ==
        doctest::Approx(log_normal_pdf(0.7, 0.0, 2.0)).epsilon(1e-12));
  CHECK(kf.pred_var[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(kf.filt_var[0] == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("Kalman filter: a = 0 decouples the steps") {
  LgssmParams p;
  p.a = 0.0;
  p.transition_var = 0.6;
  p.observation_var = 1.4;
  p.initial_var = 0.9;
  p.observations = {0.3, -1.0, 0.8};
  const auto kf = kalman_filter(p);
  double expect = log_normal_pdf(0.3, 0.0, 0.9 + 1.4);
  expect += log_normal_pdf(-1.0, 0.0, 0.6 + 1.4);
  expect += log_normal_pdf(0.8, 0.0, 0.6 + 1.4);
  CHECK(kf.log_gamma_hat_one() == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("Gaussian flow agrees with the Kalman recursion") {
  LgssmParams p;
  p.a = 0.85;
  p.transition_var = 0.7;
  p.observation_var = 1.2;
  p.initial_var = 2.0;
  p.observations = {0.3, -0.6, 1.4, 0.2, -0.9};
  const auto kf = kalman_filter(p);
  const auto flow = gauss_flow(lgssm_reference(p));
  for (int t = 0; t <= 4; ++t) {
    CHECK(flow.mean[(std::size_t)t] ==
          doctest::Approx(kf.pred_mean[(std::size_t)t]).epsilon(1e-10));
    CHECK(flow.var[(std::size_t)t] ==
          doctest::Approx(kf.pred_var[(std::size_t)t]).epsilon(1e-10));
    CHECK(flow.log_incr[(std::size_t)t] ==
          doctest::Approx(kf.log_incr[(std::size_t)t]).epsilon(1e-10));
  }
}

TEST_CASE("adapted reference reproduces the updated normalizing constant") {
  LgssmParams p;
  p.a = 0.9;
  p.observations = {0.4, -1.1, 0.7, 0.1};
  const auto kf = kalman_filter(p);
  const auto flow = gauss_flow(lgssm_adapted_reference(p));
  // gamma-check of the transform: the adapted model's gamma_n(1) equals the
  // source model's updated normalizing constant
  CHECK(flow.log_gamma_one(3) ==
        doctest::Approx(kf.log_gamma_hat_one()).epsilon(1e-10));
}

TEST_CASE("exact v_{p,n}: boundary values") {
  LgssmParams p;
  p.observations = {0.4};
  CHECK(exact_vpn_lgssm(p, AffinePhi::one(), false)[0] ==
        doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  // v_{n,n}(phi) is the predictive variance of phi at time n
  LgssmParams q;
  q.a = 0.8;
  q.observations = {0.5, -0.2, 0.9};
  const auto v = exact_vpn_lgssm(q, AffinePhi::id(), false);
  const auto kf = kalman_filter(q);
  CHECK(v[2] == doctest::Approx(kf.pred_var[2]).epsilon(1e-10));
}

TEST_CASE("exact v_{p,n} agrees with grid quadrature") {
  LgssmParams p;
  p.a = 0.75;
  p.transition_var = 0.8;
  p.observation_var = 1.1;
  p.initial_var = 1.3;
  p.observations = {0.6, -0.4, 1.0};
  const int n = 2;

  GridFk grid;
  grid.p = p;
  const int gpts = 1201;
  for (int i = 0; i < gpts; ++i)
    grid.xs.push_back(-12.0 + 24.0 * i / (gpts - 1));

  const auto kf = kalman_filter(p);
  const auto flow = gauss_flow(lgssm_reference(p));

  for (bool updated : {false, true}) {
    const auto phi = AffinePhi::id();
    std::vector<double> fterm(grid.xs.size()), oterm(grid.xs.size(), 1.0);
    for (std::size_t i = 0; i < grid.xs.size(); ++i) {
      fterm[i] = phi(grid.xs[i]);
      if (updated) fterm[i] *= grid.pot(n, grid.xs[i]);
    }
    const double eta_gn =
        updated ? std::exp(flow.log_incr[(std::size_t)n]) : 1.0;
    const auto exact = exact_vpn(lgssm_reference(p), phi, updated);

    double target;
    {
      // eta_n(f) under the predictive law, normalized for hat variants
      GridFk g2 = grid;
      target = g2.integrate(fterm, flow.mean[(std::size_t)n],
                            flow.var[(std::size_t)n]) /
               eta_gn;
    }
    for (int t = 0; t <= n; ++t) {
      // backward functions started at time n without the time-t potential
      // double-counted: Q_{t,n} applies G_t..G_{n-1} and the kernels
      std::vector<double> qf = fterm, q1 = oterm;
      for (int s = n - 1; s >= t; --s) {
        auto step = [&](std::vector<double>& f) {
          std::vector<double> out(grid.xs.size());
          const double dx = grid.xs[1] - grid.xs[0];
          for (std::size_t i = 0; i < grid.xs.size(); ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < grid.xs.size(); ++j) {
              const double w = (j == 0 || j + 1 == grid.xs.size()) ? 0.5 : 1.0;
              acc += w * grid.kernel(grid.xs[i], grid.xs[j]) * f[j];
            }
            out[i] = grid.pot(s, grid.xs[i]) * acc * dx;
          }
          f = std::move(out);
        };
        step(qf);
        step(q1);
      }
      std::vector<double> qf2(grid.xs.size());
      for (std::size_t i = 0; i < grid.xs.size(); ++i) qf2[i] = qf[i] * qf[i];
      const double num = grid.integrate(qf2, flow.mean[(std::size_t)t],
                                        flow.var[(std::size_t)t]);
      const double den = grid.integrate(q1, flow.mean[(std::size_t)t],
                                        flow.var[(std::size_t)t]);
      const double v_ref =
          num / (den * den * eta_gn * eta_gn) - target * target;
      CHECK(exact[(std::size_t)t] == doctest::Approx(v_ref).epsilon(1e-7));
    }
    (void)kf;
  }
}

TEST_CASE("exact filtered mean helper") {
  LgssmParams p;
  p.a = 0.9;
  p.observations = {0.4, -1.1, 0.7};
  const auto kf = kalman_filter(p);
  CHECK(exact_eta_hat_id(lgssm_reference(p)) ==
        doctest::Approx(kf.filt_mean[2]).epsilon(1e-12));
}

TEST_CASE("enumeration guards against oversized genealogies") {
  const auto h = tiny_run(9, 2, 3);
  const auto n = (std::size_t)h.horizon();
  std::vector<double> ones(h.states[n].size(), 1.0);
  CHECK_THROWS(enumerate_tracing(h, ones, ones, 2.0 /* tiny path guard */));
}
