#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <utility>
#include <vector>

#include "smcvar/model.hpp"

namespace smcvar {

inline double log_normal_pdf(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * var) + d * d / var);
}

/// Linear Gaussian state space model: X_0 ~ N(0, initial_var),
/// X_p = a X_{p-1} + N(0, transition_var), G_p(x) = N(y_p; x, observation_var).
struct LgssmParams {
  double a = 0.9;
  double transition_var = 1.0;
  double observation_var = 1.0;
  double initial_var = 1.0;
  std::vector<double> observations;  // y_0..y_n

  void validate() const {
    if (!(transition_var > 0) || !(observation_var > 0) || !(initial_var > 0))
      throw std::invalid_argument("lgssm: variances must be positive");
    if (observations.empty())
      throw std::invalid_argument("lgssm: at least one observation required");
  }
};

inline FeynmanKacModel<double> make_lgssm(const LgssmParams& params) {
  params.validate();
  FeynmanKacModel<double> m;
  m.horizon = static_cast<int>(params.observations.size()) - 1;
  const double iv = params.initial_var, tv = params.transition_var,
               ov = params.observation_var, a = params.a;
  const std::vector<double> y = params.observations;
  m.initial_sampler = [iv](Rng& rng) {
    return std::normal_distribution<double>(0.0, std::sqrt(iv))(rng);
  };
  m.transition_sampler = [a, tv](int, double x, Rng& rng) {
    return std::normal_distribution<double>(a * x, std::sqrt(tv))(rng);
  };
  m.log_potential = [y, ov](int p, double x) {
    return log_normal_pdf(y[static_cast<std::size_t>(p)], x, ov);
  };
  m.log_potential_bound = -0.5 * std::log(2.0 * std::numbers::pi * ov);
  return m;
}

/// Stochastic volatility model: X_0 ~ N(0, sigma^2/(1-rho^2)),
/// X_p = rho X_{p-1} + N(0, sigma^2), G_p(x) = N(y_p; 0, beta^2 exp(x)).
struct SvParams {
  double rho = 0.95;
  double sigma = 0.25;
  double beta = 0.5;
  std::vector<double> observations;

  void validate() const {
    if (!(std::abs(rho) < 1.0))
      throw std::invalid_argument("sv: |rho| must be < 1");
    if (!(sigma > 0) || !(beta > 0))
      throw std::invalid_argument("sv: sigma and beta must be positive");
    if (observations.empty())
      throw std::invalid_argument("sv: at least one observation required");
  }
  double initial_var() const { return sigma * sigma / (1.0 - rho * rho); }
};

inline FeynmanKacModel<double> make_sv(const SvParams& params) {
  params.validate();
  FeynmanKacModel<double> m;
  m.horizon = static_cast<int>(params.observations.size()) - 1;
  const double iv = params.initial_var(), rho = params.rho,
               s = params.sigma, b2 = params.beta * params.beta;
  const std::vector<double> y = params.observations;
  m.initial_sampler = [iv](Rng& rng) {
    return std::normal_distribution<double>(0.0, std::sqrt(iv))(rng);
  };
  m.transition_sampler = [rho, s](int, double x, Rng& rng) {
    return std::normal_distribution<double>(rho * x, s)(rng);
  };
  m.log_potential = [y, b2](int p, double x) {
    const double yp = y[static_cast<std::size_t>(p)];
    return -0.5 * (std::log(2.0 * std::numbers::pi * b2) + x) -
           yp * yp * std::exp(-x) / (2.0 * b2);
  };
  // sup_x log G_p is attained at exp(x) = y_p^2 / beta^2; |y_p| is floored to
  // keep the declared bound finite when an observation is exactly zero.
  double bound = -std::numeric_limits<double>::infinity();
  for (double yp : y) {
    const double ay = std::max(std::abs(yp), 1e-12);
    bound = std::max(bound, -0.5 * (std::log(2.0 * std::numbers::pi * ay * ay) + 1.0));
  }
  m.log_potential_bound = bound;
  return m;
}

/// Tempered SMC sampler bridging an exactly-samplable density pi0 to a
/// target pi1 along a ladder 0 = beta_0 < ... < beta_n = 1, with
/// G_p = (pi1/pi0)^{beta_{p+1}-beta_p} and M_p given by k sweeps of
/// random-walk Metropolis invariant for pi0^{1-beta_p} pi1^{beta_p}.
struct TemperedSamplerParams {
  std::function<double(double)> log_pi0;
  std::function<double(double)> log_pi1;
  std::function<double(Rng&)> sample_pi0;
  std::vector<double> ladder;      // beta_0..beta_n
  std::vector<double> proposal_sd;  // tau_1..tau_n
  int sweeps = 10;                 // k
  // grid over which the declared potential bound is computed
  double bound_grid_halfwidth = 50.0;

  void validate() const {
    if (!log_pi0 || !log_pi1 || !sample_pi0)
      throw std::invalid_argument("tempered: densities and pi0 sampler required");
    if (ladder.size() < 2)
      throw std::invalid_argument("tempered: ladder needs at least two entries");
    for (std::size_t i = 1; i < ladder.size(); ++i)
      if (!(ladder[i] > ladder[i - 1]))
        throw std::invalid_argument("tempered: ladder must be strictly increasing");
    if (std::abs(ladder.front()) > 1e-12 || std::abs(ladder.back() - 1.0) > 1e-12)
      throw std::invalid_argument("tempered: ladder must run from 0 to 1");
    if (proposal_sd.size() + 1 != ladder.size())
      throw std::invalid_argument("tempered: need one proposal sd per kernel");
    for (double t : proposal_sd)
      if (!(t > 0)) throw std::invalid_argument("tempered: proposal sd must be positive");
    if (sweeps < 1) throw std::invalid_argument("tempered: sweeps must be >= 1");
  }
};

inline FeynmanKacModel<double> make_tempered_sampler(
    const TemperedSamplerParams& params) {
  params.validate();
  FeynmanKacModel<double> m;
  const int n = static_cast<int>(params.ladder.size()) - 1;
  m.horizon = n;
  auto lp0 = params.log_pi0;
  auto lp1 = params.log_pi1;
  const std::vector<double> beta = params.ladder;
  const std::vector<double> tau = params.proposal_sd;
  const int k = params.sweeps;
  m.initial_sampler = params.sample_pi0;
  m.transition_sampler = [lp0, lp1, beta, tau, k](int p, double x, Rng& rng) {
    const double b = beta[static_cast<std::size_t>(p)];
    auto log_target = [&](double z) { return (1.0 - b) * lp0(z) + b * lp1(z); };
    std::normal_distribution<double> step(0.0, tau[static_cast<std::size_t>(p - 1)]);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double cur = x;
    double cur_lt = log_target(cur);
    for (int it = 0; it < k; ++it) {
      const double prop = cur + step(rng);
      const double prop_lt = log_target(prop);
      if (std::log(unif(rng)) < prop_lt - cur_lt) {
        cur = prop;
        cur_lt = prop_lt;
      }
    }
    return cur;
  };
  m.log_potential = [lp0, lp1, beta, n](int p, double x) {
    if (p == n) return 0.0;  // final increment: G_n is constant 1
    const double inc = beta[static_cast<std::size_t>(p) + 1] -
                       beta[static_cast<std::size_t>(p)];
    return inc * (lp1(x) - lp0(x));
  };
  // Declared bound from a grid scan of the log ratio, with a safety margin
  // for values between grid points.
  double max_ratio = 0.0;
  const int grid = 20001;
  for (int i = 0; i < grid; ++i) {
    const double x = -params.bound_grid_halfwidth +
                     2.0 * params.bound_grid_halfwidth * i / (grid - 1);
    max_ratio = std::max(max_ratio, lp1(x) - lp0(x));
  }
  double max_inc = 0.0;
  for (std::size_t p = 0; p + 1 < beta.size(); ++p)
    max_inc = std::max(max_inc, beta[p + 1] - beta[p]);
  m.log_potential_bound = max_inc * max_ratio + 0.5;
  return m;
}

/// The bimodal tempering instance used by the sampler experiments:
/// pi0 = N(0, 10^2), pi1 = 0.3 N(-10, 0.1^2) + 0.7 N(10, 0.2^2), an 11-step
/// ladder and a decreasing proposal schedule.
inline TemperedSamplerParams bimodal_tempering_params(int sweeps = 10) {
  TemperedSamplerParams p;
  p.log_pi0 = [](double x) { return log_normal_pdf(x, 0.0, 100.0); };
  p.log_pi1 = [](double x) {
    const double a = std::log(0.3) + log_normal_pdf(x, -10.0, 0.01);
    const double b = std::log(0.7) + log_normal_pdf(x, 10.0, 0.04);
    const double hi = std::max(a, b);
    return hi + std::log1p(std::exp(std::min(a, b) - hi));
  };
  p.sample_pi0 = [](Rng& rng) {
    return std::normal_distribution<double>(0.0, 10.0)(rng);
  };
  p.ladder = {0, 0.0005, 0.001, 0.0025, 0.005, 0.01, 0.025, 0.05, 0.1, 0.25, 0.5, 1};
  p.proposal_sd = {10, 9, 8, 7, 6, 5, 4, 3, 2, 1, 1};
  p.sweeps = sweeps;
  return p;
}

/// Ingredients the caller must supply to fully adapt a model: the exact
/// one-step marginals M_{p+1}(G_{p+1}) and samplers for the twisted kernels.
template <class State>
struct FullyAdaptedInputs {
  // log M_{p+1}(G_{p+1})(x) for p in [0, n-1]
  std::function<double(int, const State&)> log_marginal_next;
  double log_marginal0 = 0.0;  // log M_0(G_0)
  std::function<State(Rng&)> twisted_initial;
  std::function<State(int, const State&, Rng&)> twisted_transition;
  double log_potential_bound = std::numeric_limits<double>::infinity();
};

/// Builds the fully-adapted transform of `model`: the returned model's
/// unnormalized flow coincides with the updated flow of the source model.
template <class State>
FeynmanKacModel<State> make_fully_adapted(const FeynmanKacModel<State>& model,
                                          const FullyAdaptedInputs<State>& in) {
  if (!in.log_marginal_next || !in.twisted_initial || !in.twisted_transition)
    throw std::invalid_argument("fully adapted: marginals and samplers required");
  FeynmanKacModel<State> out;
  const int n = model.horizon;
  out.horizon = n;
  out.initial_sampler = in.twisted_initial;
  out.transition_sampler = in.twisted_transition;
  auto marg = in.log_marginal_next;
  const double lm0 = in.log_marginal0;
  out.log_potential = [marg, lm0, n](int p, const State& x) {
    if (p == n) return 0.0;  // terminal potential left flat
    const double lg = marg(p, x);
    return p == 0 ? lg + lm0 : lg;
  };
  out.log_potential_bound = in.log_potential_bound;
  return out;
}

/// Exact fully-adapted inputs for the linear Gaussian model, where the
/// one-step marginals and twisted kernels are available in closed form.
inline FullyAdaptedInputs<double> lgssm_fully_adapted_inputs(
    const LgssmParams& params) {
  params.validate();
  const double a = params.a, tv = params.transition_var,
               ov = params.observation_var, iv = params.initial_var;
  const std::vector<double> y = params.observations;
  FullyAdaptedInputs<double> in;
  in.log_marginal_next = [a, tv, ov, y](int p, double x) {
    return log_normal_pdf(y[static_cast<std::size_t>(p) + 1], a * x, tv + ov);
  };
  in.log_marginal0 = log_normal_pdf(y[0], 0.0, iv + ov);
  // M_0 G_0-twisted initial: conjugate combination of prior and likelihood
  const double post0_var = 1.0 / (1.0 / iv + 1.0 / ov);
  const double post0_mean = post0_var * y[0] / ov;
  in.twisted_initial = [post0_mean, post0_var](Rng& rng) {
    return std::normal_distribution<double>(post0_mean, std::sqrt(post0_var))(rng);
  };
  const double tw_var = 1.0 / (1.0 / tv + 1.0 / ov);
  in.twisted_transition = [a, tv, ov, tw_var, y](int p, double x, Rng& rng) {
    const double mean = tw_var * (a * x / tv + y[static_cast<std::size_t>(p)] / ov);
    return std::normal_distribution<double>(mean, std::sqrt(tw_var))(rng);
  };
  double bound = 0.0;
  for (std::size_t p = 1; p < y.size(); ++p)
    bound = std::max(bound, -0.5 * std::log(2.0 * std::numbers::pi * (tv + ov)));
  in.log_potential_bound = std::max(bound, in.log_marginal0 + bound) + 1e-9;
  return in;
}

inline FeynmanKacModel<double> make_lgssm_fully_adapted(const LgssmParams& params) {
  return make_fully_adapted(make_lgssm(params), lgssm_fully_adapted_inputs(params));
}

}  // namespace smcvar
