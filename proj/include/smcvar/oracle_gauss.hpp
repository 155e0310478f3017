#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "smcvar/models.hpp"

namespace smcvar {

/// Gaussian kernel N(a x + b, var); the time-0 entry is the initial law
/// (a = 0).
struct GaussKernel {
  double a = 0;
  double b = 0;
  double var = 1;
};

/// Potential of the form exp(log_c) * exp(-(x - mean)^2 / (2 var)), or the
/// constant exp(log_c) when has_gauss is false.
struct GaussPotentialRef {
  double log_c = 0;
  bool has_gauss = false;
  double mean = 0;
  double var = 1;
};

/// A Feynman--Kac model with Gaussian kernels and Gaussian-form potentials:
/// every flow and backward quantity is available in closed form.
struct LinearGaussFk {
  std::vector<GaussKernel> kernels;        // size n + 1
  std::vector<GaussPotentialRef> potentials;  // size n + 1
  int horizon() const { return static_cast<int>(kernels.size()) - 1; }
};

inline LinearGaussFk lgssm_reference(const LgssmParams& params) {
  params.validate();
  LinearGaussFk fk;
  const double lc = -0.5 * std::log(2.0 * std::numbers::pi * params.observation_var);
  fk.kernels.push_back({0.0, 0.0, params.initial_var});
  fk.potentials.push_back({lc, true, params.observations[0], params.observation_var});
  for (std::size_t p = 1; p < params.observations.size(); ++p) {
    fk.kernels.push_back({params.a, 0.0, params.transition_var});
    fk.potentials.push_back({lc, true, params.observations[p], params.observation_var});
  }
  return fk;
}

/// Fully-adapted transform of the linear Gaussian model, expressed in the
/// same closed form. Its unnormalized flow equals the source model's
/// updated flow.
inline LinearGaussFk lgssm_adapted_reference(const LgssmParams& params) {
  params.validate();
  const double a = params.a, tv = params.transition_var,
               ov = params.observation_var, iv = params.initial_var;
  const auto& y = params.observations;
  const int n = static_cast<int>(y.size()) - 1;
  LinearGaussFk fk;
  const double post0_var = 1.0 / (1.0 / iv + 1.0 / ov);
  fk.kernels.push_back({0.0, post0_var * y[0] / ov, post0_var});
  const double tw_var = 1.0 / (1.0 / tv + 1.0 / ov);
  for (int p = 1; p <= n; ++p)
    fk.kernels.push_back({tw_var * a / tv,
                          tw_var * y[static_cast<std::size_t>(p)] / ov, tw_var});
  const double sv = tv + ov;  // one-step marginal variance
  for (int p = 0; p <= n; ++p) {
    if (p == n) {
      fk.potentials.push_back({0.0, false, 0, 1});
      continue;
    }
    GaussPotentialRef g;
    const double yn = y[static_cast<std::size_t>(p) + 1];
    if (a != 0.0) {
      g = {-0.5 * std::log(2.0 * std::numbers::pi * sv), true, yn / a, sv / (a * a)};
    } else {
      g = {log_normal_pdf(yn, 0.0, sv), false, 0, 1};
    }
    if (p == 0) g.log_c += log_normal_pdf(y[0], 0.0, iv + ov);
    fk.potentials.push_back(g);
  }
  return fk;
}

/// Predictive flow moments eta_p = N(mean_p, var_p) and the normalizing
/// increments log eta_p(G_p).
struct GaussFlow {
  std::vector<double> mean, var;
  std::vector<double> log_incr;
  double log_gamma_one(int upto) const {
    double s = 0.0;
    for (int p = 0; p < upto; ++p) s += log_incr[static_cast<std::size_t>(p)];
    return s;
  }
};

namespace detail {

// eta(dx) potential(x): log mass and the reweighted Gaussian moments
struct CombinedGauss {
  double log_mass = 0;
  double mean = 0;
  double var = 1;
};

inline CombinedGauss combine_gauss(double m, double v, const GaussPotentialRef& g) {
  if (!g.has_gauss) return {g.log_c, m, v};
  const double t = v + g.var;
  CombinedGauss out;
  out.log_mass = g.log_c + 0.5 * std::log(g.var / t) - (m - g.mean) * (m - g.mean) / (2.0 * t);
  out.var = 1.0 / (1.0 / v + 1.0 / g.var);
  out.mean = out.var * (m / v + g.mean / g.var);
  return out;
}

}  // namespace detail

inline GaussFlow gauss_flow(const LinearGaussFk& fk) {
  GaussFlow flow;
  const int n = fk.horizon();
  double m = fk.kernels[0].b, v = fk.kernels[0].var;
  for (int p = 0; p <= n; ++p) {
    flow.mean.push_back(m);
    flow.var.push_back(v);
    const auto cg = detail::combine_gauss(m, v, fk.potentials[static_cast<std::size_t>(p)]);
    flow.log_incr.push_back(cg.log_mass);
    if (p < n) {
      const auto& k = fk.kernels[static_cast<std::size_t>(p) + 1];
      m = k.a * cg.mean + k.b;
      v = k.a * k.a * cg.var + k.var;
    }
  }
  return flow;
}

/// Kalman filter reference for the linear Gaussian model: predictive and
/// filtered moments, log-evidence increments via the prediction-error
/// decomposition.
struct KalmanReference {
  std::vector<double> pred_mean, pred_var, filt_mean, filt_var, log_incr;
  double log_gamma_one(int upto) const {
    double s = 0.0;
    for (int p = 0; p < upto; ++p) s += log_incr[static_cast<std::size_t>(p)];
    return s;
  }
  double log_gamma_hat_one() const {
    return log_gamma_one(static_cast<int>(log_incr.size()));
  }
};

inline KalmanReference kalman_filter(const LgssmParams& params) {
  params.validate();
  KalmanReference kf;
  double pm = 0.0, pv = params.initial_var;
  for (std::size_t p = 0; p < params.observations.size(); ++p) {
    const double y = params.observations[p];
    kf.pred_mean.push_back(pm);
    kf.pred_var.push_back(pv);
    kf.log_incr.push_back(log_normal_pdf(y, pm, pv + params.observation_var));
    const double gain = pv / (pv + params.observation_var);
    const double fm = pm + gain * (y - pm);
    const double fv = (1.0 - gain) * pv;
    kf.filt_mean.push_back(fm);
    kf.filt_var.push_back(fv);
    pm = params.a * fm;
    pv = params.a * params.a * fv + params.transition_var;
  }
  return kf;
}

/// An affine test function x -> slope x + intercept; covers 1, Id and their
/// centered variants.
struct AffinePhi {
  double slope = 0;
  double intercept = 1;
  static AffinePhi one() { return {0, 1}; }
  static AffinePhi id() { return {1, 0}; }
  static AffinePhi centered_id(double center) { return {1, -center}; }
  double operator()(double x) const { return slope * x + intercept; }
};

namespace detail {

// Backward semigroup coefficients: Q_{p,n}(phi)(x) = (slope x + intercept)
// * exp(log_c) * optional Gaussian factor.
struct BackCoef {
  GaussPotentialRef g;
  double slope = 0, intercept = 1;
};

inline BackCoef backward_step(const BackCoef& next, const GaussKernel& k,
                              const GaussPotentialRef& pot) {
  BackCoef out;
  if (!next.g.has_gauss) {
    out.g = {next.g.log_c, false, 0, 1};
    out.slope = next.slope * k.a;
    out.intercept = next.slope * k.b + next.intercept;
  } else {
    const double s = next.g.var, m = next.g.mean, t = s + k.var;
    out.g.log_c = next.g.log_c + 0.5 * std::log(s / t);
    if (k.a != 0.0) {
      out.g.has_gauss = true;
      out.g.mean = (m - k.b) / k.a;
      out.g.var = t / (k.a * k.a);
    } else {
      out.g.has_gauss = false;
      out.g.log_c -= (k.b - m) * (k.b - m) / (2.0 * t);
    }
    out.slope = next.slope * s * k.a / t;
    out.intercept = next.slope * (s * k.b + k.var * m) / t + next.intercept;
  }
  out.g.log_c += pot.log_c;
  if (pot.has_gauss) {
    if (out.g.has_gauss) {
      const double s1 = out.g.var, m1 = out.g.mean, s2 = pot.var, m2 = pot.mean;
      out.g.log_c -= (m1 - m2) * (m1 - m2) / (2.0 * (s1 + s2));
      out.g.var = 1.0 / (1.0 / s1 + 1.0 / s2);
      out.g.mean = out.g.var * (m1 / s1 + m2 / s2);
    } else {
      out.g.has_gauss = true;
      out.g.mean = pot.mean;
      out.g.var = pot.var;
    }
  }
  return out;
}

// log eta_p(coef's Gaussian factor); the affine factor is ignored
inline double log_eta_gauss(double m, double v, const GaussPotentialRef& g) {
  return combine_gauss(m, v, g).log_mass;
}

// eta_p((slope x + intercept)^power * gauss^gsq), returned as
// (log magnitude, polynomial value). gsq squares the Gaussian factor.
struct LogMoment {
  double log_mass = 0;
  double poly = 1;
};

inline LogMoment eta_affine_gauss(double m, double v, const BackCoef& c,
                                  int power, bool square_gauss) {
  GaussPotentialRef g = c.g;
  if (square_gauss) {
    g.log_c *= 2.0;
    if (g.has_gauss) g.var *= 0.5;
  }
  const auto cg = combine_gauss(m, v, g);
  LogMoment out;
  out.log_mass = cg.log_mass;
  const double fm = c.slope * cg.mean + c.intercept;
  out.poly = power == 1 ? fm : fm * fm + c.slope * c.slope * cg.var;
  return out;
}

}  // namespace detail

/// Exact asymptotic-variance terms v_{p,n}(phi) (or the updated
/// hat-variants) for a linear Gaussian Feynman--Kac model, via the backward
/// Gaussian-coefficient recursion. Coefficients are tracked in log space.
inline std::vector<double> exact_vpn(const LinearGaussFk& fk, AffinePhi phi,
                                     bool updated) {
  const int n = fk.horizon();
  const auto flow = gauss_flow(fk);

  detail::BackCoef num;  // Q_{p,n}(phi-or-phihat)
  num.slope = phi.slope;
  num.intercept = phi.intercept;
  num.g = updated ? fk.potentials[static_cast<std::size_t>(n)]
                  : GaussPotentialRef{0, false, 0, 1};
  detail::BackCoef den;  // Q_{p,n}(1)
  den.slope = 0;
  den.intercept = 1;
  den.g = {0, false, 0, 1};

  // limiting mean of the estimator: eta_n(phi) or eta_hat_n(phi)
  const auto m1 = detail::eta_affine_gauss(
      flow.mean[static_cast<std::size_t>(n)], flow.var[static_cast<std::size_t>(n)],
      num, 1, false);
  double log_eta_gn = 0.0;
  if (updated)
    log_eta_gn = detail::log_eta_gauss(flow.mean[static_cast<std::size_t>(n)],
                                       flow.var[static_cast<std::size_t>(n)],
                                       fk.potentials[static_cast<std::size_t>(n)]);
  const double target = m1.poly * std::exp(m1.log_mass - log_eta_gn);

  std::vector<double> v(static_cast<std::size_t>(n) + 1, 0.0);
  for (int p = n; p >= 0; --p) {
    const auto sp = static_cast<std::size_t>(p);
    const auto msq = detail::eta_affine_gauss(flow.mean[sp], flow.var[sp], num, 2, true);
    const double log_den = detail::log_eta_gauss(flow.mean[sp], flow.var[sp], den.g);
    double ratio = 0.0;
    if (msq.poly > 0)
      ratio = msq.poly *
              std::exp(msq.log_mass - 2.0 * log_den - 2.0 * log_eta_gn);
    v[sp] = ratio - target * target;
    if (p > 0) {
      const auto& k = fk.kernels[sp];
      const auto& pot = fk.potentials[sp - 1];
      num = detail::backward_step(num, k, pot);
      den = detail::backward_step(den, k, pot);
    }
  }
  return v;
}

/// Convenience wrappers for the linear Gaussian model. The centered flags
/// subtract the exact predictive (or filtered) mean before squaring.
inline std::vector<double> exact_vpn_lgssm(const LgssmParams& params,
                                           AffinePhi phi, bool updated) {
  return exact_vpn(lgssm_reference(params), phi, updated);
}

inline double exact_sigma2(const LinearGaussFk& fk, AffinePhi phi, bool updated,
                           const std::vector<double>& c = {}) {
  const auto v = exact_vpn(fk, phi, updated);
  double s = 0.0;
  for (std::size_t p = 0; p < v.size(); ++p)
    s += v[p] / (c.empty() ? 1.0 : c[p]);
  return s;
}

/// eta_hat_n(Id): the exact filtered mean of a linear Gaussian FK model.
inline double exact_eta_hat_id(const LinearGaussFk& fk) {
  const int n = fk.horizon();
  const auto flow = gauss_flow(fk);
  const auto cg = detail::combine_gauss(flow.mean[static_cast<std::size_t>(n)],
                                        flow.var[static_cast<std::size_t>(n)],
                                        fk.potentials[static_cast<std::size_t>(n)]);
  return cg.mean;
}

}  // namespace smcvar
