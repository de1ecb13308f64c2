#ifndef RPDMIX_MOMENTS_HPP
#define RPDMIX_MOMENTS_HPP

// Unconditional mean and variance of the response when the noise variables
// are independent Gaussians. Two constructions: closed-form propagation
// through a joint mean/dispersion fit, and the second-order delta method on
// a homoscedastic mean model.
//
// Mode "paper" follows the printed formulas: the delta method carries the
// curvature factors 2*c4*s1 and 8*c4^2*s1^2, and the joint-fit variance
// uses only selected z1 terms (default x3:z1) in the mean's z1 slope.
// Mode "exact" is the exact propagation for predictors quadratic in z1 and
// linear in z2.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rpdmix/dataset.hpp"
#include "rpdmix/errors.hpp"
#include "rpdmix/glm.hpp"
#include "rpdmix/jmmd.hpp"
#include "rpdmix/probstats.hpp"
#include "rpdmix/terms.hpp"

namespace rpdmix {

/// E(exp(a1 Z)), Z ~ N(mu, s2)
inline double exp_moment_linear(double alpha1, double mu, double sigma2) {
  return std::exp(alpha1 * mu + 0.5 * alpha1 * alpha1 * sigma2);
}

/// E(exp(a1 Z + a2 Z^2)), Z ~ N(mu, s2). Requires k2 = 1 - 2 s2 a2 > 0.
/// Written as exp((a1^2 s2 / 2 + a1 mu + a2 mu^2) / k2) / sqrt(k2), which
/// is algebraically the textbook form and stays finite as s2 -> 0.
inline double exp_moment_quadratic(double alpha1, double alpha2, double mu, double sigma2) {
  const double k2 = 1.0 - 2.0 * sigma2 * alpha2;
  if (!(k2 > 0.0))
    throw InfeasibleMomentError("E(exp(a1 Z + a2 Z^2)) diverges: 1 - 2 sigma^2 a2 = " + std::to_string(k2));
  return std::exp((0.5 * alpha1 * alpha1 * sigma2 + alpha1 * mu + alpha2 * mu * mu) / k2) / std::sqrt(k2);
}

/// Var(a1 Z + a2 Z^2), Z ~ N(mu, s2)
inline double var_quadratic(double alpha1, double alpha2, double mu, double sigma2) {
  return sigma2 * (alpha1 * alpha1 + 2.0 * alpha2 * alpha2 * (2.0 * mu * mu + sigma2) + 4.0 * alpha1 * alpha2 * mu);
}

enum class MomentMethod { Jmmd, Delta };
enum class MomentMode { Paper, Exact };

inline const char* to_string(MomentMethod m) { return m == MomentMethod::Jmmd ? "jmmd" : "delta"; }
inline const char* to_string(MomentMode m) { return m == MomentMode::Paper ? "paper" : "exact"; }

inline MomentMode parse_mode(const std::string& s) {
  if (s == "paper") return MomentMode::Paper;
  if (s == "exact") return MomentMode::Exact;
  throw ValidationError("mode must be 'paper' or 'exact', got '" + s + "'");
}
inline MomentMethod parse_method(const std::string& s) {
  if (s == "jmmd") return MomentMethod::Jmmd;
  if (s == "delta") return MomentMethod::Delta;
  throw ValidationError("method must be 'jmmd' or 'delta', got '" + s + "'");
}

template <class M>
concept MomentModelLike = requires(const M& m, const Blend& x) {
  { m.mean(x) } -> std::convertible_to<double>;
  { m.variance(x) } -> std::convertible_to<double>;
  { m.feasible(x) } -> std::convertible_to<bool>;
};

/// x -> E(Y), x -> Var(Y) under a fixed noise distribution.
struct MomentModel {
  MomentMethod method = MomentMethod::Delta;
  MomentMode mode = MomentMode::Exact;
  GaussianNoise noise;
  std::function<double(const Blend&)> mean_of;
  std::function<double(const Blend&)> var_of;
  std::function<bool(const Blend&)> feasible_of;

  bool feasible(const Blend& x) const { return !feasible_of || feasible_of(x); }
  double mean(const Blend& x) const { return mean_of(x); }
  double variance(const Blend& x) const {
    if (!feasible(x)) throw InfeasibleMomentError("variance does not exist at this blend (k2 <= 0)");
    return var_of(x);
  }
};

namespace detail {

inline const std::vector<NoiseMonomial>& closed_form_monomials() {
  static const std::vector<NoiseMonomial> m{kConst, kZ1, kZ2, kZ1Sq};
  return m;
}

inline void require_closed_form(const LinearPredictorSpec& spec, const char* which) {
  for (const auto& t : spec.terms()) {
    const auto& allowed = closed_form_monomials();
    if (std::find(allowed.begin(), allowed.end(), t.noise) == allowed.end())
      throw UnsupportedFormError(std::string(which) + " term '" + t.label() +
                                 "' uses a noise monomial outside {1, z1, z2, z1^2}");
  }
}

}  // namespace detail

struct JmmdMomentOptions {
  MomentMode mode = MomentMode::Exact;
  /// Mean terms whose z1 contributions make up the variance-transmission
  /// slope in paper mode.
  std::vector<std::string> paper_slope_terms{"x3:z1"};
};

/// E(Y)   = a0 + a1 mu1 + a2 mu2 + a3 (mu1^2 + s1)
/// Var(Y) = E(exp(m0 + m1 Z1 + m2 Z2 + m3 Z1^2)) + Var(a1 Z1 + a3 Z1^2) + a2^2 s2
/// with a*, m* the noise-polynomial coefficients of the mean and log
/// dispersion predictors at x.
inline MomentModel jmmd_moment_model(const JointFit& fit, const GaussianNoise& noise,
                                     const JmmdMomentOptions& opt = {}) {
  noise.validate();
  if (fit.spec.mean_link != Link::Identity || fit.spec.mean_variance != VarianceFunction::Constant)
    throw UnsupportedFormError("closed-form moments need an identity-link, constant-variance mean model");
  detail::require_closed_form(fit.spec.mean_spec, "mean");
  detail::require_closed_form(fit.spec.dispersion_spec, "dispersion");

  Eigen::VectorXd slope_beta = Eigen::VectorXd::Zero(fit.mean_fit.beta.size());
  for (const auto& label : opt.paper_slope_terms) {
    const int j = fit.spec.mean_spec.index_of(parse_term(label));
    if (j >= 0) slope_beta(j) = fit.mean_fit.beta(j);
  }

  MomentModel m;
  m.method = MomentMethod::Jmmd;
  m.mode = opt.mode;
  m.noise = noise;
  const auto mean_spec = fit.spec.mean_spec;
  const auto disp_spec = fit.spec.dispersion_spec;
  const Eigen::VectorXd beta = fit.mean_fit.beta;
  const Eigen::VectorXd gamma = fit.dispersion_fit.beta;
  const MomentMode mode = opt.mode;

  m.mean_of = [=](const Blend& x) {
    const auto a = noise_polynomial_coefficients(mean_spec, beta, x);
    return a[kConst] + a[kZ1] * noise.mu[0] + a[kZ2] * noise.mu[1] +
           a[kZ1Sq] * (noise.mu[0] * noise.mu[0] + noise.sigma2[0]);
  };
  m.feasible_of = [=](const Blend& x) {
    const auto g = noise_polynomial_coefficients(disp_spec, gamma, x);
    return 1.0 - 2.0 * noise.sigma2[0] * g[kZ1Sq] > 0.0;
  };
  m.var_of = [=](const Blend& x) {
    const auto a = noise_polynomial_coefficients(mean_spec, beta, x);
    const auto g = noise_polynomial_coefficients(disp_spec, gamma, x);
    const double e_var = std::exp(g[kConst]) * exp_moment_linear(g[kZ2], noise.mu[1], noise.sigma2[1]) *
                         exp_moment_quadratic(g[kZ1], g[kZ1Sq], noise.mu[0], noise.sigma2[0]);
    const double slope =
        mode == MomentMode::Exact ? a[kZ1] : noise_polynomial_coefficients(mean_spec, slope_beta, x)[kZ1];
    const double var_e =
        var_quadratic(slope, a[kZ1Sq], noise.mu[0], noise.sigma2[0]) + a[kZ2] * a[kZ2] * noise.sigma2[1];
    return e_var + var_e;
  };
  return m;
}

/// Delta-method moments of eta(x, Z) + e with Var(e) = sigma2_resid, where
/// eta = c1 + c2 z1 + c3 z2 + c4 z1^2 at x.
inline MomentModel delta_moment_model(const LinearPredictorSpec& spec, const Eigen::VectorXd& coeffs,
                                      double sigma2_resid, const GaussianNoise& noise,
                                      MomentMode mode = MomentMode::Exact) {
  noise.validate();
  if (!(sigma2_resid >= 0.0) || !std::isfinite(sigma2_resid))
    throw DomainError("residual variance must be finite and >= 0");
  detail::require_closed_form(spec, "mean");
  if (static_cast<std::size_t>(coeffs.size()) != spec.p())
    throw PreconditionError("coefficient vector length does not match the term count");

  MomentModel m;
  m.method = MomentMethod::Delta;
  m.mode = mode;
  m.noise = noise;
  const double mu1 = noise.mu[0];
  const double mu2 = noise.mu[1];
  const double s1 = noise.sigma2[0];
  const double s2 = noise.sigma2[1];
  m.mean_of = [=](const Blend& x) {
    const auto c = noise_polynomial_coefficients(spec, coeffs, x);
    const double base = c[kConst] + c[kZ1] * mu1 + c[kZ2] * mu2;
    if (mode == MomentMode::Paper) return base + c[kZ1Sq] * mu1 * mu1 + 2.0 * c[kZ1Sq] * s1;
    return base + c[kZ1Sq] * (mu1 * mu1 + s1);
  };
  m.var_of = [=](const Blend& x) {
    const auto c = noise_polynomial_coefficients(spec, coeffs, x);
    const double c2 = c[kZ1];
    const double c3 = c[kZ2];
    const double c4 = c[kZ1Sq];
    if (mode == MomentMode::Paper)
      return (c2 * c2 + 4.0 * c2 * c4 * mu1 + 4.0 * c4 * c4 * mu1 * mu1) * s1 + 8.0 * c4 * c4 * s1 * s1 +
             c3 * c3 * s2 + sigma2_resid;
    const double slope = c2 + 2.0 * c4 * mu1;
    return slope * slope * s1 + 2.0 * c4 * c4 * s1 * s1 + c3 * c3 * s2 + sigma2_resid;
  };
  return m;
}

}  // namespace rpdmix

#endif  // RPDMIX_MOMENTS_HPP
