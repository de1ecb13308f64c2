#ifndef RPDMIX_JMMD_HPP
#define RPDMIX_JMMD_HPP

// Joint modelling of mean and dispersion: the alternating fit, adjusted
// extended quasi-likelihood, model comparison, term tests, backward
// selection and residual diagnostics.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rpdmix/dataset.hpp"
#include "rpdmix/errors.hpp"
#include "rpdmix/glm.hpp"
#include "rpdmix/probstats.hpp"
#include "rpdmix/terms.hpp"

namespace rpdmix {

struct JointModelSpec {
  LinearPredictorSpec mean_spec;
  LinearPredictorSpec dispersion_spec;
  Link mean_link = Link::Identity;
  VarianceFunction mean_variance = VarianceFunction::Constant;
  double outer_tol = 1e-8;   // relative change in -2Q+ between cycles
  double inner_tol = 1e-10;  // squared coefficient step inside IRLS
  int max_cycles = 200;
  int inner_max_iter = 500;
  double dstar_floor = 1e-10;

  void validate() const {
    if (!(outer_tol > 0.0) || !(inner_tol > 0.0)) throw ValidationError("tolerances must be positive");
    if (max_cycles < 1) throw ValidationError("max_cycles must be >= 1");
    if (!(dstar_floor > 0.0)) throw ValidationError("dstar floor must be positive");
  }
};

struct JointFit {
  JointModelSpec spec;
  GlmFit mean_fit;
  GlmFit dispersion_fit;
  Eigen::VectorXd y;
  Eigen::VectorXd dstar;  // dispersion response, floored
  double minus2QA = 0.0;
  int cycles = 0;
  bool converged = false;
  std::vector<double> history;

  std::size_t p() const noexcept { return mean_fit.p(); }
  std::size_t q() const noexcept { return dispersion_fit.p(); }
  std::size_t n() const noexcept { return static_cast<std::size_t>(y.size()); }
  const Eigen::VectorXd& phi() const noexcept { return dispersion_fit.fitted; }
  /// Unweighted gamma deviance of the dispersion model, D^d.
  double dispersion_deviance() const { return dispersion_fit.deviance(); }
};

/// -2Q+_A = sum_i d*_i / phi_i + ln(2 pi phi_i V(y_i))
inline double adjusted_eql(const Eigen::VectorXd& y, const Eigen::VectorXd& mu, const Eigen::VectorXd& phi,
                           const Eigen::VectorXd& dstar, VarianceFunction v) {
  (void)mu;
  const Eigen::Index n = y.size();
  if (phi.size() != n || dstar.size() != n) throw PreconditionError("adjusted_eql: length mismatch");
  double s = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(phi(i) > 0.0)) throw DomainError("adjusted_eql: dispersion must be positive");
    const double vy = variance_fn(v, y(i));
    if (!(vy > 0.0)) throw DomainError("adjusted_eql: V(y) must be positive");
    s += dstar(i) / phi(i) + std::log(2.0 * std::numbers::pi * phi(i) * vy);
  }
  return s;
}

inline double aicq(double minus2QA, int p, int q) {
  if (p < 1 || q < 1) throw PreconditionError("aicq: p and q must be >= 1");
  return minus2QA + 2.0 * (p + q);
}

/// Squared Pearson correlation between eta and link(y).
inline double pseudo_r2(const Eigen::VectorXd& eta, const Eigen::VectorXd& y, Link link) {
  const Eigen::Index n = y.size();
  if (n < 3 || eta.size() != n) throw PreconditionError("pseudo_r2 needs n >= 3 and equal lengths");
  Eigen::VectorXd ly(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    ly(i) = link_fn(link, y(i));
    if (!std::isfinite(ly(i))) throw DomainError("pseudo_r2: link(y) is not finite");
  }
  const Eigen::VectorXd a = eta.array() - eta.mean();
  const Eigen::VectorXd b = ly.array() - ly.mean();
  const double saa = a.squaredNorm();
  const double sbb = b.squaredNorm();
  if (!(saa > 0.0) || !(sbb > 0.0)) throw DomainError("pseudo_r2: correlation undefined for a constant series");
  const double r2 = a.dot(b) * a.dot(b) / (saa * sbb);
  return std::clamp(r2, 0.0, 1.0);
}

namespace detail {

inline Eigen::VectorXd floored_dstar(const Eigen::VectorXd& d, const Eigen::VectorXd& h, double floor) {
  return standardized_components(d, h).cwiseMax(floor);
}

inline GlmSpec dispersion_glm_spec(const JointModelSpec& spec, const Eigen::VectorXd& mean_hat) {
  GlmSpec g;
  g.link = Link::Log;
  g.variance = VarianceFunction::Squared;
  g.prior_weights = (1.0 - mean_hat.array()) / 2.0;
  g.delta_tol = spec.inner_tol;
  g.max_iter = spec.inner_max_iter;
  return g;
}

}  // namespace detail

/// Alternating fit: mean IRLS with prior weights 1/phi, then a gamma/log
/// IRLS on the standardized deviance components with prior weights
/// (1-h)/2. Stops on the relative change of -2Q+ (starting from 0).
/// `initial_phi` warm-starts the first mean fit; otherwise phi = 1.
inline JointFit fit_joint(const JointModelSpec& spec, const ExperimentDataset& data,
                          std::optional<Eigen::VectorXd> initial_phi = std::nullopt) {
  spec.validate();
  const Eigen::MatrixXd T = build_design_matrix(spec.mean_spec, data);
  const Eigen::MatrixXd U = build_design_matrix(spec.dispersion_spec, data);
  const Eigen::VectorXd y = data.response();
  const Eigen::Index n = y.size();
  if (n <= static_cast<Eigen::Index>(std::max(spec.mean_spec.p(), spec.dispersion_spec.p())))
    throw PreconditionError("joint fit needs n > max(p, q)");

  Eigen::VectorXd phi = initial_phi ? *initial_phi : Eigen::VectorXd::Ones(n);
  if (phi.size() != n) throw PreconditionError("initial dispersion has the wrong length");

  JointFit jf;
  jf.spec = spec;
  jf.y = y;
  double q_prev = 0.0;
  std::optional<Eigen::VectorXd> mean_beta;
  for (int k = 1; k <= spec.max_cycles; ++k) {
    try {
      GlmSpec ms;
      ms.link = spec.mean_link;
      ms.variance = spec.mean_variance;
      ms.prior_weights = phi.cwiseInverse();
      ms.delta_tol = spec.inner_tol;
      ms.max_iter = spec.inner_max_iter;
      jf.mean_fit = irls_fit(T, y, ms, spec.mean_link == Link::Identity ? std::nullopt : mean_beta,
                             spec.mean_spec.labels());
      mean_beta = jf.mean_fit.beta;
      jf.dstar = detail::floored_dstar(jf.mean_fit.deviance_components, jf.mean_fit.hat, spec.dstar_floor);
      jf.dispersion_fit = irls_fit(U, jf.dstar, detail::dispersion_glm_spec(spec, jf.mean_fit.hat), std::nullopt,
                                   spec.dispersion_spec.labels());
    } catch (const ConvergenceError& e) {
      throw ConvergenceError("cycle " + std::to_string(k) + ": " + e.what(), jf.history);
    } catch (const SingularityError& e) {
      throw SingularityError("cycle " + std::to_string(k) + ": " + e.what(), e.smallest_pivot());
    }
    phi = jf.dispersion_fit.fitted;
    const double q = adjusted_eql(y, jf.mean_fit.fitted, phi, jf.dstar, spec.mean_variance);
    jf.history.push_back(q);
    jf.minus2QA = q;
    jf.cycles = k;
    if (std::abs(q - q_prev) / std::abs(q) < spec.outer_tol) {
      jf.converged = true;
      return jf;
    }
    q_prev = q;
  }
  throw ConvergenceError("joint fit did not converge in " + std::to_string(spec.max_cycles) + " cycles",
                         jf.history);
}

struct ModelComparison {
  std::string label;
  double minus2QA = 0.0;
  double aicq = 0.0;
  double pseudo_r2 = 0.0;
  int p = 0;
  int q = 0;
  int cycles = 0;
};

inline ModelComparison compare_row(const JointFit& f, std::string label = {}) {
  ModelComparison c;
  c.label = std::move(label);
  c.minus2QA = f.minus2QA;
  c.p = static_cast<int>(f.p());
  c.q = static_cast<int>(f.q());
  c.aicq = aicq(f.minus2QA, c.p, c.q);
  c.pseudo_r2 = pseudo_r2(f.mean_fit.eta, f.y, f.spec.mean_link);
  c.cycles = f.cycles;
  return c;
}

/// Deletion drops the term's contribution from the converged predictor and
/// rescores it with everything else held fixed. Refit re-estimates the
/// reduced model.
enum class TermTestMode { Deletion, Refit };

struct TermTest {
  std::string term;
  double reduced_value = 0.0;  // -2Q+_Ax for mean tests, D^d_x for dispersion tests
  double chisq = 0.0;
  double p_value = 1.0;
};

namespace detail {

inline int require_term(const LinearPredictorSpec& spec, const Term& t, const char* side) {
  const int j = spec.index_of(t);
  if (j < 0) throw PreconditionError("term '" + t.label() + "' is not in the " + side + " model");
  if (spec.p() < 2) throw PreconditionError("cannot remove the only term of the " + std::string(side) + " model");
  return j;
}

inline double gamma_deviance(const Eigen::VectorXd& dstar, const Eigen::VectorXd& phi) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < dstar.size(); ++i) s += deviance_component(dstar(i), phi(i), VarianceFunction::Squared);
  return s;
}

}  // namespace detail

/// EQL likelihood-ratio test for removing one mean term; the dispersion
/// model is held fixed.
inline TermTest eql_lrt_mean_term(const JointFit& full, const Term& term, const ExperimentDataset& data,
                                  TermTestMode mode = TermTestMode::Deletion) {
  const int j = detail::require_term(full.spec.mean_spec, term, "mean");
  TermTest out;
  out.term = term.label();
  if (mode == TermTestMode::Deletion) {
    const auto& mf = full.mean_fit;
    const Eigen::VectorXd eta_x = mf.eta - mf.design.col(j) * mf.beta(j);
    Eigen::VectorXd d(eta_x.size());
    for (Eigen::Index i = 0; i < d.size(); ++i)
      d(i) = deviance_component(full.y(i), link_inv(full.spec.mean_link, eta_x(i)), full.spec.mean_variance);
    const Eigen::VectorXd ds = detail::floored_dstar(d, mf.hat, full.spec.dstar_floor);
    out.reduced_value = adjusted_eql(full.y, eta_x, full.phi(), ds, full.spec.mean_variance);
  } else {
    JointModelSpec reduced = full.spec;
    reduced.mean_spec = full.spec.mean_spec.without(std::vector<Term>{term});
    out.reduced_value = fit_joint(reduced, data).minus2QA;
  }
  out.chisq = out.reduced_value - full.minus2QA;
  out.p_value = chisq_sf(std::max(out.chisq, 0.0), 1);
  return out;
}

/// Analysis-of-deviance test for removing one dispersion term; the mean
/// model (and so d*) is held fixed. D^d is the unweighted gamma deviance.
inline TermTest deviance_test_dispersion_term(const JointFit& full, const Term& term, const ExperimentDataset& data,
                                              TermTestMode mode = TermTestMode::Deletion) {
  (void)data;
  const int j = detail::require_term(full.spec.dispersion_spec, term, "dispersion");
  TermTest out;
  out.term = term.label();
  const auto& df = full.dispersion_fit;
  Eigen::VectorXd phi_x;
  if (mode == TermTestMode::Deletion) {
    phi_x = (df.eta - df.design.col(j) * df.beta(j)).array().exp();
  } else {
    Eigen::MatrixXd U(df.design.rows(), df.design.cols() - 1);
    for (Eigen::Index c = 0, k = 0; c < df.design.cols(); ++c)
      if (c != j) U.col(k++) = df.design.col(c);
    phi_x = irls_fit(U, full.dstar, detail::dispersion_glm_spec(full.spec, full.mean_fit.hat)).fitted;
  }
  out.reduced_value = detail::gamma_deviance(full.dstar, phi_x);
  out.chisq = out.reduced_value - full.dispersion_deviance();
  out.p_value = chisq_sf(std::max(out.chisq, 0.0), 1);
  return out;
}

inline std::vector<TermTest> mean_term_tests(const JointFit& full, const ExperimentDataset& data,
                                             TermTestMode mode = TermTestMode::Deletion) {
  std::vector<TermTest> out;
  for (const auto& t : full.spec.mean_spec.terms()) out.push_back(eql_lrt_mean_term(full, t, data, mode));
  return out;
}

inline std::vector<TermTest> dispersion_term_tests(const JointFit& full, const ExperimentDataset& data,
                                                   TermTestMode mode = TermTestMode::Deletion) {
  std::vector<TermTest> out;
  for (const auto& t : full.spec.dispersion_spec.terms())
    out.push_back(deviance_test_dispersion_term(full, t, data, mode));
  return out;
}

struct SelectionStep {
  std::string action;  // "start", "eta_M - {t}" or "eta_D - {t}", with "(rejected)" when AICq did not drop
  std::string side;
  std::string term;
  double p_value = 0.0;
  double aicq = 0.0;
  double pseudo_r2 = 0.0;
  bool accepted = false;
};

struct SelectionResult {
  JointFit fit;
  std::vector<SelectionStep> trace;
};

/// Backward elimination alternating between mean and dispersion, mean
/// first. On each side the removable term (p > alpha) with the largest
/// p-value is tried; ties go to the later term. A removal is kept only if
/// AICq drops. Stops after two consecutive sides without a kept removal.
inline SelectionResult backward_select(const JointModelSpec& start, const ExperimentDataset& data, double alpha,
                                       TermTestMode mode = TermTestMode::Deletion) {
  SelectionResult res;
  res.fit = fit_joint(start, data);
  auto row = compare_row(res.fit);
  res.trace.push_back({"start", "", "", 0.0, row.aicq, row.pseudo_r2, true});
  double best = row.aicq;
  bool mean_side = true;
  int fails = 0;
  while (fails < 2) {
    const auto& spec = mean_side ? res.fit.spec.mean_spec : res.fit.spec.dispersion_spec;
    std::vector<TermTest> tests;
    if (spec.p() > 1)
      tests = mean_side ? mean_term_tests(res.fit, data, mode) : dispersion_term_tests(res.fit, data, mode);
    int pick = -1;
    for (int i = 0; i < static_cast<int>(tests.size()); ++i) {
      if (!(tests[static_cast<std::size_t>(i)].p_value > alpha)) continue;
      if (pick < 0 || tests[static_cast<std::size_t>(i)].p_value >= tests[static_cast<std::size_t>(pick)].p_value)
        pick = i;
    }
    if (pick < 0) {
      ++fails;
    } else {
      const Term t = spec[static_cast<std::size_t>(pick)];
      JointModelSpec next = res.fit.spec;
      if (mean_side)
        next.mean_spec = next.mean_spec.without(std::vector<Term>{t});
      else
        next.dispersion_spec = next.dispersion_spec.without(std::vector<Term>{t});
      JointFit cand = fit_joint(next, data);
      const auto cr = compare_row(cand);
      SelectionStep s;
      s.side = mean_side ? "mean" : "dispersion";
      s.term = t.label();
      s.p_value = tests[static_cast<std::size_t>(pick)].p_value;
      s.aicq = cr.aicq;
      s.pseudo_r2 = cr.pseudo_r2;
      s.accepted = cr.aicq < best;
      s.action = std::string(mean_side ? "eta_M" : "eta_D") + " - {" + t.label() + "}" +
                 (s.accepted ? "" : " (rejected)");
      res.trace.push_back(s);
      if (s.accepted) {
        res.fit = std::move(cand);
        best = cr.aicq;
        fails = 0;
      } else {
        ++fails;
      }
    }
    mean_side = !mean_side;
  }
  return res;
}

struct Residuals {
  Eigen::VectorXd r_mean;
  Eigen::VectorXd r_disp;
  Eigen::VectorXd cook;  // r_mean^2 h / (p (1 - h))
  double phi_disp = 0.0;  // global dispersion of the dispersion model
};

/// r^m_i = sign(y_i - mu_i) sqrt(d*_i / phi_i);
/// r^d_i = sign(d*_i - phi_i) sqrt(d*_{d,i} / phi_disp) where d_{d,i} is the
/// gamma deviance component, standardized by the dispersion leverage, and
/// phi_disp = sum d_{d,i} / (n - q).
inline Residuals residuals(const JointFit& fit) {
  if (!fit.converged) throw PreconditionError("residuals need a converged fit");
  const Eigen::Index n = fit.y.size();
  const auto& mf = fit.mean_fit;
  const auto& df = fit.dispersion_fit;
  Residuals r;
  r.r_mean.resize(n);
  r.cook.resize(n);
  const double p = static_cast<double>(fit.p());
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s = fit.y(i) > mf.fitted(i) ? 1.0 : (fit.y(i) < mf.fitted(i) ? -1.0 : 0.0);
    r.r_mean(i) = s * std::sqrt(fit.dstar(i) / fit.phi()(i));
    r.cook(i) = r.r_mean(i) * r.r_mean(i) * mf.hat(i) / (p * (1.0 - mf.hat(i)));
  }
  const Eigen::VectorXd ddd = standardized_components(df.deviance_components, df.hat);
  const double dof = static_cast<double>(n) - static_cast<double>(fit.q());
  if (!(dof > 0.0)) throw PreconditionError("residuals need n > q");
  r.phi_disp = df.deviance_components.sum() / dof;
  r.r_disp.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double diff = fit.dstar(i) - df.fitted(i);
    const double s = diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0);
    r.r_disp(i) = s * std::sqrt(ddd(i) / r.phi_disp);
  }
  return r;
}

struct Envelope {
  Eigen::VectorXd expected;  // half-normal scores
  Eigen::VectorXd lower;
  Eigen::VectorXd median;
  Eigen::VectorXd upper;
  Eigen::VectorXd observed;
  int replicates = 0;
  int failures = 0;
};

/// Simulated half-normal envelope for |r^m|. Each replicate draws
/// y* ~ N(mu_i, phi_i), refits the mean with the dispersion frozen and
/// records the sorted absolute residuals. Replicate k uses substream k.
inline Envelope simulate_envelope(const JointFit& fit, int n_sim, std::uint64_t seed) {
  if (n_sim < 19) throw PreconditionError("simulate_envelope needs n_sim >= 19");
  if (!fit.converged) throw PreconditionError("simulate_envelope needs a converged fit");
  if (fit.spec.mean_link != Link::Identity || fit.spec.mean_variance != VarianceFunction::Constant)
    throw UnsupportedFormError("simulate_envelope supports Gaussian mean models only");
  const Eigen::Index n = fit.y.size();
  const auto& mf = fit.mean_fit;
  const Eigen::VectorXd phi = fit.phi();
  GlmSpec ms;
  ms.prior_weights = phi.cwiseInverse();

  const SeededStream root(seed);
  std::vector<Eigen::VectorXd> sims;
  Envelope env;
  for (int k = 0; k < n_sim; ++k) {
    SeededStream s = root.split(k);
    Eigen::VectorXd ys(n);
    for (Eigen::Index i = 0; i < n; ++i) ys(i) = mf.fitted(i) + std::sqrt(phi(i)) * s.normal();
    try {
      const GlmFit g = irls_fit(mf.design, ys, ms);
      Eigen::VectorXd a(n);
      for (Eigen::Index i = 0; i < n; ++i)
        a(i) = std::sqrt(std::max(g.deviance_components(i) / (1.0 - g.hat(i)), 0.0) / phi(i));
      std::sort(a.data(), a.data() + n);
      sims.push_back(a);
    } catch (const Error&) {
      ++env.failures;
    }
  }
  if (env.failures * 5 > n_sim) throw ConvergenceError("more than 20% of envelope replicates failed", {});
  env.replicates = static_cast<int>(sims.size());

  const Residuals r = residuals(fit);
  env.observed = r.r_mean.cwiseAbs();
  std::sort(env.observed.data(), env.observed.data() + n);
  env.expected.resize(n);
  env.lower.resize(n);
  env.median.resize(n);
  env.upper.resize(n);
  std::vector<double> col(sims.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    env.expected(i) = normal_quantile((static_cast<double>(i + 1) + n - 0.125) / (2.0 * n + 0.5));
    for (std::size_t k = 0; k < sims.size(); ++k) col[k] = sims[k](i);
    std::sort(col.begin(), col.end());
    env.lower(i) = col.front();
    env.upper(i) = col.back();
    const std::size_t m = col.size();
    env.median(i) = m % 2 ? col[m / 2] : 0.5 * (col[m / 2 - 1] + col[m / 2]);
  }
  return env;
}

}  // namespace rpdmix

#endif  // RPDMIX_JMMD_HPP
