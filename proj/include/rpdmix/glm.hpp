#ifndef RPDMIX_GLM_HPP
#define RPDMIX_GLM_HPP

// Link and variance functions, prior-weighted IRLS, hat diagonals,
// deviance components and Wald tables.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rpdmix/dataset.hpp"
#include "rpdmix/errors.hpp"
#include "rpdmix/probstats.hpp"
#include "rpdmix/terms.hpp"

namespace rpdmix {

enum class Link { Identity, Log };
enum class VarianceFunction { Constant, Identity, Squared };

inline const char* to_string(Link l) { return l == Link::Identity ? "identity" : "log"; }
inline const char* to_string(VarianceFunction v) {
  switch (v) {
    case VarianceFunction::Constant: return "constant";
    case VarianceFunction::Identity: return "identity";
    case VarianceFunction::Squared: return "squared";
  }
  return "?";
}

inline double link_fn(Link l, double mu) { return l == Link::Identity ? mu : std::log(mu); }
inline double link_inv(Link l, double eta) { return l == Link::Identity ? eta : std::exp(eta); }
/// d mu / d eta
inline double link_mu_eta(Link l, double eta) { return l == Link::Identity ? 1.0 : std::exp(eta); }

inline double variance_fn(VarianceFunction v, double mu) {
  switch (v) {
    case VarianceFunction::Constant: return 1.0;
    case VarianceFunction::Identity: return mu;
    case VarianceFunction::Squared: return mu * mu;
  }
  return 1.0;
}

/// Unit deviance 2 * integral_mu^y (y - t) / V(t) dt.
inline double deviance_component(double y, double mu, VarianceFunction v) {
  switch (v) {
    case VarianceFunction::Constant:
      if (!std::isfinite(y) || !std::isfinite(mu)) throw DomainError("deviance_component: non-finite input");
      return (y - mu) * (y - mu);
    case VarianceFunction::Identity: {
      if (!(mu > 0.0) || y < 0.0) throw DomainError("deviance_component: need mu > 0 and y >= 0");
      if (y == 0.0) return 2.0 * mu;
      return std::max(0.0, 2.0 * (y * std::log(y / mu) - (y - mu)));
    }
    case VarianceFunction::Squared: {
      if (!(mu > 0.0) || !(y > 0.0)) throw DomainError("deviance_component: need y > 0 and mu > 0");
      return std::max(0.0, 2.0 * (-std::log(y / mu) + (y - mu) / mu));
    }
  }
  return 0.0;
}

struct GlmSpec {
  Link link = Link::Identity;
  VarianceFunction variance = VarianceFunction::Constant;
  Eigen::VectorXd prior_weights;  // empty means unit weights
  double delta_tol = 1e-10;
  int max_iter = 100;
  double singular_cond = 1e12;
  double log_mu_floor = 1e-8;
};

struct GlmFit {
  std::vector<std::string> labels;
  Eigen::MatrixXd design;
  Eigen::VectorXd prior_weights;
  Eigen::VectorXd beta;
  Eigen::VectorXd fitted;
  Eigen::VectorXd eta;
  Eigen::VectorXd weights;
  Eigen::VectorXd hat;
  Eigen::VectorXd deviance_components;
  Eigen::MatrixXd cov_unscaled;  // (T'WT)^-1
  Link link = Link::Identity;
  VarianceFunction variance = VarianceFunction::Constant;
  int iterations = 0;
  bool converged = false;

  std::size_t p() const noexcept { return static_cast<std::size_t>(beta.size()); }
  std::size_t n() const noexcept { return static_cast<std::size_t>(fitted.size()); }
  double deviance() const { return deviance_components.sum(); }
  double weighted_deviance() const { return prior_weights.dot(deviance_components); }
};

namespace detail {

struct WlsSolve {
  Eigen::VectorXd beta;
  Eigen::MatrixXd cov;  // (T'WT)^-1
};

inline WlsSolve wls_solve(const Eigen::MatrixXd& T, const Eigen::VectorXd& z, const Eigen::VectorXd& w,
                          double singular_cond) {
  const Eigen::VectorXd sw = w.array().sqrt();
  const Eigen::MatrixXd A = sw.asDiagonal() * T;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  const Eigen::Index p = T.cols();
  const auto& R = qr.matrixR();
  const double largest = std::abs(R(0, 0));
  double smallest = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < p; ++k) smallest = std::min(smallest, std::abs(R(k, k)));
  // Pivot magnitudes scale like singular values of sqrt(W)T, so their ratio
  // squared estimates the condition of T'WT.
  if (!(smallest > 0.0) || (largest / smallest) * (largest / smallest) > singular_cond)
    throw SingularityError("weighted cross-product T'WT is singular or ill-conditioned (smallest pivot " +
                               std::to_string(smallest) + ")",
                           smallest);
  WlsSolve out;
  out.beta = qr.solve(Eigen::VectorXd(sw.cwiseProduct(z)));
  const Eigen::MatrixXd Rp = R.topLeftCorner(p, p).template triangularView<Eigen::Upper>();
  const Eigen::MatrixXd Rinv =
      Rp.template triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::MatrixXd Cp = Rinv * Rinv.transpose();
  const auto& P = qr.colsPermutation();
  out.cov = P * Cp * P.transpose();
  return out;
}

inline Eigen::VectorXd hat_from_cov(const Eigen::MatrixXd& T, const Eigen::VectorXd& w, const Eigen::MatrixXd& cov) {
  return ((T * cov).cwiseProduct(T).rowwise().sum()).cwiseProduct(w);
}

}  // namespace detail

/// h_i = w_i t_i' (T'WT)^-1 t_i
inline Eigen::VectorXd hat_diagonals(const Eigen::MatrixXd& T, const Eigen::VectorXd& w, double singular_cond = 1e12) {
  const auto s = detail::wls_solve(T, Eigen::VectorXd::Zero(T.rows()), w, singular_cond);
  return detail::hat_from_cov(T, w, s.cov);
}

/// d*_i = d_i / (1 - h_i)
inline Eigen::VectorXd standardized_components(const Eigen::VectorXd& d, const Eigen::VectorXd& h) {
  if (d.size() != h.size()) throw PreconditionError("standardized_components: length mismatch");
  Eigen::VectorXd out(d.size());
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (!(h(i) < 1.0 - 1e-12))
      throw DegenerateLeverageError("observation " + std::to_string(i) + " has leverage h >= 1");
    out(i) = d(i) / (1.0 - h(i));
  }
  return out;
}

/// Prior-weighted IRLS. Starts from beta = 0, mu = y unless beta_init is
/// given. Step-halving guards against a non-finite or increasing weighted
/// deviance after the first step.
inline GlmFit irls_fit(const Eigen::MatrixXd& T, const Eigen::VectorXd& y, const GlmSpec& spec,
                       std::optional<Eigen::VectorXd> beta_init = std::nullopt,
                       std::vector<std::string> labels = {}) {
  const Eigen::Index n = T.rows();
  const Eigen::Index p = T.cols();
  if (y.size() != n) throw PreconditionError("response length does not match design rows");
  if (p < 1 || n < p) throw PreconditionError("need n >= p >= 1");
  Eigen::VectorXd pw = spec.prior_weights.size() == 0 ? Eigen::VectorXd::Ones(n) : spec.prior_weights;
  if (pw.size() != n) throw PreconditionError("prior weight length does not match design rows");
  for (Eigen::Index i = 0; i < n; ++i)
    if (!(pw(i) > 0.0) || !std::isfinite(pw(i))) throw ValidationError("prior weights must be positive and finite");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::isfinite(y(i))) throw DomainError("response contains non-finite values");
    if (spec.variance == VarianceFunction::Squared && !(y(i) > 0.0))
      throw DomainError("response must be strictly positive for V(mu) = mu^2");
    if (spec.variance == VarianceFunction::Identity && y(i) < 0.0)
      throw DomainError("response must be nonnegative for V(mu) = mu");
  }

  auto mu_domain_ok = [&](const Eigen::VectorXd& mu) {
    if (spec.variance == VarianceFunction::Constant) return mu.allFinite();
    return mu.allFinite() && (mu.array() > 0.0).all();
  };
  auto wdev = [&](const Eigen::VectorXd& mu) {
    if (!mu_domain_ok(mu)) return std::numeric_limits<double>::infinity();
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) s += pw(i) * deviance_component(y(i), mu(i), spec.variance);
    return s;
  };

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd eta(n);
  Eigen::VectorXd mu(n);
  if (beta_init) {
    if (beta_init->size() != p) throw PreconditionError("beta_init length does not match design columns");
    beta = *beta_init;
    eta = T * beta;
    for (Eigen::Index i = 0; i < n; ++i) mu(i) = link_inv(spec.link, eta(i));
  } else {
    for (Eigen::Index i = 0; i < n; ++i) {
      mu(i) = spec.link == Link::Log ? std::max(y(i), spec.log_mu_floor) : y(i);
      eta(i) = link_fn(spec.link, mu(i));
    }
  }

  const bool linear = spec.link == Link::Identity && spec.variance == VarianceFunction::Constant;
  double dev_old = beta_init ? wdev(mu) : std::numeric_limits<double>::infinity();
  Eigen::VectorXd w(n);
  Eigen::VectorXd z(n);
  int it = 0;
  bool converged = false;
  for (it = 1; it <= spec.max_iter; ++it) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double g = link_mu_eta(spec.link, eta(i));
      w(i) = pw(i) * g * g / variance_fn(spec.variance, mu(i));
      z(i) = eta(i) + (y(i) - mu(i)) / g;
    }
    const auto s = detail::wls_solve(T, z, w, spec.singular_cond);
    Eigen::VectorXd beta_new = s.beta;
    Eigen::VectorXd eta_new = T * beta_new;
    Eigen::VectorXd mu_new = eta_new.unaryExpr([&](double e) { return link_inv(spec.link, e); });
    double dev_new = wdev(mu_new);
    if (!linear && std::isfinite(dev_old)) {
      double step = 1.0;
      while ((!std::isfinite(dev_new) || dev_new > dev_old * (1.0 + 1e-12)) && step > 1e-10) {
        step *= 0.5;
        beta_new = beta + step * (s.beta - beta);
        eta_new = T * beta_new;
        mu_new = eta_new.unaryExpr([&](double e) { return link_inv(spec.link, e); });
        dev_new = wdev(mu_new);
      }
    }
    if (!std::isfinite(dev_new)) {
      throw ConvergenceError("IRLS produced fitted values outside the variance function's domain",
                             std::vector<double>(beta.data(), beta.data() + beta.size()));
    }
    const double change = (beta_new - beta).squaredNorm();
    beta = beta_new;
    eta = eta_new;
    mu = mu_new;
    dev_old = dev_new;
    if (linear || change < spec.delta_tol) {
      converged = true;
      break;
    }
  }
  if (!converged)
    throw ConvergenceError("IRLS did not converge in " + std::to_string(spec.max_iter) + " iterations",
                           std::vector<double>(beta.data(), beta.data() + beta.size()));

  GlmFit fit;
  fit.labels = std::move(labels);
  fit.design = T;
  fit.prior_weights = pw;
  fit.beta = beta;
  fit.eta = eta;
  fit.fitted = mu;
  fit.link = spec.link;
  fit.variance = spec.variance;
  fit.iterations = it;
  fit.converged = true;
  fit.weights.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double g = link_mu_eta(spec.link, eta(i));
    fit.weights(i) = pw(i) * g * g / variance_fn(spec.variance, mu(i));
  }
  const auto fin = detail::wls_solve(T, Eigen::VectorXd::Zero(n), fit.weights, spec.singular_cond);
  fit.cov_unscaled = fin.cov;
  fit.hat = detail::hat_from_cov(T, fit.weights, fin.cov);
  fit.deviance_components.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) fit.deviance_components(i) = deviance_component(y(i), mu(i), spec.variance);
  return fit;
}

inline GlmFit irls_fit(const LinearPredictorSpec& predictor, const ExperimentDataset& data, const GlmSpec& spec,
                       std::optional<Eigen::VectorXd> beta_init = std::nullopt) {
  return irls_fit(build_design_matrix(predictor, data), data.response(), spec, std::move(beta_init),
                  predictor.labels());
}

struct WaldRow {
  std::string term;
  double estimate = 0.0;
  double std_error = 0.0;
  double t_value = 0.0;
  double p_value = 1.0;
};

enum class WaldReference { StudentT, Normal };

/// SE_j = sqrt(scale * [(T'WT)^-1]_jj). For joint fits the weights already
/// carry 1/phi so scale = 1; for OLS pass sigma^2 = D/(n-p).
inline std::vector<WaldRow> wald_table(const GlmFit& fit, double scale, int df,
                                       WaldReference ref = WaldReference::StudentT) {
  if (!fit.converged) throw PreconditionError("wald_table needs a converged fit");
  if (!(scale > 0.0)) throw DomainError("wald_table: scale must be positive");
  if (ref == WaldReference::StudentT && df < 1) throw DomainError("wald_table: df must be >= 1");
  std::vector<WaldRow> rows;
  for (Eigen::Index j = 0; j < fit.beta.size(); ++j) {
    WaldRow r;
    r.term = static_cast<std::size_t>(j) < fit.labels.size() ? fit.labels[static_cast<std::size_t>(j)]
                                                             : "b" + std::to_string(j + 1);
    r.estimate = fit.beta(j);
    r.std_error = std::sqrt(scale * fit.cov_unscaled(j, j));
    r.t_value = r.estimate / r.std_error;
    r.p_value = ref == WaldReference::StudentT ? t_two_sided(r.t_value, df)
                                               : std::clamp(2.0 * normal_sf(std::abs(r.t_value)), 0.0, 1.0);
    rows.push_back(r);
  }
  return rows;
}

/// Ordinary least squares with residual variance D/(n-p).
struct OlsSummary {
  GlmFit fit;
  double deviance = 0.0;
  double sigma2 = 0.0;
  int df_resid = 0;
  std::vector<WaldRow> table;
};

inline OlsSummary fit_ols(const LinearPredictorSpec& predictor, const ExperimentDataset& data) {
  OlsSummary s;
  s.fit = irls_fit(predictor, data, GlmSpec{});
  s.df_resid = static_cast<int>(data.size()) - static_cast<int>(predictor.p());
  if (s.df_resid < 1) throw PreconditionError("OLS needs n > p for a residual variance");
  s.deviance = s.fit.deviance();
  s.sigma2 = s.deviance / s.df_resid;
  s.table = wald_table(s.fit, s.sigma2, s.df_resid);
  return s;
}

}  // namespace rpdmix

#endif  // RPDMIX_GLM_HPP
