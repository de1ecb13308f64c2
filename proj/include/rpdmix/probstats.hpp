#ifndef RPDMIX_PROBSTATS_HPP
#define RPDMIX_PROBSTATS_HPP

// Distribution functions, a seeded random stream, the Monte Carlo moment
// oracle and the studentized Breusch-Pagan test.
//
// Incomplete gamma: power series for x < a+1, Lentz continued fraction
// otherwise. Incomplete beta: continued fraction, evaluated directly for
// x < (a+1)/(a+b+2) and through the symmetry I_x(a,b) = 1 - I_{1-x}(b,a)
// above that point.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "rpdmix/errors.hpp"

namespace rpdmix {

namespace detail {

inline constexpr double kSpecialEps = 1e-16;
inline constexpr double kTiny = 1e-300;
inline constexpr int kSpecialMaxIter = 10000;

inline double gamma_p_series(double a, double x) {
  double ap = a;
  double del = 1.0 / a;
  double sum = del;
  for (int n = 0; n < kSpecialMaxIter; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::abs(del) < std::abs(sum) * kSpecialEps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

inline double gamma_q_contfrac(double a, double x) {
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kSpecialMaxIter; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kSpecialEps) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

inline double beta_contfrac(double a, double b, double x) {
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m < kSpecialMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kSpecialEps) break;
  }
  return h;
}

inline double clamp01(double p) { return std::clamp(p, 0.0, 1.0); }

}  // namespace detail

/// Regularized upper incomplete gamma Q(a, x).
inline double gamma_q(double a, double x) {
  if (!(a > 0.0) || x < 0.0 || std::isnan(x)) throw DomainError("gamma_q: need a > 0 and x >= 0");
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  if (x < a + 1.0) return detail::clamp01(1.0 - detail::gamma_p_series(a, x));
  return detail::clamp01(detail::gamma_q_contfrac(a, x));
}

/// Regularized incomplete beta I_x(a, b).
inline double beta_inc(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0) || x < 0.0 || x > 1.0) throw DomainError("beta_inc: argument out of range");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double lbt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double bt = std::exp(lbt);
  if (x < (a + 1.0) / (a + b + 2.0)) return detail::clamp01(bt * detail::beta_contfrac(a, b, x) / a);
  return detail::clamp01(1.0 - bt * detail::beta_contfrac(b, a, 1.0 - x) / b);
}

inline double chisq_sf(double x, int df) {
  if (df < 1) throw DomainError("chisq_sf: df must be >= 1");
  if (std::isnan(x)) throw DomainError("chisq_sf: x is NaN");
  if (x <= 0.0) return 1.0;
  return gamma_q(0.5 * df, 0.5 * x);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double normal_sf(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

/// Upper tail of Student's t.
inline double t_sf(double x, double df) {
  if (!(df >= 1.0)) throw DomainError("t_sf: df must be >= 1");
  if (std::isnan(x)) throw DomainError("t_sf: x is NaN");
  if (x == 0.0) return 0.5;
  const double tail = 0.5 * beta_inc(0.5 * df, 0.5, df / (df + x * x));
  return x > 0.0 ? tail : 1.0 - tail;
}

inline double t_two_sided(double t, double df) { return detail::clamp01(2.0 * t_sf(std::abs(t), df)); }

/// Inverse standard normal CDF (Acklam's rational approximation plus one
/// Halley refinement).
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    throw DomainError("normal_quantile: p outside [0, 1]");
  }
  static constexpr std::array<double, 6> a{-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                           1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr std::array<double, 5> b{-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                           6.680131188771972e+01, -1.328068155288572e+01};
  static constexpr std::array<double, 6> c{-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                           -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr std::array<double, 4> d{7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                           3.754408661907416e+00};
  constexpr double plow = 0.02425;
  double x = 0.0;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

/// Independent Gaussian noise variables in coded units.
struct GaussianNoise {
  std::array<double, 2> mu{0.0, 0.0};
  std::array<double, 2> sigma2{0.0, 0.0};
  double correlation = 0.0;

  void validate() const {
    for (double s : sigma2)
      if (!(s >= 0.0) || !std::isfinite(s)) throw DomainError("noise variance must be finite and >= 0");
    for (double m : mu)
      if (!std::isfinite(m)) throw DomainError("noise mean must be finite");
    if (correlation != 0.0) throw UnsupportedFormError("correlated noise variables are not supported");
  }
};

/// xoshiro256** seeded through splitmix64. Integer output is identical on
/// every platform; normals use Box-Muller.
class SeededStream {
 public:
  explicit SeededStream(std::uint64_t seed = 0) : seed_(seed) {
    std::uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
  }

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() noexcept {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform on [0, 1).
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do u1 = uniform();
    while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(th);
    has_spare_ = true;
    return r * std::cos(th);
  }

  /// Advances 2^128 steps; used to hand out non-overlapping substreams.
  void jump() noexcept {
    static constexpr std::uint64_t J[] = {0x180ec6d33cfd0abaULL, 0xd5a61266f0c9392cULL, 0xa9582618e03fc9aaULL,
                                          0x39abdc4529b1661cULL};
    std::array<std::uint64_t, 4> acc{0, 0, 0, 0};
    for (std::uint64_t j : J) {
      for (int b = 0; b < 64; ++b) {
        if (j & (std::uint64_t{1} << b))
          for (int k = 0; k < 4; ++k) acc[k] ^= s_[k];
        next_u64();
      }
    }
    s_ = acc;
    has_spare_ = false;
  }

  /// Copy of this stream advanced by (k+1) jumps.
  SeededStream split(int k) const {
    SeededStream c = *this;
    for (int i = 0; i <= k; ++i) c.jump();
    return c;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }
  static std::uint64_t splitmix64(std::uint64_t& x) noexcept {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::array<std::uint64_t, 4> s_{};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

struct McMoments {
  double mean = 0.0;
  double var = 0.0;
  double se_mean = 0.0;
  double se_var = 0.0;  // from the sample fourth central moment
  std::size_t n = 0;
};

namespace detail {

template <class Draw>
McMoments accumulate_moments(std::size_t n_samples, Draw&& draw) {
  double mean = 0.0;
  double m2 = 0.0;
  double m3 = 0.0;
  double m4 = 0.0;
  for (std::size_t i = 0; i < n_samples; ++i) {
    const double v = draw(i);
    const double n1 = static_cast<double>(i);
    const double n = n1 + 1.0;
    const double delta = v - mean;
    const double dn = delta / n;
    const double dn2 = dn * dn;
    const double t1 = delta * dn * n1;
    mean += dn;
    m4 += t1 * dn2 * (n * n - 3.0 * n + 3.0) + 6.0 * dn2 * m2 - 4.0 * dn * m3;
    m3 += t1 * dn * (n - 2.0) - 3.0 * dn * m2;
    m2 += t1;
  }
  McMoments out;
  const double n = static_cast<double>(n_samples);
  out.n = n_samples;
  out.mean = mean;
  out.var = m2 / (n - 1.0);
  out.se_mean = std::sqrt(out.var / n);
  const double mu2 = m2 / n;
  const double mu4 = m4 / n;
  out.se_var = std::sqrt(std::max(0.0, mu4 - mu2 * mu2) / n);
  return out;
}

inline void throw_non_finite(std::size_t i, double z1, double z2) {
  std::ostringstream msg;
  msg.precision(17);
  msg << "non-finite function value at draw " << i << " (z1=" << z1 << ", z2=" << z2 << ")";
  throw DomainError(msg.str());
}

}  // namespace detail

/// Sample moments of f(Z1, Z2) under independent Gaussian noise (Welford
/// accumulation).
inline McMoments mc_moments(const std::function<double(double, double)>& f, const GaussianNoise& noise,
                            std::size_t n_samples, SeededStream& stream) {
  noise.validate();
  if (n_samples < 1000) throw PreconditionError("mc_moments needs at least 1000 samples");
  const double s1 = std::sqrt(noise.sigma2[0]);
  const double s2 = std::sqrt(noise.sigma2[1]);
  return detail::accumulate_moments(n_samples, [&](std::size_t i) {
    const double z1 = noise.mu[0] + s1 * stream.normal();
    const double z2 = noise.mu[1] + s2 * stream.normal();
    const double v = f(z1, z2);
    if (!std::isfinite(v)) detail::throw_non_finite(i, z1, z2);
    return v;
  });
}

/// As mc_moments, with a third independent standard normal e passed to f
/// (for responses with their own error term).
inline McMoments mc_moments_with_error(const std::function<double(double, double, double)>& f,
                                       const GaussianNoise& noise, std::size_t n_samples, SeededStream& stream) {
  noise.validate();
  if (n_samples < 1000) throw PreconditionError("mc_moments needs at least 1000 samples");
  const double s1 = std::sqrt(noise.sigma2[0]);
  const double s2 = std::sqrt(noise.sigma2[1]);
  return detail::accumulate_moments(n_samples, [&](std::size_t i) {
    const double z1 = noise.mu[0] + s1 * stream.normal();
    const double z2 = noise.mu[1] + s2 * stream.normal();
    const double e = stream.normal();
    const double v = f(z1, z2, e);
    if (!std::isfinite(v)) detail::throw_non_finite(i, z1, z2);
    return v;
  });
}

struct BreuschPaganResult {
  double stat = 0.0;
  int df = 0;
  double p_value = 1.0;
  bool constant_added = false;
};

/// Koenker's studentized Breusch-Pagan statistic n*R^2 from regressing the
/// squared residuals on the auxiliary columns. A constant column is added
/// unless the columns already span it.
inline BreuschPaganResult breusch_pagan_studentized(const Eigen::MatrixXd& aux, const Eigen::VectorXd& resid) {
  const Eigen::Index n = resid.size();
  if (aux.rows() != n) throw PreconditionError("auxiliary design and residuals differ in length");
  if (aux.cols() < 1) throw PreconditionError("auxiliary design has no columns");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(aux);
  qr.setThreshold(1e-10);
  if (qr.rank() < aux.cols())
    throw SingularityError("auxiliary regression is rank-deficient",
                           std::abs(qr.matrixR()(qr.rank(), qr.rank())));

  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
  const Eigen::VectorXd ones_fit = aux * qr.solve(ones);
  const bool spans_constant = (ones - ones_fit).norm() <= 1e-8 * std::sqrt(static_cast<double>(n));

  Eigen::MatrixXd Z = aux;
  if (!spans_constant) {
    Z.conservativeResize(n, aux.cols() + 1);
    Z.col(aux.cols()) = ones;
  }

  const Eigen::VectorXd e2 = resid.array().square();
  const Eigen::VectorXd w = e2.array() - e2.mean();
  const double tss = w.squaredNorm();

  BreuschPaganResult out;
  out.constant_added = !spans_constant;
  out.df = static_cast<int>(Z.cols()) - 1;
  if (tss <= 1e-300 * static_cast<double>(n)) return out;

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qz(Z);
  const Eigen::VectorXd fitted = Z * qz.solve(e2);
  const Eigen::VectorXd fc = fitted.array() - e2.mean();
  out.stat = static_cast<double>(n) * fc.squaredNorm() / tss;
  out.p_value = out.df >= 1 ? chisq_sf(out.stat, out.df) : 1.0;
  return out;
}

}  // namespace rpdmix

#endif  // RPDMIX_PROBSTATS_HPP
