#ifndef RPDMIX_TERMS_HPP
#define RPDMIX_TERMS_HPP

// Scheffe mixture factors crossed with noise monomials, the term grammar,
// design matrices and the noise-polynomial view of a fitted predictor.
//
// Grammar:  mix_part[':'noise_part]
//   mix_part   xi | xi*xj | x1*x2*x3 | xi*xj*(xi-xj)
//   noise_part z1 | z2 | z1^2 | z2^2 | z1*z2

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "rpdmix/dataset.hpp"
#include "rpdmix/errors.hpp"

namespace rpdmix {

struct MixtureFactor {
  enum class Kind { Linear, Binary, Ternary, CubicDiff };

  Kind kind = Kind::Linear;
  std::array<int, 3> idx{0, 0, 0};  // 0-based, ascending
  int sign = 1;                     // only CubicDiff uses -1

  static MixtureFactor linear(int i) { return {Kind::Linear, {i, 0, 0}, 1}; }
  static MixtureFactor binary(int i, int j) { return {Kind::Binary, {std::min(i, j), std::max(i, j), 0}, 1}; }
  static MixtureFactor ternary() { return {Kind::Ternary, {0, 1, 2}, 1}; }
  static MixtureFactor cubic_diff(int i, int j, int sign = 1) {
    return {Kind::CubicDiff, {std::min(i, j), std::max(i, j), 0}, i < j ? sign : -sign};
  }

  int arity() const noexcept {
    switch (kind) {
      case Kind::Linear: return 1;
      case Kind::Binary: return 2;
      case Kind::Ternary: return 3;
      case Kind::CubicDiff: return 2;
    }
    return 0;
  }

  double eval(const Blend& x) const noexcept {
    switch (kind) {
      case Kind::Linear: return x[idx[0]];
      case Kind::Binary: return x[idx[0]] * x[idx[1]];
      case Kind::Ternary: return x[0] * x[1] * x[2];
      case Kind::CubicDiff: return sign * x[idx[0]] * x[idx[1]] * (x[idx[0]] - x[idx[1]]);
    }
    return 0.0;
  }

  std::string label() const {
    auto v = [](int i) { return "x" + std::to_string(i + 1); };
    switch (kind) {
      case Kind::Linear: return v(idx[0]);
      case Kind::Binary: return v(idx[0]) + "*" + v(idx[1]);
      case Kind::Ternary: return "x1*x2*x3";
      case Kind::CubicDiff: {
        const int a = sign > 0 ? idx[0] : idx[1];
        const int b = sign > 0 ? idx[1] : idx[0];
        return v(a) + "*" + v(b) + "*(" + v(a) + "-" + v(b) + ")";
      }
    }
    return {};
  }

  friend bool operator==(const MixtureFactor&, const MixtureFactor&) = default;
  friend auto operator<=>(const MixtureFactor&, const MixtureFactor&) = default;
};

struct NoiseMonomial {
  int e1 = 0;
  int e2 = 0;

  double eval(double z1, double z2) const noexcept { return std::pow(z1, e1) * std::pow(z2, e2); }
  int degree() const noexcept { return e1 + e2; }

  std::string label() const {
    if (e1 == 0 && e2 == 0) return "";
    auto part = [](const char* name, int e) -> std::string {
      if (e == 0) return "";
      return e == 1 ? std::string(name) : std::string(name) + "^" + std::to_string(e);
    };
    const std::string a = part("z1", e1);
    const std::string b = part("z2", e2);
    if (!a.empty() && !b.empty()) return a + "*" + b;
    return a + b;
  }

  friend bool operator==(const NoiseMonomial&, const NoiseMonomial&) = default;
  friend auto operator<=>(const NoiseMonomial&, const NoiseMonomial&) = default;
};

inline const NoiseMonomial kConst{0, 0};
inline const NoiseMonomial kZ1{1, 0};
inline const NoiseMonomial kZ2{0, 1};
inline const NoiseMonomial kZ1Sq{2, 0};
inline const NoiseMonomial kZ2Sq{0, 2};
inline const NoiseMonomial kZ1Z2{1, 1};

struct Term {
  MixtureFactor mixture;
  NoiseMonomial noise;

  std::string label() const {
    const std::string n = noise.label();
    return n.empty() ? mixture.label() : mixture.label() + ":" + n;
  }
  double eval(const Observation& o) const noexcept { return mixture.eval(o.x) * noise.eval(o.z[0], o.z[1]); }

  friend bool operator==(const Term&, const Term&) = default;
};

namespace detail {

inline std::string strip_spaces(std::string_view s) {
  std::string out;
  for (char c : s)
    if (!std::isspace(static_cast<unsigned char>(c))) out.push_back(c);
  return out;
}

inline int parse_component(const std::string& tok) {
  if (tok.size() != 2 || tok[0] != 'x' || tok[1] < '1' || tok[1] > '0' + kComponents)
    throw ParseError("unknown mixture variable '" + tok + "'");
  return tok[1] - '1';
}

inline std::vector<std::string> split_star_outside_parens(const std::string& s) {
  std::vector<std::string> parts;
  std::string cur;
  int depth = 0;
  for (char c : s) {
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (c == '*' && depth == 0) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  parts.push_back(cur);
  return parts;
}

inline MixtureFactor parse_mixture(const std::string& s) {
  if (s.empty()) throw ParseError("empty mixture part");
  const auto parts = split_star_outside_parens(s);
  if (parts.size() == 1) return MixtureFactor::linear(parse_component(parts[0]));
  if (parts.size() == 2) {
    const int i = parse_component(parts[0]);
    const int j = parse_component(parts[1]);
    if (i == j) throw ParseError("repeated mixture variable in '" + s + "'");
    return MixtureFactor::binary(i, j);
  }
  if (parts.size() == 3) {
    const std::string& last = parts[2];
    if (!last.empty() && last.front() == '(') {
      if (last.back() != ')') throw ParseError("malformed difference factor '" + last + "'");
      const std::string inner = last.substr(1, last.size() - 2);
      const auto dash = inner.find('-');
      if (dash == std::string::npos) throw ParseError("malformed difference factor '" + last + "'");
      const int i = parse_component(parts[0]);
      const int j = parse_component(parts[1]);
      const int di = parse_component(inner.substr(0, dash));
      const int dj = parse_component(inner.substr(dash + 1));
      if (i == j) throw ParseError("repeated mixture variable in '" + s + "'");
      if (!((di == i && dj == j) || (di == j && dj == i)))
        throw ParseError("difference factor '" + last + "' does not match product " + parts[0] + "*" + parts[1]);
      return MixtureFactor::cubic_diff(di, dj);
    }
    std::array<int, 3> c{parse_component(parts[0]), parse_component(parts[1]), parse_component(last)};
    std::sort(c.begin(), c.end());
    if (c != std::array<int, 3>{0, 1, 2}) throw ParseError("ternary term must be x1*x2*x3, got '" + s + "'");
    return MixtureFactor::ternary();
  }
  throw ParseError("mixture part '" + s + "' has too many factors");
}

inline NoiseMonomial parse_noise(const std::string& s) {
  if (s.empty()) throw ParseError("empty noise part after ':'");
  NoiseMonomial m;
  for (const auto& f : split_star_outside_parens(s)) {
    int e = 1;
    std::string var = f;
    const auto caret = f.find('^');
    if (caret != std::string::npos) {
      var = f.substr(0, caret);
      const std::string ex = f.substr(caret + 1);
      if (ex.size() != 1 || !std::isdigit(static_cast<unsigned char>(ex[0])))
        throw ParseError("malformed exponent '" + ex + "'");
      e = ex[0] - '0';
      if (e < 1 || e > 2) throw ParseError("exponent '" + ex + "' out of range (1 or 2)");
    }
    if (var == "z1")
      m.e1 += e;
    else if (var == "z2")
      m.e2 += e;
    else
      throw ParseError("unknown noise variable '" + var + "'");
  }
  if (m.degree() > 2) throw ParseError("noise monomial '" + s + "' has degree above 2");
  return m;
}

}  // namespace detail

inline Term parse_term(std::string_view text) {
  const std::string s = detail::strip_spaces(text);
  const auto colon = s.find(':');
  Term t;
  t.mixture = detail::parse_mixture(s.substr(0, colon));
  if (colon != std::string::npos) t.noise = detail::parse_noise(s.substr(colon + 1));
  return t;
}

/// Ordered, duplicate-free list of terms.
class LinearPredictorSpec {
 public:
  LinearPredictorSpec() = default;
  explicit LinearPredictorSpec(std::vector<Term> terms) : terms_(std::move(terms)) { validate(); }

  static LinearPredictorSpec from_labels(const std::vector<std::string>& labels) {
    std::vector<Term> t;
    t.reserve(labels.size());
    for (const auto& l : labels) t.push_back(parse_term(l));
    return LinearPredictorSpec(std::move(t));
  }

  const std::vector<Term>& terms() const noexcept { return terms_; }
  std::size_t p() const noexcept { return terms_.size(); }
  const Term& operator[](std::size_t i) const { return terms_[i]; }

  std::vector<std::string> labels() const {
    std::vector<std::string> out;
    for (const auto& t : terms_) out.push_back(t.label());
    return out;
  }

  /// Index of the term, or -1.
  int index_of(const Term& t) const {
    for (std::size_t i = 0; i < terms_.size(); ++i)
      if (terms_[i] == t) return static_cast<int>(i);
    return -1;
  }
  bool contains(const Term& t) const { return index_of(t) >= 0; }
  bool contains(std::string_view label) const { return contains(parse_term(label)); }

  LinearPredictorSpec without(const std::vector<Term>& drop) const {
    std::vector<Term> keep;
    for (const auto& t : terms_)
      if (std::find(drop.begin(), drop.end(), t) == drop.end()) keep.push_back(t);
    return LinearPredictorSpec(std::move(keep));
  }
  LinearPredictorSpec without(const std::vector<std::string>& drop) const {
    std::vector<Term> d;
    for (const auto& l : drop) d.push_back(parse_term(l));
    return without(d);
  }

  /// JSON array of labels.
  std::string to_json_array() const {
    std::string out = "[";
    for (std::size_t i = 0; i < terms_.size(); ++i) {
      if (i) out += ", ";
      out += "\"" + terms_[i].label() + "\"";
    }
    return out + "]";
  }

 private:
  void validate() const {
    if (terms_.empty()) throw ValidationError("linear predictor needs at least one term");
    std::set<std::string> seen;
    for (const auto& t : terms_)
      if (!seen.insert(t.label()).second) throw ValidationError("duplicate term '" + t.label() + "'");
  }

  std::vector<Term> terms_;
};

namespace detail {

inline LinearPredictorSpec cross(const std::vector<MixtureFactor>& mix, const std::vector<NoiseMonomial>& noise) {
  std::vector<Term> t;
  for (const auto& n : noise)
    for (const auto& m : mix) t.push_back({m, n});
  return LinearPredictorSpec(std::move(t));
}

}  // namespace detail

/// 7 mixture factors crossed with {1, z1, z2, z1^2}, noise-block order.
inline LinearPredictorSpec canonical_reduced_28() {
  using M = MixtureFactor;
  return detail::cross({M::linear(0), M::linear(1), M::linear(2), M::binary(0, 1), M::binary(0, 2),
                        M::cubic_diff(0, 1), M::cubic_diff(0, 2)},
                       {kConst, kZ1, kZ2, kZ1Sq});
}

/// Full Scheffe cubic (10 factors) crossed with the full quadratic in z,
/// including the z2^2 block.
inline LinearPredictorSpec canonical_full_crossed() {
  using M = MixtureFactor;
  return detail::cross({M::linear(0), M::linear(1), M::linear(2), M::binary(0, 1), M::binary(0, 2),
                        M::binary(1, 2), M::ternary(), M::cubic_diff(0, 1), M::cubic_diff(0, 2),
                        M::cubic_diff(1, 2)},
                       {kConst, kZ1, kZ2, kZ1Sq, kZ2Sq, kZ1Z2});
}

inline Eigen::MatrixXd build_design_matrix(const LinearPredictorSpec& spec, const ExperimentDataset& data) {
  if (spec.p() == 0) throw PreconditionError("empty linear predictor");
  const auto n = static_cast<Eigen::Index>(data.size());
  Eigen::MatrixXd T(n, static_cast<Eigen::Index>(spec.p()));
  for (Eigen::Index i = 0; i < n; ++i)
    for (std::size_t j = 0; j < spec.p(); ++j)
      T(i, static_cast<Eigen::Index>(j)) = spec[j].eval(data.observations[static_cast<std::size_t>(i)]);
  return T;
}

/// A predictor regrouped as a polynomial in (z1, z2) at fixed x. Exponents
/// are at most 2 per variable.
struct NoisePolynomial {
  std::array<double, 9> coef{};  // index 3*e1 + e2

  static std::size_t slot(const NoiseMonomial& m) { return static_cast<std::size_t>(3 * m.e1 + m.e2); }
  double operator[](const NoiseMonomial& m) const { return coef[slot(m)]; }
  void add(const NoiseMonomial& m, double v) { coef[slot(m)] += v; }

  double eval(double z1, double z2) const {
    double s = 0.0;
    for (int e1 = 0; e1 < 3; ++e1)
      for (int e2 = 0; e2 < 3; ++e2) s += coef[static_cast<std::size_t>(3 * e1 + e2)] * NoiseMonomial{e1, e2}.eval(z1, z2);
    return s;
  }
  /// Nonzero monomials in (e1, e2) order.
  std::vector<std::pair<NoiseMonomial, double>> terms() const {
    std::vector<std::pair<NoiseMonomial, double>> out;
    for (int e1 = 0; e1 < 3; ++e1)
      for (int e2 = 0; e2 < 3; ++e2)
        if (coef[static_cast<std::size_t>(3 * e1 + e2)] != 0.0)
          out.emplace_back(NoiseMonomial{e1, e2}, coef[static_cast<std::size_t>(3 * e1 + e2)]);
    return out;
  }
};

inline void check_simplex(const Blend& x, double tol = kSimplexTol) {
  double s = 0.0;
  for (double v : x) {
    if (!std::isfinite(v) || v < -tol || v > 1.0 + tol) throw DomainError("proportion outside [0, 1]");
    s += v;
  }
  if (std::abs(s - 1.0) > tol) throw DomainError("proportions do not sum to 1");
}

inline NoisePolynomial noise_polynomial_coefficients(const LinearPredictorSpec& spec, const Eigen::VectorXd& coeffs,
                                                     const Blend& x) {
  if (static_cast<std::size_t>(coeffs.size()) != spec.p())
    throw PreconditionError("coefficient vector length does not match the term count");
  check_simplex(x);
  NoisePolynomial poly;
  for (std::size_t j = 0; j < spec.p(); ++j)
    poly.add(spec[j].noise, coeffs(static_cast<Eigen::Index>(j)) * spec[j].mixture.eval(x));
  return poly;
}

}  // namespace rpdmix

#endif  // RPDMIX_TERMS_HPP
