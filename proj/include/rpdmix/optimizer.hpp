#ifndef RPDMIX_OPTIMIZER_HPP
#define RPDMIX_OPTIMIZER_HPP

// Minimize Var(Y)(x) subject to |E(Y)(x) - target| <= mean_tol over a boxed
// slice of the simplex, parameterized by (x1, x2) with x3 = 1 - x1 - x2.
//
// solve(): augmented Lagrangian (PHR form on the two-sided band) around
// Nelder-Mead, from stratified random starts plus the best band points of a
// coarse scan, then a polish that walks the band edge. grid_oracle(): plain
// exhaustive scan, used to check solve().

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "rpdmix/dataset.hpp"
#include "rpdmix/errors.hpp"
#include "rpdmix/moments.hpp"
#include "rpdmix/probstats.hpp"

namespace rpdmix {

struct Bounds {
  std::array<double, 3> lower{0.25, 0.0, 0.0};
  std::array<double, 3> upper{1.0, 0.75, 0.75};

  void validate() const {
    double sl = 0.0;
    double su = 0.0;
    for (int i = 0; i < 3; ++i) {
      if (!(lower[i] >= 0.0 && lower[i] <= upper[i] && upper[i] <= 1.0))
        throw ValidationError("bounds must satisfy 0 <= l_i <= u_i <= 1");
      sl += lower[i];
      su += upper[i];
    }
    if (sl > 1.0 + 1e-12 || su < 1.0 - 1e-12) throw ValidationError("bounds exclude the simplex");
  }
  bool contains(const Blend& x, double tol = 1e-12) const {
    for (int i = 0; i < 3; ++i)
      if (x[i] < lower[i] - tol || x[i] > upper[i] + tol) return false;
    return true;
  }
};

template <MomentModelLike M>
struct RobustDesignProblem {
  const M* model = nullptr;
  double target = 530.0;
  Bounds bounds;
};

struct OptimResult {
  Blend x_star{0.0, 0.0, 0.0};
  double var_star = std::numeric_limits<double>::quiet_NaN();
  double mean_at_star = std::numeric_limits<double>::quiet_NaN();
  bool feasible = false;
  int starts_tried = 0;
  int best_start = -1;
  double constraint_violation = std::numeric_limits<double>::infinity();  // max(0, |E - target| - tol)
  std::string message;
};

struct SolveOptions {
  double mean_tol = 1e-3;
  int n_starts = 32;
  std::uint64_t seed = 20240607;
  int scan_points = 200;   // per axis, feasibility scan and start seeding
  int scan_starts = 64;    // band crossings used as extra candidates (-1: all)
};

namespace detail {

inline Blend blend_of(double x1, double x2) { return {x1, x2, 1.0 - x1 - x2}; }

/// Deterministic ordering: variance, then x1, then x2.
inline bool better(double va, const Blend& a, double vb, const Blend& b) {
  if (va != vb) return va < vb;
  if (a[0] != b[0]) return a[0] < b[0];
  return a[1] < b[1];
}

template <MomentModelLike M>
struct Evaluator {
  const RobustDesignProblem<M>& prob;

  bool admissible(const Blend& x) const {
    if (!prob.bounds.contains(x)) return false;
    try {
      return prob.model->feasible(x);
    } catch (const Error&) {
      return false;
    }
  }
  /// {mean - target, variance}; both infinite when x is not admissible.
  std::pair<double, double> eval(const Blend& x) const {
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (!admissible(x)) return {inf, inf};
    try {
      const double c = prob.model->mean(x) - prob.target;
      const double v = prob.model->variance(x);
      if (!std::isfinite(c) || !std::isfinite(v)) return {inf, inf};
      return {c, v};
    } catch (const Error&) {
      return {inf, inf};
    }
  }
};

struct NmResult {
  std::array<double, 2> x{};
  double f = std::numeric_limits<double>::infinity();
};

/// Nelder-Mead in two dimensions. f may return +inf outside the domain.
inline NmResult nelder_mead(const std::function<double(const std::array<double, 2>&)>& f, std::array<double, 2> x0,
                            double step, int max_evals = 3000, double ftol = 1e-13, double xtol = 1e-10) {
  std::array<std::array<double, 2>, 3> s{x0, x0, x0};
  std::array<double, 3> fv{};
  fv[0] = f(s[0]);
  for (int k = 0; k < 2; ++k) {
    s[k + 1][k] += step;
    fv[k + 1] = f(s[k + 1]);
    if (!std::isfinite(fv[k + 1])) {
      s[k + 1][k] = x0[k] - step;
      fv[k + 1] = f(s[k + 1]);
    }
  }
  int evals = 3;
  auto order = [&] {
    std::array<int, 3> idx{0, 1, 2};
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return fv[a] < fv[b]; });
    const auto s2 = s;
    const auto f2 = fv;
    for (int i = 0; i < 3; ++i) {
      s[i] = s2[idx[i]];
      fv[i] = f2[idx[i]];
    }
  };
  auto lerp = [](const std::array<double, 2>& a, const std::array<double, 2>& b, double t) {
    return std::array<double, 2>{a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])};
  };
  while (evals < max_evals) {
    order();
    const double size = std::max({std::abs(s[1][0] - s[0][0]), std::abs(s[1][1] - s[0][1]),
                                  std::abs(s[2][0] - s[0][0]), std::abs(s[2][1] - s[0][1])});
    if (std::isfinite(fv[2]) && std::abs(fv[2] - fv[0]) <= ftol * (std::abs(fv[0]) + 1e-300) && size < xtol) break;
    if (size < 1e-14) break;
    const std::array<double, 2> c{(s[0][0] + s[1][0]) / 2, (s[0][1] + s[1][1]) / 2};
    const auto xr = lerp(c, s[2], -1.0);
    const double fr = f(xr);
    ++evals;
    if (fr < fv[0]) {
      const auto xe = lerp(c, s[2], -2.0);
      const double fe = f(xe);
      ++evals;
      if (fe < fr) {
        s[2] = xe;
        fv[2] = fe;
      } else {
        s[2] = xr;
        fv[2] = fr;
      }
    } else if (fr < fv[1]) {
      s[2] = xr;
      fv[2] = fr;
    } else {
      const bool outside = fr < fv[2];
      const auto xc = outside ? lerp(c, s[2], -0.5) : lerp(c, s[2], 0.5);
      const double fc = f(xc);
      ++evals;
      if (fc < (outside ? fr : fv[2])) {
        s[2] = xc;
        fv[2] = fc;
      } else {
        for (int i = 1; i < 3; ++i) {
          s[i] = lerp(s[0], s[i], 0.5);
          fv[i] = f(s[i]);
          ++evals;
        }
      }
    }
  }
  order();
  return {s[0], fv[0]};
}

}  // namespace detail

/// Exhaustive scan of the (x1, x2) lattice at the given step. Keeps points
/// inside the bounds, feasible for the model and within mean_tol of the
/// target; returns the minimum-variance survivor.
template <MomentModelLike M>
OptimResult grid_oracle(const RobustDesignProblem<M>& prob, double step, double mean_tol) {
  if (!(step > 0.0 && step <= 0.1)) throw PreconditionError("grid step must lie in (0, 0.1]");
  prob.bounds.validate();
  const detail::Evaluator<M> ev{prob};
  const auto& b = prob.bounds;
  const int n1 = static_cast<int>(std::floor((b.upper[0] - b.lower[0]) / step + 1e-9));
  const int n2 = static_cast<int>(std::floor((b.upper[1] - b.lower[1]) / step + 1e-9));
  OptimResult best;
  double closest = std::numeric_limits<double>::infinity();
  Blend closest_x{};
  int survivors = 0;
  for (int i = 0; i <= n1; ++i) {
    const double x1 = b.lower[0] + i * step;
    for (int j = 0; j <= n2; ++j) {
      const double x2 = b.lower[1] + j * step;
      const Blend x = detail::blend_of(x1, x2);
      if (!prob.bounds.contains(x, 1e-12)) continue;
      const auto [c, v] = ev.eval(x);
      if (!std::isfinite(v)) continue;
      if (std::abs(c) < closest) {
        closest = std::abs(c);
        closest_x = x;
      }
      if (!(std::abs(c) <= mean_tol)) continue;
      ++survivors;
      if (!best.feasible || detail::better(v, x, best.var_star, best.x_star)) {
        best.feasible = true;
        best.x_star = x;
        best.var_star = v;
        best.mean_at_star = c + prob.target;
        best.constraint_violation = 0.0;
      }
    }
  }
  best.starts_tried = survivors;
  if (!best.feasible) {
    best.x_star = closest_x;
    best.message = "no grid point within mean_tol of the target; closest |E - target| = " + std::to_string(closest);
    if (std::isfinite(closest)) {
      const auto [c, v] = ev.eval(closest_x);
      best.mean_at_star = c + prob.target;
      best.var_star = v;
      best.constraint_violation = std::abs(c) - mean_tol;
    }
  }
  return best;
}

namespace detail {

/// Linear constraints a.z <= b on z = (x1, x2) implied by the bounds.
struct Polygon {
  std::array<std::array<double, 2>, 6> a{};
  std::array<double, 6> b{};

  explicit Polygon(const Bounds& bd) {
    a = {{{-1, 0}, {1, 0}, {0, -1}, {0, 1}, {-1, -1}, {1, 1}}};
    b = {-bd.lower[0], bd.upper[0], -bd.lower[1], bd.upper[1], -(1.0 - bd.upper[2]), 1.0 - bd.lower[2]};
  }
  double slack(int k, const std::array<double, 2>& z) const { return b[k] - a[k][0] * z[0] - a[k][1] * z[1]; }
  /// Moves from z towards z + d, stopping at the first constraint hit.
  std::array<double, 2> clip(const std::array<double, 2>& z, const std::array<double, 2>& d) const {
    double t = 1.0;
    for (int k = 0; k < 6; ++k) {
      const double ad = a[k][0] * d[0] + a[k][1] * d[1];
      if (ad > 0.0) t = std::min(t, std::max(0.0, slack(k, z)) / ad);
    }
    return {z[0] + t * d[0], z[1] + t * d[1]};
  }
  /// Removes components of d that push through active constraints.
  bool restrict_direction(const std::array<double, 2>& z, std::array<double, 2>& d) const {
    int blocked = 0;
    for (int k = 0; k < 6; ++k) {
      if (slack(k, z) > 1e-12) continue;
      const double ad = a[k][0] * d[0] + a[k][1] * d[1];
      if (ad <= 0.0) continue;
      const double aa = a[k][0] * a[k][0] + a[k][1] * a[k][1];
      d = {d[0] - ad * a[k][0] / aa, d[1] - ad * a[k][1] / aa};
      ++blocked;
    }
    if (blocked == 0) return true;
    for (int k = 0; k < 6; ++k)
      if (slack(k, z) <= 1e-12 && a[k][0] * d[0] + a[k][1] * d[1] > 1e-15) return false;
    return d[0] != 0.0 || d[1] != 0.0;
  }
};

}  // namespace detail

/// Multi-start augmented-Lagrangian solve of the robust-design problem.
/// Every candidate (the end point of each augmented-Lagrangian run and each
/// band crossing found by the scan) is projected onto the level set
/// E = target and slid along it to a local variance minimum; the best few
/// are then refined on both edges of the band.
template <MomentModelLike M>
OptimResult solve(const RobustDesignProblem<M>& prob, const SolveOptions& opt = {}) {
  if (!prob.model) throw PreconditionError("problem has no moment model");
  if (!(opt.mean_tol > 0.0)) throw PreconditionError("mean_tol must be positive");
  prob.bounds.validate();
  const detail::Evaluator<M> ev{prob};
  const detail::Polygon poly(prob.bounds);
  const auto& b = prob.bounds;
  const double tol = opt.mean_tol;
  constexpr double inf = std::numeric_limits<double>::infinity();
  using Z = std::array<double, 2>;

  auto cv = [&](const Z& z) { return ev.eval(detail::blend_of(z[0], z[1])); };

  // Coarse scan: feasibility precondition and start seeding.
  struct ScanPt {
    Blend x;
    double c;
    double v;
  };
  const int N = std::max(opt.scan_points, 2);
  std::vector<ScanPt> grid(static_cast<std::size_t>(N * N), ScanPt{{}, inf, inf});
  const double h1 = (b.upper[0] - b.lower[0]) / (N - 1);
  const double h2 = (b.upper[1] - b.lower[1]) / (N - 1);
  double closest = inf;
  Blend closest_x{};
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) {
      const Blend x = detail::blend_of(b.lower[0] + i * h1, b.lower[1] + j * h2);
      const auto [c, v] = ev.eval(x);
      grid[static_cast<std::size_t>(i * N + j)] = {x, c, v};
      if (std::isfinite(v) && std::abs(c) < closest) {
        closest = std::abs(c);
        closest_x = x;
      }
    }
  std::vector<ScanPt> crossings;
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) {
      const auto& p = grid[static_cast<std::size_t>(i * N + j)];
      if (!std::isfinite(p.v)) continue;
      bool cross = std::abs(p.c) <= tol;
      for (auto [di, dj] : {std::pair{1, 0}, std::pair{0, 1}}) {
        if (i + di >= N || j + dj >= N) continue;
        const auto& q = grid[static_cast<std::size_t>((i + di) * N + j + dj)];
        if (std::isfinite(q.v) && (p.c > 0) != (q.c > 0)) cross = true;
      }
      if (cross) crossings.push_back(p);
    }

  OptimResult res;
  if (crossings.empty()) {
    res.x_star = closest_x;
    res.message = "infeasible: no scan point reaches the target band; closest |E - target| = " +
                  std::to_string(closest);
    if (std::isfinite(closest)) {
      const auto [c, v] = ev.eval(closest_x);
      res.mean_at_star = c + prob.target;
      res.var_star = v;
      res.constraint_violation = std::abs(c) - tol;
    }
    return res;
  }
  std::sort(crossings.begin(), crossings.end(),
            [](const ScanPt& a, const ScanPt& c) { return detail::better(a.v, a.x, c.v, c.x); });

  // Gradient of E by central differences (one-sided next to the boundary).
  auto grad_c = [&](const Z& z, double c0) -> Z {
    constexpr double fd = 1e-6;
    Z g{};
    for (int k = 0; k < 2; ++k) {
      Z zp = z;
      Z zm = z;
      zp[k] += fd;
      zm[k] -= fd;
      const double cp = cv(zp).first;
      const double cm = cv(zm).first;
      if (std::isfinite(cp) && std::isfinite(cm))
        g[k] = (cp - cm) / (2 * fd);
      else if (std::isfinite(cp))
        g[k] = (cp - c0) / fd;
      else if (std::isfinite(cm))
        g[k] = (c0 - cm) / fd;
      else
        return {inf, inf};
    }
    return g;
  };

  // Newton steps onto E - target = s, sliding along active bounds.
  auto project = [&](Z z, double s) -> Z {
    for (int it = 0; it < 60; ++it) {
      const auto [c, v] = cv(z);
      if (!std::isfinite(v)) return {inf, inf};
      const double r = c - s;
      if (std::abs(r) <= 1e-4 * tol) return z;
      const Z g = grad_c(z, c);
      const double gg = g[0] * g[0] + g[1] * g[1];
      if (!std::isfinite(gg) || gg <= 0.0) return {inf, inf};
      Z d{-r * g[0] / gg, -r * g[1] / gg};
      if (!poly.restrict_direction(z, d)) return {inf, inf};
      const double gd = g[0] * d[0] + g[1] * d[1];
      if (std::abs(gd) < 1e-300) return {inf, inf};
      const double scale = -r / gd;  // full Newton along the restricted direction
      d = {d[0] * scale, d[1] * scale};
      Z zn = poly.clip(z, d);
      for (int h = 0; h < 40 && !std::isfinite(cv(zn).second); ++h) {
        d = {d[0] * 0.5, d[1] * 0.5};
        zn = poly.clip(z, d);
      }
      if (zn == z) return {inf, inf};
      z = zn;
    }
    return {inf, inf};
  };

  // Golden-section slides along the tangent of the level set.
  auto polish = [&](Z z, double s, double width) -> std::pair<Z, double> {
    z = project(z, s);
    if (!std::isfinite(z[0])) return {z, inf};
    double fz = cv(z).second;
    for (int round = 0; round < 60 && width > 1e-10; ++round) {
      const Z g = grad_c(z, cv(z).first);
      const double gn = std::hypot(g[0], g[1]);
      if (!std::isfinite(gn) || gn <= 0.0) break;
      const Z t{-g[1] / gn, g[0] / gn};
      auto at = [&](double a) -> std::pair<Z, double> {
        const Z p = project(poly.clip(z, {a * t[0], a * t[1]}), s);
        return {p, std::isfinite(p[0]) ? cv(p).second : inf};
      };
      constexpr double gr = 0.6180339887498949;
      double lo = -width;
      double hi = width;
      double a1 = hi - gr * (hi - lo);
      double a2 = lo + gr * (hi - lo);
      auto r1 = at(a1);
      auto r2 = at(a2);
      while (hi - lo > std::max(1e-12, width * 1e-3)) {
        if (r1.second <= r2.second) {
          hi = a2;
          a2 = a1;
          r2 = r1;
          a1 = hi - gr * (hi - lo);
          r1 = at(a1);
        } else {
          lo = a1;
          a1 = a2;
          r1 = r2;
          a2 = lo + gr * (hi - lo);
          r2 = at(a2);
        }
      }
      const auto& bestr = r1.second <= r2.second ? r1 : r2;
      if (bestr.second < fz) {
        const double moved = std::hypot(bestr.first[0] - z[0], bestr.first[1] - z[1]);
        z = bestr.first;
        fz = bestr.second;
        width = std::clamp(2.0 * moved, width * 0.1, width * 2.0);
      } else {
        width *= 0.1;
      }
    }
    return {z, fz};
  };

  // Augmented-Lagrangian local solve (PHR on c - tol <= 0, -c - tol <= 0).
  auto al_solve = [&](Z z) -> Z {
    const double f0 = cv(z).second;
    if (!std::isfinite(f0)) return {inf, inf};
    const double fscale = std::max(1.0, std::abs(f0));
    double lam1 = 0.0;
    double lam2 = 0.0;
    double rho = 1.0;
    double last_viol = inf;
    for (int outer = 0; outer < 25; ++outer) {
      auto L = [&](const Z& p) {
        const auto [c, v] = cv(p);
        if (!std::isfinite(v)) return inf;
        const double t1 = std::max(0.0, lam1 + rho * (c - tol));
        const double t2 = std::max(0.0, lam2 + rho * (-c - tol));
        return v / fscale + (t1 * t1 - lam1 * lam1 + t2 * t2 - lam2 * lam2) / (2.0 * rho);
      };
      z = detail::nelder_mead(L, z, outer == 0 ? 0.05 : 0.01, 1500, 1e-12, 1e-9).x;
      const double c = cv(z).first;
      if (!std::isfinite(c)) return {inf, inf};
      lam1 = std::max(0.0, lam1 + rho * (c - tol));
      lam2 = std::max(0.0, lam2 + rho * (-c - tol));
      const double viol = std::max(0.0, std::abs(c) - tol);
      if (viol <= 0.5 * tol) break;
      if (viol > 0.25 * last_viol) rho = std::min(rho * 10.0, 1e10);
      last_viol = viol;
    }
    return z;
  };

  // Candidates: augmented-Lagrangian runs from stratified starts, then band
  // crossings from the scan thinned to one per 0.02 x 0.02 neighbourhood.
  std::vector<Z> candidates;
  {
    SeededStream rng(opt.seed);
    const int ns = std::max(opt.n_starts, 0);
    const int cols = std::max(1, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(ns)))));
    const int rows = ns > 0 ? (ns + cols - 1) / cols : 0;
    for (int k = 0; k < ns; ++k) {
      const int ci = k % cols;
      const int ri = k / cols;
      Z pick{};
      bool ok = false;
      for (int attempt = 0; attempt < 20 && !ok; ++attempt) {
        const double u1 = (ci + rng.uniform()) / cols;
        const double u2 = (ri + rng.uniform()) / rows;
        pick = {b.lower[0] + u1 * (b.upper[0] - b.lower[0]), b.lower[1] + u2 * (b.upper[1] - b.lower[1])};
        ok = ev.admissible(detail::blend_of(pick[0], pick[1]));
      }
      if (!ok) continue;
      const Z z = al_solve(pick);
      if (std::isfinite(z[0])) candidates.push_back(z);
    }
    std::vector<Blend> taken;
    for (const auto& p : crossings) {
      if (opt.scan_starts >= 0 && static_cast<int>(taken.size()) >= opt.scan_starts) break;
      bool far = true;
      for (const auto& t : taken)
        if (std::abs(t[0] - p.x[0]) < 0.02 && std::abs(t[1] - p.x[1]) < 0.02) {
          far = false;
          break;
        }
      if (!far) continue;
      taken.push_back(p.x);
      candidates.push_back({p.x[0], p.x[1]});
    }
  }

  struct Local {
    Z z;
    double v;
    int k;
  };
  std::vector<Local> locals;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const auto [z, v] = polish(candidates[k], 0.0, 0.02);
    if (std::isfinite(v)) locals.push_back({z, v, static_cast<int>(k)});
  }
  std::sort(locals.begin(), locals.end(), [](const Local& a, const Local& c) {
    return detail::better(a.v, detail::blend_of(a.z[0], a.z[1]), c.v, detail::blend_of(c.z[0], c.z[1]));
  });

  double best_v = inf;
  Blend best_x{};
  int best_k = -1;
  auto consider = [&](const Z& z, int k) {
    if (!std::isfinite(z[0])) return;
    const Blend x = detail::blend_of(z[0], z[1]);
    const auto [c, v] = ev.eval(x);
    if (!(std::abs(c) <= tol) || !std::isfinite(v)) return;
    if (best_k < 0 || detail::better(v, x, best_v, best_x)) {
      best_v = v;
      best_x = x;
      best_k = k;
    }
  };
  for (std::size_t i = 0; i < locals.size() && i < 4; ++i) {
    consider(locals[i].z, locals[i].k);
    for (double s : {tol * (1.0 - 1e-6), -tol * (1.0 - 1e-6)}) {
      const auto [z, v] = polish(locals[i].z, s, 1e-3);
      consider(z, locals[i].k);
    }
  }
  // Scan points already inside the band are valid answers too.
  for (const auto& p : crossings)
    if (std::abs(p.c) <= tol && (best_k < 0 || detail::better(p.v, p.x, best_v, best_x))) {
      best_v = p.v;
      best_x = p.x;
      best_k = -2;
    }

  res.starts_tried = static_cast<int>(candidates.size());
  if (best_k == -1) {
    const auto& p = crossings.front();
    res.x_star = p.x;
    res.var_star = p.v;
    res.mean_at_star = p.c + prob.target;
    res.constraint_violation = std::max(0.0, std::abs(p.c) - tol);
    res.message = "local solves did not reach the target band";
    return res;
  }
  const auto [c, v] = ev.eval(best_x);
  res.x_star = best_x;
  res.var_star = v;
  res.mean_at_star = c + prob.target;
  res.feasible = true;
  res.best_start = best_k;
  res.constraint_violation = std::max(0.0, std::abs(c) - tol);
  return res;
}

struct ScenarioSpec {
  double mu_mix = 15.0;      // minutes
  double var_mix = 0.0;      // minutes^2
  double mu_proof = 47.5;    // minutes
  double var_proof = 0.0;    // minutes^2
};

inline GaussianNoise scenario_to_coded(const ScenarioSpec& s, const NoiseCoding& coding = {}) {
  if (!(s.var_mix >= 0.0) || !(s.var_proof >= 0.0)) throw DomainError("scenario variances must be >= 0");
  GaussianNoise g;
  g.mu = {coding.code(0, s.mu_mix), coding.code(1, s.mu_proof)};
  g.sigma2 = {coding.code_variance(0, s.var_mix), coding.code_variance(1, s.var_proof)};
  return g;
}

struct ScenarioRequest {
  ScenarioSpec scenario;
  MomentMethod method = MomentMethod::Jmmd;
  MomentMode mode = MomentMode::Paper;
};

struct ScenarioRow {
  ScenarioRequest request;
  OptimResult result;
  std::string error;  // non-empty when the row failed
};

using ModelFactory = std::function<MomentModel(MomentMethod, MomentMode, const GaussianNoise&)>;

/// One solve per request; failures are recorded in the row.
inline std::vector<ScenarioRow> run_scenarios(const std::vector<ScenarioRequest>& requests, const ModelFactory& make,
                                              double target, const SolveOptions& opt = {},
                                              const Bounds& bounds = {}, const NoiseCoding& coding = {}) {
  std::vector<ScenarioRow> rows;
  for (const auto& r : requests) {
    ScenarioRow row;
    row.request = r;
    try {
      const MomentModel model = make(r.method, r.mode, scenario_to_coded(r.scenario, coding));
      RobustDesignProblem<MomentModel> prob{&model, target, bounds};
      row.result = solve(prob, opt);
      if (!row.result.feasible) row.error = row.result.message;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace rpdmix

#endif  // RPDMIX_OPTIMIZER_HPP
