#ifndef RPDMIX_REPORT_HPP
#define RPDMIX_REPORT_HPP

// Tabular outputs shared by the CLI and the tests. Numbers are written with
// 17 significant digits so a CSV round-trips exactly; notes become leading
// '#' lines in CSV.

#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "rpdmix/dataset.hpp"
#include "rpdmix/glm.hpp"
#include "rpdmix/jmmd.hpp"
#include "rpdmix/optimizer.hpp"

namespace rpdmix {

using Cell = std::variant<std::string, double, long long>;

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
  std::vector<std::string> notes;

  void add(std::vector<Cell> row) {
    if (row.size() != columns.size()) throw PreconditionError("table '" + name + "': row width mismatch");
    rows.push_back(std::move(row));
  }
};

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string cell_text(const Cell& c) {
  if (const auto* s = std::get_if<std::string>(&c)) return csv_escape(*s);
  if (const auto* d = std::get_if<double>(&c)) return format_number(*d);
  return std::to_string(std::get<long long>(c));
}

}  // namespace detail

inline void write_csv(std::ostream& out, const Table& t) {
  for (const auto& n : t.notes) out << "# " << n << '\n';
  for (std::size_t j = 0; j < t.columns.size(); ++j) out << (j ? "," : "") << detail::csv_escape(t.columns[j]);
  out << '\n';
  for (const auto& r : t.rows) {
    for (std::size_t j = 0; j < r.size(); ++j) out << (j ? "," : "") << detail::cell_text(r[j]);
    out << '\n';
  }
}

inline std::string to_csv(const Table& t) {
  std::ostringstream s;
  write_csv(s, t);
  return s.str();
}

// ---------------------------------------------------------------------------

inline Table dataset_table(const ExperimentDataset& ds) {
  Table t{"dataset", {"run", "x1", "x2", "x3", "z1", "z2", "y"}, {}, {}};
  for (const auto& o : ds.observations)
    t.add({static_cast<long long>(o.run), o.x[0], o.x[1], o.x[2], o.z[0], o.z[1], o.y});
  for (const auto& w : ds.warnings) t.notes.push_back("warning: " + w);
  return t;
}

inline Table wald_rows_table(const std::string& name, const std::vector<WaldRow>& rows) {
  Table t{name, {"term", "estimate", "std_error", "t_value", "p_value"}, {}, {}};
  for (const auto& r : rows) t.add({r.term, r.estimate, r.std_error, r.t_value, r.p_value});
  return t;
}

inline Table ols_table(const OlsSummary& s) {
  Table t = wald_rows_table("ols_coefficients", s.table);
  t.notes.push_back("deviance D = " + format_number(s.deviance) + ", sigma2 = D/(n-p) = " +
                    format_number(s.sigma2) + ", df = " + std::to_string(s.df_resid));
  return t;
}

/// Mean table of a joint fit: Wald columns (scale 1, t on n - p df) plus the
/// extended quasi-likelihood ratio statistic for each term.
inline Table joint_mean_table(const JointFit& f, const std::vector<TermTest>& tests) {
  const auto w = wald_table(f.mean_fit, 1.0, static_cast<int>(f.n() - f.p()));
  Table t{"jmmd_mean", {"term", "estimate", "std_error", "t_value", "p_value", "minus2QAx", "chisq", "chisq_p"}, {}, {}};
  for (std::size_t j = 0; j < w.size(); ++j)
    t.add({w[j].term, w[j].estimate, w[j].std_error, w[j].t_value, w[j].p_value, tests[j].reduced_value,
           tests[j].chisq, tests[j].p_value});
  t.notes.push_back("-2Q+_A = " + format_number(f.minus2QA) + ", p = " + std::to_string(f.p()) +
                    ", cycles = " + std::to_string(f.cycles));
  return t;
}

/// Dispersion table: Wald columns (scale 1, t on n - q df) plus the gamma
/// deviance difference for each term.
inline Table joint_dispersion_table(const JointFit& f, const std::vector<TermTest>& tests) {
  const auto w = wald_table(f.dispersion_fit, 1.0, static_cast<int>(f.n() - f.q()));
  Table t{"jmmd_dispersion", {"term", "estimate", "std_error", "t_value", "p_value", "Ddx", "chisq", "chisq_p"}, {}, {}};
  for (std::size_t j = 0; j < w.size(); ++j)
    t.add({w[j].term, w[j].estimate, w[j].std_error, w[j].t_value, w[j].p_value, tests[j].reduced_value,
           tests[j].chisq, tests[j].p_value});
  t.notes.push_back("D^d_A = " + format_number(f.dispersion_deviance()) + ", q = " + std::to_string(f.q()));
  return t;
}

inline Table comparison_table(const std::vector<ModelComparison>& rows) {
  Table t{"compare", {"model", "p", "q", "minus2QA", "aicq", "pseudo_r2", "cycles"}, {}, {}};
  for (const auto& r : rows)
    t.add({r.label, static_cast<long long>(r.p), static_cast<long long>(r.q), r.minus2QA, r.aicq, r.pseudo_r2,
           static_cast<long long>(r.cycles)});
  t.notes.push_back("AICq = -2Q+_A + 2(p + q)");
  return t;
}

inline Table residual_table(const JointFit& f, const Residuals& r, const ExperimentDataset& ds) {
  Table t{"residuals",
          {"index", "run", "y", "fitted_mean", "hat_mean", "r_mean", "cook", "phi", "dstar", "hat_disp", "r_disp"},
          {},
          {}};
  for (std::size_t i = 0; i < f.n(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    t.add({static_cast<long long>(i + 1), static_cast<long long>(ds.observations[i].run), f.y(k),
           f.mean_fit.fitted(k), f.mean_fit.hat(k), r.r_mean(k), r.cook(k), f.phi()(k), f.dstar(k),
           f.dispersion_fit.hat(k), r.r_disp(k)});
  }
  t.notes.push_back("r_mean = sign(y - mu) sqrt(d*/phi)");
  t.notes.push_back("cook = r_mean^2 h / (p (1 - h)), one-step leverage-weighted form on the mean model");
  t.notes.push_back("r_disp = sign(d* - phi) sqrt(d_d / ((1 - h_d) phi_d)), phi_d = " + format_number(r.phi_disp));
  return t;
}

inline Table envelope_table(const Envelope& e) {
  Table t{"envelope", {"rank", "expected", "lower", "median", "upper", "observed"}, {}, {}};
  for (Eigen::Index i = 0; i < e.expected.size(); ++i)
    t.add({static_cast<long long>(i + 1), e.expected(i), e.lower(i), e.median(i), e.upper(i), e.observed(i)});
  t.notes.push_back("half-normal envelope of |r_mean|, " + std::to_string(e.replicates) + " replicates, " +
                    std::to_string(e.failures) + " failed");
  return t;
}

inline Table scenario_table(const std::vector<ScenarioRow>& rows) {
  Table t{"optimize",
          {"mu_mix", "var_mix", "mu_proof", "var_proof", "method", "mode", "x1", "x2", "x3", "variance", "mean",
           "feasible", "constraint_violation", "starts", "message"},
          {},
          {}};
  for (const auto& r : rows) {
    const auto& s = r.request.scenario;
    const auto& o = r.result;
    t.add({s.mu_mix, s.var_mix, s.mu_proof, s.var_proof, std::string(to_string(r.request.method)),
           std::string(to_string(r.request.mode)), o.x_star[0], o.x_star[1], o.x_star[2], o.var_star,
           o.mean_at_star, static_cast<long long>(o.feasible), o.constraint_violation,
           static_cast<long long>(o.starts_tried), r.error.empty() ? o.message : r.error});
  }
  return t;
}

}  // namespace rpdmix

#endif  // RPDMIX_REPORT_HPP
