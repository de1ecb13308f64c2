#ifndef RPDMIX_CONFIG_HPP
#define RPDMIX_CONFIG_HPP

// Flat key = value run configuration. One key per line, '#' starts a
// comment, blank lines are ignored. Term lists are comma separated labels
// in the term grammar; "preset:mean18", "preset:reduced28" and
// "preset:full60" expand to the built-in lists. Relative paths resolve
// against the directory of the config file.
//
//   dataset          path to the wide or long CSV
//   label            free text, used in comparison tables
//   mean_terms       term list of the mean model (required)
//   dispersion_terms term list of the dispersion model (default: mean_terms)
//   mean_link        identity | log
//   mean_variance    constant | identity | squared
//   outer_tol        epsilon, relative change of -2Q+ between cycles
//   inner_tol        delta, squared IRLS step
//   max_cycles       joint-fit cycle cap
//   mean_tol         robust-design band half-width (ml)
//   target           robust-design target (ml)
//   sigma2           residual variance for the delta method
//   mode             paper | exact
//   term_tests       deletion | refit
//   alpha            backward-selection threshold
//   n_sim            envelope replicates
//   seed             unsigned 64-bit seed
//   scenarios        scenario batch CSV
//   out              output directory

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "rpdmix/bread_making.hpp"
#include "rpdmix/dataset.hpp"
#include "rpdmix/errors.hpp"
#include "rpdmix/glm.hpp"
#include "rpdmix/jmmd.hpp"
#include "rpdmix/moments.hpp"
#include "rpdmix/terms.hpp"

namespace rpdmix {

struct RunConfig {
  std::string dataset;
  std::string label;
  std::vector<std::string> mean_terms;
  std::vector<std::string> dispersion_terms;
  Link mean_link = Link::Identity;
  VarianceFunction mean_variance = VarianceFunction::Constant;
  double outer_tol = 1e-8;
  double inner_tol = 1e-10;
  int max_cycles = 200;
  double mean_tol = 1e-3;
  double target = bread::kTargetVolume;
  double sigma2 = bread::kDeltaSigma2;
  MomentMode mode = MomentMode::Exact;
  TermTestMode term_tests = TermTestMode::Deletion;
  double alpha = 0.05;
  int n_sim = 100;
  std::uint64_t seed = 20240607;
  std::string scenarios;
  std::string out = "out";

  void validate() const {
    if (mean_terms.empty()) throw ValidationError("config: mean_terms is empty");
    (void)mean_spec();
    (void)dispersion_spec();
    if (!(outer_tol > 0.0) || !(inner_tol > 0.0) || !(mean_tol > 0.0))
      throw ValidationError("config: tolerances must be positive");
    if (max_cycles < 1) throw ValidationError("config: max_cycles must be >= 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("config: alpha must lie in (0, 1)");
    if (!(sigma2 >= 0.0)) throw ValidationError("config: sigma2 must be >= 0");
    if (n_sim < 19) throw ValidationError("config: n_sim must be >= 19");
  }

  LinearPredictorSpec mean_spec() const { return LinearPredictorSpec::from_labels(mean_terms); }
  LinearPredictorSpec dispersion_spec() const {
    return LinearPredictorSpec::from_labels(dispersion_terms.empty() ? mean_terms : dispersion_terms);
  }
  JointModelSpec joint_spec() const {
    JointModelSpec s;
    s.mean_spec = mean_spec();
    s.dispersion_spec = dispersion_spec();
    s.mean_link = mean_link;
    s.mean_variance = mean_variance;
    s.outer_tol = outer_tol;
    s.inner_tol = inner_tol;
    s.max_cycles = max_cycles;
    return s;
  }
};

namespace detail {

inline std::vector<std::string> expand_terms(const std::string& value) {
  const std::string v = trim(value);
  auto labels = [](const LinearPredictorSpec& s) { return s.labels(); };
  if (v == "preset:mean18") return labels(bread::mean_terms());
  if (v == "preset:reduced28") return labels(canonical_reduced_28());
  if (v == "preset:full60") return labels(canonical_full_crossed());
  if (v.rfind("preset:", 0) == 0) throw ValidationError("config: unknown term preset '" + v + "'");
  std::vector<std::string> out;
  int depth = 0;
  std::string cur;
  for (char c : v) {
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (c == ',' && depth == 0) {
      if (!trim(cur).empty()) out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!trim(cur).empty()) out.push_back(trim(cur));
  for (const auto& t : out) (void)parse_term(t);
  return out;
}

inline double config_number(const std::string& key, const std::string& v, int line) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ParseError("config: '" + key + "' expects a number, got '" + v + "'", line);
  }
}

inline std::string resolve_path(const std::string& v, const std::filesystem::path& base) {
  if (v.empty() || base.empty()) return v;
  const std::filesystem::path p(v);
  return p.is_absolute() ? v : (base / p).lexically_normal().string();
}

}  // namespace detail

/// Applies one key/value pair. Unknown keys are an error.
inline void apply_config_value(RunConfig& c, const std::string& key, const std::string& value, int line = 0,
                               const std::filesystem::path& base = {}) {
  const std::string v = detail::trim(value);
  auto integer = [&](double d) {
    if (d != static_cast<double>(static_cast<long long>(d)))
      throw ParseError("config: '" + key + "' expects an integer", line);
    return static_cast<long long>(d);
  };
  if (key == "dataset") {
    c.dataset = detail::resolve_path(v, base);
  } else if (key == "label") {
    c.label = v;
  } else if (key == "mean_terms") {
    c.mean_terms = detail::expand_terms(v);
  } else if (key == "dispersion_terms") {
    c.dispersion_terms = detail::expand_terms(v);
  } else if (key == "mean_link") {
    if (v == "identity") c.mean_link = Link::Identity;
    else if (v == "log") c.mean_link = Link::Log;
    else throw ParseError("config: mean_link must be identity or log", line);
  } else if (key == "mean_variance") {
    if (v == "constant") c.mean_variance = VarianceFunction::Constant;
    else if (v == "identity") c.mean_variance = VarianceFunction::Identity;
    else if (v == "squared") c.mean_variance = VarianceFunction::Squared;
    else throw ParseError("config: mean_variance must be constant, identity or squared", line);
  } else if (key == "outer_tol") {
    c.outer_tol = detail::config_number(key, v, line);
  } else if (key == "inner_tol") {
    c.inner_tol = detail::config_number(key, v, line);
  } else if (key == "max_cycles") {
    c.max_cycles = static_cast<int>(integer(detail::config_number(key, v, line)));
  } else if (key == "mean_tol") {
    c.mean_tol = detail::config_number(key, v, line);
  } else if (key == "target") {
    c.target = detail::config_number(key, v, line);
  } else if (key == "sigma2") {
    c.sigma2 = detail::config_number(key, v, line);
  } else if (key == "mode") {
    try {
      c.mode = parse_mode(v);
    } catch (const ValidationError& e) {
      throw ParseError(std::string("config: ") + e.what(), line);
    }
  } else if (key == "term_tests") {
    if (v == "deletion") c.term_tests = TermTestMode::Deletion;
    else if (v == "refit") c.term_tests = TermTestMode::Refit;
    else throw ParseError("config: term_tests must be deletion or refit", line);
  } else if (key == "alpha") {
    c.alpha = detail::config_number(key, v, line);
  } else if (key == "n_sim") {
    c.n_sim = static_cast<int>(integer(detail::config_number(key, v, line)));
  } else if (key == "seed") {
    try {
      std::size_t used = 0;
      c.seed = std::stoull(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
    } catch (const std::exception&) {
      throw ParseError("config: seed expects an unsigned integer", line);
    }
  } else if (key == "scenarios") {
    c.scenarios = detail::resolve_path(v, base);
  } else if (key == "out") {
    c.out = detail::resolve_path(v, base);
  } else {
    throw ParseError("config: unknown key '" + key + "'", line);
  }
}

inline RunConfig parse_config(std::istream& in, const std::filesystem::path& base = {}) {
  RunConfig c;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string text = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ParseError("config: expected 'key = value'", line);
    const std::string key = detail::trim(text.substr(0, eq));
    if (key.empty()) throw ParseError("config: empty key", line);
    try {
      apply_config_value(c, key, text.substr(eq + 1), line, base);
    } catch (const ParseError& e) {
      if (e.line() >= 0) throw;
      throw ParseError(e.what(), line);
    } catch (const Error& e) {
      throw ParseError(e.what(), line);
    }
  }
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file '" + path + "'");
  return parse_config(in, std::filesystem::path(path).parent_path());
}

/// Scenario batch: header mu_mix,var_mix,mu_proof,var_proof,method,mode.
/// An empty mode cell takes default_mode.
inline std::vector<ScenarioRequest> parse_scenarios(std::istream& in, MomentMode default_mode) {
  std::string raw;
  int line = 0;
  std::vector<ScenarioRequest> out;
  bool header = false;
  while (std::getline(in, raw)) {
    ++line;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (detail::trim(raw).empty()) continue;
    const auto f = detail::split_csv_line(raw);
    if (!header) {
      const std::vector<std::string> want{"mu_mix", "var_mix", "mu_proof", "var_proof", "method", "mode"};
      if (f != want) throw ParseError("scenarios: header must be mu_mix,var_mix,mu_proof,var_proof,method,mode", line);
      header = true;
      continue;
    }
    if (f.size() != 6) throw ParseError("scenarios: expected 6 fields", line);
    ScenarioRequest r;
    r.scenario = {detail::parse_number(f[0], line), detail::parse_number(f[1], line),
                  detail::parse_number(f[2], line), detail::parse_number(f[3], line)};
    try {
      r.method = parse_method(f[4]);
      r.mode = f[5].empty() ? default_mode : parse_mode(f[5]);
    } catch (const ValidationError& e) {
      throw ParseError(std::string("scenarios: ") + e.what(), line);
    }
    out.push_back(r);
  }
  if (!header) throw ParseError("scenarios: empty file", 1);
  return out;
}

inline std::vector<ScenarioRequest> load_scenarios(const std::string& path, MomentMode default_mode) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open scenario file '" + path + "'");
  return parse_scenarios(in, default_mode);
}

}  // namespace rpdmix

#endif  // RPDMIX_CONFIG_HPP
