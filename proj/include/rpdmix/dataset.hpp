#ifndef RPDMIX_DATASET_HPP
#define RPDMIX_DATASET_HPP

// Experiment data ingestion: wide (one row per blend, one column per noise
// setting) and long (one row per observation) CSV layouts, plus the linear
// coding of raw noise settings onto the [-1, 1] design scale.

#include <array>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "rpdmix/errors.hpp"

namespace rpdmix {

inline constexpr int kComponents = 3;
inline constexpr int kNoiseVars = 2;

using Blend = std::array<double, kComponents>;
using NoisePoint = std::array<double, kNoiseVars>;

inline constexpr double kSimplexTol = 1e-9;
inline constexpr double kRenormalizeTol = 1e-6;

inline double code_noise(double raw, double center, double scale) {
  if (!(scale > 0.0)) throw DomainError("noise coding scale must be positive");
  return (raw - center) / scale;
}

struct NoiseCoding {
  NoisePoint center{15.0, 47.5};
  NoisePoint scale{10.0, 12.5};

  double code(int var, double raw) const { return code_noise(raw, center[var], scale[var]); }
  double decode(int var, double coded) const { return center[var] + coded * scale[var]; }
  // Variances scale with the square of the coding factor.
  double code_variance(int var, double raw_var) const {
    return raw_var / (scale[var] * scale[var]);
  }
};

struct Observation {
  int run = 0;
  Blend x{};
  NoisePoint z{};
  double y = 0.0;
};

struct ExperimentDataset {
  std::vector<Observation> observations;
  std::string provenance;
  std::vector<std::string> warnings;

  std::size_t size() const noexcept { return observations.size(); }

  Eigen::VectorXd response() const {
    Eigen::VectorXd y(static_cast<Eigen::Index>(observations.size()));
    for (std::size_t i = 0; i < observations.size(); ++i) y(static_cast<Eigen::Index>(i)) = observations[i].y;
    return y;
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_number(const std::string& text, int line) {
  if (text.empty()) throw ParseError("empty numeric field", line);
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end == text.c_str() || *end != '\0') throw ParseError("malformed number '" + text + "'", line);
  return v;
}

// Validates proportions in place; renormalizes small data-entry drift.
inline void check_blend(Blend& x, int line, std::vector<std::string>& warnings) {
  double sum = 0.0;
  for (double v : x) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0)
      throw ValidationError("line " + std::to_string(line) + ": proportion outside [0, 1]");
    sum += v;
  }
  const double dev = std::abs(sum - 1.0);
  if (dev <= kSimplexTol) return;
  if (dev <= kRenormalizeTol) {
    for (double& v : x) v /= sum;
    warnings.push_back("line " + std::to_string(line) + ": proportions renormalized (sum was " +
                       std::to_string(sum) + ")");
    return;
  }
  throw ValidationError("line " + std::to_string(line) + ": proportions do not sum to 1");
}

inline void check_response(double y, int line) {
  if (!std::isfinite(y) || y <= 0.0)
    throw ValidationError("line " + std::to_string(line) + ": response must be finite and positive");
}

// "v_5_47.5" -> {5, 47.5}
inline NoisePoint parse_noise_column(const std::string& name, int line) {
  if (name.size() < 5 || name.rfind("v_", 0) != 0)
    throw ParseError("wide header column '" + name + "' is not of the form v_<mix>_<proof>", line);
  const auto sep = name.find('_', 2);
  if (sep == std::string::npos)
    throw ParseError("wide header column '" + name + "' is not of the form v_<mix>_<proof>", line);
  return {parse_number(name.substr(2, sep - 2), line), parse_number(name.substr(sep + 1), line)};
}

inline void check_unique_keys(const ExperimentDataset& ds) {
  std::set<std::tuple<int, double, double>> seen;
  for (const auto& o : ds.observations) {
    if (!seen.emplace(o.run, o.z[0], o.z[1]).second)
      throw ValidationError("duplicate observation for run " + std::to_string(o.run));
  }
}

inline ExperimentDataset parse_wide(std::istream& in, const std::vector<std::string>& header,
                                    const NoiseCoding& coding, std::string provenance) {
  if (header.size() < 5 || header[1] != "x1" || header[2] != "x2" || header[3] != "x3")
    throw ParseError("wide header must start with run,x1,x2,x3", 1);
  std::vector<NoisePoint> settings;
  for (std::size_t c = 4; c < header.size(); ++c) settings.push_back(parse_noise_column(header[c], 1));

  ExperimentDataset ds;
  ds.provenance = std::move(provenance);
  std::string line;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size())
      throw ParseError("expected " + std::to_string(header.size()) + " columns, found " +
                           std::to_string(f.size()),
                       lineno);
    const int run = static_cast<int>(parse_number(f[0], lineno));
    Blend x{parse_number(f[1], lineno), parse_number(f[2], lineno), parse_number(f[3], lineno)};
    check_blend(x, lineno, ds.warnings);
    for (std::size_t c = 0; c < settings.size(); ++c) {
      Observation o;
      o.run = run;
      o.x = x;
      o.z = {coding.code(0, settings[c][0]), coding.code(1, settings[c][1])};
      o.y = parse_number(f[c + 4], lineno);
      check_response(o.y, lineno);
      ds.observations.push_back(o);
    }
  }
  return ds;
}

inline ExperimentDataset parse_long(std::istream& in, const NoiseCoding& coding, std::string provenance) {
  ExperimentDataset ds;
  ds.provenance = std::move(provenance);
  std::vector<Blend> blends;
  std::string line;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 6)
      throw ParseError("expected 6 columns, found " + std::to_string(f.size()), lineno);
    Observation o;
    o.x = {parse_number(f[0], lineno), parse_number(f[1], lineno), parse_number(f[2], lineno)};
    check_blend(o.x, lineno, ds.warnings);
    o.z = {coding.code(0, parse_number(f[3], lineno)), coding.code(1, parse_number(f[4], lineno))};
    o.y = parse_number(f[5], lineno);
    check_response(o.y, lineno);
    // Runs are numbered by first appearance of each distinct blend.
    std::size_t r = 0;
    while (r < blends.size() && blends[r] != o.x) ++r;
    if (r == blends.size()) blends.push_back(o.x);
    o.run = static_cast<int>(r) + 1;
    ds.observations.push_back(o);
  }
  return ds;
}

}  // namespace detail

enum class CsvLayout { Auto, Wide, Long };

/// Parses either CSV layout. The layout is detected from the header unless
/// forced. Throws ParseError on malformed input (including empty input) and
/// ValidationError on constraint violations.
inline ExperimentDataset parse_csv(std::istream& in, const NoiseCoding& coding = {},
                                   std::string provenance = "<stream>", CsvLayout layout = CsvLayout::Auto) {
  for (double s : coding.scale)
    if (!(s > 0.0)) throw DomainError("noise coding scale must be positive");
  std::string line;
  if (!std::getline(in, line) || detail::trim(line).empty()) throw ParseError("empty input: no header line", 1);
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM
  const auto header = detail::split_csv_line(line);
  const bool is_wide = !header.empty() && header[0] == "run";
  const bool is_long = header == std::vector<std::string>{"x1", "x2", "x3", "z1_raw", "z2_raw", "y"};
  if (layout == CsvLayout::Wide && !is_wide) throw ParseError("expected wide header starting with 'run'", 1);
  if (layout == CsvLayout::Long && !is_long) throw ParseError("expected header x1,x2,x3,z1_raw,z2_raw,y", 1);
  if (!is_wide && !is_long) throw ParseError("unrecognized header '" + line + "'", 1);

  ExperimentDataset ds = is_wide ? detail::parse_wide(in, header, coding, std::move(provenance))
                                 : detail::parse_long(in, coding, std::move(provenance));
  if (ds.observations.empty()) throw ParseError("no observations after header", 2);
  detail::check_unique_keys(ds);
  return ds;
}

inline ExperimentDataset load_csv(const std::string& path, const NoiseCoding& coding = {},
                                  CsvLayout layout = CsvLayout::Auto) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset file '" + path + "'");
  return parse_csv(in, coding, path, layout);
}

inline ExperimentDataset load_wide_csv(const std::string& path, const NoiseCoding& coding = {}) {
  return load_csv(path, coding, CsvLayout::Wide);
}

inline ExperimentDataset load_long_csv(const std::string& path, const NoiseCoding& coding = {}) {
  return load_csv(path, coding, CsvLayout::Long);
}

/// Long-format CSV with raw (decoded) noise settings, readable by parse_csv.
inline std::string to_long_csv(const ExperimentDataset& ds, const NoiseCoding& coding = {}) {
  std::ostringstream out;
  out.precision(17);
  out << "x1,x2,x3,z1_raw,z2_raw,y\n";
  for (const auto& o : ds.observations) {
    out << o.x[0] << ',' << o.x[1] << ',' << o.x[2] << ',' << coding.decode(0, o.z[0]) << ','
        << coding.decode(1, o.z[1]) << ',' << o.y << '\n';
  }
  return out.str();
}

}  // namespace rpdmix

#endif  // RPDMIX_DATASET_HPP
