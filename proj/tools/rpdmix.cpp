// rpdmix: command-line runs of the mixture robust-design pipeline.
//
//   rpdmix [--config F] [--seed N] [--mode paper|exact] [--out DIR]
//          [--format csv|json] <command> ...
//
// Every command computes all of its tables first and only then writes
// them, one file per table, under the output directory. A failure exits
// with status 1 and writes nothing.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rpdmix/rpdmix.hpp"

namespace fs = std::filesystem;
using rpdmix::Table;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string mode;
  std::string out;
  std::string format = "csv";
  std::string dataset;
  std::optional<double> sigma2;
};

nlohmann::ordered_json table_json(const Table& t) {
  nlohmann::ordered_json j;
  j["table"] = t.name;
  j["notes"] = t.notes;
  j["columns"] = t.columns;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& r : t.rows) {
    nlohmann::ordered_json o;
    for (std::size_t k = 0; k < r.size(); ++k)
      std::visit([&](const auto& v) { o[t.columns[k]] = v; }, r[k]);
    rows.push_back(std::move(o));
  }
  j["rows"] = std::move(rows);
  return j;
}

std::string render(const Table& t, const std::string& format) {
  if (format == "json") return table_json(t).dump(2) + "\n";
  return rpdmix::to_csv(t);
}

/// Writes every table, each through a temporary file and a rename, after
/// all of them have been rendered.
void emit(const std::vector<Table>& tables, const Globals& g, const std::string& out_dir) {
  std::vector<std::pair<fs::path, std::string>> files;
  for (const auto& t : tables) files.emplace_back(fs::path(out_dir) / (t.name + "." + g.format), render(t, g.format));
  fs::create_directories(out_dir);
  std::vector<fs::path> staged;
  for (const auto& [path, text] : files) {
    fs::path tmp = path;
    tmp += ".tmp";
    std::ofstream f(tmp, std::ios::binary);
    f << text;
    if (!f) {
      for (const auto& s : staged) fs::remove(s);
      fs::remove(tmp);
      throw rpdmix::Error("cannot write '" + tmp.string() + "'");
    }
    staged.push_back(tmp);
  }
  for (std::size_t i = 0; i < files.size(); ++i) fs::rename(staged[i], files[i].first);
  for (const auto& [path, text] : files) std::cout << path.string() << "\n";
}

rpdmix::RunConfig load(const Globals& g, const std::string& path) {
  rpdmix::RunConfig c = path.empty() ? rpdmix::RunConfig{} : rpdmix::load_config(path);
  if (path.empty()) c.mean_terms = rpdmix::bread::mean_terms().labels();
  if (!g.dataset.empty()) c.dataset = g.dataset;
  if (g.seed) c.seed = *g.seed;
  if (!g.mode.empty()) c.mode = rpdmix::parse_mode(g.mode);
  if (!g.out.empty()) c.out = g.out;
  if (g.sigma2) c.sigma2 = *g.sigma2;
  if (c.dataset.empty()) throw rpdmix::ValidationError("no dataset: set 'dataset' in the config or pass --dataset");
  c.validate();
  return c;
}

Table summary_table(const std::string& name, const std::vector<std::pair<std::string, rpdmix::Cell>>& kv) {
  Table t{name, {"key", "value"}, {}, {}};
  for (const auto& [k, v] : kv) t.add({k, v});
  return t;
}

rpdmix::JointFit fit_from(const rpdmix::RunConfig& c, const rpdmix::ExperimentDataset& ds) {
  return rpdmix::fit_joint(c.joint_spec(), ds);
}

rpdmix::ModelFactory factory_from(const rpdmix::RunConfig& c, const rpdmix::ExperimentDataset& ds) {
  const auto ols = rpdmix::fit_ols(c.mean_spec(), ds);
  const auto joint = fit_from(c, ds);
  return rpdmix::bread::model_factory(joint, ols.fit, c.mean_spec(), c.sigma2);
}

std::vector<double> split_numbers(const std::string& s, std::size_t n, const char* what) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) v.push_back(rpdmix::detail::parse_number(rpdmix::detail::trim(tok), 0));
  if (v.size() != n)
    throw rpdmix::ValidationError(std::string(what) + " needs " + std::to_string(n) + " comma-separated numbers");
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixture experiments with noise variables: joint mean/dispersion models and robust design"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "Run configuration (key = value)");
  app.add_option("--seed", g.seed, "Seed for simulation-based outputs");
  app.add_option("--mode", g.mode, "Moment formulas: paper or exact")->check(CLI::IsMember({"paper", "exact"}));
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--dataset", g.dataset, "Dataset CSV (overrides the config)");
  app.add_option("--sigma2", g.sigma2, "Residual variance for the delta method (overrides the config)")
      ->check(CLI::NonNegativeNumber);

  auto* ingest = app.add_subcommand("ingest", "Validate a dataset and write it in long form with coded noise");
  auto* fit_ols = app.add_subcommand("fit-ols", "OLS fit of the mean terms: coefficients, D and D/(n-p)");
  auto* fit_jmmd = app.add_subcommand("fit-jmmd", "Joint mean/dispersion fit with Wald and term tests");
  auto* compare = app.add_subcommand("compare", "AICq / pseudo-R^2 table for several configs");
  std::vector<std::string> compare_configs;
  compare->add_option("configs", compare_configs, "Config files, one per joint model")->required()->check(CLI::ExistingFile);
  auto* diagnose = app.add_subcommand("diagnose", "Residuals, Cook's distance and a half-normal envelope");
  auto* moments = app.add_subcommand("moments", "E(Y) and Var(Y) at given blends under a noise scenario");
  std::vector<std::string> blends;
  std::string scenario = "15,0,47.5,0";
  std::string method = "jmmd";
  moments->add_option("--x", blends, "Blend x1,x2,x3 (repeatable)")->required();
  moments->add_option("--scenario", scenario, "mu_mix,var_mix,mu_proof,var_proof in raw minutes");
  moments->add_option("--method", method, "jmmd or delta")->check(CLI::IsMember({"jmmd", "delta"}));
  auto* optimize = app.add_subcommand("optimize", "Robust blends for a scenario batch");
  std::string scenario_file;
  optimize->add_option("--scenarios", scenario_file, "Scenario CSV (default: config, else the built-in eight x both methods)");

  CLI11_PARSE(app, argc, argv);

  try {
    std::vector<Table> tables;
    std::string out_dir;
    if (compare->parsed()) {
      std::vector<rpdmix::ModelComparison> rows;
      for (const auto& path : compare_configs) {
        const auto c = load(g, path);
        const auto ds = rpdmix::load_csv(c.dataset);
        rows.push_back(rpdmix::compare_row(fit_from(c, ds), c.label.empty() ? fs::path(path).stem().string() : c.label));
        if (out_dir.empty()) out_dir = c.out;
      }
      tables.push_back(rpdmix::comparison_table(rows));
    } else {
      const auto c = load(g, g.config);
      out_dir = c.out;
      const auto ds = rpdmix::load_csv(c.dataset);
      if (ingest->parsed()) {
        tables.push_back(rpdmix::dataset_table(ds));
      } else if (fit_ols->parsed()) {
        const auto s = rpdmix::fit_ols(c.mean_spec(), ds);
        const auto bp = rpdmix::breusch_pagan_studentized(s.fit.design, ds.response() - s.fit.fitted);
        tables.push_back(rpdmix::ols_table(s));
        tables.push_back(summary_table(
            "ols_summary", {{"n", static_cast<long long>(ds.size())},
                            {"p", static_cast<long long>(c.mean_spec().p())},
                            {"deviance", s.deviance},
                            {"sigma2", s.sigma2},
                            {"pseudo_r2", rpdmix::pseudo_r2(s.fit.eta, ds.response(), rpdmix::Link::Identity)},
                            {"hat_trace", s.fit.hat.sum()},
                            {"bp_stat", bp.stat},
                            {"bp_df", static_cast<long long>(bp.df)},
                            {"bp_p_value", bp.p_value},
                            {"bp_constant_added", static_cast<long long>(bp.constant_added)}}));
      } else if (fit_jmmd->parsed()) {
        const auto f = fit_from(c, ds);
        tables.push_back(rpdmix::joint_mean_table(f, rpdmix::mean_term_tests(f, ds, c.term_tests)));
        tables.push_back(rpdmix::joint_dispersion_table(f, rpdmix::dispersion_term_tests(f, ds, c.term_tests)));
        const auto row = rpdmix::compare_row(f, c.label);
        tables.push_back(summary_table("jmmd_summary", {{"n", static_cast<long long>(f.n())},
                                                        {"p", static_cast<long long>(row.p)},
                                                        {"q", static_cast<long long>(row.q)},
                                                        {"cycles", static_cast<long long>(row.cycles)},
                                                        {"minus2QA", row.minus2QA},
                                                        {"aicq", row.aicq},
                                                        {"pseudo_r2", row.pseudo_r2},
                                                        {"dispersion_deviance", f.dispersion_deviance()}}));
      } else if (diagnose->parsed()) {
        const auto f = fit_from(c, ds);
        tables.push_back(rpdmix::residual_table(f, rpdmix::residuals(f), ds));
        auto env = rpdmix::envelope_table(rpdmix::simulate_envelope(f, c.n_sim, c.seed));
        env.notes.push_back("seed = " + std::to_string(c.seed));
        tables.push_back(std::move(env));
      } else if (moments->parsed()) {
        const auto sc = split_numbers(scenario, 4, "--scenario");
        const rpdmix::ScenarioSpec spec{sc[0], sc[1], sc[2], sc[3]};
        const auto m = factory_from(c, ds)(rpdmix::parse_method(method), c.mode, rpdmix::scenario_to_coded(spec));
        Table t{"moments", {"x1", "x2", "x3", "method", "mode", "mean", "variance", "feasible"}, {}, {}};
        for (const auto& b : blends) {
          const auto v = split_numbers(b, 3, "--x");
          const rpdmix::Blend x{v[0], v[1], v[2]};
          rpdmix::check_simplex(x);
          const bool ok = m.feasible(x);
          t.add({x[0], x[1], x[2], method, std::string(rpdmix::to_string(c.mode)), m.mean(x),
                 ok ? m.variance(x) : std::numeric_limits<double>::infinity(), static_cast<long long>(ok)});
        }
        t.notes.push_back("scenario (mu_mix, var_mix, mu_proof, var_proof) = (" + scenario + ")");
        tables.push_back(std::move(t));
      } else if (optimize->parsed()) {
        std::vector<rpdmix::ScenarioRequest> req;
        const std::string file = scenario_file.empty() ? c.scenarios : scenario_file;
        if (!file.empty()) {
          req = rpdmix::load_scenarios(file, c.mode);
        } else {
          for (auto meth : {rpdmix::MomentMethod::Jmmd, rpdmix::MomentMethod::Delta})
            for (const auto& s : rpdmix::bread::scenarios()) req.push_back({s, meth, c.mode});
        }
        rpdmix::SolveOptions opt;
        opt.mean_tol = c.mean_tol;
        opt.seed = c.seed;
        auto t = rpdmix::scenario_table(rpdmix::run_scenarios(req, factory_from(c, ds), c.target, opt));
        t.notes.push_back("target = " + rpdmix::format_number(c.target) + ", mean_tol = " +
                          rpdmix::format_number(c.mean_tol) + ", delta sigma2 = " + rpdmix::format_number(c.sigma2));
        tables.push_back(std::move(t));
      }
    }
    emit(tables, g, out_dir);
  } catch (const std::exception& e) {
    std::cerr << "rpdmix: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
