#include "cli/commands.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cli/manifest.hpp"
#include "condvine/csv.hpp"
#include "condvine/error.hpp"
#include "condvine/mvpp.hpp"
#include "condvine/parallel.hpp"
#include "condvine/simlab.hpp"
#include "condvine/version.hpp"
#include "condvine/vine.hpp"

namespace condvine::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr const char* kInterceptName = "intercept";

struct ControlFlags {
  std::size_t m_stop = 500;
  double nu = 0.1;
  double gamma = 0.01;
  std::string stopping = "aic";
  std::size_t cv_folds = 10;
  std::uint64_t seed = 1;
  bool attribute_to_m_opt = false;
  bool deselect_intercept = false;

  void add_to(CLI::App& app) {
    app.add_option("--m-stop", m_stop, "Boosting iterations")->capture_default_str();
    app.add_option("--nu", nu, "Step length")->capture_default_str();
    app.add_option("--gamma", gamma, "Deselection threshold")->capture_default_str();
    app.add_option("--stopping", stopping, "Early stopping rule")
        ->check(CLI::IsMember({"aic", "cv"}))
        ->capture_default_str();
    app.add_option("--cv-folds", cv_folds, "Folds for cross-validated stopping")->capture_default_str();
    app.add_option("--seed", seed, "Master seed")->capture_default_str();
    app.add_flag("--attribute-to-m-opt", attribute_to_m_opt, "Sum attributable risk up to m_opt only");
    app.add_flag("--deselect-intercept", deselect_intercept, "Let the intercept be deselected");
  }

  BoostControl control() const {
    BoostControl c;
    c.m_stop = m_stop;
    c.nu = nu;
    c.gamma = gamma;
    c.stopping = stopping == "cv" ? Stopping::CV : Stopping::AIC;
    c.cv_folds = cv_folds;
    c.seed = seed;
    c.attribute_to_m_opt = attribute_to_m_opt;
    c.exempt_intercept = !deselect_intercept;
    c.validate();
    return c;
  }

  ordered_json echo() const {
    return {{"m_stop", m_stop},   {"nu", nu},     {"gamma", gamma},
            {"stopping", stopping}, {"cv_folds", cv_folds}, {"seed", seed},
            {"attribute_to_m_opt", attribute_to_m_opt}, {"deselect_intercept", deselect_intercept}};
  }
};

struct FitArgs {
  std::string data, covariates, structure = "auto", out, report, manifest, selection = "aic";
  std::vector<std::string> families;
  std::optional<std::size_t> truncate;
  bool no_deselection = false, no_intercept = false;
  unsigned threads = 0;
  ControlFlags control;
};

struct SampleArgs {
  std::string model, covariates, out, manifest;
  std::size_t n_per_row = 1;
  std::optional<std::size_t> m;
  std::uint64_t seed = 1;
};

struct ScoreArgs {
  std::string forecasts, observations, out, dm_out, manifest, es_form = "pairwise";
  double vs_order = 0.5;
};

struct SimulateArgs {
  std::string scenario, out_dir;
  bool full_grid = false;
  std::optional<unsigned> threads;
};

struct ValidateArgs {
  std::string structure, model;
};

std::string default_path(const std::string& given, const std::string& base, const std::string& suffix) {
  return given.empty() ? base + suffix : given;
}

std::string csv_label(const VineEdge& e) {
  std::string s = edge_label(e);
  std::replace(s.begin(), s.end(), ',', ' ');
  return s;
}

// Copula data: every cell strictly inside (0, 1).
NumericTable read_copula_data(const std::string& path) {
  NumericTable t = read_numeric_csv(path);
  if (t.values.rows() == 0) throw CsvError(path, 2, 0, "no data rows");
  for (Eigen::Index r = 0; r < t.values.rows(); ++r)
    for (Eigen::Index c = 0; c < t.values.cols(); ++c) {
      const double v = t.values(r, c);
      if (!(v > 0.0 && v < 1.0))
        throw CsvError(path, t.row_lines[static_cast<std::size_t>(r)], static_cast<std::size_t>(c) + 1,
                       "copula data must lie strictly inside (0, 1), found " + format_double(v));
    }
  return t;
}

struct Design {
  Eigen::MatrixXd Z;
  std::vector<std::string> names;
};

Design read_design(const std::string& path, std::size_t n_rows, const std::string& data_path,
                   const NumericTable& data, bool add_intercept) {
  Design d;
  if (path.empty()) {
    d.Z = Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(n_rows), 1);
    d.names = {kInterceptName};
    return d;
  }
  const NumericTable t = read_numeric_csv(path);
  const auto rows = static_cast<std::size_t>(t.values.rows());
  if (rows > n_rows) throw CsvError(path, t.row_lines[n_rows], 0, "covariate row without a matching data row");
  if (rows < n_rows) throw CsvError(data_path, data.row_lines[rows], 0, "data row without a matching covariate row");
  const bool has_intercept = std::find(t.header.begin(), t.header.end(), kInterceptName) != t.header.end();
  if (add_intercept && !has_intercept) {
    d.Z.resize(t.values.rows(), t.values.cols() + 1);
    d.Z.col(0).setOnes();
    d.Z.rightCols(t.values.cols()) = t.values;
    d.names.push_back(kInterceptName);
  } else {
    d.Z = t.values;
  }
  d.names.insert(d.names.end(), t.header.begin(), t.header.end());
  return d;
}

std::vector<Family> parse_families(const std::vector<std::string>& names) {
  std::vector<Family> out;
  for (const auto& n : names) {
    Family f;
    try {
      f = parse_family(n);
    } catch (const DomainError&) {
      throw ConfigError("--families: unknown family '" + n + "'");
    }
    if (f == Family::Independence) throw ConfigError("--families: Independence is not a candidate family");
    if (std::find(out.begin(), out.end(), f) == out.end()) out.push_back(f);
  }
  if (out.empty()) out.assign(kCandidateFamilies.begin(), kCandidateFamilies.end());
  return out;
}

FamilySelection parse_selection(const std::string& s) {
  if (s == "loglik") return FamilySelection::LogLik;
  if (s == "predictive") return FamilySelection::PredictiveRisk;
  return FamilySelection::AIC;
}

std::string fit_report(const ConditionalVineModel& model) {
  std::vector<std::string> header{"tree", "edge", "family", "m_opt", "aic", "loglik", "n_kept", "kept"};
  for (const auto& n : model.covariate_names) header.push_back("beta_" + n);
  std::vector<std::vector<std::string>> rows;
  for (std::size_t t = 0; t < model.structure.trees.size(); ++t)
    for (std::size_t i = 0; i < model.structure.trees[t].size(); ++i) {
      const FittedPairCopula& m = model.pair_models[t][i];
      std::string kept;
      for (std::size_t j : m.kept) kept += (kept.empty() ? "" : " ") + model.covariate_names[j];
      std::vector<std::string> row{std::to_string(t + 1),      csv_label(model.structure.trees[t][i]),
                                   std::string(family_name(m.family)), std::to_string(m.m_opt),
                                   format_double(m.aic),       format_double(m.loglik),
                                   std::to_string(m.kept.size()), kept};
      for (Eigen::Index j = 0; j < m.beta.size(); ++j) row.push_back(format_double(m.beta(j)));
      rows.push_back(std::move(row));
    }
  return to_csv(header, rows);
}

int cmd_fit(const FitArgs& a, std::ostream& err) {
  const NumericTable data = read_copula_data(a.data);
  const auto n = static_cast<std::size_t>(data.values.rows());
  const auto d = static_cast<std::size_t>(data.values.cols());
  if (d < 2) throw CsvError(a.data, 1, 0, "need at least two data columns");
  const Design design = read_design(a.covariates, n, a.data, data, !a.no_intercept);
  const BoostControl control = a.control.control();

  VineFitOptions options;
  options.pair.families = parse_families(a.families);
  options.pair.selection = parse_selection(a.selection);
  options.pair.deselection = !a.no_deselection;
  options.pair.threads = 1;
  options.covariate_names = design.names;
  options.truncation_level = a.truncate;
  options.threads = a.threads;

  VineStructure structure;
  if (a.structure == "auto") {
    structure = select_structure(data.values, control, options.pair);
  } else {
    structure = structure_from_json(read_text_file(a.structure));
    if (structure.d != d)
      throw InterfaceError(a.structure + ": structure has dimension " + std::to_string(structure.d) + ", data has " +
                           std::to_string(d) + " columns");
  }
  err << "fit: " << n << " rows, " << d << " variables, " << design.names.size() << " design columns, structure "
      << a.structure << "\n";
  const ConditionalVineModel model = fit_vine(data.values, design.Z, structure, control, options);
  for (std::size_t t = 0; t < model.structure.trees.size(); ++t)
    for (std::size_t i = 0; i < model.structure.trees[t].size(); ++i) {
      const auto& m = model.pair_models[t][i];
      err << "  tree " << t + 1 << " edge " << edge_label(model.structure.trees[t][i]) << ": "
          << family_name(m.family) << ", m_opt " << m.m_opt << ", kept " << m.kept.size() << "\n";
    }

  write_text_file(a.out, to_json(model));
  const std::string report = default_path(a.report, a.out, ".report.csv");
  write_text_file(report, fit_report(model));

  RunManifest manifest;
  manifest.command = "fit";
  manifest.seed = a.control.seed;
  std::vector<std::string> family_names;
  for (Family f : options.pair.families) family_names.emplace_back(family_name(f));
  manifest.config = {{"data", a.data},
                     {"covariates", a.covariates},
                     {"structure", a.structure},
                     {"families", family_names},
                     {"selection", a.selection},
                     {"deselection", !a.no_deselection},
                     {"intercept", !a.no_intercept},
                     {"truncate", a.truncate ? ordered_json(*a.truncate) : ordered_json(nullptr)},
                     {"control", a.control.echo()}};
  manifest.inputs.emplace_back(a.data);
  if (!a.covariates.empty()) manifest.inputs.emplace_back(a.covariates);
  if (a.structure != "auto") manifest.inputs.emplace_back(a.structure);
  manifest.outputs = {a.out, report};
  manifest.extra["selected_structure"] = ordered_json::parse(structure_to_json(model.structure));
  manifest.write(default_path(a.manifest, a.out, ".manifest.json"));
  return kSuccess;
}

int cmd_sample(const SampleArgs& a, std::ostream& err) {
  const ConditionalVineModel model = model_from_json(read_text_file(a.model));
  if (a.n_per_row == 0) throw ConfigError("--n-per-row must be positive");
  Eigen::MatrixXd base;
  if (a.covariates.empty()) {
    for (const auto& name : model.covariate_names)
      if (name != kInterceptName)
        throw ConfigError("model uses covariate '" + name + "'; pass --covariates");
    base = Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(a.m.value_or(1)), static_cast<Eigen::Index>(model.n_cols()));
  } else {
    const NumericTable t = read_numeric_csv(a.covariates);
    base.resize(t.values.rows(), static_cast<Eigen::Index>(model.n_cols()));
    for (std::size_t j = 0; j < model.n_cols(); ++j) {
      const auto& name = model.covariate_names[j];
      const auto it = std::find(t.header.begin(), t.header.end(), name);
      if (it != t.header.end()) {
        base.col(static_cast<Eigen::Index>(j)) = t.values.col(it - t.header.begin());
      } else if (name == kInterceptName) {
        base.col(static_cast<Eigen::Index>(j)).setOnes();
      } else {
        throw CsvError(a.covariates, 1, 0, "missing covariate column '" + name + "' required by the model");
      }
    }
  }
  const Eigen::Index k = static_cast<Eigen::Index>(a.n_per_row);
  Eigen::MatrixXd Z(base.rows() * k, base.cols());
  for (Eigen::Index i = 0; i < base.rows(); ++i) Z.middleRows(i * k, k) = base.row(i).replicate(k, 1);
  err << "sample: " << Z.rows() << " draws from a " << model.structure.d << "-dimensional model\n";
  const Eigen::MatrixXd U = sample_vine(model, Z, a.seed);

  std::vector<std::string> header{"row"};
  for (std::size_t v = 0; v < model.structure.d; ++v) header.push_back("u" + std::to_string(v));
  std::vector<std::vector<std::string>> rows(static_cast<std::size_t>(U.rows()));
  for (Eigen::Index i = 0; i < U.rows(); ++i) {
    auto& row = rows[static_cast<std::size_t>(i)];
    row.push_back(std::to_string(i / k));
    for (Eigen::Index v = 0; v < U.cols(); ++v) row.push_back(format_double(U(i, v)));
  }
  write_text_file(a.out, to_csv(header, rows));

  RunManifest manifest;
  manifest.command = "sample";
  manifest.seed = a.seed;
  manifest.config = {{"model", a.model},
                     {"covariates", a.covariates},
                     {"n_per_row", a.n_per_row},
                     {"m", a.m ? ordered_json(*a.m) : ordered_json(nullptr)},
                     {"seed", a.seed}};
  manifest.inputs.emplace_back(a.model);
  if (!a.covariates.empty()) manifest.inputs.emplace_back(a.covariates);
  manifest.outputs = {a.out};
  manifest.write(default_path(a.manifest, a.out, ".manifest.json"));
  return kSuccess;
}

struct ScoreData {
  std::vector<std::string> times;
  std::vector<std::string> methods;
  std::vector<Eigen::VectorXd> obs;                         // per time
  std::map<std::string, std::vector<Eigen::MatrixXd>> ens;  // per method, per time
};

ScoreData read_score_inputs(const ScoreArgs& a) {
  const CsvTable f = read_csv(a.forecasts);
  const CsvTable o = read_csv(a.observations);
  if (f.header.size() < 4 || f.header[0] != "time" || f.header[1] != "method" || f.header[2] != "member")
    throw CsvError(a.forecasts, 1, 0, "header must start with time,method,member followed by value columns");
  const std::vector<std::string> vars(f.header.begin() + 3, f.header.end());
  if (o.header.empty() || o.header[0] != "time" || std::vector<std::string>(o.header.begin() + 1, o.header.end()) != vars)
    throw CsvError(a.observations, 1, 0, "header must be time followed by the forecast value columns");
  const auto d = static_cast<Eigen::Index>(vars.size());

  ScoreData s;
  std::map<std::string, std::size_t> time_index;
  for (std::size_t r = 0; r < o.rows.size(); ++r) {
    const auto& row = o.rows[r];
    if (!time_index.emplace(row[0], s.times.size()).second)
      throw CsvError(a.observations, o.row_lines[r], 1, "duplicate time '" + row[0] + "'");
    s.times.push_back(row[0]);
    Eigen::VectorXd y(d);
    for (Eigen::Index j = 0; j < d; ++j)
      y(j) = parse_cell(row[static_cast<std::size_t>(j) + 1], a.observations, o.row_lines[r], static_cast<std::size_t>(j) + 2);
    s.obs.push_back(std::move(y));
  }
  std::map<std::string, std::vector<std::vector<Eigen::RowVectorXd>>> members;
  for (std::size_t r = 0; r < f.rows.size(); ++r) {
    const auto& row = f.rows[r];
    const auto it = time_index.find(row[0]);
    if (it == time_index.end())
      throw CsvError(a.forecasts, f.row_lines[r], 1, "time '" + row[0] + "' has no observation");
    if (!members.count(row[1])) {
      s.methods.push_back(row[1]);
      members[row[1]].resize(s.times.size());
    }
    Eigen::RowVectorXd x(d);
    for (Eigen::Index j = 0; j < d; ++j)
      x(j) = parse_cell(row[static_cast<std::size_t>(j) + 3], a.forecasts, f.row_lines[r], static_cast<std::size_t>(j) + 4);
    members[row[1]][it->second].push_back(std::move(x));
  }
  if (s.methods.empty()) throw CsvError(a.forecasts, 2, 0, "no forecast rows");
  for (const auto& m : s.methods) {
    auto& per_time = members[m];
    for (std::size_t t = 0; t < s.times.size(); ++t) {
      if (per_time[t].empty())
        throw CsvError(a.observations, o.row_lines[t], 1,
                       "method '" + m + "' has no forecast for time '" + s.times[t] + "'");
      Eigen::MatrixXd X(static_cast<Eigen::Index>(per_time[t].size()), d);
      for (std::size_t k = 0; k < per_time[t].size(); ++k) X.row(static_cast<Eigen::Index>(k)) = per_time[t][k];
      s.ens[m].push_back(std::move(X));
    }
  }
  return s;
}

int cmd_score(const ScoreArgs& a, std::ostream& err) {
  if (!(a.vs_order > 0.0)) throw ConfigError("--vs-order must be positive");
  const ScoreData s = read_score_inputs(a);
  const std::size_t T = s.times.size();
  std::map<std::string, std::vector<double>> es, vs;
  for (const auto& m : s.methods)
    for (std::size_t t = 0; t < T; ++t) {
      const auto& X = s.ens.at(m)[t];
      es[m].push_back(a.es_form == "consecutive" ? energy_score_consecutive(X, s.obs[t]) : energy_score(X, s.obs[t]));
      vs[m].push_back(variogram_score(X, s.obs[t], a.vs_order));
    }

  std::vector<std::string> header{"time"};
  for (const auto& m : s.methods) header.push_back("es_" + m);
  for (const auto& m : s.methods) header.push_back("vs_" + m);
  std::vector<std::vector<std::string>> rows;
  for (std::size_t t = 0; t < T; ++t) {
    std::vector<std::string> row{s.times[t]};
    for (const auto& m : s.methods) row.push_back(format_double(es[m][t]));
    for (const auto& m : s.methods) row.push_back(format_double(vs[m][t]));
    rows.push_back(std::move(row));
  }
  write_text_file(a.out, to_csv(header, rows));

  rows.clear();
  if (T < 10 && s.methods.size() > 1) err << "score: fewer than 10 time points, Diebold-Mariano tests skipped\n";
  for (const auto& [name, table] : {std::pair{"energy", &es}, std::pair{"variogram", &vs}}) {
    for (std::size_t i = 0; T >= 10 && i < s.methods.size(); ++i)
      for (std::size_t j = i + 1; j < s.methods.size(); ++j) {
        const DmResult r = dm_test(table->at(s.methods[i]), table->at(s.methods[j]));
        if (r.degenerate)
          err << "score: " << name << " differential of " << s.methods[i] << " and " << s.methods[j]
              << " has zero variance, p = 1\n";
        rows.push_back({name, s.methods[i], s.methods[j], format_double(r.mean_difference),
                        r.degenerate ? "nan" : format_double(r.statistic), format_double(r.p_value),
                        std::to_string(r.lag), r.degenerate ? "1" : "0"});
      }
  }
  const std::string dm = default_path(a.dm_out, a.out, ".dm.csv");
  write_text_file(dm, to_csv({"score", "method_a", "method_b", "mean_difference", "statistic", "p_value", "lag",
                              "degenerate"},
                             rows));
  err << "score: " << T << " time points, " << s.methods.size() << " methods\n";

  RunManifest manifest;
  manifest.command = "score";
  manifest.config = {{"forecasts", a.forecasts},
                     {"observations", a.observations},
                     {"es_form", a.es_form},
                     {"vs_order", a.vs_order}};
  manifest.inputs = {a.forecasts, a.observations};
  manifest.outputs = {a.out, dm};
  manifest.write(default_path(a.manifest, a.out, ".manifest.json"));
  return kSuccess;
}

std::string grid_dir_name(const ScenarioConfig& c) {
  return "N" + std::to_string(c.N) + "_p" + std::to_string(c.p) + "_rho" + format_double(c.rho);
}

int cmd_simulate(const SimulateArgs& a, std::ostream& err) {
  const ScenarioConfig config = config_from_json(read_text_file(a.scenario));
  std::vector<std::pair<ScenarioConfig, fs::path>> runs;
  if (a.full_grid) {
    for (const auto& c : full_bicop_grid(config)) runs.emplace_back(c, fs::path(a.out_dir) / grid_dir_name(c));
  } else {
    runs.emplace_back(config, fs::path(a.out_dir));
  }
  RunManifest manifest;
  manifest.command = "simulate";
  manifest.seed = config.seed;
  manifest.config = ordered_json::parse(config_to_json(config));
  manifest.config["full_grid"] = a.full_grid;
  manifest.inputs.emplace_back(a.scenario);
  std::size_t failures = 0;
  for (const auto& [c, dir] : runs) {
    ScenarioConfig run = c;
    if (a.threads) run.threads = *a.threads;
    err << "simulate: " << (c.kind == ScenarioKind::Bicop ? "bicop" : "vine") << " N=" << c.N << " p=" << c.p
        << " rho=" << c.rho << " reps=" << c.n_reps << " threads=" << resolve_threads(run.threads) << "\n";
    ScenarioReport report = run_scenario(run);
    report.config = c;  // worker count does not enter the outputs
    failures += report.failures.size();
    for (const auto& s : summarize(report))
      err << "  tree " << s.tree << ": median MAE(tau) " << s.median_mae << ", exact selection " << s.exact_rate
          << ", family recovery " << s.family_recovery << "\n";
    for (auto& p : write_report(report, dir)) manifest.outputs.push_back(p);
  }
  manifest.extra["failed_repetitions"] = failures;
  manifest.write(fs::path(a.out_dir) / "manifest.json");
  return kSuccess;
}

int cmd_validate(const ValidateArgs& a, std::ostream& out) {
  if (a.structure.empty() == a.model.empty()) throw ConfigError("validate: pass exactly one of --structure, --model");
  if (!a.model.empty()) {
    const ConditionalVineModel m = model_from_json(read_text_file(a.model));
    out << "ok: model with " << m.structure.d << " variables, " << m.n_cols() << " design columns\n";
  } else {
    const VineStructure s = structure_from_json(read_text_file(a.structure));
    if (auto v = validate_structure(s)) throw InterfaceError(a.structure + ": invalid vine structure: " + v->message);
    out << "ok: regular vine on " << s.d << " variables\n";
  }
  return kSuccess;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Conditional vine copulas with boosted covariate effects"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("condvine ") + kVersion);

  FitArgs fa;
  auto* fit = app.add_subcommand("fit", "Fit a conditional vine copula");
  fit->add_option("--data", fa.data, "Copula data CSV, values in (0, 1)")->required();
  fit->add_option("--covariates", fa.covariates, "Covariate CSV, one row per data row");
  fit->add_option("--structure", fa.structure, "Structure JSON or 'auto'")->capture_default_str();
  fit->add_option("--families", fa.families, "Candidate families")->delimiter(',');
  fit->add_option("--selection", fa.selection, "Family selection criterion")
      ->check(CLI::IsMember({"aic", "loglik", "predictive"}))
      ->capture_default_str();
  fit->add_flag("--no-deselection", fa.no_deselection, "Skip attributable-risk deselection");
  fit->add_flag("--no-intercept", fa.no_intercept, "Do not prepend an intercept column");
  fit->add_option("--truncate", fa.truncate, "Independence above this tree level");
  fit->add_option("--out", fa.out, "Model JSON")->required();
  fit->add_option("--report", fa.report, "Per-edge report CSV (default <out>.report.csv)");
  fit->add_option("--manifest", fa.manifest, "Run manifest (default <out>.manifest.json)");
  fit->add_option("--threads", fa.threads, "Workers, 0 = available parallelism")->capture_default_str();
  fa.control.add_to(*fit);

  SampleArgs sa;
  auto* sample = app.add_subcommand("sample", "Sample from a fitted model");
  sample->add_option("--model", sa.model, "Model JSON")->required();
  auto* cov = sample->add_option("--covariates", sa.covariates, "Covariate CSV");
  sample->add_option("--m", sa.m, "Draws for an intercept-only model")->excludes(cov);
  sample->add_option("--n-per-row", sa.n_per_row, "Draws per covariate row")->capture_default_str();
  sample->add_option("--seed", sa.seed, "Seed")->capture_default_str();
  sample->add_option("--out", sa.out, "Samples CSV")->required();
  sample->add_option("--manifest", sa.manifest, "Run manifest (default <out>.manifest.json)");

  ScoreArgs sc;
  auto* score = app.add_subcommand("score", "Score ensemble forecasts");
  score->add_option("--forecasts", sc.forecasts, "CSV with time,method,member,values...")->required();
  score->add_option("--observations", sc.observations, "CSV with time,values...")->required();
  score->add_option("--out", sc.out, "Per-time scores CSV")->required();
  score->add_option("--dm-out", sc.dm_out, "Diebold-Mariano table (default <out>.dm.csv)");
  score->add_option("--manifest", sc.manifest, "Run manifest (default <out>.manifest.json)");
  score->add_option("--vs-order", sc.vs_order, "Variogram score order")->capture_default_str();
  score->add_option("--es-form", sc.es_form, "Energy score spread term")
      ->check(CLI::IsMember({"pairwise", "consecutive"}))
      ->capture_default_str();

  SimulateArgs si;
  auto* simulate = app.add_subcommand("simulate", "Run a simulation scenario");
  simulate->add_option("--scenario", si.scenario, "Scenario JSON")->required();
  simulate->add_option("--out-dir", si.out_dir, "Output directory")->required();
  simulate->add_flag("--full-grid", si.full_grid, "Run the full bivariate grid with 100 repetitions");
  simulate->add_option("--threads", si.threads, "Workers, 0 = available parallelism");

  ValidateArgs va;
  auto* validate = app.add_subcommand("validate", "Check a structure or model JSON");
  validate->add_option("--structure", va.structure, "Structure JSON");
  validate->add_option("--model", va.model, "Model JSON");

  std::vector<const char*> argv{"condvine"};
  for (const auto& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kUsageError;
  }

  try {
    if (fit->parsed()) return cmd_fit(fa, err);
    if (sample->parsed()) return cmd_sample(sa, err);
    if (score->parsed()) return cmd_score(sc, err);
    if (simulate->parsed()) return cmd_simulate(si, err);
    if (validate->parsed()) return cmd_validate(va, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const InterfaceError& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kNumericError;
  }
  return kUsageError;
}

}  // namespace condvine::cli
