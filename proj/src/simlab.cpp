#include "condvine/simlab.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

#include "condvine/csv.hpp"
#include "condvine/error.hpp"
#include "condvine/parallel.hpp"
#include "condvine/random.hpp"
#include "condvine/stats.hpp"

namespace condvine {

using nlohmann::json;

namespace {

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError("scenario field '" + field + "': " + what);
}

Eigen::VectorXd padded_beta(const std::vector<double>& beta, std::size_t p) {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
  for (std::size_t j = 0; j < std::min(beta.size(), p); ++j) b(static_cast<Eigen::Index>(j)) = beta[j];
  return b;
}

std::vector<std::size_t> leading_columns(std::size_t n) {
  std::vector<std::size_t> cols(n);
  for (std::size_t j = 0; j < n; ++j) cols[j] = j;
  return cols;
}

// Fills the selection metrics of `rec` from its kept set.
void score_selection(FitRecord& rec, const std::vector<std::size_t>& informative, bool count_intercept) {
  std::vector<std::size_t> kept;
  for (std::size_t j : rec.kept)
    if (count_intercept || j != 0) kept.push_back(j);
  const std::set<std::size_t> truth(informative.begin(), informative.end());
  rec.tp = 0;
  rec.fp = 0;
  for (std::size_t j : kept) (truth.count(j) ? rec.tp : rec.fp)++;
  rec.exact = kept == informative;
}

FitRecord make_record(std::size_t rep, std::size_t tree, const std::string& edge, Family truth,
                      const FittedPairCopula& fit, const Eigen::MatrixXd& Z, const Eigen::VectorXd& eta_true,
                      const ScenarioConfig& config, const std::vector<std::size_t>& informative) {
  FitRecord rec;
  rec.rep = rep;
  rec.tree = tree;
  rec.edge = edge;
  rec.true_family = truth;
  rec.family = fit.family;
  rec.beta = fit.beta;
  rec.m_opt = fit.m_opt;
  rec.kept = fit.kept;
  rec.mae = mae_tau(eta_true, Z * fit.beta);
  score_selection(rec, informative, config.count_intercept);
  return rec;
}

Family draw_family(const ScenarioConfig& config, Rng& rng) {
  if (config.family) return *config.family;
  return kCandidateFamilies[rng.index(kCandidateFamilies.size())];
}

PairFitOptions pair_options(const ScenarioConfig& config, Family truth) {
  PairFitOptions o;
  o.selection = config.selection;
  if (config.mode == FitMode::Specified) {
    o.families = {truth};
    o.deselection = false;
    o.allowed = leading_columns(std::min(config.true_beta.size(), config.p));
  }
  return o;
}

BoostControl rep_control(const ScenarioConfig& config, std::uint64_t rep_seed) {
  BoostControl c = config.control;
  c.seed = derive_seed(rep_seed, 3);
  return c;
}

struct RepResult {
  std::vector<FitRecord> records;
  std::optional<std::string> error;
};

template <class RunRep>
ScenarioReport run_reps(const ScenarioConfig& config, RunRep&& run_rep) {
  config.validate();
  std::vector<RepResult> results(config.n_reps);
  parallel_for(config.n_reps, config.threads, [&](std::size_t rep) {
    try {
      results[rep].records = run_rep(rep, derive_seed(config.seed, rep));
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      results[rep].error = e.what();
    }
  });
  ScenarioReport report;
  report.config = config;
  for (std::size_t rep = 0; rep < results.size(); ++rep) {
    if (results[rep].error) report.failures.push_back({rep, *results[rep].error});
    for (auto& r : results[rep].records) report.records.push_back(std::move(r));
  }
  return report;
}

std::string kind_name(ScenarioKind k) { return k == ScenarioKind::Bicop ? "bicop" : "vine"; }
std::string mode_name(FitMode m) { return m == FitMode::Selected ? "selected" : "specified"; }
std::string stopping_name(Stopping s) { return s == Stopping::AIC ? "aic" : "cv"; }
std::string selection_name(FamilySelection s) {
  switch (s) {
    case FamilySelection::AIC: return "aic";
    case FamilySelection::LogLik: return "loglik";
    case FamilySelection::PredictiveRisk: return "predictive";
  }
  return "?";
}

template <class T>
T get_field(const json& j, const std::string& name) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ConfigError("scenario field '" + name + "': wrong type");
  }
}

template <class E>
E enum_field(const json& j, const std::string& name, std::initializer_list<std::pair<const char*, E>> values) {
  const auto s = get_field<std::string>(j, name);
  for (const auto& [text, value] : values)
    if (s == text) return value;
  throw ConfigError("scenario field '" + name + "': unknown value '" + s + "'");
}

std::size_t count_field(const json& j, const std::string& name) {
  if (!j.is_number_integer() || j.get<long long>() < 0)
    throw ConfigError("scenario field '" + name + "': expected a non-negative integer");
  return j.get<std::size_t>();
}

// Edge labels without commas, for the unquoted CSV dialect.
std::string csv_edge(std::string label) {
  std::replace(label.begin(), label.end(), ',', ' ');
  return label;
}

std::string join_indices(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + std::to_string(v[i]);
  return s;
}

}  // namespace

void ScenarioConfig::validate() const {
  require(N >= 20, "N", "must be at least 20");
  require(p >= 2, "p", "must be at least 2");
  require(rho > 0.0 && rho < 1.0, "rho", "must lie in (0, 1)");
  require(n_reps >= 1, "n_reps", "must be at least 1");
  require(!true_beta.empty() && true_beta.size() <= p, "true_beta", "needs between 1 and p entries");
  for (double b : true_beta) require(std::isfinite(b), "true_beta", "entries must be finite");
  require(!family || *family != Family::Independence, "family", "must be one of the five copula families");
  try {
    control.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("scenario field 'control': ") + e.what());
  }
}

Eigen::MatrixXd gen_covariates(std::size_t N, std::size_t p, double rho, std::uint64_t seed) {
  if (!(rho > 0.0 && rho < 1.0)) throw DomainError("gen_covariates: rho must lie in (0, 1)");
  Rng rng(seed);
  const double s = std::sqrt(1.0 - rho * rho);
  Eigen::MatrixXd Z(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(p));
  for (Eigen::Index i = 0; i < Z.rows(); ++i) {
    if (p == 0) break;
    Z(i, 0) = 1.0;
    double prev = 0.0;
    for (Eigen::Index j = 1; j < Z.cols(); ++j) {
      prev = j == 1 ? rng.normal() : rho * prev + s * rng.normal();
      Z(i, j) = prev;
    }
  }
  return Z;
}

Eigen::VectorXd true_eta(const Eigen::MatrixXd& Z, const std::vector<double>& beta) {
  if (beta.size() > static_cast<std::size_t>(Z.cols()))
    throw InterfaceError("true_eta: more coefficients than design columns");
  return Z * padded_beta(beta, static_cast<std::size_t>(Z.cols()));
}

double mae_tau(const Eigen::VectorXd& eta_true, const Eigen::VectorXd& eta_hat) {
  if (eta_true.size() != eta_hat.size() || eta_true.size() == 0)
    throw InterfaceError("mae_tau: predictor lengths differ or are empty");
  double s = 0.0;
  for (Eigen::Index i = 0; i < eta_true.size(); ++i) s += std::abs(link_tau(eta_true(i)) - link_tau(eta_hat(i)));
  return s / static_cast<double>(eta_true.size());
}

std::vector<std::size_t> informative_columns(const std::vector<double>& beta, bool count_intercept) {
  std::vector<std::size_t> cols;
  if (count_intercept) cols.push_back(0);
  for (std::size_t j = 1; j < beta.size(); ++j)
    if (beta[j] != 0.0) cols.push_back(j);
  return cols;
}

VineStructure five_dim_structure() {
  VineStructure s;
  s.d = 5;
  s.trees = {{make_edge(0, 1), make_edge(0, 2), make_edge(0, 3), make_edge(3, 4)},
             {make_edge(1, 3, {0}), make_edge(2, 3, {0}), make_edge(0, 4, {3})},
             {make_edge(1, 2, {0, 3}), make_edge(2, 4, {0, 3})},
             {make_edge(1, 4, {0, 2, 3})}};
  s.normalize();
  return s;
}

ScenarioReport run_bicop_scenario(const ScenarioConfig& config) {
  const auto informative = informative_columns(config.true_beta, config.count_intercept);
  return run_reps(config, [&](std::size_t rep, std::uint64_t rep_seed) {
    const Eigen::MatrixXd Z = gen_covariates(config.N, config.p, config.rho, derive_seed(rep_seed, 0));
    Rng family_rng(derive_seed(rep_seed, 1));
    const Family truth = draw_family(config, family_rng);
    const Eigen::VectorXd eta = true_eta(Z, config.true_beta);
    Rng rng(derive_seed(rep_seed, 2));
    std::vector<UnitPair> pairs(config.N);
    for (std::size_t i = 0; i < config.N; ++i) {
      const double w1 = rng.uniform();
      const double w2 = rng.uniform();
      const double tau = link_tau(eta(static_cast<Eigen::Index>(i)));
      pairs[i] = {w1, hinv(truth, Conditioning::SecondGivenFirst, w2, w1, tau)};
    }
    const FittedPairCopula fit = fit_pair(pairs, Z, rep_control(config, rep_seed), pair_options(config, truth));
    return std::vector<FitRecord>{make_record(rep, 1, edge_label(make_edge(0, 1)), truth, fit, Z, eta, config, informative)};
  });
}

ScenarioReport run_vine_scenario(const ScenarioConfig& config) {
  const auto informative = informative_columns(config.true_beta, config.count_intercept);
  const VineStructure structure = five_dim_structure();
  return run_reps(config, [&](std::size_t rep, std::uint64_t rep_seed) {
    const Eigen::MatrixXd Z = gen_covariates(config.N, config.p, config.rho, derive_seed(rep_seed, 0));
    const Eigen::VectorXd beta = padded_beta(config.true_beta, config.p);
    const Eigen::VectorXd eta = Z * beta;
    Rng family_rng(derive_seed(rep_seed, 1));
    std::vector<std::vector<Family>> families(structure.trees.size());
    std::vector<std::vector<Eigen::VectorXd>> betas(structure.trees.size());
    for (std::size_t t = 0; t < structure.trees.size(); ++t)
      for (std::size_t i = 0; i < structure.trees[t].size(); ++i) {
        families[t].push_back(draw_family(config, family_rng));
        betas[t].push_back(beta);
      }
    const ConditionalVineModel truth = make_vine_model(structure, families, betas);
    const Eigen::MatrixXd U = sample_vine(truth, Z, derive_seed(rep_seed, 2));

    VineFitOptions options;
    options.pair = pair_options(config, Family::Gaussian);
    if (config.mode == FitMode::Specified) {
      options.pair.families.assign(kCandidateFamilies.begin(), kCandidateFamilies.end());
      for (std::size_t t = 0; t < structure.trees.size(); ++t)
        for (std::size_t i = 0; i < structure.trees[t].size(); ++i)
          options.edge_families[truth.structure.trees[t][i]] = {truth.pair_models[t][i].family};
    }
    const ConditionalVineModel fit = fit_vine(U, Z, structure, rep_control(config, rep_seed), options);

    std::vector<FitRecord> records;
    for (std::size_t t = 0; t < fit.structure.trees.size(); ++t)
      for (std::size_t i = 0; i < fit.structure.trees[t].size(); ++i)
        records.push_back(make_record(rep, t + 1, edge_label(fit.structure.trees[t][i]),
                                      truth.pair_models[t][i].family, fit.pair_models[t][i], Z, eta, config,
                                      informative));
    return records;
  });
}

ScenarioReport run_scenario(const ScenarioConfig& config) {
  return config.kind == ScenarioKind::Bicop ? run_bicop_scenario(config) : run_vine_scenario(config);
}

std::vector<TreeSummary> summarize(const ScenarioReport& report) {
  std::size_t n_trees = 0;
  for (const auto& r : report.records) n_trees = std::max(n_trees, r.tree);
  std::vector<TreeSummary> out;
  for (std::size_t tree = 1; tree <= n_trees; ++tree) {
    std::vector<const FitRecord*> recs;
    for (const auto& r : report.records)
      if (r.tree == tree) recs.push_back(&r);
    TreeSummary s;
    s.tree = tree;
    s.n_records = recs.size();
    if (recs.empty()) {
      out.push_back(s);
      continue;
    }
    const auto n = static_cast<double>(recs.size());
    const auto p = static_cast<std::size_t>(recs.front()->beta.size());
    std::vector<double> col(recs.size());
    for (std::size_t j = 0; j < p; ++j) {
      for (std::size_t k = 0; k < recs.size(); ++k) col[k] = recs[k]->beta(static_cast<Eigen::Index>(j));
      s.median_beta.push_back(median(col));
    }
    const auto& tb = report.config.true_beta;
    for (std::size_t j = 0; j < tb.size() && j < p; ++j) s.bias += std::abs(s.median_beta[j] - tb[j]);
    s.bias /= static_cast<double>(std::min(tb.size(), p));
    std::vector<double> mae, kept;
    std::size_t exact = 0, recovered = 0;
    for (const auto* r : recs) {
      mae.push_back(r->mae);
      kept.push_back(static_cast<double>(r->kept.size()));
      s.max_kept = std::max(s.max_kept, r->kept.size());
      exact += r->exact;
      recovered += r->family == r->true_family;
    }
    s.median_mae = median(mae);
    s.median_kept = median(kept);
    s.exact_rate = static_cast<double>(exact) / n;
    s.family_recovery = static_cast<double>(recovered) / n;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<ScenarioConfig> full_bicop_grid(const ScenarioConfig& base) {
  std::vector<ScenarioConfig> grid;
  for (std::size_t N : {1000u, 2000u})
    for (std::size_t p : {101u, 501u, 2001u, 4001u})
      for (double rho : {0.2, 0.8}) {
        ScenarioConfig c = base;
        c.kind = ScenarioKind::Bicop;
        c.N = N;
        c.p = p;
        c.rho = rho;
        c.n_reps = 100;
        grid.push_back(c);
      }
  return grid;
}

std::string config_to_json(const ScenarioConfig& c) {
  json control = {{"m_stop", c.control.m_stop},
                  {"nu", c.control.nu},
                  {"gamma", c.control.gamma},
                  {"stopping", stopping_name(c.control.stopping)},
                  {"cv_folds", c.control.cv_folds},
                  {"seed", c.control.seed},
                  {"exempt_intercept", c.control.exempt_intercept},
                  {"attribute_to_m_opt", c.control.attribute_to_m_opt}};
  json j = {{"kind", kind_name(c.kind)},
            {"N", c.N},
            {"p", c.p},
            {"rho", c.rho},
            {"n_reps", c.n_reps},
            {"family", c.family ? std::string(family_name(*c.family)) : std::string("random")},
            {"mode", mode_name(c.mode)},
            {"control", control},
            {"seed", c.seed},
            {"true_beta", c.true_beta},
            {"count_intercept", c.count_intercept},
            {"selection", selection_name(c.selection)},
            {"threads", c.threads}};
  return j.dump(2) + "\n";
}

ScenarioConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("scenario config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("scenario config must be a JSON object");
  ScenarioConfig c;
  for (const auto& [key, v] : j.items()) {
    if (key == "kind") {
      c.kind = enum_field<ScenarioKind>(v, key, {{"bicop", ScenarioKind::Bicop}, {"vine", ScenarioKind::Vine}});
    } else if (key == "N") {
      c.N = count_field(v, key);
    } else if (key == "p") {
      c.p = count_field(v, key);
    } else if (key == "rho") {
      require(v.is_number(), key, "expected a number");
      c.rho = v.get<double>();
    } else if (key == "n_reps") {
      c.n_reps = count_field(v, key);
    } else if (key == "family") {
      const auto name = get_field<std::string>(v, key);
      if (name == "random") {
        c.family.reset();
      } else {
        try {
          c.family = parse_family(name);
        } catch (const DomainError&) {
          throw ConfigError("scenario field 'family': unknown family '" + name + "'");
        }
      }
    } else if (key == "mode") {
      c.mode = enum_field<FitMode>(v, key, {{"selected", FitMode::Selected}, {"specified", FitMode::Specified}});
    } else if (key == "seed") {
      c.seed = count_field(v, key);
    } else if (key == "true_beta") {
      require(v.is_array(), key, "expected an array of numbers");
      c.true_beta.clear();
      for (const auto& b : v) {
        require(b.is_number(), key, "expected an array of numbers");
        c.true_beta.push_back(b.get<double>());
      }
    } else if (key == "count_intercept") {
      c.count_intercept = get_field<bool>(v, key);
    } else if (key == "selection") {
      c.selection = enum_field<FamilySelection>(v, key,
                                                {{"aic", FamilySelection::AIC},
                                                 {"loglik", FamilySelection::LogLik},
                                                 {"predictive", FamilySelection::PredictiveRisk}});
    } else if (key == "threads") {
      c.threads = static_cast<unsigned>(count_field(v, key));
    } else if (key == "control") {
      require(v.is_object(), key, "expected an object");
      for (const auto& [ck, cv] : v.items()) {
        const std::string name = "control." + ck;
        if (ck == "m_stop") {
          c.control.m_stop = count_field(cv, name);
        } else if (ck == "nu") {
          require(cv.is_number(), name, "expected a number");
          c.control.nu = cv.get<double>();
        } else if (ck == "gamma") {
          require(cv.is_number(), name, "expected a number");
          c.control.gamma = cv.get<double>();
        } else if (ck == "stopping") {
          c.control.stopping = enum_field<Stopping>(cv, name, {{"aic", Stopping::AIC}, {"cv", Stopping::CV}});
        } else if (ck == "cv_folds") {
          c.control.cv_folds = count_field(cv, name);
        } else if (ck == "seed") {
          c.control.seed = count_field(cv, name);
        } else if (ck == "exempt_intercept") {
          c.control.exempt_intercept = get_field<bool>(cv, name);
        } else if (ck == "attribute_to_m_opt") {
          c.control.attribute_to_m_opt = get_field<bool>(cv, name);
        } else {
          throw ConfigError("scenario field '" + name + "': unknown field");
        }
      }
    } else {
      throw ConfigError("scenario field '" + key + "': unknown field");
    }
  }
  c.validate();
  return c;
}

std::vector<std::filesystem::path> write_report(const ScenarioReport& report, const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> written;
  auto emit = [&](const std::string& name, const std::string& text) {
    write_text_file(dir / name, text);
    written.push_back(dir / name);
  };
  const std::size_t p = report.config.p;

  std::vector<std::string> header{"rep", "tree", "edge", "true_family", "family"};
  for (std::size_t j = 0; j < p; ++j) header.push_back("beta_" + std::to_string(j));
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : report.records) {
    std::vector<std::string> row{std::to_string(r.rep), std::to_string(r.tree), csv_edge(r.edge),
                                 std::string(family_name(r.true_family)), std::string(family_name(r.family))};
    for (Eigen::Index j = 0; j < r.beta.size(); ++j) row.push_back(format_double(r.beta(j)));
    rows.push_back(std::move(row));
  }
  emit("coefficients.csv", to_csv(header, rows));

  rows.clear();
  for (const auto& r : report.records)
    rows.push_back({std::to_string(r.rep), std::to_string(r.tree), csv_edge(r.edge),
                    std::string(family_name(r.true_family)), std::string(family_name(r.family)),
                    std::to_string(r.m_opt), std::to_string(r.kept.size()), join_indices(r.kept),
                    std::to_string(r.tp), std::to_string(r.fp), r.exact ? "1" : "0", format_double(r.mae)});
  emit("metrics.csv", to_csv({"rep", "tree", "edge", "true_family", "family", "m_opt", "n_kept", "kept", "tp", "fp",
                              "exact", "mae_tau"},
                             rows));

  rows.clear();
  std::vector<std::string> sheader{"tree",       "n_records",       "median_mae_tau", "exact_rate",
                                   "family_recovery", "median_kept", "max_kept",       "bias"};
  const std::size_t n_listed = std::min(report.config.true_beta.size(), p);
  for (std::size_t j = 0; j < n_listed; ++j) sheader.push_back("median_beta_" + std::to_string(j));
  for (const auto& s : summarize(report)) {
    std::vector<std::string> row{std::to_string(s.tree),       std::to_string(s.n_records),
                                 format_double(s.median_mae),  format_double(s.exact_rate),
                                 format_double(s.family_recovery), format_double(s.median_kept),
                                 std::to_string(s.max_kept),   format_double(s.bias)};
    for (std::size_t j = 0; j < n_listed; ++j)
      row.push_back(j < s.median_beta.size() ? format_double(s.median_beta[j]) : "");
    rows.push_back(std::move(row));
  }
  emit("summary.csv", to_csv(sheader, rows));

  rows.clear();
  for (const auto& f : report.failures) {
    std::string msg = f.message;
    std::replace(msg.begin(), msg.end(), ',', ';');
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    rows.push_back({std::to_string(f.rep), msg});
  }
  emit("failures.csv", to_csv({"rep", "message"}, rows));
  emit("config.json", config_to_json(report.config));
  return written;
}

}  // namespace condvine
