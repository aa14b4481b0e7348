#include <json.hpp>

#include "condvine/error.hpp"
#include "condvine/vine.hpp"

namespace condvine {

namespace {

using nlohmann::json;

json edge_json(const VineEdge& e) { return {{"a", e.a}, {"b", e.b}, {"conditioning", e.D}}; }

VineEdge edge_from(const json& j) {
  return make_edge(j.at("a").get<std::size_t>(), j.at("b").get<std::size_t>(),
                   j.at("conditioning").get<std::vector<std::size_t>>());
}

json structure_json(const VineStructure& s) {
  json trees = json::array();
  for (const auto& tree : s.trees) {
    json edges = json::array();
    for (const auto& e : tree) edges.push_back(edge_json(e));
    trees.push_back(std::move(edges));
  }
  return {{"dimension", s.d}, {"trees", std::move(trees)}};
}

VineStructure structure_from(const json& j) {
  VineStructure s;
  s.d = j.at("dimension").get<std::size_t>();
  for (const auto& tree : j.at("trees")) {
    std::vector<VineEdge> edges;
    for (const auto& e : tree) edges.push_back(edge_from(e));
    s.trees.push_back(std::move(edges));
  }
  return s;
}

json pair_json(const VineEdge& e, const FittedPairCopula& m, const std::vector<std::string>& names) {
  json coefficients = json::array();
  for (Eigen::Index k = 0; k < m.beta.size(); ++k)
    coefficients.push_back({{"covariate", names.at(static_cast<std::size_t>(k))}, {"value", m.beta(k)}});
  json candidates = json::array();
  for (const auto& c : m.candidates) {
    candidates.push_back({{"family", family_name(c.family)},
                          {"ok", c.ok},
                          {"aic", c.aic},
                          {"loglik", c.loglik},
                          {"holdout_risk", c.holdout_risk},
                          {"error", c.error}});
  }
  json j = edge_json(e);
  j["family"] = family_name(m.family);
  j["coefficients"] = std::move(coefficients);
  j["kept_covariates"] = m.kept;
  j["m_opt"] = m.m_opt;
  j["aic"] = m.aic;
  j["loglik"] = m.loglik;
  j["n_obs"] = m.n_obs;
  j["risk_path"] = m.risk_path;
  j["candidates"] = std::move(candidates);
  return j;
}

FittedPairCopula pair_from(const json& j, const std::vector<std::string>& names) {
  FittedPairCopula m;
  m.family = parse_family(j.at("family").get<std::string>());
  const auto& coefficients = j.at("coefficients");
  if (coefficients.size() != names.size()) throw InterfaceError("model JSON: coefficient count differs from covariate names");
  m.beta.resize(static_cast<Eigen::Index>(coefficients.size()));
  for (std::size_t k = 0; k < coefficients.size(); ++k) {
    if (coefficients[k].at("covariate").get<std::string>() != names[k])
      throw InterfaceError("model JSON: coefficient label '" + coefficients[k].at("covariate").get<std::string>() +
                           "' does not match covariate '" + names[k] + "'");
    m.beta(static_cast<Eigen::Index>(k)) = coefficients[k].at("value").get<double>();
  }
  m.kept = j.at("kept_covariates").get<std::vector<std::size_t>>();
  m.m_opt = j.at("m_opt").get<std::size_t>();
  m.aic = j.at("aic").get<double>();
  m.loglik = j.at("loglik").get<double>();
  m.n_obs = j.at("n_obs").get<std::size_t>();
  m.risk_path = j.at("risk_path").get<std::vector<double>>();
  for (const auto& c : j.at("candidates")) {
    CandidateSummary s;
    s.family = parse_family(c.at("family").get<std::string>());
    s.ok = c.at("ok").get<bool>();
    s.aic = c.at("aic").get<double>();
    s.loglik = c.at("loglik").get<double>();
    s.holdout_risk = c.at("holdout_risk").get<double>();
    s.error = c.at("error").get<std::string>();
    m.candidates.push_back(std::move(s));
  }
  return m;
}

template <class Fn>
auto parse_guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw InterfaceError(std::string("malformed JSON: ") + e.what());
  } catch (const DomainError& e) {
    throw InterfaceError(std::string("malformed JSON: ") + e.what());
  }
}

}  // namespace

std::string to_json(const ConditionalVineModel& model) {
  json trees = json::array();
  for (std::size_t t = 0; t < model.structure.trees.size(); ++t) {
    json edges = json::array();
    for (std::size_t i = 0; i < model.structure.trees[t].size(); ++i)
      edges.push_back(pair_json(model.structure.trees[t][i], model.pair_models[t][i], model.covariate_names));
    trees.push_back(std::move(edges));
  }
  json j = {{"schema_version", kModelSchemaVersion},
            {"kind", "conditional_vine"},
            {"dimension", model.structure.d},
            {"covariate_names", model.covariate_names},
            {"truncation_level", model.truncation_level ? json(*model.truncation_level) : json(nullptr)},
            {"trees", std::move(trees)}};
  return j.dump(2) + "\n";
}

ConditionalVineModel model_from_json(const std::string& text) {
  return parse_guarded([&] {
    const json j = json::parse(text);
    if (j.at("schema_version").get<int>() != kModelSchemaVersion)
      throw InterfaceError("model JSON: unsupported schema_version " + j.at("schema_version").dump());
    ConditionalVineModel model;
    model.structure.d = j.at("dimension").get<std::size_t>();
    model.covariate_names = j.at("covariate_names").get<std::vector<std::string>>();
    if (!j.at("truncation_level").is_null()) model.truncation_level = j.at("truncation_level").get<std::size_t>();
    for (const auto& tree : j.at("trees")) {
      std::vector<VineEdge> edges;
      std::vector<FittedPairCopula> models;
      for (const auto& e : tree) {
        edges.push_back(edge_from(e));
        models.push_back(pair_from(e, model.covariate_names));
      }
      model.structure.trees.push_back(std::move(edges));
      model.pair_models.push_back(std::move(models));
    }
    if (auto v = validate_structure(model.structure)) throw InterfaceError("model JSON: " + v->message);
    for (std::size_t t = 0; t < model.structure.trees.size(); ++t) {
      if (!std::is_sorted(model.structure.trees[t].begin(), model.structure.trees[t].end()))
        throw InterfaceError("model JSON: edges of tree " + std::to_string(t + 1) + " are not in canonical order");
    }
    return model;
  });
}

std::string structure_to_json(const VineStructure& structure) { return structure_json(structure).dump(2) + "\n"; }

VineStructure structure_from_json(const std::string& text) {
  return parse_guarded([&] {
    VineStructure s = structure_from(json::parse(text));
    s.normalize();
    return s;
  });
}

}  // namespace condvine
