#include "condvine/vine.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <sstream>

#include "condvine/error.hpp"
#include "condvine/parallel.hpp"
#include "condvine/random.hpp"
#include "condvine/stats.hpp"

namespace condvine {

namespace {

using Set = std::vector<std::size_t>;
using Key = std::pair<std::size_t, Set>;
using Store = std::map<Key, std::vector<double>>;

Set with(Set s, std::size_t v) {
  s.insert(std::lower_bound(s.begin(), s.end(), v), v);
  return s;
}

bool contains(const Set& s, std::size_t v) { return std::binary_search(s.begin(), s.end(), v); }

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), std::size_t{0}); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
    return x;
  }
  /// False if x and y were already connected.
  bool unite(std::size_t x, std::size_t y) {
    x = find(x);
    y = find(y);
    if (x == y) return false;
    parent_[y] = x;
    return true;
  }

 private:
  std::vector<std::size_t> parent_;
};

StructureViolation violation(ViolationKind kind, std::size_t tree, std::size_t edge, std::string message) {
  return {kind, tree, edge, std::move(message)};
}

// Joins two edges of the same tree; nullopt if they share no node.
std::optional<VineEdge> join_edges(const VineEdge& e1, const VineEdge& e2) {
  const Set f1 = e1.full_set();
  const Set f2 = e2.full_set();
  Set common, only1, only2;
  std::set_intersection(f1.begin(), f1.end(), f2.begin(), f2.end(), std::back_inserter(common));
  std::set_difference(f1.begin(), f1.end(), f2.begin(), f2.end(), std::back_inserter(only1));
  std::set_difference(f2.begin(), f2.end(), f1.begin(), f1.end(), std::back_inserter(only2));
  if (only1.size() != 1 || only2.size() != 1) return std::nullopt;
  // The shared set must be a node of both edges: an endpoint of an edge is its
  // full set minus one of its conditioned variables.
  if (!e1.D.empty() && (contains(e1.D, only1[0]) || contains(e2.D, only2[0]))) return std::nullopt;
  return make_edge(only1[0], only2[0], common);
}

struct PeelResult {
  std::vector<std::size_t> order;
  // chain[k][t] = (tree, edge index) of the k-th sampled variable's edge in tree t.
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> chain;
};

std::size_t find_edge(const VineStructure& s, std::size_t tree, const Set& full) {
  const auto& edges = s.trees[tree];
  for (std::size_t i = 0; i < edges.size(); ++i)
    if (edges[i].full_set() == full) return i;
  throw InterfaceError("vine: structure has no edge with the required full set in tree " + std::to_string(tree + 1));
}

PeelResult peel(const VineStructure& s) {
  const std::size_t d = s.d;
  PeelResult r;
  r.order.assign(d, 0);
  r.chain.assign(d, {});
  std::vector<std::vector<bool>> removed(s.trees.size());
  for (std::size_t t = 0; t < s.trees.size(); ++t) removed[t].assign(s.trees[t].size(), false);

  for (std::size_t k = d - 1; k >= 1; --k) {
    const std::size_t top_tree = k - 1;
    std::size_t top = s.trees[top_tree].size();
    for (std::size_t i = 0; i < s.trees[top_tree].size(); ++i)
      if (!removed[top_tree][i]) top = i;
    if (top == s.trees[top_tree].size()) throw InterfaceError("vine: cannot determine sampling order");
    const std::size_t v = s.trees[top_tree][top].b;
    std::vector<std::pair<std::size_t, std::size_t>> chain(k);
    std::size_t idx = top;
    for (std::size_t t = top_tree + 1; t-- > 0;) {
      if (removed[t][idx]) throw InterfaceError("vine: cannot determine sampling order");
      chain[t] = {t, idx};
      removed[t][idx] = true;
      if (t > 0) idx = find_edge(s, t - 1, with(s.trees[t][idx].D, v));
    }
    r.order[k] = v;
    r.chain[k] = std::move(chain);
    if (k == 1) {
      const auto& last = s.trees[0][top];
      r.order[0] = last.a == v ? last.b : last.a;
    }
  }
  return r;
}

Set other_variables(const std::vector<std::size_t>& order, std::size_t k) {
  Set s(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(s.begin(), s.end());
  return s;
}

void check_data(const ConditionalVineModel& model, const Eigen::MatrixXd& U, const Eigen::MatrixXd& Z) {
  if (static_cast<std::size_t>(U.cols()) != model.structure.d)
    throw InterfaceError("vine: data has " + std::to_string(U.cols()) + " columns, model dimension is " +
                         std::to_string(model.structure.d));
  if (U.rows() != Z.rows()) throw InterfaceError("vine: data and covariate row counts differ");
  if (static_cast<std::size_t>(Z.cols()) != model.n_cols())
    throw InterfaceError("vine: covariates have " + std::to_string(Z.cols()) + " columns, model expects " +
                         std::to_string(model.n_cols()));
}

std::vector<double> column(const Eigen::MatrixXd& M, std::size_t j) {
  std::vector<double> v(static_cast<std::size_t>(M.rows()));
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  return v;
}

std::vector<double> edge_tau(const FittedPairCopula& m, const Eigen::MatrixXd& Z) {
  if (m.family == Family::Independence) return std::vector<double>(static_cast<std::size_t>(Z.rows()), 0.0);
  return predict_tau(m, Z);
}

[[noreturn]] void rethrow_with_edge(const VineEdge& e, std::size_t tree) {
  const std::string where = "edge " + edge_label(e) + " (tree " + std::to_string(tree + 1) + "): ";
  try {
    throw;
  } catch (const FitError& x) {
    throw FitError(where + x.what());
  } catch (const EvaluationError& x) {
    throw EvaluationError(where + x.what(), x.u1(), x.u2(), x.parameter());
  } catch (const NumericError& x) {
    throw NumericError(where + x.what());
  }
}

// Stores both h-function outputs of an edge.
void propagate(const VineEdge& e, Family family, const std::vector<double>& x, const std::vector<double>& y,
               const std::vector<double>& tau, std::size_t tree, Store& store) {
  std::vector<double> out_a(x.size()), out_b(x.size());
  try {
    for (std::size_t i = 0; i < x.size(); ++i) {
      out_a[i] = clamp_unit(hfunc(family, Conditioning::FirstGivenSecond, x[i], y[i], tau[i]));
      out_b[i] = clamp_unit(hfunc(family, Conditioning::SecondGivenFirst, x[i], y[i], tau[i]));
    }
  } catch (...) {
    rethrow_with_edge(e, tree);
  }
  store[{e.a, with(e.D, e.b)}] = std::move(out_a);
  store[{e.b, with(e.D, e.a)}] = std::move(out_b);
}

struct Forward {
  Store store;
  std::vector<std::vector<EdgeInputs>> inputs;
  std::vector<std::vector<std::vector<double>>> tau;
};

Forward forward(const ConditionalVineModel& model, const Eigen::MatrixXd& U, const Eigen::MatrixXd& Z) {
  check_data(model, U, Z);
  const auto& s = model.structure;
  Forward f;
  for (std::size_t v = 0; v < s.d; ++v) f.store[{v, {}}] = column(U, v);
  f.inputs.resize(s.trees.size());
  f.tau.resize(s.trees.size());
  for (std::size_t t = 0; t < s.trees.size(); ++t) {
    for (std::size_t i = 0; i < s.trees[t].size(); ++i) {
      const VineEdge& e = s.trees[t][i];
      const FittedPairCopula& m = model.pair_models[t][i];
      EdgeInputs in{f.store.at({e.a, e.D}), f.store.at({e.b, e.D})};
      auto tau = edge_tau(m, Z);
      propagate(e, m.family, in.first, in.second, tau, t, f.store);
      f.inputs[t].push_back(std::move(in));
      f.tau[t].push_back(std::move(tau));
    }
  }
  return f;
}

bool same_pair_model(const FittedPairCopula& x, const FittedPairCopula& y) {
  if (x.family != y.family || x.beta.size() != y.beta.size() || x.m_opt != y.m_opt || x.aic != y.aic ||
      x.loglik != y.loglik || x.n_obs != y.n_obs || x.kept != y.kept || x.risk_path != y.risk_path ||
      x.candidates.size() != y.candidates.size())
    return false;
  for (Eigen::Index j = 0; j < x.beta.size(); ++j)
    if (x.beta(j) != y.beta(j)) return false;
  for (std::size_t c = 0; c < x.candidates.size(); ++c) {
    const auto& a = x.candidates[c];
    const auto& b = y.candidates[c];
    if (a.family != b.family || a.ok != b.ok || a.aic != b.aic || a.loglik != b.loglik ||
        a.holdout_risk != b.holdout_risk || a.error != b.error)
      return false;
  }
  return true;
}

std::vector<std::string> default_names(std::size_t n) {
  std::vector<std::string> names(n);
  for (std::size_t j = 0; j < n; ++j) names[j] = "z" + std::to_string(j);
  return names;
}

struct WeightedJoin {
  double weight;
  std::size_t i;
  std::size_t j;
  VineEdge edge;
};

// Kruskal maximum spanning tree over `n` nodes; ties keep candidate order.
std::vector<VineEdge> max_spanning_tree(std::vector<WeightedJoin> candidates, std::size_t n) {
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const WeightedJoin& x, const WeightedJoin& y) { return x.weight > y.weight; });
  UnionFind uf(n);
  std::vector<VineEdge> tree;
  for (auto& c : candidates) {
    if (tree.size() + 1 == n) break;
    if (uf.unite(c.i, c.j)) tree.push_back(std::move(c.edge));
  }
  return tree;
}

}  // namespace

std::vector<std::size_t> VineEdge::full_set() const { return with(with(D, a), b); }

VineEdge make_edge(std::size_t a, std::size_t b, std::vector<std::size_t> D) {
  if (a > b) std::swap(a, b);
  std::sort(D.begin(), D.end());
  return {a, b, std::move(D)};
}

std::string edge_label(const VineEdge& edge) {
  std::ostringstream os;
  os << edge.a << ',' << edge.b;
  if (!edge.D.empty()) {
    os << ';';
    for (std::size_t i = 0; i < edge.D.size(); ++i) os << (i ? "," : "") << edge.D[i];
  }
  return os.str();
}

void VineStructure::normalize() {
  for (auto& tree : trees) {
    for (auto& e : tree) e = make_edge(e.a, e.b, e.D);
    std::sort(tree.begin(), tree.end());
  }
}

std::optional<StructureViolation> validate_structure(const VineStructure& s) {
  if (s.d < 2) return violation(ViolationKind::Shape, 0, 0, "dimension must be at least 2");
  if (s.trees.size() != s.d - 1)
    return violation(ViolationKind::Shape, 0, 0,
                     "expected " + std::to_string(s.d - 1) + " trees, found " + std::to_string(s.trees.size()));
  for (std::size_t t = 0; t < s.trees.size(); ++t) {
    const auto& tree = s.trees[t];
    const std::size_t level = t + 1;
    if (tree.size() != s.d - 1 - t)
      return violation(ViolationKind::Shape, level, 0,
                       "tree " + std::to_string(level) + " must have " + std::to_string(s.d - 1 - t) + " edges, found " +
                           std::to_string(tree.size()));
    for (std::size_t i = 0; i < tree.size(); ++i) {
      const VineEdge& e = tree[i];
      Set d_sorted = e.D;
      std::sort(d_sorted.begin(), d_sorted.end());
      const bool unique = std::adjacent_find(d_sorted.begin(), d_sorted.end()) == d_sorted.end();
      const bool in_range = e.a < s.d && e.b < s.d &&
                            std::all_of(e.D.begin(), e.D.end(), [&](std::size_t v) { return v < s.d; });
      if (!in_range || e.a == e.b || e.D.size() != t || !unique || contains(d_sorted, e.a) || contains(d_sorted, e.b))
        return violation(ViolationKind::Shape, level, i, "malformed edge " + edge_label(e));
    }
    if (t == 0) {
      UnionFind uf(s.d);
      for (std::size_t i = 0; i < tree.size(); ++i)
        if (!uf.unite(tree[i].a, tree[i].b))
          return violation(ViolationKind::FirstTree, level, i, "edge " + edge_label(tree[i]) + " closes a cycle in tree 1");
      continue;
    }
    const auto& prev = s.trees[t - 1];
    std::map<Set, std::size_t> by_full;
    for (std::size_t i = 0; i < prev.size(); ++i) by_full.emplace(prev[i].full_set(), i);
    UnionFind uf(prev.size());
    for (std::size_t i = 0; i < tree.size(); ++i) {
      const VineEdge e = make_edge(tree[i].a, tree[i].b, tree[i].D);
      const auto p1 = by_full.find(with(e.D, e.a));
      const auto p2 = by_full.find(with(e.D, e.b));
      if (p1 == by_full.end() || p2 == by_full.end())
        return violation(ViolationKind::MissingParent, level, i,
                         "edge " + edge_label(e) + " does not join two edges of tree " + std::to_string(t));
      if (contains(prev[p1->second].D, e.a) || contains(prev[p2->second].D, e.b))
        return violation(ViolationKind::Proximity, level, i,
                         "edge " + edge_label(e) + " joins edges of tree " + std::to_string(t) + " without a common node");
      if (!uf.unite(p1->second, p2->second))
        return violation(ViolationKind::NotATree, level, i, "edge " + edge_label(e) + " closes a cycle in tree " +
                                                                std::to_string(level));
    }
  }
  return std::nullopt;
}

std::variant<VineStructure, StructureViolation> structure_from_joins(std::size_t d, const std::vector<TreeJoins>& trees) {
  VineStructure s;
  s.d = d;
  std::vector<std::vector<VineEdge>> raw;
  for (std::size_t t = 0; t < trees.size(); ++t) {
    std::vector<VineEdge> edges;
    for (std::size_t i = 0; i < trees[t].size(); ++i) {
      const auto [x, y] = trees[t][i];
      if (t == 0) {
        if (x >= d || y >= d || x == y)
          return violation(ViolationKind::Shape, 1, i, "join of invalid variables");
        edges.push_back(make_edge(x, y));
        continue;
      }
      const auto& prev = raw[t - 1];
      if (x >= prev.size() || y >= prev.size() || x == y)
        return violation(ViolationKind::Shape, t + 1, i, "join of invalid edge indices");
      const auto joined = join_edges(prev[x], prev[y]);
      if (!joined)
        return violation(ViolationKind::Proximity, t + 1, i,
                         "edges " + edge_label(prev[x]) + " and " + edge_label(prev[y]) + " of tree " + std::to_string(t) +
                             " share no node");
      edges.push_back(*joined);
    }
    raw.push_back(std::move(edges));
  }
  s.trees = raw;
  if (auto v = validate_structure(s)) return *v;
  s.normalize();
  return s;
}

VineStructure dvine_structure(std::span<const std::size_t> order) {
  VineStructure s;
  s.d = order.size();
  for (std::size_t t = 0; t + 1 < s.d; ++t) {
    std::vector<VineEdge> tree;
    for (std::size_t i = 0; i + t + 1 < s.d; ++i)
      tree.push_back(make_edge(order[i], order[i + t + 1],
                               Set(order.begin() + static_cast<std::ptrdiff_t>(i + 1),
                                   order.begin() + static_cast<std::ptrdiff_t>(i + t + 1))));
    s.trees.push_back(std::move(tree));
  }
  s.normalize();
  return s;
}

VineStructure select_structure(const Eigen::MatrixXd& U, const BoostControl& control, const PairFitOptions& options) {
  const auto n = static_cast<std::size_t>(U.rows());
  const auto d = static_cast<std::size_t>(U.cols());
  if (n < 30) throw ConfigError("select_structure: at least 30 observations are required");
  if (d < 2) throw ConfigError("select_structure: dimension must be at least 2");
  VineStructure s;
  s.d = d;
  Store store;
  for (std::size_t v = 0; v < d; ++v) store[{v, {}}] = column(U, v);

  std::vector<WeightedJoin> candidates;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j)
      candidates.push_back({std::abs(kendall_tau(store.at({i, {}}), store.at({j, {}}))), i, j, make_edge(i, j)});
  std::vector<VineEdge> prev = max_spanning_tree(std::move(candidates), d);
  std::sort(prev.begin(), prev.end());
  s.trees.push_back(prev);

  const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(n), 1);
  PairFitOptions provisional = options;
  provisional.allowed = {0};
  provisional.threads = 1;
  for (std::size_t t = 1; t + 1 < d; ++t) {
    std::vector<FittedPairCopula> fits(prev.size());
    parallel_for(prev.size(), options.threads, [&](std::size_t i) {
      const auto& x = store.at({prev[i].a, prev[i].D});
      const auto& y = store.at({prev[i].b, prev[i].D});
      std::vector<UnitPair> pairs(n);
      for (std::size_t r = 0; r < n; ++r) pairs[r] = {x[r], y[r]};
      try {
        fits[i] = fit_pair(pairs, ones, control, provisional);
      } catch (...) {
        rethrow_with_edge(prev[i], t - 1);
      }
    });
    for (std::size_t i = 0; i < prev.size(); ++i)
      propagate(prev[i], fits[i].family, store.at({prev[i].a, prev[i].D}), store.at({prev[i].b, prev[i].D}),
                edge_tau(fits[i], ones), t - 1, store);

    candidates.clear();
    for (std::size_t i = 0; i < prev.size(); ++i) {
      for (std::size_t j = i + 1; j < prev.size(); ++j) {
        auto e = join_edges(prev[i], prev[j]);
        if (!e) continue;
        const double w = std::abs(kendall_tau(store.at({e->a, e->D}), store.at({e->b, e->D})));
        candidates.push_back({w, i, j, std::move(*e)});
      }
    }
    prev = max_spanning_tree(std::move(candidates), prev.size());
    std::sort(prev.begin(), prev.end());
    s.trees.push_back(prev);
  }
  if (auto v = validate_structure(s)) throw NumericError("select_structure produced an invalid vine: " + v->message);
  return s;
}

bool ConditionalVineModel::operator==(const ConditionalVineModel& other) const {
  if (!(structure == other.structure) || truncation_level != other.truncation_level ||
      covariate_names != other.covariate_names || pair_models.size() != other.pair_models.size())
    return false;
  for (std::size_t t = 0; t < pair_models.size(); ++t) {
    if (pair_models[t].size() != other.pair_models[t].size()) return false;
    for (std::size_t i = 0; i < pair_models[t].size(); ++i)
      if (!same_pair_model(pair_models[t][i], other.pair_models[t][i])) return false;
  }
  return true;
}

ConditionalVineModel fit_vine(const Eigen::MatrixXd& U, const Eigen::MatrixXd& Z, const VineStructure& structure,
                              const BoostControl& control, const VineFitOptions& options) {
  if (auto v = validate_structure(structure)) throw InterfaceError("invalid vine structure: " + v->message);
  control.validate();
  ConditionalVineModel model;
  model.structure = structure;
  model.structure.normalize();
  model.covariate_names =
      options.covariate_names.empty() ? default_names(static_cast<std::size_t>(Z.cols())) : options.covariate_names;
  if (model.covariate_names.size() != static_cast<std::size_t>(Z.cols()))
    throw InterfaceError("fit_vine: covariate name count differs from covariate columns");
  check_data(model, U, Z);
  if ((U.array() <= 0.0).any() || (U.array() >= 1.0).any())
    throw InterfaceError("fit_vine: copula data must lie strictly inside (0, 1)");
  const std::size_t d = structure.d;
  if (options.truncation_level && (*options.truncation_level < 1 || *options.truncation_level > d - 1))
    throw ConfigError("truncation level must lie in [1, d - 1]");
  model.truncation_level = options.truncation_level;

  const auto n = static_cast<std::size_t>(U.rows());
  const std::size_t fitted_trees = options.truncation_level.value_or(d - 1);
  Store store;
  for (std::size_t v = 0; v < d; ++v) store[{v, {}}] = column(U, v);
  PairFitOptions pair_options = options.pair;
  pair_options.threads = 1;

  model.pair_models.resize(d - 1);
  for (std::size_t t = 0; t + 1 < d; ++t) {
    const auto& edges = model.structure.trees[t];
    auto& fits = model.pair_models[t];
    if (t >= fitted_trees) {
      fits.assign(edges.size(), independence_model(model.n_cols()));
      continue;
    }
    fits.resize(edges.size());
    parallel_for(edges.size(), options.threads, [&](std::size_t i) {
      const auto& x = store.at({edges[i].a, edges[i].D});
      const auto& y = store.at({edges[i].b, edges[i].D});
      std::vector<UnitPair> pairs(n);
      for (std::size_t r = 0; r < n; ++r) pairs[r] = {x[r], y[r]};
      PairFitOptions edge_options = pair_options;
      if (const auto it = options.edge_families.find(edges[i]); it != options.edge_families.end())
        edge_options.families = it->second;
      try {
        fits[i] = fit_pair(pairs, Z, control, edge_options);
      } catch (...) {
        rethrow_with_edge(edges[i], t);
      }
    });
    if (t + 1 < fitted_trees) {
      for (std::size_t i = 0; i < edges.size(); ++i)
        propagate(edges[i], fits[i].family, store.at({edges[i].a, edges[i].D}), store.at({edges[i].b, edges[i].D}),
                  edge_tau(fits[i], Z), t, store);
    }
  }
  return model;
}

ConditionalVineModel truncate(const ConditionalVineModel& model, std::size_t level) {
  const std::size_t d = model.structure.d;
  if (level < 1 || level > d - 1) throw ConfigError("truncation level must lie in [1, d - 1]");
  ConditionalVineModel out = model;
  if (level == d - 1) return out;
  for (std::size_t t = level; t < out.pair_models.size(); ++t)
    for (auto& m : out.pair_models[t]) m = independence_model(out.n_cols());
  out.truncation_level = std::min(level, model.truncation_level.value_or(level));
  return out;
}

std::vector<std::vector<EdgeInputs>> edge_inputs(const ConditionalVineModel& model, const Eigen::MatrixXd& U,
                                                 const Eigen::MatrixXd& Z) {
  return forward(model, U, Z).inputs;
}

std::vector<std::vector<double>> edge_log_densities(const ConditionalVineModel& model, std::span<const double> u,
                                                    const Eigen::Ref<const Eigen::RowVectorXd>& z) {
  Eigen::MatrixXd U(1, static_cast<Eigen::Index>(u.size()));
  for (std::size_t j = 0; j < u.size(); ++j) U(0, static_cast<Eigen::Index>(j)) = u[j];
  const Eigen::MatrixXd Z = z;
  const Forward f = forward(model, U, Z);
  std::vector<std::vector<double>> out(f.inputs.size());
  for (std::size_t t = 0; t < f.inputs.size(); ++t)
    for (std::size_t i = 0; i < f.inputs[t].size(); ++i)
      out[t].push_back(condvine::log_density(model.pair_models[t][i].family, f.inputs[t][i].first[0],
                                             f.inputs[t][i].second[0], f.tau[t][i][0]));
  return out;
}

double log_density(const ConditionalVineModel& model, std::span<const double> u,
                   const Eigen::Ref<const Eigen::RowVectorXd>& z) {
  double sum = 0.0;
  for (const auto& tree : edge_log_densities(model, u, z))
    for (double v : tree) sum += v;
  return sum;
}

std::vector<double> log_density(const ConditionalVineModel& model, const Eigen::MatrixXd& U, const Eigen::MatrixXd& Z) {
  const Forward f = forward(model, U, Z);
  std::vector<double> out(static_cast<std::size_t>(U.rows()), 0.0);
  for (std::size_t t = 0; t < f.inputs.size(); ++t) {
    for (std::size_t i = 0; i < f.inputs[t].size(); ++i) {
      const Family fam = model.pair_models[t][i].family;
      if (fam == Family::Independence) continue;
      const auto& in = f.inputs[t][i];
      for (std::size_t r = 0; r < out.size(); ++r)
        out[r] += condvine::log_density(fam, in.first[r], in.second[r], f.tau[t][i][r]);
    }
  }
  return out;
}

std::vector<std::size_t> sampling_order(const VineStructure& structure) { return peel(structure).order; }

Eigen::MatrixXd rosenblatt(const ConditionalVineModel& model, const Eigen::MatrixXd& U, const Eigen::MatrixXd& Z) {
  const Forward f = forward(model, U, Z);
  const auto order = sampling_order(model.structure);
  Eigen::MatrixXd W(U.rows(), U.cols());
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto& w = f.store.at({order[k], other_variables(order, k)});
    for (std::size_t r = 0; r < w.size(); ++r) W(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = w[r];
  }
  return W;
}

Eigen::MatrixXd inverse_rosenblatt(const ConditionalVineModel& model, const Eigen::MatrixXd& W, const Eigen::MatrixXd& Z) {
  check_data(model, W, Z);
  const auto& s = model.structure;
  const auto n = static_cast<std::size_t>(W.rows());
  const PeelResult p = peel(s);
  Store store;

  for (std::size_t k = 0; k < s.d; ++k) {
    const std::size_t v = p.order[k];
    std::vector<double> current = column(W, k);
    store[{v, other_variables(p.order, k)}] = current;
    // Invert down the chain from the highest tree to the first.
    for (std::size_t c = p.chain[k].size(); c-- > 0;) {
      const auto [t, idx] = p.chain[k][c];
      const VineEdge& e = s.trees[t][idx];
      const FittedPairCopula& m = model.pair_models[t][idx];
      const bool v_is_a = e.a == v;
      const std::size_t x = v_is_a ? e.b : e.a;
      const auto& cond = store.at({x, e.D});
      const auto tau = edge_tau(m, Z);
      try {
        for (std::size_t r = 0; r < n; ++r)
          current[r] = clamp_unit(hinv(m.family, v_is_a ? Conditioning::FirstGivenSecond : Conditioning::SecondGivenFirst,
                                       current[r], cond[r], tau[r]));
      } catch (...) {
        rethrow_with_edge(e, t);
      }
      store[{v, e.D}] = current;
    }
    // Forward pass over the chain supplies the other-side outputs later variables need.
    for (const auto& [t, idx] : p.chain[k]) {
      const VineEdge& e = s.trees[t][idx];
      const FittedPairCopula& m = model.pair_models[t][idx];
      const bool v_is_a = e.a == v;
      const std::size_t x = v_is_a ? e.b : e.a;
      const auto& xv = store.at({x, e.D});
      const auto& vv = store.at({v, e.D});
      const auto tau = edge_tau(m, Z);
      std::vector<double> out(n);
      try {
        for (std::size_t r = 0; r < n; ++r)
          out[r] = v_is_a ? clamp_unit(hfunc(m.family, Conditioning::SecondGivenFirst, vv[r], xv[r], tau[r]))
                          : clamp_unit(hfunc(m.family, Conditioning::FirstGivenSecond, xv[r], vv[r], tau[r]));
      } catch (...) {
        rethrow_with_edge(e, t);
      }
      store[{x, with(e.D, v)}] = std::move(out);
    }
  }

  Eigen::MatrixXd U(W.rows(), W.cols());
  for (std::size_t v = 0; v < s.d; ++v) {
    const auto& u = store.at({v, {}});
    for (std::size_t r = 0; r < n; ++r) U(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(v)) = u[r];
  }
  return U;
}

Eigen::MatrixXd sample_vine(const ConditionalVineModel& model, const Eigen::MatrixXd& Z, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd W(Z.rows(), static_cast<Eigen::Index>(model.structure.d));
  for (Eigen::Index r = 0; r < W.rows(); ++r)
    for (Eigen::Index k = 0; k < W.cols(); ++k) W(r, k) = rng.uniform();
  return inverse_rosenblatt(model, W, Z);
}

ConditionalVineModel make_vine_model(const VineStructure& structure, const std::vector<std::vector<Family>>& families,
                                     const std::vector<std::vector<Eigen::VectorXd>>& betas,
                                     std::vector<std::string> covariate_names) {
  if (auto v = validate_structure(structure)) throw InterfaceError("invalid vine structure: " + v->message);
  // Edges are matched to families/betas in the caller's order, then sorted together.
  if (families.size() != structure.trees.size() || betas.size() != structure.trees.size())
    throw InterfaceError("make_vine_model: need one family and coefficient list per tree");
  std::size_t n_cols = 0;
  if (!betas.empty() && !betas[0].empty()) n_cols = static_cast<std::size_t>(betas[0][0].size());
  ConditionalVineModel model;
  model.structure.d = structure.d;
  model.covariate_names = covariate_names.empty() ? default_names(n_cols) : std::move(covariate_names);
  model.structure.trees.resize(structure.trees.size());
  model.pair_models.resize(structure.trees.size());
  for (std::size_t t = 0; t < structure.trees.size(); ++t) {
    if (families[t].size() != structure.trees[t].size() || betas[t].size() != structure.trees[t].size())
      throw InterfaceError("make_vine_model: tree " + std::to_string(t + 1) + " size mismatch");
    std::vector<std::pair<VineEdge, FittedPairCopula>> rows;
    for (std::size_t i = 0; i < structure.trees[t].size(); ++i) {
      const auto& e = structure.trees[t][i];
      if (static_cast<std::size_t>(betas[t][i].size()) != model.n_cols())
        throw InterfaceError("make_vine_model: coefficient length mismatch");
      FittedPairCopula m = independence_model(model.n_cols());
      m.family = families[t][i];
      m.beta = betas[t][i];
      for (Eigen::Index j = 0; j < m.beta.size(); ++j)
        if (m.beta(j) != 0.0) m.kept.push_back(static_cast<std::size_t>(j));
      rows.emplace_back(make_edge(e.a, e.b, e.D), std::move(m));
    }
    std::sort(rows.begin(), rows.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
    for (auto& [e, m] : rows) {
      model.structure.trees[t].push_back(e);
      model.pair_models[t].push_back(std::move(m));
    }
  }
  return model;
}

}  // namespace condvine
