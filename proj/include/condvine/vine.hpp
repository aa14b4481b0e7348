#pragma once

#include <compare>
#include <map>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "condvine/boost_fit.hpp"

namespace condvine {

/// Pair copula (a, b; D): joins the conditioned variables a < b given the
/// conditioning set D (sorted). Variables are labelled 0..d-1.
struct VineEdge {
  std::size_t a = 0;
  std::size_t b = 0;
  std::vector<std::size_t> D;

  auto operator<=>(const VineEdge&) const = default;
  /// {a, b} union D, sorted.
  std::vector<std::size_t> full_set() const;
};

/// Builds a normalized edge (swaps a and b if needed, sorts D).
VineEdge make_edge(std::size_t a, std::size_t b, std::vector<std::size_t> D = {});

/// "a,b;D" with 0-based labels, e.g. "1,4;0,3".
std::string edge_label(const VineEdge& edge);

/// Regular vine: trees[t] holds the d - 1 - t edges of tree t + 1.
struct VineStructure {
  std::size_t d = 0;
  std::vector<std::vector<VineEdge>> trees;

  /// Normalizes every edge and sorts each tree by (a, b, D).
  void normalize();
  bool operator==(const VineStructure&) const = default;
};

enum class ViolationKind { Shape, FirstTree, MissingParent, Proximity, NotATree };

struct StructureViolation {
  ViolationKind kind = ViolationKind::Shape;
  std::size_t tree = 0;  ///< 1-based tree level
  std::size_t edge = 0;  ///< index within the tree
  std::string message;
};

/// Checks tree sizes, spanning-tree property of every level and the
/// proximity condition. Returns the first violation found, never throws.
std::optional<StructureViolation> validate_structure(const VineStructure& structure);

/// A tree given as a list of joins. In the first tree the joined nodes are
/// variables; in tree t > 1 they are indices into tree t - 1's join list.
using TreeJoins = std::vector<std::pair<std::size_t, std::size_t>>;

/// Builds the (a, b; D) form of a vine given as graphs. Joins of two edges
/// without a common node are reported as proximity violations.
std::variant<VineStructure, StructureViolation> structure_from_joins(std::size_t d,
                                                                     const std::vector<TreeJoins>& trees);

/// D-vine following the given variable order.
VineStructure dvine_structure(std::span<const std::size_t> order);

/// Sequential maximum spanning trees on |empirical Kendall tau|. Weights of
/// tree t > 1 use pseudo-observations from intercept-only fits of tree t - 1;
/// covariates are ignored. Requires N >= 30.
VineStructure select_structure(const Eigen::MatrixXd& U, const BoostControl& control = {},
                               const PairFitOptions& options = {});

struct ConditionalVineModel {
  VineStructure structure;
  /// Parallel to structure.trees.
  std::vector<std::vector<FittedPairCopula>> pair_models;
  std::optional<std::size_t> truncation_level;
  std::vector<std::string> covariate_names;

  std::size_t n_cols() const { return covariate_names.size(); }
  bool operator==(const ConditionalVineModel& other) const;
};

struct VineFitOptions {
  PairFitOptions pair;
  /// Candidate families for individual edges, overriding pair.families.
  std::map<VineEdge, std::vector<Family>> edge_families;
  std::optional<std::size_t> truncation_level;
  std::vector<std::string> covariate_names;  ///< defaults to z0, z1, ...
  unsigned threads = 1;
};

/// Sequential top-down estimation. U is N x d copula data, Z is N x (p + 1).
ConditionalVineModel fit_vine(const Eigen::MatrixXd& U, const Eigen::MatrixXd& Z, const VineStructure& structure,
                              const BoostControl& control, const VineFitOptions& options = {});

/// Replaces every edge above `level` by the independence model.
ConditionalVineModel truncate(const ConditionalVineModel& model, std::size_t level);

/// Arguments (u_{a|D}, u_{b|D}) of one edge for every observation.
struct EdgeInputs {
  std::vector<double> first;
  std::vector<double> second;
};

/// Pseudo-observations entering each edge, parallel to structure.trees.
std::vector<std::vector<EdgeInputs>> edge_inputs(const ConditionalVineModel& model, const Eigen::MatrixXd& U,
                                                 const Eigen::MatrixXd& Z);

/// Per-edge log pair-copula terms of one observation, parallel to trees.
std::vector<std::vector<double>> edge_log_densities(const ConditionalVineModel& model, std::span<const double> u,
                                                    const Eigen::Ref<const Eigen::RowVectorXd>& z);

double log_density(const ConditionalVineModel& model, std::span<const double> u,
                   const Eigen::Ref<const Eigen::RowVectorXd>& z);
/// Row-wise log densities.
std::vector<double> log_density(const ConditionalVineModel& model, const Eigen::MatrixXd& U, const Eigen::MatrixXd& Z);

/// Variable order of inverse-Rosenblatt sampling.
std::vector<std::size_t> sampling_order(const VineStructure& structure);

/// Inverse Rosenblatt transform of the independent uniforms W (N x d,
/// column k feeds the k-th variable of sampling_order).
Eigen::MatrixXd inverse_rosenblatt(const ConditionalVineModel& model, const Eigen::MatrixXd& W,
                                   const Eigen::MatrixXd& Z);
/// Rosenblatt transform, the inverse of inverse_rosenblatt.
Eigen::MatrixXd rosenblatt(const ConditionalVineModel& model, const Eigen::MatrixXd& U, const Eigen::MatrixXd& Z);

/// One draw per row of Z.
Eigen::MatrixXd sample_vine(const ConditionalVineModel& model, const Eigen::MatrixXd& Z, std::uint64_t seed);

/// Model with the given structure, families and coefficients, e.g. a
/// simulation truth. `families` and `betas` are parallel to the trees.
ConditionalVineModel make_vine_model(const VineStructure& structure, const std::vector<std::vector<Family>>& families,
                                     const std::vector<std::vector<Eigen::VectorXd>>& betas,
                                     std::vector<std::string> covariate_names = {});

// Serialization (JSON document with a schema_version field).
inline constexpr int kModelSchemaVersion = 1;
std::string to_json(const ConditionalVineModel& model);
ConditionalVineModel model_from_json(const std::string& text);
std::string structure_to_json(const VineStructure& structure);
VineStructure structure_from_json(const std::string& text);

}  // namespace condvine
