#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "condvine/boost_fit.hpp"
#include "condvine/copula.hpp"
#include "condvine/vine.hpp"

namespace condvine {

enum class ScenarioKind { Bicop, Vine };
enum class FitMode { Selected, Specified };

/// Simulation study setup. Repetition r uses seed derive_seed(seed, r); within
/// a repetition the covariates, the true families and the copula data use the
/// sub-seeds derive_seed(rep_seed, 0), (.., 1) and (.., 2), and cross-validation
/// folds use (.., 3). A single repetition can therefore be re-run in isolation.
struct ScenarioConfig {
  ScenarioKind kind = ScenarioKind::Bicop;
  std::size_t N = 1000;
  /// Design columns including the intercept z_0.
  std::size_t p = 101;
  double rho = 0.2;
  std::size_t n_reps = 20;
  /// True family; nullopt draws one uniformly from the five candidates
  /// (per repetition, and per edge for vines).
  std::optional<Family> family = Family::Gaussian;
  FitMode mode = FitMode::Selected;
  BoostControl control;
  std::uint64_t seed = 1;
  /// Coefficients of the true predictor; columns beyond its length are zero.
  std::vector<double> true_beta{0.1, -0.2, 0.3, 0.2, 0.5, -0.4};
  /// Count the intercept as an informative covariate in TP/FP.
  bool count_intercept = true;
  FamilySelection selection = FamilySelection::AIC;
  unsigned threads = 1;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// One fitted pair copula of one repetition.
struct FitRecord {
  std::size_t rep = 0;
  std::size_t tree = 1;      ///< 1-based; always 1 for bivariate scenarios
  std::string edge;          ///< edge_label of the pair
  Family true_family = Family::Gaussian;
  Family family = Family::Gaussian;
  Eigen::VectorXd beta;
  std::size_t m_opt = 0;
  std::vector<std::size_t> kept;
  std::size_t tp = 0;
  std::size_t fp = 0;
  bool exact = false;        ///< kept set equals the informative set
  double mae = 0.0;          ///< mean |tau_true - tau_hat| over the sample
};

struct RepFailure {
  std::size_t rep = 0;
  std::string message;
};

struct ScenarioReport {
  ScenarioConfig config;
  std::vector<FitRecord> records;   ///< ordered by (rep, tree, edge)
  std::vector<RepFailure> failures;
};

/// Order statistics of the records of one tree.
struct TreeSummary {
  std::size_t tree = 1;
  std::size_t n_records = 0;
  std::vector<double> median_beta;   ///< per design column
  double bias = 0.0;                 ///< mean |median beta_j - beta_j| over the entries of true_beta
  double median_mae = 0.0;
  double exact_rate = 0.0;
  double family_recovery = 0.0;
  double median_kept = 0.0;
  std::size_t max_kept = 0;
};

/// N x p design: column 0 is one, the rest are N(0, Sigma) with
/// Sigma_ij = rho^|i - j|, drawn with the AR(1) recursion.
Eigen::MatrixXd gen_covariates(std::size_t N, std::size_t p, double rho, std::uint64_t seed);

/// Z * beta with beta zero-padded to the width of Z.
Eigen::VectorXd true_eta(const Eigen::MatrixXd& Z, const std::vector<double>& beta = {0.1, -0.2, 0.3, 0.2, 0.5, -0.4});

/// Mean absolute difference of link_tau(eta_true) and link_tau(eta_hat).
double mae_tau(const Eigen::VectorXd& eta_true, const Eigen::VectorXd& eta_hat);

/// Informative column set: nonzero entries of `beta`, with column 0 forced in
/// or out according to `count_intercept`.
std::vector<std::size_t> informative_columns(const std::vector<double>& beta, bool count_intercept);

/// The five-dimensional regular vine used by the vine scenario.
VineStructure five_dim_structure();

ScenarioReport run_bicop_scenario(const ScenarioConfig& config);
ScenarioReport run_vine_scenario(const ScenarioConfig& config);
/// Dispatches on config.kind.
ScenarioReport run_scenario(const ScenarioConfig& config);

std::vector<TreeSummary> summarize(const ScenarioReport& report);

/// The full bivariate grid: N in {1000, 2000}, p in {101, 501, 2001, 4001},
/// rho in {0.2, 0.8}, 100 repetitions.
std::vector<ScenarioConfig> full_bicop_grid(const ScenarioConfig& base);

std::string config_to_json(const ScenarioConfig& config);
/// Missing fields keep their defaults; unknown or mistyped fields raise
/// ConfigError.
ScenarioConfig config_from_json(const std::string& text);

/// Writes coefficients.csv, metrics.csv, summary.csv, failures.csv and
/// config.json into `dir`. Returns the written paths.
std::vector<std::filesystem::path> write_report(const ScenarioReport& report, const std::filesystem::path& dir);

}  // namespace condvine
