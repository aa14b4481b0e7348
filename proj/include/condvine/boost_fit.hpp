#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "condvine/copula.hpp"

namespace condvine {

enum class Stopping { AIC, CV };

struct BoostControl {
  std::size_t m_stop = 500;
  double nu = 0.1;
  double gamma = 0.01;
  Stopping stopping = Stopping::AIC;
  std::size_t cv_folds = 10;
  std::uint64_t seed = 1;
  /// Never deselect the intercept column.
  bool exempt_intercept = true;
  /// Sum attributable risk over iterations 1..m_opt instead of 1..m_stop,
  /// and compare against the reduction at m_opt.
  bool attribute_to_m_opt = false;

  /// Throws ConfigError on out-of-range fields.
  void validate() const;
};

/// Record of one componentwise boosting run.
///
/// Columns are standardized internally. Non-constant columns are scaled to
/// unit root mean square and, when the design has a nonzero constant column
/// (the intercept), centered; the intercept then absorbs the centering when
/// coefficients are mapped back to the original scale. All-zero columns are
/// never selectable.
struct BoostPath {
  std::size_t n_obs = 0;
  std::size_t n_cols = 0;                ///< columns of the original design
  std::vector<std::size_t> candidates;   ///< selectable column indices
  std::vector<std::size_t> degenerate;   ///< requested columns that are all zero
  std::vector<double> center;            ///< per original column
  std::vector<double> scale;             ///< per original column
  std::ptrdiff_t intercept = -1;         ///< absorbing constant column, or -1
  std::vector<std::size_t> selected;     ///< j* of iterations 1..M
  std::vector<double> step;              ///< nu * slope of iterations 1..M, standardized scale
  std::vector<double> risk;              ///< r^[0..M], mean negative log-likelihood
  std::vector<std::size_t> active_set_size;  ///< nonzero original-scale coefficients, m = 0..M

  std::size_t iterations() const { return selected.size(); }
  /// Original-scale coefficients after m iterations.
  Eigen::VectorXd coefficients(std::size_t m) const;
};

/// Componentwise boosting of `family` on `pairs` with design `Z` (one row per
/// pair). `columns` restricts the candidate base learners; empty means all.
BoostPath boost(std::span<const UnitPair> pairs, const Eigen::MatrixXd& Z, Family family,
                const BoostControl& control, std::span<const std::size_t> columns = {});

/// AIC(m) = 2 N r^[m] + 2 df(m) for m = 0..M.
std::vector<double> aic_path(const BoostPath& path);
/// argmin of aic_path, smallest m on ties.
std::size_t stop_aic(const BoostPath& path);

/// Held-out risk path summed over folds, given an explicit fold index per row.
std::vector<double> cv_risk_path(std::span<const UnitPair> pairs, const Eigen::MatrixXd& Z,
                                 Family family, const BoostControl& control,
                                 std::span<const std::size_t> fold_of_row,
                                 std::span<const std::size_t> columns = {}, unsigned threads = 1);
/// Seeded fold assignment: a random permutation dealt round-robin into K folds.
std::vector<std::size_t> cv_folds(std::size_t n_obs, std::size_t k, std::uint64_t seed);
/// m_opt by K-fold cross-validation with the seeded assignment.
std::size_t stop_cv(std::span<const UnitPair> pairs, const Eigen::MatrixXd& Z, Family family,
                    const BoostControl& control, std::span<const std::size_t> columns = {},
                    unsigned threads = 1);

/// R_j per original column, summed over iterations 1..upto.
std::vector<double> attributable_risk(const BoostPath& path, std::size_t upto);
/// Columns kept by the attributable-risk rule, ascending.
std::vector<std::size_t> deselect(const BoostPath& path, std::size_t m_opt,
                                  const BoostControl& control);

enum class FamilySelection { AIC, LogLik, PredictiveRisk };

struct PairFitOptions {
  std::vector<Family> families{kCandidateFamilies.begin(), kCandidateFamilies.end()};
  FamilySelection selection = FamilySelection::AIC;
  double holdout_fraction = 0.25;
  /// Drop covariates by attributable risk and refit.
  bool deselection = true;
  /// Restrict base learners to these columns; empty means all.
  std::vector<std::size_t> allowed;
  unsigned threads = 1;
};

struct CandidateSummary {
  Family family = Family::Gaussian;
  bool ok = false;
  double aic = 0.0;
  double loglik = 0.0;
  double holdout_risk = 0.0;  ///< only for predictive-risk selection
  std::string error;
};

struct FittedPairCopula {
  Family family = Family::Independence;
  Eigen::VectorXd beta;               ///< original scale, one per design column
  std::size_t m_opt = 0;
  double aic = 0.0;
  double loglik = 0.0;
  std::size_t n_obs = 0;
  std::vector<std::size_t> kept;      ///< ascending column indices
  std::vector<double> risk_path;      ///< risk path of the final (re)fit
  std::vector<CandidateSummary> candidates;

  /// Number of nonzero coefficients.
  std::size_t active_set_size() const;
};

/// Boost, stop, deselect and refit for a single family.
FittedPairCopula fit_pair_family(std::span<const UnitPair> pairs, const Eigen::MatrixXd& Z,
                                 Family family, const BoostControl& control,
                                 const PairFitOptions& options = {});

/// fit_pair_family for every candidate family, then family selection.
/// Throws FitError if every candidate fails.
FittedPairCopula fit_pair(std::span<const UnitPair> pairs, const Eigen::MatrixXd& Z,
                          const BoostControl& control, const PairFitOptions& options = {});

/// A model with zero coefficients for every one of `n_cols` columns.
FittedPairCopula independence_model(std::size_t n_cols);

double predict_eta(const FittedPairCopula& model, const Eigen::Ref<const Eigen::RowVectorXd>& z);
/// link_tau(beta . z_i) per row. Throws InterfaceError on a width mismatch.
std::vector<double> predict_tau(const FittedPairCopula& model, const Eigen::MatrixXd& Z);
/// Mean negative log-likelihood of the model on the given data.
double mean_risk(const FittedPairCopula& model, std::span<const UnitPair> pairs,
                 const Eigen::MatrixXd& Z);

}  // namespace condvine
