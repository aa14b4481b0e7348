#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace condvine {

/// Ensembles are m x d matrices, one member per row.

/// Energy score with the exact pairwise spread term
/// (1/m) sum_k |x_k - y| - 1/(2 m^2) sum_k sum_j |x_k - x_j|.
double energy_score(const Eigen::MatrixXd& members, const Eigen::VectorXd& obs);

/// Energy score with the spread term estimated from consecutive members,
/// 1/(2 (m - 1)) sum_k |x_k - x_{k+1}|. Linear in m; meant for large
/// samples drawn independently from a model.
double energy_score_consecutive(const Eigen::MatrixXd& members, const Eigen::VectorXd& obs);

/// Variogram score sum_i sum_j w_ij (|y_i - y_j|^p - (1/m) sum_k |x_ki - x_kj|^p)^2.
/// An empty `weights` matrix means all weights are one.
double variogram_score(const Eigen::MatrixXd& members, const Eigen::VectorXd& obs, double order = 0.5,
                       const Eigen::MatrixXd& weights = {});

struct DmResult {
  double statistic = 0.0;   ///< NaN when degenerate
  double p_value = 1.0;     ///< two-sided, normal reference
  double mean_difference = 0.0;
  std::size_t lag = 0;
  bool degenerate = false;  ///< the HAC variance of the differential is zero
};

/// Truncation lag floor(4 (T/100)^(2/9)).
std::size_t dm_lag(std::size_t T);

/// Diebold-Mariano test of equal mean score on the differential a_t - b_t,
/// with a Bartlett-kernel HAC variance. Requires T >= 10.
DmResult dm_test(std::span<const double> scores_a, std::span<const double> scores_b);

/// Per column, reorders the sorted `samples` column by the ranks of `raw`;
/// ties in `raw` are broken at random with the given seed.
Eigen::MatrixXd ecc_reorder(const Eigen::MatrixXd& samples, const Eigen::MatrixXd& raw, std::uint64_t seed);

struct GcaFit {
  Eigen::MatrixXd correlation;  ///< empirical correlation of the latent scores
  Eigen::MatrixXd sampling;     ///< correlation used for sampling, after repair
  bool repaired = false;        ///< the empirical matrix was not positive definite
};

/// Eigenvalues below `floor` are raised to it and the diagonal rescaled to one.
/// Returns whether any eigenvalue was clipped.
bool repair_correlation(Eigen::MatrixXd& corr, double floor = 1e-8);

GcaFit gca_fit(const Eigen::MatrixXd& latent);

/// m draws of Phi(X), X ~ N(0, corr). A matrix that is not positive definite
/// is repaired first.
Eigen::MatrixXd gca_sample(const Eigen::MatrixXd& corr, std::size_t m, std::uint64_t seed);

/// Multivariate rank of `obs` among the members (1..m+1), from componentwise
/// pre-ranks with ties broken at random.
std::size_t mv_rank(const Eigen::MatrixXd& members, const Eigen::VectorXd& obs, std::uint64_t seed);

/// Counts of ranks 1..m+1 over the cases. Case i uses the seed
/// derive_seed(seed, i), so the result does not depend on evaluation order.
std::vector<std::size_t> mv_rank_histogram(const std::vector<Eigen::MatrixXd>& forecasts,
                                           const std::vector<Eigen::VectorXd>& obs, std::uint64_t seed);

/// Sum over ranks of |relative frequency - 1/(m+1)|.
double reliability_index(std::span<const std::size_t> histogram);

}  // namespace condvine
