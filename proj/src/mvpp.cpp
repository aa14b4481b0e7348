#include "condvine/mvpp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "condvine/error.hpp"
#include "condvine/random.hpp"
#include "condvine/stats.hpp"

namespace condvine {

namespace {

void check_ensemble(const Eigen::MatrixXd& members, const Eigen::VectorXd& obs, const char* who) {
  if (members.rows() < 1) throw InterfaceError(std::string(who) + ": empty ensemble");
  if (members.cols() != obs.size())
    throw InterfaceError(std::string(who) + ": ensemble has " + std::to_string(members.cols()) +
                         " dimensions, observation has " + std::to_string(obs.size()));
}

double mean_distance_to(const Eigen::MatrixXd& members, const Eigen::VectorXd& obs) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < members.rows(); ++k) s += (members.row(k).transpose() - obs).norm();
  return s / static_cast<double>(members.rows());
}

// Ranks 0..n-1 of `values`, ties ordered by a random key.
std::vector<std::size_t> random_tie_ranks(std::span<const double> values, Rng& rng) {
  const std::size_t n = values.size();
  std::vector<std::uint64_t> key(n);
  for (auto& k : key) k = rng.next();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (values[a] != values[b]) return values[a] < values[b];
    return key[a] != key[b] ? key[a] < key[b] : a < b;
  });
  std::vector<std::size_t> rank(n);
  for (std::size_t r = 0; r < n; ++r) rank[order[r]] = r;
  return rank;
}

}  // namespace

double energy_score(const Eigen::MatrixXd& members, const Eigen::VectorXd& obs) {
  check_ensemble(members, obs, "energy_score");
  const Eigen::Index m = members.rows();
  double spread = 0.0;
  for (Eigen::Index k = 0; k < m; ++k)
    for (Eigen::Index j = k + 1; j < m; ++j) spread += (members.row(k) - members.row(j)).norm();
  const double md = static_cast<double>(m);
  return mean_distance_to(members, obs) - spread / (md * md);
}

double energy_score_consecutive(const Eigen::MatrixXd& members, const Eigen::VectorXd& obs) {
  check_ensemble(members, obs, "energy_score_consecutive");
  const Eigen::Index m = members.rows();
  double spread = 0.0;
  for (Eigen::Index k = 0; k + 1 < m; ++k) spread += (members.row(k) - members.row(k + 1)).norm();
  const double s = m > 1 ? spread / (2.0 * static_cast<double>(m - 1)) : 0.0;
  return mean_distance_to(members, obs) - s;
}

double variogram_score(const Eigen::MatrixXd& members, const Eigen::VectorXd& obs, double order,
                       const Eigen::MatrixXd& weights) {
  check_ensemble(members, obs, "variogram_score");
  if (!(order > 0.0)) throw DomainError("variogram_score: order must be positive");
  const Eigen::Index d = obs.size();
  const bool weighted = weights.size() != 0;
  if (weighted) {
    if (weights.rows() != d || weights.cols() != d) throw InterfaceError("variogram_score: weights must be d x d");
    if ((weights.array() < 0.0).any() || !weights.allFinite())
      throw InterfaceError("variogram_score: weights must be finite and nonnegative");
  }
  const double m = static_cast<double>(members.rows());
  double score = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      if (i == j) continue;
      double vf = 0.0;
      for (Eigen::Index k = 0; k < members.rows(); ++k)
        vf += std::pow(std::abs(members(k, i) - members(k, j)), order);
      const double diff = std::pow(std::abs(obs(i) - obs(j)), order) - vf / m;
      score += (weighted ? weights(i, j) : 1.0) * diff * diff;
    }
  }
  return score;
}

std::size_t dm_lag(std::size_t T) {
  return static_cast<std::size_t>(std::floor(4.0 * std::pow(static_cast<double>(T) / 100.0, 2.0 / 9.0)));
}

DmResult dm_test(std::span<const double> scores_a, std::span<const double> scores_b) {
  if (scores_a.size() != scores_b.size()) throw InterfaceError("dm_test: score series differ in length");
  const std::size_t T = scores_a.size();
  if (T < 10) throw InterfaceError("dm_test: need at least 10 time points");
  std::vector<double> d(T);
  for (std::size_t t = 0; t < T; ++t) d[t] = scores_a[t] - scores_b[t];
  for (double x : d)
    if (!std::isfinite(x)) throw InterfaceError("dm_test: non-finite score");

  DmResult out;
  out.lag = std::min(dm_lag(T), T - 1);
  out.mean_difference = mean(d);
  auto autocov = [&](std::size_t k) {
    double s = 0.0;
    for (std::size_t t = k; t < T; ++t) s += (d[t] - out.mean_difference) * (d[t - k] - out.mean_difference);
    return s / static_cast<double>(T);
  };
  double var = autocov(0);
  for (std::size_t k = 1; k <= out.lag; ++k)
    var += 2.0 * (1.0 - static_cast<double>(k) / static_cast<double>(out.lag + 1)) * autocov(k);
  if (!(var > 0.0)) {
    out.degenerate = true;
    out.statistic = std::numeric_limits<double>::quiet_NaN();
    out.p_value = 1.0;
    return out;
  }
  out.statistic = out.mean_difference / std::sqrt(var / static_cast<double>(T));
  out.p_value = std::clamp(2.0 * normal_cdf(-std::abs(out.statistic)), 0.0, 1.0);
  return out;
}

Eigen::MatrixXd ecc_reorder(const Eigen::MatrixXd& samples, const Eigen::MatrixXd& raw, std::uint64_t seed) {
  if (samples.rows() != raw.rows() || samples.cols() != raw.cols())
    throw InterfaceError("ecc_reorder: samples and raw ensemble differ in shape");
  Rng rng(seed);
  Eigen::MatrixXd out(samples.rows(), samples.cols());
  for (Eigen::Index j = 0; j < samples.cols(); ++j) {
    std::vector<double> sorted(samples.col(j).data(), samples.col(j).data() + samples.rows());
    std::sort(sorted.begin(), sorted.end());
    const Eigen::VectorXd col = raw.col(j);
    const auto rank = random_tie_ranks({col.data(), static_cast<std::size_t>(col.size())}, rng);
    for (Eigen::Index k = 0; k < samples.rows(); ++k) out(k, j) = sorted[rank[static_cast<std::size_t>(k)]];
  }
  return out;
}

bool repair_correlation(Eigen::MatrixXd& corr, double floor) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(corr);
  if (es.info() != Eigen::Success) throw NumericError("repair_correlation: eigen decomposition failed");
  Eigen::VectorXd lambda = es.eigenvalues();
  if (lambda.minCoeff() >= floor) return false;
  lambda = lambda.cwiseMax(floor);
  Eigen::MatrixXd r = es.eigenvectors() * lambda.asDiagonal() * es.eigenvectors().transpose();
  const Eigen::VectorXd s = r.diagonal().cwiseSqrt().cwiseInverse();
  corr = s.asDiagonal() * r * s.asDiagonal();
  corr.diagonal().setOnes();
  return true;
}

GcaFit gca_fit(const Eigen::MatrixXd& latent) {
  if (latent.rows() < 2 || latent.cols() < 1) throw InterfaceError("gca_fit: need at least two rows");
  if (!latent.allFinite()) throw InterfaceError("gca_fit: non-finite latent score");
  const Eigen::MatrixXd centered = latent.rowwise() - latent.colwise().mean();
  const Eigen::MatrixXd cov = centered.transpose() * centered;
  const Eigen::VectorXd sd = cov.diagonal().cwiseSqrt();
  if ((sd.array() == 0.0).any()) throw InterfaceError("gca_fit: constant latent column");
  GcaFit fit;
  fit.correlation = sd.cwiseInverse().asDiagonal() * cov * sd.cwiseInverse().asDiagonal();
  fit.correlation.diagonal().setOnes();
  fit.sampling = fit.correlation;
  fit.repaired = repair_correlation(fit.sampling);
  return fit;
}

Eigen::MatrixXd gca_sample(const Eigen::MatrixXd& corr, std::size_t m, std::uint64_t seed) {
  if (corr.rows() != corr.cols() || corr.rows() == 0) throw InterfaceError("gca_sample: correlation must be square");
  Eigen::MatrixXd c = corr;
  repair_correlation(c);
  const Eigen::LLT<Eigen::MatrixXd> llt(c);
  if (llt.info() != Eigen::Success) throw NumericError("gca_sample: Cholesky factorization failed");
  const Eigen::MatrixXd L = llt.matrixL();
  Rng rng(seed);
  const Eigen::Index d = c.rows();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(m), d);
  Eigen::VectorXd e(d);
  for (Eigen::Index k = 0; k < out.rows(); ++k) {
    for (Eigen::Index j = 0; j < d; ++j) e(j) = rng.normal();
    const Eigen::VectorXd x = L * e;
    for (Eigen::Index j = 0; j < d; ++j) out(k, j) = normal_cdf(x(j));
  }
  return out;
}

std::size_t mv_rank(const Eigen::MatrixXd& members, const Eigen::VectorXd& obs, std::uint64_t seed) {
  check_ensemble(members, obs, "mv_rank");
  const Eigen::Index m = members.rows();
  // Row 0 is the observation, rows 1..m the members.
  Eigen::MatrixXd P(m + 1, members.cols());
  P.row(0) = obs.transpose();
  P.bottomRows(m) = members;
  std::vector<std::size_t> pre(static_cast<std::size_t>(m + 1), 0);
  for (Eigen::Index i = 0; i <= m; ++i)
    for (Eigen::Index k = 0; k <= m; ++k)
      if ((P.row(k).array() <= P.row(i).array()).all()) ++pre[static_cast<std::size_t>(i)];
  std::size_t below = 0, equal = 0;
  for (std::size_t v : pre) {
    below += v < pre[0];
    equal += v == pre[0];
  }
  Rng rng(seed);
  return below + 1 + rng.index(equal);
}

std::vector<std::size_t> mv_rank_histogram(const std::vector<Eigen::MatrixXd>& forecasts,
                                           const std::vector<Eigen::VectorXd>& obs, std::uint64_t seed) {
  if (forecasts.size() != obs.size()) throw InterfaceError("mv_rank_histogram: forecast and observation counts differ");
  if (forecasts.empty()) throw InterfaceError("mv_rank_histogram: no cases");
  const Eigen::Index m = forecasts.front().rows();
  std::vector<std::size_t> counts(static_cast<std::size_t>(m + 1), 0);
  for (std::size_t i = 0; i < forecasts.size(); ++i) {
    if (forecasts[i].rows() != m) throw InterfaceError("mv_rank_histogram: ensemble sizes differ between cases");
    ++counts[mv_rank(forecasts[i], obs[i], derive_seed(seed, i)) - 1];
  }
  return counts;
}

double reliability_index(std::span<const std::size_t> histogram) {
  if (histogram.empty()) throw InterfaceError("reliability_index: empty histogram");
  const double total = static_cast<double>(std::accumulate(histogram.begin(), histogram.end(), std::size_t{0}));
  if (total == 0.0) throw InterfaceError("reliability_index: histogram has no counts");
  const double uniform = 1.0 / static_cast<double>(histogram.size());
  double delta = 0.0;
  for (std::size_t c : histogram) delta += std::abs(static_cast<double>(c) / total - uniform);
  return delta;
}

}  // namespace condvine
