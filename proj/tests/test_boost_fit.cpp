#include <cmath>
#include <cstring>
#include <numeric>

#include "condvine/boost_fit.hpp"
#include "condvine/error.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace condvine;
using testing_support::conditional_pairs;
using testing_support::normal_design;

namespace {

Eigen::VectorXd beta_of(std::initializer_list<double> head, std::size_t p) {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
  Eigen::Index i = 0;
  for (double v : head) b(i++) = v;
  return b;
}

bool bit_equal(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

}  // namespace

TEST_CASE("zero gradient keeps every coefficient at zero") {
  // With u1 = 1/2 the Gaussian score at rho = 0 is Phi^-1(u1) Phi^-1(u2) = 0.
  const auto Z = normal_design(200, 5, 1);
  std::vector<UnitPair> pairs(200);
  Rng rng(2);
  for (auto& p : pairs) p = {0.5, rng.uniform()};
  BoostControl c;
  c.m_stop = 50;
  const auto path = boost(pairs, Z, Family::Gaussian, c);
  CHECK(path.iterations() == 50);
  CHECK(path.coefficients(50).isZero(0.0));
  for (double r : path.risk) CHECK(r == 0.0);
}

TEST_CASE("first selected covariate matches an exhaustive RSS comparison") {
  const std::size_t n = 500, p = 8;
  const auto Z = normal_design(n, p, 3);
  const auto pairs = conditional_pairs(Family::Gaussian, Z, beta_of({0.0, 1.2}, p), 4);
  BoostControl c;
  c.m_stop = 1;
  const auto path = boost(pairs, Z, Family::Gaussian, c);

  // Oracle: residual sums of squares of the no-intercept least-squares fit of
  // the negative gradient at eta = 0 on each standardized column.
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = loss_gradient(Family::Gaussian, pairs[i].u1, pairs[i].u2, 0.0);
  std::size_t best = 0;
  double best_rss = INFINITY;
  for (std::size_t j = 0; j < p; ++j) {
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = Z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    if (j > 0) {
      const double m = std::accumulate(x.begin(), x.end(), 0.0) / n;
      for (auto& v : x) v -= m;
    }
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < n; ++i) sxy += x[i] * g[i], sxx += x[i] * x[i];
    const double slope = sxy / sxx;
    double rss = 0;
    for (std::size_t i = 0; i < n; ++i) rss += (g[i] - slope * x[i]) * (g[i] - slope * x[i]);
    if (rss < best_rss) best_rss = rss, best = j;
  }
  CHECK(best == 1);
  CHECK(path.selected[0] == best);
}

TEST_CASE("path invariants: descent, single-coordinate steps, risk partition") {
  const std::size_t n = 600, p = 12;
  const auto Z = normal_design(n, p, 5);
  for (Family f : kCandidateFamilies) {
    const auto pairs = conditional_pairs(f, Z, beta_of({0.3, -0.4, 0.5}, p), 6);
    BoostControl c;
    c.m_stop = 150;
    const auto path = boost(pairs, Z, f, c);
    REQUIRE(path.risk.size() == 151);
    CHECK(path.coefficients(0).isZero(0.0));
    CHECK(path.risk[0] == doctest::Approx(0.0).epsilon(1e-12));
    for (std::size_t m = 1; m <= 150; ++m) {
      CHECK(path.risk[m] <= path.risk[m - 1] + 1e-9);
      const Eigen::VectorXd diff = path.coefficients(m) - path.coefficients(m - 1);
      for (Eigen::Index j = 1; j < diff.size(); ++j)
        if (static_cast<std::size_t>(j) != path.selected[m - 1]) CHECK(diff(j) == 0.0);
    }
    const auto r = attributable_risk(path, 150);
    CHECK(std::accumulate(r.begin(), r.end(), 0.0) ==
          doctest::Approx(path.risk[0] - path.risk[150]).epsilon(1e-9));
  }
}

TEST_CASE("all-zero columns are never selected") {
  auto Z = normal_design(300, 4, 7);
  Z.col(2).setZero();
  const auto pairs = conditional_pairs(Family::ClaytonI, Z, beta_of({0.5, 0.0, 0.0, 0.0}, 4), 8);
  BoostControl c;
  c.m_stop = 40;
  const auto path = boost(pairs, Z, Family::ClaytonI, c);
  CHECK(path.degenerate == std::vector<std::size_t>{2});
  for (std::size_t j : path.selected) CHECK(j != 2);
}

TEST_CASE("stop_aic is the brute-force argmin with smallest-m ties") {
  const auto Z = normal_design(400, 10, 9);
  const auto pairs = conditional_pairs(Family::Gaussian, Z, beta_of({0.2, 0.4}, 10), 10);
  BoostControl c;
  c.m_stop = 120;
  const auto path = boost(pairs, Z, Family::Gaussian, c);
  std::size_t oracle = 0;
  double best = INFINITY;
  for (std::size_t m = 0; m <= 120; ++m) {
    const Eigen::VectorXd b = path.coefficients(m);
    const double df = static_cast<double>((b.array() != 0.0).count());
    const double a = 2.0 * 400 * path.risk[m] + 2.0 * df;
    if (a < best) best = a, oracle = m;
  }
  CHECK(stop_aic(path) == oracle);

  BoostPath flat;
  flat.n_obs = 10;
  flat.risk = {0.0, 0.0, 0.0, 0.0};
  flat.active_set_size = {2, 1, 1, 3};
  CHECK(stop_aic(flat) == 1);
}

TEST_CASE("cross-validation on duplicated folds reproduces the in-sample argmin") {
  const std::size_t n = 300;
  const auto Z1 = normal_design(n, 6, 11);
  const auto pairs1 = conditional_pairs(Family::GumbelI, Z1, beta_of({0.3, 0.3}, 6), 12);
  Eigen::MatrixXd Z(2 * n, 6);
  Z << Z1, Z1;
  std::vector<UnitPair> pairs(pairs1);
  pairs.insert(pairs.end(), pairs1.begin(), pairs1.end());
  std::vector<std::size_t> folds(2 * n);
  for (std::size_t i = 0; i < 2 * n; ++i) folds[i] = i < n ? 0 : 1;

  BoostControl c;
  c.m_stop = 200;
  c.nu = 0.3;
  const auto cv = cv_risk_path(pairs, Z, Family::GumbelI, c, folds);
  const auto path = boost(pairs1, Z1, Family::GumbelI, c);
  const auto in_sample = std::min_element(path.risk.begin(), path.risk.end()) - path.risk.begin();
  CHECK(std::min_element(cv.begin(), cv.end()) - cv.begin() == in_sample);
  for (std::size_t m = 0; m < cv.size(); ++m) CHECK(cv[m] == doctest::Approx(2 * path.risk[m]).epsilon(1e-9));
}

TEST_CASE("cross-validation errors and determinism") {
  const auto Z = normal_design(95, 4, 13);
  const auto pairs = conditional_pairs(Family::Gaussian, Z, beta_of({0.3}, 4), 14);
  BoostControl c;
  c.m_stop = 30;
  c.cv_folds = 10;
  CHECK_THROWS_AS(stop_cv(pairs, Z, Family::Gaussian, c), ConfigError);
  c.cv_folds = 5;
  CHECK(stop_cv(pairs, Z, Family::Gaussian, c) == stop_cv(pairs, Z, Family::Gaussian, c, {}, 3));
  CHECK(cv_folds(95, 5, 1) == cv_folds(95, 5, 1));
  c.cv_folds = 1;
  c.stopping = Stopping::CV;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("deselection rule") {
  BoostPath path;
  path.n_obs = 100;
  path.n_cols = 4;
  path.candidates = {0, 1, 2, 3};
  path.intercept = -1;
  path.center.assign(4, 0.0);
  path.scale.assign(4, 1.0);
  path.selected = {2, 2, 2};
  path.step = {0.1, 0.1, 0.1};
  path.risk = {0.0, -0.1, -0.2, -0.3};
  path.active_set_size = {0, 1, 1, 1};
  BoostControl c;
  CHECK(deselect(path, 3, c) == std::vector<std::size_t>{2});

  path.intercept = 0;
  CHECK(deselect(path, 3, c) == std::vector<std::size_t>{0, 2});
  c.exempt_intercept = false;
  CHECK(deselect(path, 3, c) == std::vector<std::size_t>{2});

  path.risk = {0.0, 0.0, 0.0, 0.0};
  CHECK(deselect(path, 3, c) == std::vector<std::size_t>{0});
}

TEST_CASE("refit only uses kept covariates and AIC is reproducible") {
  const std::size_t n = 800, p = 30;
  const auto Z = normal_design(n, p, 15);
  const auto pairs = conditional_pairs(Family::ClaytonII, Z, beta_of({0.2, 0.5, -0.4}, p), 16);
  BoostControl c;
  c.m_stop = 300;
  const auto model = fit_pair_family(pairs, Z, Family::ClaytonII, c);
  for (Eigen::Index j = 0; j < model.beta.size(); ++j) {
    if (!std::binary_search(model.kept.begin(), model.kept.end(), static_cast<std::size_t>(j)))
      CHECK(model.beta(j) == 0.0);
  }
  CHECK(std::binary_search(model.kept.begin(), model.kept.end(), std::size_t{1}));
  CHECK(std::binary_search(model.kept.begin(), model.kept.end(), std::size_t{2}));
  const double recomputed = 2.0 * n * mean_risk(model, pairs, Z) + 2.0 * static_cast<double>(model.active_set_size());
  CHECK(recomputed == doctest::Approx(model.aic).epsilon(1e-9));
  CHECK(model.aic == doctest::Approx(-2.0 * model.loglik + 2.0 * static_cast<double>(model.active_set_size())));
}

TEST_CASE("family selection") {
  const std::size_t n = 1000, p = 6;
  const auto Z = normal_design(n, p, 17);
  const auto pairs = conditional_pairs(Family::ClaytonI, Z, beta_of({0.6, 0.3}, p), 18);
  BoostControl c;
  c.m_stop = 200;

  PairFitOptions only_gauss;
  only_gauss.families = {Family::Gaussian};
  CHECK(fit_pair(pairs, Z, c, only_gauss).family == Family::Gaussian);

  const auto by_aic = fit_pair(pairs, Z, c);
  CHECK(by_aic.family == Family::ClaytonI);
  REQUIRE(by_aic.candidates.size() == 5);
  for (const auto& s : by_aic.candidates) CHECK(by_aic.aic <= s.aic);

  PairFitOptions threaded;
  threaded.threads = 4;
  const auto again = fit_pair(pairs, Z, c, threaded);
  CHECK(again.family == by_aic.family);
  CHECK(bit_equal(again.beta, by_aic.beta));
  CHECK(again.aic == by_aic.aic);

  PairFitOptions predictive;
  predictive.selection = FamilySelection::PredictiveRisk;
  const auto by_holdout = fit_pair(pairs, Z, c, predictive);
  CHECK(by_holdout.n_obs == n);
  for (const auto& s : by_holdout.candidates) CHECK(s.holdout_risk != 0.0);

  PairFitOptions loglik;
  loglik.selection = FamilySelection::LogLik;
  const auto by_loglik = fit_pair(pairs, Z, c, loglik);
  for (const auto& s : by_loglik.candidates) CHECK(by_loglik.loglik >= s.loglik);

  PairFitOptions none;
  none.families.clear();
  CHECK_THROWS_AS(fit_pair(pairs, Z, c, none), ConfigError);
}

TEST_CASE("cross-validated stopping inside the pair fit") {
  const auto Z = normal_design(500, 10, 19);
  const auto pairs = conditional_pairs(Family::Gaussian, Z, beta_of({0.3, 0.4}, 10), 20);
  BoostControl c;
  c.m_stop = 150;
  c.stopping = Stopping::CV;
  c.cv_folds = 5;
  const auto a = fit_pair_family(pairs, Z, Family::Gaussian, c);
  const auto b = fit_pair_family(pairs, Z, Family::Gaussian, c);
  CHECK(a.m_opt == b.m_opt);
  CHECK(bit_equal(a.beta, b.beta));
  CHECK(a.m_opt > 0);
}

TEST_CASE("predict_tau") {
  FittedPairCopula m = independence_model(6);
  const Eigen::MatrixXd Z = Eigen::MatrixXd::Ones(3, 6);
  for (double t : predict_tau(m, Z)) CHECK(t == 0.0);
  m.beta(0) = 0.1;
  for (double t : predict_tau(m, Z)) CHECK(t == doctest::Approx(0.0996679946249558).epsilon(1e-14));
  m.beta << 0.1, -0.2, 0.3, 0.2, 0.5, -0.4;
  Eigen::MatrixXd e0 = Eigen::MatrixXd::Zero(1, 6);
  e0(0, 0) = 1.0;
  CHECK(predict_tau(m, e0)[0] == doctest::Approx(std::tanh(0.1)).epsilon(1e-15));
  CHECK_THROWS_AS(predict_tau(m, Eigen::MatrixXd::Ones(2, 5)), InterfaceError);
}
