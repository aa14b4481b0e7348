#include <cmath>
#include <numbers>

#include "condvine/error.hpp"
#include "condvine/stats.hpp"
#include "condvine/vine.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace condvine;
using testing_support::halton;

namespace {

// Edge written with 1-based variable labels.
VineEdge e1(std::size_t a, std::size_t b, std::vector<std::size_t> D = {}) {
  for (auto& v : D) --v;
  return make_edge(a - 1, b - 1, D);
}

VineStructure five_dim() {
  VineStructure s;
  s.d = 5;
  s.trees = {{e1(1, 2), e1(1, 3), e1(1, 4), e1(4, 5)},
             {e1(2, 4, {1}), e1(3, 4, {1}), e1(1, 5, {4})},
             {e1(2, 3, {1, 4}), e1(3, 5, {1, 4})},
             {e1(2, 5, {1, 3, 4})}};
  s.normalize();
  return s;
}

Eigen::MatrixXd intercept_only(std::size_t n) { return Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(n), 1); }

// Constant-tau model: every edge uses beta = (atanh(tau)).
ConditionalVineModel constant_model(const VineStructure& s, const std::vector<std::vector<Family>>& families,
                                    const std::vector<std::vector<double>>& taus) {
  std::vector<std::vector<Eigen::VectorXd>> betas(s.trees.size());
  for (std::size_t t = 0; t < s.trees.size(); ++t)
    for (double tau : taus[t]) betas[t].push_back(Eigen::VectorXd::Constant(1, std::atanh(tau)));
  return make_vine_model(s, families, betas);
}

double gauss_log_c(double u, double v, double rho) {
  const double x = normal_quantile(u), y = normal_quantile(v);
  return -0.5 * std::log(1 - rho * rho) - (rho * rho * (x * x + y * y) - 2 * rho * x * y) / (2 * (1 - rho * rho));
}

double gauss_h(double u, double v, double rho) {
  return normal_cdf((normal_quantile(u) - rho * normal_quantile(v)) / std::sqrt(1 - rho * rho));
}

// Random families and small random coefficients on every edge.
ConditionalVineModel random_five_dim_model(std::uint64_t seed, std::size_t p) {
  Rng rng(seed);
  const auto s = five_dim();
  std::vector<std::vector<Family>> families(4);
  std::vector<std::vector<Eigen::VectorXd>> betas(4);
  for (std::size_t t = 0; t < 4; ++t) {
    for (std::size_t i = 0; i < s.trees[t].size(); ++i) {
      families[t].push_back(kCandidateFamilies[rng.index(5)]);
      Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
      for (Eigen::Index j = 0; j < b.size(); ++j) b(j) = 0.6 * (rng.uniform() - 0.5);
      betas[t].push_back(b);
    }
  }
  return make_vine_model(s, families, betas);
}

}  // namespace

TEST_CASE("structure validation") {
  CHECK_FALSE(validate_structure(five_dim()).has_value());
  const std::vector<std::size_t> order{0, 1, 2, 3, 4};
  const auto dv = dvine_structure(order);
  CHECK_FALSE(validate_structure(dv).has_value());
  CHECK(dv.trees[3][0] == make_edge(0, 4, {1, 2, 3}));

  auto bad = five_dim();
  bad.trees[1].pop_back();
  CHECK(validate_structure(bad)->kind == ViolationKind::Shape);

  bad = five_dim();
  bad.trees[0][3] = e1(2, 3);
  CHECK(validate_structure(bad)->kind == ViolationKind::FirstTree);

  bad = five_dim();
  bad.trees[1][0] = e1(2, 5, {1});
  const auto v = validate_structure(bad);
  REQUIRE(v.has_value());
  CHECK(v->kind == ViolationKind::MissingParent);
  CHECK(v->tree == 2);
}

TEST_CASE("graph-form construction reports joins without a common node") {
  // Tree 1 is the path 0-1-2-3; tree 2 joins edges 0-1 and 2-3.
  const auto r = structure_from_joins(4, {{{0, 1}, {1, 2}, {2, 3}}, {{0, 2}, {1, 2}}, {{0, 1}}});
  REQUIRE(std::holds_alternative<StructureViolation>(r));
  CHECK(std::get<StructureViolation>(r).kind == ViolationKind::Proximity);
  CHECK(std::get<StructureViolation>(r).tree == 2);

  const auto ok = structure_from_joins(4, {{{0, 1}, {1, 2}, {2, 3}}, {{0, 1}, {1, 2}}, {{0, 1}}});
  REQUIRE(std::holds_alternative<VineStructure>(ok));
  const std::vector<std::size_t> order{0, 1, 2, 3};
  CHECK(std::get<VineStructure>(ok) == dvine_structure(order));
}

TEST_CASE("independence vine has zero log density") {
  const auto m = constant_model(five_dim(), {{Family::Independence, Family::Independence, Family::Independence, Family::Independence},
                                             {Family::Independence, Family::Independence, Family::Independence},
                                             {Family::Independence, Family::Independence},
                                             {Family::Independence}},
                                {{0, 0, 0, 0}, {0, 0, 0}, {0, 0}, {0}});
  const std::vector<double> u{0.1, 0.5, 0.3, 0.99, 0.7};
  CHECK(log_density(m, u, Eigen::RowVectorXd::Ones(1)) == 0.0);

  const auto U = sample_vine(m, intercept_only(100000), 3);
  for (Eigen::Index j = 0; j < 5; ++j) {
    std::vector<double> col(U.col(j).data(), U.col(j).data() + U.rows());
    CHECK(ks_uniform(col) < 0.01);
  }
}

TEST_CASE("three-dimensional Gaussian vine against independent formulas") {
  const std::vector<std::size_t> order{0, 1, 2};
  const auto m = constant_model(dvine_structure(order), {{Family::Gaussian, Family::Gaussian}, {Family::Gaussian}},
                                {{0.5, -0.3}, {0.2}});
  const double r01 = std::sin(std::numbers::pi * 0.5 / 2), r12 = std::sin(std::numbers::pi * -0.3 / 2),
               r02 = std::sin(std::numbers::pi * 0.2 / 2);
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    const std::vector<double> u{rng.uniform(), rng.uniform(), rng.uniform()};
    // The edge taus are tanh(atanh(tau)), so use the same round trip in the oracle.
    const double oracle = gauss_log_c(u[0], u[1], r01) + gauss_log_c(u[1], u[2], r12) +
                          gauss_log_c(gauss_h(u[0], u[1], r01), gauss_h(u[2], u[1], r12), r02);
    CHECK(log_density(m, u, Eigen::RowVectorXd::Ones(1)) == doctest::Approx(oracle).epsilon(1e-8));
  }
}

TEST_CASE("random three-dimensional model integrates to one") {
  const std::vector<std::size_t> order{2, 0, 1};
  const auto m = constant_model(dvine_structure(order), {{Family::ClaytonII, Family::GumbelI}, {Family::Gaussian}},
                                {{0.4, -0.35}, {0.3}});
  const std::size_t n = 1000000;
  Eigen::MatrixXd U(static_cast<Eigen::Index>(n), 3);
  for (std::size_t i = 0; i < n; ++i) {
    U(static_cast<Eigen::Index>(i), 0) = halton(i + 1, 2);
    U(static_cast<Eigen::Index>(i), 1) = halton(i + 1, 3);
    U(static_cast<Eigen::Index>(i), 2) = halton(i + 1, 5);
  }
  double sum = 0.0;
  for (double l : log_density(m, U, intercept_only(n))) sum += std::exp(l);
  CHECK(sum / static_cast<double>(n) == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("five-dimensional log density equals the ten-term decomposition") {
  const std::size_t p = 4;
  const auto m = random_five_dim_model(5, p);
  Rng rng(6);
  auto family_of = [&](const VineEdge& e) -> std::pair<Family, const FittedPairCopula*> {
    for (std::size_t t = 0; t < 4; ++t)
      for (std::size_t i = 0; i < m.structure.trees[t].size(); ++i)
        if (m.structure.trees[t][i] == e) return {m.pair_models[t][i].family, &m.pair_models[t][i]};
    throw std::logic_error("edge not found");
  };
  for (int rep = 0; rep < 50; ++rep) {
    const std::vector<double> u{rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()};
    Eigen::RowVectorXd z(static_cast<Eigen::Index>(p));
    z(0) = 1.0;
    for (Eigen::Index j = 1; j < z.size(); ++j) z(j) = rng.normal();
    auto c = [&](const VineEdge& e, double x, double y) {
      const auto [f, pm] = family_of(e);
      return log_density(f, x, y, link_tau(predict_eta(*pm, z)));
    };
    auto h = [&](const VineEdge& e, Conditioning w, double x, double y) {
      const auto [f, pm] = family_of(e);
      return clamp_unit(hfunc(f, w, x, y, link_tau(predict_eta(*pm, z))));
    };
    const auto G1 = Conditioning::FirstGivenSecond;
    const auto G2 = Conditioning::SecondGivenFirst;
    const double u1 = u[0], u2 = u[1], u3 = u[2], u4 = u[3], u5 = u[4];
    const double u2_1 = h(e1(1, 2), G2, u1, u2), u3_1 = h(e1(1, 3), G2, u1, u3), u4_1 = h(e1(1, 4), G2, u1, u4);
    const double u1_4 = h(e1(1, 4), G1, u1, u4), u5_4 = h(e1(4, 5), G2, u4, u5);
    const double u2_14 = h(e1(2, 4, {1}), G1, u2_1, u4_1), u3_14 = h(e1(3, 4, {1}), G1, u3_1, u4_1);
    const double u5_14 = h(e1(1, 5, {4}), G2, u1_4, u5_4);
    const double u2_134 = h(e1(2, 3, {1, 4}), G1, u2_14, u3_14), u5_134 = h(e1(3, 5, {1, 4}), G2, u3_14, u5_14);
    const double terms = c(e1(1, 2), u1, u2) + c(e1(1, 3), u1, u3) + c(e1(1, 4), u1, u4) + c(e1(4, 5), u4, u5) +
                         c(e1(2, 4, {1}), u2_1, u4_1) + c(e1(3, 4, {1}), u3_1, u4_1) + c(e1(1, 5, {4}), u1_4, u5_4) +
                         c(e1(2, 3, {1, 4}), u2_14, u3_14) + c(e1(3, 5, {1, 4}), u3_14, u5_14) +
                         c(e1(2, 5, {1, 3, 4}), u2_134, u5_134);
    CHECK(log_density(m, u, z) == doctest::Approx(terms).epsilon(1e-12));
  }
}

TEST_CASE("inverse Rosenblatt round trip") {
  const std::size_t p = 4, n = 100;
  const auto m = random_five_dim_model(7, p);
  Rng rng(8);
  Eigen::MatrixXd W(static_cast<Eigen::Index>(n), 5), Z(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  for (Eigen::Index i = 0; i < W.rows(); ++i) {
    for (Eigen::Index j = 0; j < 5; ++j) W(i, j) = rng.uniform();
    Z(i, 0) = 1.0;
    for (Eigen::Index j = 1; j < Z.cols(); ++j) Z(i, j) = rng.normal();
  }
  const Eigen::MatrixXd U = inverse_rosenblatt(m, W, Z);
  const Eigen::MatrixXd back = rosenblatt(m, U, Z);
  CHECK((back - W).cwiseAbs().maxCoeff() < 1e-6);
  const auto order = sampling_order(m.structure);
  std::vector<std::size_t> sorted(order);
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<std::size_t>{0, 1, 2, 3, 4});
}

TEST_CASE("two-dimensional vine samples like sample_pair") {
  const std::vector<std::size_t> order{0, 1};
  const auto m = constant_model(dvine_structure(order), {{Family::GumbelII}}, {{-0.45}});
  const std::size_t n = 100000;
  const auto U = sample_vine(m, intercept_only(n), 9);
  const auto pairs = sample_pair(Family::GumbelII, std::tanh(std::atanh(-0.45)), n, 10);
  std::vector<double> a(U.col(0).data(), U.col(0).data() + n), b(U.col(1).data(), U.col(1).data() + n);
  std::vector<double> c(n), d(n);
  for (std::size_t i = 0; i < n; ++i) c[i] = pairs[i].u1, d[i] = pairs[i].u2;
  CHECK(std::abs(kendall_tau(a, b) - kendall_tau(c, d)) < 0.01);
}

TEST_CASE("d = 2 fit equals fit_pair") {
  const std::size_t n = 600;
  const auto Z = testing_support::normal_design(n, 5, 11);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(5);
  beta(0) = 0.4;
  beta(2) = -0.3;
  const auto pairs = testing_support::conditional_pairs(Family::ClaytonI, Z, beta, 12);
  Eigen::MatrixXd U(static_cast<Eigen::Index>(n), 2);
  for (std::size_t i = 0; i < n; ++i) U(static_cast<Eigen::Index>(i), 0) = pairs[i].u1, U(static_cast<Eigen::Index>(i), 1) = pairs[i].u2;
  BoostControl c;
  c.m_stop = 150;
  const std::vector<std::size_t> order{0, 1};
  const auto vine = fit_vine(U, Z, dvine_structure(order), c);
  const auto pair = fit_pair(pairs, Z, c);
  CHECK(vine.pair_models[0][0].family == pair.family);
  CHECK(vine.pair_models[0][0].aic == pair.aic);
  CHECK((vine.pair_models[0][0].beta.array() == pair.beta.array()).all());
}

TEST_CASE("fitting: pseudo-observations, truncation, determinism, serialization") {
  const std::size_t n = 2000, p = 3;
  const auto truth = random_five_dim_model(13, p);
  Eigen::MatrixXd Z = testing_support::normal_design(n, p, 14);
  const Eigen::MatrixXd U = sample_vine(truth, Z, 15);

  const auto inputs = edge_inputs(truth, U, Z);
  for (std::size_t v = 0; v < 4; ++v) {
    const auto& first = inputs[0][v].first;
    for (std::size_t i = 0; i < n; ++i) CHECK_EQ(first[i], U(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(truth.structure.trees[0][v].a)));
  }
  for (const auto& tree : inputs) {
    for (const auto& e : tree) {
      CHECK(ks_uniform(e.first) < 0.05);
      CHECK(ks_uniform(e.second) < 0.05);
    }
  }

  BoostControl c;
  c.m_stop = 100;
  VineFitOptions serial;
  VineFitOptions threaded;
  threaded.threads = 3;
  const auto a = fit_vine(U, Z, truth.structure, c, serial);
  auto shuffled = truth.structure;
  for (auto& tree : shuffled.trees) std::reverse(tree.begin(), tree.end());
  const auto b = fit_vine(U, Z, shuffled, c, threaded);
  CHECK(a == b);

  const auto text = to_json(a);
  const auto back = model_from_json(text);
  CHECK(back == a);
  CHECK(to_json(back) == text);

  VineFitOptions trunc;
  trunc.truncation_level = 2;
  const auto t2 = fit_vine(U, Z, truth.structure, c, trunc);
  for (std::size_t t = 2; t < 4; ++t)
    for (const auto& m : t2.pair_models[t]) CHECK(m.family == Family::Independence);
  for (std::size_t t = 0; t < 2; ++t)
    for (std::size_t i = 0; i < a.pair_models[t].size(); ++i) CHECK(t2.pair_models[t][i].family == a.pair_models[t][i].family);
  CHECK(truncate(a, 2) == [&] {
    auto x = a;
    for (std::size_t t = 2; t < 4; ++t)
      for (auto& m : x.pair_models[t]) m = independence_model(p);
    x.truncation_level = 2;
    return x;
  }());
  CHECK(truncate(a, 4) == a);
  CHECK_THROWS_AS(model_from_json("{\"schema_version\": 99}"), InterfaceError);
}

TEST_CASE("truncation at level one keeps only first-tree terms") {
  const std::vector<std::size_t> order{0, 1, 2};
  const auto m = constant_model(dvine_structure(order), {{Family::Gaussian, Family::ClaytonI}, {Family::GumbelI}},
                                {{0.5, 0.4}, {0.6}});
  const auto t1 = truncate(m, 1);
  const std::vector<double> u{0.2, 0.7, 0.4};
  const auto z = Eigen::RowVectorXd::Ones(1);
  const auto terms = edge_log_densities(m, u, z);
  CHECK(log_density(t1, u, z) == doctest::Approx(terms[0][0] + terms[0][1]).epsilon(1e-14));
}

TEST_CASE("constant-tau vine refit on its own samples") {
  const std::vector<std::size_t> order{0, 1, 2};
  const std::vector<std::vector<double>> taus{{0.5, -0.4}, {0.3}};
  const auto m = constant_model(dvine_structure(order), {{Family::Gaussian, Family::ClaytonI}, {Family::GumbelII}}, taus);
  const std::size_t n = 100000;
  const auto Z = intercept_only(n);
  const auto U = sample_vine(m, Z, 16);
  BoostControl c;
  VineFitOptions opt;
  opt.pair.families = {Family::Gaussian, Family::ClaytonI, Family::GumbelII};
  const auto fit = fit_vine(U, Z, m.structure, c, opt);
  for (std::size_t t = 0; t < 2; ++t) {
    for (std::size_t i = 0; i < fit.pair_models[t].size(); ++i) {
      const double tau_hat = link_tau(fit.pair_models[t][i].beta(0));
      CHECK(std::abs(tau_hat - link_tau(m.pair_models[t][i].beta(0))) < 0.02);
    }
  }
}

TEST_CASE("structure selection") {
  // Tree 1 must be the maximum-weight spanning tree among the three candidates.
  const std::vector<std::size_t> order{0, 1, 2};
  const auto m = constant_model(dvine_structure(order), {{Family::Gaussian, Family::Gaussian}, {Family::Gaussian}},
                                {{0.8, 0.7}, {0.0}});
  const std::size_t n = 3000;
  const auto U = sample_vine(m, intercept_only(n), 17);
  auto col = [&](Eigen::Index j) { return std::vector<double>(U.col(j).data(), U.col(j).data() + n); };
  const double t01 = std::abs(kendall_tau(col(0), col(1)));
  const double t12 = std::abs(kendall_tau(col(1), col(2)));
  const double t02 = std::abs(kendall_tau(col(0), col(2)));
  std::vector<std::pair<double, std::vector<VineEdge>>> spanning{
      {t01 + t12, {make_edge(0, 1), make_edge(1, 2)}},
      {t01 + t02, {make_edge(0, 1), make_edge(0, 2)}},
      {t02 + t12, {make_edge(0, 2), make_edge(1, 2)}}};
  const auto best = std::max_element(spanning.begin(), spanning.end(),
                                     [](const auto& x, const auto& y) { return x.first < y.first; });
  BoostControl c;
  c.m_stop = 100;
  const auto s = select_structure(U, c);
  CHECK(s.trees[0] == best->second);
  CHECK(s.trees[0] == std::vector<VineEdge>{make_edge(0, 1), make_edge(1, 2)});

  const std::vector<std::size_t> two{0, 1};
  CHECK(select_structure(U.leftCols(2), c) == dvine_structure(two));

  const auto truth = random_five_dim_model(18, 1);
  const auto U5 = sample_vine(truth, intercept_only(500), 19);
  CHECK_FALSE(validate_structure(select_structure(U5, c)).has_value());
  CHECK_THROWS_AS(select_structure(U5.topRows(20), c), ConfigError);
}
