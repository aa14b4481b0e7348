#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "condvine/copula.hpp"
#include "condvine/random.hpp"

namespace testing_support {

/// Intercept column followed by p - 1 independent standard normal columns.
inline Eigen::MatrixXd normal_design(std::size_t n, std::size_t p, std::uint64_t seed) {
  condvine::Rng rng(seed);
  Eigen::MatrixXd Z(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  for (Eigen::Index i = 0; i < Z.rows(); ++i) {
    Z(i, 0) = 1.0;
    for (Eigen::Index j = 1; j < Z.cols(); ++j) Z(i, j) = rng.normal();
  }
  return Z;
}

/// One pair per row with Kendall tau = tanh(Z beta), by conditional inversion.
inline std::vector<condvine::UnitPair> conditional_pairs(condvine::Family family, const Eigen::MatrixXd& Z,
                                                         const Eigen::VectorXd& beta, std::uint64_t seed) {
  condvine::Rng rng(seed);
  const Eigen::VectorXd eta = Z * beta;
  std::vector<condvine::UnitPair> out(static_cast<std::size_t>(Z.rows()));
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double w1 = rng.uniform();
    const double w2 = rng.uniform();
    const double tau = condvine::link_tau(eta(static_cast<Eigen::Index>(i)));
    out[i] = {w1, condvine::hinv(family, condvine::Conditioning::SecondGivenFirst, w2, w1, tau)};
  }
  return out;
}

/// Radical inverse of i in the given base (Halton sequence component).
inline double halton(std::uint64_t i, std::uint64_t base) {
  double f = 1.0, r = 0.0;
  while (i > 0) {
    f /= static_cast<double>(base);
    r += f * static_cast<double>(i % base);
    i /= base;
  }
  return r;
}

}  // namespace testing_support
