#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace condvine {

/// One-parameter bivariate copula families. Clayton/Gumbel "I" extend the
/// base family to negative tau by a 90 degree rotation; "II" is the 180
/// degree (survival) version of "I". `Independence` is not a candidate
/// family; it marks truncated vine edges.
enum class Family { Gaussian, ClaytonI, ClaytonII, GumbelI, GumbelII, Independence };

inline constexpr std::array<Family, 5> kCandidateFamilies = {
    Family::Gaussian, Family::ClaytonI, Family::ClaytonII, Family::GumbelI, Family::GumbelII};

std::string_view family_name(Family family);
/// Accepts the names produced by family_name (case-sensitive). Throws DomainError.
Family parse_family(std::string_view name);

/// Which conditional distribution an h-function computes.
enum class Conditioning {
  FirstGivenSecond,  ///< u1 | u2, i.e. dC/du2
  SecondGivenFirst,  ///< u2 | u1, i.e. dC/du1
};

inline constexpr double kTauClamp = 0.9999;
inline constexpr double kUnitClamp = 1e-10;
inline constexpr double kClaytonThetaMax = 28.0;
inline constexpr double kGumbelThetaMax = 50.0;

/// Clamp a copula-scale value to [kUnitClamp, 1 - kUnitClamp].
double clamp_unit(double u);

/// Kendall's tau to copula parameter. Gaussian: sin(pi t / 2);
/// Clayton: 2t / (1 - |t|); Gumbel: sgn(t) / (1 - |t|) with sgn(0) = +1.
/// The sign of the Clayton/Gumbel parameter encodes the rotation.
double tau_to_theta(Family family, double tau);
double theta_to_tau(Family family, double theta);

/// Fisher link: tanh(eta) clamped to +-kTauClamp.
double link_tau(double eta);

double log_density(Family family, double u1, double u2, double tau);

/// Negative derivative of the loss -log c(u1, u2; h(tanh(eta))) in eta.
double loss_gradient(Family family, double u1, double u2, double eta);

double hfunc(Family family, Conditioning which, double u1, double u2, double tau);

/// Inverse of hfunc in the conditioned argument: returns u such that
/// hfunc(which, u, u_cond) = w (arguments ordered as for hfunc).
double hinv(Family family, Conditioning which, double w, double u_cond, double tau);

struct UnitPair {
  double u1;
  double u2;
};

/// n draws (w1, hinv(2|1, w2, w1, tau)) from independent uniforms.
std::vector<UnitPair> sample_pair(Family family, double tau, std::size_t n, std::uint64_t seed);

/// Per-observation quantities that do not depend on the parameter; computed
/// once so boosting only pays for the parameter-dependent part.
struct PreparedPair {
  double u1;
  double u2;
  double q1;   ///< Phi^-1(u1)
  double q2;   ///< Phi^-1(u2)
  double a1;   ///< -log(u1)
  double a2;   ///< -log(u2)
  double a1c;  ///< -log(1 - u1)
  double a2c;  ///< -log(1 - u2)
};

PreparedPair prepare_pair(double u1, double u2);

struct LossGradient {
  double loss;               ///< -log c
  double negative_gradient;  ///< -d loss / d eta
};

LossGradient loss_and_gradient(Family family, const PreparedPair& pair, double eta);
double pair_loss(Family family, const PreparedPair& pair, double eta);

}  // namespace condvine
