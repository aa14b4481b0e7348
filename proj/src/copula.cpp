#include "condvine/copula.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "condvine/error.hpp"
#include "condvine/random.hpp"
#include "condvine/stats.hpp"

namespace condvine {

namespace {

constexpr double kHalfPi = std::numbers::pi / 2.0;
// Below this Clayton parameter the first-order expansion around independence is used.
constexpr double kClaytonTiny = 1e-8;

bool is_clayton(Family f) { return f == Family::ClaytonI || f == Family::ClaytonII; }
bool is_survival(Family f) { return f == Family::ClaytonII || f == Family::GumbelII; }

struct LogDensity {
  double value;
  double slope;  // d value / d theta
};

// ---------------------------------------------------------------------------
// Base families on (p, q), parameterized by a = -log p, b = -log q.

LogDensity clayton_log_density(double a, double b, double theta) {
  if (theta < kClaytonTiny) {
    const double slope = (1.0 - a) * (1.0 - b);
    return {theta * slope, slope};
  }
  const double ea = std::expm1(theta * a);
  const double eb = std::expm1(theta * b);
  const double log_a = std::log1p(ea + eb);  // log(p^-theta + q^-theta - 1)
  const double s = a + b;
  const double value = std::log1p(theta) + (1.0 + theta) * s - (2.0 + 1.0 / theta) * log_a;
  const double d_log_a = (a * (ea + 1.0) + b * (eb + 1.0)) / (1.0 + ea + eb);
  const double slope =
      1.0 / (1.0 + theta) + s + log_a / (theta * theta) - (2.0 + 1.0 / theta) * d_log_a;
  return {value, slope};
}

// C(p, q) differentiated in q.
double clayton_h(double p, double q, double theta) {
  if (theta < kClaytonTiny) return p;
  const double a = -std::log(p);
  const double b = -std::log(q);
  const double log_a = std::log1p(std::expm1(theta * a) + std::expm1(theta * b));
  return std::exp((theta + 1.0) * b - (1.0 / theta + 1.0) * log_a);
}

double clayton_hinv(double w, double q, double theta) {
  if (theta < kClaytonTiny) return w;
  const double b = -std::log(q);
  const double log_a = -theta / (1.0 + theta) * std::log(w) + theta * b;
  const double arg = std::max(std::expm1(log_a) - std::expm1(theta * b), 0.0);
  const double a = std::log1p(arg) / theta;
  return std::exp(-a);
}

struct GumbelTerms {
  double lx, ly, log_a, w;
};

GumbelTerms gumbel_terms(double x, double y, double theta) {
  const double lx = std::log(x);
  const double ly = std::log(y);
  const double la = theta * lx;
  const double lb = theta * ly;
  const double m = std::max(la, lb);
  const double log_a = m + std::log(std::exp(la - m) + std::exp(lb - m));
  return {lx, ly, log_a, std::exp(log_a / theta)};
}

LogDensity gumbel_log_density(double x, double y, double theta) {
  const GumbelTerms t = gumbel_terms(x, y, theta);
  const double value = -t.w + x + y + (theta - 1.0) * (t.lx + t.ly) +
                       (1.0 / theta - 2.0) * t.log_a + std::log(t.w + theta - 1.0);
  const double px = std::exp(theta * t.lx - t.log_a);
  const double py = std::exp(theta * t.ly - t.log_a);
  const double d_log_a = px * t.lx + py * t.ly;
  const double dw = t.w * (d_log_a / theta - t.log_a / (theta * theta));
  const double slope = -dw + t.lx + t.ly - t.log_a / (theta * theta) +
                       (1.0 / theta - 2.0) * d_log_a + (dw + 1.0) / (t.w + theta - 1.0);
  return {value, slope};
}

double gumbel_h(double p, double q, double theta) {
  const double x = -std::log(p);
  const double y = -std::log(q);
  const GumbelTerms t = gumbel_terms(x, y, theta);
  return std::exp(-t.w + y + (theta - 1.0) * t.ly + (1.0 / theta - 1.0) * t.log_a);
}

// With z = (x^theta + y^theta)^(1/theta) the h-function reads
// log h = -z + y + (theta - 1)(log y - log z); solve for z >= y, then x.
double gumbel_hinv(double w, double q, double theta) {
  const double y = -std::log(q);
  const double ly = std::log(y);
  const double target = y + (theta - 1.0) * ly - std::log(w);
  double z = y;
  if (theta == 1.0) {
    z = target;
  } else {
    // g(z) = z + (theta - 1) log z is increasing and concave, so Newton
    // iterates started left of the root increase monotonically to it.
    bool converged = false;
    for (int iter = 0; iter < 200; ++iter) {
      const double g = z + (theta - 1.0) * std::log(z) - target;
      const double step = g / (1.0 + (theta - 1.0) / z);
      const double next = std::max(z - step, y);
      if (std::abs(next - z) <= 1e-15 * std::max(1.0, z)) {
        z = next;
        converged = true;
        break;
      }
      z = next;
    }
    if (!converged) throw NumericError("gumbel_hinv: Newton iteration did not converge");
  }
  const double lz = std::log(z);
  const double ratio = -std::expm1(theta * (ly - lz));  // 1 - (y/z)^theta
  if (ratio <= 0.0) return 1.0;
  const double lx = lz + std::log(ratio) / theta;
  return std::exp(-std::exp(lx));
}

// ---------------------------------------------------------------------------
// Parameter maps.

struct BaseParameter {
  double theta;
  double dtheta;  // d theta / d |tau|, zero when capped
};

BaseParameter clayton_parameter(double abs_tau) {
  const double theta = 2.0 * abs_tau / (1.0 - abs_tau);
  if (theta > kClaytonThetaMax) return {kClaytonThetaMax, 0.0};
  return {theta, 2.0 / ((1.0 - abs_tau) * (1.0 - abs_tau))};
}

BaseParameter gumbel_parameter(double abs_tau) {
  const double theta = 1.0 / (1.0 - abs_tau);
  if (theta > kGumbelThetaMax) return {kGumbelThetaMax, 0.0};
  return {theta, 1.0 / ((1.0 - abs_tau) * (1.0 - abs_tau))};
}

double clamp_tau(double tau) { return std::clamp(tau, -kTauClamp, kTauClamp); }

void check_tau(double tau) {
  if (!std::isfinite(tau) || std::abs(tau) >= 1.0)
    throw DomainError("Kendall's tau must lie in (-1, 1), got " + std::to_string(tau));
}

void check_unit(double u, const char* what) {
  if (!(u >= 0.0 && u <= 1.0)) throw DomainError(std::string(what) + " must lie in [0, 1]");
}

struct TauDerivative {
  double value;   // log c
  double dvalue;  // d log c / d tau
};

TauDerivative evaluate(Family family, const PreparedPair& pp, double tau) {
  if (family == Family::Independence) return {0.0, 0.0};
  if (family == Family::Gaussian) {
    const double rho = std::sin(kHalfPi * tau);
    const double one_minus = 1.0 - rho * rho;
    const double ss = pp.q1 * pp.q1 + pp.q2 * pp.q2;
    const double cross = pp.q1 * pp.q2;
    const double value =
        -0.5 * std::log1p(-rho * rho) - (rho * rho * ss - 2.0 * rho * cross) / (2.0 * one_minus);
    const double slope =
        (rho * one_minus - rho * ss + (1.0 + rho * rho) * cross) / (one_minus * one_minus);
    return {value, slope * kHalfPi * std::cos(kHalfPi * tau)};
  }

  const bool negative = tau < 0.0;
  const double sign = negative ? -1.0 : 1.0;
  const double abs_tau = std::abs(tau);
  // Orientation of (p, q) relative to (u1, u2):
  //   I,  tau >= 0: (u1, u2)        I,  tau < 0: (u2, 1 - u1)
  //   II, tau >= 0: (1-u1, 1-u2)    II, tau < 0: (1 - u2, u1)
  double a, b;
  if (!is_survival(family)) {
    a = negative ? pp.a2 : pp.a1;
    b = negative ? pp.a1c : pp.a2;
  } else {
    a = negative ? pp.a2c : pp.a1c;
    b = negative ? pp.a1 : pp.a2c;
  }
  if (is_clayton(family)) {
    const BaseParameter par = clayton_parameter(abs_tau);
    const LogDensity ld = clayton_log_density(a, b, par.theta);
    return {ld.value, ld.slope * par.dtheta * sign};
  }
  const BaseParameter par = gumbel_parameter(abs_tau);
  const LogDensity ld = gumbel_log_density(a, b, par.theta);
  return {ld.value, ld.slope * par.dtheta * sign};
}

// Base h-function of an exchangeable Archimedean family: d/dq C(p, q).
double base_h(Family family, double p, double q, double abs_tau) {
  if (is_clayton(family)) return clayton_h(p, q, clayton_parameter(abs_tau).theta);
  return gumbel_h(p, q, gumbel_parameter(abs_tau).theta);
}

double base_hinv(Family family, double w, double q, double abs_tau) {
  if (is_clayton(family)) return clayton_hinv(w, q, clayton_parameter(abs_tau).theta);
  return gumbel_hinv(w, q, gumbel_parameter(abs_tau).theta);
}

double checked_unit_result(double r, double u1, double u2, double tau, const char* what) {
  if (!std::isfinite(r) || r < -1e-12 || r > 1.0 + 1e-12)
    throw EvaluationError(std::string(what) + ": result outside [0, 1]", u1, u2, tau);
  return std::clamp(r, 0.0, 1.0);
}

}  // namespace

std::string_view family_name(Family family) {
  switch (family) {
    case Family::Gaussian: return "Gaussian";
    case Family::ClaytonI: return "ClaytonI";
    case Family::ClaytonII: return "ClaytonII";
    case Family::GumbelI: return "GumbelI";
    case Family::GumbelII: return "GumbelII";
    case Family::Independence: return "Independence";
  }
  return "?";
}

Family parse_family(std::string_view name) {
  for (Family f : {Family::Gaussian, Family::ClaytonI, Family::ClaytonII, Family::GumbelI,
                   Family::GumbelII, Family::Independence}) {
    if (family_name(f) == name) return f;
  }
  throw DomainError("unknown copula family '" + std::string(name) + "'");
}

double clamp_unit(double u) { return std::clamp(u, kUnitClamp, 1.0 - kUnitClamp); }

double tau_to_theta(Family family, double tau) {
  check_tau(tau);
  const double abs_tau = std::abs(tau);
  switch (family) {
    case Family::Gaussian: return std::sin(kHalfPi * tau);
    case Family::ClaytonI:
    case Family::ClaytonII: return 2.0 * tau / (1.0 - abs_tau);
    case Family::GumbelI:
    case Family::GumbelII: return (tau >= 0.0 ? 1.0 : -1.0) / (1.0 - abs_tau);
    case Family::Independence: return 0.0;
  }
  return 0.0;
}

double theta_to_tau(Family family, double theta) {
  if (!std::isfinite(theta)) throw DomainError("copula parameter must be finite");
  switch (family) {
    case Family::Gaussian:
      if (std::abs(theta) >= 1.0) throw DomainError("Gaussian parameter must lie in (-1, 1)");
      return std::asin(theta) / kHalfPi;
    case Family::ClaytonI:
    case Family::ClaytonII: return theta / (std::abs(theta) + 2.0);
    case Family::GumbelI:
    case Family::GumbelII:
      if (std::abs(theta) < 1.0) throw DomainError("Gumbel parameter must satisfy |theta| >= 1");
      return (theta >= 0.0 ? 1.0 : -1.0) * (1.0 - 1.0 / std::abs(theta));
    case Family::Independence: return 0.0;
  }
  return 0.0;
}

double link_tau(double eta) { return clamp_tau(std::tanh(eta)); }

PreparedPair prepare_pair(double u1, double u2) {
  check_unit(u1, "u1");
  check_unit(u2, "u2");
  u1 = clamp_unit(u1);
  u2 = clamp_unit(u2);
  return {u1,
          u2,
          normal_quantile(u1),
          normal_quantile(u2),
          -std::log(u1),
          -std::log(u2),
          -std::log1p(-u1),
          -std::log1p(-u2)};
}

double log_density(Family family, double u1, double u2, double tau) {
  check_tau(tau);
  const PreparedPair pp = prepare_pair(u1, u2);
  const double value = evaluate(family, pp, clamp_tau(tau)).value;
  if (!std::isfinite(value)) throw EvaluationError("log_density: non-finite value", u1, u2, tau);
  return value;
}

LossGradient loss_and_gradient(Family family, const PreparedPair& pair, double eta) {
  const double t = std::tanh(eta);
  const bool clamped = std::abs(t) > kTauClamp;
  const double tau = clamp_tau(t);
  const double dtau = clamped ? 0.0 : 1.0 - t * t;
  const TauDerivative td = evaluate(family, pair, tau);
  const LossGradient out{-td.value, td.dvalue * dtau};
  if (!std::isfinite(out.loss) || !std::isfinite(out.negative_gradient))
    throw EvaluationError("loss_gradient: non-finite value", pair.u1, pair.u2, eta);
  return out;
}

double pair_loss(Family family, const PreparedPair& pair, double eta) {
  const double value = evaluate(family, pair, link_tau(eta)).value;
  if (!std::isfinite(value))
    throw EvaluationError("pair_loss: non-finite value", pair.u1, pair.u2, eta);
  return -value;
}

double loss_gradient(Family family, double u1, double u2, double eta) {
  if (!std::isfinite(eta)) throw DomainError("linear predictor must be finite");
  return loss_and_gradient(family, prepare_pair(u1, u2), eta).negative_gradient;
}

double hfunc(Family family, Conditioning which, double u1, double u2, double tau) {
  check_tau(tau);
  check_unit(u1, "u1");
  check_unit(u2, "u2");
  tau = clamp_tau(tau);
  u1 = clamp_unit(u1);
  u2 = clamp_unit(u2);
  const bool first = which == Conditioning::FirstGivenSecond;
  double r = 0.0;
  if (family == Family::Independence) {
    r = first ? u1 : u2;
  } else if (family == Family::Gaussian) {
    const double rho = std::sin(kHalfPi * tau);
    const double s = std::sqrt(1.0 - rho * rho);
    const double q1 = normal_quantile(u1);
    const double q2 = normal_quantile(u2);
    r = first ? normal_cdf((q1 - rho * q2) / s) : normal_cdf((q2 - rho * q1) / s);
  } else {
    const bool survival = is_survival(family);
    double v1 = survival ? 1.0 - u1 : u1;
    double v2 = survival ? 1.0 - u2 : u2;
    const double abs_tau = std::abs(tau);
    if (tau >= 0.0) {
      r = first ? base_h(family, v1, v2, abs_tau) : base_h(family, v2, v1, abs_tau);
    } else {
      // C_I(u1, u2) = u2 - C(u2, 1 - u1)
      r = first ? 1.0 - base_h(family, 1.0 - v1, v2, abs_tau)
                : base_h(family, v2, 1.0 - v1, abs_tau);
    }
    if (survival) r = 1.0 - r;
  }
  return checked_unit_result(r, u1, u2, tau, "hfunc");
}

double hinv(Family family, Conditioning which, double w, double u_cond, double tau) {
  check_tau(tau);
  check_unit(w, "w");
  check_unit(u_cond, "u_cond");
  tau = clamp_tau(tau);
  w = clamp_unit(w);
  u_cond = clamp_unit(u_cond);
  const bool first = which == Conditioning::FirstGivenSecond;
  double r = 0.0;
  if (family == Family::Independence) {
    r = w;
  } else if (family == Family::Gaussian) {
    const double rho = std::sin(kHalfPi * tau);
    const double s = std::sqrt(1.0 - rho * rho);
    r = normal_cdf(normal_quantile(w) * s + rho * normal_quantile(u_cond));
  } else {
    const bool survival = is_survival(family);
    const double ww = survival ? 1.0 - w : w;
    const double c = survival ? 1.0 - u_cond : u_cond;
    const double abs_tau = std::abs(tau);
    if (tau >= 0.0) {
      r = base_hinv(family, ww, c, abs_tau);
    } else {
      r = first ? 1.0 - base_hinv(family, 1.0 - ww, c, abs_tau)
                : base_hinv(family, ww, 1.0 - c, abs_tau);
    }
    if (survival) r = 1.0 - r;
  }
  return checked_unit_result(r, w, u_cond, tau, "hinv");
}

std::vector<UnitPair> sample_pair(Family family, double tau, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw InterfaceError("sample_pair: n must be at least 1");
  check_tau(tau);
  Rng rng(seed);
  std::vector<UnitPair> out(n);
  for (auto& pair : out) {
    const double w1 = rng.uniform();
    const double w2 = rng.uniform();
    pair = {w1, hinv(family, Conditioning::SecondGivenFirst, w2, w1, tau)};
  }
  return out;
}

}  // namespace condvine
