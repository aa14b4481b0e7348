#include "condvine/boost_fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "condvine/error.hpp"
#include "condvine/parallel.hpp"
#include "condvine/random.hpp"

namespace condvine {

namespace {

std::vector<std::size_t> resolve_columns(std::span<const std::size_t> columns, std::size_t n_cols) {
  std::vector<std::size_t> out;
  if (columns.empty()) {
    out.resize(n_cols);
    std::iota(out.begin(), out.end(), std::size_t{0});
    return out;
  }
  out.assign(columns.begin(), columns.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  if (!out.empty() && out.back() >= n_cols) throw InterfaceError("boost: column index out of range");
  return out;
}

// Fills the standardization fields of `path` from the full design.
void standardize(const Eigen::MatrixXd& Z, std::span<const std::size_t> columns, BoostPath& path) {
  const auto n = static_cast<double>(Z.rows());
  path.n_obs = static_cast<std::size_t>(Z.rows());
  path.n_cols = static_cast<std::size_t>(Z.cols());
  path.center.assign(path.n_cols, 0.0);
  path.scale.assign(path.n_cols, 1.0);
  path.intercept = -1;
  path.candidates.clear();
  path.degenerate.clear();

  std::vector<std::size_t> varying;
  for (std::size_t c : resolve_columns(columns, path.n_cols)) {
    const auto col = Z.col(static_cast<Eigen::Index>(c));
    const double first = col(0);
    const bool constant = (col.array() == first).all();
    if (constant && first == 0.0) {
      path.degenerate.push_back(c);
      continue;
    }
    path.candidates.push_back(c);
    if (constant) {
      path.scale[c] = first;
      if (path.intercept < 0) path.intercept = static_cast<std::ptrdiff_t>(c);
    } else {
      varying.push_back(c);
    }
  }
  for (std::size_t c : varying) {
    const auto col = Z.col(static_cast<Eigen::Index>(c));
    const double center = path.intercept >= 0 ? col.sum() / n : 0.0;
    const double rms = std::sqrt((col.array() - center).square().sum() / n);
    path.center[c] = center;
    path.scale[c] = rms;
  }
}

Eigen::MatrixXd standardized_design(const Eigen::MatrixXd& Z, const BoostPath& path,
                                    std::span<const std::size_t> rows = {}) {
  const auto n_rows = rows.empty() ? Z.rows() : static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd X(n_rows, static_cast<Eigen::Index>(path.candidates.size()));
  for (std::size_t k = 0; k < path.candidates.size(); ++k) {
    const std::size_t c = path.candidates[k];
    const auto col = Z.col(static_cast<Eigen::Index>(c));
    for (Eigen::Index i = 0; i < n_rows; ++i) {
      const double z = rows.empty() ? col(i) : col(static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)]));
      X(i, static_cast<Eigen::Index>(k)) = (z - path.center[c]) / path.scale[c];
    }
  }
  return X;
}

// Standardized coefficients indexed by candidate position -> original scale.
Eigen::VectorXd to_original(const BoostPath& path, const std::vector<double>& b) {
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(path.n_cols));
  double shift = 0.0;
  for (std::size_t k = 0; k < path.candidates.size(); ++k) {
    const std::size_t c = path.candidates[k];
    beta(static_cast<Eigen::Index>(c)) = b[k] / path.scale[c];
    shift += b[k] * path.center[c] / path.scale[c];
  }
  if (path.intercept >= 0 && shift != 0.0) {
    const auto a = static_cast<Eigen::Index>(path.intercept);
    beta(a) -= shift / path.scale[static_cast<std::size_t>(path.intercept)];
  }
  return beta;
}

std::size_t count_nonzero(const Eigen::VectorXd& v) {
  return static_cast<std::size_t>((v.array() != 0.0).count());
}

std::vector<PreparedPair> prepare(std::span<const UnitPair> pairs, std::span<const std::size_t> rows = {}) {
  std::vector<PreparedPair> out;
  if (rows.empty()) {
    out.reserve(pairs.size());
    for (const auto& p : pairs) out.push_back(prepare_pair(p.u1, p.u2));
  } else {
    out.reserve(rows.size());
    for (std::size_t r : rows) out.push_back(prepare_pair(pairs[r].u1, pairs[r].u2));
  }
  return out;
}

struct HeldOut {
  const std::vector<PreparedPair>* pairs;
  const Eigen::MatrixXd* X;
  std::vector<double>* risk;  // filled for m = 0..M
};

double mean_loss(Family family, const std::vector<PreparedPair>& pp, const Eigen::VectorXd& eta) {
  double sum = 0.0;
  for (std::size_t i = 0; i < pp.size(); ++i) sum += pair_loss(family, pp[i], eta(static_cast<Eigen::Index>(i)));
  return sum / static_cast<double>(pp.size());
}

// Boosting iterations on a prepared standardized design; `path` must already carry
// the standardization.
void run_boost(const std::vector<PreparedPair>& pp, const Eigen::MatrixXd& X, Family family,
               const BoostControl& control, BoostPath& path, HeldOut* held_out = nullptr) {
  const auto n = X.rows();
  const auto k = X.cols();
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd g(n);
  Eigen::VectorXd ss = X.colwise().squaredNorm().transpose();
  std::vector<double> b(static_cast<std::size_t>(k), 0.0);
  Eigen::VectorXd eta_test;
  if (held_out) {
    eta_test = Eigen::VectorXd::Zero(held_out->X->rows());
    held_out->risk->assign(1, mean_loss(family, *held_out->pairs, eta_test));
  }

  auto evaluate = [&] {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const LossGradient lg = loss_and_gradient(family, pp[static_cast<std::size_t>(i)], eta(i));
      sum += lg.loss;
      g(i) = lg.negative_gradient;
    }
    return sum / static_cast<double>(n);
  };

  path.selected.clear();
  path.step.clear();
  path.risk.assign(1, evaluate());
  path.active_set_size.assign(1, 0);
  if (k == 0) return;

  for (std::size_t m = 1; m <= control.m_stop; ++m) {
    const Eigen::VectorXd s = X.transpose() * g;
    Eigen::Index best = 0;
    double best_score = -1.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (!(ss(j) > 0.0)) continue;
      const double score = s(j) * s(j) / ss(j);
      if (score > best_score) {
        best_score = score;
        best = j;
      }
    }
    const double step = best_score < 0.0 ? 0.0 : control.nu * s(best) / ss(best);
    b[static_cast<std::size_t>(best)] += step;
    eta += step * X.col(best);
    path.selected.push_back(path.candidates[static_cast<std::size_t>(best)]);
    path.step.push_back(step);
    path.risk.push_back(evaluate());
    path.active_set_size.push_back(count_nonzero(to_original(path, b)));
    if (held_out) {
      eta_test += step * held_out->X->col(best);
      held_out->risk->push_back(mean_loss(family, *held_out->pairs, eta_test));
    }
  }
}

void check_inputs(std::span<const UnitPair> pairs, const Eigen::MatrixXd& Z) {
  if (static_cast<std::size_t>(Z.rows()) != pairs.size())
    throw InterfaceError("boost: design has " + std::to_string(Z.rows()) + " rows but there are " +
                         std::to_string(pairs.size()) + " pairs");
  if (pairs.empty()) throw InterfaceError("boost: no observations");
}

std::size_t argmin_first(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::min_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

void BoostControl::validate() const {
  if (m_stop < 1) throw ConfigError("m_stop must be at least 1");
  if (!(nu > 0.0 && nu <= 1.0)) throw ConfigError("nu must lie in (0, 1]");
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in (0, 1)");
  if (stopping == Stopping::CV && cv_folds < 2) throw ConfigError("cv_folds must be at least 2");
}

Eigen::VectorXd BoostPath::coefficients(std::size_t m) const {
  if (m > iterations()) throw InterfaceError("coefficients: iteration beyond path length");
  std::vector<double> b(candidates.size(), 0.0);
  for (std::size_t t = 0; t < m; ++t) {
    const auto pos = std::lower_bound(candidates.begin(), candidates.end(), selected[t]) - candidates.begin();
    b[static_cast<std::size_t>(pos)] += step[t];
  }
  return to_original(*this, b);
}

BoostPath boost(std::span<const UnitPair> pairs, const Eigen::MatrixXd& Z, Family family,
                const BoostControl& control, std::span<const std::size_t> columns) {
  control.validate();
  check_inputs(pairs, Z);
  BoostPath path;
  standardize(Z, columns, path);
  run_boost(prepare(pairs), standardized_design(Z, path), family, control, path);
  return path;
}

std::vector<double> aic_path(const BoostPath& path) {
  std::vector<double> aic(path.risk.size());
  const auto n = static_cast<double>(path.n_obs);
  for (std::size_t m = 0; m < aic.size(); ++m)
    aic[m] = 2.0 * n * path.risk[m] + 2.0 * static_cast<double>(path.active_set_size[m]);
  return aic;
}

std::size_t stop_aic(const BoostPath& path) {
  if (path.risk.empty()) throw InterfaceError("stop_aic: empty path");
  return argmin_first(aic_path(path));
}

std::vector<std::size_t> cv_folds(std::size_t n_obs, std::size_t k, std::uint64_t seed) {
  std::vector<std::size_t> perm(n_obs);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = n_obs; i > 1; --i) std::swap(perm[i - 1], perm[rng.index(i)]);
  std::vector<std::size_t> fold(n_obs);
  for (std::size_t i = 0; i < n_obs; ++i) fold[perm[i]] = i % k;
  return fold;
}

std::vector<double> cv_risk_path(std::span<const UnitPair> pairs, const Eigen::MatrixXd& Z,
                                 Family family, const BoostControl& control,
                                 std::span<const std::size_t> fold_of_row,
                                 std::span<const std::size_t> columns, unsigned threads) {
  control.validate();
  check_inputs(pairs, Z);
  if (fold_of_row.size() != pairs.size()) throw InterfaceError("cv: fold assignment length mismatch");
  const std::size_t k = *std::max_element(fold_of_row.begin(), fold_of_row.end()) + 1;
  if (k < 2) throw ConfigError("cv: at least two folds are required");
  std::vector<std::vector<std::size_t>> test_rows(k), train_rows(k);
  for (std::size_t i = 0; i < fold_of_row.size(); ++i) {
    for (std::size_t f = 0; f < k; ++f) (f == fold_of_row[i] ? test_rows : train_rows)[f].push_back(i);
  }
  for (std::size_t f = 0; f < k; ++f) {
    if (test_rows[f].size() < 10)
      throw ConfigError("cv: fold " + std::to_string(f) + " has " + std::to_string(test_rows[f].size()) +
                        " observations (at least 10 required)");
  }

  BoostPath shared;
  standardize(Z, columns, shared);
  std::vector<std::vector<double>> fold_risk(k);
  parallel_for(k, threads, [&](std::size_t f) {
    BoostPath path = shared;
    const auto train_pp = prepare(pairs, train_rows[f]);
    const auto test_pp = prepare(pairs, test_rows[f]);
    const Eigen::MatrixXd X_train = standardized_design(Z, path, train_rows[f]);
    const Eigen::MatrixXd X_test = standardized_design(Z, path, test_rows[f]);
    HeldOut held{&test_pp, &X_test, &fold_risk[f]};
    run_boost(train_pp, X_train, family, control, path, &held);
  });

  std::vector<double> total(fold_risk[0].size(), 0.0);
  for (const auto& r : fold_risk)
    for (std::size_t m = 0; m < total.size(); ++m) total[m] += r[m];
  return total;
}

std::size_t stop_cv(std::span<const UnitPair> pairs, const Eigen::MatrixXd& Z, Family family,
                    const BoostControl& control, std::span<const std::size_t> columns, unsigned threads) {
  if (control.cv_folds < 2) throw ConfigError("cv_folds must be at least 2");
  const auto folds = cv_folds(pairs.size(), control.cv_folds, control.seed);
  return argmin_first(cv_risk_path(pairs, Z, family, control, folds, columns, threads));
}

std::vector<double> attributable_risk(const BoostPath& path, std::size_t upto) {
  if (upto > path.iterations()) throw InterfaceError("attributable_risk: iteration beyond path length");
  std::vector<double> r(path.n_cols, 0.0);
  for (std::size_t m = 1; m <= upto; ++m) r[path.selected[m - 1]] += path.risk[m - 1] - path.risk[m];
  return r;
}

std::vector<std::size_t> deselect(const BoostPath& path, std::size_t m_opt, const BoostControl& control) {
  const std::size_t upto = control.attribute_to_m_opt ? m_opt : path.iterations();
  const double total = path.risk[0] - path.risk[upto];
  std::vector<std::size_t> kept;
  const bool has_intercept = path.intercept >= 0;
  const auto intercept = static_cast<std::size_t>(path.intercept);
  if (!(total > 0.0)) {
    if (has_intercept) kept.push_back(intercept);
    return kept;
  }
  const auto r = attributable_risk(path, upto);
  for (std::size_t c : path.candidates) {
    const bool exempt = control.exempt_intercept && has_intercept && c == intercept;
    if (exempt || r[c] >= control.gamma * total) kept.push_back(c);
  }
  return kept;
}

std::size_t FittedPairCopula::active_set_size() const { return count_nonzero(beta); }

FittedPairCopula independence_model(std::size_t n_cols) {
  FittedPairCopula model;
  model.family = Family::Independence;
  model.beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_cols));
  model.risk_path = {0.0};
  return model;
}

FittedPairCopula fit_pair_family(std::span<const UnitPair> pairs, const Eigen::MatrixXd& Z,
                                 Family family, const BoostControl& control,
                                 const PairFitOptions& options) {
  control.validate();
  check_inputs(pairs, Z);
  const BoostPath path = boost(pairs, Z, family, control, options.allowed);
  const std::size_t m_opt = control.stopping == Stopping::AIC
                                ? stop_aic(path)
                                : stop_cv(pairs, Z, family, control, options.allowed, options.threads);
  std::vector<std::size_t> kept = options.deselection ? deselect(path, m_opt, control) : path.candidates;

  FittedPairCopula model;
  model.family = family;
  model.m_opt = m_opt;
  model.n_obs = pairs.size();
  model.kept = kept;
  if (kept == path.candidates) {
    model.beta = path.coefficients(m_opt);
    model.risk_path.assign(path.risk.begin(), path.risk.begin() + static_cast<std::ptrdiff_t>(m_opt) + 1);
  } else if (m_opt == 0 || kept.empty()) {
    model.beta = Eigen::VectorXd::Zero(Z.cols());
    model.risk_path.assign(1, path.risk[0]);
  } else {
    BoostControl refit_control = control;
    refit_control.m_stop = m_opt;
    const BoostPath refit = boost(pairs, Z, family, refit_control, kept);
    model.beta = refit.coefficients(m_opt);
    model.risk_path = refit.risk;
  }
  const double n = static_cast<double>(pairs.size());
  model.loglik = -n * model.risk_path.back();
  model.aic = -2.0 * model.loglik + 2.0 * static_cast<double>(model.active_set_size());
  return model;
}

FittedPairCopula fit_pair(std::span<const UnitPair> pairs, const Eigen::MatrixXd& Z,
                          const BoostControl& control, const PairFitOptions& options) {
  if (options.families.empty()) throw ConfigError("fit_pair: empty family set");
  control.validate();
  check_inputs(pairs, Z);
  const bool predictive = options.selection == FamilySelection::PredictiveRisk;
  std::size_t n_train = pairs.size();
  if (predictive) {
    if (!(options.holdout_fraction > 0.0 && options.holdout_fraction < 1.0))
      throw ConfigError("holdout_fraction must lie in (0, 1)");
    n_train = pairs.size() - static_cast<std::size_t>(std::floor(options.holdout_fraction * static_cast<double>(pairs.size())));
    if (n_train == pairs.size() || n_train == 0) throw ConfigError("fit_pair: holdout split leaves an empty part");
  }
  const auto train_pairs = pairs.first(n_train);
  const Eigen::MatrixXd train_Z = Z.topRows(static_cast<Eigen::Index>(n_train));

  const std::size_t nf = options.families.size();
  std::vector<FittedPairCopula> fits(nf);
  std::vector<CandidateSummary> summary(nf);
  PairFitOptions inner = options;
  inner.threads = 1;
  parallel_for(nf, options.threads, [&](std::size_t f) {
    summary[f].family = options.families[f];
    try {
      fits[f] = fit_pair_family(train_pairs, train_Z, options.families[f], control, inner);
      summary[f].ok = true;
      summary[f].aic = fits[f].aic;
      summary[f].loglik = fits[f].loglik;
      if (predictive) {
        summary[f].holdout_risk =
            mean_risk(fits[f], pairs.subspan(n_train), Z.bottomRows(Z.rows() - static_cast<Eigen::Index>(n_train)));
        if (!std::isfinite(summary[f].holdout_risk)) throw NumericError("non-finite holdout risk");
      }
    } catch (const EvaluationError& e) {
      summary[f].ok = false;
      summary[f].error = e.what();
    } catch (const NumericError& e) {
      summary[f].ok = false;
      summary[f].error = e.what();
    } catch (const DomainError& e) {
      summary[f].ok = false;
      summary[f].error = e.what();
    }
  });

  std::ptrdiff_t best = -1;
  for (std::size_t f = 0; f < nf; ++f) {
    if (!summary[f].ok) continue;
    if (best < 0) {
      best = static_cast<std::ptrdiff_t>(f);
      continue;
    }
    const auto& cur = summary[static_cast<std::size_t>(best)];
    bool better = false;
    switch (options.selection) {
      case FamilySelection::AIC: better = summary[f].aic < cur.aic; break;
      case FamilySelection::LogLik: better = summary[f].loglik > cur.loglik; break;
      case FamilySelection::PredictiveRisk: better = summary[f].holdout_risk < cur.holdout_risk; break;
    }
    if (better) best = static_cast<std::ptrdiff_t>(f);
  }
  if (best < 0) {
    std::ostringstream msg;
    msg << "fit_pair: every candidate family failed";
    for (const auto& s : summary) msg << "; " << family_name(s.family) << ": " << s.error;
    throw FitError(msg.str());
  }

  FittedPairCopula chosen = predictive
                                ? fit_pair_family(pairs, Z, options.families[static_cast<std::size_t>(best)], control, inner)
                                : std::move(fits[static_cast<std::size_t>(best)]);
  chosen.candidates = std::move(summary);
  return chosen;
}

double predict_eta(const FittedPairCopula& model, const Eigen::Ref<const Eigen::RowVectorXd>& z) {
  if (z.size() != model.beta.size())
    throw InterfaceError("predict: covariate row has " + std::to_string(z.size()) + " entries, model expects " +
                         std::to_string(model.beta.size()));
  return z.dot(model.beta.transpose());
}

std::vector<double> predict_tau(const FittedPairCopula& model, const Eigen::MatrixXd& Z) {
  if (Z.cols() != model.beta.size())
    throw InterfaceError("predict_tau: design has " + std::to_string(Z.cols()) + " columns, model expects " +
                         std::to_string(model.beta.size()));
  const Eigen::VectorXd eta = Z * model.beta;
  std::vector<double> tau(static_cast<std::size_t>(eta.size()));
  for (std::size_t i = 0; i < tau.size(); ++i) tau[i] = link_tau(eta(static_cast<Eigen::Index>(i)));
  return tau;
}

double mean_risk(const FittedPairCopula& model, std::span<const UnitPair> pairs, const Eigen::MatrixXd& Z) {
  check_inputs(pairs, Z);
  if (Z.cols() != model.beta.size()) throw InterfaceError("mean_risk: design width mismatch");
  const Eigen::VectorXd eta = Z * model.beta;
  double sum = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i)
    sum += pair_loss(model.family, prepare_pair(pairs[i].u1, pairs[i].u2), eta(static_cast<Eigen::Index>(i)));
  return sum / static_cast<double>(pairs.size());
}

}  // namespace condvine
