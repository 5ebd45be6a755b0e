#include "ecoassoc/glm.hpp"

#include <boost/math/tools/minima.hpp>

#include <cmath>
#include <limits>

namespace ecoassoc {

namespace {

constexpr double kLogDispLo = -8.0;
constexpr double kLogDispHi = 12.0;

/// Expected information weight (dμ/dη)² / Var(y) at η.
double fisher_weight(FamilyKind family, double eta, double disp) {
  eta = clamp_eta(eta);
  switch (family) {
  case FamilyKind::bernoulli: {
    const double p = sigmoid(eta);
    return std::max(p * (1.0 - p), 1e-12);
  }
  case FamilyKind::poisson:
    return std::exp(eta);
  case FamilyKind::negative_binomial:
  case FamilyKind::zero_inflated_nb: {
    const double mu = std::exp(eta);
    return disp * mu / (disp + mu);
  }
  case FamilyKind::normal:
    return 1.0 / disp;
  }
  return 1.0;
}

double total_nll(const Matrix &X, const Vector &y, const Vector &coef, FamilyKind family, double offset,
                 double disp) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < X.rows(); ++k)
    s += eta_loss(family, y(k), X.row(k).dot(coef) + offset, disp).value;
  return s;
}

double penalised(const Matrix &X, const Vector &y, const Vector &coef, FamilyKind family, double offset,
                 double disp, double ridge) {
  return total_nll(X, y, coef, family, offset, disp) + 0.5 * ridge * coef.head(coef.size() - 1).squaredNorm();
}

} // namespace

Matrix glm_design(const Matrix &covariates) {
  Matrix X(covariates.rows(), covariates.cols() + 1);
  X.leftCols(covariates.cols()) = covariates;
  X.col(covariates.cols()).setOnes();
  return X;
}

double glm_nll(const Matrix &design, const Vector &y, const Vector &coef, FamilyKind family, double offset,
               double log_dispersion) {
  return total_nll(design, y, coef, family, offset, has_dispersion(family) ? std::exp(log_dispersion) : 1.0);
}

GlmFit fit_glm(const Matrix &X, const Vector &y, FamilyKind family, double offset, const GlmOptions &opt) {
  if (X.rows() != y.size())
    throw ValidationError("fit_glm: design has " + std::to_string(X.rows()) + " rows, response " +
                          std::to_string(y.size()));
  const auto q = X.cols();
  GlmFit fit;
  fit.coef = Vector::Zero(q);
  const bool with_disp = has_dispersion(family) && opt.estimate_dispersion;
  if (family == FamilyKind::normal && y.size() > 0) {
    fit.coef(q - 1) = y.mean() - offset;
    fit.log_dispersion = std::log(std::max((y.array() - y.mean()).square().mean(), 1e-8));
  } else if (family != FamilyKind::bernoulli && y.size() > 0) {
    fit.coef(q - 1) = std::log(std::max(y.mean(), 1e-8)) - offset;
  } else if (family == FamilyKind::bernoulli && y.size() > 0) {
    const double p = std::clamp(y.mean(), 1e-6, 1.0 - 1e-6);
    fit.coef(q - 1) = std::log(p / (1.0 - p)) - offset;
  }
  double disp = std::exp(fit.log_dispersion);
  double current = penalised(X, y, fit.coef, family, offset, disp, opt.ridge);

  Vector ridge = Vector::Constant(q, opt.ridge);
  ridge(q - 1) = 0.0;
  for (fit.iterations = 1; fit.iterations <= opt.max_iterations; ++fit.iterations) {
    Vector grad = Vector::Zero(q);
    Matrix info = Matrix::Zero(q, q);
    for (Eigen::Index k = 0; k < X.rows(); ++k) {
      const double eta = X.row(k).dot(fit.coef) + offset;
      grad.noalias() += eta_loss(family, y(k), eta, disp).d_eta * X.row(k).transpose();
      info.noalias() += fisher_weight(family, eta, disp) * X.row(k).transpose() * X.row(k);
    }
    grad.array() += ridge.array() * fit.coef.array();
    info.diagonal() += ridge + Vector::Constant(q, 1e-10);
    const Vector step = info.ldlt().solve(grad);

    double t = 1.0;
    Vector next = fit.coef - step;
    double value = penalised(X, y, next, family, offset, disp, opt.ridge);
    while (!(value <= current) && t > 1e-10) {
      t *= 0.5;
      next = fit.coef - t * step;
      value = penalised(X, y, next, family, offset, disp, opt.ridge);
    }
    if (value <= current)
      fit.coef = next;
    else
      value = current;

    if (with_disp) {
      auto objective = [&](double ld) { return total_nll(X, y, fit.coef, family, offset, std::exp(ld)); };
      const auto best = boost::math::tools::brent_find_minima(objective, kLogDispLo, kLogDispHi, 40);
      fit.log_dispersion = best.first;
      disp = std::exp(fit.log_dispersion);
      value = penalised(X, y, fit.coef, family, offset, disp, opt.ridge);
    }
    const double change = current - value;
    current = value;
    if (std::abs(change) <= opt.tolerance * (1.0 + std::abs(current))) {
      fit.converged = true;
      break;
    }
  }
  if (!std::isfinite(current))
    throw NumericalError("fit_glm: non-finite likelihood");
  fit.nll = total_nll(X, y, fit.coef, family, offset, disp);
  return fit;
}

FamilyKind habitat_family(AggregationMode mode, FamilyKind family) {
  return mode == AggregationMode::hierarchical ? FamilyKind::bernoulli : family;
}

HabitatFit fit_habitat_glms(const CommunityData &data, FamilyKind family, AggregationMode mode,
                            const Vector &offsets, const std::vector<int> &sites, const GlmOptions &options) {
  const auto rows = sites.empty() ? [&] {
    std::vector<int> all(data.n_sites());
    for (std::size_t k = 0; k < all.size(); ++k)
      all[k] = static_cast<int>(k);
    return all;
  }()
                                  : sites;
  const Matrix X = glm_design(data.covariates(rows, Eigen::all));
  const FamilyKind fam = habitat_family(mode, family);
  const std::size_t m = data.n_species();
  HabitatFit out{HabitatModel::zeros(m, data.n_covariates()), Vector::Zero(static_cast<Eigen::Index>(m)),
                 Vector::Zero(static_cast<Eigen::Index>(m))};
  for (std::size_t i = 0; i < m; ++i) {
    Vector y(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t t = 0; t < rows.size(); ++t) {
      const double v = data.abundance(rows[t], static_cast<Eigen::Index>(i));
      y(static_cast<Eigen::Index>(t)) = mode == AggregationMode::hierarchical ? (v > 0 ? 1.0 : 0.0) : v;
    }
    const double off = mode == AggregationMode::additive ? offsets(static_cast<Eigen::Index>(i)) : 0.0;
    const GlmFit f = fit_glm(X, y, fam, off, options);
    out.habitat.weights.row(static_cast<Eigen::Index>(i)) = f.coef.transpose();
    out.log_dispersion(static_cast<Eigen::Index>(i)) = has_dispersion(fam) ? f.log_dispersion : 0.0;
    out.nll(static_cast<Eigen::Index>(i)) = f.nll;
  }
  return out;
}

} // namespace ecoassoc
