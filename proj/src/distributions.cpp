#include "ecoassoc/distributions.hpp"

#include <boost/math/special_functions/digamma.hpp>

#include <cmath>
#include <numbers>

namespace ecoassoc {

std::string to_string(FamilyKind k) {
  switch (k) {
  case FamilyKind::bernoulli: return "bernoulli";
  case FamilyKind::poisson: return "poisson";
  case FamilyKind::negative_binomial: return "negative_binomial";
  case FamilyKind::zero_inflated_nb: return "zero_inflated_nb";
  case FamilyKind::normal: return "normal";
  }
  return "?";
}

FamilyKind parse_family(std::string_view name) {
  if (name == "bernoulli") return FamilyKind::bernoulli;
  if (name == "poisson") return FamilyKind::poisson;
  if (name == "negative_binomial" || name == "nb") return FamilyKind::negative_binomial;
  if (name == "zero_inflated_nb" || name == "zinb") return FamilyKind::zero_inflated_nb;
  if (name == "normal") return FamilyKind::normal;
  throw ValidationError("unknown family '" + std::string(name) + "'");
}

bool has_dispersion(FamilyKind k) {
  return k == FamilyKind::negative_binomial || k == FamilyKind::zero_inflated_nb ||
         k == FamilyKind::normal;
}

bool is_count_family(FamilyKind k) {
  return k == FamilyKind::poisson || k == FamilyKind::negative_binomial ||
         k == FamilyKind::zero_inflated_nb;
}

void ResponseFamily::validate() const {
  if (has_dispersion(kind)) {
    if (!dispersion || !(*dispersion > 0.0) || !std::isfinite(*dispersion))
      throw ValidationError(to_string(kind) + " needs a strictly positive dispersion");
  } else if (dispersion) {
    throw ValidationError(to_string(kind) + " takes no dispersion");
  }
}

ResponseFamily ResponseFamily::of(FamilyKind k, double dispersion) {
  ResponseFamily f{k, std::nullopt};
  if (has_dispersion(k))
    f.dispersion = dispersion;
  return f;
}

double sigmoid(double x) {
  if (x >= 0.0)
    return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double inverse_link(FamilyKind k, double eta) {
  eta = clamp_eta(eta);
  switch (k) {
  case FamilyKind::bernoulli: return sigmoid(eta);
  case FamilyKind::normal: return eta;
  default: return std::exp(eta);
  }
}

namespace {

void require_count(double y, const char *family) {
  if (!(y >= 0.0) || y != std::floor(y))
    throw DomainError(std::string(family) + ": y must be a non-negative integer");
}

double theta_of(const ResponseFamily &f) {
  if (!f.dispersion || !(*f.dispersion > 0.0))
    throw DomainError(to_string(f.kind) + ": missing or non-positive dispersion");
  return *f.dispersion;
}

} // namespace

double nb_nll(double y, double mean, double theta) {
  return -(std::lgamma(y + theta) - std::lgamma(theta) - std::lgamma(y + 1.0) +
           theta * (std::log(theta) - std::log(theta + mean)) +
           (y > 0.0 ? y * (std::log(mean) - std::log(theta + mean)) : 0.0));
}

double nll(const ResponseFamily &family, double y, double mean) {
  switch (family.kind) {
  case FamilyKind::bernoulli:
    if (!(mean > 0.0 && mean < 1.0))
      throw DomainError("bernoulli: mean must lie in (0,1)");
    if (y != 0.0 && y != 1.0)
      throw DomainError("bernoulli: y must be 0 or 1");
    return y == 1.0 ? -std::log(mean) : -std::log1p(-mean);
  case FamilyKind::poisson:
    if (!(mean > 0.0))
      throw DomainError("poisson: mean must be positive");
    require_count(y, "poisson");
    return mean - y * std::log(mean) + std::lgamma(y + 1.0);
  case FamilyKind::negative_binomial:
  case FamilyKind::zero_inflated_nb:
    if (!(mean > 0.0))
      throw DomainError("negative_binomial: mean must be positive");
    require_count(y, "negative_binomial");
    return nb_nll(y, mean, theta_of(family));
  case FamilyKind::normal: {
    double var = theta_of(family);
    return 0.5 * std::log(2.0 * std::numbers::pi * var) + (y - mean) * (y - mean) / (2.0 * var);
  }
  }
  return 0.0;
}

EtaLoss eta_loss(FamilyKind kind, double y, double eta, double dispersion) {
  eta = clamp_eta(eta);
  EtaLoss out;
  switch (kind) {
  case FamilyKind::bernoulli:
    out.value = softplus(eta) - y * eta;
    out.d_eta = sigmoid(eta) - y;
    break;
  case FamilyKind::poisson: {
    double mu = std::exp(eta);
    out.value = mu - y * eta + std::lgamma(y + 1.0);
    out.d_eta = mu - y;
    break;
  }
  case FamilyKind::negative_binomial:
  case FamilyKind::zero_inflated_nb: {
    const double th = dispersion;
    const double mu = std::exp(eta);
    out.value = nb_nll(y, mu, th);
    out.d_eta = th * (mu - y) / (th + mu);
    const double d_theta = -(boost::math::digamma(y + th) - boost::math::digamma(th) +
                             std::log(th) - std::log(th + mu) + (mu - y) / (th + mu));
    out.d_log_dispersion = th * d_theta;
    break;
  }
  case FamilyKind::normal: {
    const double var = dispersion;
    const double r = y - eta;
    out.value = 0.5 * std::log(2.0 * std::numbers::pi * var) + r * r / (2.0 * var);
    out.d_eta = -r / var;
    out.d_log_dispersion = 0.5 - r * r / (2.0 * var);
    break;
  }
  }
  return out;
}

double nll_gradient(const ResponseFamily &family, double y, double eta) {
  double disp = family.dispersion.value_or(1.0);
  return eta_loss(family.kind, y, eta, disp).d_eta;
}

double zinb_nll(double p_present, double nb_mean, double theta, double y) {
  if (!(p_present >= 0.0 && p_present <= 1.0))
    throw DomainError("zinb: p_present must lie in [0,1]");
  if (!(nb_mean > 0.0) || !(theta > 0.0))
    throw DomainError("zinb: mean and theta must be positive");
  require_count(y, "zinb");
  if (y > 0.0) {
    if (p_present == 0.0)
      return std::numeric_limits<double>::infinity();
    return -std::log(p_present) + nb_nll(y, nb_mean, theta);
  }
  const double f0 = std::exp(theta * (std::log(theta) - std::log(theta + nb_mean)));
  return -std::log((1.0 - p_present) + p_present * f0);
}

ZinbLoss zinb_loss(double y, double eta_presence, double eta_abundance, double theta) {
  eta_presence = clamp_eta(eta_presence);
  eta_abundance = clamp_eta(eta_abundance);
  const double p = clamp_prob(sigmoid(eta_presence));
  const double mu = std::exp(eta_abundance);
  ZinbLoss out;
  if (y > 0.0) {
    auto nb = eta_loss(FamilyKind::negative_binomial, y, eta_abundance, theta);
    out.value = softplus(-eta_presence) + nb.value;
    out.d_eta_presence = -(1.0 - sigmoid(eta_presence));
    out.d_eta_abundance = nb.d_eta;
    out.d_log_theta = nb.d_log_dispersion;
    return out;
  }
  const double log_ratio = std::log(theta) - std::log(theta + mu);
  const double f0 = std::exp(theta * log_ratio);
  const double mass = 1.0 - p * (1.0 - f0);
  out.value = -std::log(mass);
  out.d_eta_presence = p * (1.0 - p) * (1.0 - f0) / mass;
  out.d_eta_abundance = p * f0 * theta * mu / ((theta + mu) * mass);
  const double df0_dtheta = f0 * (log_ratio + mu / (theta + mu));
  out.d_log_theta = -p * theta * df0_dtheta / mass;
  return out;
}

double poisson_deviance(std::span<const double> y, std::span<const double> mu) {
  if (y.size() != mu.size())
    throw ValidationError("poisson_deviance: length mismatch");
  double dev = 0.0;
  for (std::size_t t = 0; t < y.size(); ++t) {
    if (!(mu[t] > 0.0))
      throw DomainError("poisson_deviance: mu must be positive");
    if (y[t] > 0.0)
      dev += y[t] * std::log(y[t] / mu[t]) - (y[t] - mu[t]);
    else
      dev += mu[t];
  }
  return 2.0 * dev;
}

} // namespace ecoassoc
