#pragma once

#include "ecoassoc/types.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace ecoassoc {

enum class FamilyKind { bernoulli, poisson, negative_binomial, zero_inflated_nb, normal };

std::string to_string(FamilyKind k);
FamilyKind parse_family(std::string_view name);

/// Families with a per-species dispersion: NB/ZINB (inverse dispersion θ,
/// variance m + m²/θ) and normal (variance).
bool has_dispersion(FamilyKind k);
bool is_count_family(FamilyKind k);

struct ResponseFamily {
  FamilyKind kind = FamilyKind::poisson;
  std::optional<double> dispersion;

  void validate() const;
  static ResponseFamily of(FamilyKind k, double dispersion = 1.0);
};

inline constexpr double kEtaClamp = 30.0;
inline constexpr double kProbFloor = 1e-12;

inline double clamp_eta(double eta) {
  return eta < -kEtaClamp ? -kEtaClamp : (eta > kEtaClamp ? kEtaClamp : eta);
}
inline double clamp_prob(double p) {
  return p < kProbFloor ? kProbFloor : (p > 1.0 - kProbFloor ? 1.0 - kProbFloor : p);
}
double sigmoid(double x);
/// log(1 + exp(x)) without overflow.
double softplus(double x);

/// Inverse canonical link applied to a clamped predictor.
double inverse_link(FamilyKind k, double eta);

/// −log P(y | mean, dispersion). Throws DomainError outside the support.
double nll(const ResponseFamily &family, double y, double mean);

/// d nll / d eta on the canonical link scale.
double nll_gradient(const ResponseFamily &family, double y, double eta);

/// Loss of one observation as a function of the link-scale predictor, with
/// its derivatives. `dispersion` is θ for NB and the variance for normal;
/// `d_log_dispersion` is the derivative with respect to its logarithm.
struct EtaLoss {
  double value = 0.0;
  double d_eta = 0.0;
  double d_log_dispersion = 0.0;
};
EtaLoss eta_loss(FamilyKind kind, double y, double eta, double dispersion);

double nb_nll(double y, double mean, double theta);

/// Zero-inflated NB: −log[(1−p)·1{y=0} + p·NB(y | mean, θ)].
double zinb_nll(double p_present, double nb_mean, double theta, double y);

struct ZinbLoss {
  double value = 0.0;
  double d_eta_presence = 0.0;  // presence predictor, p = σ(eta)
  double d_eta_abundance = 0.0; // abundance predictor, mean = exp(eta)
  double d_log_theta = 0.0;
};
ZinbLoss zinb_loss(double y, double eta_presence, double eta_abundance, double theta);

/// 2·Σ [y·ln(y/μ) − (y − μ)], the y = 0 term being 2μ.
double poisson_deviance(std::span<const double> y, std::span<const double> mu);

} // namespace ecoassoc
