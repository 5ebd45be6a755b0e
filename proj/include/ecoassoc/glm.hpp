#pragma once

// Single-species generalized linear models fitted by Fisher scoring. Used to
// pre-train habitat weights and as the independent baseline the additive
// model reduces to when the association matrix is zero.

#include "ecoassoc/data.hpp"
#include "ecoassoc/distributions.hpp"
#include "ecoassoc/model.hpp"

namespace ecoassoc {

struct GlmOptions {
  int max_iterations = 100;
  double tolerance = 1e-10;
  /// Small ridge on the slopes (not the intercept); keeps separated
  /// Bernoulli fits finite.
  double ridge = 1e-6;
  bool estimate_dispersion = true;
};

struct GlmFit {
  Vector coef;                  // slopes, then intercept
  double log_dispersion = 0.0;  // log θ for NB, log σ² for normal, 0 otherwise
  double nll = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Design with covariates in the leading columns and an intercept column last.
Matrix glm_design(const Matrix &covariates);

/// Σ_k −log P(y_k | g⁻¹(x_k·coef + offset)).
double glm_nll(const Matrix &design, const Vector &y, const Vector &coef, FamilyKind family,
               double offset, double log_dispersion);

GlmFit fit_glm(const Matrix &design, const Vector &y, FamilyKind family, double offset = 0.0,
               const GlmOptions &options = {});

/// Family the habitat model of a given aggregation is pre-trained with:
/// presence/absence for hierarchical, the response family otherwise.
FamilyKind habitat_family(AggregationMode mode, FamilyKind family);

struct HabitatFit {
  HabitatModel habitat;
  Vector log_dispersion;
  Vector nll;
};

/// One GLM per species over `sites` (all when empty), each with its fixed
/// offset when the aggregation is additive.
HabitatFit fit_habitat_glms(const CommunityData &data, FamilyKind family, AggregationMode mode,
                            const Vector &offsets, const std::vector<int> &sites = {},
                            const GlmOptions &options = {});

} // namespace ecoassoc
