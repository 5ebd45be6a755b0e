#pragma once

#include "ecoassoc/associations.hpp"
#include "ecoassoc/data.hpp"
#include "ecoassoc/distributions.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ecoassoc {

/// Per-species linear habitat scores over preprocessed covariates; the last
/// column is the intercept.
struct HabitatModel {
  Matrix weights; // m x (p+1)

  static HabitatModel zeros(std::size_t m, std::size_t p);
  std::size_t n_covariates() const { return static_cast<std::size_t>(weights.cols()) - 1; }
};

/// η^A = w_i · (x_k, 1).
double abiotic_predictor(const HabitatModel &hab, std::size_t species,
                         const Eigen::Ref<const Vector> &covariates);

enum class AggregationMode { additive, multiplicative, hierarchical };
std::string to_string(AggregationMode m);
AggregationMode parse_mode(std::string_view name);

/// Throws ValidationError for combinations the aggregation cannot express:
/// multiplicative is Bernoulli only, hierarchical is ZINB only, additive
/// takes any single-component family.
void check_mode_family(AggregationMode mode, FamilyKind family);

struct ConditionalMean {
  double mean = 0.0;           // expected y
  double p_present = 1.0;      // hierarchical occupancy σ(η^A)
  double abundance_mean = 0.0; // hierarchical abundance when present
};

ConditionalMean conditional_mean(AggregationMode mode, FamilyKind family, double eta_abiotic,
                                 double eta_biotic);

/// Loss of one (site, species) observation and its derivatives with respect
/// to both predictors and the log-dispersion.
struct PairLoss {
  double value = 0.0;
  double d_abiotic = 0.0;
  double d_biotic = 0.0;
  double d_log_dispersion = 0.0;
};
PairLoss pair_loss(AggregationMode mode, FamilyKind family, double y, double eta_abiotic,
                   double eta_biotic, double dispersion);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;
};

struct FittedModel {
  HabitatModel habitat;
  EmbeddingPair emb;
  Vector offsets;        // link scale
  Vector log_dispersion; // per species; zeros for families without dispersion
  FamilyKind family = FamilyKind::poisson;
  AggregationMode mode = AggregationMode::additive;
  BioticContextSpec context;
  /// Row of the shared embedding parameters used by each species (identity
  /// unless embeddings are shared within groups).
  std::vector<int> embedding_rows;
  bool non_negative = false;
  bool habitat_frozen = false;
  bool offsets_learned = false;
  std::vector<EpochLog> training_log;
  std::uint64_t seed = 0;

  std::size_t n_species() const { return emb.n_species(); }
  std::size_t dim() const { return emb.dim(); }
  double dispersion(std::size_t i) const;
  ResponseFamily family_of(std::size_t i) const;
  void validate() const;
  /// Checks the model can be evaluated on `data`.
  void check_compatible(const CommunityData &data) const;
};

using PairList = std::vector<std::pair<int, int>>; // (site, species)

/// Σ over pairs of the conditional nll, with contexts built from the observed
/// abundances. Evaluated pair by pair through the definitional path
/// (biotic_predictor); see kernels.hpp for the vectorised sweep.
double model_nll(const FittedModel &model, const CommunityData &data, const PairList &pairs);
double model_nll(const FittedModel &model, const CommunityData &data);

struct Prediction {
  Matrix mean;                     // n x m expected values
  std::optional<Matrix> p_present; // hierarchical only
  std::optional<Matrix> abundance_mean;
};

Prediction predict(const FittedModel &model, const CommunityData &data);

} // namespace ecoassoc
