#pragma once

#include "ecoassoc/associations.hpp"
#include "ecoassoc/data.hpp"
#include "ecoassoc/model.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ecoassoc {

enum class OptimizerKind { sgd_momentum, adam };
std::string to_string(OptimizerKind k);
OptimizerKind parse_optimizer(std::string_view name);

struct TrainConfig {
  OptimizerKind optimizer = OptimizerKind::adam;
  double learning_rate = 0.01;
  double momentum = 0.8;
  int batch_size = 16; // sites per mini-batch
  int max_epochs = 200;
  int patience = 5;
  double tolerance = 1e-3;
  double lambda_l1 = 0.0;
  double lambda_l2 = 0.0;
  bool non_negative = false;
  bool share_groups = false;
  double negative_subsample = 1.0;
  std::uint64_t seed = 0;
  bool freeze_habitat = false;
  bool learn_offsets = false;
  /// Fraction of sites held out for early stopping when no split is given.
  double validation_fraction = 0.1;

  void validate() const;
};

void to_json(nlohmann::json &j, const TrainConfig &c);
void from_json(const nlohmann::json &j, TrainConfig &c);

/// Structural choices fixed before training.
struct ModelSpec {
  FamilyKind family = FamilyKind::negative_binomial;
  AggregationMode mode = AggregationMode::additive;
  BioticContextSpec context;
  std::size_t dim = 2;
  /// Start habitat weights (and dispersions) from per-species GLMs.
  bool pretrain_habitat = false;
};

FittedModel initialize(const CommunityData &data, const ModelSpec &spec, const TrainConfig &config,
                       Warnings *warnings = nullptr);

/// λ1·(Σ|P| + Σ|Q|) + λ2·(ΣP² + ΣQ²).
double penalty(const EmbeddingPair &emb, double lambda_l1, double lambda_l2);

/// Training objective: mean per-site nll over `sites` (all when empty) plus
/// the elastic-net penalty.
double objective(const FittedModel &model, const CommunityData &data, const TrainConfig &config,
                 const std::vector<int> &sites = {});

struct FitOptions {
  std::optional<std::vector<int>> train_sites;
  std::optional<std::vector<int>> validation_sites;
  Warnings *warnings = nullptr;
};

FittedModel fit(const CommunityData &data, FittedModel model, const TrainConfig &config,
                const FitOptions &options = {});

/// Worst relative error between analytic and central-difference gradients of
/// Σ pair losses + λ2 penalty over every trainable parameter. The relative
/// error of an entry is |a − f| / max(|a|, |f|, 1e-3).
double gradient_check(const FittedModel &model, const CommunityData &data, double h = 1e-5,
                      double lambda_l2 = 0.0);

/// Maps each species to a shared embedding row by group label.
std::vector<int> group_rows(const std::vector<int> &labels);

} // namespace ecoassoc
