#pragma once

#include "ecoassoc/inference.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace ecoassoc {

enum class Criterion { aic, bic, ebic, cv };
enum class Metric { poisson_deviance, auc, accuracy };
std::string to_string(Criterion c);
std::string to_string(Metric m);
Criterion parse_criterion(std::string_view name);
Metric parse_metric(std::string_view name);

struct SelectionGrid {
  std::vector<std::size_t> dims;
  std::vector<double> lambdas{0.01, 0.015, 0.02, 0.025};
  Criterion criterion = Criterion::cv;
  int folds = 10;
  Metric metric = Metric::poisson_deviance;
  double ebic_gamma = 0.5;

  void validate() const;
  /// Powers of two up to m/2 (at least {1}).
  static std::vector<std::size_t> default_dims(std::size_t m);
  /// "default", "table" (λ 0.010–0.040) or "alpine" (d 2–32).
  static SelectionGrid preset(std::string_view name, std::size_t m);
};

void to_json(nlohmann::json &j, const SelectionGrid &g);
/// Missing fields take preset defaults for `m` species.
SelectionGrid grid_from_json(const nlohmann::json &j, std::size_t m);

/// AIC = 2k − 2logL, BIC = k ln n − 2logL, eBIC = BIC + 2γ k ln m.
double information_criterion(double log_likelihood, double k_params, double n_obs, Criterion kind,
                             double gamma = 0.5, std::size_t m_species = 1);

/// Latent components with some |P| or |Q| entry ≥ threshold.
std::size_t effective_dimension(const EmbeddingPair &emb, double threshold = 1e-5);

/// Habitat weights (unless frozen) + non-zero shared embedding entries +
/// dispersions + learned offsets + conditioning weights.
std::size_t parameter_count(const FittedModel &model);
extern const char *const kParameterCountRule;

/// Held-out score of a model on `sites`; species absent from those sites
/// are skipped and appended to `excluded`.
double holdout_score(const FittedModel &model, const CommunityData &data, const std::vector<int> &sites,
                     Metric metric, std::vector<int> *excluded = nullptr);

bool higher_is_better(Metric metric);

struct FoldScore {
  int fold = 0;
  double score = 0.0;
  std::size_t effective_dimension = 0;
  std::vector<int> excluded_species;
};

struct CellResult {
  std::size_t dim = 0;
  double lambda = 0.0;
  std::vector<FoldScore> folds;
  double mean_score = 0.0;
  std::size_t parameters = 0; // information criteria only
};

struct SelectionReport {
  SelectionGrid grid;
  std::vector<CellResult> cells;
  std::size_t best = 0;
};

/// Grid search. The dimension of `spec` is replaced by each grid value and
/// λ1 of `config` by each λ.
SelectionReport select_model(const CommunityData &data, const SelectionGrid &grid, const ModelSpec &spec,
                             const TrainConfig &config);

/// k-fold cross-validation over the grid; same as select_model with
/// criterion cv.
SelectionReport cross_validate(const CommunityData &data, const SelectionGrid &grid, const ModelSpec &spec,
                               const TrainConfig &config);

std::string selection_csv(const SelectionReport &report);
nlohmann::json selection_summary(const SelectionReport &report);

} // namespace ecoassoc
