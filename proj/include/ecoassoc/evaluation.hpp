#pragma once

#include "ecoassoc/associations.hpp"
#include "ecoassoc/data.hpp"
#include "ecoassoc/stats.hpp"

#include <array>
#include <json.hpp>
#include <optional>
#include <string>

namespace ecoassoc {

/// Association class labels stored in IntMatrix cells.
enum Label : int { negative = -1, neutral = 0, positive = 1 };

struct RaiResult {
  double mean = 0.0;
  double std = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t n = 0;
};

/// Relative abundance index of source j on target i; absent when the two
/// species are never present together.
std::optional<RaiResult> rai(const CommunityData &data, std::size_t source, std::size_t target);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;   // true members
  std::size_t predicted = 0; // predicted members
  std::optional<double> pr_auc;
};

struct ClassificationReport {
  ClassMetrics negative, neutral, positive;
  double accuracy = 0.0;
  IntMatrix confusion; // 3x3, rows truth (−,0,+), columns prediction
  std::size_t pairs = 0;

  const ClassMetrics &of(Label l) const;
};

/// One-vs-rest metrics over ordered off-diagonal pairs. When `strengths` is
/// given, PR-AUC is added for the positive and negative classes.
ClassificationReport classify_associations(const IntMatrix &predicted, const IntMatrix &truth,
                                           const Matrix *strengths = nullptr);

/// Trapezoidal area under the precision-recall curve obtained by ranking
/// pairs by sign·strength; `relevant` marks the class members.
std::optional<double> pr_auc(std::span<const double> scores, std::span<const int> relevant);

struct BinaryMetrics {
  double accuracy = 0.0;
  std::optional<double> auc;
  double f2 = 0.0;
  double tss = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double precision = 0.0;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

/// Edge (i,j) is predicted when strength(i,j) > threshold; AUC ranks the raw
/// strengths. Diagonal excluded.
BinaryMetrics binary_structure_metrics(const Matrix &strengths, const IntMatrix &reference, double threshold);

/// Cosine similarity; 0 when either vector is zero.
double cosine(const Eigen::Ref<const Eigen::RowVectorXd> &a, const Eigen::Ref<const Eigen::RowVectorXd> &b);

/// Within-group versus between-group cosine similarities of the rows of `emb`.
/// Absent with fewer than two groups or no within-group pairs.
std::optional<stats::MannWhitney> embedding_group_test(const Matrix &emb, const std::vector<int> &groups,
                                                       Warnings *warnings = nullptr);

struct Correlation {
  double r = 0.0;
  double p = 1.0;
};

/// Pearson correlation between row cosine similarities of `emb` and `target`
/// over unordered pairs; two-sided p from species-label permutations.
std::optional<Correlation> similarity_correlation(const Matrix &emb, const Matrix &target,
                                                  int permutations = 10000, std::uint64_t seed = 0);

/// Target similarity matrices.
Matrix niche_similarity(const Vector &optima);
Matrix shared_prey_jaccard(const IntMatrix &adjacency);

/// Index (0..bins−1) of each value among equal-frequency bins; ties share a bin.
std::vector<int> quantile_bins(std::span<const double> x, int bins);

/// Plug-in mutual information (nats) between two discrete labelings.
double mutual_information(const std::vector<int> &a, const std::vector<int> &b);

/// t x d table of MI between each trait and each embedding dimension.
Matrix trait_embedding_mi(const Matrix &traits, const Matrix &emb, int bins = 4, Warnings *warnings = nullptr);

void to_json(nlohmann::json &j, const ClassMetrics &m);
void to_json(nlohmann::json &j, const ClassificationReport &r);
void to_json(nlohmann::json &j, const BinaryMetrics &m);

} // namespace ecoassoc
