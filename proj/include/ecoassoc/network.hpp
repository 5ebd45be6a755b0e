#pragma once

#include "ecoassoc/data.hpp"
#include "ecoassoc/evaluation.hpp"
#include "ecoassoc/inference.hpp"

#include <string>
#include <vector>

namespace ecoassoc {

struct AssociationNetwork {
  Matrix strengths; // diagonal zero
  IntMatrix labels; // Label values
  double eps_pos = 0.05;
  double eps_neg = 0.05;

  static AssociationNetwork from_strengths(Matrix strengths, double eps_pos, double eps_neg);
};

/// Positive when a > ε⁺, negative when a < −ε⁻, neutral otherwise; the
/// diagonal is neutral.
IntMatrix discretize(const Matrix &strengths, double eps_pos, double eps_neg);

struct BootstrapResult {
  Matrix strengths; // mean over replicates where kept, 0 elsewhere
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> kept;
  Matrix ci_low;
  Matrix ci_high;
  std::size_t replicates = 0;
  Warnings warnings;
};

/// Percentile-interval filter over replicate association matrices.
BootstrapResult bootstrap_filter(const std::vector<Matrix> &replicates, double ci = 0.95);

/// Refits the model (λ1 = 0) on B site resamples and filters with
/// bootstrap_filter. Replicates that fail numerically are dropped.
BootstrapResult bootstrap_network(const CommunityData &data, const ModelSpec &spec, TrainConfig config, int B,
                                  double ci = 0.95, std::uint64_t seed = 0);

struct GroupStructure {
  std::vector<int> response_groups;
  std::vector<int> effect_groups;
  std::vector<int> modules;
};

/// Ward agglomerative clustering (Euclidean) of the rows of `x`, cut at k
/// clusters. Labels numbered by first appearance.
std::vector<int> ward_clusters(const Matrix &x, int k);

/// Response groups cluster rows, effect groups cluster columns.
GroupStructure coclusters(const Matrix &strengths, int n_row_groups, int n_col_groups);

struct Communities {
  std::vector<int> labels;
  double modularity = 0.0;
};

/// Symmetric weights w_ij = max(|a_ij|, |a_ji|), zero diagonal.
Matrix modularity_weights(const Matrix &strengths);

/// Newman modularity of a partition of a weighted undirected graph.
double modularity(const Matrix &weights, const std::vector<int> &labels);

/// Greedy agglomeration merging the pair with the largest modularity gain
/// while the gain is positive.
Communities modularity_communities(const Matrix &strengths);

struct SummaryEdge {
  int effect_group = 0;   // source
  int response_group = 0; // target
  int label = 0;
  double proportion = 0.0;
  std::size_t positive = 0;
  std::size_t negative = 0;
};

/// Group-level signed edges; pairs with no non-neutral member pair are left out.
std::vector<SummaryEdge> summary_network(const IntMatrix &labels, const GroupStructure &groups);

std::string adjacency_csv(const Matrix &strengths, const std::vector<std::string> &ids);
std::string edge_list_csv(const AssociationNetwork &net, const std::vector<std::string> &ids);
std::string summary_csv(const std::vector<SummaryEdge> &edges);
std::string groups_csv(const GroupStructure &groups, const std::vector<std::string> &ids);
std::string to_dot(const AssociationNetwork &net, const std::vector<std::string> &ids,
                   const std::vector<int> &modules);

} // namespace ecoassoc
