#pragma once

#include "ecoassoc/data.hpp"
#include "ecoassoc/types.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ecoassoc {

/// Response (rows ρ_i) and effect (rows α_j) embeddings. The directed
/// association matrix is A = P Qᵀ, a_ij being the influence of source j on
/// target i.
struct EmbeddingPair {
  Matrix response; // m x d
  Matrix effect;   // m x d

  EmbeddingPair() = default;
  EmbeddingPair(Matrix p, Matrix q) : response(std::move(p)), effect(std::move(q)) {}
  static EmbeddingPair zeros(std::size_t m, std::size_t d);

  std::size_t n_species() const { return static_cast<std::size_t>(response.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(response.cols()); }
  void validate(bool non_negative = false) const;

  Matrix association_matrix() const { return response * effect.transpose(); }
};

double association_strength(const EmbeddingPair &emb, std::size_t target, std::size_t source);

enum class ContextVariant { basic, conditioned, temporal, spatial };
std::string to_string(ContextVariant v);
ContextVariant parse_context_variant(std::string_view name);

struct BioticContextSpec {
  ContextVariant variant = ContextVariant::basic;
  /// (p+1) x d; rows map (covariates, 1) to the per-site weight β_k.
  std::optional<Matrix> conditioning_weights;
  std::optional<double> radius;
  std::optional<double> decay;

  void validate(const CommunityData &data, std::size_t dim) const;
  /// W = 0 except an all-ones intercept row, i.e. β_k = 1 everywhere.
  static Matrix neutral_conditioning(std::size_t n_covariates, std::size_t dim);
};

struct ContextMember {
  int species;
  int site;
  double weight;
  bool operator==(const ContextMember &) const = default;
};

/// Who bears on target i at site k, with what weight.
std::vector<ContextMember> biotic_context_members(const CommunityData &data, std::size_t site,
                                                  std::size_t target, const BioticContextSpec &spec);

/// β_k = Wᵀ(v_k, 1); ones for the non-conditioned variants.
Vector conditioning_vector(const CommunityData &data, std::size_t site, const BioticContextSpec &spec,
                           std::size_t dim);

/// Aggregated effect z_ki of the biotic context.
Vector context_effect(const CommunityData &data, std::size_t site, std::size_t target,
                      const EmbeddingPair &emb, const BioticContextSpec &spec);

/// η^B_ki = o_i + ρ_i · z_ki.
double biotic_predictor(const CommunityData &data, std::size_t site, std::size_t target,
                        const EmbeddingPair &emb, const Vector &offsets, const BioticContextSpec &spec);

/// Precomputed linear form of every context: z_ki = β_k ⊙ Σ_j coef_kij α_j.
/// Contexts are built from observed data, so they are constant during fitting.
class ContextTable {
public:
  struct Entry {
    int source;
    double coef;
  };

  ContextTable() = default;
  ContextTable(const CommunityData &data, const BioticContextSpec &spec);

  std::size_t n_sites() const { return n_sites_; }
  std::size_t n_species() const { return n_species_; }
  std::span<const Entry> entries(std::size_t site, std::size_t target) const {
    const std::size_t cell = site * n_species_ + target;
    return {entries_.data() + start_[cell], start_[cell + 1] - start_[cell]};
  }
  /// Rows (covariates, 1) used by the conditioned variant; empty otherwise.
  const Matrix &conditioning_design() const { return design_; }
  bool conditioned() const { return conditioned_; }

private:
  std::size_t n_sites_ = 0;
  std::size_t n_species_ = 0;
  std::vector<std::size_t> start_;
  std::vector<Entry> entries_;
  Matrix design_;
  bool conditioned_ = false;
};

} // namespace ecoassoc
