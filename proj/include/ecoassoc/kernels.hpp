#pragma once

// Sweeps over (site, species) pairs: predictors, penalised-free loss and its
// gradient. Each has a serial reference implementation and an OpenMP version;
// tests check they agree and bench/ compares their speed.

#include "ecoassoc/associations.hpp"
#include "ecoassoc/data.hpp"
#include "ecoassoc/model.hpp"

#include <span>

namespace ecoassoc::kernels {

/// Non-owning view of the parameters a sweep reads. `response`/`effect` are
/// the per-species (expanded) embeddings.
struct ModelView {
  const Matrix *habitat = nullptr;
  const Matrix *response = nullptr;
  const Matrix *effect = nullptr;
  const Vector *offsets = nullptr;
  const Vector *log_dispersion = nullptr;
  const Matrix *conditioning = nullptr; // (p+1) x d, conditioned context only
  AggregationMode mode = AggregationMode::additive;
  FamilyKind family = FamilyKind::poisson;

  static ModelView of(const FittedModel &model);
  std::size_t dim() const { return static_cast<std::size_t>(response->cols()); }
};

struct Predictors {
  Matrix abiotic; // n x m
  Matrix biotic;  // n x m
};

Predictors predictors_serial(const ModelView &view, const CommunityData &data, const ContextTable &table);
Predictors predictors_parallel(const ModelView &view, const CommunityData &data, const ContextTable &table);

struct Gradient {
  Matrix habitat;
  Matrix response;
  Matrix effect;
  Vector offsets;
  Vector log_dispersion;
  Matrix conditioning;
  double loss = 0.0;

  static Gradient zeros_like(const ModelView &view);
  void set_zero();
  Gradient &operator+=(const Gradient &other);
};

/// Pair weights: rows follow `sites`, a zero weight skips the pair. Null
/// means every pair has weight 1.
using PairWeights = const Matrix *;

double loss_serial(const ModelView &view, const CommunityData &data, const ContextTable &table,
                   std::span<const int> sites, PairWeights weights = nullptr);
double loss_parallel(const ModelView &view, const CommunityData &data, const ContextTable &table,
                     std::span<const int> sites, PairWeights weights = nullptr);

/// Overwrites `out` with Σ weight·loss and its gradient over the given sites.
void gradient_serial(const ModelView &view, const CommunityData &data, const ContextTable &table,
                     std::span<const int> sites, PairWeights weights, Gradient &out);
void gradient_parallel(const ModelView &view, const CommunityData &data, const ContextTable &table,
                       std::span<const int> sites, PairWeights weights, Gradient &out);

std::vector<int> all_sites(std::size_t n);

} // namespace ecoassoc::kernels
