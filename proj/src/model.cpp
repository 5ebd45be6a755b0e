#include "ecoassoc/model.hpp"

#include "ecoassoc/kernels.hpp"

#include <cmath>

namespace ecoassoc {

HabitatModel HabitatModel::zeros(std::size_t m, std::size_t p) {
  return {Matrix::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(p + 1))};
}

double abiotic_predictor(const HabitatModel &hab, std::size_t species,
                         const Eigen::Ref<const Vector> &covariates) {
  const auto p = static_cast<Eigen::Index>(hab.n_covariates());
  if (covariates.size() != p)
    throw ValidationError("abiotic_predictor: expected " + std::to_string(p) + " covariates, got " +
                          std::to_string(covariates.size()));
  const auto row = hab.weights.row(static_cast<Eigen::Index>(species));
  return row.head(p).dot(covariates.transpose()) + row(p);
}

std::string to_string(AggregationMode m) {
  switch (m) {
  case AggregationMode::additive: return "additive";
  case AggregationMode::multiplicative: return "multiplicative";
  case AggregationMode::hierarchical: return "hierarchical";
  }
  return "?";
}

AggregationMode parse_mode(std::string_view name) {
  if (name == "additive") return AggregationMode::additive;
  if (name == "multiplicative") return AggregationMode::multiplicative;
  if (name == "hierarchical") return AggregationMode::hierarchical;
  throw ValidationError("unknown aggregation mode '" + std::string(name) + "'");
}

void check_mode_family(AggregationMode mode, FamilyKind family) {
  switch (mode) {
  case AggregationMode::additive:
    if (family == FamilyKind::zero_inflated_nb)
      throw ValidationError("mode/family mismatch: zero_inflated_nb needs the hierarchical mode");
    return;
  case AggregationMode::multiplicative:
    if (family != FamilyKind::bernoulli)
      throw ValidationError("mode/family mismatch: multiplicative mode is for binary data (bernoulli), got " +
                            to_string(family));
    return;
  case AggregationMode::hierarchical:
    if (family != FamilyKind::zero_inflated_nb)
      throw ValidationError("mode/family mismatch: hierarchical mode is for counts (zero_inflated_nb), got " +
                            to_string(family));
    return;
  }
}

ConditionalMean conditional_mean(AggregationMode mode, FamilyKind family, double eta_a, double eta_b) {
  check_mode_family(mode, family);
  ConditionalMean out;
  switch (mode) {
  case AggregationMode::additive:
    out.mean = inverse_link(family, eta_a + eta_b);
    out.abundance_mean = out.mean;
    break;
  case AggregationMode::multiplicative:
    out.mean = sigmoid(clamp_eta(eta_a)) * sigmoid(clamp_eta(eta_b));
    out.abundance_mean = out.mean;
    break;
  case AggregationMode::hierarchical:
    out.p_present = sigmoid(clamp_eta(eta_a));
    out.abundance_mean = std::exp(clamp_eta(eta_b));
    out.mean = out.p_present * out.abundance_mean;
    break;
  }
  return out;
}

PairLoss pair_loss(AggregationMode mode, FamilyKind family, double y, double eta_a, double eta_b,
                   double dispersion) {
  PairLoss out;
  switch (mode) {
  case AggregationMode::additive: {
    auto l = eta_loss(family, y, eta_a + eta_b, dispersion);
    out.value = l.value;
    out.d_abiotic = l.d_eta;
    out.d_biotic = l.d_eta;
    out.d_log_dispersion = l.d_log_dispersion;
    break;
  }
  case AggregationMode::multiplicative: {
    eta_a = clamp_eta(eta_a);
    eta_b = clamp_eta(eta_b);
    const double sa = sigmoid(eta_a), sb = sigmoid(eta_b);
    const double mean = clamp_prob(sa * sb);
    if (y > 0.0) {
      // log m = log σ(a) + log σ(b)
      out.value = softplus(-eta_a) + softplus(-eta_b);
      out.d_abiotic = -(1.0 - sa);
      out.d_biotic = -(1.0 - sb);
    } else {
      out.value = -std::log1p(-mean);
      const double r = mean / (1.0 - mean);
      out.d_abiotic = r * (1.0 - sa);
      out.d_biotic = r * (1.0 - sb);
    }
    break;
  }
  case AggregationMode::hierarchical: {
    auto l = zinb_loss(y, eta_a, eta_b, dispersion);
    out.value = l.value;
    out.d_abiotic = l.d_eta_presence;
    out.d_biotic = l.d_eta_abundance;
    out.d_log_dispersion = l.d_log_theta;
    break;
  }
  }
  return out;
}

double FittedModel::dispersion(std::size_t i) const {
  return has_dispersion(family) ? std::exp(log_dispersion(static_cast<Eigen::Index>(i))) : 1.0;
}

ResponseFamily FittedModel::family_of(std::size_t i) const {
  return has_dispersion(family) ? ResponseFamily::of(family, dispersion(i)) : ResponseFamily::of(family);
}

void FittedModel::validate() const {
  check_mode_family(mode, family);
  emb.validate(non_negative);
  const auto m = static_cast<Eigen::Index>(emb.n_species());
  if (habitat.weights.rows() != m)
    throw ValidationError("habitat weights need one row per species");
  if (habitat.weights.cols() < 1)
    throw ValidationError("habitat weights need an intercept column");
  if (offsets.size() != m || log_dispersion.size() != m)
    throw ValidationError("offsets and dispersions need one entry per species");
  if (embedding_rows.size() != emb.n_species())
    throw ValidationError("embedding_rows must map every species");
}

void FittedModel::check_compatible(const CommunityData &data) const {
  if (data.n_species() != n_species())
    throw ValidationError("model has " + std::to_string(n_species()) + " species, data has " +
                          std::to_string(data.n_species()));
  if (data.n_covariates() != habitat.n_covariates())
    throw ValidationError("model expects " + std::to_string(habitat.n_covariates()) +
                          " covariates, data has " + std::to_string(data.n_covariates()));
  context.validate(data, dim());
}

double model_nll(const FittedModel &model, const CommunityData &data, const PairList &pairs) {
  model.check_compatible(data);
  double total = 0.0;
  for (auto [k, i] : pairs) {
    const auto ks = static_cast<std::size_t>(k), is = static_cast<std::size_t>(i);
    const double eta_a =
        abiotic_predictor(model.habitat, is, data.covariates.row(k).transpose());
    const double eta_b = biotic_predictor(data, ks, is, model.emb, model.offsets, model.context);
    total += pair_loss(model.mode, model.family, data.abundance(k, i), eta_a, eta_b,
                       model.dispersion(is))
                 .value;
  }
  return total;
}

double model_nll(const FittedModel &model, const CommunityData &data) {
  PairList all;
  all.reserve(data.n_sites() * data.n_species());
  for (std::size_t k = 0; k < data.n_sites(); ++k)
    for (std::size_t i = 0; i < data.n_species(); ++i)
      all.emplace_back(static_cast<int>(k), static_cast<int>(i));
  return model_nll(model, data, all);
}

Prediction predict(const FittedModel &model, const CommunityData &data) {
  model.check_compatible(data);
  ContextTable table(data, model.context);
  auto view = kernels::ModelView::of(model);
  auto eta = kernels::predictors_parallel(view, data, table);
  const auto n = static_cast<Eigen::Index>(data.n_sites());
  const auto m = static_cast<Eigen::Index>(data.n_species());
  Prediction out;
  out.mean.resize(n, m);
  Matrix ab(n, m), pp(n, m);
  for (Eigen::Index k = 0; k < n; ++k)
    for (Eigen::Index i = 0; i < m; ++i) {
      auto c = conditional_mean(model.mode, model.family, eta.abiotic(k, i), eta.biotic(k, i));
      out.mean(k, i) = c.mean;
      ab(k, i) = c.abundance_mean;
      pp(k, i) = c.p_present;
    }
  if (model.mode == AggregationMode::hierarchical) {
    out.p_present = std::move(pp);
    out.abundance_mean = std::move(ab);
  }
  return out;
}

} // namespace ecoassoc
