#include "ecoassoc/associations.hpp"

#include <cmath>
#include <map>

namespace ecoassoc {

EmbeddingPair EmbeddingPair::zeros(std::size_t m, std::size_t d) {
  return EmbeddingPair(Matrix::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(d)),
                       Matrix::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(d)));
}

void EmbeddingPair::validate(bool non_negative) const {
  if (response.rows() != effect.rows() || response.cols() != effect.cols())
    throw ValidationError("embedding shapes differ: P is " + std::to_string(response.rows()) + "x" +
                          std::to_string(response.cols()) + ", Q is " + std::to_string(effect.rows()) +
                          "x" + std::to_string(effect.cols()));
  if (response.cols() < 1)
    throw ValidationError("embedding dimension must be at least 1");
  if (non_negative && (response.minCoeff() < 0.0 || effect.minCoeff() < 0.0))
    throw ValidationError("negative embedding entry under the non-negativity constraint");
}

double association_strength(const EmbeddingPair &emb, std::size_t target, std::size_t source) {
  return emb.response.row(static_cast<Eigen::Index>(target))
      .dot(emb.effect.row(static_cast<Eigen::Index>(source)));
}

std::string to_string(ContextVariant v) {
  switch (v) {
  case ContextVariant::basic: return "basic";
  case ContextVariant::conditioned: return "conditioned";
  case ContextVariant::temporal: return "temporal";
  case ContextVariant::spatial: return "spatial";
  }
  return "?";
}

ContextVariant parse_context_variant(std::string_view name) {
  if (name == "basic") return ContextVariant::basic;
  if (name == "conditioned") return ContextVariant::conditioned;
  if (name == "temporal") return ContextVariant::temporal;
  if (name == "spatial") return ContextVariant::spatial;
  throw ValidationError("unknown biotic context variant '" + std::string(name) + "'");
}

Matrix BioticContextSpec::neutral_conditioning(std::size_t n_covariates, std::size_t dim) {
  Matrix w = Matrix::Zero(static_cast<Eigen::Index>(n_covariates + 1), static_cast<Eigen::Index>(dim));
  w.row(static_cast<Eigen::Index>(n_covariates)).setOnes();
  return w;
}

void BioticContextSpec::validate(const CommunityData &data, std::size_t dim) const {
  const bool need_w = variant == ContextVariant::conditioned;
  const bool need_space = variant == ContextVariant::spatial;
  if (need_w != conditioning_weights.has_value())
    throw ValidationError(need_w ? "conditioned context needs conditioning_weights"
                                 : "conditioning_weights only apply to the conditioned context");
  if (need_space != radius.has_value() || need_space != decay.has_value())
    throw ValidationError(need_space ? "spatial context needs radius and decay"
                                     : "radius/decay only apply to the spatial context");
  if (need_w) {
    if (static_cast<std::size_t>(conditioning_weights->rows()) != data.n_covariates() + 1 ||
        static_cast<std::size_t>(conditioning_weights->cols()) != dim)
      throw ValidationError("conditioning_weights must be (p+1) x d");
  }
  if (need_space) {
    if (!(*radius > 0.0) || !(*decay >= 0.0))
      throw ValidationError("spatial context needs radius > 0 and decay >= 0");
    if (!data.coordinates)
      throw ValidationError("spatial context requires site coordinates");
  }
  if (variant == ContextVariant::temporal && !data.time_index)
    throw ValidationError("temporal context requires a time index");
}

namespace {

double distance(const Matrix &coords, std::size_t a, std::size_t b) {
  const auto ia = static_cast<Eigen::Index>(a), ib = static_cast<Eigen::Index>(b);
  return std::hypot(coords(ia, 0) - coords(ib, 0), coords(ia, 1) - coords(ib, 1));
}

std::optional<std::size_t> previous_observation(const CommunityData &data, std::size_t site) {
  if (!data.time_index)
    throw ValidationError("temporal context requires a time index");
  const auto &t = *data.time_index;
  const int want = t[site] - 1;
  std::optional<std::size_t> found;
  for (std::size_t l = 0; l < data.n_sites(); ++l) {
    if (t[l] != want)
      continue;
    if (data.coordinates) {
      const auto &c = *data.coordinates;
      if (c(static_cast<Eigen::Index>(l), 0) != c(static_cast<Eigen::Index>(site), 0) ||
          c(static_cast<Eigen::Index>(l), 1) != c(static_cast<Eigen::Index>(site), 1))
        continue;
    }
    if (found)
      throw ValidationError("ambiguous previous time point for site " + data.site_ids[site]);
    found = l;
  }
  return found;
}

double y_at(const CommunityData &d, std::size_t k, std::size_t i) {
  return d.abundance(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i));
}

} // namespace

std::vector<ContextMember> biotic_context_members(const CommunityData &data, std::size_t site,
                                                  std::size_t target, const BioticContextSpec &spec) {
  std::vector<ContextMember> out;
  const std::size_t m = data.n_species();
  switch (spec.variant) {
  case ContextVariant::basic:
  case ContextVariant::conditioned:
    for (std::size_t j = 0; j < m; ++j)
      if (j != target && y_at(data, site, j) > 0.0)
        out.push_back({static_cast<int>(j), static_cast<int>(site), 1.0});
    break;
  case ContextVariant::temporal:
    if (auto prev = previous_observation(data, site))
      for (std::size_t j = 0; j < m; ++j)
        if (y_at(data, *prev, j) > 0.0)
          out.push_back({static_cast<int>(j), static_cast<int>(*prev), 1.0});
    break;
  case ContextVariant::spatial: {
    if (!data.coordinates || !spec.radius || !spec.decay)
      throw ValidationError("spatial context requires coordinates, radius and decay");
    for (std::size_t l = 0; l < data.n_sites(); ++l) {
      const double dst = distance(*data.coordinates, site, l);
      if (dst > *spec.radius)
        continue;
      const double w = std::exp(-*spec.decay * dst);
      for (std::size_t j = 0; j < m; ++j) {
        if (l == site && j == target)
          continue;
        if (y_at(data, l, j) > 0.0)
          out.push_back({static_cast<int>(j), static_cast<int>(l), w});
      }
    }
    break;
  }
  }
  return out;
}

Vector conditioning_vector(const CommunityData &data, std::size_t site, const BioticContextSpec &spec,
                           std::size_t dim) {
  if (spec.variant != ContextVariant::conditioned)
    return Vector::Ones(static_cast<Eigen::Index>(dim));
  const Matrix &w = *spec.conditioning_weights;
  const auto p = static_cast<Eigen::Index>(data.n_covariates());
  Vector v(p + 1);
  v.head(p) = data.covariates.row(static_cast<Eigen::Index>(site)).transpose();
  v(p) = 1.0;
  return w.transpose() * v;
}

Vector context_effect(const CommunityData &data, std::size_t site, std::size_t target,
                      const EmbeddingPair &emb, const BioticContextSpec &spec) {
  const auto members = biotic_context_members(data, site, target, spec);
  Vector z = Vector::Zero(static_cast<Eigen::Index>(emb.dim()));
  if (members.empty())
    return z;
  for (const auto &c : members)
    z += c.weight * y_at(data, static_cast<std::size_t>(c.site), static_cast<std::size_t>(c.species)) *
         emb.effect.row(c.species).transpose();
  if (spec.variant != ContextVariant::spatial)
    z /= static_cast<double>(members.size());
  if (spec.variant == ContextVariant::conditioned)
    z = z.cwiseProduct(conditioning_vector(data, site, spec, emb.dim()));
  return z;
}

double biotic_predictor(const CommunityData &data, std::size_t site, std::size_t target,
                        const EmbeddingPair &emb, const Vector &offsets, const BioticContextSpec &spec) {
  return offsets(static_cast<Eigen::Index>(target)) +
         emb.response.row(static_cast<Eigen::Index>(target))
             .dot(context_effect(data, site, target, emb, spec).transpose());
}

ContextTable::ContextTable(const CommunityData &data, const BioticContextSpec &spec)
    : n_sites_(data.n_sites()), n_species_(data.n_species()) {
  const std::size_t n = n_sites_, m = n_species_;
  start_.assign(n * m + 1, 0);
  entries_.reserve(n * m * 4);
  conditioned_ = spec.variant == ContextVariant::conditioned;
  if (conditioned_) {
    const auto p = static_cast<Eigen::Index>(data.n_covariates());
    design_.resize(static_cast<Eigen::Index>(n), p + 1);
    design_.leftCols(p) = data.covariates;
    design_.col(p).setOnes();
  }

  std::vector<std::vector<std::size_t>> neighbours;
  if (spec.variant == ContextVariant::spatial) {
    if (!data.coordinates || !spec.radius || !spec.decay)
      throw ValidationError("spatial context requires coordinates, radius and decay");
    neighbours.resize(n);
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t l = 0; l < n; ++l)
        if (distance(*data.coordinates, k, l) <= *spec.radius)
          neighbours[k].push_back(l);
  }

  std::vector<double> site_sum(m);
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<std::size_t> present;
    std::optional<std::size_t> source_site = k;
    switch (spec.variant) {
    case ContextVariant::basic:
    case ContextVariant::conditioned:
      for (std::size_t j = 0; j < m; ++j)
        if (y_at(data, k, j) > 0.0)
          present.push_back(j);
      break;
    case ContextVariant::temporal:
      source_site = previous_observation(data, k);
      if (source_site)
        for (std::size_t j = 0; j < m; ++j)
          if (y_at(data, *source_site, j) > 0.0)
            present.push_back(j);
      break;
    case ContextVariant::spatial:
      std::fill(site_sum.begin(), site_sum.end(), 0.0);
      for (std::size_t l : neighbours[k]) {
        const double w = std::exp(-*spec.decay * distance(*data.coordinates, k, l));
        for (std::size_t j = 0; j < m; ++j)
          site_sum[j] += w * y_at(data, l, j);
      }
      break;
    }

    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t cell = k * m + i;
      switch (spec.variant) {
      case ContextVariant::basic:
      case ContextVariant::conditioned: {
        const bool self = y_at(data, k, i) > 0.0;
        const std::size_t size = present.size() - (self ? 1 : 0);
        for (std::size_t j : present)
          if (j != i)
            entries_.push_back({static_cast<int>(j), y_at(data, k, j) / static_cast<double>(size)});
        break;
      }
      case ContextVariant::temporal:
        for (std::size_t j : present)
          entries_.push_back(
              {static_cast<int>(j), y_at(data, *source_site, j) / static_cast<double>(present.size())});
        break;
      case ContextVariant::spatial:
        for (std::size_t j = 0; j < m; ++j) {
          // The target itself at the focal site (distance 0, weight 1) is excluded.
          const double c = site_sum[j] - (j == i ? y_at(data, k, i) : 0.0);
          if (c != 0.0)
            entries_.push_back({static_cast<int>(j), c});
        }
        break;
      }
      start_[cell + 1] = entries_.size();
    }
  }
}

} // namespace ecoassoc
