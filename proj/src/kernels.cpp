#include "ecoassoc/kernels.hpp"

#include <omp.h>

#include <numeric>

namespace ecoassoc::kernels {

ModelView ModelView::of(const FittedModel &model) {
  ModelView v;
  v.habitat = &model.habitat.weights;
  v.response = &model.emb.response;
  v.effect = &model.emb.effect;
  v.offsets = &model.offsets;
  v.log_dispersion = &model.log_dispersion;
  if (model.context.variant == ContextVariant::conditioned)
    v.conditioning = &*model.context.conditioning_weights;
  v.mode = model.mode;
  v.family = model.family;
  return v;
}

std::vector<int> all_sites(std::size_t n) {
  std::vector<int> s(n);
  std::iota(s.begin(), s.end(), 0);
  return s;
}

namespace {

struct SiteScratch {
  Vector raw;  // Σ coef α_j
  Vector beta; // conditioning weights for the site
  Vector z;    // β ⊙ raw
};

inline void site_beta(const ModelView &v, const ContextTable &table, int k, SiteScratch &s) {
  if (v.conditioning)
    s.beta = v.conditioning->transpose() * table.conditioning_design().row(k).transpose();
  else
    s.beta.setOnes(static_cast<Eigen::Index>(v.dim()));
}

inline double abiotic(const ModelView &v, const CommunityData &data, int k, int i) {
  const auto p = data.covariates.cols();
  return v.habitat->row(i).head(p).dot(data.covariates.row(k)) + (*v.habitat)(i, p);
}

inline double biotic(const ModelView &v, const ContextTable &table, int k, int i, SiteScratch &s) {
  s.raw.setZero(static_cast<Eigen::Index>(v.dim()));
  for (const auto &e : table.entries(static_cast<std::size_t>(k), static_cast<std::size_t>(i)))
    s.raw.noalias() += e.coef * v.effect->row(e.source).transpose();
  s.z = s.beta.cwiseProduct(s.raw);
  return (*v.offsets)(i) + v.response->row(i).dot(s.z.transpose());
}

inline double dispersion_of(const ModelView &v, int i) {
  return has_dispersion(v.family) ? std::exp((*v.log_dispersion)(i)) : 1.0;
}

void predict_site(const ModelView &v, const CommunityData &data, const ContextTable &table, int k,
                  Predictors &out, SiteScratch &s) {
  site_beta(v, table, k, s);
  for (int i = 0; i < static_cast<int>(data.n_species()); ++i) {
    out.abiotic(k, i) = abiotic(v, data, k, i);
    out.biotic(k, i) = biotic(v, table, k, i, s);
  }
}

double loss_site(const ModelView &v, const CommunityData &data, const ContextTable &table, int k,
                 const double *wrow, SiteScratch &s) {
  site_beta(v, table, k, s);
  double total = 0.0;
  for (int i = 0; i < static_cast<int>(data.n_species()); ++i) {
    const double w = wrow ? wrow[i] : 1.0;
    if (w == 0.0)
      continue;
    const double ea = abiotic(v, data, k, i);
    const double eb = biotic(v, table, k, i, s);
    total += w * pair_loss(v.mode, v.family, data.abundance(k, i), ea, eb, dispersion_of(v, i)).value;
  }
  return total;
}

void gradient_site(const ModelView &v, const CommunityData &data, const ContextTable &table, int k,
                   const double *wrow, Gradient &g, SiteScratch &s) {
  site_beta(v, table, k, s);
  const auto p = data.covariates.cols();
  for (int i = 0; i < static_cast<int>(data.n_species()); ++i) {
    const double w = wrow ? wrow[i] : 1.0;
    if (w == 0.0)
      continue;
    const double ea = abiotic(v, data, k, i);
    const double eb = biotic(v, table, k, i, s);
    const auto l = pair_loss(v.mode, v.family, data.abundance(k, i), ea, eb, dispersion_of(v, i));
    g.loss += w * l.value;
    const double ga = w * l.d_abiotic, gb = w * l.d_biotic;
    g.habitat.row(i).head(p).noalias() += ga * data.covariates.row(k);
    g.habitat(i, p) += ga;
    g.offsets(i) += gb;
    g.log_dispersion(i) += w * l.d_log_dispersion;
    if (gb == 0.0)
      continue;
    g.response.row(i).noalias() += gb * s.z.transpose();
    const Eigen::RowVectorXd rho_beta = v.response->row(i).cwiseProduct(s.beta.transpose());
    for (const auto &e : table.entries(static_cast<std::size_t>(k), static_cast<std::size_t>(i)))
      g.effect.row(e.source).noalias() += (gb * e.coef) * rho_beta;
    if (v.conditioning) {
      const Eigen::RowVectorXd rho_raw = v.response->row(i).cwiseProduct(s.raw.transpose());
      g.conditioning.noalias() += gb * table.conditioning_design().row(k).transpose() * rho_raw;
    }
  }
}

const double *weight_row(PairWeights w, std::size_t t) { return w ? w->row(static_cast<Eigen::Index>(t)).data() : nullptr; }

} // namespace

Predictors predictors_serial(const ModelView &v, const CommunityData &data, const ContextTable &table) {
  Predictors out{Matrix(data.abundance.rows(), data.abundance.cols()),
                 Matrix(data.abundance.rows(), data.abundance.cols())};
  SiteScratch s;
  for (int k = 0; k < static_cast<int>(data.n_sites()); ++k)
    predict_site(v, data, table, k, out, s);
  return out;
}

Predictors predictors_parallel(const ModelView &v, const CommunityData &data, const ContextTable &table) {
  Predictors out{Matrix(data.abundance.rows(), data.abundance.cols()),
                 Matrix(data.abundance.rows(), data.abundance.cols())};
  const int n = static_cast<int>(data.n_sites());
#pragma omp parallel
  {
    SiteScratch s;
#pragma omp for schedule(static)
    for (int k = 0; k < n; ++k)
      predict_site(v, data, table, k, out, s);
  }
  return out;
}

Gradient Gradient::zeros_like(const ModelView &v) {
  Gradient g;
  g.habitat = Matrix::Zero(v.habitat->rows(), v.habitat->cols());
  g.response = Matrix::Zero(v.response->rows(), v.response->cols());
  g.effect = Matrix::Zero(v.effect->rows(), v.effect->cols());
  g.offsets = Vector::Zero(v.offsets->size());
  g.log_dispersion = Vector::Zero(v.log_dispersion->size());
  if (v.conditioning)
    g.conditioning = Matrix::Zero(v.conditioning->rows(), v.conditioning->cols());
  return g;
}

void Gradient::set_zero() {
  habitat.setZero();
  response.setZero();
  effect.setZero();
  offsets.setZero();
  log_dispersion.setZero();
  conditioning.setZero();
  loss = 0.0;
}

Gradient &Gradient::operator+=(const Gradient &o) {
  habitat += o.habitat;
  response += o.response;
  effect += o.effect;
  offsets += o.offsets;
  log_dispersion += o.log_dispersion;
  if (conditioning.size())
    conditioning += o.conditioning;
  loss += o.loss;
  return *this;
}

double loss_serial(const ModelView &v, const CommunityData &data, const ContextTable &table,
                   std::span<const int> sites, PairWeights weights) {
  SiteScratch s;
  double total = 0.0;
  for (std::size_t t = 0; t < sites.size(); ++t)
    total += loss_site(v, data, table, sites[t], weight_row(weights, t), s);
  return total;
}

double loss_parallel(const ModelView &v, const CommunityData &data, const ContextTable &table,
                     std::span<const int> sites, PairWeights weights) {
  const int count = static_cast<int>(sites.size());
  std::vector<double> per_site(sites.size(), 0.0);
#pragma omp parallel
  {
    SiteScratch s;
#pragma omp for schedule(static)
    for (int t = 0; t < count; ++t)
      per_site[static_cast<std::size_t>(t)] =
          loss_site(v, data, table, sites[static_cast<std::size_t>(t)],
                    weight_row(weights, static_cast<std::size_t>(t)), s);
  }
  // Summed in site order so the result does not depend on the thread count.
  double total = 0.0;
  for (double x : per_site)
    total += x;
  return total;
}

void gradient_serial(const ModelView &v, const CommunityData &data, const ContextTable &table,
                     std::span<const int> sites, PairWeights weights, Gradient &out) {
  out.set_zero();
  SiteScratch s;
  for (std::size_t t = 0; t < sites.size(); ++t)
    gradient_site(v, data, table, sites[t], weight_row(weights, t), out, s);
}

void gradient_parallel(const ModelView &v, const CommunityData &data, const ContextTable &table,
                       std::span<const int> sites, PairWeights weights, Gradient &out) {
  const int threads = omp_get_max_threads();
  if (threads <= 1 || omp_in_parallel()) {
    gradient_serial(v, data, table, sites, weights, out);
    return;
  }
  std::vector<Gradient> partial(static_cast<std::size_t>(threads), Gradient::zeros_like(v));
  const int count = static_cast<int>(sites.size());
#pragma omp parallel num_threads(threads)
  {
    SiteScratch s;
    Gradient &mine = partial[static_cast<std::size_t>(omp_get_thread_num())];
#pragma omp for schedule(static)
    for (int t = 0; t < count; ++t)
      gradient_site(v, data, table, sites[static_cast<std::size_t>(t)],
                    weight_row(weights, static_cast<std::size_t>(t)), mine, s);
  }
  out.set_zero();
  for (const auto &g : partial)
    out += g;
}

} // namespace ecoassoc::kernels
