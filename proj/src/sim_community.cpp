#include "ecoassoc/sim_community.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ecoassoc {

void AssemblyConfig::validate() const {
  const auto m = optima.size();
  if (m < 1)
    throw ValidationError("assembly: species pool is empty");
  if (breadths.size() != m)
    throw ValidationError("assembly: breadths must have one entry per species");
  if (interactions.rows() != m || interactions.cols() != m)
    throw ValidationError("assembly: interactions must be m x m");
  if (carrying_capacity < 1)
    throw ValidationError("assembly: carrying_capacity must be at least 1");
  if (n_sites < 1)
    throw ValidationError("assembly: n_sites must be at least 1");
  if (!(gradient_max > gradient_min))
    throw ValidationError("assembly: gradient_max must exceed gradient_min");
  if ((breadths.array() <= 0.0).any() || !breadths.allFinite())
    throw ValidationError("assembly: breadths must be positive");
  if (!optima.allFinite())
    throw ValidationError("assembly: optima must be finite");
  if (!interactions.allFinite() || interactions.cwiseAbs().maxCoeff() > 1.0)
    throw ValidationError("assembly: interaction entries must lie in [-1, 1]");
  for (auto [name, w] : {std::pair{"b_env", b_env}, {"b_comp", b_comp}, {"b_fac", b_fac}, {"b_abun", b_abun}})
    if (!(w >= 0.0) || !std::isfinite(w))
      throw ValidationError(std::string("assembly: ") + name + " must be a finite non-negative weight");
  if (!(p_imm > 0.0))
    throw ValidationError("assembly: p_imm must be positive");
  if (epochs < 0)
    throw ValidationError("assembly: epochs must be non-negative");
  if (!(tolerance >= 0.0) || stable_steps < 1)
    throw ValidationError("assembly: invalid equilibrium rule");
}

FilterProbabilities filter_probabilities(const AssemblyConfig &c, double e, const Vector &counts) {
  const auto m = c.optima.size();
  const double k = c.carrying_capacity;
  FilterProbabilities f{Vector(m), Vector(m), Vector(m), Vector(m)};
  for (Eigen::Index i = 0; i < m; ++i) {
    const double z = (e - c.optima(i)) / c.breadths(i);
    f.env(i) = std::exp(-0.5 * z * z);
    double comp = 0.0, fac = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (counts(j) == 0.0)
        continue;
      const double w = c.interactions(j, i);
      comp += counts(j) * std::max(0.0, -w);
      fac += counts(j) * std::max(0.0, w);
    }
    f.comp(i) = std::exp(-comp / k);
    f.fac(i) = 1.0 - std::exp(-fac / k);
    f.abund(i) = counts(i) / k;
  }
  return f;
}

Vector assembly_weights(const AssemblyConfig &c, double e, const Vector &counts) {
  const auto f = filter_probabilities(c, e, counts);
  Vector w = c.b_env * f.env + c.b_comp * f.comp + c.b_fac * f.fac + c.b_abun * f.abund;
  w.array() += c.p_imm;
  return w / w.sum();
}

Vector multinomial_draw(const Vector &weights, int total, Rng &rng) {
  Vector cum(weights.size());
  double s = 0.0;
  for (Eigen::Index i = 0; i < weights.size(); ++i)
    cum(i) = (s += weights(i));
  Vector out = Vector::Zero(weights.size());
  for (int t = 0; t < total; ++t) {
    const double u = uniform01(rng) * s;
    const auto it = std::upper_bound(cum.data(), cum.data() + cum.size(), u);
    const auto idx = std::min<Eigen::Index>(it - cum.data(), weights.size() - 1);
    out(idx) += 1.0;
  }
  return out;
}

Vector assembly_step(const AssemblyConfig &c, double e, const Vector &counts, Rng &rng) {
  return multinomial_draw(assembly_weights(c, e, counts), c.carrying_capacity, rng);
}

AssemblyResult run_assembly(const AssemblyConfig &c) {
  c.validate();
  const auto n = static_cast<Eigen::Index>(c.n_sites);
  const auto m = c.optima.size();
  AssemblyResult out;
  out.site_values.resize(n);
  Rng grad = make_stream(c.seed, "gradient");
  for (Eigen::Index k = 0; k < n; ++k)
    out.site_values(k) = uniform(grad, c.gradient_min, c.gradient_max);
  Matrix counts(n, m);
  out.steps.assign(c.n_sites, 0);
  out.converged.assign(c.n_sites, 0);
  const Vector uniform_w = Vector::Constant(m, 1.0 / static_cast<double>(m));
#pragma omp parallel for schedule(dynamic)
  for (Eigen::Index k = 0; k < n; ++k) {
    Rng rng = make_stream(c.seed, "site", static_cast<std::uint64_t>(k));
    Vector now = multinomial_draw(uniform_w, c.carrying_capacity, rng);
    int stable = 0, step = 0;
    for (; step < c.epochs; ++step) {
      Vector next = assembly_step(c, out.site_values(k), now, rng);
      const double change = (next - now).cwiseAbs().sum();
      now = std::move(next);
      stable = change < c.tolerance * c.carrying_capacity ? stable + 1 : 0;
      if (stable >= c.stable_steps) {
        out.converged[static_cast<std::size_t>(k)] = 1;
        ++step;
        break;
      }
    }
    out.steps[static_cast<std::size_t>(k)] = step;
    counts.row(k) = now.transpose();
  }
  Matrix cov = out.site_values;
  out.data = make_community(std::move(counts), std::move(cov));
  out.data.covariate_names = {"E"};
  return out;
}

std::string to_string(AssociationKind k) {
  switch (k) {
  case AssociationKind::env: return "env";
  case AssociationKind::pos: return "pos";
  case AssociationKind::neg: return "neg";
  case AssociationKind::posneg: return "posneg";
  }
  return "?";
}
std::string to_string(Density d) { return d == Density::sparse ? "sparse" : "dense"; }
std::string to_string(Symmetry s) { return s == Symmetry::symmetric ? "sym" : "asym"; }

std::string ExperimentDesign::name() const {
  std::string n = "m" + std::to_string(pool_size) + "_" + to_string(kind);
  if (kind != AssociationKind::env)
    n += "_" + to_string(density) + "_" + to_string(symmetry);
  return n;
}

std::vector<ExperimentDesign> experiment1_designs() {
  std::vector<ExperimentDesign> out;
  for (std::size_t m : {10, 20, 50}) {
    out.push_back({AssociationKind::env, Density::sparse, Symmetry::symmetric, m});
    for (auto kind : {AssociationKind::pos, AssociationKind::neg, AssociationKind::posneg})
      for (auto dens : {Density::sparse, Density::dense}) {
        out.push_back({kind, dens, Symmetry::symmetric, m});
        if (kind != AssociationKind::posneg)
          out.push_back({kind, dens, Symmetry::asymmetric, m});
      }
  }
  return out;
}

std::size_t associated_pair_count(std::size_t m, Density density) {
  const std::size_t pairs = m * (m - 1) / 2;
  return density == Density::sparse ? pairs / 3 : 2 * pairs / 3;
}

Matrix draw_interactions(const ExperimentDesign &d, Rng &rng) {
  const auto m = static_cast<Eigen::Index>(d.pool_size);
  Matrix I = Matrix::Zero(m, m);
  if (d.kind == AssociationKind::env)
    return I;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = i + 1; j < m; ++j)
      pairs.emplace_back(i, j);
  shuffle(pairs.begin(), pairs.end(), rng);
  pairs.resize(associated_pair_count(d.pool_size, d.density));
  std::sort(pairs.begin(), pairs.end());
  for (auto [a, b] : pairs) {
    double sign = d.kind == AssociationKind::pos ? 1.0 : -1.0;
    if (d.kind == AssociationKind::posneg)
      sign = bernoulli(rng, 0.5) ? 1.0 : -1.0;
    if (d.symmetry == Symmetry::symmetric) {
      I(a, b) = I(b, a) = sign;
    } else if (bernoulli(rng, 0.5)) {
      I(a, b) = sign;
    } else {
      I(b, a) = sign;
    }
  }
  return I;
}

IntMatrix truth_labels(const Matrix &I) {
  IntMatrix t(I.cols(), I.rows());
  for (Eigen::Index i = 0; i < t.rows(); ++i)
    for (Eigen::Index j = 0; j < t.cols(); ++j)
      t(i, j) = i == j ? 0 : (I(j, i) > 0 ? 1 : (I(j, i) < 0 ? -1 : 0));
  return t;
}

AssemblyConfig make_assembly_config(const AssemblyConfig &base, const ExperimentDesign &design, double breadth,
                                    std::uint64_t seed) {
  AssemblyConfig c = base;
  c.seed = stream_seed(seed, design.name(), 0);
  Rng rng = make_stream(seed, design.name(), 1);
  const auto m = static_cast<Eigen::Index>(design.pool_size);
  c.optima.resize(m);
  for (Eigen::Index i = 0; i < m; ++i)
    c.optima(i) = uniform(rng, base.gradient_min, base.gradient_max);
  c.breadths = Vector::Constant(m, breadth);
  c.interactions = draw_interactions(design, rng);
  return c;
}

std::vector<Experiment1Dataset> generate_experiment1(const std::vector<ExperimentDesign> &designs,
                                                     const AssemblyConfig &base, double breadth,
                                                     std::uint64_t seed) {
  std::vector<Experiment1Dataset> out;
  out.reserve(designs.size());
  for (const auto &d : designs) {
    Experiment1Dataset ds;
    ds.design = d;
    ds.config = make_assembly_config(base, d, breadth, seed);
    ds.result = run_assembly(ds.config);
    ds.truth = truth_labels(ds.config.interactions);
    out.push_back(std::move(ds));
  }
  return out;
}

void to_json(nlohmann::json &j, const ExperimentDesign &d) {
  j = {{"kind", to_string(d.kind)},
       {"density", to_string(d.density)},
       {"symmetry", d.symmetry == Symmetry::symmetric ? "symmetric" : "asymmetric"},
       {"pool_size", d.pool_size}};
}

void from_json(const nlohmann::json &j, ExperimentDesign &d) {
  const std::string kind = j.value("kind", "env");
  if (kind == "env") d.kind = AssociationKind::env;
  else if (kind == "pos") d.kind = AssociationKind::pos;
  else if (kind == "neg") d.kind = AssociationKind::neg;
  else if (kind == "posneg") d.kind = AssociationKind::posneg;
  else throw ValidationError("design.kind: unknown association kind '" + kind + "'");
  const std::string dens = j.value("density", "sparse");
  if (dens != "sparse" && dens != "dense")
    throw ValidationError("design.density: expected sparse or dense");
  d.density = dens == "sparse" ? Density::sparse : Density::dense;
  const std::string sym = j.value("symmetry", "symmetric");
  if (sym != "symmetric" && sym != "asymmetric")
    throw ValidationError("design.symmetry: expected symmetric or asymmetric");
  d.symmetry = sym == "symmetric" ? Symmetry::symmetric : Symmetry::asymmetric;
  const int m = j.value("pool_size", 10);
  if (m < 2)
    throw ValidationError("design.pool_size: must be at least 2");
  d.pool_size = static_cast<std::size_t>(m);
}

} // namespace ecoassoc
