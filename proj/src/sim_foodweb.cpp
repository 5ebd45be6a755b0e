#include "ecoassoc/sim_foodweb.hpp"

#include <algorithm>
#include <cmath>

namespace ecoassoc {

std::string to_string(Topology t) {
  switch (t) {
  case Topology::anarchy: return "anarchy";
  case Topology::democracy: return "democracy";
  case Topology::cascade: return "cascade";
  case Topology::gcascade: return "gcascade";
  case Topology::niche: return "niche";
  case Topology::pniche: return "pniche";
  }
  return "?";
}

Topology parse_topology(std::string_view name) {
  for (Topology t : all_topologies())
    if (to_string(t) == name)
      return t;
  throw ValidationError("unknown topology '" + std::string(name) + "'");
}

const std::vector<Topology> &all_topologies() {
  static const std::vector<Topology> all{Topology::anarchy, Topology::democracy, Topology::cascade,
                                         Topology::gcascade, Topology::niche, Topology::pniche};
  return all;
}

void FoodWebConfig::validate() const {
  if (groups < 2)
    throw ValidationError("foodweb: need at least 2 groups");
  if (species_per_group < 1)
    throw ValidationError("foodweb: species_per_group must be positive");
  if (n_sites < 1)
    throw ValidationError("foodweb: n_sites must be positive");
  if (!(gradient_max > gradient_min))
    throw ValidationError("foodweb: gradient_max must exceed gradient_min");
  if (!(breadth > 0.0))
    throw ValidationError("foodweb: breadth must be positive");
}

namespace {

constexpr int kMaxAttempts = 100;
constexpr double kNicheConnectance = 0.3;
constexpr double kRewire = 0.2;

IntMatrix niche_web(std::size_t G, Rng &rng) {
  const auto g = static_cast<Eigen::Index>(G);
  std::vector<double> v(G);
  for (auto &x : v)
    x = uniform01(rng);
  std::sort(v.begin(), v.end());
  const double beta = 1.0 / (2.0 * kNicheConnectance) - 1.0;
  IntMatrix adj = IntMatrix::Zero(g, g);
  for (Eigen::Index a = 1; a < g; ++a) {
    const double va = v[static_cast<std::size_t>(a)];
    const double r = va * (1.0 - std::pow(1.0 - uniform01(rng), 1.0 / beta));
    const double c = uniform(rng, r / 2.0, std::max(va, r / 2.0));
    for (Eigen::Index b = 0; b < a; ++b) {
      const double vb = v[static_cast<std::size_t>(b)];
      if (vb >= c - r / 2.0 && vb <= c + r / 2.0)
        adj(a, b) = 1;
    }
  }
  return adj;
}

IntMatrix draw_topology(Topology kind, std::size_t G, Rng &rng) {
  const auto g = static_cast<Eigen::Index>(G);
  IntMatrix adj = IntMatrix::Zero(g, g);
  switch (kind) {
  case Topology::cascade:
    for (Eigen::Index a = 1; a < g; ++a)
      adj(a, a - 1) = 1;
    break;
  case Topology::gcascade:
    for (Eigen::Index a = 1; a < g; ++a)
      for (Eigen::Index b = 0; b < a; ++b)
        adj(a, b) = 1;
    break;
  case Topology::democracy:
    for (Eigen::Index a = 1; a < g; ++a) {
      adj(a, a - 1) = 1;
      if (a >= 2)
        adj(a, a - 2) = 1;
    }
    break;
  case Topology::anarchy:
    for (Eigen::Index a = 1; a < g; ++a)
      for (Eigen::Index b = 0; b < a; ++b)
        adj(a, b) = bernoulli(rng, 0.5) ? 1 : 0;
    break;
  case Topology::niche:
    adj = niche_web(G, rng);
    break;
  case Topology::pniche: {
    const IntMatrix base = niche_web(G, rng);
    for (Eigen::Index a = 1; a < g; ++a)
      for (Eigen::Index b = 0; b < a; ++b) {
        if (!base(a, b))
          continue;
        if (bernoulli(rng, kRewire))
          adj(a, static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::size_t>(a)))) = 1;
        else
          adj(a, b) = 1;
      }
    break;
  }
  }
  return adj;
}

} // namespace

std::vector<int> topological_order(const IntMatrix &adj) {
  const auto g = adj.rows();
  std::vector<int> missing(static_cast<std::size_t>(g), 0), order;
  for (Eigen::Index a = 0; a < g; ++a)
    missing[static_cast<std::size_t>(a)] = adj.row(a).sum();
  std::vector<char> done(static_cast<std::size_t>(g), 0);
  while (order.size() < static_cast<std::size_t>(g)) {
    Eigen::Index next = -1;
    for (Eigen::Index a = 0; a < g && next < 0; ++a)
      if (!done[static_cast<std::size_t>(a)] && missing[static_cast<std::size_t>(a)] == 0)
        next = a;
    if (next < 0)
      throw ValidationError("group adjacency contains a cycle");
    done[static_cast<std::size_t>(next)] = 1;
    order.push_back(static_cast<int>(next));
    for (Eigen::Index a = 0; a < g; ++a)
      if (adj(a, next))
        --missing[static_cast<std::size_t>(a)];
  }
  return order;
}

std::size_t basal_count(const IntMatrix &adj) {
  std::size_t n = 0;
  for (Eigen::Index a = 0; a < adj.rows(); ++a)
    n += adj.row(a).sum() == 0 ? 1 : 0;
  return n;
}

IntMatrix generate_topology(Topology kind, std::size_t G, std::uint64_t seed) {
  if (G < 2)
    throw ValidationError("topology needs at least 2 groups");
  Rng rng = make_stream(seed, "topology_" + to_string(kind));
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    IntMatrix adj = draw_topology(kind, G, rng);
    if (adj.sum() > 0 && basal_count(adj) >= 1) {
      topological_order(adj);
      return adj;
    }
  }
  throw NumericalError("could not draw a " + to_string(kind) + " food web with an edge and a basal group in " +
                       std::to_string(kMaxAttempts) + " attempts");
}

IntMatrix expand_metaweb(const IntMatrix &ga, std::size_t per) {
  const auto g = ga.rows();
  const auto m = g * static_cast<Eigen::Index>(per);
  IntMatrix out = IntMatrix::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      out(i, j) = ga(i / static_cast<Eigen::Index>(per), j / static_cast<Eigen::Index>(per));
  return out;
}

IntMatrix realized_network(const IntMatrix &metaweb, const Matrix &occ) {
  IntMatrix out = IntMatrix::Zero(metaweb.rows(), metaweb.cols());
  for (Eigen::Index i = 0; i < metaweb.rows(); ++i)
    for (Eigen::Index j = 0; j < metaweb.cols(); ++j) {
      if (!metaweb(i, j))
        continue;
      for (Eigen::Index k = 0; k < occ.rows(); ++k)
        if (occ(k, i) > 0 && occ(k, j) > 0) {
          out(i, j) = 1;
          break;
        }
    }
  return out;
}

FoodWebResult simulate_occurrences(const FoodWebConfig &c, const IntMatrix &ga) {
  c.validate();
  if (ga.rows() != static_cast<Eigen::Index>(c.groups) || ga.cols() != ga.rows())
    throw ValidationError("group adjacency must be groups x groups");
  const std::vector<int> order = topological_order(ga);
  if (basal_count(ga) < 1)
    throw ValidationError("food web needs a basal group");
  const auto per = static_cast<Eigen::Index>(c.species_per_group);
  const auto m = static_cast<Eigen::Index>(c.n_species());
  const auto n = static_cast<Eigen::Index>(c.n_sites);
  FoodWebResult out;
  out.group_adjacency = ga;
  Rng rng = make_stream(c.seed, "foodweb_optima");
  out.optima.resize(m);
  for (Eigen::Index i = 0; i < m; ++i)
    out.optima(i) = uniform(rng, c.gradient_min, c.gradient_max);
  Rng grad = make_stream(c.seed, "foodweb_gradient");
  out.site_values.resize(n);
  for (Eigen::Index k = 0; k < n; ++k)
    out.site_values(k) = uniform(grad, c.gradient_min, c.gradient_max);

  Matrix occ = Matrix::Zero(n, m);
#pragma omp parallel for schedule(static)
  for (Eigen::Index k = 0; k < n; ++k) {
    Rng site = make_stream(c.seed, "foodweb_site", static_cast<std::uint64_t>(k));
    for (int g : order) {
      bool fed = true;
      if (ga.row(g).sum() > 0) {
        fed = false;
        for (Eigen::Index h = 0; h < ga.cols() && !fed; ++h)
          if (ga(g, h))
            for (Eigen::Index s = 0; s < per && !fed; ++s)
              fed = occ(k, h * per + s) > 0;
      }
      for (Eigen::Index s = 0; s < per; ++s) {
        const Eigen::Index i = g * per + s;
        const double z = (out.site_values(k) - out.optima(i)) / c.breadth;
        const double q = std::exp(-0.5 * z * z);
        const bool present = bernoulli(site, q) && fed;
        occ(k, i) = present ? 1.0 : 0.0;
      }
    }
  }
  out.metaweb = expand_metaweb(ga, c.species_per_group);
  out.realized = realized_network(out.metaweb, occ);
  Matrix cov = out.site_values;
  out.data = make_community(std::move(occ), std::move(cov), true);
  out.data.covariate_names = {"E"};
  std::vector<int> labels(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i)
    labels[static_cast<std::size_t>(i)] = static_cast<int>(i / per);
  out.data.group_labels = labels;
  return out;
}

FoodWebResult simulate_foodweb(const FoodWebConfig &c) {
  c.validate();
  return simulate_occurrences(c, generate_topology(c.topology, c.groups, c.seed));
}

} // namespace ecoassoc
