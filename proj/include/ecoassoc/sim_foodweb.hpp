#pragma once

#include "ecoassoc/data.hpp"
#include "ecoassoc/rng.hpp"

#include <string>
#include <vector>

namespace ecoassoc {

enum class Topology { anarchy, democracy, cascade, gcascade, niche, pniche };
std::string to_string(Topology t);
Topology parse_topology(std::string_view name);
const std::vector<Topology> &all_topologies();

struct FoodWebConfig {
  Topology topology = Topology::cascade;
  std::size_t groups = 5;
  std::size_t species_per_group = 5;
  std::size_t n_sites = 500;
  double gradient_min = 0.0;
  double gradient_max = 100.0;
  double breadth = 15.0;
  std::uint64_t seed = 0;

  std::size_t n_species() const { return groups * species_per_group; }
  void validate() const;
};

/// G x G group adjacency; (g, h) = 1 when group g preys on group h. Group 0
/// sits at the bottom and every edge points to a lower group.
IntMatrix generate_topology(Topology kind, std::size_t groups, std::uint64_t seed);

/// Groups in an order where prey come before their consumers; throws when
/// the adjacency has a cycle.
std::vector<int> topological_order(const IntMatrix &adjacency);

std::size_t basal_count(const IntMatrix &adjacency);

struct FoodWebResult {
  CommunityData data; // binary occurrences, covariate "E", group labels
  IntMatrix group_adjacency;
  IntMatrix metaweb;  // species level, (i, j) = 1 when i preys on j
  IntMatrix realized; // metaweb edges whose species co-occur somewhere
  Vector optima;
  Vector site_values;
};

/// Expands a group adjacency to species (consecutive blocks per group).
IntMatrix expand_metaweb(const IntMatrix &group_adjacency, std::size_t species_per_group);

IntMatrix realized_network(const IntMatrix &metaweb, const Matrix &occurrences);

FoodWebResult simulate_occurrences(const FoodWebConfig &config, const IntMatrix &group_adjacency);

/// generate_topology followed by simulate_occurrences with streams of one seed.
FoodWebResult simulate_foodweb(const FoodWebConfig &config);

} // namespace ecoassoc
