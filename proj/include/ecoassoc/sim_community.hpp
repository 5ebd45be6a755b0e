#pragma once

#include "ecoassoc/data.hpp"
#include "ecoassoc/rng.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace ecoassoc {

/// Individual-based community assembly along one environmental gradient.
///
/// `interactions(j, i)` is the effect of source j on target i, so the
/// association-matrix orientation (target row, source column) is its
/// transpose.
struct AssemblyConfig {
  std::size_t n_sites = 300;
  double gradient_min = 0.0;
  double gradient_max = 100.0;
  int carrying_capacity = 100;
  Vector optima;   // μ_j
  Vector breadths; // δ_j
  Matrix interactions;
  double b_env = 1.0;
  double b_comp = 1.0;
  double b_fac = 1.0;
  double b_abun = 1.0;
  double p_imm = 1e-3;
  int epochs = 200;
  /// Equilibrium: L1 change below tolerance·K for `stable_steps` steps in a row.
  double tolerance = 0.02;
  int stable_steps = 10;
  std::uint64_t seed = 0;

  std::size_t n_species() const { return static_cast<std::size_t>(optima.size()); }
  void validate() const;
};

struct FilterProbabilities {
  Vector env;
  Vector comp;
  Vector fac;
  Vector abund;
};

FilterProbabilities filter_probabilities(const AssemblyConfig &config, double site_value, const Vector &counts);

/// Normalised selection weights W.
Vector assembly_weights(const AssemblyConfig &config, double site_value, const Vector &counts);

/// K categorical draws from `weights` (normalised internally).
Vector multinomial_draw(const Vector &weights, int total, Rng &rng);

Vector assembly_step(const AssemblyConfig &config, double site_value, const Vector &counts, Rng &rng);

struct AssemblyResult {
  CommunityData data; // counts; one covariate "E" holding the gradient value
  Vector site_values;
  std::vector<int> steps;
  std::vector<char> converged;
};

AssemblyResult run_assembly(const AssemblyConfig &config);

enum class AssociationKind { env, pos, neg, posneg };
enum class Density { sparse, dense };
enum class Symmetry { symmetric, asymmetric };

std::string to_string(AssociationKind k);
std::string to_string(Density d);
std::string to_string(Symmetry s);

struct ExperimentDesign {
  AssociationKind kind = AssociationKind::env;
  Density density = Density::sparse;
  Symmetry symmetry = Symmetry::symmetric;
  std::size_t pool_size = 10;

  std::string name() const;
};

/// The factorial set: per pool size {10, 20, 50}, Env, Pos/Neg/PosNeg
/// symmetric at both densities and Pos/Neg asymmetric at both densities.
std::vector<ExperimentDesign> experiment1_designs();

/// Number of unordered associated pairs for a pool and density.
std::size_t associated_pair_count(std::size_t m, Density density);

/// Interaction matrix (source row, target column) for a design.
Matrix draw_interactions(const ExperimentDesign &design, Rng &rng);

/// Labels in association orientation (target row, source column).
IntMatrix truth_labels(const Matrix &interactions);

struct Experiment1Dataset {
  ExperimentDesign design;
  AssemblyConfig config;
  AssemblyResult result;
  IntMatrix truth;
};

/// Optima are drawn uniformly on the gradient; breadths are set to `breadth`.
AssemblyConfig make_assembly_config(const AssemblyConfig &base, const ExperimentDesign &design, double breadth,
                                    std::uint64_t seed);

std::vector<Experiment1Dataset> generate_experiment1(const std::vector<ExperimentDesign> &designs,
                                                     const AssemblyConfig &base, double breadth,
                                                     std::uint64_t seed);

void to_json(nlohmann::json &j, const ExperimentDesign &d);
void from_json(const nlohmann::json &j, ExperimentDesign &d);

} // namespace ecoassoc
