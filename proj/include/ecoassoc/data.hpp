#pragma once

#include "ecoassoc/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ecoassoc {

/// Site x species observations with their environmental covariates.
///
/// Optional blocks (coordinates, time, offsets, group labels) are either
/// fully present or absent; nothing is imputed.
struct CommunityData {
  Matrix abundance;  // n_sites x m_species, non-negative
  Matrix covariates; // n_sites x p
  std::vector<std::string> site_ids;
  std::vector<std::string> species_ids;
  std::vector<std::string> covariate_names;
  std::optional<Matrix> coordinates;          // n x 2, planar
  std::optional<std::vector<int>> time_index; // n
  std::optional<Vector> offsets;              // m
  std::optional<std::vector<int>> group_labels; // m
  bool binary = false;

  std::size_t n_sites() const { return static_cast<std::size_t>(abundance.rows()); }
  std::size_t n_species() const { return static_cast<std::size_t>(abundance.cols()); }
  std::size_t n_covariates() const { return static_cast<std::size_t>(covariates.cols()); }

  /// Throws ValidationError on the first broken invariant.
  void validate() const;

  /// Rows in the given order (duplicates allowed, as in bootstrap resamples).
  CommunityData subset(const std::vector<int> &rows) const;

  bool all_binary() const;
};

/// Builds a CommunityData with generated ids; used by simulators and tests.
CommunityData make_community(Matrix abundance, Matrix covariates, bool binary = false);

struct PreprocessSpec {
  std::vector<int> categorical_columns;
  std::vector<int> scale_columns;
  std::vector<int> add_quadratic;

  void validate(std::size_t n_columns) const;
};

/// Frozen preprocessing statistics, reusable for held-out rows.
struct PreprocessState {
  PreprocessSpec spec;
  std::vector<std::string> input_columns;
  std::vector<std::vector<std::string>> levels; // per input column; empty unless categorical
  std::vector<double> mean;                     // per input column; used when scaled
  std::vector<double> scale;

  std::vector<std::string> output_columns() const;
};

/// Computes levels and scaling statistics on `rows` (all rows when empty).
PreprocessState fit_preprocess(const std::vector<std::string> &columns,
                               const std::vector<std::vector<std::string>> &cells,
                               const PreprocessSpec &spec, const std::vector<int> &rows = {});

/// Output layout: numeric columns in input order (scaled where requested),
/// then one indicator per level of each categorical column, then squares of
/// the requested numeric columns (after scaling).
Matrix apply_preprocess(const PreprocessState &state,
                        const std::vector<std::vector<std::string>> &cells,
                        const std::string &source_name);

struct LoadOptions {
  PreprocessSpec preprocess;
  bool binary = false;
  /// Optional per-site CSV with any of the columns x, y, time.
  std::optional<std::filesystem::path> sites_path;
  /// Optional per-species CSV with any of the columns group, offset.
  std::optional<std::filesystem::path> species_path;
};

struct LoadedCommunity {
  CommunityData data;
  PreprocessState preprocess;
};

LoadedCommunity load_community(const std::filesystem::path &abundance_path,
                               const std::filesystem::path &covariates_path,
                               const LoadOptions &options = {});

/// Reads DIR/abundance.csv, DIR/covariates.csv and, when present,
/// DIR/sites.csv, DIR/species.csv, DIR/preprocess.json.
LoadedCommunity load_community_dir(const std::filesystem::path &dir, bool binary = false);

/// Writes abundance.csv and covariates.csv (plus sites.csv / species.csv for
/// the optional blocks) into `dir`.
void write_community(const CommunityData &data, const std::filesystem::path &dir);

struct SplitResult {
  std::vector<int> train;
  std::vector<int> test;
  Warnings warnings;
};

/// Iterative multi-label stratification into two parts. Sites holding a
/// species that occurs only once are forced into the training part.
SplitResult stratified_split(const CommunityData &data, double test_fraction, std::uint64_t seed);

/// Iterative stratification into k folds; returns the fold of each site.
std::vector<int> stratified_folds(const CommunityData &data, int k, std::uint64_t seed);

/// Core of both splitters: assigns each site to one of ratios.size() parts.
/// `forced[k] >= 0` pins site k to that part.
std::vector<int> iterative_stratification(const Matrix &abundance, const std::vector<double> &ratios,
                                          std::uint64_t seed, const std::vector<int> &forced = {});

/// Mean abundance over the sites where each species is present.
Vector species_offsets(const CommunityData &data, Warnings *warnings = nullptr);

void to_json(nlohmann::json &j, const PreprocessSpec &s);
void from_json(const nlohmann::json &j, PreprocessSpec &s);
void to_json(nlohmann::json &j, const PreprocessState &s);
void from_json(const nlohmann::json &j, PreprocessState &s);

} // namespace ecoassoc
