#pragma once

// Model bundles: a JSON descriptor plus CSV matrices in one directory.

#include "ecoassoc/model.hpp"

#include <filesystem>
#include <json.hpp>
#include <string>
#include <vector>

namespace ecoassoc {

inline constexpr int kModelSchemaVersion = 1;

struct ModelBundle {
  FittedModel model;
  std::vector<std::string> species_ids;
  std::vector<std::string> covariate_names;
};

void save_model(const ModelBundle &bundle, const std::filesystem::path &dir);
/// Throws ValidationError for a missing or malformed bundle.
ModelBundle load_model(const std::filesystem::path &dir);

std::string training_log_csv(const std::vector<EpochLog> &log);

void to_json(nlohmann::json &j, const BioticContextSpec &s);
BioticContextSpec context_from_json(const nlohmann::json &j);

} // namespace ecoassoc
