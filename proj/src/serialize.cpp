#include "ecoassoc/serialize.hpp"

#include "ecoassoc/csv.hpp"

#include <sstream>

namespace ecoassoc {

namespace fs = std::filesystem;

std::string training_log_csv(const std::vector<EpochLog> &log) {
  std::ostringstream out;
  out << "epoch,train_loss,validation_loss\n";
  for (const auto &e : log)
    out << e.epoch << ',' << csv::format_double(e.train_loss) << ',' << csv::format_double(e.validation_loss)
        << '\n';
  return out.str();
}

void to_json(nlohmann::json &j, const BioticContextSpec &s) {
  j = {{"variant", to_string(s.variant)}};
  if (s.radius)
    j["radius"] = *s.radius;
  if (s.decay)
    j["decay"] = *s.decay;
}

BioticContextSpec context_from_json(const nlohmann::json &j) {
  BioticContextSpec s;
  s.variant = parse_context_variant(j.value("variant", "basic"));
  if (j.contains("radius"))
    s.radius = j.at("radius").get<double>();
  if (j.contains("decay"))
    s.decay = j.at("decay").get<double>();
  return s;
}

void save_model(const ModelBundle &b, const fs::path &dir) {
  const FittedModel &m = b.model;
  m.validate();
  fs::create_directories(dir);
  const auto dims = csv::numbered("dim", m.dim());
  std::vector<std::string> hab_cols = b.covariate_names;
  hab_cols.push_back("intercept");
  csv::write_atomic(dir / "habitat.csv", csv::to_csv("species", b.species_ids, hab_cols, m.habitat.weights));
  csv::write_atomic(dir / "response.csv", csv::to_csv("species", b.species_ids, dims, m.emb.response));
  csv::write_atomic(dir / "effect.csv", csv::to_csv("species", b.species_ids, dims, m.emb.effect));
  Matrix sp(static_cast<Eigen::Index>(m.n_species()), 3);
  sp.col(0) = m.offsets;
  sp.col(1) = m.log_dispersion;
  for (std::size_t i = 0; i < m.n_species(); ++i)
    sp(static_cast<Eigen::Index>(i), 2) = m.embedding_rows[i];
  csv::write_atomic(dir / "species.csv",
                    csv::to_csv("species", b.species_ids, {"offset", "log_dispersion", "embedding_row"}, sp));
  std::vector<std::string> cond_rows = b.covariate_names;
  cond_rows.push_back("intercept");
  if (m.context.conditioning_weights)
    csv::write_atomic(dir / "conditioning.csv",
                      csv::to_csv("covariate", cond_rows, dims, *m.context.conditioning_weights));
  csv::write_atomic(dir / "training_log.csv", training_log_csv(m.training_log));
  nlohmann::json j = {{"schema_version", kModelSchemaVersion},
                      {"family", to_string(m.family)},
                      {"mode", to_string(m.mode)},
                      {"context", m.context},
                      {"dim", m.dim()},
                      {"non_negative", m.non_negative},
                      {"habitat_frozen", m.habitat_frozen},
                      {"offsets_learned", m.offsets_learned},
                      {"seed", m.seed},
                      {"species", b.species_ids},
                      {"covariates", b.covariate_names},
                      {"files",
                       {{"habitat", "habitat.csv"},
                        {"response", "response.csv"},
                        {"effect", "effect.csv"},
                        {"species", "species.csv"},
                        {"training_log", "training_log.csv"}}}};
  if (m.context.conditioning_weights)
    j["files"]["conditioning"] = "conditioning.csv";
  csv::write_atomic(dir / "model.json", j.dump(2) + "\n");
}

namespace {

Matrix read_matrix(const fs::path &path, std::size_t rows, std::size_t cols) {
  const auto t = csv::read_table(path);
  Matrix x = csv::numeric(t, path.string());
  if (static_cast<std::size_t>(x.rows()) != rows || static_cast<std::size_t>(x.cols()) != cols)
    throw ValidationError(path.string() + ": expected " + std::to_string(rows) + "x" + std::to_string(cols) +
                          " values");
  return x;
}

} // namespace

ModelBundle load_model(const fs::path &dir) {
  const fs::path desc = dir / "model.json";
  if (!fs::exists(desc))
    throw ValidationError("no model bundle at " + dir.string() + " (model.json missing)");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(csv::read_file(desc));
  } catch (const nlohmann::json::exception &e) {
    throw ValidationError(desc.string() + ": " + e.what());
  }
  ModelBundle b;
  try {
    const int version = j.at("schema_version").get<int>();
    if (version != kModelSchemaVersion)
      throw ValidationError(desc.string() + ": unsupported schema_version " + std::to_string(version));
    FittedModel &m = b.model;
    m.family = parse_family(j.at("family").get<std::string>());
    m.mode = parse_mode(j.at("mode").get<std::string>());
    m.context = context_from_json(j.at("context"));
    m.non_negative = j.at("non_negative").get<bool>();
    m.habitat_frozen = j.at("habitat_frozen").get<bool>();
    m.offsets_learned = j.at("offsets_learned").get<bool>();
    m.seed = j.at("seed").get<std::uint64_t>();
    b.species_ids = j.at("species").get<std::vector<std::string>>();
    b.covariate_names = j.at("covariates").get<std::vector<std::string>>();
    const auto d = j.at("dim").get<std::size_t>();
    const std::size_t ms = b.species_ids.size(), p = b.covariate_names.size();
    const auto &files = j.at("files");
    m.habitat.weights = read_matrix(dir / files.at("habitat").get<std::string>(), ms, p + 1);
    m.emb = EmbeddingPair(read_matrix(dir / files.at("response").get<std::string>(), ms, d),
                          read_matrix(dir / files.at("effect").get<std::string>(), ms, d));
    const Matrix sp = read_matrix(dir / files.at("species").get<std::string>(), ms, 3);
    m.offsets = sp.col(0);
    m.log_dispersion = sp.col(1);
    m.embedding_rows.resize(ms);
    for (std::size_t i = 0; i < ms; ++i)
      m.embedding_rows[i] = static_cast<int>(sp(static_cast<Eigen::Index>(i), 2));
    if (files.contains("conditioning"))
      m.context.conditioning_weights = read_matrix(dir / files.at("conditioning").get<std::string>(), p + 1, d);
    if (files.contains("training_log")) {
      const auto t = csv::read_table(dir / files.at("training_log").get<std::string>());
      const Matrix log = csv::numeric(t, "training_log.csv");
      for (Eigen::Index r = 0; r < log.rows(); ++r)
        m.training_log.push_back({std::stoi(t.row_ids[static_cast<std::size_t>(r)]), log(r, 0), log(r, 1)});
    }
    m.validate();
  } catch (const nlohmann::json::exception &e) {
    throw ValidationError(desc.string() + ": " + e.what());
  } catch (const std::invalid_argument &e) {
    throw ValidationError(desc.string() + ": " + e.what());
  }
  return b;
}

} // namespace ecoassoc
