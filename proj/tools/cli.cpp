#include "cli.hpp"

#include "ecoassoc/csv.hpp"
#include "ecoassoc/data.hpp"
#include "ecoassoc/evaluation.hpp"
#include "ecoassoc/inference.hpp"
#include "ecoassoc/network.hpp"
#include "ecoassoc/selection.hpp"
#include "ecoassoc/serialize.hpp"
#include "ecoassoc/sim_community.hpp"
#include "ecoassoc/sim_foodweb.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <omp.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>

namespace ecoassoc::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char *kVersion = "1.0.0";
constexpr int kManifestSchema = 1;

std::string fnv1a64(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// A JSON argument is either inline JSON or a path to a JSON file.
json parse_json_arg(const std::string &value, const std::string &what) {
  if (value.empty())
    return json::object();
  std::string text = value;
  const auto first = value.find_first_not_of(" \t\n");
  if (first != std::string::npos && value[first] != '{' && value[first] != '[') {
    if (!fs::exists(value))
      throw ValidationError(what + ": no such file '" + value + "'");
    text = csv::read_file(value);
  }
  try {
    return json::parse(text);
  } catch (const json::exception &e) {
    throw ValidationError(what + ": " + e.what());
  }
}

void check_keys(const json &j, const std::set<std::string> &known, const std::string &where) {
  if (!j.is_object())
    throw ValidationError(where + ": expected an object");
  for (const auto &item : j.items())
    if (!known.count(item.key()))
      throw ValidationError(where + "." + item.key() + ": unknown field");
}

template <class T> T field(const json &j, const std::string &key, T fallback, const std::string &where) {
  if (!j.contains(key))
    return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception &) {
    throw ValidationError(where + "." + key + ": wrong type");
  }
}

struct Manifest {
  std::string command;
  json config;
  std::uint64_t seed = 0;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  Warnings warnings;
  int jobs = 1;
};

void write_manifest(const fs::path &dir, const Manifest &m, double seconds) {
  const std::string config_bytes = m.config.dump();
  json j = {{"command", m.command},
            {"artifact_version", kVersion},
            {"manifest_schema", kManifestSchema},
            {"model_schema", kModelSchemaVersion},
            {"config", m.config},
            {"config_digest", "fnv1a64:" + fnv1a64(config_bytes)},
            {"seed", m.seed},
            {"jobs", m.jobs},
            {"inputs", m.inputs},
            {"outputs", m.outputs},
            {"warnings", m.warnings.messages},
            {"wall_time_seconds", seconds}};
  csv::write_atomic(dir / "manifest.json", j.dump(2) + "\n");
}

void write_output(const fs::path &dir, const std::string &name, const std::string &content, Manifest &m) {
  csv::write_atomic(dir / name, content);
  m.outputs.push_back(name);
}

std::string matrix_csv(const std::string &corner, const std::vector<std::string> &rows,
                       const std::vector<std::string> &cols, const Matrix &x) {
  return csv::to_csv(corner, rows, cols, x);
}

Matrix to_double(const IntMatrix &x) { return x.cast<double>(); }

// ---- simulate-community ----------------------------------------------------

struct CommunitySimSettings {
  AssemblyConfig base;
  double breadth = 20.0;
  std::vector<ExperimentDesign> designs;
  bool multi = false;
};

CommunitySimSettings community_settings(const json &cfg, const std::string &preset_flag) {
  check_keys(cfg, {"preset", "design", "designs", "assembly", "breadth"}, "config");
  CommunitySimSettings s;
  const std::string preset = preset_flag.empty() ? field<std::string>(cfg, "preset", "", "config") : preset_flag;
  if (cfg.contains("assembly")) {
    const json &a = cfg.at("assembly");
    check_keys(a,
               {"n_sites", "carrying_capacity", "b_env", "b_comp", "b_fac", "b_abun", "p_imm", "epochs",
                "tolerance", "stable_steps", "gradient_min", "gradient_max"},
               "assembly");
    auto &b = s.base;
    const int n_sites = field<int>(a, "n_sites", static_cast<int>(b.n_sites), "assembly");
    if (n_sites < 1)
      throw ValidationError("assembly.n_sites: must be positive");
    b.n_sites = static_cast<std::size_t>(n_sites);
    b.carrying_capacity = field<int>(a, "carrying_capacity", b.carrying_capacity, "assembly");
    b.b_env = field<double>(a, "b_env", b.b_env, "assembly");
    b.b_comp = field<double>(a, "b_comp", b.b_comp, "assembly");
    b.b_fac = field<double>(a, "b_fac", b.b_fac, "assembly");
    b.b_abun = field<double>(a, "b_abun", b.b_abun, "assembly");
    b.p_imm = field<double>(a, "p_imm", b.p_imm, "assembly");
    b.epochs = field<int>(a, "epochs", b.epochs, "assembly");
    b.tolerance = field<double>(a, "tolerance", b.tolerance, "assembly");
    b.stable_steps = field<int>(a, "stable_steps", b.stable_steps, "assembly");
    b.gradient_min = field<double>(a, "gradient_min", b.gradient_min, "assembly");
    b.gradient_max = field<double>(a, "gradient_max", b.gradient_max, "assembly");
    for (auto [name, w] : {std::pair{"b_env", b.b_env}, {"b_comp", b.b_comp}, {"b_fac", b.b_fac},
                           {"b_abun", b.b_abun}})
      if (!(w >= 0.0))
        throw ValidationError(std::string("assembly.") + name + ": weights must be non-negative");
    if (!(b.p_imm > 0.0))
      throw ValidationError("assembly.p_imm: must be positive");
    if (b.carrying_capacity < 1)
      throw ValidationError("assembly.carrying_capacity: must be at least 1");
  }
  s.breadth = field<double>(cfg, "breadth", s.breadth, "config");
  if (!(s.breadth > 0.0))
    throw ValidationError("config.breadth: must be positive");
  if (preset == "exp1-full") {
    s.designs = experiment1_designs();
    s.multi = true;
  } else if (!preset.empty()) {
    throw ValidationError("config.preset: unknown preset '" + preset + "'");
  } else if (cfg.contains("designs")) {
    try {
      s.designs = cfg.at("designs").get<std::vector<ExperimentDesign>>();
    } catch (const json::exception &e) {
      throw ValidationError(std::string("designs: ") + e.what());
    }
    s.multi = true;
  } else {
    try {
      s.designs = {cfg.value("design", json::object()).get<ExperimentDesign>()};
    } catch (const json::exception &e) {
      throw ValidationError(std::string("design: ") + e.what());
    }
  }
  return s;
}

void write_assembly_dataset(const fs::path &dir, const Experiment1Dataset &ds, Manifest &m,
                            const std::string &prefix) {
  fs::create_directories(dir);
  write_community(ds.result.data, dir);
  PreprocessSpec pre;
  pre.scale_columns = {0};
  pre.add_quadratic = {0};
  const auto &ids = ds.result.data.species_ids;
  csv::write_atomic(dir / "preprocess.json", json(pre).dump(2) + "\n");
  csv::write_atomic(dir / "truth.csv", matrix_csv("target", ids, ids, to_double(ds.truth)));
  csv::write_atomic(dir / "interactions.csv", matrix_csv("source", ids, ids, ds.config.interactions));
  Matrix niche(static_cast<Eigen::Index>(ids.size()), 2);
  niche.col(0) = ds.config.optima;
  niche.col(1) = ds.config.breadths;
  csv::write_atomic(dir / "niches.csv", matrix_csv("species", ids, {"optimum", "breadth"}, niche));
  for (const char *f : {"abundance.csv", "covariates.csv", "preprocess.json", "truth.csv", "interactions.csv",
                        "niches.csv"})
    m.outputs.push_back(prefix + f);
}

int cmd_simulate_community(const std::string &config_arg, const std::string &preset, const fs::path &out,
                           Manifest &m) {
  const json cfg = parse_json_arg(config_arg, "--config");
  const auto s = community_settings(cfg, preset);
  m.config = {{"config", cfg}, {"preset", preset}};
  fs::create_directories(out);
  const auto datasets = generate_experiment1(s.designs, s.base, s.breadth, m.seed);
  json index = json::array();
  for (const auto &ds : datasets) {
    const std::string name = ds.design.name();
    const fs::path dir = s.multi ? out / name : out;
    write_assembly_dataset(dir, ds, m, s.multi ? name + "/" : "");
    index.push_back({{"name", name}, {"design", ds.design}, {"seed", ds.config.seed},
                     {"truth", (s.multi ? name + "/" : std::string()) + "truth.csv"},
                     {"converged_sites", std::count(ds.result.converged.begin(), ds.result.converged.end(), 1)}});
  }
  write_output(out, "datasets.json", index.dump(2) + "\n", m);
  return 0;
}

// ---- simulate-foodweb ------------------------------------------------------

int cmd_simulate_foodweb(const std::string &config_arg, const fs::path &out, Manifest &m) {
  const json cfg = parse_json_arg(config_arg, "--config");
  check_keys(cfg, {"topology", "groups", "species_per_group", "n_sites", "breadth", "gradient_min", "gradient_max"},
             "config");
  FoodWebConfig base;
  const int groups = field<int>(cfg, "groups", 5, "config");
  const int per = field<int>(cfg, "species_per_group", 5, "config");
  const int sites = field<int>(cfg, "n_sites", 500, "config");
  if (groups < 2)
    throw ValidationError("config.groups: at least 2 groups are needed");
  if (per < 1)
    throw ValidationError("config.species_per_group: must be positive");
  if (sites < 1)
    throw ValidationError("config.n_sites: must be positive");
  base.groups = static_cast<std::size_t>(groups);
  base.species_per_group = static_cast<std::size_t>(per);
  base.n_sites = static_cast<std::size_t>(sites);
  base.breadth = field<double>(cfg, "breadth", base.breadth, "config");
  base.gradient_min = field<double>(cfg, "gradient_min", base.gradient_min, "config");
  base.gradient_max = field<double>(cfg, "gradient_max", base.gradient_max, "config");
  base.seed = m.seed;
  base.validate();
  const std::string topo = field<std::string>(cfg, "topology", "all", "config");
  std::vector<Topology> kinds;
  if (topo == "all")
    kinds = all_topologies();
  else
    kinds = {parse_topology(topo)};
  m.config = cfg;
  fs::create_directories(out);
  for (Topology t : kinds) {
    FoodWebConfig c = base;
    c.topology = t;
    const FoodWebResult r = simulate_foodweb(c);
    const bool multi = kinds.size() > 1;
    const fs::path dir = multi ? out / to_string(t) : out;
    const std::string prefix = multi ? to_string(t) + "/" : "";
    fs::create_directories(dir);
    write_community(r.data, dir);
    PreprocessSpec pre;
    pre.scale_columns = {0};
    pre.add_quadratic = {0};
    csv::write_atomic(dir / "preprocess.json", json(pre).dump(2) + "\n");
    const auto &ids = r.data.species_ids;
    csv::write_atomic(dir / "metaweb.csv", matrix_csv("consumer", ids, ids, to_double(r.metaweb)));
    csv::write_atomic(dir / "realized.csv", matrix_csv("consumer", ids, ids, to_double(r.realized)));
    const auto gids = csv::numbered("group", c.groups);
    csv::write_atomic(dir / "group_adjacency.csv",
                      matrix_csv("consumer", gids, gids, to_double(r.group_adjacency)));
    Matrix opt = r.optima;
    csv::write_atomic(dir / "niches.csv", matrix_csv("species", ids, {"optimum"}, opt));
    for (const char *f : {"abundance.csv", "covariates.csv", "species.csv", "preprocess.json", "metaweb.csv",
                          "realized.csv", "group_adjacency.csv", "niches.csv"})
      m.outputs.push_back(prefix + f);
  }
  return 0;
}

// ---- fit / select ----------------------------------------------------------

struct ModelArgs {
  std::string mode = "additive";
  std::string family = "negative_binomial";
  std::string train;
  std::size_t dim = 2;
  std::string context = "basic";
  std::optional<double> radius;
  std::optional<double> decay;
  bool pretrain = false;
  bool binary = false;
};

ModelSpec model_spec(const ModelArgs &a) {
  ModelSpec s;
  s.mode = parse_mode(a.mode);
  s.family = parse_family(a.family);
  check_mode_family(s.mode, s.family);
  s.context.variant = parse_context_variant(a.context);
  s.context.radius = a.radius;
  s.context.decay = a.decay;
  s.dim = a.dim;
  s.pretrain_habitat = a.pretrain;
  return s;
}

TrainConfig train_config(const ModelArgs &a, std::uint64_t seed, bool seed_given) {
  const json j = parse_json_arg(a.train, "--train");
  TrainConfig c;
  try {
    c = j.get<TrainConfig>();
  } catch (const json::exception &e) {
    throw ValidationError(std::string("--train: ") + e.what());
  }
  if (seed_given || !j.contains("seed"))
    c.seed = seed;
  return c;
}

json model_args_json(const ModelArgs &a, const TrainConfig &c) {
  json j = {{"mode", a.mode}, {"family", a.family}, {"dim", a.dim}, {"context", a.context},
            {"pretrain_habitat", a.pretrain}, {"binary", a.binary}, {"train", c}};
  if (a.radius)
    j["radius"] = *a.radius;
  if (a.decay)
    j["decay"] = *a.decay;
  return j;
}

bool wants_binary(const ModelArgs &a) {
  const FamilyKind f = parse_family(a.family);
  return a.binary || f == FamilyKind::bernoulli;
}

void save_bundle(const FittedModel &model, const CommunityData &data, const fs::path &dir, Manifest &m,
                 const std::string &prefix) {
  save_model({model, data.species_ids, data.covariate_names}, dir);
  for (const char *f : {"model.json", "habitat.csv", "response.csv", "effect.csv", "species.csv", "training_log.csv"})
    m.outputs.push_back(prefix + f);
  if (model.context.conditioning_weights)
    m.outputs.push_back(prefix + "conditioning.csv");
  const Matrix a = model.emb.association_matrix();
  csv::write_atomic(dir / "associations.csv", adjacency_csv(a, data.species_ids));
  m.outputs.push_back(prefix + "associations.csv");
}

int cmd_fit(const fs::path &data_dir, const ModelArgs &a, bool seed_given, const fs::path &out, Manifest &m) {
  const ModelSpec spec = model_spec(a);
  const TrainConfig cfg = train_config(a, m.seed, seed_given);
  m.config = model_args_json(a, cfg);
  m.inputs.push_back(data_dir.string());
  const auto loaded = load_community_dir(data_dir, wants_binary(a));
  const CommunityData &data = loaded.data;
  FittedModel init = initialize(data, spec, cfg, &m.warnings);
  FitOptions opt;
  opt.warnings = &m.warnings;
  const FittedModel model = fit(data, std::move(init), cfg, opt);
  fs::create_directories(out);
  save_bundle(model, data, out, m, "");
  return 0;
}

int cmd_select(const fs::path &data_dir, const std::string &grid_arg, const ModelArgs &a, bool seed_given,
               const fs::path &out, Manifest &m) {
  const ModelSpec spec = model_spec(a);
  const TrainConfig cfg = train_config(a, m.seed, seed_given);
  m.inputs.push_back(data_dir.string());
  const auto loaded = load_community_dir(data_dir, wants_binary(a));
  const CommunityData &data = loaded.data;
  json gj;
  if (grid_arg == "default" || grid_arg == "table" || grid_arg == "alpine")
    gj = {{"preset", grid_arg}};
  else
    gj = parse_json_arg(grid_arg, "--grid");
  const SelectionGrid grid = grid_from_json(gj, data.n_species());
  m.config = model_args_json(a, cfg);
  m.config["grid"] = grid;
  const SelectionReport rep = select_model(data, grid, spec, cfg);
  fs::create_directories(out);
  write_output(out, "selection.csv", selection_csv(rep), m);
  write_output(out, "selection.json", selection_summary(rep).dump(2) + "\n", m);
  ModelSpec best = spec;
  best.dim = rep.cells[rep.best].dim;
  TrainConfig bc = cfg;
  bc.lambda_l1 = rep.cells[rep.best].lambda;
  const FittedModel model = fit(data, initialize(data, best, bc, &m.warnings), bc);
  save_bundle(model, data, out / "best", m, "best/");
  return 0;
}

// ---- network ---------------------------------------------------------------

int cmd_network(const fs::path &model_dir, double eps, std::optional<double> eps_neg, int bootstrap, double ci,
                const std::string &data_dir, const ModelArgs &a, bool seed_given, int row_groups, int col_groups,
                const fs::path &out, Manifest &m) {
  const ModelBundle bundle = load_model(model_dir);
  m.inputs.push_back(model_dir.string());
  const double en = eps_neg.value_or(eps);
  if (!(eps >= 0.0) || !(en >= 0.0))
    throw ValidationError("--eps: thresholds must be non-negative");
  m.config = {{"eps_pos", eps}, {"eps_neg", en}, {"bootstrap", bootstrap}, {"ci", ci},
              {"row_groups", row_groups}, {"col_groups", col_groups}};
  Matrix strengths = bundle.model.emb.association_matrix();
  std::optional<BootstrapResult> boot;
  if (bootstrap > 0) {
    if (data_dir.empty())
      throw ValidationError("--bootstrap needs --data");
    m.inputs.push_back(data_dir);
    const auto loaded = load_community_dir(data_dir, bundle.model.family == FamilyKind::bernoulli);
    ModelSpec spec;
    spec.family = bundle.model.family;
    spec.mode = bundle.model.mode;
    spec.context = bundle.model.context;
    spec.context.conditioning_weights.reset();
    spec.dim = bundle.model.dim();
    const TrainConfig cfg = train_config(a, m.seed, seed_given);
    m.config["train"] = cfg;
    boot = bootstrap_network(loaded.data, spec, cfg, bootstrap, ci, m.seed);
    for (const auto &w : boot->warnings.messages)
      m.warnings.add(w);
    strengths = boot->strengths;
  }
  const auto &ids = bundle.species_ids;
  const AssociationNetwork net = AssociationNetwork::from_strengths(strengths, eps, en);
  const Communities comm = modularity_communities(net.strengths);
  const int n_modules = *std::max_element(comm.labels.begin(), comm.labels.end()) + 1;
  GroupStructure g = coclusters(net.strengths, row_groups > 0 ? row_groups : n_modules,
                                col_groups > 0 ? col_groups : n_modules);
  g.modules = comm.labels;
  fs::create_directories(out);
  write_output(out, "strengths.csv", adjacency_csv(net.strengths, ids), m);
  write_output(out, "labels.csv", matrix_csv("target", ids, ids, to_double(net.labels)), m);
  write_output(out, "edges.csv", edge_list_csv(net, ids), m);
  write_output(out, "groups.csv", groups_csv(g, ids), m);
  write_output(out, "summary.csv", summary_csv(summary_network(net.labels, g)), m);
  write_output(out, "network.dot", to_dot(net, ids, comm.labels), m);
  json mod = {{"modularity", comm.modularity}, {"modules", n_modules}};
  if (boot) {
    mod["bootstrap_replicates"] = boot->replicates;
    write_output(out, "ci_low.csv", adjacency_csv(boot->ci_low, ids), m);
    write_output(out, "ci_high.csv", adjacency_csv(boot->ci_high, ids), m);
  }
  write_output(out, "modularity.json", mod.dump(2) + "\n", m);
  return 0;
}

// ---- evaluate --------------------------------------------------------------

struct NamedMatrix {
  std::vector<std::string> ids;
  Matrix values;
};

NamedMatrix read_square(const fs::path &path, const std::string &what) {
  if (fs::is_directory(path)) {
    const ModelBundle b = load_model(path);
    return {b.species_ids, b.model.emb.association_matrix()};
  }
  if (!fs::exists(path))
    throw ValidationError(what + ": no such file '" + path.string() + "'");
  const auto t = csv::read_table(path);
  NamedMatrix out{t.row_ids, csv::numeric(t, path.string())};
  if (out.values.rows() != out.values.cols())
    throw ValidationError(what + ": matrix must be square");
  return out;
}

int cmd_evaluate(const fs::path &pred_path, const fs::path &truth_path, const std::string &reference, double eps,
                 std::optional<double> eps_neg, const fs::path &out, Manifest &m) {
  if (reference != "labels" && reference != "metaweb" && reference != "realized")
    throw ValidationError("--reference: expected labels, metaweb or realized");
  const NamedMatrix pred = read_square(pred_path, "--pred");
  const NamedMatrix truth = read_square(truth_path, "--truth");
  m.inputs = {pred_path.string(), truth_path.string()};
  if (pred.values.rows() != truth.values.rows())
    throw ValidationError("shape mismatch: prediction is " + std::to_string(pred.values.rows()) +
                          " species, truth " + std::to_string(truth.values.rows()));
  const double en = eps_neg.value_or(eps);
  m.config = {{"reference", reference}, {"eps_pos", eps}, {"eps_neg", en}};
  const IntMatrix truth_int = truth.values.array().round().cast<int>().matrix();
  json report = {{"reference", reference}, {"thresholds", {{"eps_pos", eps}, {"eps_neg", en}}}};
  std::string flat;
  if (reference == "labels") {
    const IntMatrix predicted = discretize(pred.values, eps, en);
    const ClassificationReport r = classify_associations(predicted, truth_int, &pred.values);
    report["classification"] = r;
    flat = "class,precision,recall,f1,pr_auc,support\n";
    for (auto [name, cm] : {std::pair<const char *, const ClassMetrics *>{"negative", &r.negative},
                            {"neutral", &r.neutral}, {"positive", &r.positive}})
      flat += std::string(name) + "," + csv::format_double(cm->precision) + "," + csv::format_double(cm->recall) +
              "," + csv::format_double(cm->f1) + "," + (cm->pr_auc ? csv::format_double(*cm->pr_auc) : "") + "," +
              std::to_string(cm->support) + "\n";
    flat += "all,,,,," + std::to_string(r.pairs) + "\n";
  } else {
    const BinaryMetrics b = binary_structure_metrics(pred.values, truth_int, eps);
    report["binary"] = b;
    flat = "metric,value\n";
    flat += "accuracy," + csv::format_double(b.accuracy) + "\n";
    flat += "auc," + (b.auc ? csv::format_double(*b.auc) : std::string()) + "\n";
    flat += "f2," + csv::format_double(b.f2) + "\n";
    flat += "tss," + csv::format_double(b.tss) + "\n";
    flat += "sensitivity," + csv::format_double(b.sensitivity) + "\n";
    flat += "specificity," + csv::format_double(b.specificity) + "\n";
  }
  fs::create_directories(out);
  write_output(out, "report.json", report.dump(2) + "\n", m);
  write_output(out, "report.csv", flat, m);
  return 0;
}

} // namespace

int run(const std::vector<std::string> &args) {
  CLI::App app{"Species association inference from community data"};
  app.set_version_flag("--version", std::string("ecoassoc ") + kVersion + " (model schema " +
                                        std::to_string(kModelSchemaVersion) + ", manifest schema " +
                                        std::to_string(kManifestSchema) + ")");
  app.require_subcommand(1);
  std::uint64_t seed = 0;
  int jobs = 1;
  fs::path out;
  app.add_option("--seed", seed, "Root random seed")->capture_default_str();
  app.add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();

  std::string config_arg, preset;
  auto *sim_c = app.add_subcommand("simulate-community", "Run the community-assembly simulator");
  sim_c->add_option("--config", config_arg, "JSON config (inline or file)");
  sim_c->add_option("--preset", preset, "Named design set (exp1-full)");
  sim_c->add_option("--out", out, "Output directory")->required();

  auto *sim_f = app.add_subcommand("simulate-foodweb", "Run the food-web occurrence simulator");
  sim_f->add_option("--config", config_arg, "JSON config (inline or file)");
  sim_f->add_option("--out", out, "Output directory")->required();

  ModelArgs margs;
  fs::path data_dir;
  auto add_model_opts = [&](CLI::App *sub) {
    sub->add_option("--mode", margs.mode, "additive, multiplicative or hierarchical")->capture_default_str();
    sub->add_option("--family", margs.family, "Response family")->capture_default_str();
    sub->add_option("--train", margs.train, "Training config JSON (inline or file)");
    sub->add_option("--dim", margs.dim, "Embedding dimension")->capture_default_str();
    sub->add_option("--context", margs.context, "basic, conditioned, temporal or spatial")->capture_default_str();
    sub->add_option("--radius", margs.radius, "Spatial context radius");
    sub->add_option("--decay", margs.decay, "Spatial distance decay");
    sub->add_flag("--pretrain-habitat", margs.pretrain, "Start habitat weights from per-species GLMs");
    sub->add_flag("--binary", margs.binary, "Read abundances as presence/absence");
  };
  auto *fit_c = app.add_subcommand("fit", "Fit an association model");
  fit_c->add_option("--data", data_dir, "Dataset directory")->required();
  add_model_opts(fit_c);
  fit_c->add_option("--out", out, "Output bundle directory")->required();

  std::string grid_arg = "default";
  auto *sel_c = app.add_subcommand("select", "Grid search over dimension and penalty");
  sel_c->add_option("--data", data_dir, "Dataset directory")->required();
  sel_c->add_option("--grid", grid_arg, "Grid JSON (inline or file) or preset name")->capture_default_str();
  add_model_opts(sel_c);
  sel_c->add_option("--out", out, "Output directory")->required();

  fs::path model_dir;
  double eps = 0.05, ci = 0.95;
  std::optional<double> eps_neg;
  int bootstrap = 0, row_groups = 0, col_groups = 0;
  std::string net_data;
  auto *net_c = app.add_subcommand("network", "Extract a discrete association network");
  net_c->add_option("--model", model_dir, "Model bundle directory")->required();
  net_c->add_option("--eps", eps, "Positive threshold (and negative unless --eps-neg)")->capture_default_str();
  net_c->add_option("--eps-neg", eps_neg, "Negative threshold");
  net_c->add_option("--bootstrap", bootstrap, "Bootstrap replicates (0 = off)")->capture_default_str();
  net_c->add_option("--ci", ci, "Bootstrap interval level")->capture_default_str();
  net_c->add_option("--data", net_data, "Dataset directory for bootstrap refits");
  net_c->add_option("--train", margs.train, "Training config for bootstrap refits");
  net_c->add_option("--row-groups", row_groups, "Response groups (default: module count)");
  net_c->add_option("--col-groups", col_groups, "Effect groups (default: module count)");
  net_c->add_option("--out", out, "Output directory")->required();

  fs::path pred_path, truth_path;
  std::string reference = "labels";
  auto *eval_c = app.add_subcommand("evaluate", "Score an association matrix against ground truth");
  eval_c->add_option("--pred", pred_path, "Strength CSV or model bundle")->required();
  eval_c->add_option("--truth", truth_path, "Truth CSV")->required();
  eval_c->add_option("--reference", reference, "labels, metaweb or realized")->capture_default_str();
  eval_c->add_option("--eps", eps, "Positive threshold")->capture_default_str();
  eval_c->add_option("--eps-neg", eps_neg, "Negative threshold");
  eval_c->add_option("--out", out, "Output directory")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  omp_set_num_threads(jobs);
  Manifest m;
  m.seed = seed;
  m.jobs = jobs;
  const bool seed_given = app.count("--seed") > 0;
  const auto start = std::chrono::steady_clock::now();
  try {
    int code = 0;
    if (*sim_c) {
      m.command = "simulate-community";
      code = cmd_simulate_community(config_arg, preset, out, m);
    } else if (*sim_f) {
      m.command = "simulate-foodweb";
      code = cmd_simulate_foodweb(config_arg, out, m);
    } else if (*fit_c) {
      m.command = "fit";
      code = cmd_fit(data_dir, margs, seed_given, out, m);
    } else if (*sel_c) {
      m.command = "select";
      code = cmd_select(data_dir, grid_arg, margs, seed_given, out, m);
    } else if (*net_c) {
      m.command = "network";
      code = cmd_network(model_dir, eps, eps_neg, bootstrap, ci, net_data, margs, seed_given, row_groups,
                         col_groups, out, m);
    } else if (*eval_c) {
      m.command = "evaluate";
      code = cmd_evaluate(pred_path, truth_path, reference, eps, eps_neg, out, m);
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_manifest(out, m, secs);
    for (const auto &w : m.warnings.messages)
      std::cerr << "warning: " << w << "\n";
    return code;
  } catch (const ValidationError &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DomainError &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const json::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError &e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  }
}

} // namespace ecoassoc::cli
