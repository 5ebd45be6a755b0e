#include "ecoassoc/selection.hpp"

#include "ecoassoc/csv.hpp"
#include "ecoassoc/rng.hpp"
#include "ecoassoc/stats.hpp"

#include <cmath>
#include <sstream>

namespace ecoassoc {

const char *const kParameterCountRule =
    "habitat weights (unless frozen) + non-zero shared embedding entries + dispersions + learned offsets + "
    "conditioning weights";

std::string to_string(Criterion c) {
  switch (c) {
  case Criterion::aic: return "aic";
  case Criterion::bic: return "bic";
  case Criterion::ebic: return "ebic";
  case Criterion::cv: return "cv";
  }
  return "?";
}

std::string to_string(Metric m) {
  switch (m) {
  case Metric::poisson_deviance: return "poisson_deviance";
  case Metric::auc: return "auc";
  case Metric::accuracy: return "accuracy";
  }
  return "?";
}

Criterion parse_criterion(std::string_view n) {
  for (auto c : {Criterion::aic, Criterion::bic, Criterion::ebic, Criterion::cv})
    if (to_string(c) == n)
      return c;
  throw ValidationError("unknown criterion '" + std::string(n) + "'");
}

Metric parse_metric(std::string_view n) {
  for (auto m : {Metric::poisson_deviance, Metric::auc, Metric::accuracy})
    if (to_string(m) == n)
      return m;
  throw ValidationError("unknown metric '" + std::string(n) + "'");
}

void SelectionGrid::validate() const {
  if (dims.empty() || lambdas.empty())
    throw ValidationError("grid: dims and lambdas must be non-empty");
  for (auto d : dims)
    if (d < 1)
      throw ValidationError("grid.dims: entries must be positive");
  for (double l : lambdas)
    if (!(l >= 0.0))
      throw ValidationError("grid.lambdas: entries must be non-negative");
  if (criterion == Criterion::cv && folds < 2)
    throw ValidationError("grid.folds: at least 2 folds are needed");
  if (!(ebic_gamma >= 0.0))
    throw ValidationError("grid.ebic_gamma: must be non-negative");
}

std::vector<std::size_t> SelectionGrid::default_dims(std::size_t m) {
  std::vector<std::size_t> out;
  for (std::size_t d = 1; d <= std::max<std::size_t>(1, m / 2); d *= 2)
    out.push_back(d);
  return out;
}

SelectionGrid SelectionGrid::preset(std::string_view name, std::size_t m) {
  SelectionGrid g;
  g.dims = default_dims(m);
  if (name == "default")
    return g;
  if (name == "table") {
    g.lambdas = {0.010, 0.020, 0.030, 0.040};
    return g;
  }
  if (name == "alpine") {
    g.dims = {2, 4, 8, 16, 32};
    g.metric = Metric::accuracy;
    return g;
  }
  throw ValidationError("unknown grid preset '" + std::string(name) + "'");
}

void to_json(nlohmann::json &j, const SelectionGrid &g) {
  j = {{"dims", g.dims},           {"lambdas", g.lambdas}, {"criterion", to_string(g.criterion)},
       {"folds", g.folds},         {"metric", to_string(g.metric)}, {"ebic_gamma", g.ebic_gamma}};
}

SelectionGrid grid_from_json(const nlohmann::json &j, std::size_t m) {
  SelectionGrid g = SelectionGrid::preset(j.value("preset", "default"), m);
  for (const auto &item : j.items()) {
    const auto &k = item.key();
    if (k != "preset" && k != "dims" && k != "lambdas" && k != "criterion" && k != "folds" && k != "metric" &&
        k != "ebic_gamma")
      throw ValidationError("grid: unknown field '" + k + "'");
  }
  try {
    if (j.contains("dims"))
      g.dims = j.at("dims").get<std::vector<std::size_t>>();
    if (j.contains("lambdas"))
      g.lambdas = j.at("lambdas").get<std::vector<double>>();
    if (j.contains("folds"))
      g.folds = j.at("folds").get<int>();
    if (j.contains("ebic_gamma"))
      g.ebic_gamma = j.at("ebic_gamma").get<double>();
  } catch (const nlohmann::json::exception &e) {
    throw ValidationError(std::string("grid: ") + e.what());
  }
  if (j.contains("criterion"))
    g.criterion = parse_criterion(j.at("criterion").get<std::string>());
  if (j.contains("metric"))
    g.metric = parse_metric(j.at("metric").get<std::string>());
  g.validate();
  return g;
}

double information_criterion(double logL, double k, double n, Criterion kind, double gamma, std::size_t m) {
  if (n < 1)
    throw ValidationError("information_criterion: need at least one observation");
  switch (kind) {
  case Criterion::aic: return 2.0 * k - 2.0 * logL;
  case Criterion::bic: return k * std::log(n) - 2.0 * logL;
  case Criterion::ebic:
    return k * std::log(n) - 2.0 * logL + 2.0 * gamma * k * std::log(static_cast<double>(m));
  case Criterion::cv: break;
  }
  throw ValidationError("information_criterion: cv is not an information criterion");
}

std::size_t effective_dimension(const EmbeddingPair &emb, double threshold) {
  std::size_t count = 0;
  for (Eigen::Index l = 0; l < emb.response.cols(); ++l) {
    const double mx = std::max(emb.response.col(l).cwiseAbs().maxCoeff(), emb.effect.col(l).cwiseAbs().maxCoeff());
    if (mx >= threshold)
      ++count;
  }
  return count;
}

std::size_t parameter_count(const FittedModel &model) {
  std::size_t k = 0;
  const auto m = model.n_species();
  if (!model.habitat_frozen)
    k += static_cast<std::size_t>(model.habitat.weights.size());
  std::vector<char> seen(m, 0);
  for (std::size_t i = 0; i < m; ++i) {
    const auto g = static_cast<std::size_t>(model.embedding_rows[i]);
    if (seen[g])
      continue;
    seen[g] = 1;
    for (Eigen::Index l = 0; l < model.emb.response.cols(); ++l) {
      k += model.emb.response(static_cast<Eigen::Index>(i), l) != 0.0 ? 1 : 0;
      k += model.emb.effect(static_cast<Eigen::Index>(i), l) != 0.0 ? 1 : 0;
    }
  }
  if (has_dispersion(model.family))
    k += m;
  if (model.offsets_learned)
    k += m;
  if (model.context.conditioning_weights)
    k += static_cast<std::size_t>(model.context.conditioning_weights->size());
  return k;
}

bool higher_is_better(Metric metric) { return metric != Metric::poisson_deviance; }

double holdout_score(const FittedModel &model, const CommunityData &data, const std::vector<int> &sites,
                     Metric metric, std::vector<int> *excluded) {
  const Prediction pred = predict(model, data);
  const bool positive_only = model.mode == AggregationMode::hierarchical;
  const Matrix &mean = positive_only ? *pred.abundance_mean : pred.mean;
  std::vector<double> y, mu;
  std::vector<int> labels;
  for (std::size_t i = 0; i < data.n_species(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    bool present = false;
    for (int k : sites)
      present = present || data.abundance(k, ii) > 0.0;
    if (!present) {
      if (excluded)
        excluded->push_back(static_cast<int>(i));
      continue;
    }
    for (int k : sites) {
      const double v = data.abundance(k, ii);
      if (metric == Metric::poisson_deviance) {
        if (positive_only && v <= 0.0)
          continue;
        y.push_back(v);
        mu.push_back(std::max(mean(k, ii), 1e-12));
      } else {
        y.push_back(v);
        mu.push_back(pred.mean(k, ii));
        labels.push_back(v > 0.0 ? 1 : 0);
      }
    }
  }
  if (y.empty())
    throw ValidationError("holdout_score: no scorable cells");
  switch (metric) {
  case Metric::poisson_deviance:
    return poisson_deviance(y, mu) / static_cast<double>(y.size());
  case Metric::auc: {
    const auto a = stats::roc_auc(mu, labels);
    return a ? *a : 0.5;
  }
  case Metric::accuracy: {
    double hit = 0.0;
    for (std::size_t t = 0; t < y.size(); ++t)
      hit += ((mu[t] > 0.5) == (labels[t] == 1)) ? 1.0 : 0.0;
    return hit / static_cast<double>(y.size());
  }
  }
  return 0.0;
}

namespace {

bool better(double a, double b, Metric metric) { return higher_is_better(metric) ? a > b : a < b; }

std::size_t pick_best(const std::vector<CellResult> &cells, const SelectionGrid &grid) {
  const Metric metric = grid.criterion == Criterion::cv ? grid.metric : Metric::poisson_deviance;
  std::size_t best = 0;
  for (std::size_t c = 1; c < cells.size(); ++c) {
    const auto &a = cells[c], &b = cells[best];
    if (better(a.mean_score, b.mean_score, metric) ||
        (a.mean_score == b.mean_score &&
         (a.dim < b.dim || (a.dim == b.dim && a.lambda > b.lambda))))
      best = c;
  }
  return best;
}

} // namespace

SelectionReport select_model(const CommunityData &data, const SelectionGrid &grid, const ModelSpec &spec,
                             const TrainConfig &config) {
  grid.validate();
  config.validate();
  data.validate();
  SelectionReport rep;
  rep.grid = grid;
  for (auto d : grid.dims)
    for (double l : grid.lambdas) {
      CellResult c;
      c.dim = d;
      c.lambda = l;
      rep.cells.push_back(c);
    }
  const int n_cells = static_cast<int>(rep.cells.size());

  if (grid.criterion != Criterion::cv) {
    std::vector<std::string> errors(rep.cells.size());
#pragma omp parallel for schedule(dynamic)
    for (int c = 0; c < n_cells; ++c) {
      auto &cell = rep.cells[static_cast<std::size_t>(c)];
      try {
        ModelSpec s = spec;
        s.dim = cell.dim;
        TrainConfig t = config;
        t.lambda_l1 = cell.lambda;
        const FittedModel model = fit(data, initialize(data, s, t), t);
        const double logL = -model_nll(model, data);
        cell.parameters = parameter_count(model);
        cell.mean_score = information_criterion(logL, static_cast<double>(cell.parameters),
                                                static_cast<double>(data.n_sites() * data.n_species()),
                                                grid.criterion, grid.ebic_gamma, data.n_species());
        cell.folds.push_back({0, cell.mean_score, effective_dimension(model.emb), {}});
      } catch (const std::exception &e) {
        errors[static_cast<std::size_t>(c)] = e.what();
      }
    }
    for (const auto &e : errors)
      if (!e.empty())
        throw NumericalError("selection: " + e);
    rep.best = pick_best(rep.cells, grid);
    return rep;
  }

  if (static_cast<std::size_t>(grid.folds) > data.n_sites())
    throw ValidationError("grid.folds: " + std::to_string(grid.folds) + " folds exceed " +
                          std::to_string(data.n_sites()) + " sites");
  const std::vector<int> fold_of = stratified_folds(data, grid.folds, stream_seed(config.seed, "cv_folds"));
  std::vector<std::vector<int>> test(static_cast<std::size_t>(grid.folds)),
      train(static_cast<std::size_t>(grid.folds));
  for (std::size_t k = 0; k < fold_of.size(); ++k)
    for (int f = 0; f < grid.folds; ++f)
      (fold_of[k] == f ? test : train)[static_cast<std::size_t>(f)].push_back(static_cast<int>(k));

  for (auto &cell : rep.cells)
    cell.folds.resize(static_cast<std::size_t>(grid.folds));
  const int jobs = n_cells * grid.folds;
  std::vector<std::string> errors(static_cast<std::size_t>(jobs));
#pragma omp parallel for schedule(dynamic)
  for (int job = 0; job < jobs; ++job) {
    const int c = job / grid.folds, f = job % grid.folds;
    auto &cell = rep.cells[static_cast<std::size_t>(c)];
    auto &out = cell.folds[static_cast<std::size_t>(f)];
    out.fold = f;
    try {
      ModelSpec s = spec;
      s.dim = cell.dim;
      TrainConfig t = config;
      t.lambda_l1 = cell.lambda;
      t.seed = stream_seed(config.seed, "cv_fit", static_cast<std::uint64_t>(f));
      const auto &tr = train[static_cast<std::size_t>(f)];
      const CommunityData train_data = data.subset(tr);
      FittedModel init = initialize(train_data, s, t);
      // Contexts are built on the full data so spatial and temporal
      // neighbours of training sites stay intact; offsets come from training
      // sites only.
      FitOptions opt;
      opt.train_sites = tr;
      opt.validation_sites.emplace();
      if (t.validation_fraction > 0.0 && tr.size() >= 10) {
        const auto inner = stratified_split(train_data, t.validation_fraction, stream_seed(t.seed, "validation"));
        opt.train_sites->clear();
        for (int k : inner.train)
          opt.train_sites->push_back(tr[static_cast<std::size_t>(k)]);
        for (int k : inner.test)
          opt.validation_sites->push_back(tr[static_cast<std::size_t>(k)]);
      }
      const FittedModel model = fit(data, std::move(init), t, opt);
      out.score = holdout_score(model, data, test[static_cast<std::size_t>(f)], grid.metric, &out.excluded_species);
      out.effective_dimension = effective_dimension(model.emb);
    } catch (const std::exception &e) {
      errors[static_cast<std::size_t>(job)] = e.what();
    }
  }
  for (const auto &e : errors)
    if (!e.empty())
      throw NumericalError("cross-validation: " + e);
  for (auto &cell : rep.cells) {
    double s = 0.0;
    for (const auto &f : cell.folds)
      s += f.score;
    cell.mean_score = s / static_cast<double>(cell.folds.size());
  }
  rep.best = pick_best(rep.cells, grid);
  return rep;
}

SelectionReport cross_validate(const CommunityData &data, const SelectionGrid &grid, const ModelSpec &spec,
                               const TrainConfig &config) {
  SelectionGrid g = grid;
  g.criterion = Criterion::cv;
  return select_model(data, g, spec, config);
}

std::string selection_csv(const SelectionReport &rep) {
  std::ostringstream out;
  out << "dim,lambda,fold,score,effective_dimension,excluded_species\n";
  for (const auto &c : rep.cells)
    for (const auto &f : c.folds) {
      out << c.dim << ',' << csv::format_double(c.lambda) << ',' << f.fold << ',' << csv::format_double(f.score)
          << ',' << f.effective_dimension << ',';
      for (std::size_t t = 0; t < f.excluded_species.size(); ++t)
        out << (t ? ";" : "") << f.excluded_species[t];
      out << '\n';
    }
  return out.str();
}

nlohmann::json selection_summary(const SelectionReport &rep) {
  const auto &b = rep.cells[rep.best];
  nlohmann::json cells = nlohmann::json::array();
  for (const auto &c : rep.cells)
    cells.push_back({{"dim", c.dim}, {"lambda", c.lambda}, {"mean_score", c.mean_score}});
  nlohmann::json j = {{"grid", rep.grid},
                      {"best", {{"dim", b.dim}, {"lambda", b.lambda}, {"mean_score", b.mean_score}}},
                      {"cells", cells},
                      {"parameter_count_rule", kParameterCountRule},
                      {"tie_break", "smaller dim, then larger lambda"}};
  if (rep.grid.criterion != Criterion::cv)
    j["best"]["parameters"] = b.parameters;
  return j;
}

} // namespace ecoassoc
