#include "ecoassoc/inference.hpp"

#include "ecoassoc/glm.hpp"
#include "ecoassoc/kernels.hpp"
#include "ecoassoc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace ecoassoc {

namespace {
constexpr double kLogDispLo = -8.0;
constexpr double kLogDispHi = 12.0;
constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;
constexpr double kInitScale = 0.05;
} // namespace

std::string to_string(OptimizerKind k) { return k == OptimizerKind::adam ? "adam" : "sgd_momentum"; }

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "adam") return OptimizerKind::adam;
  if (name == "sgd_momentum" || name == "sgd") return OptimizerKind::sgd_momentum;
  throw ValidationError("unknown optimizer '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ValidationError("momentum must be in [0,1)");
  if (batch_size < 1) throw ValidationError("batch_size must be positive");
  if (max_epochs < 0) throw ValidationError("max_epochs must be non-negative");
  if (patience < 1) throw ValidationError("patience must be positive");
  if (!(tolerance >= 0.0)) throw ValidationError("tolerance must be non-negative");
  if (!(lambda_l1 >= 0.0) || !(lambda_l2 >= 0.0)) throw ValidationError("penalties must be non-negative");
  if (!(negative_subsample > 0.0 && negative_subsample <= 1.0))
    throw ValidationError("negative_subsample must be in (0,1]");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
    throw ValidationError("validation_fraction must be in [0,1)");
}

void to_json(nlohmann::json &j, const TrainConfig &c) {
  j = nlohmann::json{{"optimizer", to_string(c.optimizer)},
                     {"learning_rate", c.learning_rate},
                     {"momentum", c.momentum},
                     {"batch_size", c.batch_size},
                     {"max_epochs", c.max_epochs},
                     {"patience", c.patience},
                     {"tolerance", c.tolerance},
                     {"lambda_l1", c.lambda_l1},
                     {"lambda_l2", c.lambda_l2},
                     {"non_negative", c.non_negative},
                     {"share_groups", c.share_groups},
                     {"negative_subsample", c.negative_subsample},
                     {"seed", c.seed},
                     {"freeze_habitat", c.freeze_habitat},
                     {"learn_offsets", c.learn_offsets},
                     {"validation_fraction", c.validation_fraction}};
}

void from_json(const nlohmann::json &j, TrainConfig &c) {
  static const char *known[] = {"optimizer",     "learning_rate", "momentum",           "batch_size",
                                "max_epochs",    "patience",      "tolerance",          "lambda_l1",
                                "lambda_l2",     "non_negative",  "share_groups",       "negative_subsample",
                                "seed",          "freeze_habitat", "learn_offsets",     "validation_fraction"};
  for (const auto &item : j.items())
    if (std::find_if(std::begin(known), std::end(known), [&](const char *k) { return item.key() == k; }) ==
        std::end(known))
      throw ValidationError("unknown training option '" + item.key() + "'");
  TrainConfig d;
  c.optimizer = parse_optimizer(j.value("optimizer", to_string(d.optimizer)));
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.momentum = j.value("momentum", d.momentum);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.max_epochs = j.value("max_epochs", d.max_epochs);
  c.patience = j.value("patience", d.patience);
  c.tolerance = j.value("tolerance", d.tolerance);
  c.lambda_l1 = j.value("lambda_l1", d.lambda_l1);
  c.lambda_l2 = j.value("lambda_l2", d.lambda_l2);
  c.non_negative = j.value("non_negative", d.non_negative);
  c.share_groups = j.value("share_groups", d.share_groups);
  c.negative_subsample = j.value("negative_subsample", d.negative_subsample);
  c.seed = j.value("seed", d.seed);
  c.freeze_habitat = j.value("freeze_habitat", d.freeze_habitat);
  c.learn_offsets = j.value("learn_offsets", d.learn_offsets);
  c.validation_fraction = j.value("validation_fraction", d.validation_fraction);
  c.validate();
}

std::vector<int> group_rows(const std::vector<int> &labels) {
  std::map<int, int> index;
  std::vector<int> rows(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto [it, inserted] = index.emplace(labels[i], static_cast<int>(index.size()));
    rows[i] = it->second;
  }
  return rows;
}

FittedModel initialize(const CommunityData &data, const ModelSpec &spec, const TrainConfig &config,
                       Warnings *warnings) {
  data.validate();
  config.validate();
  check_mode_family(spec.mode, spec.family);
  if (spec.dim < 1)
    throw ValidationError("embedding dimension must be at least 1");
  const std::size_t m = data.n_species(), p = data.n_covariates(), d = spec.dim;
  if (d > m && warnings)
    warnings->add("embedding dimension " + std::to_string(d) + " exceeds species count " + std::to_string(m));
  if (spec.family == FamilyKind::bernoulli && !data.all_binary())
    throw ValidationError("bernoulli family needs 0/1 data");

  FittedModel model;
  model.family = spec.family;
  model.mode = spec.mode;
  model.context = spec.context;
  if (model.context.variant == ContextVariant::conditioned && !model.context.conditioning_weights)
    model.context.conditioning_weights = BioticContextSpec::neutral_conditioning(p, d);
  model.context.validate(data, d);
  model.non_negative = config.non_negative;
  model.habitat_frozen = config.freeze_habitat;
  model.offsets_learned = config.learn_offsets;
  model.seed = config.seed;

  if (config.share_groups) {
    if (!data.group_labels)
      throw ValidationError("share_groups needs species group labels");
    model.embedding_rows = group_rows(*data.group_labels);
  } else {
    model.embedding_rows.resize(m);
    std::iota(model.embedding_rows.begin(), model.embedding_rows.end(), 0);
  }
  const int groups = *std::max_element(model.embedding_rows.begin(), model.embedding_rows.end()) + 1;

  Rng rng = make_stream(config.seed, "init");
  const double lo = config.non_negative ? 0.0 : -kInitScale;
  Matrix pg(groups, static_cast<Eigen::Index>(d)), qg(groups, static_cast<Eigen::Index>(d));
  for (Eigen::Index g = 0; g < groups; ++g)
    for (Eigen::Index l = 0; l < pg.cols(); ++l)
      pg(g, l) = uniform(rng, lo, kInitScale);
  for (Eigen::Index g = 0; g < groups; ++g)
    for (Eigen::Index l = 0; l < qg.cols(); ++l)
      qg(g, l) = uniform(rng, lo, kInitScale);
  model.emb = EmbeddingPair(pg(model.embedding_rows, Eigen::all), qg(model.embedding_rows, Eigen::all));

  const Vector raw = data.offsets ? *data.offsets : species_offsets(data, warnings);
  model.offsets = Vector::Zero(static_cast<Eigen::Index>(m));
  if (spec.family != FamilyKind::bernoulli)
    for (std::size_t i = 0; i < m; ++i)
      model.offsets(static_cast<Eigen::Index>(i)) = raw(static_cast<Eigen::Index>(i)) > 0
                                                        ? std::log(raw(static_cast<Eigen::Index>(i)))
                                                        : 0.0;
  if (spec.family == FamilyKind::normal)
    model.offsets = raw;

  model.log_dispersion = Vector::Zero(static_cast<Eigen::Index>(m));
  model.habitat = HabitatModel::zeros(m, p);
  if (spec.pretrain_habitat) {
    const HabitatFit glm = fit_habitat_glms(data, spec.family, spec.mode, model.offsets);
    model.habitat = glm.habitat;
    if (has_dispersion(habitat_family(spec.mode, spec.family)))
      model.log_dispersion = glm.log_dispersion;
  }
  model.validate();
  return model;
}

double penalty(const EmbeddingPair &emb, double l1, double l2) {
  if (l1 < 0 || l2 < 0)
    throw ValidationError("penalty weights must be non-negative");
  return l1 * (emb.response.cwiseAbs().sum() + emb.effect.cwiseAbs().sum()) +
         l2 * (emb.response.squaredNorm() + emb.effect.squaredNorm());
}

double objective(const FittedModel &model, const CommunityData &data, const TrainConfig &config,
                 const std::vector<int> &sites) {
  const auto use = sites.empty() ? kernels::all_sites(data.n_sites()) : sites;
  const ContextTable table(data, model.context);
  const auto view = kernels::ModelView::of(model);
  const double nll = kernels::loss_parallel(view, data, table, use);
  return nll / static_cast<double>(use.size()) + penalty(model.emb, config.lambda_l1, config.lambda_l2);
}

namespace {

/// Optimizer state for one parameter block.
struct Slot {
  Matrix first;
  Matrix second;

  void resize(Eigen::Index r, Eigen::Index c) {
    first = Matrix::Zero(r, c);
    second = Matrix::Zero(r, c);
  }
};

struct Trainer {
  const CommunityData &data;
  const TrainConfig &cfg;
  FittedModel model;
  ContextTable table;
  Matrix pg, qg; // group-level embeddings
  Vector group_size;
  Slot s_hab, s_p, s_q, s_off, s_disp, s_w;
  long step = 0;

  Trainer(const CommunityData &d, const TrainConfig &c, FittedModel m)
      : data(d), cfg(c), model(std::move(m)), table(d, model.context) {
    const int groups = *std::max_element(model.embedding_rows.begin(), model.embedding_rows.end()) + 1;
    const auto dim = static_cast<Eigen::Index>(model.dim());
    pg = Matrix::Zero(groups, dim);
    qg = Matrix::Zero(groups, dim);
    group_size = Vector::Zero(groups);
    for (std::size_t i = 0; i < model.embedding_rows.size(); ++i) {
      const int g = model.embedding_rows[i];
      pg.row(g) = model.emb.response.row(static_cast<Eigen::Index>(i));
      qg.row(g) = model.emb.effect.row(static_cast<Eigen::Index>(i));
      group_size(g) += 1.0;
    }
    s_hab.resize(model.habitat.weights.rows(), model.habitat.weights.cols());
    s_p.resize(groups, dim);
    s_q.resize(groups, dim);
    s_off.resize(model.offsets.size(), 1);
    s_disp.resize(model.log_dispersion.size(), 1);
    if (model.context.conditioning_weights)
      s_w.resize(model.context.conditioning_weights->rows(), model.context.conditioning_weights->cols());
  }

  void expand() {
    model.emb.response = pg(model.embedding_rows, Eigen::all);
    model.emb.effect = qg(model.embedding_rows, Eigen::all);
  }

  Matrix reduce(const Matrix &per_species) const {
    Matrix out = Matrix::Zero(pg.rows(), pg.cols());
    for (std::size_t i = 0; i < model.embedding_rows.size(); ++i)
      out.row(model.embedding_rows[i]) += per_species.row(static_cast<Eigen::Index>(i));
    return out;
  }

  /// One optimizer step; returns the per-entry L1 threshold scale (lr or the
  /// Adam-preconditioned lr) so the caller can apply the prox.
  Matrix update(Eigen::Ref<Matrix> x, const Matrix &g, Slot &s) {
    if (cfg.optimizer == OptimizerKind::adam) {
      s.first = kAdamBeta1 * s.first + (1.0 - kAdamBeta1) * g;
      s.second = kAdamBeta2 * s.second + (1.0 - kAdamBeta2) * g.cwiseAbs2();
      const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(step));
      const Matrix denom = ((s.second / c2).cwiseSqrt().array() + kAdamEps).matrix();
      x.array() -= cfg.learning_rate * (s.first / c1).array() / denom.array();
      return (cfg.learning_rate / denom.array()).matrix();
    }
    s.first = cfg.momentum * s.first - cfg.learning_rate * g;
    x += s.first;
    return Matrix::Constant(x.rows(), x.cols(), cfg.learning_rate);
  }

  void prox(Matrix &x, const Matrix &scale, Slot &s) {
    for (Eigen::Index g = 0; g < x.rows(); ++g)
      for (Eigen::Index l = 0; l < x.cols(); ++l) {
        double &v = x(g, l);
        const double t = scale(g, l) * cfg.lambda_l1 * group_size(g);
        double nv = v > t ? v - t : (v < -t ? v + t : 0.0);
        if (cfg.non_negative && nv < 0.0)
          nv = 0.0;
        if (nv == 0.0 && v != 0.0) {
          s.first(g, l) = 0.0;
          s.second(g, l) = 0.0;
        }
        v = nv;
      }
  }

  void apply(const kernels::Gradient &grad, double inv_batch) {
    ++step;
    if (!model.habitat_frozen) {
      const Matrix g = grad.habitat * inv_batch;
      update(model.habitat.weights, g, s_hab);
    }
    Matrix gp = reduce(grad.response) * inv_batch;
    Matrix gq = reduce(grad.effect) * inv_batch;
    if (cfg.lambda_l2 > 0.0) {
      gp += 2.0 * cfg.lambda_l2 * (group_size.asDiagonal() * pg);
      gq += 2.0 * cfg.lambda_l2 * (group_size.asDiagonal() * qg);
    }
    const Matrix sp = update(pg, gp, s_p);
    const Matrix sq = update(qg, gq, s_q);
    prox(pg, sp, s_p);
    prox(qg, sq, s_q);
    if (model.offsets_learned) {
      Matrix x = model.offsets;
      update(x, grad.offsets * inv_batch, s_off);
      model.offsets = x;
    }
    if (has_dispersion(model.family)) {
      Matrix x = model.log_dispersion;
      update(x, grad.log_dispersion * inv_batch, s_disp);
      model.log_dispersion = x.col(0).cwiseMax(kLogDispLo).cwiseMin(kLogDispHi);
    }
    if (model.context.conditioning_weights)
      update(*model.context.conditioning_weights, grad.conditioning * inv_batch, s_w);
    expand();
  }

  double mean_loss(const std::vector<int> &sites) const {
    if (sites.empty())
      return 0.0;
    const auto view = kernels::ModelView::of(model);
    return kernels::loss_parallel(view, data, table, sites) / static_cast<double>(sites.size());
  }
};

} // namespace

FittedModel fit(const CommunityData &data, FittedModel model, const TrainConfig &cfg, const FitOptions &opt) {
  cfg.validate();
  model.validate();
  model.check_compatible(data);
  if (cfg.share_groups && !data.group_labels)
    throw ValidationError("share_groups needs species group labels");
  model.non_negative = model.non_negative || cfg.non_negative;
  model.habitat_frozen = cfg.freeze_habitat;
  model.offsets_learned = cfg.learn_offsets;
  if (model.non_negative && (model.emb.response.minCoeff() < 0 || model.emb.effect.minCoeff() < 0)) {
    model.emb.response = model.emb.response.cwiseMax(0.0);
    model.emb.effect = model.emb.effect.cwiseMax(0.0);
  }

  std::vector<int> train, valid;
  if (opt.train_sites) {
    train = *opt.train_sites;
    if (opt.validation_sites)
      valid = *opt.validation_sites;
  } else if (opt.validation_sites) {
    valid = *opt.validation_sites;
    std::vector<char> held(data.n_sites(), 0);
    for (int k : valid)
      held[static_cast<std::size_t>(k)] = 1;
    for (std::size_t k = 0; k < data.n_sites(); ++k)
      if (!held[k])
        train.push_back(static_cast<int>(k));
  } else if (cfg.validation_fraction > 0.0 && data.n_sites() >= 10) {
    auto split = stratified_split(data, cfg.validation_fraction, stream_seed(cfg.seed, "validation"));
    train = std::move(split.train);
    valid = std::move(split.test);
    if (opt.warnings)
      for (auto &w : split.warnings.messages)
        opt.warnings->add(w);
  } else {
    train = kernels::all_sites(data.n_sites());
  }
  if (train.empty())
    throw ValidationError("fit: no training sites");

  Trainer tr(data, cfg, std::move(model));
  double best = std::numeric_limits<double>::infinity();
  FittedModel best_model = tr.model;
  int wait = 0;

  std::vector<int> order = train;
  kernels::Gradient grad = kernels::Gradient::zeros_like(kernels::ModelView::of(tr.model));
  const auto m = static_cast<Eigen::Index>(data.n_species());
  Matrix weights;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    Rng rng = make_stream(cfg.seed, "epoch", static_cast<std::uint64_t>(epoch));
    shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t len = std::min(order.size() - start, static_cast<std::size_t>(cfg.batch_size));
      std::span<const int> batch(order.data() + start, len);
      const Matrix *w = nullptr;
      if (cfg.negative_subsample < 1.0) {
        weights.resize(static_cast<Eigen::Index>(len), m);
        for (std::size_t t = 0; t < len; ++t)
          for (Eigen::Index i = 0; i < m; ++i)
            weights(static_cast<Eigen::Index>(t), i) =
                data.abundance(batch[t], i) > 0.0
                    ? 1.0
                    : (bernoulli(rng, cfg.negative_subsample) ? 1.0 / cfg.negative_subsample : 0.0);
        w = &weights;
      }
      kernels::gradient_parallel(kernels::ModelView::of(tr.model), data, tr.table, batch, w, grad);
      if (!std::isfinite(grad.loss))
        throw NumericalError("training diverged at epoch " + std::to_string(epoch) + " (learning rate " +
                             std::to_string(cfg.learning_rate) + ")");
      tr.apply(grad, 1.0 / static_cast<double>(len));
    }
    EpochLog log;
    log.epoch = epoch;
    const double pen = penalty(tr.model.emb, cfg.lambda_l1, cfg.lambda_l2);
    log.train_loss = tr.mean_loss(train) + pen;
    log.validation_loss = valid.empty() ? log.train_loss : tr.mean_loss(valid) + pen;
    if (!std::isfinite(log.train_loss) || !std::isfinite(log.validation_loss))
      throw NumericalError("training diverged at epoch " + std::to_string(epoch) + " (learning rate " +
                           std::to_string(cfg.learning_rate) + ")");
    tr.model.training_log.push_back(log);
    const double current = log.validation_loss;
    if (epoch == 1 || current < best - cfg.tolerance) {
      best = current;
      best_model = tr.model;
      wait = 0;
    } else if (++wait >= cfg.patience) {
      break;
    }
  }
  best_model.training_log = tr.model.training_log;
  return best_model;
}

double gradient_check(const FittedModel &model, const CommunityData &data, double h, double lambda_l2) {
  model.check_compatible(data);
  const ContextTable table(data, model.context);
  const auto sites = kernels::all_sites(data.n_sites());
  FittedModel work = model;
  auto value = [&] {
    return kernels::loss_serial(kernels::ModelView::of(work), data, table, sites) +
           penalty(work.emb, 0.0, lambda_l2);
  };
  kernels::Gradient g = kernels::Gradient::zeros_like(kernels::ModelView::of(work));
  kernels::gradient_serial(kernels::ModelView::of(work), data, table, sites, nullptr, g);
  g.response += 2.0 * lambda_l2 * work.emb.response;
  g.effect += 2.0 * lambda_l2 * work.emb.effect;

  double worst = 0.0;
  auto probe = [&](double *x, double analytic) {
    const double saved = *x;
    *x = saved + h;
    const double up = value();
    *x = saved - h;
    const double down = value();
    *x = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-3});
    worst = std::max(worst, rel);
  };
  auto sweep = [&](auto &x, const auto &gx) {
    for (Eigen::Index r = 0; r < x.rows(); ++r)
      for (Eigen::Index c = 0; c < x.cols(); ++c)
        probe(&x(r, c), gx(r, c));
  };
  if (!model.habitat_frozen)
    sweep(work.habitat.weights, g.habitat);
  sweep(work.emb.response, g.response);
  sweep(work.emb.effect, g.effect);
  sweep(work.offsets, g.offsets);
  if (has_dispersion(work.family))
    sweep(work.log_dispersion, g.log_dispersion);
  if (work.context.conditioning_weights)
    sweep(*work.context.conditioning_weights, g.conditioning);
  return worst;
}

} // namespace ecoassoc
