// Acceptance harness: prints one PASS/FAIL line per criterion and exits non-zero if any fails.
#include "ecoassoc/csv.hpp"
#include "ecoassoc/data.hpp"
#include "ecoassoc/evaluation.hpp"
#include "ecoassoc/glm.hpp"
#include "ecoassoc/inference.hpp"
#include "ecoassoc/network.hpp"
#include "ecoassoc/selection.hpp"
#include "ecoassoc/sim_community.hpp"
#include "ecoassoc/sim_foodweb.hpp"
#include "ecoassoc/stats.hpp"

#include <boost/math/distributions/negative_binomial.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/poisson.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using namespace ecoassoc;

namespace {

// Tolerances and budgets.
constexpr double kGradTol = 1e-4;
constexpr int kGradInstances = 100;
constexpr double kGradBudget = 60.0;
constexpr double kReductionTol = 1e-10;
constexpr double kOrderingP = 0.01;
constexpr double kExp1Budget = 600.0;
constexpr double kEps = 0.05;
constexpr double kPositiveF1 = 0.5;
constexpr double kExp2Budget = 1200.0;
constexpr int kExp2Replicates = 5;
constexpr int kExp2MinWins = 4;
constexpr double kCollapseTol = 1e-6;
constexpr int kAssemblySteps = 10000;
constexpr double kAucTol = 1e-9;
constexpr double kRateTol = 1e-12;
constexpr double kModularityTol = 1e-12;
constexpr double kRaiPositive = 0.8;
constexpr double kRaiNullCover = 0.9;
constexpr std::uint64_t kSeed = 1;
constexpr double kBreadth = 20.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string &name, const std::function<Outcome()> &body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception &e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass)
    ++failures;
  std::printf("%s [%d] %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

double elapsed_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Writes a simulated dataset with E scaled and squared, then loads it the way the CLI does.
CommunityData through_disk(const CommunityData &data, const fs::path &dir, bool binary) {
  fs::create_directories(dir);
  write_community(data, dir);
  PreprocessSpec pre;
  pre.scale_columns = {0};
  pre.add_quadratic = {0};
  csv::write_atomic(dir / "preprocess.json", nlohmann::json(pre).dump());
  return load_community_dir(dir, binary).data;
}

// ---- 1 ----------------------------------------------------------------------

CommunityData random_data(Rng &rng, std::size_t n, std::size_t m, std::size_t p, FamilyKind family) {
  Matrix y(n, m), x(n, p);
  for (Eigen::Index k = 0; k < y.rows(); ++k) {
    for (Eigen::Index c = 0; c < x.cols(); ++c)
      x(k, c) = uniform(rng, -1.0, 1.0);
    for (Eigen::Index i = 0; i < y.cols(); ++i) {
      const double u = uniform01(rng);
      if (family == FamilyKind::bernoulli)
        y(k, i) = u < 0.5 ? 1.0 : 0.0;
      else if (family == FamilyKind::normal)
        y(k, i) = 5.0 * u;
      else
        y(k, i) = u < 0.3 ? 0.0 : std::floor(uniform(rng, 1.0, 9.0));
    }
  }
  // Every species needs at least one positive entry for offsets.
  for (Eigen::Index i = 0; i < y.cols(); ++i)
    y(0, i) = 1.0;
  return make_community(std::move(y), std::move(x), family == FamilyKind::bernoulli);
}

void randomize(FittedModel &model, Rng &rng) {
  for (Matrix *mat : {&model.habitat.weights, &model.emb.response, &model.emb.effect})
    for (Eigen::Index r = 0; r < mat->rows(); ++r)
      for (Eigen::Index c = 0; c < mat->cols(); ++c)
        (*mat)(r, c) = uniform(rng, -0.5, 0.5);
  for (Eigen::Index i = 0; i < model.offsets.size(); ++i)
    model.offsets(i) += uniform(rng, -0.3, 0.3);
  if (has_dispersion(model.family))
    for (Eigen::Index i = 0; i < model.log_dispersion.size(); ++i)
      model.log_dispersion(i) = uniform(rng, -0.5, 1.0);
  if (model.context.conditioning_weights)
    for (Eigen::Index r = 0; r < model.context.conditioning_weights->rows(); ++r)
      for (Eigen::Index c = 0; c < model.context.conditioning_weights->cols(); ++c)
        (*model.context.conditioning_weights)(r, c) = uniform(rng, -0.5, 1.0);
}

Outcome gradient_correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<std::pair<AggregationMode, FamilyKind>> combos = {
      {AggregationMode::additive, FamilyKind::poisson},
      {AggregationMode::additive, FamilyKind::negative_binomial},
      {AggregationMode::additive, FamilyKind::normal},
      {AggregationMode::additive, FamilyKind::bernoulli},
      {AggregationMode::multiplicative, FamilyKind::bernoulli},
      {AggregationMode::hierarchical, FamilyKind::zero_inflated_nb}};
  double worst = 0.0;
  std::string worst_case;
  for (int t = 0; t < kGradInstances; ++t) {
    Rng rng = make_stream(kSeed, "acceptance_gradient", static_cast<std::uint64_t>(t));
    const auto [mode, family] = combos[static_cast<std::size_t>(t) % combos.size()];
    const CommunityData data = random_data(rng, 20, 5, 2, family);
    ModelSpec spec;
    spec.mode = mode;
    spec.family = family;
    spec.dim = 2;
    if ((t / combos.size()) % 2 == 1) {
      spec.context.variant = ContextVariant::conditioned;
      spec.context.conditioning_weights = BioticContextSpec::neutral_conditioning(2, 2);
    }
    TrainConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(t);
    FittedModel model = initialize(data, spec, cfg);
    randomize(model, rng);
    const double err = gradient_check(model, data, 1e-5);
    if (!(err <= worst) || !std::isfinite(err)) {
      worst = err;
      worst_case = to_string(mode) + "/" + to_string(family) + (spec.context.conditioning_weights ? "/conditioned" : "");
    }
  }
  const double secs = elapsed_since(t0);
  return {worst < kGradTol && secs < kGradBudget,
          "worst relative error " + fmt(worst) + " (" + worst_case + ") over " + std::to_string(kGradInstances) +
              " instances, limit " + fmt(kGradTol) + ", budget " + fmt(kGradBudget) + " s"};
}

// ---- 2 ----------------------------------------------------------------------

double oracle_nll(FamilyKind family, double y, double eta, double log_disp) {
  using namespace boost::math;
  switch (family) {
  case FamilyKind::poisson:
    return -std::log(pdf(poisson_distribution<>(std::exp(eta)), y));
  case FamilyKind::negative_binomial: {
    const double theta = std::exp(log_disp), mu = std::exp(eta);
    return -std::log(pdf(negative_binomial_distribution<>(theta, theta / (theta + mu)), y));
  }
  case FamilyKind::normal:
    return -std::log(pdf(normal_distribution<>(eta, std::sqrt(std::exp(log_disp))), y));
  case FamilyKind::bernoulli: {
    const double p = 1.0 / (1.0 + std::exp(-eta));
    return -std::log(y > 0.5 ? p : 1.0 - p);
  }
  default:
    throw std::logic_error("no oracle for family");
  }
}

Outcome reduction_identity() {
  double worst = 0.0;
  for (FamilyKind family :
       {FamilyKind::poisson, FamilyKind::negative_binomial, FamilyKind::normal, FamilyKind::bernoulli}) {
    for (int t = 0; t < 5; ++t) {
      Rng rng = make_stream(kSeed, "acceptance_reduction", static_cast<std::uint64_t>(t) * 10 + static_cast<int>(family));
      const CommunityData data = random_data(rng, 40, 5, 2, family);
      ModelSpec spec;
      spec.family = family;
      spec.pretrain_habitat = true;
      TrainConfig cfg;
      FittedModel model = initialize(data, spec, cfg);
      model.emb = EmbeddingPair::zeros(5, 2);
      const HabitatFit glm = fit_habitat_glms(data, family, AggregationMode::additive, model.offsets);
      const double via_model = model_nll(model, data);
      double via_glm = 0.0;
      for (Eigen::Index i = 0; i < 5; ++i) {
        // Independent GLM likelihood from the distribution library.
        for (Eigen::Index k = 0; k < data.abundance.rows(); ++k) {
          double eta = model.offsets(i) + glm.habitat.weights(i, 2);
          for (Eigen::Index c = 0; c < 2; ++c)
            eta += glm.habitat.weights(i, c) * data.covariates(k, c);
          via_glm += oracle_nll(family, data.abundance(k, i), eta, glm.log_dispersion(i));
        }
      }
      worst = std::max(worst, std::abs(via_model - via_glm) / std::max(1.0, std::abs(via_glm)));
      worst = std::max(worst, std::abs(via_glm - glm.nll.sum()) / std::max(1.0, std::abs(via_glm)));
    }
  }
  return {worst <= kReductionTol, "worst relative gap " + fmt(worst) + " over 20 random datasets, limit " + fmt(kReductionTol)};
}

// ---- 3, 4 -------------------------------------------------------------------

struct Exp1Run {
  std::string name;
  CommunityData data;
  IntMatrix truth;
  FittedModel model;
  std::size_t dim = 0;
  double lambda = 0.0;
};

std::vector<Exp1Run> exp1_runs;
double exp1_seconds = 0.0;

void run_experiment1(const fs::path &work) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<ExperimentDesign> designs;
  for (auto kind : {AssociationKind::pos, AssociationKind::neg, AssociationKind::posneg})
    designs.push_back({kind, Density::sparse, Symmetry::symmetric, 10});
  AssemblyConfig base; // n = 300, K = 100, B = (1, 1, 1, 1)
  const auto sets = generate_experiment1(designs, base, kBreadth, kSeed);
  ModelSpec spec;
  spec.family = FamilyKind::negative_binomial;
  spec.mode = AggregationMode::additive;
  spec.pretrain_habitat = true;
  TrainConfig cfg;
  cfg.seed = kSeed;
  for (const auto &ds : sets) {
    Exp1Run run;
    run.name = ds.design.name();
    run.data = through_disk(ds.result.data, work / "exp1" / run.name, false);
    run.truth = ds.truth;
    SelectionGrid grid = SelectionGrid::preset("default", run.data.n_species());
    const SelectionReport rep = select_model(run.data, grid, spec, cfg);
    run.dim = rep.cells[rep.best].dim;
    run.lambda = rep.cells[rep.best].lambda;
    ModelSpec best = spec;
    best.dim = run.dim;
    TrainConfig bc = cfg;
    bc.lambda_l1 = run.lambda;
    run.model = fit(run.data, initialize(run.data, best, bc), bc);
    exp1_runs.push_back(std::move(run));
  }
  exp1_seconds = elapsed_since(t0);
}

Outcome experiment1_ordering(const fs::path &work) {
  run_experiment1(work);
  std::vector<double> pos, neu, neg;
  std::ostringstream per_run;
  for (const auto &run : exp1_runs) {
    const Matrix a = run.model.emb.association_matrix();
    std::vector<double> p, z, n;
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      for (Eigen::Index j = 0; j < a.cols(); ++j) {
        if (i == j)
          continue;
        auto &bucket = run.truth(i, j) > 0 ? p : (run.truth(i, j) < 0 ? n : z);
        bucket.push_back(a(i, j));
      }
    per_run << "; " << run.name << " d=" << run.dim << " l=" << run.lambda;
    if (!p.empty())
      per_run << " p(+>0)=" << fmt(stats::mann_whitney_greater(p, z).p);
    if (!n.empty())
      per_run << " p(0>-)=" << fmt(stats::mann_whitney_greater(z, n).p);
    pos.insert(pos.end(), p.begin(), p.end());
    neu.insert(neu.end(), z.begin(), z.end());
    neg.insert(neg.end(), n.begin(), n.end());
  }
  const double mp = stats::quantile(pos, 0.5), mz = stats::quantile(neu, 0.5), mn = stats::quantile(neg, 0.5);
  const double p1 = stats::mann_whitney_greater(pos, neu).p, p2 = stats::mann_whitney_greater(neu, neg).p;
  const bool ok = mp > mz && mz > mn && p1 < kOrderingP && p2 < kOrderingP && exp1_seconds < kExp1Budget;
  return {ok, "pooled medians +" + fmt(mp) + " 0:" + fmt(mz) + " -" + fmt(mn) + ", one-sided Mann-Whitney p(+>0)=" +
                  fmt(p1) + " p(0>-)=" + fmt(p2) + " (limit " + fmt(kOrderingP) + ")" + per_run.str() +
                  "; budget " + fmt(kExp1Budget) + " s"};
}

Outcome experiment1_classification() {
  const Exp1Run *run = nullptr;
  for (const auto &r : exp1_runs)
    if (r.name == "m10_posneg_sparse_sym")
      run = &r;
  if (!run)
    return {false, "PosNeg run unavailable"};
  const Matrix a = run->model.emb.association_matrix();
  const ClassificationReport rep = classify_associations(discretize(a, kEps, kEps), run->truth, &a);
  // Uniform guessing over three labels recalls a third of each class.
  const double baseline = 1.0 / 3.0;
  const bool ok = rep.positive.f1 >= kPositiveF1 && rep.negative.recall > baseline;
  return {ok, "positive F1 " + fmt(rep.positive.f1) + " (limit " + fmt(kPositiveF1) + "), negative recall " +
                  fmt(rep.negative.recall) + " vs random-guess " + fmt(baseline) + ", eps " + fmt(kEps)};
}

// ---- 5 ----------------------------------------------------------------------

Outcome experiment2_tss(const fs::path &work) {
  const auto t0 = std::chrono::steady_clock::now();
  int wins = 0, ties = 0;
  std::ostringstream detail;
  for (Topology topo : all_topologies()) {
    FoodWebConfig c;
    c.topology = topo;
    c.seed = kSeed;
    const FoodWebResult web = simulate_foodweb(c);
    const CommunityData data = through_disk(web.data, work / "exp2" / to_string(topo), true);
    std::vector<double> species_tss, group_tss;
    for (int r = 0; r < kExp2Replicates; ++r) {
      for (bool shared : {false, true}) {
        ModelSpec spec;
        spec.family = FamilyKind::bernoulli;
        spec.mode = AggregationMode::multiplicative;
        spec.dim = 4;
        spec.pretrain_habitat = true;
        TrainConfig cfg;
        cfg.seed = kSeed + static_cast<std::uint64_t>(r);
        cfg.non_negative = true;
        cfg.learn_offsets = true;
        cfg.share_groups = shared;
        const FittedModel m = fit(data, initialize(data, spec, cfg), cfg);
        const BinaryMetrics b = binary_structure_metrics(m.emb.association_matrix(), web.realized, kEps);
        (shared ? group_tss : species_tss).push_back(b.tss);
      }
    }
    const double g = stats::quantile(group_tss, 0.5), s = stats::quantile(species_tss, 0.5);
    if (g >= s)
      ++wins;
    if (g == s)
      ++ties;
    detail << "; " << to_string(topo) << " group " << fmt(g) << " species " << fmt(s);
  }
  const double secs = elapsed_since(t0);
  return {wins >= kExp2MinWins && secs < kExp2Budget,
          "group-shared median TSS >= species-level in " + std::to_string(wins) + "/6 topologies (need " +
              std::to_string(kExp2MinWins) + "), " + std::to_string(ties) + " of them exact ties" + detail.str() + "; budget " + fmt(kExp2Budget) + " s"};
}

// ---- 6 ----------------------------------------------------------------------

Outcome regularization_collapse() {
  const Exp1Run *run = nullptr;
  for (const auto &r : exp1_runs)
    if (r.name == "m10_posneg_sparse_sym")
      run = &r;
  if (!run)
    return {false, "PosNeg data unavailable"};
  const CommunityData &data = run->data;
  const SelectionGrid grid = SelectionGrid::preset("table", data.n_species());
  const double lambda = *std::max_element(grid.lambdas.begin(), grid.lambdas.end());
  const SplitResult outer = stratified_split(data, 0.25, stream_seed(kSeed, "collapse_outer"));
  const CommunityData train_data = data.subset(outer.train);
  const SplitResult inner = stratified_split(train_data, 0.1, stream_seed(kSeed, "collapse_inner"));
  std::vector<int> fit_sites, val_sites;
  for (int k : inner.train)
    fit_sites.push_back(outer.train[static_cast<std::size_t>(k)]);
  for (int k : inner.test)
    val_sites.push_back(outer.train[static_cast<std::size_t>(k)]);
  bool ok = true;
  std::ostringstream detail;
  detail << "lambda " << lambda;
  for (std::size_t d : grid.dims) {
    ModelSpec spec;
    spec.dim = d;
    spec.pretrain_habitat = true;
    TrainConfig cfg;
    cfg.seed = kSeed;
    cfg.lambda_l1 = lambda;
    cfg.freeze_habitat = true;
    const FittedModel init = initialize(train_data, spec, cfg);
    FitOptions opt;
    opt.train_sites = fit_sites;
    opt.validation_sites = val_sites;
    const FittedModel fitted = fit(data, init, cfg, opt);
    FittedModel zero = init;
    zero.emb = EmbeddingPair::zeros(data.n_species(), d);
    const std::size_t eff = effective_dimension(fitted.emb);
    const double dev = holdout_score(fitted, data, outer.test, Metric::poisson_deviance);
    const double dev0 = holdout_score(zero, data, outer.test, Metric::poisson_deviance);
    const double rel = std::abs(dev - dev0) / std::abs(dev0);
    ok = ok && eff == 0 && rel <= kCollapseTol;
    detail << "; d=" << d << " effective " << eff << " deviance " << fmt(dev) << " vs zero-association " << fmt(dev0)
           << " (rel " << fmt(rel) << ")";
  }
  detail << "; limit " << fmt(kCollapseTol);
  return {ok, detail.str()};
}

// ---- 7 ----------------------------------------------------------------------

Outcome simulator_invariants() {
  Rng rng = make_stream(kSeed, "acceptance_assembly");
  long violations = 0, steps = 0;
  while (steps < kAssemblySteps) {
    AssemblyConfig c;
    const auto m = static_cast<Eigen::Index>(2 + uniform_index(rng, 19));
    c.carrying_capacity = 1 + static_cast<int>(uniform_index(rng, 200));
    c.optima.resize(m);
    c.breadths.resize(m);
    c.interactions.resize(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
      c.optima(i) = uniform(rng, 0.0, 100.0);
      c.breadths(i) = uniform(rng, 1.0, 40.0);
      for (Eigen::Index j = 0; j < m; ++j)
        c.interactions(i, j) = i == j ? 0.0 : uniform(rng, -1.0, 1.0);
    }
    c.b_env = uniform(rng, 0.0, 3.0);
    c.b_comp = uniform(rng, 0.0, 3.0);
    c.b_fac = uniform(rng, 0.0, 3.0);
    c.b_abun = uniform(rng, 0.0, 3.0);
    c.validate();
    const double e = uniform(rng, 0.0, 100.0);
    Vector counts = multinomial_draw(Vector::Constant(m, 1.0 / static_cast<double>(m)), c.carrying_capacity, rng);
    for (int t = 0; t < 100 && steps < kAssemblySteps; ++t, ++steps) {
      counts = assembly_step(c, e, counts, rng);
      if (counts.sum() != static_cast<double>(c.carrying_capacity) || counts.minCoeff() < 0.0)
        ++violations;
    }
  }
  long orphan = 0, extra = 0;
  for (Topology topo : all_topologies()) {
    FoodWebConfig c;
    c.topology = topo;
    c.seed = kSeed;
    const FoodWebResult web = simulate_foodweb(c);
    const Matrix &y = web.data.abundance;
    for (Eigen::Index k = 0; k < y.rows(); ++k)
      for (Eigen::Index i = 0; i < y.cols(); ++i) {
        if (y(k, i) == 0.0 || web.metaweb.row(i).sum() == 0)
          continue;
        bool fed = false;
        for (Eigen::Index j = 0; j < y.cols(); ++j)
          fed = fed || (web.metaweb(i, j) == 1 && y(k, j) > 0.0);
        if (!fed)
          ++orphan;
      }
    for (Eigen::Index i = 0; i < web.realized.rows(); ++i)
      for (Eigen::Index j = 0; j < web.realized.cols(); ++j)
        if (web.realized(i, j) == 1 && web.metaweb(i, j) != 1)
          ++extra;
  }
  return {violations == 0 && orphan == 0 && extra == 0,
          std::to_string(steps) + " assembly steps with " + std::to_string(violations) +
              " carrying-capacity violations; " + std::to_string(orphan) + " consumer occurrences without prey; " +
              std::to_string(extra) + " realized edges outside the metaweb (6 topologies)"};
}

// ---- 8 ----------------------------------------------------------------------

double brute_auc(const std::vector<double> &s, const std::vector<int> &y) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t a = 0; a < s.size(); ++a)
    for (std::size_t b = 0; b < s.size(); ++b)
      if (y[a] == 1 && y[b] == 0) {
        pairs += 1.0;
        wins += s[a] > s[b] ? 1.0 : (s[a] == s[b] ? 0.5 : 0.0);
      }
  return wins / pairs;
}

double brute_modularity(const Matrix &w, const std::vector<int> &labels) {
  double two_m = 0.0;
  std::vector<double> k(static_cast<std::size_t>(w.rows()), 0.0);
  for (Eigen::Index i = 0; i < w.rows(); ++i)
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      two_m += w(i, j);
      k[static_cast<std::size_t>(i)] += w(i, j);
    }
  double q = 0.0;
  for (Eigen::Index i = 0; i < w.rows(); ++i)
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      if (labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)])
        q += w(i, j) - k[static_cast<std::size_t>(i)] * k[static_cast<std::size_t>(j)] / two_m;
  return q / two_m;
}

void set_partitions(std::vector<int> &cur, std::size_t pos, int blocks, const std::function<void()> &visit) {
  if (pos == cur.size()) {
    visit();
    return;
  }
  for (int b = 0; b <= blocks; ++b) {
    cur[pos] = b;
    set_partitions(cur, pos + 1, std::max(blocks, b + 1), visit);
  }
}

Outcome metric_oracles() {
  Rng rng = make_stream(kSeed, "acceptance_metrics");
  int rate_mismatch = 0, count_mismatch = 0, class_mismatch = 0;
  double worst_auc = 0.0;
  for (int t = 0; t < 100; ++t) {
    const auto m = static_cast<Eigen::Index>(4 + uniform_index(rng, 20));
    Matrix s(m, m);
    IntMatrix ref(m, m), truth3(m, m), pred3(m, m);
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = 0; j < m; ++j) {
        s(i, j) = std::round(uniform(rng, -1.0, 1.0) * 10.0) / 10.0;
        ref(i, j) = i != j && bernoulli(rng, 0.3) ? 1 : 0;
        truth3(i, j) = i == j ? 0 : static_cast<int>(uniform_index(rng, 3)) - 1;
        pred3(i, j) = i == j ? 0 : static_cast<int>(uniform_index(rng, 3)) - 1;
      }
    ref(0, 1) = 1;
    ref(1, 0) = 0;
    const double threshold = uniform(rng, -0.5, 0.5);
    const BinaryMetrics b = binary_structure_metrics(s, ref, threshold);
    double tp = 0, fp = 0, tn = 0, fn = 0;
    std::vector<double> scores;
    std::vector<int> labels;
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = 0; j < m; ++j) {
        if (i == j)
          continue;
        const bool p = s(i, j) > threshold, r = ref(i, j) == 1;
        tp += p && r;
        fp += p && !r;
        tn += !p && !r;
        fn += !p && r;
        scores.push_back(s(i, j));
        labels.push_back(ref(i, j));
      }
    if (static_cast<double>(b.tp) != tp || static_cast<double>(b.fp) != fp || static_cast<double>(b.tn) != tn ||
        static_cast<double>(b.fn) != fn)
      ++count_mismatch;
    const double acc = (tp + tn) / (tp + fp + tn + fn);
    const double sens = tp + fn > 0 ? tp / (tp + fn) : 0.0, spec = tn + fp > 0 ? tn / (tn + fp) : 0.0;
    const double prec = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double f2 = tp > 0 ? 5.0 * tp / (5.0 * tp + 4.0 * fn + fp) : 0.0;
    for (auto [got, want] : {std::pair{b.accuracy, acc}, {b.sensitivity, sens}, {b.specificity, spec},
                             {b.precision, prec}, {b.f2, f2}, {b.tss, sens + spec - 1.0}})
      if (std::abs(got - want) > kRateTol)
        ++rate_mismatch;
    worst_auc = std::max(worst_auc, std::abs(b.auc.value_or(-1.0) - brute_auc(scores, labels)));

    const ClassificationReport rep = classify_associations(pred3, truth3);
    for (int cls : {-1, 0, 1}) {
      double ctp = 0, cfp = 0, cfn = 0;
      for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < m; ++j) {
          if (i == j)
            continue;
          ctp += pred3(i, j) == cls && truth3(i, j) == cls;
          cfp += pred3(i, j) == cls && truth3(i, j) != cls;
          cfn += pred3(i, j) != cls && truth3(i, j) == cls;
        }
      const double p = ctp + cfp > 0 ? ctp / (ctp + cfp) : 0.0, r = ctp + cfn > 0 ? ctp / (ctp + cfn) : 0.0;
      const double f1 = ctp > 0 ? 2.0 * ctp / (2.0 * ctp + cfp + cfn) : 0.0;
      const ClassMetrics &cm = rep.of(static_cast<Label>(cls));
      if (std::abs(cm.precision - p) > kRateTol || std::abs(cm.recall - r) > kRateTol || std::abs(cm.f1 - f1) > kRateTol)
        ++class_mismatch;
    }
  }

  int modularity_mismatch = 0;
  double worst_q = 0.0;
  for (int t = 0; t < 20; ++t) {
    Matrix a = Matrix::Zero(6, 6);
    std::vector<int> perm = {0, 1, 2, 3, 4, 5};
    shuffle(perm.begin(), perm.end(), rng);
    auto link = [&](int u, int v, double w) {
      a(perm[static_cast<std::size_t>(u)], perm[static_cast<std::size_t>(v)]) = w;
    };
    for (int base : {0, 3})
      for (int u = 0; u < 3; ++u)
        for (int v = 0; v < 3; ++v)
          if (u != v)
            link(base + u, base + v, uniform(rng, 0.5, 1.0) * (bernoulli(rng, 0.5) ? 1.0 : -1.0));
    link(static_cast<int>(uniform_index(rng, 3)), 3 + static_cast<int>(uniform_index(rng, 3)), uniform(rng, 0.05, 0.3));
    const Matrix w = modularity_weights(a);
    double best = -1.0;
    std::vector<int> cur(6, 0);
    set_partitions(cur, 1, 1, [&] { best = std::max(best, brute_modularity(w, cur)); });
    const Communities c = modularity_communities(a);
    const double gap = std::abs(brute_modularity(w, c.labels) - best);
    worst_q = std::max(worst_q, std::max(gap, std::abs(c.modularity - best)));
    if (gap > kModularityTol || std::abs(c.modularity - best) > kModularityTol)
      ++modularity_mismatch;
  }
  const bool ok = rate_mismatch == 0 && count_mismatch == 0 && class_mismatch == 0 && worst_auc <= kAucTol &&
                  modularity_mismatch == 0;
  return {ok, "100 instances: " + std::to_string(count_mismatch) + " confusion-count, " +
                  std::to_string(rate_mismatch) + " binary-rate, " + std::to_string(class_mismatch) +
                  " per-class mismatches (tolerance " + fmt(kRateTol) + "), worst AUC gap " + fmt(worst_auc) +
                  " (limit " + fmt(kAucTol) + "); modularity vs exhaustive search on 20 two-clique graphs: " +
                  std::to_string(modularity_mismatch) + " mismatches, worst gap " + fmt(worst_q)};
}

// ---- 9 ----------------------------------------------------------------------

Outcome rai_diagnostic() {
  const ExperimentDesign design{AssociationKind::pos, Density::sparse, Symmetry::symmetric, 10};
  AssemblyConfig base;
  const auto ds = generate_experiment1({design}, base, kBreadth, kSeed).front();
  const CommunityData &data = ds.result.data;
  const auto m = static_cast<Eigen::Index>(data.n_species());
  int positive = 0, above = 0;
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      if (ds.truth(i, j) == 1) {
        ++positive;
        const auto r = rai(data, static_cast<std::size_t>(j), static_cast<std::size_t>(i));
        above += r && r->ci_low > 0.0;
      }
  CommunityData null = data;
  Rng rng = make_stream(kSeed, "acceptance_rai_null");
  for (Eigen::Index c = 0; c < m; ++c) {
    Vector v = data.abundance.col(c);
    std::vector<double> vals(v.data(), v.data() + v.size());
    shuffle(vals.begin(), vals.end(), rng);
    for (std::size_t k = 0; k < vals.size(); ++k)
      null.abundance(static_cast<Eigen::Index>(k), c) = vals[k];
  }
  int defined = 0, cover = 0;
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) {
      if (i == j)
        continue;
      const auto r = rai(null, static_cast<std::size_t>(j), static_cast<std::size_t>(i));
      if (!r)
        continue;
      ++defined;
      cover += r->ci_low <= 0.0 && r->ci_high >= 0.0;
    }
  const double frac_pos = static_cast<double>(above) / positive, frac_null = static_cast<double>(cover) / defined;
  return {frac_pos >= kRaiPositive && frac_null >= kRaiNullCover,
          std::to_string(above) + "/" + std::to_string(positive) + " true positive pairs with CI above 0 (need " +
              fmt(kRaiPositive) + "), " + std::to_string(cover) + "/" + std::to_string(defined) +
              " null CIs covering 0 (need " + fmt(kRaiNullCover) + ")"};
}

// ---- 10 ---------------------------------------------------------------------

int run_in(const fs::path &dir, const std::string &cli, const std::string &args) {
  const std::string cmd = "cd '" + dir.string() + "' && '" + cli + "' --seed 7 --jobs 1 " + args + " > cli.log 2>&1";
  return std::system(cmd.c_str());
}

std::map<std::string, std::string> snapshot(const fs::path &root) {
  std::map<std::string, std::string> files;
  for (const auto &e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file() || e.path().filename() == "cli.log")
      continue;
    std::string content = csv::read_file(e.path());
    if (e.path().filename() == "manifest.json") {
      auto j = nlohmann::json::parse(content);
      j.erase("wall_time_seconds");
      content = j.dump();
    }
    files[fs::relative(e.path(), root).string()] = content;
  }
  return files;
}

Outcome determinism(const std::string &cli, const fs::path &work) {
  if (cli.empty())
    return {false, "no CLI path given (--cli)"};
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"simulate-community",
       "simulate-community --config '{\"design\":{\"kind\":\"posneg\",\"pool_size\":10},\"assembly\":{\"n_sites\":60}}' "
       "--out sim"},
      {"simulate-foodweb", "simulate-foodweb --config '{\"topology\":\"niche\",\"n_sites\":120}' --out web"},
      {"fit", "fit --data sim --train '{\"max_epochs\":15}' --out model"},
      {"fit (food web)",
       "fit --data web --mode multiplicative --family bernoulli --pretrain-habitat "
       "--train '{\"max_epochs\":10,\"non_negative\":true,\"share_groups\":true,\"learn_offsets\":true}' --out webmodel"},
      {"select", "select --data sim --grid '{\"dims\":[1,2],\"lambdas\":[0.01,0.02],\"folds\":3}' "
                 "--train '{\"max_epochs\":8}' --out selection"},
      {"network", "network --model model --bootstrap 3 --data sim --train '{\"max_epochs\":5}' --out network"},
      {"evaluate", "evaluate --pred model --truth sim/truth.csv --out evaluation"},
      {"evaluate (realized)", "evaluate --pred webmodel --truth web/realized.csv --reference realized --out webeval"}};
  std::vector<std::string> differing;
  int failed = 0;
  for (const char *run : {"run_a", "run_b"}) {
    const fs::path dir = work / "determinism" / run;
    fs::remove_all(dir);
    fs::create_directories(dir);
    for (const auto &[name, args] : commands)
      if (run_in(dir, cli, args) != 0)
        ++failed;
  }
  const auto a = snapshot(work / "determinism" / "run_a"), b = snapshot(work / "determinism" / "run_b");
  for (const auto &[path, content] : a) {
    const auto it = b.find(path);
    if (it == b.end() || it->second != content)
      differing.push_back(path);
  }
  for (const auto &[path, content] : b)
    if (!a.count(path))
      differing.push_back(path);
  std::string detail = std::to_string(commands.size()) + " commands x 2 runs, " + std::to_string(a.size()) +
                       " files compared (manifest wall time excluded), " + std::to_string(failed) +
                       " non-zero exits, " + std::to_string(differing.size()) + " differing";
  for (std::size_t i = 0; i < differing.size() && i < 5; ++i)
    detail += (i ? ", " : ": ") + differing[i];
  return {failed == 0 && differing.empty() && !a.empty(), detail};
}

} // namespace

int main(int argc, char **argv) {
  std::string cli;
  fs::path work = fs::temp_directory_path() / "ecoassoc_acceptance";
  for (int i = 1; i + 1 < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--cli")
      cli = fs::absolute(argv[++i]).string();
    else if (a == "--work")
      work = fs::absolute(argv[++i]);
  }
  fs::create_directories(work);
  report(1, "gradient correctness", gradient_correctness);
  report(2, "reduction identity", reduction_identity);
  report(3, "experiment-1 strength ordering", [&] { return experiment1_ordering(work); });
  report(4, "experiment-1 classification", experiment1_classification);
  report(5, "experiment-2 group sharing TSS", [&] { return experiment2_tss(work); });
  report(6, "regularization collapse", regularization_collapse);
  report(7, "simulator invariants", simulator_invariants);
  report(8, "metric oracle equivalence", metric_oracles);
  report(9, "RAI diagnostic", rai_diagnostic);
  report(10, "CLI determinism", [&] { return determinism(cli, work); });
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
