#include "ecoassoc/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace ecoassoc {

std::optional<RaiResult> rai(const CommunityData &data, std::size_t source, std::size_t target) {
  const auto j = static_cast<Eigen::Index>(source), i = static_cast<Eigen::Index>(target);
  if (j >= data.abundance.cols() || i >= data.abundance.cols())
    throw ValidationError("rai: species index out of range");
  const double grand = data.abundance.col(i).mean();
  std::vector<double> delta;
  for (Eigen::Index k = 0; k < data.abundance.rows(); ++k)
    if (data.abundance(k, i) > 0.0 && data.abundance(k, j) > 0.0)
      delta.push_back(data.abundance(k, i) - grand);
  if (delta.empty())
    return std::nullopt;
  RaiResult r;
  r.n = delta.size();
  r.mean = stats::mean(delta);
  r.std = stats::stddev(delta);
  r.ci_low = r.mean - 1.96 * r.std;
  r.ci_high = r.mean + 1.96 * r.std;
  return r;
}

const ClassMetrics &ClassificationReport::of(Label l) const {
  return l == Label::negative ? negative : (l == Label::neutral ? neutral : positive);
}

std::optional<double> pr_auc(std::span<const double> scores, std::span<const int> relevant) {
  if (scores.size() != relevant.size())
    throw ValidationError("pr_auc: score and label counts differ");
  const double total = static_cast<double>(std::count_if(relevant.begin(), relevant.end(), [](int v) { return v != 0; }));
  if (total == 0.0)
    return std::nullopt;
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double tp = 0.0, fp = 0.0, prev_r = 0.0, prev_p = 1.0, area = 0.0;
  for (std::size_t s = 0; s < idx.size();) {
    std::size_t e = s;
    while (e < idx.size() && scores[idx[e]] == scores[idx[s]]) {
      (relevant[idx[e]] ? tp : fp) += 1.0;
      ++e;
    }
    const double r = tp / total, p = tp / (tp + fp);
    area += (r - prev_r) * (p + prev_p) / 2.0;
    prev_r = r;
    prev_p = p;
    s = e;
  }
  return area;
}

namespace {

int class_index(int label) {
  if (label < -1 || label > 1)
    throw ValidationError("association labels must be -1, 0 or 1");
  return label + 1;
}

ClassMetrics metrics_from(const IntMatrix &confusion, int c) {
  ClassMetrics m;
  const double tp = confusion(c, c);
  const double truth = confusion.row(c).sum();
  const double pred = confusion.col(c).sum();
  m.support = static_cast<std::size_t>(truth);
  m.predicted = static_cast<std::size_t>(pred);
  m.precision = pred > 0 ? tp / pred : 0.0;
  m.recall = truth > 0 ? tp / truth : 0.0;
  m.f1 = m.precision + m.recall > 0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

} // namespace

ClassificationReport classify_associations(const IntMatrix &predicted, const IntMatrix &truth,
                                           const Matrix *strengths) {
  if (predicted.rows() != truth.rows() || predicted.cols() != truth.cols() || truth.rows() != truth.cols())
    throw ValidationError("classify_associations: label matrices must be square and of equal shape");
  if (strengths && (strengths->rows() != truth.rows() || strengths->cols() != truth.cols()))
    throw ValidationError("classify_associations: strength matrix shape mismatch");
  ClassificationReport rep;
  rep.confusion = IntMatrix::Zero(3, 3);
  std::vector<double> score;
  std::vector<int> is_pos, is_neg;
  for (Eigen::Index i = 0; i < truth.rows(); ++i)
    for (Eigen::Index j = 0; j < truth.cols(); ++j) {
      if (i == j)
        continue;
      rep.confusion(class_index(truth(i, j)), class_index(predicted(i, j))) += 1;
      if (strengths) {
        score.push_back((*strengths)(i, j));
        is_pos.push_back(truth(i, j) == Label::positive);
        is_neg.push_back(truth(i, j) == Label::negative);
      }
    }
  rep.pairs = static_cast<std::size_t>(rep.confusion.sum());
  rep.negative = metrics_from(rep.confusion, 0);
  rep.neutral = metrics_from(rep.confusion, 1);
  rep.positive = metrics_from(rep.confusion, 2);
  rep.accuracy = rep.pairs ? static_cast<double>(rep.confusion.trace()) / static_cast<double>(rep.pairs) : 0.0;
  if (strengths) {
    rep.positive.pr_auc = pr_auc(score, is_pos);
    std::vector<double> neg_score(score.size());
    std::transform(score.begin(), score.end(), neg_score.begin(), [](double v) { return -v; });
    rep.negative.pr_auc = pr_auc(neg_score, is_neg);
  }
  return rep;
}

BinaryMetrics binary_structure_metrics(const Matrix &strengths, const IntMatrix &reference, double threshold) {
  if (strengths.rows() != reference.rows() || strengths.cols() != reference.cols() ||
      reference.rows() != reference.cols())
    throw ValidationError("binary_structure_metrics: matrices must be square and of equal shape");
  BinaryMetrics b;
  std::vector<double> score;
  std::vector<int> label;
  for (Eigen::Index i = 0; i < reference.rows(); ++i)
    for (Eigen::Index j = 0; j < reference.cols(); ++j) {
      if (i == j)
        continue;
      const int truth = reference(i, j);
      if (truth != 0 && truth != 1)
        throw ValidationError("reference adjacency must be binary");
      const bool pred = strengths(i, j) > threshold;
      if (pred && truth) ++b.tp;
      else if (pred) ++b.fp;
      else if (truth) ++b.fn;
      else ++b.tn;
      score.push_back(strengths(i, j));
      label.push_back(truth);
    }
  const double tp = static_cast<double>(b.tp), fp = static_cast<double>(b.fp), tn = static_cast<double>(b.tn),
               fn = static_cast<double>(b.fn);
  const double total = tp + fp + tn + fn;
  b.accuracy = total > 0 ? (tp + tn) / total : 0.0;
  b.sensitivity = tp + fn > 0 ? tp / (tp + fn) : 0.0;
  b.specificity = tn + fp > 0 ? tn / (tn + fp) : 0.0;
  b.precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
  b.tss = b.sensitivity + b.specificity - 1.0;
  const double denom = 4.0 * b.precision + b.sensitivity;
  b.f2 = denom > 0 ? 5.0 * b.precision * b.sensitivity / denom : 0.0;
  b.auc = stats::roc_auc(score, label);
  return b;
}

double cosine(const Eigen::Ref<const Eigen::RowVectorXd> &a, const Eigen::Ref<const Eigen::RowVectorXd> &b) {
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0)
    return 0.0;
  return a.dot(b) / (na * nb);
}

std::optional<stats::MannWhitney> embedding_group_test(const Matrix &emb, const std::vector<int> &groups,
                                                       Warnings *warnings) {
  if (groups.size() != static_cast<std::size_t>(emb.rows()))
    throw ValidationError("embedding_group_test: one group label per species required");
  std::map<int, int> sizes;
  for (int g : groups)
    ++sizes[g];
  if (sizes.size() < 2)
    return std::nullopt;
  if (warnings)
    for (auto [g, n] : sizes)
      if (n == 1)
        warnings->add("group " + std::to_string(g) + " has a single species and no within-group pairs");
  std::vector<double> within, between;
  for (Eigen::Index i = 0; i < emb.rows(); ++i)
    for (Eigen::Index j = i + 1; j < emb.rows(); ++j)
      (groups[static_cast<std::size_t>(i)] == groups[static_cast<std::size_t>(j)] ? within : between)
          .push_back(cosine(emb.row(i), emb.row(j)));
  if (within.empty() || between.empty())
    return std::nullopt;
  return stats::mann_whitney_greater(within, between);
}

namespace {

std::vector<double> upper_pairs(const Matrix &s, const std::vector<Eigen::Index> &perm) {
  std::vector<double> out;
  const auto m = s.rows();
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = i + 1; j < m; ++j)
      out.push_back(s(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]));
  return out;
}

} // namespace

std::optional<Correlation> similarity_correlation(const Matrix &emb, const Matrix &target, int permutations,
                                                  std::uint64_t seed) {
  const auto m = emb.rows();
  if (target.rows() != m || target.cols() != m)
    throw ValidationError("similarity_correlation: target must be m x m");
  Matrix sim(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      sim(i, j) = cosine(emb.row(i), emb.row(j));
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(m));
  std::iota(perm.begin(), perm.end(), 0);
  const auto x = upper_pairs(sim, perm);
  const auto r = stats::pearson(x, upper_pairs(target, perm));
  if (!r)
    return std::nullopt;
  Correlation c{*r, 1.0};
  Rng rng = make_stream(seed, "similarity_permutation");
  int extreme = 0;
  for (int t = 0; t < permutations; ++t) {
    shuffle(perm.begin(), perm.end(), rng);
    const auto rp = stats::pearson(x, upper_pairs(target, perm));
    if (rp && std::abs(*rp) >= std::abs(*r) - 1e-12)
      ++extreme;
  }
  c.p = (1.0 + extreme) / (1.0 + permutations);
  return c;
}

Matrix niche_similarity(const Vector &optima) {
  const auto m = optima.size();
  Matrix s(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      s(i, j) = -std::abs(optima(i) - optima(j));
  return s;
}

Matrix shared_prey_jaccard(const IntMatrix &adj) {
  const auto m = adj.rows();
  Matrix s = Matrix::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) {
      double inter = 0.0, uni = 0.0;
      for (Eigen::Index k = 0; k < m; ++k) {
        inter += (adj(i, k) && adj(j, k)) ? 1.0 : 0.0;
        uni += (adj(i, k) || adj(j, k)) ? 1.0 : 0.0;
      }
      s(i, j) = uni > 0 ? inter / uni : 0.0;
    }
  return s;
}

std::vector<int> quantile_bins(std::span<const double> x, int bins) {
  if (bins < 1)
    throw ValidationError("bins must be positive");
  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(x.size());
  std::vector<int> out(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double below = static_cast<double>(std::lower_bound(sorted.begin(), sorted.end(), x[k]) - sorted.begin());
    out[k] = std::min(bins - 1, static_cast<int>(std::floor(below * bins / n)));
  }
  return out;
}

double mutual_information(const std::vector<int> &a, const std::vector<int> &b) {
  if (a.size() != b.size())
    throw ValidationError("mutual_information: labelings differ in length");
  if (a.empty())
    return 0.0;
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> pa, pb;
  const double n = static_cast<double>(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    joint[{a[k], b[k]}] += 1.0 / n;
    pa[a[k]] += 1.0 / n;
    pb[b[k]] += 1.0 / n;
  }
  std::vector<double> terms;
  for (const auto &[ab, p] : joint)
    terms.push_back(p * std::log(p / (pa[ab.first] * pb[ab.second])));
  // Summed in sorted order so MI(a,b) and MI(b,a) agree bit for bit.
  std::sort(terms.begin(), terms.end());
  double mi = 0.0;
  for (double t : terms)
    mi += t;
  return std::max(mi, 0.0);
}

Matrix trait_embedding_mi(const Matrix &traits, const Matrix &emb, int bins, Warnings *warnings) {
  if (traits.rows() != emb.rows())
    throw ValidationError("trait_embedding_mi: traits and embeddings need one row per species");
  if (traits.rows() < static_cast<Eigen::Index>(bins) * bins)
    throw ValidationError("trait_embedding_mi: need at least bins^2 species");
  Matrix out(traits.cols(), emb.cols());
  for (Eigen::Index t = 0; t < traits.cols(); ++t) {
    const Vector tc = traits.col(t);
    if (tc.maxCoeff() == tc.minCoeff() && warnings)
      warnings->add("trait column " + std::to_string(t) + " is constant");
    const auto tb = quantile_bins(std::span<const double>(tc.data(), static_cast<std::size_t>(tc.size())), bins);
    for (Eigen::Index l = 0; l < emb.cols(); ++l) {
      const Vector ec = emb.col(l);
      out(t, l) = mutual_information(
          tb, quantile_bins(std::span<const double>(ec.data(), static_cast<std::size_t>(ec.size())), bins));
    }
  }
  return out;
}

void to_json(nlohmann::json &j, const ClassMetrics &m) {
  j = {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"support", m.support},
       {"predicted", m.predicted}};
  j["pr_auc"] = m.pr_auc ? nlohmann::json(*m.pr_auc) : nlohmann::json(nullptr);
}

void to_json(nlohmann::json &j, const ClassificationReport &r) {
  nlohmann::json conf = nlohmann::json::array();
  for (Eigen::Index a = 0; a < 3; ++a)
    conf.push_back({r.confusion(a, 0), r.confusion(a, 1), r.confusion(a, 2)});
  j = {{"negative", r.negative}, {"neutral", r.neutral}, {"positive", r.positive},
       {"accuracy", r.accuracy}, {"pairs", r.pairs},     {"confusion", conf}};
}

void to_json(nlohmann::json &j, const BinaryMetrics &m) {
  j = {{"accuracy", m.accuracy}, {"f2", m.f2},     {"tss", m.tss}, {"sensitivity", m.sensitivity},
       {"specificity", m.specificity}, {"precision", m.precision}, {"tp", m.tp}, {"fp", m.fp},
       {"tn", m.tn}, {"fn", m.fn}};
  j["auc"] = m.auc ? nlohmann::json(*m.auc) : nlohmann::json(nullptr);
}

} // namespace ecoassoc
