#include "ecoassoc/network.hpp"

#include "ecoassoc/csv.hpp"
#include "ecoassoc/rng.hpp"
#include "ecoassoc/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

namespace ecoassoc {

IntMatrix discretize(const Matrix &a, double eps_pos, double eps_neg) {
  if (!(eps_pos >= 0.0) || !(eps_neg >= 0.0))
    throw ValidationError("discretize: thresholds must be non-negative");
  IntMatrix out = IntMatrix::Zero(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if (i == j)
        continue;
      if (a(i, j) > eps_pos)
        out(i, j) = Label::positive;
      else if (a(i, j) < -eps_neg)
        out(i, j) = Label::negative;
    }
  return out;
}

AssociationNetwork AssociationNetwork::from_strengths(Matrix strengths, double eps_pos, double eps_neg) {
  if (strengths.rows() != strengths.cols())
    throw ValidationError("association matrix must be square");
  strengths.diagonal().setZero();
  AssociationNetwork n;
  n.labels = discretize(strengths, eps_pos, eps_neg);
  n.strengths = std::move(strengths);
  n.eps_pos = eps_pos;
  n.eps_neg = eps_neg;
  return n;
}

BootstrapResult bootstrap_filter(const std::vector<Matrix> &reps, double ci) {
  if (reps.empty())
    throw ValidationError("bootstrap_filter: no replicates");
  if (!(ci > 0.0 && ci < 1.0))
    throw ValidationError("bootstrap_filter: ci must be in (0,1)");
  const auto m = reps.front().rows();
  BootstrapResult out;
  out.replicates = reps.size();
  out.strengths = Matrix::Zero(m, reps.front().cols());
  out.ci_low = out.strengths;
  out.ci_high = out.strengths;
  out.kept.setConstant(m, reps.front().cols(), false);
  const double tail = (1.0 - ci) / 2.0;
  std::vector<double> v(reps.size());
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < out.strengths.cols(); ++j) {
      for (std::size_t b = 0; b < reps.size(); ++b)
        v[b] = reps[b](i, j);
      const double lo = stats::quantile(v, tail), hi = stats::quantile(v, 1.0 - tail);
      out.ci_low(i, j) = lo;
      out.ci_high(i, j) = hi;
      if (lo > 0.0 || hi < 0.0) {
        out.kept(i, j) = true;
        out.strengths(i, j) = stats::mean(v);
      }
    }
  return out;
}

BootstrapResult bootstrap_network(const CommunityData &data, const ModelSpec &spec, TrainConfig config, int B,
                                  double ci, std::uint64_t seed) {
  if (B < 2)
    throw ValidationError("bootstrap needs at least 2 replicates");
  config.lambda_l1 = 0.0;
  const std::size_t n = data.n_sites();
  std::vector<std::optional<Matrix>> fitted(static_cast<std::size_t>(B));
  std::vector<std::string> failures(static_cast<std::size_t>(B));
#pragma omp parallel for schedule(static)
  for (int b = 0; b < B; ++b) {
    Rng rng = make_stream(seed, "bootstrap", static_cast<std::uint64_t>(b));
    std::vector<int> rows(n);
    for (auto &r : rows)
      r = static_cast<int>(uniform_index(rng, n));
    try {
      const CommunityData sample = data.subset(rows);
      TrainConfig c = config;
      c.seed = stream_seed(seed, "bootstrap_fit", static_cast<std::uint64_t>(b));
      FittedModel model = fit(sample, initialize(sample, spec, c), c);
      fitted[static_cast<std::size_t>(b)] = model.emb.association_matrix();
    } catch (const std::exception &e) {
      failures[static_cast<std::size_t>(b)] = e.what();
    }
  }
  std::vector<Matrix> reps;
  Warnings warnings;
  for (int b = 0; b < B; ++b) {
    if (fitted[static_cast<std::size_t>(b)])
      reps.push_back(std::move(*fitted[static_cast<std::size_t>(b)]));
    else
      warnings.add("bootstrap replicate " + std::to_string(b) + " dropped: " + failures[static_cast<std::size_t>(b)]);
  }
  if (2 * reps.size() < static_cast<std::size_t>(B))
    throw NumericalError("bootstrap: only " + std::to_string(reps.size()) + " of " + std::to_string(B) +
                         " replicates succeeded");
  BootstrapResult out = bootstrap_filter(reps, ci);
  out.warnings = std::move(warnings);
  return out;
}

namespace {

std::vector<int> relabel(const std::vector<int> &raw) {
  std::map<int, int> seen;
  std::vector<int> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    auto [it, inserted] = seen.emplace(raw[i], static_cast<int>(seen.size()));
    out[i] = it->second;
  }
  return out;
}

} // namespace

std::vector<int> ward_clusters(const Matrix &x, int k) {
  const auto m = static_cast<int>(x.rows());
  if (m == 0)
    return {};
  if (k < 1 || k > m)
    throw ValidationError("cluster count must be in [1, " + std::to_string(m) + "]");
  Matrix d(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      d(i, j) = (x.row(i) - x.row(j)).squaredNorm();
  std::vector<int> label(static_cast<std::size_t>(m)), size(static_cast<std::size_t>(m), 1);
  std::vector<char> alive(static_cast<std::size_t>(m), 1);
  for (int i = 0; i < m; ++i)
    label[static_cast<std::size_t>(i)] = i;
  for (int clusters = m; clusters > k; --clusters) {
    int bi = -1, bj = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < m; ++i) {
      if (!alive[static_cast<std::size_t>(i)])
        continue;
      for (int j = i + 1; j < m; ++j)
        if (alive[static_cast<std::size_t>(j)] && d(i, j) < best) {
          best = d(i, j);
          bi = i;
          bj = j;
        }
    }
    const double ni = size[static_cast<std::size_t>(bi)], nj = size[static_cast<std::size_t>(bj)];
    for (int t = 0; t < m; ++t) {
      if (!alive[static_cast<std::size_t>(t)] || t == bi || t == bj)
        continue;
      const double nt = size[static_cast<std::size_t>(t)];
      const double v = ((ni + nt) * d(t, bi) + (nj + nt) * d(t, bj) - nt * d(bi, bj)) / (ni + nj + nt);
      d(t, bi) = d(bi, t) = v;
    }
    alive[static_cast<std::size_t>(bj)] = 0;
    size[static_cast<std::size_t>(bi)] += size[static_cast<std::size_t>(bj)];
    for (auto &l : label)
      if (l == bj)
        l = bi;
  }
  return relabel(label);
}

GroupStructure coclusters(const Matrix &strengths, int n_row_groups, int n_col_groups) {
  if (strengths.rows() != strengths.cols())
    throw ValidationError("coclusters: association matrix must be square");
  GroupStructure g;
  g.response_groups = ward_clusters(strengths, n_row_groups);
  g.effect_groups = ward_clusters(strengths.transpose(), n_col_groups);
  return g;
}

Matrix modularity_weights(const Matrix &a) {
  Matrix w = a.cwiseAbs().cwiseMax(a.transpose().cwiseAbs());
  w.diagonal().setZero();
  return w;
}

double modularity(const Matrix &w, const std::vector<int> &labels) {
  const double total = w.sum();
  if (total <= 0.0)
    return 0.0;
  const Vector degree = w.rowwise().sum();
  double q = 0.0;
  for (Eigen::Index i = 0; i < w.rows(); ++i)
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      if (labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)])
        q += w(i, j) - degree(i) * degree(j) / total;
  return q / total;
}

Communities modularity_communities(const Matrix &strengths) {
  const Matrix w = modularity_weights(strengths);
  const auto m = static_cast<int>(w.rows());
  Communities out;
  out.labels.assign(static_cast<std::size_t>(m), 0);
  const double total = w.sum();
  if (m == 0 || total <= 0.0)
    return out;
  Matrix e = w / total;
  Vector a = e.rowwise().sum();
  std::vector<int> label(static_cast<std::size_t>(m));
  std::vector<char> alive(static_cast<std::size_t>(m), 1);
  for (int i = 0; i < m; ++i)
    label[static_cast<std::size_t>(i)] = i;
  for (;;) {
    int bi = -1, bj = -1;
    double best = 1e-12;
    for (int i = 0; i < m; ++i) {
      if (!alive[static_cast<std::size_t>(i)])
        continue;
      for (int j = i + 1; j < m; ++j) {
        if (!alive[static_cast<std::size_t>(j)] || e(i, j) <= 0.0)
          continue;
        const double gain = 2.0 * (e(i, j) - a(i) * a(j));
        if (gain > best) {
          best = gain;
          bi = i;
          bj = j;
        }
      }
    }
    if (bi < 0)
      break;
    e.row(bi) += e.row(bj);
    e.col(bi) += e.col(bj);
    e.row(bj).setZero();
    e.col(bj).setZero();
    a(bi) += a(bj);
    a(bj) = 0.0;
    alive[static_cast<std::size_t>(bj)] = 0;
    for (auto &l : label)
      if (l == bj)
        l = bi;
  }
  out.labels = relabel(label);
  out.modularity = modularity(w, out.labels);
  return out;
}

std::vector<SummaryEdge> summary_network(const IntMatrix &labels, const GroupStructure &groups) {
  const auto m = labels.rows();
  if (groups.response_groups.size() != static_cast<std::size_t>(m) ||
      groups.effect_groups.size() != static_cast<std::size_t>(m))
    throw ValidationError("summary_network: group labels must cover every species");
  std::map<std::pair<int, int>, std::pair<std::size_t, std::size_t>> counts;
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) {
      if (i == j || labels(i, j) == Label::neutral)
        continue;
      auto &c = counts[{groups.effect_groups[static_cast<std::size_t>(j)],
                        groups.response_groups[static_cast<std::size_t>(i)]}];
      (labels(i, j) == Label::positive ? c.first : c.second) += 1;
    }
  std::vector<SummaryEdge> edges;
  for (const auto &[key, c] : counts) {
    SummaryEdge s;
    s.effect_group = key.first;
    s.response_group = key.second;
    s.positive = c.first;
    s.negative = c.second;
    s.label = c.first >= c.second ? Label::positive : Label::negative;
    s.proportion = static_cast<double>(std::max(c.first, c.second)) / static_cast<double>(c.first + c.second);
    edges.push_back(s);
  }
  return edges;
}

namespace {

const char *label_name(int l) {
  return l == Label::positive ? "positive" : (l == Label::negative ? "negative" : "neutral");
}

} // namespace

std::string adjacency_csv(const Matrix &s, const std::vector<std::string> &ids) {
  std::ostringstream out;
  out << "target";
  for (const auto &id : ids)
    out << ',' << id;
  out << '\n';
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    out << ids[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < s.cols(); ++j)
      out << ',' << csv::format_double(s(i, j));
    out << '\n';
  }
  return out.str();
}

std::string edge_list_csv(const AssociationNetwork &net, const std::vector<std::string> &ids) {
  std::ostringstream out;
  out << "source,target,strength,label\n";
  for (Eigen::Index j = 0; j < net.labels.cols(); ++j)
    for (Eigen::Index i = 0; i < net.labels.rows(); ++i)
      if (net.labels(i, j) != Label::neutral)
        out << ids[static_cast<std::size_t>(j)] << ',' << ids[static_cast<std::size_t>(i)] << ','
            << csv::format_double(net.strengths(i, j)) << ',' << label_name(net.labels(i, j)) << '\n';
  return out.str();
}

std::string summary_csv(const std::vector<SummaryEdge> &edges) {
  std::ostringstream out;
  out << "effect_group,response_group,label,proportion,positive,negative\n";
  for (const auto &e : edges)
    out << e.effect_group << ',' << e.response_group << ',' << label_name(e.label) << ','
        << csv::format_double(e.proportion) << ',' << e.positive << ',' << e.negative << '\n';
  return out.str();
}

std::string groups_csv(const GroupStructure &g, const std::vector<std::string> &ids) {
  std::ostringstream out;
  out << "species,response_group,effect_group,module\n";
  for (std::size_t i = 0; i < ids.size(); ++i)
    out << ids[i] << ',' << g.response_groups[i] << ',' << g.effect_groups[i] << ',' << g.modules[i] << '\n';
  return out.str();
}

std::string to_dot(const AssociationNetwork &net, const std::vector<std::string> &ids,
                   const std::vector<int> &modules) {
  std::ostringstream out;
  out << "digraph associations {\n";
  for (std::size_t i = 0; i < ids.size(); ++i)
    out << "  \"" << ids[i] << "\" [module=" << (i < modules.size() ? modules[i] : 0) << "];\n";
  for (Eigen::Index j = 0; j < net.labels.cols(); ++j)
    for (Eigen::Index i = 0; i < net.labels.rows(); ++i)
      if (net.labels(i, j) != Label::neutral)
        out << "  \"" << ids[static_cast<std::size_t>(j)] << "\" -> \"" << ids[static_cast<std::size_t>(i)]
            << "\" [weight=" << csv::format_double(net.strengths(i, j))
            << ", color=" << (net.labels(i, j) == Label::positive ? "red" : "blue") << "];\n";
  out << "}\n";
  return out.str();
}

} // namespace ecoassoc
