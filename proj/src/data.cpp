#include "ecoassoc/data.hpp"

#include "ecoassoc/csv.hpp"
#include "ecoassoc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <unordered_set>

namespace ecoassoc {

namespace fs = std::filesystem;
using nlohmann::json;

void CommunityData::validate() const {
  const auto n = n_sites();
  const auto m = n_species();
  if (covariates.rows() != abundance.rows())
    throw ValidationError("dimension mismatch: abundance has " + std::to_string(n) +
                          " rows, covariates have " + std::to_string(covariates.rows()));
  if (site_ids.size() != n)
    throw ValidationError("site_ids size does not match abundance rows");
  if (species_ids.size() != m)
    throw ValidationError("species_ids size does not match abundance columns");
  if (covariate_names.size() != n_covariates())
    throw ValidationError("covariate_names size does not match covariate columns");
  for (Eigen::Index k = 0; k < abundance.rows(); ++k) {
    for (Eigen::Index i = 0; i < abundance.cols(); ++i) {
      double v = abundance(k, i);
      if (!std::isfinite(v))
        throw ValidationError("missing or non-finite abundance at row " + std::to_string(k + 1) +
                              ", column " + std::to_string(i + 1));
      if (v < 0.0)
        throw ValidationError("negative abundance at row " + std::to_string(k + 1) +
                              " (" + site_ids[static_cast<std::size_t>(k)] + "), column " +
                              std::to_string(i + 1) + " (" +
                              species_ids[static_cast<std::size_t>(i)] + ")");
      if (binary && v != 0.0 && v != 1.0)
        throw ValidationError("non-binary abundance " + csv::format_double(v) + " at row " +
                              std::to_string(k + 1) + ", column " + std::to_string(i + 1));
    }
  }
  if (!covariates.allFinite())
    throw ValidationError("covariates contain non-finite values");
  std::unordered_set<std::string> seen(species_ids.begin(), species_ids.end());
  if (seen.size() != m)
    throw ValidationError("species_ids are not unique");
  if (coordinates && (static_cast<std::size_t>(coordinates->rows()) != n || coordinates->cols() != 2))
    throw ValidationError("coordinates must be n_sites x 2");
  if (time_index && time_index->size() != n)
    throw ValidationError("time_index must have one entry per site");
  if (offsets && static_cast<std::size_t>(offsets->size()) != m)
    throw ValidationError("offsets must have one entry per species");
  if (group_labels) {
    if (group_labels->size() != m)
      throw ValidationError("group_labels must cover all species");
    for (int g : *group_labels)
      if (g < 0)
        throw ValidationError("group_labels must be non-negative");
  }
}

CommunityData CommunityData::subset(const std::vector<int> &rows) const {
  CommunityData out;
  const auto r = static_cast<Eigen::Index>(rows.size());
  out.abundance.resize(r, abundance.cols());
  out.covariates.resize(r, covariates.cols());
  if (coordinates)
    out.coordinates = Matrix(r, 2);
  if (time_index)
    out.time_index = std::vector<int>();
  for (Eigen::Index t = 0; t < r; ++t) {
    const int k = rows[static_cast<std::size_t>(t)];
    out.abundance.row(t) = abundance.row(k);
    out.covariates.row(t) = covariates.row(k);
    out.site_ids.push_back(site_ids[static_cast<std::size_t>(k)]);
    if (coordinates)
      out.coordinates->row(t) = coordinates->row(k);
    if (time_index)
      out.time_index->push_back((*time_index)[static_cast<std::size_t>(k)]);
  }
  out.species_ids = species_ids;
  out.covariate_names = covariate_names;
  out.offsets = offsets;
  out.group_labels = group_labels;
  out.binary = binary;
  return out;
}

bool CommunityData::all_binary() const {
  return (abundance.array() == 0.0 || abundance.array() == 1.0).all();
}

CommunityData make_community(Matrix abundance, Matrix covariates, bool binary) {
  CommunityData d;
  d.site_ids = csv::numbered("site", static_cast<std::size_t>(abundance.rows()));
  d.species_ids = csv::numbered("sp", static_cast<std::size_t>(abundance.cols()));
  d.covariate_names = csv::numbered("x", static_cast<std::size_t>(covariates.cols()));
  d.abundance = std::move(abundance);
  d.covariates = std::move(covariates);
  d.binary = binary;
  d.validate();
  return d;
}

// --- preprocessing ---------------------------------------------------------

void PreprocessSpec::validate(std::size_t n_columns) const {
  auto check = [&](const std::vector<int> &cols, const char *what) {
    std::set<int> uniq;
    for (int c : cols) {
      if (c < 0 || static_cast<std::size_t>(c) >= n_columns)
        throw ValidationError(std::string("preprocess: ") + what + " column index " +
                              std::to_string(c) + " out of range");
      if (!uniq.insert(c).second)
        throw ValidationError(std::string("preprocess: duplicate ") + what + " column " +
                              std::to_string(c));
    }
  };
  check(categorical_columns, "categorical");
  check(scale_columns, "scale");
  check(add_quadratic, "quadratic");
  for (int c : categorical_columns) {
    if (std::find(scale_columns.begin(), scale_columns.end(), c) != scale_columns.end())
      throw ValidationError("preprocess: column " + std::to_string(c) +
                            " is both categorical and scaled");
    if (std::find(add_quadratic.begin(), add_quadratic.end(), c) != add_quadratic.end())
      throw ValidationError("preprocess: column " + std::to_string(c) +
                            " is both categorical and squared");
  }
}

namespace {

bool contains(const std::vector<int> &v, int x) { return std::find(v.begin(), v.end(), x) != v.end(); }

double parse_cell(const std::string &cell, const std::string &source, std::size_t row,
                  const std::string &column) {
  bool ok = false;
  double v = csv::parse_double(cell, ok);
  if (!ok)
    throw ValidationError(source + ": unparseable cell '" + cell + "' at row " +
                          std::to_string(row + 1) + ", column " + column);
  return v;
}

} // namespace

std::vector<std::string> PreprocessState::output_columns() const {
  std::vector<std::string> out;
  for (std::size_t c = 0; c < input_columns.size(); ++c)
    if (!contains(spec.categorical_columns, static_cast<int>(c)))
      out.push_back(input_columns[c]);
  for (int c : spec.categorical_columns)
    for (const auto &lvl : levels[static_cast<std::size_t>(c)])
      out.push_back(input_columns[static_cast<std::size_t>(c)] + "=" + lvl);
  for (int c : spec.add_quadratic)
    out.push_back(input_columns[static_cast<std::size_t>(c)] + "^2");
  return out;
}

PreprocessState fit_preprocess(const std::vector<std::string> &columns,
                               const std::vector<std::vector<std::string>> &cells,
                               const PreprocessSpec &spec, const std::vector<int> &rows) {
  spec.validate(columns.size());
  PreprocessState st;
  st.spec = spec;
  st.input_columns = columns;
  st.levels.assign(columns.size(), {});
  st.mean.assign(columns.size(), 0.0);
  st.scale.assign(columns.size(), 1.0);
  std::vector<int> use = rows;
  if (use.empty()) {
    use.resize(cells.size());
    std::iota(use.begin(), use.end(), 0);
  }
  for (int c : spec.categorical_columns) {
    std::set<std::string> lv;
    for (const auto &row : cells)
      lv.insert(row[static_cast<std::size_t>(c)]);
    st.levels[static_cast<std::size_t>(c)].assign(lv.begin(), lv.end());
  }
  for (int c : spec.scale_columns) {
    const auto cc = static_cast<std::size_t>(c);
    double sum = 0.0;
    for (int r : use)
      sum += parse_cell(cells[static_cast<std::size_t>(r)][cc], "covariates",
                        static_cast<std::size_t>(r), columns[cc]);
    const double mean = sum / static_cast<double>(use.size());
    double ss = 0.0;
    for (int r : use) {
      double v = parse_cell(cells[static_cast<std::size_t>(r)][cc], "covariates",
                            static_cast<std::size_t>(r), columns[cc]);
      ss += (v - mean) * (v - mean);
    }
    // Population variance, so scaled training rows have variance exactly 1.
    double sd = std::sqrt(ss / static_cast<double>(use.size()));
    st.mean[cc] = mean;
    st.scale[cc] = sd > 0.0 ? sd : 1.0;
  }
  return st;
}

Matrix apply_preprocess(const PreprocessState &st, const std::vector<std::vector<std::string>> &cells,
                        const std::string &source_name) {
  const auto out_cols = st.output_columns();
  Matrix out(static_cast<Eigen::Index>(cells.size()), static_cast<Eigen::Index>(out_cols.size()));
  const std::size_t n_in = st.input_columns.size();
  for (std::size_t r = 0; r < cells.size(); ++r) {
    if (cells[r].size() != n_in)
      throw ValidationError(source_name + ": row " + std::to_string(r + 1) + " has wrong width");
    std::vector<double> numeric(n_in, 0.0);
    Eigen::Index col = 0;
    for (std::size_t c = 0; c < n_in; ++c) {
      if (contains(st.spec.categorical_columns, static_cast<int>(c)))
        continue;
      double v = parse_cell(cells[r][c], source_name, r, st.input_columns[c]);
      if (contains(st.spec.scale_columns, static_cast<int>(c)))
        v = (v - st.mean[c]) / st.scale[c];
      numeric[c] = v;
      out(static_cast<Eigen::Index>(r), col++) = v;
    }
    for (int c : st.spec.categorical_columns) {
      const auto &lv = st.levels[static_cast<std::size_t>(c)];
      const auto &val = cells[r][static_cast<std::size_t>(c)];
      bool matched = false;
      for (const auto &l : lv) {
        const bool hit = (l == val);
        matched = matched || hit;
        out(static_cast<Eigen::Index>(r), col++) = hit ? 1.0 : 0.0;
      }
      if (!matched)
        throw ValidationError(source_name + ": unseen level '" + val + "' at row " +
                              std::to_string(r + 1) + ", column " +
                              st.input_columns[static_cast<std::size_t>(c)]);
    }
    for (int c : st.spec.add_quadratic) {
      double v = numeric[static_cast<std::size_t>(c)];
      out(static_cast<Eigen::Index>(r), col++) = v * v;
    }
  }
  return out;
}

// --- loading / writing -------------------------------------------------------

namespace {

int column_index(const csv::Table &t, const std::string &name) {
  for (std::size_t c = 0; c < t.columns.size(); ++c)
    if (t.columns[c] == name)
      return static_cast<int>(c);
  return -1;
}

void attach_site_meta(CommunityData &d, const fs::path &path) {
  auto t = csv::read_table(path);
  if (t.row_ids.size() != d.n_sites())
    throw ValidationError(path.string() + ": dimension mismatch, " + std::to_string(t.row_ids.size()) +
                          " rows vs " + std::to_string(d.n_sites()) + " sites");
  auto num = csv::numeric(t, path.string());
  int cx = column_index(t, "x"), cy = column_index(t, "y"), ct = column_index(t, "time");
  if ((cx >= 0) != (cy >= 0))
    throw ValidationError(path.string() + ": coordinates need both x and y columns");
  if (cx >= 0) {
    Matrix coords(num.rows(), 2);
    coords.col(0) = num.col(cx);
    coords.col(1) = num.col(cy);
    d.coordinates = coords;
  }
  if (ct >= 0) {
    std::vector<int> ti;
    for (Eigen::Index k = 0; k < num.rows(); ++k) {
      double v = num(k, ct);
      if (v != std::floor(v))
        throw ValidationError(path.string() + ": time must be integer at row " + std::to_string(k + 1));
      ti.push_back(static_cast<int>(v));
    }
    d.time_index = ti;
  }
}

void attach_species_meta(CommunityData &d, const fs::path &path) {
  auto t = csv::read_table(path);
  if (t.row_ids.size() != d.n_species())
    throw ValidationError(path.string() + ": dimension mismatch, " + std::to_string(t.row_ids.size()) +
                          " rows vs " + std::to_string(d.n_species()) + " species");
  auto num = csv::numeric(t, path.string());
  int cg = column_index(t, "group"), co = column_index(t, "offset");
  if (cg >= 0) {
    std::vector<int> g;
    for (Eigen::Index i = 0; i < num.rows(); ++i)
      g.push_back(static_cast<int>(num(i, cg)));
    d.group_labels = g;
  }
  if (co >= 0)
    d.offsets = Vector(num.col(co));
}

} // namespace

LoadedCommunity load_community(const fs::path &abundance_path, const fs::path &covariates_path,
                               const LoadOptions &options) {
  auto ab = csv::read_table(abundance_path);
  auto cov = csv::read_table(covariates_path);
  if (cov.row_ids.size() != ab.row_ids.size())
    throw ValidationError("dimension mismatch: " + abundance_path.string() + " has " +
                          std::to_string(ab.row_ids.size()) + " rows, " + covariates_path.string() +
                          " has " + std::to_string(cov.row_ids.size()));
  for (std::size_t k = 0; k < ab.row_ids.size(); ++k)
    if (ab.row_ids[k] != cov.row_ids[k])
      throw ValidationError("site id mismatch at row " + std::to_string(k + 1) + ": '" +
                            ab.row_ids[k] + "' vs '" + cov.row_ids[k] + "'");
  LoadedCommunity out;
  CommunityData &d = out.data;
  d.abundance = csv::numeric(ab, abundance_path.string());
  d.site_ids = ab.row_ids;
  d.species_ids = ab.columns;
  d.binary = options.binary;
  out.preprocess = fit_preprocess(cov.columns, cov.cells, options.preprocess);
  d.covariates = apply_preprocess(out.preprocess, cov.cells, covariates_path.string());
  d.covariate_names = out.preprocess.output_columns();
  if (options.sites_path)
    attach_site_meta(d, *options.sites_path);
  if (options.species_path)
    attach_species_meta(d, *options.species_path);
  d.validate();
  return out;
}

LoadedCommunity load_community_dir(const fs::path &dir, bool binary) {
  LoadOptions opt;
  opt.binary = binary;
  if (fs::exists(dir / "sites.csv"))
    opt.sites_path = dir / "sites.csv";
  if (fs::exists(dir / "species.csv"))
    opt.species_path = dir / "species.csv";
  if (fs::exists(dir / "preprocess.json"))
    opt.preprocess = json::parse(csv::read_file(dir / "preprocess.json")).get<PreprocessSpec>();
  if (!fs::exists(dir / "abundance.csv"))
    throw ValidationError("missing " + (dir / "abundance.csv").string());
  if (!fs::exists(dir / "covariates.csv"))
    throw ValidationError("missing " + (dir / "covariates.csv").string());
  return load_community(dir / "abundance.csv", dir / "covariates.csv", opt);
}

void write_community(const CommunityData &data, const fs::path &dir) {
  csv::write_atomic(dir / "abundance.csv",
                    csv::to_csv("site", data.site_ids, data.species_ids, data.abundance));
  csv::write_atomic(dir / "covariates.csv",
                    csv::to_csv("site", data.site_ids, data.covariate_names, data.covariates));
  if (data.coordinates || data.time_index) {
    std::vector<std::string> cols;
    Matrix meta(static_cast<Eigen::Index>(data.n_sites()), 0);
    if (data.coordinates) {
      cols = {"x", "y"};
      meta = *data.coordinates;
    }
    if (data.time_index) {
      cols.push_back("time");
      Matrix m2(meta.rows(), meta.cols() + 1);
      m2.leftCols(meta.cols()) = meta;
      for (Eigen::Index k = 0; k < m2.rows(); ++k)
        m2(k, meta.cols()) = (*data.time_index)[static_cast<std::size_t>(k)];
      meta = m2;
    }
    csv::write_atomic(dir / "sites.csv", csv::to_csv("site", data.site_ids, cols, meta));
  }
  if (data.group_labels || data.offsets) {
    std::vector<std::string> cols;
    Matrix meta(static_cast<Eigen::Index>(data.n_species()), 0);
    std::vector<Vector> blocks;
    if (data.group_labels) {
      cols.push_back("group");
      Vector g(static_cast<Eigen::Index>(data.n_species()));
      for (std::size_t i = 0; i < data.n_species(); ++i)
        g(static_cast<Eigen::Index>(i)) = (*data.group_labels)[i];
      blocks.push_back(g);
    }
    if (data.offsets) {
      cols.push_back("offset");
      blocks.push_back(*data.offsets);
    }
    meta.resize(static_cast<Eigen::Index>(data.n_species()), static_cast<Eigen::Index>(blocks.size()));
    for (std::size_t b = 0; b < blocks.size(); ++b)
      meta.col(static_cast<Eigen::Index>(b)) = blocks[b];
    csv::write_atomic(dir / "species.csv", csv::to_csv("species", data.species_ids, cols, meta));
  }
}

// --- stratification ---------------------------------------------------------

std::vector<int> iterative_stratification(const Matrix &abundance, const std::vector<double> &ratios,
                                          std::uint64_t seed, const std::vector<int> &forced) {
  const auto n = static_cast<std::size_t>(abundance.rows());
  const auto m = static_cast<std::size_t>(abundance.cols());
  const std::size_t parts = ratios.size();
  if (parts < 2)
    throw ValidationError("stratification needs at least two parts");
  Rng rng = make_stream(seed, "stratify");

  std::vector<std::vector<int>> labels(n);
  std::vector<double> label_total(m, 0.0);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < m; ++i)
      if (abundance(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) > 0.0) {
        labels[k].push_back(static_cast<int>(i));
        label_total[i] += 1.0;
      }

  std::vector<double> desired(parts);
  std::vector<std::vector<double>> desired_label(parts, std::vector<double>(m));
  for (std::size_t s = 0; s < parts; ++s) {
    desired[s] = ratios[s] * static_cast<double>(n);
    for (std::size_t i = 0; i < m; ++i)
      desired_label[s][i] = ratios[s] * label_total[i];
  }

  std::vector<int> assigned(n, -1);
  auto assign = [&](std::size_t k, std::size_t s) {
    assigned[k] = static_cast<int>(s);
    desired[s] -= 1.0;
    for (int l : labels[k])
      desired_label[s][static_cast<std::size_t>(l)] -= 1.0;
  };
  if (!forced.empty())
    for (std::size_t k = 0; k < n; ++k)
      if (forced[k] >= 0)
        assign(k, static_cast<std::size_t>(forced[k]));

  auto pick = [&](auto &&primary) {
    std::vector<std::size_t> best;
    double best_p = -std::numeric_limits<double>::infinity();
    double best_t = -std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < parts; ++s) {
      double p = primary(s), t = desired[s];
      if (p > best_p + 1e-12 || (std::abs(p - best_p) <= 1e-12 && t > best_t + 1e-12)) {
        best = {s};
        best_p = p;
        best_t = t;
      } else if (std::abs(p - best_p) <= 1e-12 && std::abs(t - best_t) <= 1e-12) {
        best.push_back(s);
      }
    }
    return best.size() == 1 ? best[0] : best[uniform_index(rng, best.size())];
  };

  while (true) {
    std::vector<int> remaining(m, 0);
    for (std::size_t k = 0; k < n; ++k)
      if (assigned[k] < 0)
        for (int l : labels[k])
          ++remaining[static_cast<std::size_t>(l)];
    int rarest = -1;
    for (std::size_t i = 0; i < m; ++i)
      if (remaining[i] > 0 && (rarest < 0 || remaining[i] < remaining[static_cast<std::size_t>(rarest)]))
        rarest = static_cast<int>(i);
    if (rarest < 0)
      break;
    std::vector<std::size_t> sites;
    for (std::size_t k = 0; k < n; ++k)
      if (assigned[k] < 0 &&
          std::find(labels[k].begin(), labels[k].end(), rarest) != labels[k].end())
        sites.push_back(k);
    shuffle(sites.begin(), sites.end(), rng);
    for (std::size_t k : sites) {
      std::size_t s = pick([&](std::size_t p) { return desired_label[p][static_cast<std::size_t>(rarest)]; });
      assign(k, s);
    }
  }
  for (std::size_t k = 0; k < n; ++k)
    if (assigned[k] < 0)
      assign(k, pick([&](std::size_t p) { return desired[p]; }));
  return assigned;
}

SplitResult stratified_split(const CommunityData &data, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw ValidationError("test_fraction must lie in (0,1)");
  SplitResult out;
  const auto n = data.n_sites();
  std::vector<int> forced(n, -1);
  for (std::size_t i = 0; i < data.n_species(); ++i) {
    int count = 0, where = -1;
    for (std::size_t k = 0; k < n; ++k)
      if (data.abundance(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) > 0.0) {
        ++count;
        where = static_cast<int>(k);
      }
    if (count == 1) {
      out.warnings.add("species " + data.species_ids[i] +
                       " occurs at a single site; that site is kept in the training part");
      forced[static_cast<std::size_t>(where)] = 0;
    }
  }
  auto parts = iterative_stratification(data.abundance, {1.0 - test_fraction, test_fraction}, seed, forced);
  for (std::size_t k = 0; k < n; ++k)
    (parts[k] == 0 ? out.train : out.test).push_back(static_cast<int>(k));
  return out;
}

std::vector<int> stratified_folds(const CommunityData &data, int k, std::uint64_t seed) {
  if (k < 2)
    throw ValidationError("need at least 2 folds");
  if (static_cast<std::size_t>(k) > data.n_sites())
    throw ValidationError("folds (" + std::to_string(k) + ") exceed sites (" +
                          std::to_string(data.n_sites()) + ")");
  std::vector<double> ratios(static_cast<std::size_t>(k), 1.0 / k);
  return iterative_stratification(data.abundance, ratios, seed);
}

Vector species_offsets(const CommunityData &data, Warnings *warnings) {
  Vector out = Vector::Zero(static_cast<Eigen::Index>(data.n_species()));
  for (Eigen::Index i = 0; i < data.abundance.cols(); ++i) {
    double sum = 0.0;
    int count = 0;
    for (Eigen::Index k = 0; k < data.abundance.rows(); ++k) {
      double y = data.abundance(k, i);
      if (y > 0.0) {
        sum += y;
        ++count;
      }
    }
    if (count == 0) {
      if (warnings)
        warnings->add("species " + data.species_ids[static_cast<std::size_t>(i)] +
                      " is never present; offset set to 0");
    } else {
      out(i) = sum / count;
    }
  }
  return out;
}

// --- json -------------------------------------------------------------------

void to_json(json &j, const PreprocessSpec &s) {
  j = json{{"categorical_columns", s.categorical_columns},
           {"scale_columns", s.scale_columns},
           {"add_quadratic", s.add_quadratic}};
}

void from_json(const json &j, PreprocessSpec &s) {
  s = PreprocessSpec{};
  if (j.contains("categorical_columns"))
    j.at("categorical_columns").get_to(s.categorical_columns);
  if (j.contains("scale_columns"))
    j.at("scale_columns").get_to(s.scale_columns);
  if (j.contains("add_quadratic"))
    j.at("add_quadratic").get_to(s.add_quadratic);
}

void to_json(json &j, const PreprocessState &s) {
  j = json{{"spec", s.spec},     {"input_columns", s.input_columns}, {"levels", s.levels},
           {"mean", s.mean},     {"scale", s.scale}};
}

void from_json(const json &j, PreprocessState &s) {
  j.at("spec").get_to(s.spec);
  j.at("input_columns").get_to(s.input_columns);
  j.at("levels").get_to(s.levels);
  j.at("mean").get_to(s.mean);
  j.at("scale").get_to(s.scale);
}

} // namespace ecoassoc
