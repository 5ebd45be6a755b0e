#include "ecoassoc/csv.hpp"
#include "ecoassoc/data.hpp"

#include <doctest.h>

#include <filesystem>
#include <numeric>
#include <set>

using namespace ecoassoc;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string &name) {
  const fs::path dir = fs::temp_directory_path() / "ecoassoc_unit" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

} // namespace

TEST_CASE("load a small community") {
  const fs::path dir = scratch_dir("load");
  csv::write_atomic(dir / "abundance.csv", "site,a,b\ns1,0,2\ns2,1,0\ns3,4,4\n");
  csv::write_atomic(dir / "covariates.csv", "site,E\ns1,0.5\ns2,1.5\ns3,2.5\n");
  const CommunityData d = load_community_dir(dir).data;
  CHECK(d.n_sites() == 3);
  CHECK(d.n_species() == 2);
  CHECK(d.abundance(2, 1) == 4.0);
  CHECK(d.species_ids == std::vector<std::string>{"a", "b"});
}

TEST_CASE("row-count mismatch is rejected") {
  const fs::path dir = scratch_dir("mismatch");
  csv::write_atomic(dir / "abundance.csv", "site,a,b\ns1,0,2\ns2,1,0\ns3,4,4\n");
  csv::write_atomic(dir / "covariates.csv", "site,E\ns1,0.5\ns2,1.5\n");
  CHECK_THROWS_AS(load_community_dir(dir), ValidationError);
}

TEST_CASE("negative abundance is rejected") {
  CHECK_THROWS_AS(make_community((Matrix(1, 2) << 1.0, -1.0).finished(), Matrix::Zero(1, 1)).validate(),
                  ValidationError);
}

TEST_CASE("categorical expansion is one-hot") {
  const std::vector<std::string> cols{"aspect", "E"};
  const std::vector<std::vector<std::string>> cells{{"N", "1"}, {"S", "2"}, {"E", "3"}, {"N", "4"}};
  PreprocessSpec spec;
  spec.categorical_columns = {0};
  const PreprocessState st = fit_preprocess(cols, cells, spec);
  const Matrix x = apply_preprocess(st, cells, "test");
  CHECK(x.cols() == 4);
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    CHECK(x.row(r).tail(3).sum() == 1.0);
  CHECK(x(0, 0) == 1.0);
}

TEST_CASE("scaled columns have zero mean and unit variance") {
  const std::vector<std::string> cols{"E"};
  std::vector<std::vector<std::string>> cells;
  for (int k = 0; k < 25; ++k)
    cells.push_back({std::to_string(3.0 * k + 0.25 * (k % 4))});
  PreprocessSpec spec;
  spec.scale_columns = {0};
  spec.add_quadratic = {0};
  const PreprocessState st = fit_preprocess(cols, cells, spec);
  const Matrix x = apply_preprocess(st, cells, "test");
  const double mean = x.col(0).mean();
  const double var = (x.col(0).array() - mean).square().sum() / static_cast<double>(x.rows());
  CHECK(std::abs(mean) < 1e-9);
  CHECK(std::abs(var - 1.0) < 1e-9);
  CHECK(x(3, 1) == doctest::Approx(x(3, 0) * x(3, 0)));
}

TEST_CASE("write then load reproduces the numbers") {
  const fs::path dir = scratch_dir("roundtrip");
  Matrix y(3, 2), x(3, 1);
  y << 0, 2, 17, 0.5, 3, 1;
  x << 0.1, -2.75, 1e-7;
  const CommunityData d = make_community(y, x);
  write_community(d, dir);
  const CommunityData back = load_community_dir(dir).data;
  CHECK(back.abundance == d.abundance);
  CHECK(back.covariates == d.covariates);
}

TEST_CASE("species offsets") {
  Matrix y(3, 3);
  y << 0, 0, 5, 2, 0, 5, 4, 0, 5;
  Warnings w;
  const Vector o = species_offsets(make_community(y, Matrix::Zero(3, 1)), &w);
  CHECK(o(0) == 3.0);
  CHECK(o(1) == 0.0);
  CHECK(o(2) == 5.0);
  CHECK_FALSE(w.empty());
}

TEST_CASE("stratified split") {
  SUBCASE("is a seed-deterministic partition") {
    Matrix y = Matrix::Ones(20, 3);
    const CommunityData d = make_community(y, Matrix::Zero(20, 1));
    const SplitResult a = stratified_split(d, 0.5, 11), b = stratified_split(d, 0.5, 11);
    CHECK(a.train == b.train);
    CHECK(a.test == b.test);
    CHECK(a.test.size() == 10);
    std::set<int> all(a.train.begin(), a.train.end());
    all.insert(a.test.begin(), a.test.end());
    CHECK(all.size() == 20);
  }
  SUBCASE("test share of a species follows the fraction") {
    Matrix y = Matrix::Zero(10, 2);
    for (int k = 0; k < 4; ++k)
      y(k, 0) = 1.0;
    y.col(1).setOnes();
    const SplitResult s = stratified_split(make_community(y, Matrix::Zero(10, 1)), 0.25, 3);
    int in_test = 0;
    for (int k : s.test)
      in_test += y(k, 0) > 0.0;
    CHECK(in_test == 1);
  }
  SUBCASE("singletons stay in training") {
    Matrix y = Matrix::Ones(10, 2);
    y.col(1).setZero();
    y(6, 1) = 1.0;
    const SplitResult s = stratified_split(make_community(y, Matrix::Zero(10, 1)), 0.3, 5);
    CHECK(std::find(s.train.begin(), s.train.end(), 6) != s.train.end());
    CHECK_FALSE(s.warnings.empty());
  }
}

TEST_CASE("stratified folds cover every site once") {
  Matrix y = Matrix::Ones(23, 2);
  const auto folds = stratified_folds(make_community(y, Matrix::Zero(23, 1)), 5, 1);
  CHECK(folds.size() == 23);
  std::vector<int> sizes(5, 0);
  for (int f : folds)
    ++sizes.at(static_cast<std::size_t>(f));
  CHECK(*std::min_element(sizes.begin(), sizes.end()) >= 4);
}

TEST_CASE("csv doubles round-trip") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 12345.678})
    CHECK(std::stod(csv::format_double(v)) == v);
}
