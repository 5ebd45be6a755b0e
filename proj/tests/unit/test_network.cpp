#include "ecoassoc/network.hpp"
#include "ecoassoc/rng.hpp"

#include <doctest.h>

#include <functional>
#include <set>

using namespace ecoassoc;

TEST_CASE("discretize") {
  Matrix a(2, 2);
  a << 0.0, 0.06, -0.06, 0.0;
  const IntMatrix l = discretize(a, 0.05, 0.05);
  CHECK(l(0, 1) == Label::positive);
  CHECK(l(1, 0) == Label::negative);
  a(0, 1) = 0.01;
  CHECK(discretize(a, 0.05, 0.05)(0, 1) == Label::neutral);
  a(0, 0) = 5.0;
  CHECK(discretize(a, 0.05, 0.05)(0, 0) == Label::neutral);
}

TEST_CASE("discretize is scale equivariant") {
  Rng rng(1);
  Matrix a(5, 5);
  for (Eigen::Index i = 0; i < 5; ++i)
    for (Eigen::Index j = 0; j < 5; ++j)
      a(i, j) = uniform(rng, -0.2, 0.2);
  for (double c : {0.5, 3.0, 100.0})
    CHECK(discretize(c * a, c * 0.05, c * 0.07) == discretize(a, 0.05, 0.07));
}

TEST_CASE("bootstrap filter") {
  SUBCASE("constant replicates are kept") {
    const Matrix r = Matrix::Constant(2, 2, 0.3);
    const BootstrapResult b = bootstrap_filter({r, r, r});
    CHECK(b.kept(0, 1));
    CHECK(b.strengths(0, 1) == doctest::Approx(0.3));
  }
  SUBCASE("replicates around zero are dropped") {
    const BootstrapResult b = bootstrap_filter({Matrix::Constant(2, 2, 0.2), Matrix::Constant(2, 2, -0.2)});
    CHECK_FALSE(b.kept(0, 1));
    CHECK(b.strengths(0, 1) == 0.0);
  }
  SUBCASE("three positive replicates") {
    const BootstrapResult b =
        bootstrap_filter({Matrix::Constant(2, 2, 0.1), Matrix::Constant(2, 2, 0.2), Matrix::Constant(2, 2, 0.3)});
    CHECK(b.kept(1, 0));
    CHECK(b.strengths(1, 0) == doctest::Approx(0.2));
  }
}

TEST_CASE("co-clustering recovers blocks") {
  Matrix a(4, 4);
  a << 1, 1, -1, -1, 1, 1, -1, -1, -2, -2, 3, 3, -2, -2, 3, 3;
  const GroupStructure g = coclusters(a, 2, 2);
  CHECK(g.response_groups == std::vector<int>{0, 0, 1, 1});
  CHECK(g.effect_groups == std::vector<int>{0, 0, 1, 1});
  const GroupStructure single = coclusters(a, 4, 4);
  CHECK(std::set<int>(single.response_groups.begin(), single.response_groups.end()).size() == 4);
}

TEST_CASE("ward clustering is equivariant under row permutation") {
  Matrix x(6, 2);
  x << 0, 0, 0.1, 0, 5, 5, 5.1, 5, 10, 0, 10.1, 0.1;
  const auto l = ward_clusters(x, 3);
  const std::vector<int> perm{3, 0, 5, 1, 4, 2};
  Matrix xp(6, 2);
  for (int i = 0; i < 6; ++i)
    xp.row(i) = x.row(perm[static_cast<std::size_t>(i)]);
  const auto lp = ward_clusters(xp, 3);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j)
      CHECK((lp[static_cast<std::size_t>(i)] == lp[static_cast<std::size_t>(j)]) ==
            (l[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] ==
             l[static_cast<std::size_t>(perm[static_cast<std::size_t>(j)])]));
}

TEST_CASE("modularity communities") {
  SUBCASE("two disconnected triangles") {
    Matrix a = Matrix::Zero(6, 6);
    for (int b : {0, 3})
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          if (i != j)
            a(b + i, b + j) = 1.0;
    const Communities c = modularity_communities(a);
    CHECK(c.labels[0] == c.labels[2]);
    CHECK(c.labels[3] == c.labels[5]);
    CHECK(c.labels[0] != c.labels[3]);
    CHECK(c.modularity == doctest::Approx(0.5));
  }
  SUBCASE("complete uniform graph") {
    Matrix a = Matrix::Ones(5, 5);
    const Communities c = modularity_communities(a);
    CHECK(std::set<int>(c.labels.begin(), c.labels.end()).size() == 1);
  }
  SUBCASE("single edge") {
    Matrix a = Matrix::Zero(3, 3);
    a(0, 1) = 0.4;
    const Communities c = modularity_communities(a);
    CHECK(c.labels[0] == c.labels[1]);
    CHECK(c.modularity > -1e-12);
  }
}

TEST_CASE("summary network") {
  IntMatrix labels = IntMatrix::Zero(4, 4);
  GroupStructure g;
  g.response_groups = {0, 0, 1, 1};
  g.effect_groups = {0, 0, 1, 1};
  CHECK(summary_network(labels, g).empty());
  labels(0, 2) = 1;
  labels(0, 3) = 1;
  labels(1, 2) = 1;
  labels(1, 3) = -1;
  const auto edges = summary_network(labels, g);
  REQUIRE(edges.size() == 1);
  CHECK(edges[0].label == 1);
  CHECK(edges[0].proportion == doctest::Approx(0.75));
  CHECK(edges[0].effect_group == 1);
  CHECK(edges[0].response_group == 0);
}

TEST_CASE("exports") {
  Matrix a(2, 2);
  a << 0, 0.3, -0.2, 0;
  const AssociationNetwork net = AssociationNetwork::from_strengths(a, 0.05, 0.05);
  const std::string edges = edge_list_csv(net, {"a", "b"});
  CHECK(edges.find("b,a,0.3,positive") != std::string::npos);
  CHECK(edges.find("a,b,-0.2,negative") != std::string::npos);
  CHECK(to_dot(net, {"a", "b"}, {0, 0}).find("digraph") != std::string::npos);
  const AssociationNetwork none = AssociationNetwork::from_strengths(a, 10.0, 10.0);
  CHECK(edge_list_csv(none, {"a", "b"}).find('\n') == edge_list_csv(none, {"a", "b"}).size() - 1);
}
