#include <cmath>
#include <set>

#include "doctest.h"
#include "nirvar/cluster.hpp"
#include "nirvar/graph.hpp"
#include "nirvar/rng.hpp"

using namespace nirvar;

TEST_CASE("rng streams are reproducible and independent") {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) CHECK(a() == b());
  CHECK(Rng(42)() != c());

  const Rng root(7);
  Rng s1 = root.split("graph"), s2 = root.split("graph"), s3 = root.split("noise");
  CHECK(s1() == s2());
  CHECK(root.split("graph")() != s3());
  CHECK(root.split(std::uint64_t{0})() != root.split(std::uint64_t{1})());
}

TEST_CASE("rng uniform and normal moments") {
  Rng r(1);
  const int n = 200000;
  double su = 0, sn = 0, sn2 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    su += u;
    const double z = r.normal();
    sn += z;
    sn2 += z * z;
  }
  CHECK(su / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(std::abs(sn / n) < 0.01);
  CHECK(sn2 / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("planted block model") {
  const auto m = graph::BlockModel::planted(3, 0.75, 0.2);
  CHECK(m.blocks() == 3);
  for (int k = 0; k < 3; ++k)
    for (int l = 0; l < 3; ++l) CHECK(m.b(k, l) == (k == l ? 0.75 : 0.2));
  CHECK(m.pi.sum() == doctest::Approx(1.0));
  CHECK_NOTHROW(m.validate());
  CHECK_THROWS_AS(graph::BlockModel::planted(2, 1.5, 0.0).validate(), ConfigError);
}

TEST_CASE("latent positions give B = nu nu'") {
  Matrix nu(2, 2);
  nu << 0.05, 0.95, 0.95, 0.05;
  const auto m = graph::BlockModel::from_latent_positions(nu);
  CHECK((m.b - nu * nu.transpose()).norm() < 1e-15);
  CHECK(m.b(0, 0) == doctest::Approx(0.905));
  CHECK(m.b(0, 1) == doctest::Approx(0.095));
}

TEST_CASE("sampled communities follow the block priors") {
  auto m = graph::BlockModel::planted(3, 0.5, 0.1);
  m.pi = Vector(3);
  m.pi << 0.5, 0.3, 0.2;
  Rng r(3);
  const auto z = graph::sample_communities(m, 20000, r);
  CHECK_NOTHROW(z.validate());
  const auto counts = z.counts();
  CHECK(counts[0] / 20000.0 == doctest::Approx(0.5).epsilon(0.03));
  CHECK(counts[1] / 20000.0 == doctest::Approx(0.3).epsilon(0.03));
  CHECK(counts[2] / 20000.0 == doctest::Approx(0.2).epsilon(0.04));
}

TEST_CASE("contiguous communities") {
  const auto z = graph::contiguous_communities(10, 3);
  CHECK(z.k == 3);
  CHECK(z.labels.front() == 0);
  CHECK(z.labels.back() == 2);
  CHECK(std::is_sorted(z.labels.begin(), z.labels.end()));
  CHECK(z.empty_blocks() == 0);
}

TEST_CASE("sampled adjacency has unit diagonal and block edge rates") {
  const auto m = graph::BlockModel::planted(2, 0.7, 0.1);
  const auto z = graph::contiguous_communities(400, 2);
  Rng r(5);
  const auto a = graph::sample_adjacency(m, z, r);
  double in = 0, in_n = 0, out = 0, out_n = 0;
  for (int i = 0; i < 400; ++i) {
    CHECK(a(i, i) == 1);
    for (int j = 0; j < 400; ++j) {
      if (i == j) continue;
      REQUIRE(a(i, j) <= 1);
      if (z.labels[i] == z.labels[j]) in += a(i, j), ++in_n;
      else out += a(i, j), ++out_n;
    }
  }
  CHECK(in / in_n == doctest::Approx(0.7).epsilon(0.02));
  CHECK(out / out_n == doctest::Approx(0.1).epsilon(0.05));

  const Matrix p = graph::edge_probabilities(m, z);
  CHECK(p(0, 0) == 0.7);
  CHECK(p(0, 399) == 0.1);
}

TEST_CASE("p_in = 1, p_out = 0 reproduces the clique") {
  const auto m = graph::BlockModel::planted(4, 1.0, 0.0);
  const auto z = graph::contiguous_communities(20, 4);
  Rng r(9);
  const auto a = graph::sample_adjacency(m, z, r);
  const auto clique = graph::clique_stack(std::vector<graph::CommunityAssignment>{z});
  CHECK(graph::AdjacencyStack({a}) == clique);
}

TEST_CASE("adjacency stack validation and unfolding") {
  BinaryMatrix ok = BinaryMatrix::Identity(3, 3);
  BinaryMatrix bad_diag = BinaryMatrix::Ones(3, 3);
  bad_diag(1, 1) = 0;
  BinaryMatrix bad_value = BinaryMatrix::Identity(3, 3);
  bad_value(0, 1) = 2;
  CHECK_NOTHROW(graph::AdjacencyStack({ok}));
  CHECK_THROWS_AS(graph::AdjacencyStack({bad_diag}), ConfigError);
  CHECK_THROWS_AS(graph::AdjacencyStack({bad_value}), ConfigError);
  CHECK_THROWS_AS(graph::AdjacencyStack({ok, BinaryMatrix::Identity(2, 2)}), ConfigError);

  BinaryMatrix b2 = BinaryMatrix::Ones(3, 3);
  const graph::AdjacencyStack s({ok, b2});
  CHECK(s.features() == 2);
  CHECK(s.unfolded().cols() == 6);
  CHECK(s.nonzeros() == 3 + 9);
  CHECK(s.at(0, 4));
  CHECK_FALSE(s.at(0, 1));
}

TEST_CASE("clique stack from labels") {
  graph::CommunityAssignment z1{{0, 0, 1, 1, 1}, 2};
  graph::CommunityAssignment z2{{0, 1, 0, 1, 2}, 3};
  const std::vector<graph::CommunityAssignment> zs{z1, z2};
  const auto s = graph::clique_stack(zs);
  for (int q = 0; q < 2; ++q)
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) CHECK((s.block(q)(i, j) == 1) == (zs[q].labels[i] == zs[q].labels[j]));
  // sum of squared block sizes
  CHECK(s.nonzeros() == (4 + 9) + (4 + 4 + 1));
  CHECK(cluster::restriction_count(zs) == s.nonzeros());
}
