#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "phasesync/graph.hpp"
#include "support.hpp"

using namespace phasesync;

namespace {

WeightedDigraph directed_cycle(int n, double w = 1.0) {
  WeightedDigraph G;
  G.n = n;
  for (int i = 0; i < n; ++i) G.edges.push_back({i, (i + 1) % n, w});
  return G;
}

WeightedDigraph undirected_pair(int a, int b, int n, double w = 1.0) {
  WeightedDigraph G;
  G.n = n;
  G.edges.push_back({a, b, w});
  G.edges.push_back({b, a, w});
  return G;
}

WeightedDigraph random_strongly_connected(std::mt19937_64& g, int n) {
  WeightedDigraph G = directed_cycle(n);
  for (auto& e : G.edges) e.w = testgen::uniform(g, 0.3, 2.5);
  int extra = static_cast<int>(testgen::uniform(g, 0.0, 1.0) * n) + 1;
  for (int k = 0; k < extra; ++k) {
    int i = static_cast<int>(testgen::uniform(g, 0.0, n - 1e-9));
    int j = static_cast<int>(testgen::uniform(g, 0.0, n - 1e-9));
    if (i != j) G.edges.push_back({i, j, testgen::uniform(g, 0.2, 2.0)});
  }
  return G;
}

WeightedDigraph random_undirected_connected(std::mt19937_64& g, int n) {
  WeightedDigraph G;
  G.n = n;
  for (int v = 1; v < n; ++v) {
    int u = static_cast<int>(testgen::uniform(g, 0.0, v - 1e-9));
    double w = testgen::uniform(g, 0.2, 3.0);
    G.edges.push_back({u, v, w});
    G.edges.push_back({v, u, w});
  }
  for (int k = 0; k < n / 2; ++k) {
    int i = static_cast<int>(testgen::uniform(g, 0.0, n - 1e-9));
    int j = static_cast<int>(testgen::uniform(g, 0.0, n - 1e-9));
    if (i == j) continue;
    double w = testgen::uniform(g, 0.2, 3.0);
    G.edges.push_back({i, j, w});
    G.edges.push_back({j, i, w});
  }
  return G;
}

}  // namespace

TEST_CASE("laplacian assembly") {
  auto L2 = laplacian(undirected_pair(0, 1, 2));
  RMat expect(2, 2);
  expect << 1, -1, -1, 1;
  CHECK((L2 - expect).norm() < 1e-14);

  auto L3 = laplacian(directed_cycle(3));
  CHECK(L3(0, 0) == doctest::Approx(1.0));
  CHECK(L3(1, 0) == doctest::Approx(-1.0));
  CHECK(L3(2, 1) == doctest::Approx(-1.0));
  CHECK(L3(0, 2) == doctest::Approx(-1.0));
  CHECK(L3(0, 1) == doctest::Approx(0.0));

  auto g = testgen::rng(3);
  for (int t = 0; t < 10; ++t) {
    auto G = random_strongly_connected(g, 5);
    RMat L = laplacian(G);
    CHECK((L * RVec::Ones(5)).cwiseAbs().maxCoeff() < 1e-12);
  }

  WeightedDigraph bad;
  bad.n = 2;
  bad.edges.push_back({0, 0, 1.0});
  CHECK_THROWS_AS(laplacian(bad), Error);
}

TEST_CASE("connectivity classification") {
  auto cyc = connectivity(directed_cycle(3));
  CHECK(cyc.has_spanning_tree);
  CHECK(cyc.strongly_connected);
  CHECK(cyc.weight_balanced);

  WeightedDigraph lonely;
  lonely.n = 2;
  auto iso = connectivity(lonely);
  CHECK_FALSE(iso.has_spanning_tree);
  CHECK_FALSE(iso.strongly_connected);
  CHECK(iso.weight_balanced);

  WeightedDigraph star;
  star.n = 4;
  star.edges = {{0, 1, 1.0}, {0, 2, 1.0}, {0, 3, 1.0}};
  auto st = connectivity(star);
  CHECK(st.has_spanning_tree);
  CHECK_FALSE(st.strongly_connected);
  CHECK_FALSE(st.weight_balanced);
}

TEST_CASE("frobenius normal form") {
  auto g = testgen::rng(17);
  auto sc = random_strongly_connected(g, 4);
  auto dec1 = frobenius_form(sc);
  REQUIRE(dec1.blocks.size() == 1);
  CHECK((dec1.blocks[0].Lkk - dec1.blocks[0].Ltilde).norm() < 1e-12);

  // A 3-cycle feeding a sink node: two blocks, the sink block is the scalar
  // in-degree.
  WeightedDigraph G = directed_cycle(3);
  G.n = 4;
  G.edges.push_back({2, 3, 2.0});
  auto dec = frobenius_form(G);
  REQUIRE(dec.blocks.size() == 2);
  CHECK(dec.blocks[0].size == 3);
  CHECK(dec.blocks[1].size == 1);
  CHECK(dec.blocks[1].Lkk(0, 0) == doctest::Approx(2.0));
  CHECK(dec.blocks[1].Ltilde(0, 0) == doctest::Approx(0.0));
  // Lower block triangular: upper-right corner must vanish.
  CHECK(dec.L.block(0, 3, 3, 1).cwiseAbs().maxCoeff() < 1e-14);
  // Row sums of the root block vanish.
  CHECK((dec.blocks[0].Lkk * RVec::Ones(3)).cwiseAbs().maxCoeff() < 1e-12);
  // Non-root diagonal blocks are nonsingular M-matrices.
  Eigen::EigenSolver<RMat> es(dec.blocks[1].Lkk);
  CHECK(es.eigenvalues().real().minCoeff() > 0.0);

  WeightedDigraph two_sources;
  two_sources.n = 3;
  two_sources.edges = {{0, 2, 1.0}, {1, 2, 1.0}};
  CHECK_THROWS_AS(frobenius_form(two_sources), Error);
}

TEST_CASE("essential phase of laplacians") {
  // Undirected path: symmetric Laplacian, zero essential phase.
  auto g = testgen::rng(29);
  WeightedDigraph path;
  path.n = 4;
  for (int i = 0; i < 3; ++i) {
    double w = testgen::uniform(g, 0.5, 2.0);
    path.edges.push_back({i, i + 1, w});
    path.edges.push_back({i + 1, i, w});
  }
  auto sym = essential_phase_laplacian(laplacian(path));
  CHECK(std::abs(sym.value) < 1e-8);
  CHECK(sym.exact);

  // Directed unweighted 3-cycle: normal Laplacian with eigen-angles pi/6.
  auto cyc = essential_phase_laplacian(laplacian(directed_cycle(3)));
  CHECK(cyc.value == doctest::Approx(kPi / 6.0).epsilon(1e-9));

  // Weight-balanced graph: the scaling is trivial.
  auto bal = essential_phase_laplacian(laplacian(directed_cycle(5, 1.7)));
  CHECK((bal.scaling.array() - bal.scaling(0)).abs().maxCoeff() < 1e-8);
  CHECK(bal.value < kPi / 2.0);

  WeightedDigraph chain;
  chain.n = 3;
  chain.edges = {{0, 1, 1.0}, {1, 2, 1.0}};
  CHECK_THROWS_AS(essential_phase_laplacian(laplacian(chain)), Error);
}

TEST_CASE("essential phase properties on random strongly connected graphs") {
  auto g = testgen::rng(37);
  for (int t = 0; t < 15; ++t) {
    int n = 3 + (t % 4);
    auto G = random_strongly_connected(g, n);
    RMat L = laplacian(G);
    auto res = essential_phase_laplacian(L);
    CHECK(res.value < kPi / 2.0);

    // Eigen-angles are dominated by the essential phase.
    Eigen::EigenSolver<RMat> es(L);
    for (int i = 0; i < n; ++i) {
      Complex lam = es.eigenvalues()(i);
      if (std::abs(lam) < 1e-9) continue;
      CHECK(std::abs(std::arg(lam)) <= res.value + 1e-7);
    }

    // V L has 1 as both a left and a right null vector.
    RMat VL = res.scaling.asDiagonal() * L;
    CHECK((VL * RVec::Ones(n)).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((RVec::Ones(n).transpose() * VL).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("component phase bounds") {
  auto g = testgen::rng(43);
  auto sc = random_strongly_connected(g, 4);
  auto single = component_phase_bounds(frobenius_form(sc));
  REQUIRE(single.size() == 1);
  CHECK(single[0] ==
        doctest::Approx(essential_phase_laplacian(laplacian(sc)).value));

  // 3-cycle roots plus a mutually coupled pair.
  WeightedDigraph G = directed_cycle(3);
  G.n = 5;
  G.edges.push_back({3, 4, 1.0});
  G.edges.push_back({4, 3, 1.0});
  G.edges.push_back({2, 3, 1.0});
  auto bounds = component_phase_bounds(frobenius_form(G));
  REQUIRE(bounds.size() == 2);
  CHECK(bounds[0] == doctest::Approx(kPi / 6.0).epsilon(1e-9));
  CHECK(std::abs(bounds[1]) < 1e-8);

  // Singleton non-root component.
  WeightedDigraph H = directed_cycle(3);
  H.n = 4;
  H.edges.push_back({0, 3, 1.5});
  auto b2 = component_phase_bounds(frobenius_form(H));
  REQUIRE(b2.size() == 2);
  CHECK(std::abs(b2[1]) < 1e-12);

  // Numeric refinement may only tighten the component bound.
  WeightedDigraph D = directed_cycle(3);
  D.n = 6;
  D.edges.push_back({3, 4, 1.0});
  D.edges.push_back({4, 5, 1.0});
  D.edges.push_back({5, 3, 1.0});
  D.edges.push_back({2, 3, 0.8});
  auto dec = frobenius_form(D);
  auto plain = component_phase_bounds(dec, false);
  auto refined = component_phase_bounds(dec, true);
  REQUIRE(plain.size() == refined.size());
  for (size_t k = 0; k < plain.size(); ++k)
    CHECK(refined[k] <= plain[k] + 1e-9);
}

TEST_CASE("incidence factorization") {
  auto single = incidence(undirected_pair(0, 1, 2, 3.0));
  RMat L = single.E * single.weights.asDiagonal() * single.E.transpose();
  RMat expect(2, 2);
  expect << 3, -3, -3, 3;
  CHECK((L - expect).norm() < 1e-14);

  auto g = testgen::rng(59);
  for (int t = 0; t < 12; ++t) {
    auto G = random_undirected_connected(g, 3 + (t % 4));
    auto fac = incidence(G);
    RMat rec = fac.E * fac.weights.asDiagonal() * fac.E.transpose();
    RMat Ld = laplacian(G);
    CHECK((rec - Ld).norm() <= 1e-12 * std::max(1.0, Ld.norm()));
    for (int c = 0; c < fac.E.cols(); ++c) {
      CHECK(fac.E.col(c).sum() == doctest::Approx(0.0));
      CHECK(fac.E.col(c).cwiseAbs().sum() == doctest::Approx(2.0));
    }
  }

  CHECK_THROWS_AS(incidence(directed_cycle(3)), Error);
}
