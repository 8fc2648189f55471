#pragma once

// Random network and agent generators used by the analysis, synthesis, and
// acceptance suites. Agents are built from positive-real building blocks
// whose phase envelopes are known by construction, so instances land inside
// the checkable conditions without consulting the checker.

#include <random>
#include <vector>

#include "lti_builders.hpp"
#include "phasesync/graph.hpp"
#include "phasesync/lti.hpp"
#include "support.hpp"

namespace netgen {

using namespace phasesync;

inline WeightedDigraph random_spanning_tree_digraph(std::mt19937_64& g, int n) {
  WeightedDigraph G;
  G.n = n;
  for (int v = 1; v < n; ++v) {
    int u = static_cast<int>(testgen::uniform(g, 0.0, v - 1e-9));
    G.edges.push_back({u, v, testgen::uniform(g, 0.4, 2.0)});
  }
  int extra = n / 2;
  for (int k = 0; k < extra; ++k) {
    int i = static_cast<int>(testgen::uniform(g, 0.0, n - 1e-9));
    int j = static_cast<int>(testgen::uniform(g, 0.0, n - 1e-9));
    if (i != j) G.edges.push_back({i, j, testgen::uniform(g, 0.3, 1.5)});
  }
  return G;
}

inline WeightedDigraph random_connected_undirected(std::mt19937_64& g, int n) {
  WeightedDigraph G;
  G.n = n;
  auto add = [&](int a, int b, double w) {
    G.edges.push_back({a, b, w});
    G.edges.push_back({b, a, w});
  };
  for (int v = 1; v < n; ++v)
    add(static_cast<int>(testgen::uniform(g, 0.0, v - 1e-9)), v,
        testgen::uniform(g, 0.4, 2.0));
  for (int k = 0; k < n / 2; ++k) {
    int i = static_cast<int>(testgen::uniform(g, 0.0, n - 1e-9));
    int j = static_cast<int>(testgen::uniform(g, 0.0, n - 1e-9));
    if (i != j) add(i, j, testgen::uniform(g, 0.3, 1.5));
  }
  return G;
}

/// Positive-real agent: SPD residue at the origin, Hermitian positive
/// residues at the oscillatory modes, and a passive remainder
/// sum_l R_l/(s+a_l) with R_l symmetric PSD. Phases stay in [-pi/2, pi/2].
inline TransferMatrix positive_real_agent(std::mt19937_64& g, int m,
                                          const std::vector<double>& omega) {
  PersistentModes modes;
  modes.omega = omega;
  modes.m = m;
  RMat M0 = testgen::random_spd(g, m, 0.5);
  std::vector<CMat> Mk;
  for (double w : modes.nonzero()) {
    (void)w;
    CMat H = testgen::random_gaussian(g, m, m);
    Mk.push_back(H.adjoint() * H + 0.3 * CMat::Identity(m, m));
  }

  int terms = 1 + static_cast<int>(testgen::uniform(g, 0.0, 1.99));
  RMat A = RMat::Zero(terms * m, terms * m);
  RMat B = RMat::Zero(terms * m, m);
  RMat C = RMat::Zero(m, terms * m);
  for (int l = 0; l < terms; ++l) {
    double a = testgen::uniform(g, 0.5, 4.0);
    RMat R = testgen::random_spd(g, m, 0.1);
    // R/(s+a) realized with B = I so the residue R lands in C.
    A.block(l * m, l * m, m, m) = -a * RMat::Identity(m, m);
    B.block(l * m, 0, m, m) = RMat::Identity(m, m);
    C.block(0, l * m, m, m) = R;
  }
  StateSpace rem{A, B, C, RMat::Zero(m, m)};
  return TransferMatrix::from_partial_fraction(modes, M0, Mk, rem);
}

/// Scalar lead-lag g (s+z)/(s+p) wrapped as an m x m diagonal block; the
/// phase stays within +/- the lead angle.
inline TransferMatrix lead_lag_block(std::mt19937_64& g, int m,
                                     double max_ratio = 2.5) {
  double z = testgen::uniform(g, 0.5, 2.0);
  double p = z * testgen::uniform(g, 1.0 / max_ratio, max_ratio);
  double gain = testgen::uniform(g, 0.3, 2.0);
  RationalMatrix R;
  R.rows = R.cols = m;
  R.entries.assign(m * m, testsys::re({0.0}, {1.0}));
  for (int i = 0; i < m; ++i) R.at(i, i) = testsys::re({gain * z, gain}, {p, 1.0});
  return TransferMatrix::stable(R.realize(), m);
}

}  // namespace netgen
