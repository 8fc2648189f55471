#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lti_builders.hpp"
#include "netgen.hpp"
#include "phasesync/analysis.hpp"

using namespace phasesync;
using testsys::integrator;
using testsys::re;
using testsys::static_gain;

namespace {

TransferMatrix rational_scalar(std::vector<double> num,
                               std::vector<double> den) {
  RationalMatrix R;
  R.rows = R.cols = 1;
  R.entries = {re(std::move(num), std::move(den))};
  return TransferMatrix::stable(R.realize(), 1);
}

/// ((s+10)/(s+1))^3: a stable all-pole lag whose phase dips below -pi/2.
TransferMatrix heavy_lag() {
  return rational_scalar({1000, 300, 30, 1}, {1, 3, 3, 1});
}

}  // namespace

TEST_CASE("small phase check on canonical pairs") {
  AnalysisOptions opts;
  opts.sweep.grid_points = 160;

  auto G = integrator();
  auto H1 = static_gain(RMat::Identity(1, 1));
  auto v1 = small_phase_check(G, H1, opts);
  CHECK(v1.holds);
  CHECK(v1.margin == doctest::Approx(kPi / 2.0).epsilon(1e-3));

  auto H2 = rational_scalar({1, 1}, {2, 1});  // (s+1)/(s+2)
  auto v2 = small_phase_check(G, H2, opts);
  CHECK(v2.holds);
  double max_lead = std::atan(std::sqrt(2.0)) - std::atan(std::sqrt(2.0) / 2.0);
  CHECK(v2.margin > kPi / 2.0 - max_lead - 1e-6);

  // Double integrator: the origin pole is not simple in the element.
  StateSpace dd;
  dd.A = RMat::Zero(2, 2);
  dd.A(0, 1) = 1.0;
  dd.B = RMat::Zero(2, 1);
  dd.B(1, 0) = 1.0;
  dd.C = RMat::Zero(1, 2);
  dd.C(0, 0) = 1.0;
  dd.D = RMat::Zero(1, 1);
  PersistentModes modes;
  modes.omega = {0.0};
  modes.m = 1;
  auto Gdd = TransferMatrix::from_state_space(dd, modes, false);
  auto v3 = small_phase_check(Gdd, H1, opts);
  CHECK_FALSE(v3.holds);
  CHECK_FALSE(v3.preconditions_ok);

  // An undeclared oscillatory pole breaks semi-stability.
  StateSpace osc;
  osc.A = RMat::Zero(3, 3);
  osc.A(1, 2) = 1.0;
  osc.A(2, 1) = -1.0;
  osc.B = RMat::Ones(3, 1);
  osc.C = RMat::Ones(1, 3);
  osc.D = RMat::Zero(1, 1);
  auto Gosc = TransferMatrix::from_state_space(osc, modes, false);
  auto v4 = small_phase_check(Gosc, H1, opts);
  CHECK_FALSE(v4.holds);
  CHECK_FALSE(v4.preconditions_ok);
  CHECK(v4.precondition_failure.find("semi-stable") != std::string::npos);
}

TEST_CASE("edge dynamics condition on integrator networks") {
  AnalysisOptions opts;
  opts.sweep.grid_points = 120;

  auto g = testgen::rng(101);
  auto G = netgen::random_connected_undirected(g, 4);
  std::vector<TransferMatrix> agents;
  for (int i = 0; i < 4; ++i)
    agents.push_back(integrator(testgen::uniform(g, 0.5, 3.0)));
  std::vector<TransferMatrix> edges = {static_gain(RMat::Identity(1, 1))};
  auto v = check_edge_dynamics(agents, edges, G, opts);
  CHECK(v.holds);
  CHECK(v.residues_sectorial_joint);

  // Heavy lag on one edge drives the lower phase sum past -pi.
  WeightedDigraph pair = testsys::undirected_edge_graph();
  std::vector<TransferMatrix> two = {integrator(), integrator()};
  auto bad = check_edge_dynamics(two, {heavy_lag()}, pair, opts);
  CHECK_FALSE(bad.holds);
  CHECK(bad.preconditions_ok);
  CHECK(bad.worst_frequency == doctest::Approx(std::sqrt(10.0)).epsilon(0.15));

  // Directed input is a precondition failure.
  WeightedDigraph directed;
  directed.n = 2;
  directed.edges = {{0, 1, 1.0}};
  auto pre = check_edge_dynamics(two, {static_gain(RMat::Identity(1, 1))},
                                 directed, opts);
  CHECK_FALSE(pre.holds);
  CHECK_FALSE(pre.preconditions_ok);
}

TEST_CASE("edge dynamics verdict confirmed end to end") {
  AnalysisOptions opts;
  opts.sweep.grid_points = 120;
  WeightedDigraph pair = testsys::undirected_edge_graph();
  std::vector<TransferMatrix> agents = {integrator(), integrator()};
  std::vector<TransferMatrix> edges = {static_gain(RMat::Identity(1, 1))};
  auto v = check_edge_dynamics(agents, edges, pair, opts);
  REQUIRE(v.holds);

  auto loop = closed_loop_edges(agents, edges, pair);
  auto rep = verify_sync(loop);
  CHECK(rep.pass);
  RVec x0(2);
  x0 << 1.0, 3.0;
  auto traj = simulate(loop.sys, x0, 15.0, 0.01);
  CHECK(disagreement(traj, 2, 1).tail_norm < 1e-6);
}

TEST_CASE("agent controller condition across component structures") {
  AnalysisOptions opts;
  opts.sweep.grid_points = 120;
  auto g = testgen::rng(211);

  // Positive-real products over a spanning-tree digraph always pass.
  auto Gd = netgen::random_spanning_tree_digraph(g, 4);
  std::vector<TransferMatrix> agents;
  for (int i = 0; i < 4; ++i)
    agents.push_back(netgen::positive_real_agent(g, 1, {0.0}));
  std::vector<TransferMatrix> ctrl = {static_gain(RMat::Identity(1, 1))};
  auto v = check_agent_controllers(agents, ctrl, Gd, opts);
  CHECK(v.holds);

  // Undirected network: theta = 0 widens the interval to (-pi, pi), so a lag
  // peaking at 1.27 rad (product phase -2.84) still passes even though it
  // leaves the positive-real band.
  auto Gu = netgen::random_connected_undirected(g, 3);
  std::vector<TransferMatrix> ag3 = {integrator(1.0), integrator(2.0),
                                     integrator(0.7)};
  auto lag127 = rational_scalar({80, 18, 1}, {4, 5, 1});
  auto vm = check_agent_controllers(ag3, {lag127}, Gu, opts);
  CHECK(vm.holds);
  for (const auto& c : vm.per_component) CHECK(c.theta == doctest::Approx(0.0));
  CHECK(vm.per_component[0].attained_lo < -kPi / 2.0 - 0.5);

  // Directed 3-cycle roots: theta_1 = pi/6 shrinks the interval to
  // (-2.618, 2.618); the same lag now violates it near its peak.
  WeightedDigraph cyc;
  cyc.n = 3;
  cyc.edges = {{0, 1, 1.0}, {1, 2, 1.0}, {2, 0, 1.0}};
  std::vector<TransferMatrix> ag_cyc = {integrator(), integrator(),
                                        integrator()};
  auto bad = check_agent_controllers(ag_cyc, {lag127}, cyc, opts);
  CHECK_FALSE(bad.holds);
  CHECK(bad.preconditions_ok);
  REQUIRE(!bad.per_component.empty());
  CHECK(bad.per_component[0].theta == doctest::Approx(kPi / 6.0).epsilon(1e-6));
  CHECK(bad.worst_frequency == doctest::Approx(3.94).epsilon(0.15));

  // No spanning tree: precondition failure.
  WeightedDigraph split;
  split.n = 3;
  split.edges = {{0, 2, 1.0}, {1, 2, 1.0}};
  auto pre = check_agent_controllers(ag_cyc, ctrl, split, opts);
  CHECK_FALSE(pre.preconditions_ok);
}

TEST_CASE("soundness: positive verdicts are confirmed by the eigen oracle") {
  AnalysisOptions opts;
  opts.sweep.grid_points = 100;
  auto g = testgen::rng(331);
  int confirmed = 0;
  for (int t = 0; t < 6; ++t) {
    int n = 3 + (t % 2);
    auto G = netgen::random_connected_undirected(g, n);
    std::vector<TransferMatrix> agents;
    for (int i = 0; i < n; ++i)
      agents.push_back(netgen::positive_real_agent(g, 1, {0.0}));
    std::vector<TransferMatrix> edges;
    int l = static_cast<int>(incidence(G).edge_order.size());
    for (int k = 0; k < l; ++k)
      edges.push_back(netgen::lead_lag_block(g, 1, 1.8));
    auto v = check_edge_dynamics(agents, edges, G, opts);
    if (!v.holds) continue;
    auto rep = verify_sync(closed_loop_edges(agents, edges, G));
    CHECK(rep.pass);
    ++confirmed;
  }
  for (int t = 0; t < 6; ++t) {
    int n = 3 + (t % 3);
    auto G = netgen::random_spanning_tree_digraph(g, n);
    std::vector<TransferMatrix> agents;
    for (int i = 0; i < n; ++i)
      agents.push_back(netgen::positive_real_agent(g, 1, {0.0, 1.0}));
    std::vector<TransferMatrix> ctrl = {
        static_gain(0.5 * RMat::Identity(1, 1))};
    auto v = check_agent_controllers(agents, ctrl, G, opts);
    if (!v.holds) continue;
    auto rep = verify_sync(closed_loop(agents, ctrl, G));
    CHECK(rep.pass);
    ++confirmed;
  }
  CHECK(confirmed >= 6);
}

TEST_CASE("grid refinement never flips a negative verdict") {
  AnalysisOptions coarse, fine;
  coarse.sweep.grid_points = 60;
  fine.sweep.grid_points = 240;
  WeightedDigraph pair = testsys::undirected_edge_graph();
  std::vector<TransferMatrix> two = {integrator(), integrator()};
  auto c = check_edge_dynamics(two, {heavy_lag()}, pair, coarse);
  auto f = check_edge_dynamics(two, {heavy_lag()}, pair, fine);
  CHECK_FALSE(c.holds);
  CHECK_FALSE(f.holds);
  CHECK(f.margin <= c.margin + 1e-9);
}
