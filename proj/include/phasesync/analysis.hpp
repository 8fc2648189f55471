#pragma once

#include <string>
#include <vector>

#include "phasesync/graph.hpp"
#include "phasesync/lti.hpp"
#include "phasesync/types.hpp"

namespace phasesync {

struct AnalysisOptions {
  SweepOptions sweep;
  /// Margins below this are treated as inconclusive: a grid cannot certify a
  /// strict inequality for all frequencies, so near-violations fail.
  double margin_floor = 0.05;
  /// Tighten the component essential-phase bounds with the generic
  /// diagonal-scaling optimizer.
  bool refine_theta = false;
};

struct ComponentCondition {
  int kappa = 0;           ///< 1-based component index (0 for global checks)
  double theta = 0.0;      ///< essential-phase bound entering the interval
  double lo = 0.0, hi = 0.0;              ///< required open interval
  double attained_lo = 0.0, attained_hi = 0.0;  ///< worst attained phases
  double margin = 0.0;
  double worst_omega = 0.0;
};

struct MarginTrace {
  std::vector<double> omega;
  /// One row per component, aligned with omega: the phase sums (or extreme
  /// phases) whose distance to the condition limits is the margin.
  std::vector<std::vector<double>> hi_sum;
  std::vector<std::vector<double>> lo_sum;
};

struct AnalysisVerdict {
  bool holds = false;
  double margin = 0.0;
  double worst_frequency = 0.0;
  std::vector<ComponentCondition> per_component;
  bool preconditions_ok = true;
  std::string precondition_failure;
  MarginTrace trace;
  /// Residue sectoriality at the persistent modes, joint (block-diagonal)
  /// reading and per-agent reading.
  bool residues_sectorial_joint = true;
  std::vector<bool> residues_sectorial_each;
  std::string summary;
};

/// Small phase theorem check for the feedback of G (semi-stable,
/// frequency-wise semi-sectorial, at most simple imaginary-axis poles)
/// against stable frequency-wise sectorial H:
/// phi_max(G)+phi_max(H) < pi and phi_min(G)+phi_min(H) > -pi on the grid.
AnalysisVerdict small_phase_check(const TransferMatrix& G,
                                  const TransferMatrix& H,
                                  const AnalysisOptions& opts = {});

/// Synchronization over an undirected network with per-edge dynamics:
/// max_i phi_max(P_i) + max_k phi_max(W_k) < pi (and the mirrored lower
/// bound) at every grid frequency off the persistent modes.
AnalysisVerdict check_edge_dynamics(const std::vector<TransferMatrix>& agents,
                                    const std::vector<TransferMatrix>& edges,
                                    const WeightedDigraph& G,
                                    const AnalysisOptions& opts = {});

/// Synchronization over a directed spanning-tree network with per-agent
/// controllers: for every strongly connected component kappa the union of
/// Phi(P_i C_i) must stay inside (-pi + theta_kappa, pi - theta_kappa).
AnalysisVerdict check_agent_controllers(
    const std::vector<TransferMatrix>& agents,
    const std::vector<TransferMatrix>& controllers, const WeightedDigraph& G,
    const AnalysisOptions& opts = {});

}  // namespace phasesync
