#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "phasesync/analysis.hpp"
#include "phasesync/graph.hpp"
#include "phasesync/lti.hpp"
#include "phasesync/synthesis.hpp"
#include "phasesync/types.hpp"

// JSON schemas (documented in the README):
//  network      {"n": int, "edges": [{"from": i, "to": j, "w": w}, ...],
//                "undirected": bool}; node ids are 1-based in files.
//  agents       {"m": int, "modes": [w...], "agents": [{"name"?,
//                "residues": {"M0"?, "Mk"?: [{"M": cmat} | {"num_poly":
//                [rmat...]}]}, "remainder"?: {"rational": [[entry...]...]}
//                | {"ss": {"A","B","C","D"}}}]}.
//  controllers  {"m": int, "epsilon": e, "uniform": bool, "controllers":
//                [{"entries": [[{"num": [...], "den": [...]}...]...]}]}.
//  Complex matrices are row-major arrays of [re, im] pairs; real matrices
//  are plain number arrays. Polynomial coefficients ascend from the
//  constant term.

namespace phasesync {

struct AgentSet {
  int m = 0;
  PersistentModes modes;
  std::vector<TransferMatrix> agents;
};

struct ControllerSet {
  int m = 0;
  bool uniform = true;
  double epsilon = 1.0;
  std::vector<RationalMatrix> controllers;
};

nlohmann::json parse_json_text(const std::string& text);

WeightedDigraph network_from_json(const nlohmann::json& j);
AgentSet agents_from_json(const nlohmann::json& j);
ControllerSet controllers_from_json(const nlohmann::json& j);

CMat complex_matrix_from_json(const nlohmann::json& j);
nlohmann::json complex_matrix_to_json(const CMat& M);

nlohmann::json phase_report_json(const PhaseProfile& prof);
nlohmann::json laplacian_report_json(const LaplacianDecomposition& dec,
                                     const std::vector<double>& thetas,
                                     const Connectivity& conn);
nlohmann::json verdict_to_json(const AnalysisVerdict& v);
nlohmann::json design_to_json(const DesignResult& d);
ControllerSet controllers_from_design(const DesignResult& d, int m);

std::string margins_csv(const AnalysisVerdict& v);
std::string trajectory_csv(const Trajectory& traj, int n, int m);
std::string disagreement_csv(const Trajectory& traj, const Disagreement& dis,
                             int n, int m);
std::string sweep_csv(const std::vector<double>& omega,
                      const std::vector<std::vector<double>>& phi_max,
                      const std::vector<std::vector<double>>& phi_min,
                      const std::vector<std::string>& labels);

/// 12-significant-digit, locale-independent number formatting used by every
/// CSV writer.
std::string format_number(double v);

}  // namespace phasesync
