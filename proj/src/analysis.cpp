#include "phasesync/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace phasesync {

namespace {

constexpr Complex kJ{0.0, 1.0};

AnalysisVerdict precondition_failure(const std::string& why) {
  AnalysisVerdict v;
  v.holds = false;
  v.preconditions_ok = false;
  v.precondition_failure = why;
  v.summary = "precondition failure: " + why;
  return v;
}

/// Semi-stability with at most simple imaginary-axis poles: every eigenvalue
/// is either strictly stable or sits on a declared persistent mode, and the
/// mode eigenspaces are semi-simple (no Jordan structure).
bool modes_semisimple(const StateSpace& ss, const PersistentModes& modes,
                      std::string& why) {
  const int nx = ss.states();
  if (nx == 0) return true;
  CMat A = ss.A.cast<Complex>();
  Eigen::ComplexEigenSolver<CMat> ces(A, false);
  double anorm = std::max(1.0, ss.A.cwiseAbs().maxCoeff());
  auto points = modes.axis_points();
  for (int i = 0; i < nx; ++i) {
    Complex lam = ces.eigenvalues()(i);
    bool on_mode = false;
    for (Complex pole : points)
      if (std::abs(lam - pole) <= 1e-7 * anorm) on_mode = true;
    if (!on_mode && lam.real() >= -1e-8 * anorm) {
      why = "system is not semi-stable: eigenvalue at " +
            std::to_string(lam.real()) + "+" + std::to_string(lam.imag()) +
            "j off the declared persistent modes";
      return false;
    }
  }
  for (Complex pole : points) {
    int mult = 0;
    for (int i = 0; i < nx; ++i)
      if (std::abs(ces.eigenvalues()(i) - pole) <= 1e-7 * anorm) ++mult;
    if (mult == 0) continue;
    Eigen::BDCSVD<CMat> svd(A - pole * CMat::Identity(nx, nx));
    int rank = 0;
    for (int i = 0; i < svd.singularValues().size(); ++i)
      if (svd.singularValues()(i) > 1e-8 * anorm) ++rank;
    if (rank != nx - mult) {
      why = "imaginary-axis pole at " + std::to_string(pole.imag()) +
            "j is not simple in every element (Jordan structure)";
      return false;
    }
  }
  return true;
}

std::vector<double> axis_frequencies(const PhaseResponse& resp) {
  std::vector<double> out;
  for (const auto& s : resp.samples)
    if (s.on_axis) out.push_back(s.omega);
  return out;
}

std::vector<double> merge_grids(const std::vector<double>& a,
                                const std::vector<double>& b,
                                const PersistentModes& modes) {
  std::set<double> merged(a.begin(), a.end());
  merged.insert(b.begin(), b.end());
  std::vector<double> out;
  for (double w : merged) {
    bool near_pole = false;
    for (double wk : modes.omega)
      if (std::abs(w - wk) <= 1e-9 * (1.0 + wk)) near_pole = true;
    if (!near_pole) out.push_back(w);
  }
  return out;
}

struct SumCondition {
  double margin = std::numeric_limits<double>::infinity();
  double worst_omega = 0.0;
  double attained_hi = -std::numeric_limits<double>::infinity();
  double attained_lo = std::numeric_limits<double>::infinity();
  std::vector<double> hi_trace, lo_trace;
  bool strict = true;  ///< every sample satisfied the open inequality
};

/// Evaluates hi(w) < hi_limit and lo(w) > lo_limit over aligned profiles.
SumCondition sum_condition(const std::vector<double>& grid,
                           const std::vector<double>& hi,
                           const std::vector<double>& lo, double hi_limit,
                           double lo_limit) {
  SumCondition out;
  out.hi_trace = hi;
  out.lo_trace = lo;
  for (size_t i = 0; i < grid.size(); ++i) {
    double m = std::min(hi_limit - hi[i], lo[i] - lo_limit);
    out.attained_hi = std::max(out.attained_hi, hi[i]);
    out.attained_lo = std::min(out.attained_lo, lo[i]);
    if (m < out.margin) {
      out.margin = m;
      out.worst_omega = grid[i];
    }
    if (m <= 0.0) out.strict = false;
  }
  return out;
}

}  // namespace

AnalysisVerdict small_phase_check(const TransferMatrix& G,
                                  const TransferMatrix& H,
                                  const AnalysisOptions& opts) {
  require(G.io_dim() == H.io_dim(), ErrorCode::Input,
          "small_phase_check: io dimensions differ");

  std::string why;
  if (!modes_semisimple(G.realization, G.modes, why))
    return precondition_failure(why);

  auto respG = phase_response(G, opts.sweep);
  if (respG.kind == FreqWiseKind::NotSemiSectorial)
    return precondition_failure(
        "G is not frequency-wise semi-sectorial (worst margin " +
        std::to_string(respG.worst_margin) + " at omega " +
        std::to_string(respG.worst_omega) + ")");

  if (!H.modes.omega.empty())
    return precondition_failure("H must be stable");
  auto respH = phase_response(H, opts.sweep);
  if (!respH.stable || respH.kind != FreqWiseKind::Sectorial)
    return precondition_failure(
        "H is not stable frequency-wise sectorial (worst margin " +
        std::to_string(respH.worst_margin) + " at omega " +
        std::to_string(respH.worst_omega) + ")");

  auto grid = merge_grids(axis_frequencies(respG), axis_frequencies(respH),
                          G.modes);
  auto profG = phases_along(G, grid, center_near(respG, grid.front()),
                            opts.sweep.rel_tol);
  auto profH = phases_along(H, grid, center_near(respH, grid.front()),
                            opts.sweep.rel_tol);

  std::vector<double> hi(grid.size()), lo(grid.size());
  for (size_t i = 0; i < grid.size(); ++i) {
    hi[i] = profG[i].phi_max() + profH[i].phi_max();
    lo[i] = profG[i].phi_min() + profH[i].phi_min();
  }
  auto cond = sum_condition(grid, hi, lo, kPi, -kPi);

  AnalysisVerdict v;
  v.per_component.push_back({0, 0.0, -kPi, kPi, cond.attained_lo,
                             cond.attained_hi, cond.margin, cond.worst_omega});
  v.margin = cond.margin;
  v.worst_frequency = cond.worst_omega;
  v.trace.omega = grid;
  v.trace.hi_sum.push_back(std::move(cond.hi_trace));
  v.trace.lo_sum.push_back(std::move(cond.lo_trace));
  v.holds = cond.strict && cond.margin > opts.margin_floor;
  v.summary = v.holds ? "small phase condition holds"
                      : "small phase condition violated near omega " +
                            std::to_string(cond.worst_omega);
  return v;
}

AnalysisVerdict check_edge_dynamics(const std::vector<TransferMatrix>& agents,
                                    const std::vector<TransferMatrix>& edges,
                                    const WeightedDigraph& G,
                                    const AnalysisOptions& opts) {
  require(!agents.empty() && !edges.empty(), ErrorCode::Input,
          "check_edge_dynamics: agents and edge dynamics required");
  if (!G.is_symmetric())
    return precondition_failure("network must be undirected");
  auto conn = connectivity(G);
  if (!conn.strongly_connected)
    return precondition_failure("network must be connected");
  size_t n_und = incidence(G).edge_order.size();
  require(edges.size() == 1 || edges.size() == n_und, ErrorCode::Input,
          "check_edge_dynamics: need one edge block or one per undirected "
          "edge (" + std::to_string(n_und) + ")");

  // Joint frequency-wise semi-sectoriality is read off the block-diagonal
  // aggregate; its extreme phases are exactly the per-agent max/min.
  auto P = block_diag(agents);
  std::string why;
  if (!modes_semisimple(P.realization, P.modes, why))
    return precondition_failure(why);
  auto respP = phase_response(P, opts.sweep);
  if (respP.kind == FreqWiseKind::NotSemiSectorial)
    return precondition_failure(
        "agents are not jointly frequency-wise semi-sectorial (worst margin " +
        std::to_string(respP.worst_margin) + " at omega " +
        std::to_string(respP.worst_omega) + ")");

  AnalysisVerdict v;

  // Residues at the persistent modes must be sectorial, block-diagonally.
  std::vector<CMat> mode_residues;
  if (P.modes.has_zero()) mode_residues.push_back(P.M0.cast<Complex>());
  for (const auto& M : P.Mk) mode_residues.push_back(M);
  for (const auto& M : mode_residues) {
    if (classify(M).kind != Sectoriality::Sectorial)
      v.residues_sectorial_joint = false;
  }
  v.residues_sectorial_each.assign(agents.size(), true);
  for (size_t i = 0; i < agents.size(); ++i) {
    std::vector<CMat> rs;
    if (agents[i].modes.has_zero())
      rs.push_back(agents[i].M0.cast<Complex>());
    for (const auto& M : agents[i].Mk) rs.push_back(M);
    for (const auto& M : rs)
      if (classify(M).kind != Sectoriality::Sectorial)
        v.residues_sectorial_each[i] = false;
  }
  if (!v.residues_sectorial_joint) {
    auto fail = precondition_failure(
        "residues at the persistent modes are not jointly sectorial");
    fail.residues_sectorial_joint = false;
    fail.residues_sectorial_each = v.residues_sectorial_each;
    return fail;
  }

  for (const auto& e : edges) {
    if (!e.modes.omega.empty())
      return precondition_failure("edge dynamics must be stable");
  }
  auto W = block_diag(edges);
  auto respW = phase_response(W, opts.sweep);
  if (!respW.stable || respW.kind != FreqWiseKind::Sectorial)
    return precondition_failure(
        "edge dynamics are not frequency-wise sectorial (worst margin " +
        std::to_string(respW.worst_margin) + " at omega " +
        std::to_string(respW.worst_omega) + ")");

  auto grid = merge_grids(axis_frequencies(respP), axis_frequencies(respW),
                          P.modes);
  auto profP = phases_along(P, grid, center_near(respP, grid.front()),
                            opts.sweep.rel_tol);
  auto profW = phases_along(W, grid, center_near(respW, grid.front()),
                            opts.sweep.rel_tol);

  std::vector<double> hi(grid.size()), lo(grid.size());
  for (size_t i = 0; i < grid.size(); ++i) {
    hi[i] = profP[i].phi_max() + profW[i].phi_max();
    lo[i] = profP[i].phi_min() + profW[i].phi_min();
  }
  auto cond = sum_condition(grid, hi, lo, kPi, -kPi);

  v.per_component.push_back({0, 0.0, -kPi, kPi, cond.attained_lo,
                             cond.attained_hi, cond.margin, cond.worst_omega});
  v.margin = cond.margin;
  v.worst_frequency = cond.worst_omega;
  v.trace.omega = grid;
  v.trace.hi_sum.push_back(std::move(cond.hi_trace));
  v.trace.lo_sum.push_back(std::move(cond.lo_trace));
  v.holds = cond.strict && cond.margin > opts.margin_floor;
  v.summary = v.holds
                  ? "edge-dynamics synchronization condition holds"
                  : "phase sum condition violated near omega " +
                        std::to_string(cond.worst_omega);
  return v;
}

AnalysisVerdict check_agent_controllers(
    const std::vector<TransferMatrix>& agents,
    const std::vector<TransferMatrix>& controllers, const WeightedDigraph& G,
    const AnalysisOptions& opts) {
  require(!agents.empty(), ErrorCode::Input,
          "check_agent_controllers: agents required");
  require(controllers.size() == 1 || controllers.size() == agents.size(),
          ErrorCode::Input,
          "check_agent_controllers: need one controller or one per agent");

  LaplacianDecomposition dec;
  try {
    dec = frobenius_form(G);
  } catch (const Error& e) {
    return precondition_failure(e.what());
  }
  auto thetas = component_phase_bounds(dec, opts.refine_theta);

  auto ctrl_at = [&](size_t i) -> const TransferMatrix& {
    return controllers.size() == 1 ? controllers[0] : controllers[i];
  };
  for (size_t i = 0; i < agents.size(); ++i) {
    const auto& c = ctrl_at(i);
    if (!c.modes.omega.empty())
      return precondition_failure("controllers must be stable");
    for (Complex p : agents[i].modes.axis_points()) {
      CMat Cv = c.eval(p);
      Eigen::JacobiSVD<CMat> svd(Cv);
      if (svd.singularValues()(Cv.rows() - 1) <
          1e-8 * std::max(svd.singularValues()(0), 1e-300))
        return precondition_failure(
            "controller " + std::to_string(i + 1) +
            " loses rank at a persistent mode");
    }
  }

  AnalysisVerdict v;
  double total_margin = std::numeric_limits<double>::infinity();
  double worst_omega = 0.0;
  bool strict = true;

  // First pass: per-component aggregates, joint classification, and the
  // union of the adaptive grids; second pass evaluates every component on
  // that master grid so the margin traces stay aligned.
  std::vector<TransferMatrix> aggregates;
  std::vector<PhaseResponse> responses;
  std::vector<double> master;
  for (size_t kappa = 0; kappa < dec.blocks.size(); ++kappa) {
    const auto& blk = dec.blocks[kappa];
    std::vector<TransferMatrix> group;
    for (int node : blk.nodes)
      group.push_back(series(agents[node], ctrl_at(node)));
    auto agg = block_diag(group);
    std::string why;
    if (!modes_semisimple(agg.realization, agg.modes, why))
      return precondition_failure(why);
    auto resp = phase_response(agg, opts.sweep);
    if (resp.kind == FreqWiseKind::NotSemiSectorial)
      return precondition_failure(
          "component " + std::to_string(kappa + 1) +
          " products are not jointly frequency-wise semi-sectorial (worst "
          "margin " +
          std::to_string(resp.worst_margin) + " at omega " +
          std::to_string(resp.worst_omega) + ")");
    master = merge_grids(master, axis_frequencies(resp), agg.modes);
    aggregates.push_back(std::move(agg));
    responses.push_back(std::move(resp));
  }

  for (size_t kappa = 0; kappa < aggregates.size(); ++kappa) {
    double theta = thetas[kappa];
    auto prof = phases_along(aggregates[kappa], master,
                             center_near(responses[kappa], master.front()),
                             opts.sweep.rel_tol);
    std::vector<double> hi(master.size()), lo(master.size());
    for (size_t i = 0; i < master.size(); ++i) {
      hi[i] = prof[i].phi_max();
      lo[i] = prof[i].phi_min();
    }
    auto cond = sum_condition(master, hi, lo, kPi - theta, -kPi + theta);

    v.per_component.push_back({static_cast<int>(kappa) + 1, theta,
                               -kPi + theta, kPi - theta, cond.attained_lo,
                               cond.attained_hi, cond.margin,
                               cond.worst_omega});
    v.trace.hi_sum.push_back(std::move(cond.hi_trace));
    v.trace.lo_sum.push_back(std::move(cond.lo_trace));
    if (cond.margin < total_margin) {
      total_margin = cond.margin;
      worst_omega = cond.worst_omega;
    }
    strict = strict && cond.strict;
  }
  v.trace.omega = master;

  v.margin = total_margin;
  v.worst_frequency = worst_omega;
  v.holds = strict && total_margin > opts.margin_floor;
  v.summary = v.holds ? "agent-controller synchronization condition holds"
                      : "phase interval condition violated near omega " +
                            std::to_string(worst_omega);
  return v;
}

}  // namespace phasesync
