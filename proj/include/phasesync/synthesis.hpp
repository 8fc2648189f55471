#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "phasesync/graph.hpp"
#include "phasesync/lti.hpp"
#include "phasesync/types.hpp"

namespace phasesync {

/// Interpolation data on the persistent modes: C(0) = K0 and
/// C(j w_k) = Kk[k], all targets nonsingular.
struct InterpolationSpec {
  PersistentModes modes;
  RMat K0;
  std::vector<CMat> Kk;
};

/// Bilinear-Lagrange interpolant: a stable proper real-rational matrix with
/// all poles at -1 that reproduces the targets exactly on the mode set.
RationalMatrix interpolate(const InterpolationSpec& spec);

/// One sector constraint family: Herm(e^{+j theta} M K) > 0 and
/// Herm(e^{-j theta} M K) > 0.
struct LmiConstraint {
  CMat M;
  double theta = 0.0;
};

struct LmiProblem {
  std::vector<LmiConstraint> constraints;
  int m = 0;
  bool real_K = false;
};

struct LmiOptions {
  int restarts = 5;
  int iterations = 2500;
  double feas_tol = 1e-6;
  std::uint64_t seed = 0;
};

struct LmiResult {
  CMat K;
  double margin = -1.0;  ///< min over constraints of lambda_min, ||K||_F <= 1
  bool feasible = false;
};

/// Maximizes the smallest constraint eigenvalue over the Frobenius ball by
/// projected subgradient ascent (the objective is concave in K).
LmiResult solve_sector_lmi(const LmiProblem& p, const LmiOptions& opts = {});

struct EpsilonSearch {
  double epsilon = 0.0;
  double epsilon_star = 0.0;  ///< smallest failing gain above epsilon
  bool found = false;
  bool hurwitz_ok = false;
  std::string diagnostics;
  SyncReport report;  ///< closed-loop report at the returned epsilon
  std::vector<std::pair<double, bool>> trace;
};

/// Geometric low-gain scan: the largest epsilon in {1, 1/2, 1/4, ...} whose
/// closed loop passes the eigenstructure test.
EpsilonSearch epsilon_search(const std::vector<TransferMatrix>& agents,
                             const std::vector<RationalMatrix>& ctilde,
                             const WeightedDigraph& G, double eps_min = 1e-8);

struct ModeCertificate {
  double omega = 0.0;           ///< mode frequency (0 for the origin)
  int kappa = 0;                ///< component index, 1-based
  std::vector<double> angles;   ///< eigenvalue angles of M K (L_kk x I)
  std::vector<double> lap_angles;  ///< eigenvalue angles of L_kk x I
  double phi_lo = 0.0, phi_hi = 0.0;  ///< phases of M (I x K) on the block
  double theta = 0.0;
  bool phase_condition_ok = true;
};

struct DesignResult {
  bool feasible = false;
  bool uniform = false;
  bool is_static = false;  ///< consensus specialization C(s) = eps K0
  double epsilon = 0.0;
  double epsilon_star = 0.0;
  std::vector<RationalMatrix> controllers;  ///< unscaled C~; one if uniform
  std::vector<CMat> K;                      ///< per-mode gains (uniform)
  std::vector<double> lmi_margins;          ///< per-mode LMI margins
  std::vector<ModeCertificate> certificates;
  SyncReport sync_report;
  std::string message;
};

struct DesignOptions {
  LmiOptions lmi;
  bool refine_theta = false;
  double eps_min = 1e-8;
};

/// Per-agent design: controllers interpolate the inverse residues, then a
/// low-gain scan certifies the loop. Always solvable for valid agents.
DesignResult design_per_agent(const std::vector<TransferMatrix>& agents,
                              const WeightedDigraph& G,
                              const DesignOptions& opts = {});

/// Uniform design: per-mode sector feasibility against the component
/// essential-phase bounds, then interpolation and the low-gain scan. Returns
/// feasible=false with the attained margins when the sectors admit no K.
DesignResult design_uniform(const std::vector<TransferMatrix>& agents,
                            const WeightedDigraph& G,
                            const DesignOptions& opts = {});

}  // namespace phasesync
