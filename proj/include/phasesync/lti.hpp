#pragma once

#include <string>
#include <vector>

#include "phasesync/graph.hpp"
#include "phasesync/phase.hpp"
#include "phasesync/types.hpp"

namespace phasesync {

struct StateSpace {
  RMat A, B, C, D;

  int states() const { return static_cast<int>(A.rows()); }
  int outputs() const { return static_cast<int>(C.rows()); }
  int inputs() const { return static_cast<int>(B.cols()); }

  /// C (sI - A)^{-1} B + D. Throws near a pole of the resolvent.
  CMat eval(Complex s) const;

  static StateSpace constant(const RMat& gain);
  static StateSpace zero(int outputs, int inputs);
  void check_consistent() const;
};

/// Series interconnection u -> first -> second (i.e. second(s) * first(s)).
StateSpace series_ss(const StateSpace& second, const StateSpace& first);
StateSpace block_diag_ss(const std::vector<StateSpace>& blocks);

/// Rational m x m transfer matrix as per-entry coefficient lists (ascending).
struct RationalEntry {
  std::vector<double> num{0.0};
  std::vector<double> den{1.0};
};

struct RationalMatrix {
  int rows = 0, cols = 0;
  std::vector<RationalEntry> entries;  // row-major

  RationalEntry& at(int i, int j) { return entries[i * cols + j]; }
  const RationalEntry& at(int i, int j) const { return entries[i * cols + j]; }
  CMat eval(Complex s) const;
  StateSpace realize() const;
  RationalMatrix scaled(double gain) const;
  static RationalMatrix constant(const RMat& K);
};

/// Imaginary-axis pole frequencies {0?, w_1, ..., w_q}, strictly increasing,
/// optionally starting at zero. The full mode set is {0?, +-j w_k}.
struct PersistentModes {
  std::vector<double> omega;
  int m = 0;

  bool has_zero() const { return !omega.empty() && omega.front() == 0.0; }
  std::vector<double> nonzero() const;
  /// All distinct imaginary-axis eigenvalue locations j*w including
  /// conjugates.
  std::vector<Complex> axis_points() const;
  void validate() const;
};

struct ResidueSet {
  RMat M0;                ///< residue at 0 (empty when 0 is not a mode)
  std::vector<CMat> Mk;   ///< residues at +j w_k, one per nonzero mode
};

/// Residues via spectral projectors onto the imaginary-axis eigenspaces,
/// verified against the numeric limit (s - j w) P(s). `strict` additionally
/// enforces multiplicity m, semi-simplicity, and nonsingular residues.
ResidueSet residues(const StateSpace& P, const PersistentModes& modes,
                    bool strict = true);

/// An m x m system in partial fraction form: persistent residues plus a
/// stable remainder, together with an assembled state-space realization.
struct TransferMatrix {
  PersistentModes modes;
  RMat M0;
  std::vector<CMat> Mk;
  StateSpace remainder;
  StateSpace realization;
  std::string name;
  /// Relaxed systems skip the residue invariants (used for aggregates such
  /// as block diagonals whose merged mode sets need not stay nonsingular).
  bool strict = true;

  static TransferMatrix from_partial_fraction(const PersistentModes& modes,
                                              const RMat& M0,
                                              const std::vector<CMat>& Mk,
                                              const StateSpace& remainder,
                                              bool strict = true);
  static TransferMatrix from_state_space(const StateSpace& P,
                                         const PersistentModes& modes,
                                         bool strict = true);
  static TransferMatrix stable(const StateSpace& sys, int m);

  int io_dim() const { return modes.m; }
  CMat eval(Complex s) const;                   ///< realization route
  CMat eval_partial_fraction(Complex s) const;  ///< residue route
};

TransferMatrix series(const TransferMatrix& P, const TransferMatrix& C);
TransferMatrix block_diag(const std::vector<TransferMatrix>& list);

/// Frequency-wise classification along the indented imaginary axis.
enum class FreqWiseKind { Sectorial, SemiSectorial, NotSemiSectorial };

struct SweepSample {
  Complex s;
  double omega = 0.0;
  bool on_axis = true;
  PhaseProfile profile;  ///< branch-continued phases
};

struct SweepOptions {
  double eps_scale = 1e-3;        ///< indentation radius factor
  int grid_points = 400;
  int arc_points = 21;
  double omega_max_factor = 100.0;
  double refine_threshold = 0.1;  ///< phase-motion bound triggering bisection
  int max_refines = 600;
  double rel_tol = 1e-9;
  /// Worker threads for the per-sample evaluations (samples are
  /// independent); 1 keeps everything on the calling thread.
  int threads = 1;
};

struct PhaseResponse {
  std::vector<SweepSample> samples;
  FreqWiseKind kind = FreqWiseKind::NotSemiSectorial;
  bool stable = false;
  double worst_margin = 0.0;
  double worst_omega = 0.0;
  double phi_max = 0.0;  ///< sup over on-axis samples
  double phi_min = 0.0;
  double dc_gamma = 0.0;
  std::vector<double> zeros_detected;
};

PhaseResponse phase_response(const TransferMatrix& G,
                             const SweepOptions& opts = {});

/// Branch-continued phase profiles of G at the given ordered frequencies
/// (none of which may be a pole). The first sample is shifted so its center
/// lands nearest to anchor_center, which callers take from a full
/// phase_response to keep branches consistent across grids.
std::vector<PhaseProfile> phases_along(const TransferMatrix& G,
                                       const std::vector<double>& omegas,
                                       double anchor_center,
                                       double rel_tol = 1e-9);

/// Center of the response sample closest to the given frequency.
double center_near(const PhaseResponse& resp, double omega);

/// Autonomous closed loop plus the data needed to judge synchronization.
struct ClosedLoop {
  StateSpace sys;  ///< inputs empty; y = C x
  PersistentModes modes;
  int n_agents = 0;
  int m = 0;
};

/// Per-agent (or uniform, when controllers has one entry) output feedback
/// u = -(L0 x I_m) y through the given static-gain network.
ClosedLoop closed_loop(const std::vector<TransferMatrix>& agents,
                       const std::vector<TransferMatrix>& controllers,
                       const WeightedDigraph& G);

/// Undirected network with one dynamic block per undirected edge; the edge
/// weight multiplies the block. Built from the incidence factorization.
ClosedLoop closed_loop_edges(const std::vector<TransferMatrix>& agents,
                             const std::vector<TransferMatrix>& edge_dynamics,
                             const WeightedDigraph& G);

struct SyncReport {
  bool pass = false;
  std::string reason;
  std::vector<Complex> eigenvalues;
  std::vector<Complex> offenders;
  /// Largest real part among the stable eigenvalues (for horizon choice).
  double slowest_stable = -1.0;
};

/// PASS iff the closed right half plane eigenvalues are exactly the
/// persistent modes, each semi-simple with multiplicity m, and everything
/// else is strictly stable.
SyncReport verify_sync(const ClosedLoop& loop);

struct Trajectory {
  std::vector<double> t;
  RMat Y;  ///< one row per sample, n*m output columns
};

/// Matrix-exponential stepping, exact for LTI autonomous dynamics.
Trajectory simulate(const StateSpace& sys, const RVec& x0, double T, double dt);

struct Disagreement {
  RMat y_ave;  ///< per-sample average output (m columns)
  RMat y_dis;  ///< per-sample disagreement (n*m columns)
  double tail_norm = 0.0;  ///< sup norm over the last 10% of the horizon
};

Disagreement disagreement(const Trajectory& y, int n, int m);

}  // namespace phasesync
