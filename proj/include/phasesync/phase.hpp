#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "phasesync/types.hpp"

namespace phasesync {

/// Classification of a complex square matrix by the position of the origin
/// relative to its numerical range W(C):
///   Sectorial        0 outside W(C)
///   QuasiSectorial   0 is a sharp point of W(C) (congruent to 0 plus a
///                    sectorial block)
///   SemiSectorial    0 on the boundary but not a sharp point
///   NotSemiSectorial 0 interior to W(C)
enum class Sectoriality {
  Sectorial,
  QuasiSectorial,
  SemiSectorial,
  NotSemiSectorial,
};

const char* to_string(Sectoriality kind);

struct SectorialityResult {
  Sectoriality kind = Sectoriality::NotSemiSectorial;
  /// Signed distance of W(C) from the origin in support-function units:
  /// max over rotations of lambda_min(Herm(e^{-j theta} C)).
  double margin = 0.0;
  /// Rank of C; equals the number of phases the matrix carries.
  int rank = 0;
  /// Rotation attaining the margin.
  double theta = 0.0;
};

struct PhaseProfile {
  /// Phases in radians, sorted descending; length equals rank(C).
  std::vector<double> phases;
  /// Phase center, midpoint of the extreme phases, selected in (-pi, pi].
  double center = 0.0;
  SectorialityResult kind;
  /// True when boundary phases (theta0 +/- pi/2) were emitted from a rank
  /// deficient Hermitian part instead of an explicit congruence.
  bool boundary_detected = false;

  double phi_max() const { return phases.empty() ? 0.0 : phases.front(); }
  double phi_min() const { return phases.empty() ? 0.0 : phases.back(); }
  double spread() const { return phi_max() - phi_min(); }
};

struct PhaseOptions {
  /// Sectoriality tolerance as a multiple of ||C||_F.
  double rel_tol = 1e-9;
  /// Rotation search grid density over [0, 2pi).
  int grid_points = 720;
  /// Warm start for the rotation search; a local refinement around the hint
  /// is tried first and the global grid is used only when it fails to
  /// certify sectoriality.
  std::optional<double> gamma_hint;
};

/// Support function of W(C) in direction theta:
/// lambda_max(Herm(e^{-j theta} C)).
double support(const CMat& C, double theta);

SectorialityResult classify(const CMat& C, const PhaseOptions& opts = {});

/// Phases of a semi-sectorial matrix. Throws ErrorCode::Domain when C is not
/// semi-sectorial or when its kernel and the kernel of C* differ (0 not a
/// normal eigenvalue).
PhaseProfile phases(const CMat& C, const PhaseOptions& opts = {});

/// Compression X* C X. Throws ErrorCode::Input when X is rank deficient.
CMat compress(const CMat& C, const CMat& X);

struct AngleInterval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Interval [phi_min(A)+phi_min(B), phi_max(A)+phi_max(B)] bounding the
/// eigenvalue angles of A*B. A must be (quasi-)sectorial, B semi-sectorial.
AngleInterval product_angle_bounds(const CMat& A, const CMat& B,
                                   const PhaseOptions& opts = {});

/// Angles of the nonzero eigenvalues of A*B, taken in the window
/// (gamma(A)+gamma(B)-pi, gamma(A)+gamma(B)+pi].
std::vector<double> product_eigen_angles(const CMat& A, const CMat& B,
                                         const PhaseOptions& opts = {});

/// Phase multiset {phi_i(A) + phi_j(B)} of the Kronecker product, valid when
/// the combined spread is at most pi (ErrorCode::Precondition otherwise).
PhaseProfile kron_phases(const CMat& A, const CMat& B,
                         const PhaseOptions& opts = {});

struct EssentialPhaseResult {
  /// Upper bound on the largest essential phase.
  double value = 0.0;
  /// Diagonal entries of the positive scaling D attaining the bound.
  RVec scaling;
  /// True when the value is exact (Perron-based Laplacian path).
  bool exact = false;
};

struct EssentialPhaseOptions {
  /// Descent passes: one from the unscaled start plus 3 random restarts.
  int restarts = 4;
  int max_sweeps = 24;
  std::uint64_t seed = 0;
  double rel_tol = 1e-9;
};

/// Minimizes phi_max(D^{-1} C D) over positive diagonal scalings by
/// coordinate descent on log-scalings. Always reports exact=false; throws
/// ErrorCode::Domain when no tried scaling renders C semi-sectorial.
EssentialPhaseResult essential_phase(const CMat& C,
                                     const EssentialPhaseOptions& opts = {});

}  // namespace phasesync
