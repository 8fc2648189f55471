#pragma once

// Shared generators and independent oracles for the test suites. Everything
// here is deliberately implementation-agnostic: matrices with known phases
// are built directly from the defining congruence, so the tests never trust
// the code path they are checking.

#include <algorithm>
#include <random>
#include <vector>

#include "phasesync/types.hpp"

namespace testgen {

using phasesync::CMat;
using phasesync::Complex;
using phasesync::RMat;
using phasesync::RVec;
using phasesync::kPi;

inline std::mt19937_64 rng(std::uint64_t seed) { return std::mt19937_64(seed); }

inline double uniform(std::mt19937_64& g, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(g);
}

inline CMat random_gaussian(std::mt19937_64& g, int rows, int cols) {
  std::normal_distribution<double> d(0.0, 1.0);
  CMat M(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) M(i, j) = Complex(d(g), d(g));
  return M;
}

inline CMat random_unitary(std::mt19937_64& g, int n) {
  CMat M = random_gaussian(g, n, n);
  Eigen::HouseholderQR<CMat> qr(M);
  CMat Q = qr.householderQ() * CMat::Identity(n, n);
  return Q;
}

/// Invertible matrix with modest condition number, for well-posed congruences.
inline CMat random_congruence(std::mt19937_64& g, int n, double spread = 2.0) {
  CMat U = random_unitary(g, n);
  CMat V = random_unitary(g, n);
  RVec s(n);
  for (int i = 0; i < n; ++i) s(i) = uniform(g, 1.0, spread);
  return U * s.asDiagonal() * V;
}

/// Builds C = T* D T with D = diag(e^{j phi_i}); by the uniqueness of the
/// sectorial decomposition those phi_i are exactly the phases of C.
inline CMat matrix_with_phases(std::mt19937_64& g,
                               const std::vector<double>& phis) {
  int n = static_cast<int>(phis.size());
  CMat T = random_congruence(g, n);
  CMat D = CMat::Zero(n, n);
  for (int i = 0; i < n; ++i) D(i, i) = std::polar(1.0, phis[i]);
  return T.adjoint() * D * T;
}

inline std::vector<double> random_phase_list(std::mt19937_64& g, int n,
                                             double center, double half_spread) {
  std::vector<double> phis(n);
  for (int i = 0; i < n; ++i) phis[i] = center + uniform(g, -half_spread, half_spread);
  std::sort(phis.rbegin(), phis.rend());
  return phis;
}

inline CMat random_psd(std::mt19937_64& g, int n) {
  CMat M = random_gaussian(g, n, n);
  return M.adjoint() * M + 0.05 * CMat::Identity(n, n);
}

inline CMat random_full_column_rank(std::mt19937_64& g, int n, int k) {
  for (;;) {
    CMat X = random_gaussian(g, n, k);
    Eigen::ColPivHouseholderQR<CMat> qr(X);
    if (qr.rank() == k) return X;
  }
}

inline RMat random_real(std::mt19937_64& g, int rows, int cols, double s = 1.0) {
  std::normal_distribution<double> d(0.0, s);
  RMat M(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) M(i, j) = d(g);
  return M;
}

inline RMat random_spd(std::mt19937_64& g, int m, double ridge = 0.3) {
  RMat M = random_real(g, m, m);
  return M * M.transpose() + ridge * RMat::Identity(m, m);
}

}  // namespace testgen
