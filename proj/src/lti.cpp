#include "phasesync/lti.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "parallel.hpp"
#include "poly.hpp"

namespace phasesync {

namespace {

constexpr Complex kJ{0.0, 1.0};

RMat kron_identity(const RMat& L, int m) {
  const int n = static_cast<int>(L.rows()), c = static_cast<int>(L.cols());
  RMat out = RMat::Zero(n * m, c * m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < c; ++j)
      out.block(i * m, j * m, m, m) = L(i, j) * RMat::Identity(m, m);
  return out;
}

double mat_scale(const RMat& A) {
  return A.size() ? std::max(1.0, A.cwiseAbs().maxCoeff()) : 1.0;
}

bool strictly_stable(const RMat& A, double tol_factor = 1e-9) {
  if (A.rows() == 0) return true;
  Eigen::EigenSolver<RMat> es(A, false);
  return es.eigenvalues().real().maxCoeff() < -tol_factor * mat_scale(A);
}

}  // namespace

// ---------------------------------------------------------------------------
// StateSpace

void StateSpace::check_consistent() const {
  const int nx = static_cast<int>(A.rows());
  require(A.cols() == nx, ErrorCode::Input, "state space: A must be square");
  require(B.rows() == nx && C.cols() == nx, ErrorCode::Input,
          "state space: dimension mismatch between A, B, C");
  require(D.rows() == C.rows() && D.cols() == B.cols(), ErrorCode::Input,
          "state space: dimension mismatch in D");
}

CMat StateSpace::eval(Complex s) const {
  if (states() == 0) return D.cast<Complex>();
  CMat R = s * CMat::Identity(states(), states()) - A.cast<Complex>();
  Eigen::FullPivLU<CMat> lu(R);
  require(lu.isInvertible(), ErrorCode::Domain,
          "state space: evaluation at a pole");
  return C.cast<Complex>() * lu.solve(B.cast<Complex>()) + D.cast<Complex>();
}

StateSpace StateSpace::constant(const RMat& gain) {
  StateSpace out;
  out.A = RMat::Zero(0, 0);
  out.B = RMat::Zero(0, gain.cols());
  out.C = RMat::Zero(gain.rows(), 0);
  out.D = gain;
  return out;
}

StateSpace StateSpace::zero(int outputs, int inputs) {
  return constant(RMat::Zero(outputs, inputs));
}

StateSpace series_ss(const StateSpace& second, const StateSpace& first) {
  second.check_consistent();
  first.check_consistent();
  require(second.inputs() == first.outputs(), ErrorCode::Input,
          "series: inner dimensions do not match");
  const int n2 = second.states(), n1 = first.states();
  StateSpace out;
  out.A = RMat::Zero(n2 + n1, n2 + n1);
  out.A.topLeftCorner(n2, n2) = second.A;
  out.A.topRightCorner(n2, n1) = second.B * first.C;
  out.A.bottomRightCorner(n1, n1) = first.A;
  out.B = RMat::Zero(n2 + n1, first.inputs());
  out.B.topRows(n2) = second.B * first.D;
  out.B.bottomRows(n1) = first.B;
  out.C = RMat::Zero(second.outputs(), n2 + n1);
  out.C.leftCols(n2) = second.C;
  out.C.rightCols(n1) = second.D * first.C;
  out.D = second.D * first.D;
  return out;
}

StateSpace block_diag_ss(const std::vector<StateSpace>& blocks) {
  int nx = 0, ny = 0, nu = 0;
  for (const auto& b : blocks) {
    b.check_consistent();
    nx += b.states();
    ny += b.outputs();
    nu += b.inputs();
  }
  StateSpace out;
  out.A = RMat::Zero(nx, nx);
  out.B = RMat::Zero(nx, nu);
  out.C = RMat::Zero(ny, nx);
  out.D = RMat::Zero(ny, nu);
  int ox = 0, oy = 0, ou = 0;
  for (const auto& b : blocks) {
    out.A.block(ox, ox, b.states(), b.states()) = b.A;
    out.B.block(ox, ou, b.states(), b.inputs()) = b.B;
    out.C.block(oy, ox, b.outputs(), b.states()) = b.C;
    out.D.block(oy, ou, b.outputs(), b.inputs()) = b.D;
    ox += b.states();
    oy += b.outputs();
    ou += b.inputs();
  }
  return out;
}

// ---------------------------------------------------------------------------
// RationalMatrix

CMat RationalMatrix::eval(Complex s) const {
  CMat out(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) {
      const auto& e = at(i, j);
      Complex den = poly::eval(e.den, s);
      require(std::abs(den) > 1e-300, ErrorCode::Domain,
              "rational matrix: evaluation at a pole");
      out(i, j) = poly::eval(e.num, s) / den;
    }
  return out;
}

StateSpace RationalMatrix::realize() const {
  std::vector<StateSpace> blocks;
  int nx = 0;
  std::vector<std::array<int, 3>> placement;  // (row, col, states) per entry
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) {
      auto num = poly::trim(at(i, j).num, 0.0);
      auto den = poly::trim(at(i, j).den, 0.0);
      require(den.size() >= num.size(), ErrorCode::Input,
              "rational matrix: entry is not proper");
      require(std::abs(den.back()) > 0.0, ErrorCode::Input,
              "rational matrix: zero denominator");
      const int d = static_cast<int>(den.size()) - 1;
      double lead = den.back();
      for (auto& c : num) c /= lead;
      for (auto& c : den) c /= lead;
      double dterm = (static_cast<int>(num.size()) == d + 1) ? num.back() : 0.0;
      std::vector<double> rem(d, 0.0);
      for (int k = 0; k < d; ++k) {
        double nk = (k < static_cast<int>(num.size())) ? num[k] : 0.0;
        rem[k] = nk - dterm * den[k];
      }
      StateSpace blk;
      blk.A = RMat::Zero(d, d);
      for (int k = 0; k + 1 < d; ++k) blk.A(k, k + 1) = 1.0;
      for (int k = 0; k < d; ++k) blk.A(d - 1, k) = -den[k];
      blk.B = RMat::Zero(d, 1);
      if (d > 0) blk.B(d - 1, 0) = 1.0;
      blk.C = RMat::Zero(1, d);
      for (int k = 0; k < d; ++k) blk.C(0, k) = rem[k];
      blk.D = RMat::Constant(1, 1, dterm);
      placement.push_back({i, j, d});
      blocks.push_back(std::move(blk));
      nx += d;
    }

  StateSpace out;
  out.A = RMat::Zero(nx, nx);
  out.B = RMat::Zero(nx, cols);
  out.C = RMat::Zero(rows, nx);
  out.D = RMat::Zero(rows, cols);
  int ox = 0;
  for (size_t k = 0; k < blocks.size(); ++k) {
    auto [i, j, d] = placement[k];
    const auto& blk = blocks[k];
    out.A.block(ox, ox, d, d) = blk.A;
    out.B.block(ox, j, d, 1) = blk.B;
    out.C.block(i, ox, 1, d) = blk.C;
    out.D(i, j) += blk.D(0, 0);
    ox += d;
  }
  return out;
}

RationalMatrix RationalMatrix::scaled(double gain) const {
  RationalMatrix out = *this;
  for (auto& e : out.entries) e.num = poly::scale(e.num, gain);
  return out;
}

RationalMatrix RationalMatrix::constant(const RMat& K) {
  RationalMatrix out;
  out.rows = static_cast<int>(K.rows());
  out.cols = static_cast<int>(K.cols());
  out.entries.resize(out.rows * out.cols);
  for (int i = 0; i < out.rows; ++i)
    for (int j = 0; j < out.cols; ++j)
      out.at(i, j) = {{K(i, j)}, {1.0}};
  return out;
}

// ---------------------------------------------------------------------------
// PersistentModes / residues

void PersistentModes::validate() const {
  require(m >= 1, ErrorCode::Input, "modes: io dimension must be positive");
  for (size_t k = 0; k < omega.size(); ++k) {
    require(omega[k] >= 0.0, ErrorCode::Input,
            "modes: frequencies must be nonnegative");
    if (k > 0)
      require(omega[k] > omega[k - 1], ErrorCode::Input,
              "modes: frequencies must be strictly increasing");
  }
}

std::vector<double> PersistentModes::nonzero() const {
  std::vector<double> out;
  for (double w : omega)
    if (w > 0.0) out.push_back(w);
  return out;
}

std::vector<Complex> PersistentModes::axis_points() const {
  std::vector<Complex> out;
  if (has_zero()) out.push_back(0.0);
  for (double w : nonzero()) {
    out.push_back(kJ * w);
    out.push_back(-kJ * w);
  }
  return out;
}

ResidueSet residues(const StateSpace& P, const PersistentModes& modes,
                    bool strict) {
  P.check_consistent();
  modes.validate();
  const int nx = P.states();
  const int m = modes.m;
  require(P.outputs() == m && P.inputs() == m, ErrorCode::Input,
          "residues: system is not m x m for the given modes");

  CMat Ac = P.A.cast<Complex>();
  Eigen::ComplexEigenSolver<CMat> ces(Ac);
  require(ces.info() == Eigen::Success, ErrorCode::Internal,
          "residues: eigendecomposition failed");
  const double anorm = mat_scale(P.A);
  const double ctol = 1e-7 * anorm;

  CMat V = ces.eigenvectors();
  Eigen::FullPivLU<CMat> luV(V);
  bool projectors_ok = luV.isInvertible();
  require(projectors_ok || !strict, ErrorCode::Domain,
          "residues: defective eigenvector matrix (mode not semi-simple)");
  CMat W = projectors_ok ? CMat(luV.inverse()) : CMat();

  // Fallback for relaxed extraction on defective spectra: Richardson
  // extrapolated numeric limit (s - pole) P(s).
  auto limit_residue = [&](Complex pole) -> CMat {
    double e1 = 1e-5 * (1.0 + std::abs(pole));
    CMat c1 = (e1)*P.eval(pole + e1);
    CMat c2 = (e1 / 2.0) * P.eval(pole + e1 / 2.0);
    return 2.0 * c2 - c1;
  };

  auto projector_residue = [&](Complex pole) -> CMat {
    std::vector<int> idx;
    for (int i = 0; i < nx; ++i)
      if (std::abs(ces.eigenvalues()(i) - pole) <= ctol) idx.push_back(i);
    const int mult = static_cast<int>(idx.size());
    if (strict) {
      require(mult == m, ErrorCode::Domain,
              "residues: mode has algebraic multiplicity " +
                  std::to_string(mult) + ", expected " + std::to_string(m));
      // Semi-simplicity: the rank deficiency of A - pole*I must equal the
      // algebraic multiplicity.
      CMat S = Ac - pole * CMat::Identity(nx, nx);
      Eigen::JacobiSVD<CMat> svd(S);
      int rank = 0;
      for (int i = 0; i < svd.singularValues().size(); ++i)
        if (svd.singularValues()(i) > 1e-8 * anorm) ++rank;
      require(rank == nx - mult, ErrorCode::Domain,
              "residues: mode is not semi-simple (Jordan block detected)");
    }
    if (mult == 0) return CMat::Zero(m, m);
    if (!projectors_ok) return limit_residue(pole);
    CMat Pi = CMat::Zero(nx, nx);
    for (int i : idx) Pi += V.col(i) * W.row(i);
    CMat Mk = P.C.cast<Complex>() * Pi * P.B.cast<Complex>();
    // Cross-check against the numeric limit (s - pole) P(s) just off the
    // pole.
    Complex s = pole + 1e-6 * (1.0 + std::abs(pole));
    CMat lim = (s - pole) * P.eval(s);
    double ref = std::max(Mk.norm(), 1e-12);
    require((lim - Mk).norm() <= 2e-4 * ref + 1e-9, ErrorCode::Internal,
            "residues: projector residue disagrees with the numeric limit");
    if (strict) {
      Eigen::JacobiSVD<CMat> msvd(Mk);
      require(msvd.singularValues()(m - 1) >
                  1e-10 * msvd.singularValues()(0),
              ErrorCode::Domain, "residues: singular residue matrix");
    }
    return Mk;
  };

  ResidueSet out;
  if (modes.has_zero()) {
    CMat M0c = projector_residue(Complex(0.0, 0.0));
    require(M0c.imag().cwiseAbs().maxCoeff() <= 1e-8 * (1.0 + M0c.norm()),
            ErrorCode::Domain, "residues: residue at 0 is not real");
    out.M0 = M0c.real();
  }
  for (double w : modes.nonzero()) out.Mk.push_back(projector_residue(kJ * w));
  return out;
}

// ---------------------------------------------------------------------------
// TransferMatrix

namespace {

/// Real realization of M0/s + sum_k [Mk/(s-jwk) + conj(Mk)/(s+jwk)].
StateSpace persistent_realization(const PersistentModes& modes, const RMat& M0,
                                  const std::vector<CMat>& Mk) {
  const int m = modes.m;
  std::vector<StateSpace> blocks;
  if (modes.has_zero()) {
    StateSpace b;
    b.A = RMat::Zero(m, m);
    b.B = RMat::Identity(m, m);
    b.C = M0;
    b.D = RMat::Zero(m, m);
    blocks.push_back(std::move(b));
  }
  auto nz = modes.nonzero();
  for (size_t k = 0; k < nz.size(); ++k) {
    double w = nz[k];
    StateSpace b;
    b.A = RMat::Zero(2 * m, 2 * m);
    b.A.topRightCorner(m, m) = w * RMat::Identity(m, m);
    b.A.bottomLeftCorner(m, m) = -w * RMat::Identity(m, m);
    b.B = RMat::Zero(2 * m, m);
    b.B.topRows(m) = RMat::Identity(m, m);
    b.C = RMat::Zero(m, 2 * m);
    b.C.leftCols(m) = 2.0 * Mk[k].real();
    b.C.rightCols(m) = 2.0 * Mk[k].imag();
    b.D = RMat::Zero(m, m);
    blocks.push_back(std::move(b));
  }
  if (blocks.empty()) return StateSpace::zero(m, m);
  // Persistent blocks share the input, so stack B and concatenate C.
  StateSpace out = blocks[0];
  for (size_t k = 1; k < blocks.size(); ++k) {
    const auto& b = blocks[k];
    int n0 = out.states(), n1 = b.states();
    RMat A = RMat::Zero(n0 + n1, n0 + n1);
    A.topLeftCorner(n0, n0) = out.A;
    A.bottomRightCorner(n1, n1) = b.A;
    RMat B(n0 + n1, m);
    B.topRows(n0) = out.B;
    B.bottomRows(n1) = b.B;
    RMat C(m, n0 + n1);
    C.leftCols(n0) = out.C;
    C.rightCols(n1) = b.C;
    out.A = A;
    out.B = B;
    out.C = C;
  }
  return out;
}

/// Parallel sum sharing inputs and outputs.
StateSpace parallel_ss(const StateSpace& a, const StateSpace& b, double sign_b) {
  int na = a.states(), nb = b.states();
  StateSpace out;
  out.A = RMat::Zero(na + nb, na + nb);
  out.A.topLeftCorner(na, na) = a.A;
  out.A.bottomRightCorner(nb, nb) = b.A;
  out.B = RMat::Zero(na + nb, a.inputs());
  out.B.topRows(na) = a.B;
  out.B.bottomRows(nb) = b.B;
  out.C = RMat::Zero(a.outputs(), na + nb);
  out.C.leftCols(na) = a.C;
  out.C.rightCols(nb) = sign_b * b.C;
  out.D = a.D + sign_b * b.D;
  return out;
}

}  // namespace

TransferMatrix TransferMatrix::from_partial_fraction(
    const PersistentModes& modes, const RMat& M0, const std::vector<CMat>& Mk,
    const StateSpace& remainder, bool strict) {
  modes.validate();
  const int m = modes.m;
  TransferMatrix out;
  out.modes = modes;
  out.M0 = M0;
  out.Mk = Mk;
  out.remainder = remainder;
  out.strict = strict;
  require(Mk.size() == modes.nonzero().size(), ErrorCode::Input,
          "transfer matrix: one residue required per nonzero mode");
  if (modes.has_zero())
    require(M0.rows() == m && M0.cols() == m, ErrorCode::Input,
            "transfer matrix: M0 must be m x m");
  for (const auto& M : Mk)
    require(M.rows() == m && M.cols() == m, ErrorCode::Input,
            "transfer matrix: residues must be m x m");
  remainder.check_consistent();
  require(remainder.outputs() == m && remainder.inputs() == m,
          ErrorCode::Input, "transfer matrix: remainder must be m x m");
  require(strictly_stable(remainder.A), ErrorCode::Domain,
          "transfer matrix: remainder has poles outside the open left half "
          "plane");
  if (strict) {
    auto check_nonsingular = [&](const CMat& M, const std::string& label) {
      Eigen::JacobiSVD<CMat> svd(M);
      require(svd.singularValues()(m - 1) > 1e-10 * svd.singularValues()(0),
              ErrorCode::Domain, "transfer matrix: singular residue " + label);
    };
    if (modes.has_zero()) check_nonsingular(M0.cast<Complex>(), "at 0");
    for (size_t k = 0; k < Mk.size(); ++k)
      check_nonsingular(Mk[k], "at mode " + std::to_string(k + 1));
  }
  out.realization =
      parallel_ss(persistent_realization(modes, M0, Mk), remainder, 1.0);
  return out;
}

TransferMatrix TransferMatrix::from_state_space(const StateSpace& P,
                                                const PersistentModes& modes,
                                                bool strict) {
  ResidueSet rs = residues(P, modes, strict);
  TransferMatrix out;
  out.modes = modes;
  out.M0 = rs.M0;
  out.Mk = rs.Mk;
  out.strict = strict;
  out.realization = P;
  // Remainder as the parallel difference; the imaginary-axis modes cancel in
  // the transfer function even though the realization keeps them.
  out.remainder =
      parallel_ss(P, persistent_realization(modes, rs.M0, rs.Mk), -1.0);
  return out;
}

TransferMatrix TransferMatrix::stable(const StateSpace& sys, int m) {
  sys.check_consistent();
  require(sys.outputs() == m && sys.inputs() == m, ErrorCode::Input,
          "transfer matrix: system must be m x m");
  require(strictly_stable(sys.A), ErrorCode::Domain,
          "transfer matrix: system is not stable");
  TransferMatrix out;
  out.modes.m = m;
  out.remainder = sys;
  out.realization = sys;
  return out;
}

CMat TransferMatrix::eval(Complex s) const { return realization.eval(s); }

CMat TransferMatrix::eval_partial_fraction(Complex s) const {
  const int m = modes.m;
  CMat out = CMat::Zero(m, m);
  if (modes.has_zero()) out += M0.cast<Complex>() / s;
  auto nz = modes.nonzero();
  for (size_t k = 0; k < nz.size(); ++k) {
    out += Mk[k] / (s - kJ * nz[k]);
    out += Mk[k].conjugate() / (s + kJ * nz[k]);
  }
  out += remainder.eval(s);
  return out;
}

TransferMatrix series(const TransferMatrix& P, const TransferMatrix& C) {
  require(C.modes.omega.empty(), ErrorCode::Precondition,
          "series: the second factor must be stable");
  require(P.io_dim() == C.io_dim(), ErrorCode::Input,
          "series: io dimensions do not match");
  TransferMatrix out;
  out.modes = P.modes;
  out.strict = P.strict;
  out.name = P.name;
  if (P.modes.has_zero()) {
    CMat C0 = C.eval(Complex(0.0, 0.0));
    CMat M0c = P.M0.cast<Complex>() * C0;
    out.M0 = M0c.real();
  }
  auto nz = P.modes.nonzero();
  for (size_t k = 0; k < nz.size(); ++k)
    out.Mk.push_back(P.Mk[k] * C.eval(kJ * nz[k]));
  out.realization = series_ss(P.realization, C.realization);
  out.remainder = parallel_ss(
      out.realization, persistent_realization(out.modes, out.M0, out.Mk),
      -1.0);
  return out;
}

TransferMatrix block_diag(const std::vector<TransferMatrix>& list) {
  require(!list.empty(), ErrorCode::Input, "block_diag: empty list");

  // Merge mode sets; members missing a mode contribute a zero residue there.
  std::vector<double> merged;
  for (const auto& t : list)
    for (double w : t.modes.omega) {
      bool found = false;
      for (double v : merged)
        if (std::abs(v - w) <= 1e-9 * (1.0 + w)) found = true;
      if (!found) merged.push_back(w);
    }
  std::sort(merged.begin(), merged.end());

  TransferMatrix out;
  out.strict = false;
  int m_total = 0;
  for (const auto& t : list) m_total += t.io_dim();
  out.modes.omega = merged;
  out.modes.m = m_total;

  bool zero_mode = !merged.empty() && merged.front() == 0.0;
  if (zero_mode) out.M0 = RMat::Zero(m_total, m_total);
  std::vector<double> merged_nz;
  for (double w : merged)
    if (w > 0.0) merged_nz.push_back(w);
  out.Mk.assign(merged_nz.size(), CMat::Zero(m_total, m_total));

  int off = 0;
  std::vector<StateSpace> remainders, realizations;
  for (const auto& t : list) {
    const int m = t.io_dim();
    if (zero_mode && t.modes.has_zero())
      out.M0.block(off, off, m, m) = t.M0;
    auto nz = t.modes.nonzero();
    for (size_t k = 0; k < nz.size(); ++k) {
      for (size_t j = 0; j < merged_nz.size(); ++j)
        if (std::abs(merged_nz[j] - nz[k]) <= 1e-9 * (1.0 + nz[k]))
          out.Mk[j].block(off, off, m, m) = t.Mk[k];
    }
    remainders.push_back(t.remainder);
    realizations.push_back(t.realization);
    off += m;
  }
  out.remainder = block_diag_ss(remainders);
  out.realization = block_diag_ss(realizations);
  return out;
}

// ---------------------------------------------------------------------------
// Phase response along the indented axis

namespace {

struct ContourPoint {
  Complex s;
  double key = 0.0;  ///< position along the contour for ordering
  double omega = 0.0;
  bool on_axis = true;
};

std::vector<ContourPoint> build_contour(const TransferMatrix& G,
                                        const SweepOptions& o,
                                        const std::vector<double>& zero_arcs) {
  const auto& poles = G.modes.omega;
  double om_q = poles.empty() ? 0.0 : poles.back();
  double om_max = o.omega_max_factor * std::max(1.0, om_q);
  auto eps_at = [&](double w) { return o.eps_scale * (1.0 + w); };

  struct Indent {
    double w, eps;
  };
  std::vector<Indent> indents;
  for (double w : poles) indents.push_back({w, eps_at(w)});
  for (double w : zero_arcs) {
    bool dup = false;
    for (const auto& ind : indents)
      if (std::abs(ind.w - w) <= ind.eps) dup = true;
    if (!dup) indents.push_back({w, eps_at(w)});
  }
  std::sort(indents.begin(), indents.end(),
            [](const Indent& a, const Indent& b) { return a.w < b.w; });

  // Base axis grid: a linear leg around the modes plus a log leg to omega_max.
  std::set<double> ws;
  int half = std::max(o.grid_points / 2, 8);
  double lin_hi = 10.0 * std::max(1.0, om_q);
  for (int i = 0; i <= half; ++i) ws.insert(lin_hi * i / half);
  double lo = 1e-2;
  for (int i = 0; i <= half; ++i)
    ws.insert(lo * std::pow(om_max / lo, static_cast<double>(i) / half));
  for (const auto& ind : indents) {
    for (double f : {1.02, 1.3, 2.0, 3.5}) {
      ws.insert(ind.w + f * ind.eps);
      if (ind.w - f * ind.eps > 0.0) ws.insert(ind.w - f * ind.eps);
    }
  }

  std::vector<ContourPoint> pts;
  bool zero_indent = !indents.empty() && indents.front().w == 0.0;
  for (double w : ws) {
    if (w < 0.0 || w > om_max) continue;
    bool masked = false;
    for (const auto& ind : indents)
      if (std::abs(w - ind.w) < ind.eps * 1.0001) masked = true;
    if (masked) continue;
    if (w == 0.0 && zero_indent) continue;
    pts.push_back({kJ * w, w, w, true});
  }

  for (const auto& ind : indents) {
    if (ind.w == 0.0) {
      // Quarter circle from the real axis up; the real-axis start serves as
      // the DC anchor but, sitting on the indentation, never enters the
      // phase sup/inf.
      for (int i = 0; i < o.arc_points; ++i) {
        double al = (kPi / 2.0) * i / (o.arc_points - 1);
        Complex s = ind.eps * std::polar(1.0, al);
        pts.push_back({s, s.imag() * (1.0 - 1e-9), 0.0, false});
      }
    } else {
      for (int i = 0; i < o.arc_points; ++i) {
        double al = -kPi / 2.0 + kPi * i / (o.arc_points - 1);
        Complex s = kJ * ind.w + ind.eps * std::polar(1.0, al);
        pts.push_back({s, ind.w + ind.eps * std::sin(al) * (1.0 - 1e-9),
                       ind.w, false});
      }
    }
  }

  // Detour towards the real axis when infinity is a zero (strictly proper or
  // rank deficient feedthrough).
  const RMat& D = G.realization.D;
  Eigen::JacobiSVD<RMat> dsvd(D);
  bool inf_zero = D.size() == 0 || dsvd.singularValues().size() == 0 ||
                  dsvd.singularValues()(dsvd.singularValues().size() - 1) <=
                      1e-10 * std::max(1.0, dsvd.singularValues()(0));
  if (inf_zero) {
    for (int i = 1; i < o.arc_points; ++i) {
      double al = (kPi / 2.0) * (1.0 - static_cast<double>(i) /
                                           (o.arc_points - 1));
      al = std::max(al, 0.02);
      Complex s = om_max * std::polar(1.0, al);
      pts.push_back({s, om_max + i, om_max, false});
    }
  }

  std::sort(pts.begin(), pts.end(),
            [](const ContourPoint& a, const ContourPoint& b) {
              return a.key < b.key;
            });
  return pts;
}

/// Branch continuation: shift the profile by multiples of pi to best match
/// the previous sample. Even shifts are exact branch moves; odd shifts are
/// admitted for boundary profiles whose center is only defined mod pi.
void continue_branch(PhaseProfile& prof, const PhaseProfile& prev) {
  if (prof.phases.empty() || prev.phases.empty()) return;
  bool allow_odd = prof.boundary_detected || prev.boundary_detected;
  double best_shift = 0.0;
  double best_cost = std::numeric_limits<double>::infinity();
  for (int k = -8; k <= 8; ++k) {
    if (!allow_odd && (k % 2) != 0) continue;
    double shift = k * kPi;
    double cost;
    if (prof.phases.size() == prev.phases.size()) {
      cost = 0.0;
      for (size_t i = 0; i < prof.phases.size(); ++i)
        cost = std::max(cost,
                        std::abs(prof.phases[i] + shift - prev.phases[i]));
    } else {
      cost = std::abs(prof.center + shift - prev.center);
    }
    if (cost < best_cost) {
      best_cost = cost;
      best_shift = shift;
    }
  }
  if (best_shift != 0.0) {
    for (double& p : prof.phases) p += best_shift;
    prof.center += best_shift;
  }
}

PhaseProfile sample_phases(const CMat& M, const SweepOptions& o,
                           std::optional<double> hint, bool& ok) {
  PhaseOptions popts;
  popts.rel_tol = o.rel_tol;
  popts.gamma_hint = hint;
  ok = true;
  try {
    return phases(M, popts);
  } catch (const Error&) {
    ok = false;
    PhaseProfile out;
    out.kind = classify(M, popts);
    return out;
  }
}

}  // namespace

PhaseResponse phase_response(const TransferMatrix& G, const SweepOptions& o) {
  PhaseResponse out;
  out.stable = G.modes.omega.empty() && strictly_stable(G.realization.A);

  // First pass on the pole-indented contour to locate imaginary-axis zeros.
  std::vector<double> zero_arcs;
  {
    auto contour = build_contour(G, o, {});
    double prev_ratio = 1.0, prev_prev = 1.0;
    double prev_w = 0.0;
    for (const auto& cp : contour) {
      if (!cp.on_axis) continue;
      CMat M = G.eval(cp.s);
      Eigen::JacobiSVD<CMat> svd(M);
      double ratio = svd.singularValues()(M.rows() - 1) /
                     std::max(svd.singularValues()(0), 1e-300);
      // Local minimum of the smallest singular value marks a zero crossing.
      if (prev_ratio < 1e-4 && prev_ratio <= ratio && prev_ratio <= prev_prev)
        zero_arcs.push_back(prev_w);
      prev_prev = prev_ratio;
      prev_ratio = ratio;
      prev_w = cp.omega;
    }
  }
  out.zeros_detected = zero_arcs;

  auto contour = build_contour(G, o, zero_arcs);
  const int n_pts = static_cast<int>(contour.size());
  std::vector<SweepSample> samples(n_pts);
  std::vector<char> sample_ok(n_pts, 0);

  // Profiles are principal-normalized and therefore independent of the hint
  // chain, so chunks may run in parallel with chunk-local warm starts; the
  // branch continuation below is a cheap serial pass.
  std::vector<double> rel_margins(n_pts, 0.0);
  par::chunked(n_pts, std::max(o.threads, 1), [&](int lo, int hi) {
    std::optional<double> hint;
    for (int i = lo; i < hi; ++i) {
      CMat M = G.eval(contour[i].s);
      bool ok = false;
      PhaseProfile prof = sample_phases(M, o, hint, ok);
      hint = prof.kind.theta;
      rel_margins[i] = prof.kind.margin / std::max(M.norm(), 1e-300);
      sample_ok[i] = ok ? 1 : 0;
      samples[i] = {contour[i].s, contour[i].omega, contour[i].on_axis,
                    std::move(prof)};
    }
  });

  bool all_ok = true;
  double worst_margin = std::numeric_limits<double>::infinity();
  double worst_omega = 0.0;
  const PhaseProfile* prev = nullptr;
  for (int i = 0; i < n_pts; ++i) {
    all_ok = all_ok && sample_ok[i];
    if (rel_margins[i] < worst_margin) {
      worst_margin = rel_margins[i];
      worst_omega = samples[i].omega;
    }
    if (prev && sample_ok[i]) continue_branch(samples[i].profile, *prev);
    if (sample_ok[i]) prev = &samples[i].profile;
  }

  // Adaptive bisection wherever the phase data moves too fast between
  // neighbouring axis samples.
  int budget = o.max_refines;
  for (size_t i = 0; i + 1 < samples.size() && budget > 0;) {
    const auto& a = samples[i];
    const auto& b = samples[i + 1];
    bool both_axis = a.on_axis && b.on_axis;
    double motion = std::max(std::abs(a.profile.center - b.profile.center),
                             std::abs(a.profile.phi_max() - b.profile.phi_max()));
    if (!both_axis || motion <= o.refine_threshold ||
        std::abs(a.omega - b.omega) < 1e-9 * (1.0 + a.omega)) {
      ++i;
      continue;
    }
    double wm = 0.5 * (a.omega + b.omega);
    CMat M = G.eval(kJ * wm);
    bool ok = false;
    PhaseProfile prof = sample_phases(M, o, a.profile.kind.theta, ok);
    all_ok = all_ok && ok;
    double rel_margin = prof.kind.margin / std::max(M.norm(), 1e-300);
    if (rel_margin < worst_margin) {
      worst_margin = rel_margin;
      worst_omega = wm;
    }
    if (ok) continue_branch(prof, a.profile);
    samples.insert(samples.begin() + i + 1, {kJ * wm, wm, true, std::move(prof)});
    --budget;
  }

  out.samples = std::move(samples);
  out.dc_gamma = out.samples.empty() ? 0.0 : out.samples.front().profile.center;

  bool all_sectorial = true;
  double phi_max = -std::numeric_limits<double>::infinity();
  double phi_min = std::numeric_limits<double>::infinity();
  for (const auto& s : out.samples) {
    if (s.profile.kind.kind != Sectoriality::Sectorial) all_sectorial = false;
    if (!s.on_axis || s.profile.phases.empty()) continue;
    phi_max = std::max(phi_max, s.profile.phi_max());
    phi_min = std::min(phi_min, s.profile.phi_min());
  }
  out.phi_max = std::isfinite(phi_max) ? phi_max : 0.0;
  out.phi_min = std::isfinite(phi_min) ? phi_min : 0.0;
  out.worst_margin = worst_margin;
  out.worst_omega = worst_omega;

  // Frequency-wise sectorial additionally requires full rank on the entire
  // closed axis including infinity: any detected transmission zero (finite
  // or at infinity via a rank-deficient feedthrough) demotes the class.
  const RMat& D = G.realization.D;
  Eigen::JacobiSVD<RMat> dsvd(D);
  bool zero_at_inf =
      D.size() == 0 ||
      dsvd.singularValues()(dsvd.singularValues().size() - 1) <=
          1e-10 * std::max(1.0, dsvd.singularValues()(0));
  if (!all_ok)
    out.kind = FreqWiseKind::NotSemiSectorial;
  else if (out.stable && all_sectorial && out.zeros_detected.empty() &&
           !zero_at_inf)
    out.kind = FreqWiseKind::Sectorial;
  else
    out.kind = FreqWiseKind::SemiSectorial;
  return out;
}

std::vector<PhaseProfile> phases_along(const TransferMatrix& G,
                                       const std::vector<double>& omegas,
                                       double anchor_center, double rel_tol) {
  SweepOptions o;
  o.rel_tol = rel_tol;

  // Branch continuation across a pole is only well defined along the
  // indentation, so whenever the requested grid straddles a persistent mode
  // the traversal walks the semicircular detour internally. The arc samples
  // are stepping stones only; they produce no output.
  struct Step {
    Complex s;
    double key;
    int output = -1;  ///< index into the result, or -1 for a stepping stone
  };
  std::vector<Step> steps;
  steps.reserve(omegas.size());
  for (size_t i = 0; i < omegas.size(); ++i)
    steps.push_back({kJ * omegas[i], omegas[i], static_cast<int>(i)});
  if (!omegas.empty()) {
    double w_lo = omegas.front(), w_hi = omegas.back();
    for (double wk : G.modes.omega) {
      if (wk <= w_lo || wk >= w_hi) continue;
      double eps = 1e-3 * (1.0 + wk);
      for (int a = 0; a < 15; ++a) {
        double al = -kPi / 2.0 + kPi * a / 14.0;
        steps.push_back({kJ * wk + eps * std::polar(1.0, al),
                         wk + eps * std::sin(al) * (1.0 - 1e-9), -1});
      }
    }
    std::stable_sort(steps.begin(), steps.end(),
                     [](const Step& a, const Step& b) { return a.key < b.key; });
  }

  std::vector<PhaseProfile> out(omegas.size());
  std::optional<double> hint;
  PhaseProfile prev;
  bool have_prev = false;
  for (const auto& st : steps) {
    CMat M = G.eval(st.s);
    bool ok = false;
    PhaseProfile prof = sample_phases(M, o, hint, ok);
    hint = prof.kind.theta;
    if (ok) {
      if (have_prev) {
        continue_branch(prof, prev);
      } else {
        double shift = 2.0 * kPi *
                       std::round((anchor_center - prof.center) / (2.0 * kPi));
        for (double& p : prof.phases) p += shift;
        prof.center += shift;
      }
      prev = prof;
      have_prev = true;
    }
    if (st.output >= 0) out[st.output] = std::move(prof);
  }
  return out;
}

double center_near(const PhaseResponse& resp, double omega) {
  double best = 0.0;
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& s : resp.samples) {
    if (s.profile.phases.empty()) continue;
    double d = std::abs(s.omega - omega) + (s.on_axis ? 0.0 : 1e-6);
    if (d < best_d) {
      best_d = d;
      best = s.profile.center;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Closed loop assembly

namespace {

void check_agent_family(const std::vector<TransferMatrix>& agents,
                        const WeightedDigraph& G, int& n, int& m) {
  require(!agents.empty(), ErrorCode::Input, "closed loop: no agents");
  n = static_cast<int>(agents.size());
  require(G.n == n, ErrorCode::Input,
          "closed loop: network size does not match the number of agents");
  m = agents[0].io_dim();
  for (const auto& a : agents) {
    require(a.io_dim() == m, ErrorCode::Input,
            "closed loop: agents must share the io dimension");
    require(a.modes.omega.size() == agents[0].modes.omega.size(),
            ErrorCode::Input, "closed loop: agents must share the mode set");
    for (size_t k = 0; k < a.modes.omega.size(); ++k)
      require(std::abs(a.modes.omega[k] - agents[0].modes.omega[k]) <= 1e-9,
              ErrorCode::Input, "closed loop: agents must share the mode set");
  }
}

}  // namespace

ClosedLoop closed_loop(const std::vector<TransferMatrix>& agents,
                       const std::vector<TransferMatrix>& controllers,
                       const WeightedDigraph& G) {
  int n = 0, m = 0;
  check_agent_family(agents, G, n, m);
  require(controllers.size() == 1 || static_cast<int>(controllers.size()) == n,
          ErrorCode::Input,
          "closed loop: need one controller or one per agent");
  for (const auto& c : controllers) {
    require(c.modes.omega.empty(), ErrorCode::Precondition,
            "closed loop: controllers must be stable");
    require(strictly_stable(c.realization.A), ErrorCode::Precondition,
            "closed loop: controllers must be stable");
    require(c.io_dim() == m, ErrorCode::Input,
            "closed loop: controller io dimension mismatch");
  }

  ClosedLoop out;
  out.modes = agents[0].modes;
  out.n_agents = n;
  out.m = m;

  if (G.edges.empty()) {
    // No coupling: the loop degenerates to the bare agents.
    std::vector<StateSpace> blocks;
    for (const auto& a : agents) blocks.push_back(a.realization);
    StateSpace all = block_diag_ss(blocks);
    out.sys.A = all.A;
    out.sys.B = RMat::Zero(all.states(), 0);
    out.sys.C = all.C;
    out.sys.D = RMat::Zero(all.outputs(), 0);
    return out;
  }

  std::vector<StateSpace> blocks;
  for (int i = 0; i < n; ++i) {
    const auto& c = controllers.size() == 1 ? controllers[0] : controllers[i];
    blocks.push_back(series_ss(agents[i].realization, c.realization));
  }
  StateSpace T = block_diag_ss(blocks);
  RMat Lam = kron_identity(laplacian(G), m);

  RMat S = RMat::Identity(n * m, n * m) + Lam * T.D;
  Eigen::FullPivLU<RMat> lu(S);
  require(lu.isInvertible(), ErrorCode::Domain,
          "closed loop: algebraic loop is ill posed");
  RMat K = lu.solve(Lam * T.C);  // u = -K x

  out.sys.A = T.A - T.B * K;
  out.sys.B = RMat::Zero(T.states(), 0);
  out.sys.C = T.C - T.D * K;
  out.sys.D = RMat::Zero(n * m, 0);
  return out;
}

ClosedLoop closed_loop_edges(const std::vector<TransferMatrix>& agents,
                             const std::vector<TransferMatrix>& edge_dynamics,
                             const WeightedDigraph& G) {
  int n = 0, m = 0;
  check_agent_family(agents, G, n, m);
  auto fac = incidence(G);
  const int l = static_cast<int>(fac.edge_order.size());
  require(edge_dynamics.size() == 1 ||
              static_cast<int>(edge_dynamics.size()) == l,
          ErrorCode::Input,
          "closed loop: need one edge block or one per undirected edge");

  std::vector<StateSpace> agent_blocks, edge_blocks;
  for (const auto& a : agents) agent_blocks.push_back(a.realization);
  for (int k = 0; k < l; ++k) {
    const auto& w =
        edge_dynamics.size() == 1 ? edge_dynamics[0] : edge_dynamics[k];
    require(w.modes.omega.empty() && strictly_stable(w.realization.A),
            ErrorCode::Precondition,
            "closed loop: edge dynamics must be stable");
    require(w.io_dim() == m, ErrorCode::Input,
            "closed loop: edge io dimension mismatch");
    StateSpace ws = w.realization;
    ws.C *= fac.weights(k);
    ws.D *= fac.weights(k);
    edge_blocks.push_back(std::move(ws));
  }

  StateSpace Pa = block_diag_ss(agent_blocks);
  StateSpace Wd = l > 0 ? block_diag_ss(edge_blocks) : StateSpace::zero(0, 0);
  RMat Em = kron_identity(fac.E, m);  // n*m x l*m

  const int na = Pa.states(), nw = Wd.states();
  // y = Ca xa + Da u,  z = Em' y,  v = Cw xw + Dw z,  u = -Em v.
  RMat S = RMat::Identity(n * m, n * m) + Pa.D * Em * Wd.D * Em.transpose();
  Eigen::FullPivLU<RMat> lu(S);
  require(lu.isInvertible(), ErrorCode::Domain,
          "closed loop: algebraic loop is ill posed");
  RMat Ya = lu.solve(Pa.C);                      // y = Ya xa + Yw xw
  RMat Yw = lu.solve(-Pa.D * Em * Wd.C);
  RMat Ua = -Em * Wd.D * Em.transpose() * Ya;    // u = Ua xa + Uw xw
  RMat Uw = -Em * Wd.C - Em * Wd.D * Em.transpose() * Yw;

  ClosedLoop out;
  out.modes = agents[0].modes;
  out.n_agents = n;
  out.m = m;
  out.sys.A = RMat::Zero(na + nw, na + nw);
  out.sys.A.topLeftCorner(na, na) = Pa.A + Pa.B * Ua;
  out.sys.A.topRightCorner(na, nw) = Pa.B * Uw;
  out.sys.A.bottomLeftCorner(nw, na) = Wd.B * Em.transpose() * Ya;
  out.sys.A.bottomRightCorner(nw, nw) = Wd.A + Wd.B * Em.transpose() * Yw;
  out.sys.B = RMat::Zero(na + nw, 0);
  out.sys.C = RMat::Zero(n * m, na + nw);
  out.sys.C.leftCols(na) = Ya;
  out.sys.C.rightCols(nw) = Yw;
  out.sys.D = RMat::Zero(n * m, 0);
  return out;
}

// ---------------------------------------------------------------------------
// Verification and simulation

SyncReport verify_sync(const ClosedLoop& loop) {
  SyncReport out;
  const RMat& A = loop.sys.A;
  const int nx = static_cast<int>(A.rows());
  const int m = loop.m;
  Eigen::EigenSolver<RMat> es(A, false);
  const double anorm = mat_scale(A);
  const double ctol = 1e-7 * anorm;
  const double stab_tol = 1e-8 * anorm;

  out.eigenvalues.resize(nx);
  for (int i = 0; i < nx; ++i) out.eigenvalues[i] = es.eigenvalues()(i);

  auto targets = loop.modes.axis_points();
  std::vector<int> counts(targets.size(), 0);
  std::vector<bool> assigned(nx, false);
  for (int i = 0; i < nx; ++i) {
    for (size_t t = 0; t < targets.size(); ++t) {
      if (std::abs(out.eigenvalues[i] - targets[t]) <= ctol) {
        ++counts[t];
        assigned[i] = true;
        break;
      }
    }
  }

  out.pass = true;
  for (size_t t = 0; t < targets.size(); ++t) {
    if (counts[t] != m) {
      out.pass = false;
      out.reason += "mode " + std::to_string(targets[t].imag()) +
                    "j has multiplicity " + std::to_string(counts[t]) +
                    " (expected " + std::to_string(m) + "); ";
    } else {
      CMat S = A.cast<Complex>() -
               targets[t] * CMat::Identity(nx, nx);
      Eigen::BDCSVD<CMat> svd(S);
      int rank = 0;
      for (int i = 0; i < svd.singularValues().size(); ++i)
        if (svd.singularValues()(i) > 1e-7 * anorm) ++rank;
      if (rank != nx - m) {
        out.pass = false;
        out.reason += "mode " + std::to_string(targets[t].imag()) +
                      "j is not semi-simple; ";
      }
    }
  }

  double slowest = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < nx; ++i) {
    if (assigned[i]) continue;
    if (out.eigenvalues[i].real() >= -stab_tol) {
      out.pass = false;
      out.offenders.push_back(out.eigenvalues[i]);
    } else {
      slowest = std::max(slowest, out.eigenvalues[i].real());
    }
  }
  if (!out.offenders.empty())
    out.reason += std::to_string(out.offenders.size()) +
                  " eigenvalue(s) in the closed right half plane off the "
                  "persistent modes; ";
  out.slowest_stable = std::isfinite(slowest) ? slowest : -1.0;
  return out;
}

Trajectory simulate(const StateSpace& sys, const RVec& x0, double T,
                    double dt) {
  sys.check_consistent();
  require(dt > 0.0 && T >= 0.0, ErrorCode::Input,
          "simulate: need dt > 0 and T >= 0");
  require(x0.size() == sys.states(), ErrorCode::Input,
          "simulate: x0 has wrong dimension (" + std::to_string(x0.size()) +
              " vs " + std::to_string(sys.states()) + " states)");
  const int steps = static_cast<int>(std::ceil(T / dt)) + 1;
  RMat Phi = (sys.A * dt).exp();
  Trajectory out;
  out.t.resize(steps);
  out.Y.resize(steps, sys.outputs());
  RVec x = x0;
  for (int k = 0; k < steps; ++k) {
    out.t[k] = k * dt;
    out.Y.row(k) = (sys.C * x).transpose();
    x = Phi * x;
  }
  return out;
}

Disagreement disagreement(const Trajectory& y, int n, int m) {
  require(y.Y.cols() == n * m, ErrorCode::Input,
          "disagreement: trajectory width does not equal n*m");
  const int rows = static_cast<int>(y.Y.rows());
  Disagreement out;
  out.y_ave = RMat::Zero(rows, m);
  out.y_dis = RMat::Zero(rows, n * m);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < m; ++c) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += y.Y(r, i * m + c);
      out.y_ave(r, c) = acc / n;
    }
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < m; ++c)
        out.y_dis(r, i * m + c) = y.Y(r, i * m + c) - out.y_ave(r, c);
  }
  int tail_start = rows - std::max(1, rows / 10);
  out.tail_norm =
      out.y_dis.bottomRows(rows - tail_start).cwiseAbs().maxCoeff();
  return out;
}

}  // namespace phasesync
