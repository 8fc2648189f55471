#include "phasesync/phase.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace phasesync {

namespace {

constexpr double kTiny = 1e-300;

void check_square(const CMat& C, const char* who) {
  require(C.rows() == C.cols() && C.rows() >= 1, ErrorCode::Input,
          std::string(who) + ": matrix must be square and nonempty");
  require(C.allFinite(), ErrorCode::Input,
          std::string(who) + ": matrix has non-finite entries");
}

CMat hermitian_part(const CMat& M) { return 0.5 * (M + M.adjoint()); }

CMat skew_part(const CMat& M) {
  return (M - M.adjoint()) / Complex(0.0, 2.0);
}

double min_herm_eig(const CMat& C, double theta) {
  CMat H = hermitian_part(std::polar(1.0, -theta) * C);
  Eigen::SelfAdjointEigenSolver<CMat> es(H, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

/// Golden-section maximization of f over [a, b].
template <typename F>
std::pair<double, double> golden_max(F&& f, double a, double b, int iters) {
  const double inv_phi = 0.6180339887498949;
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < iters; ++it) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = f(x1);
    }
  }
  return f1 > f2 ? std::make_pair(x1, f1) : std::make_pair(x2, f2);
}

/// Finds the rotation maximizing lambda_min(Herm(e^{-j theta} C)).
std::pair<double, double> rotation_search(const CMat& C,
                                          const PhaseOptions& opts,
                                          double cert_tol) {
  auto f = [&C](double th) { return min_herm_eig(C, th); };

  if (opts.gamma_hint) {
    const double h = *opts.gamma_hint;
    const double half = 0.45;
    double best_th = h, best_f = f(h);
    for (int i = 1; i <= 8; ++i) {
      for (double s : {-1.0, 1.0}) {
        double th = h + s * half * i / 8.0;
        double v = f(th);
        if (v > best_f) {
          best_f = v;
          best_th = th;
        }
      }
    }
    auto [th, fv] = golden_max(f, best_th - half / 8.0, best_th + half / 8.0, 48);
    // A positive certificate at any rotation settles sectoriality; fall back
    // to the global grid only when the local window fails to produce one.
    if (fv > cert_tol) return {th, fv};
  }

  const int n_grid = std::max(opts.grid_points, 16);
  double best_th = 0.0, best_f = f(0.0);
  for (int i = 1; i < n_grid; ++i) {
    double th = 2.0 * kPi * i / n_grid;
    double v = f(th);
    if (v > best_f) {
      best_f = v;
      best_th = th;
    }
  }
  double delta = 2.0 * kPi / n_grid;
  return golden_max(f, best_th - delta, best_th + delta, 56);
}

double wrap_to_principal(double a) {
  while (a > kPi) a -= 2.0 * kPi;
  while (a <= -kPi) a += 2.0 * kPi;
  return a;
}

/// Shifts the whole phase multiset so that the center lands in (-pi, pi].
void normalize_center(std::vector<double>& ph, double& center) {
  if (ph.empty()) {
    center = 0.0;
    return;
  }
  center = 0.5 * (ph.front() + ph.back());
  double shifted = wrap_to_principal(center);
  double shift = shifted - center;
  if (shift != 0.0) {
    for (double& p : ph) p += shift;
    center = shifted;
  }
}

struct KernelSplit {
  CMat range;   // n x r orthonormal basis of ker(C)^perp
  CMat kernel;  // n x (n-r)
  int rank = 0;
  bool common = true;  // ker C == ker C*
};

KernelSplit split_kernel(const CMat& C, double rel_tol) {
  Eigen::JacobiSVD<CMat> svd(C, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const int n = static_cast<int>(C.rows());
  double smax = sv.size() ? sv(0) : 0.0;
  double thr = std::max(rel_tol, 1e-13) * smax;
  int r = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > thr) ++r;
  KernelSplit ks;
  ks.rank = r;
  if (r == n) return ks;
  // null(C) spans the trailing right singular vectors, null(C*) the trailing
  // left ones; for a normal zero eigenvalue the two subspaces coincide.
  CMat kerC = svd.matrixV().rightCols(n - r);
  CMat kerCs = svd.matrixU().rightCols(n - r);
  ks.range = svd.matrixV().leftCols(r);
  ks.kernel = kerC;
  CMat diff = kerC * kerC.adjoint() - kerCs * kerCs.adjoint();
  ks.common = diff.norm() <= 1e-7 * std::sqrt(static_cast<double>(n));
  return ks;
}

PhaseProfile phases_impl(const CMat& C, const PhaseOptions& opts, int depth);

/// Phases of a rotated Hermitian matrix C = e^{j(theta+pi/2)} G with G
/// Hermitian and nonsingular: copies of theta +/- pi/2 split by the inertia
/// of G.
PhaseProfile degenerate_profile(const CMat& C, double theta, double margin) {
  CMat G = skew_part(std::polar(1.0, -theta) * C);
  Eigen::SelfAdjointEigenSolver<CMat> es(G, Eigen::EigenvaluesOnly);
  PhaseProfile out;
  int n_pos = 0, n_neg = 0;
  for (int i = 0; i < es.eigenvalues().size(); ++i)
    (es.eigenvalues()(i) >= 0.0 ? n_pos : n_neg)++;
  out.phases.assign(n_pos, theta + kPi / 2.0);
  out.phases.insert(out.phases.end(), n_neg, theta - kPi / 2.0);
  out.kind = {Sectoriality::SemiSectorial, margin,
              static_cast<int>(C.rows()), theta};
  out.boundary_detected = true;
  normalize_center(out.phases, out.center);
  return out;
}

/// Phases for the generic semi-sectorial case (0 on the smooth boundary of
/// W(C), C nonsingular). Interior phases come from the finite eigenvalues of
/// the Hermitian pencil (G, H); boundary copies theta +/- pi/2 come from the
/// kernel of H, with the +/- split read off the inertia of the skew part
/// compressed onto that kernel.
PhaseProfile boundary_profile(const CMat& C, double theta, double margin,
                              const PhaseOptions& opts) {
  const int n = static_cast<int>(C.rows());
  CMat M = std::polar(1.0, -theta) * C;
  CMat H = hermitian_part(M);
  CMat G = skew_part(M);

  Eigen::SelfAdjointEigenSolver<CMat> esH(H);
  double hmax = std::max(esH.eigenvalues().cwiseAbs().maxCoeff(), kTiny);
  double kthr = 1e-7 * hmax;
  std::vector<int> ker_idx;
  for (int i = 0; i < n; ++i)
    if (esH.eigenvalues()(i) <= kthr) ker_idx.push_back(i);

  if (ker_idx.empty()) {
    // Margin hit the tolerance band but H is numerically definite; treat as
    // a grazing sectorial matrix.
    CMat W = esH.eigenvectors();
    CMat Hs = W * esH.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
              W.adjoint();
    CMat K = Hs * G * Hs;
    Eigen::SelfAdjointEigenSolver<CMat> esK(hermitian_part(K),
                                            Eigen::EigenvaluesOnly);
    PhaseProfile out;
    out.phases.resize(n);
    for (int i = 0; i < n; ++i)
      out.phases[i] = theta + std::atan(esK.eigenvalues()(n - 1 - i));
    out.kind = {Sectoriality::SemiSectorial, margin, n, theta};
    normalize_center(out.phases, out.center);
    return out;
  }

  CMat K(n, static_cast<int>(ker_idx.size()));
  for (size_t i = 0; i < ker_idx.size(); ++i)
    K.col(static_cast<int>(i)) = esH.eigenvectors().col(ker_idx[i]);

  CMat G22 = K.adjoint() * G * K;
  Eigen::SelfAdjointEigenSolver<CMat> esG22(G22, Eigen::EigenvaluesOnly);
  double gscale = std::max(G.norm(), kTiny);
  int n_pos = 0, n_neg = 0, n_pair = 0;
  for (int i = 0; i < esG22.eigenvalues().size(); ++i) {
    double v = esG22.eigenvalues()(i);
    if (v > 1e-7 * gscale)
      ++n_pos;
    else if (v < -1e-7 * gscale)
      ++n_neg;
    else
      ++n_pair;
  }

  // Finite eigenvalues of G x = lambda H x via the shifted resolvent
  // (G - sigma H)^{-1} H; eigenvalues near zero correspond to lambda at
  // infinity, i.e. the boundary phases.
  std::vector<double> interior;
  bool solved = false;
  for (double sigma : {0.7390851332151607, -1.3247179572447460, 2.41421356,
                       -3.30277563, 5.19615242}) {
    CMat T = G - sigma * H;
    Eigen::FullPivLU<CMat> lu(T);
    if (!lu.isInvertible()) continue;
    double rc = lu.rcond();
    if (!(rc > 1e-12)) continue;
    CMat X = lu.solve(H);
    Eigen::ComplexEigenSolver<CMat> ces(X, false);
    if (ces.info() != Eigen::Success) continue;
    interior.clear();
    for (int i = 0; i < n; ++i) {
      Complex zeta = ces.eigenvalues()(i);
      if (std::abs(zeta) < 1e-7) continue;  // lambda at infinity
      double lam = sigma + (1.0 / zeta).real();
      interior.push_back(std::atan(lam));
    }
    solved = true;
    break;
  }

  int n_boundary = solved ? n - static_cast<int>(interior.size())
                          : n_pos + n_neg + 2 * n_pair;
  int extra = n_boundary - n_pos - n_neg;
  if (!solved || extra < 0 || (extra % 2) != 0) {
    // Counting mismatch between the pencil and the inertia split; fall back
    // to a regularized sectorial computation. The boundary phases then carry
    // an O(sqrt(delta)) error, which the boundary_detected flag signals.
    double delta = 1e-9 * std::max(C.norm(), kTiny);
    CMat Creg = C + delta * std::polar(1.0, theta) * CMat::Identity(n, n);
    PhaseOptions sub = opts;
    sub.gamma_hint = theta;
    PhaseProfile out = phases_impl(Creg, sub, 0);
    out.kind = {Sectoriality::SemiSectorial, margin, n, theta};
    out.boundary_detected = true;
    return out;
  }
  int pairs = extra / 2;

  PhaseProfile out;
  out.phases.reserve(n);
  for (int i = 0; i < n_pos + pairs; ++i)
    out.phases.push_back(theta + kPi / 2.0);
  for (double a : interior) out.phases.push_back(theta + a);
  for (int i = 0; i < n_neg + pairs; ++i)
    out.phases.push_back(theta - kPi / 2.0);
  std::sort(out.phases.rbegin(), out.phases.rend());
  out.kind = {Sectoriality::SemiSectorial, margin, n, theta};
  out.boundary_detected = true;
  normalize_center(out.phases, out.center);
  return out;
}

PhaseProfile phases_impl(const CMat& C, const PhaseOptions& opts, int depth) {
  const int n = static_cast<int>(C.rows());
  const double scale = C.norm();
  require(depth < 4, ErrorCode::Internal, "phases: compression did not settle");

  if (scale < kTiny) {
    PhaseProfile out;
    out.kind = {Sectoriality::QuasiSectorial, 0.0, 0, 0.0};
    return out;
  }

  const double tol = opts.rel_tol * scale;
  auto [theta, margin] = rotation_search(C, opts, tol);
  require(margin >= -tol, ErrorCode::Domain,
          "phases: matrix is not semi-sectorial (margin " +
              std::to_string(margin) + ")");

  KernelSplit ks = split_kernel(C, opts.rel_tol);
  if (ks.rank < n) {
    require(ks.common, ErrorCode::Domain,
            "phases: kernels of C and C* differ; 0 is not a normal "
            "eigenvalue within tolerance");
    if (ks.rank == 0) {
      PhaseProfile out;
      out.kind = {Sectoriality::QuasiSectorial, margin, 0, theta};
      return out;
    }
    CMat Chat = ks.range.adjoint() * C * ks.range;
    PhaseOptions sub = opts;
    sub.gamma_hint = theta;
    PhaseProfile out = phases_impl(Chat, sub, depth + 1);
    bool hat_sectorial = out.kind.kind == Sectoriality::Sectorial;
    out.kind = {hat_sectorial ? Sectoriality::QuasiSectorial
                              : Sectoriality::SemiSectorial,
                margin, ks.rank, theta};
    return out;
  }

  if (margin > tol) {
    CMat M = std::polar(1.0, -theta) * C;
    CMat H = hermitian_part(M);
    CMat G = skew_part(M);
    Eigen::SelfAdjointEigenSolver<CMat> esH(H);
    CMat Hs = esH.eigenvectors() *
              esH.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
              esH.eigenvectors().adjoint();
    Eigen::SelfAdjointEigenSolver<CMat> esK(hermitian_part(Hs * G * Hs),
                                            Eigen::EigenvaluesOnly);
    PhaseProfile out;
    out.phases.resize(n);
    for (int i = 0; i < n; ++i)
      out.phases[i] = theta + std::atan(esK.eigenvalues()(n - 1 - i));
    out.kind = {Sectoriality::Sectorial, margin, n, theta};
    normalize_center(out.phases, out.center);
    return out;
  }

  CMat H = hermitian_part(std::polar(1.0, -theta) * C);
  if (H.norm() <= 1e-7 * scale) return degenerate_profile(C, theta, margin);
  return boundary_profile(C, theta, margin, opts);
}

}  // namespace

const char* to_string(Sectoriality kind) {
  switch (kind) {
    case Sectoriality::Sectorial:
      return "sectorial";
    case Sectoriality::QuasiSectorial:
      return "quasi-sectorial";
    case Sectoriality::SemiSectorial:
      return "semi-sectorial";
    case Sectoriality::NotSemiSectorial:
      return "not-semi-sectorial";
  }
  return "unknown";
}

double support(const CMat& C, double theta) {
  check_square(C, "support");
  CMat H = hermitian_part(std::polar(1.0, -theta) * C);
  Eigen::SelfAdjointEigenSolver<CMat> es(H, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(C.rows() - 1);
}

SectorialityResult classify(const CMat& C, const PhaseOptions& opts) {
  check_square(C, "classify");
  const int n = static_cast<int>(C.rows());
  const double scale = C.norm();
  if (scale < kTiny) return {Sectoriality::QuasiSectorial, 0.0, 0, 0.0};

  const double tol = opts.rel_tol * scale;
  auto [theta, margin] = rotation_search(C, opts, tol);
  if (margin > tol) return {Sectoriality::Sectorial, margin, n, theta};
  if (margin < -tol) return {Sectoriality::NotSemiSectorial, margin, n, theta};

  KernelSplit ks = split_kernel(C, opts.rel_tol);
  if (ks.rank == n || !ks.common)
    return {Sectoriality::SemiSectorial, margin, ks.rank, theta};
  if (ks.rank == 0) return {Sectoriality::QuasiSectorial, margin, 0, theta};

  CMat Chat = ks.range.adjoint() * C * ks.range;
  PhaseOptions sub = opts;
  sub.gamma_hint = theta;
  double sub_tol = sub.rel_tol * std::max(Chat.norm(), kTiny);
  auto [sub_theta, sub_margin] = rotation_search(Chat, sub, sub_tol);
  (void)sub_theta;
  Sectoriality kind = sub_margin > sub_tol ? Sectoriality::QuasiSectorial
                                           : Sectoriality::SemiSectorial;
  return {kind, margin, ks.rank, theta};
}

PhaseProfile phases(const CMat& C, const PhaseOptions& opts) {
  check_square(C, "phases");
  return phases_impl(C, opts, 0);
}

CMat compress(const CMat& C, const CMat& X) {
  check_square(C, "compress");
  require(X.rows() == C.rows() && X.cols() >= 1 && X.cols() <= X.rows(),
          ErrorCode::Input, "compress: X must be n x k with 1 <= k <= n");
  Eigen::ColPivHouseholderQR<CMat> qr(X);
  qr.setThreshold(1e-10);
  require(qr.rank() == X.cols(), ErrorCode::Input,
          "compress: X is rank deficient");
  return X.adjoint() * C * X;
}

AngleInterval product_angle_bounds(const CMat& A, const CMat& B,
                                   const PhaseOptions& opts) {
  check_square(A, "product_angle_bounds");
  check_square(B, "product_angle_bounds");
  PhaseProfile pa = phases(A, opts);
  require(pa.kind.kind == Sectoriality::Sectorial ||
              pa.kind.kind == Sectoriality::QuasiSectorial,
          ErrorCode::Precondition,
          "product_angle_bounds: first factor must be quasi-sectorial");
  PhaseProfile pb = phases(B, opts);
  return {pa.phi_min() + pb.phi_min(), pa.phi_max() + pb.phi_max()};
}

std::vector<double> product_eigen_angles(const CMat& A, const CMat& B,
                                         const PhaseOptions& opts) {
  PhaseProfile pa = phases(A, opts);
  PhaseProfile pb = phases(B, opts);
  double window = pa.center + pb.center;
  CMat AB = A * B;
  Eigen::ComplexEigenSolver<CMat> ces(AB, false);
  double lmax = ces.eigenvalues().cwiseAbs().maxCoeff();
  std::vector<double> out;
  for (int i = 0; i < ces.eigenvalues().size(); ++i) {
    Complex lam = ces.eigenvalues()(i);
    if (std::abs(lam) <= 1e-9 * std::max(lmax, kTiny)) continue;
    double a = std::arg(lam);
    while (a <= window - kPi) a += 2.0 * kPi;
    while (a > window + kPi) a -= 2.0 * kPi;
    out.push_back(a);
  }
  std::sort(out.rbegin(), out.rend());
  return out;
}

PhaseProfile kron_phases(const CMat& A, const CMat& B,
                         const PhaseOptions& opts) {
  check_square(A, "kron_phases");
  check_square(B, "kron_phases");
  PhaseProfile pa = phases(A, opts);
  PhaseProfile pb = phases(B, opts);
  require(pa.spread() + pb.spread() <= kPi + 1e-9, ErrorCode::Precondition,
          "kron_phases: combined phase spread exceeds pi");
  PhaseProfile out;
  out.phases.reserve(pa.phases.size() * pb.phases.size());
  for (double a : pa.phases)
    for (double b : pb.phases) out.phases.push_back(a + b);
  std::sort(out.phases.rbegin(), out.phases.rend());
  out.kind.kind = Sectoriality::SemiSectorial;
  out.kind.rank = static_cast<int>(out.phases.size());
  normalize_center(out.phases, out.center);
  return out;
}

namespace {

CMat diag_scaled(const CMat& C, const RVec& u) {
  const int n = static_cast<int>(C.rows());
  CMat out(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out(i, j) = C(i, j) * std::exp(u(j) - u(i));
  return out;
}

}  // namespace

EssentialPhaseResult essential_phase(const CMat& C,
                                     const EssentialPhaseOptions& opts) {
  check_square(const_cast<const CMat&>(C), "essential_phase");
  const int n = static_cast<int>(C.rows());

  double best_val = std::numeric_limits<double>::infinity();
  RVec best_u = RVec::Zero(n);
  double gamma_hint = 0.0;
  bool have_hint = false;

  auto evaluate = [&](const RVec& u) {
    CMat Cd = diag_scaled(C, u);
    PhaseOptions popts;
    popts.rel_tol = opts.rel_tol;
    if (have_hint) popts.gamma_hint = gamma_hint;
    SectorialityResult cls = classify(Cd, popts);
    if (cls.kind == Sectoriality::NotSemiSectorial)
      return 10.0 - cls.margin / std::max(Cd.norm(), kTiny);
    PhaseProfile prof = phases(Cd, popts);
    gamma_hint = prof.kind.theta;
    have_hint = true;
    double v = prof.phi_max();
    if (v < best_val) {
      best_val = v;
      best_u = u;
    }
    return v;
  };

  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> gauss(0.0, 0.5);

  for (int restart = 0; restart < std::max(opts.restarts, 1); ++restart) {
    RVec u = RVec::Zero(n);
    if (restart > 0)
      for (int i = 1; i < n; ++i) u(i) = gauss(rng);
    have_hint = false;
    double span = 1.5;
    double cur = evaluate(u);
    for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
      double before = cur;
      for (int i = 1; i < n; ++i) {
        auto line = [&](double t) {
          RVec v = u;
          v(i) = t;
          return -evaluate(v);
        };
        auto [t, negv] = golden_max(line, u(i) - span, u(i) + span, 28);
        if (-negv < cur) {
          cur = -negv;
          u(i) = t;
        }
      }
      span = std::max(0.25 * span, 1e-4);
      if (before - cur < 1e-10) break;
    }
  }

  require(std::isfinite(best_val) && best_val < 9.0, ErrorCode::Domain,
          "essential_phase: no positive diagonal scaling found that renders "
          "the matrix semi-sectorial");
  EssentialPhaseResult out;
  out.value = best_val;
  out.scaling = best_u.array().exp();
  out.exact = false;
  return out;
}

}  // namespace phasesync
