#include "phasesync/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "poly.hpp"

namespace phasesync {

namespace {

constexpr Complex kJ{0.0, 1.0};

CMat herm(const CMat& M) { return 0.5 * (M + M.adjoint()); }

double lambda_min_herm(const CMat& M) {
  Eigen::SelfAdjointEigenSolver<CMat> es(herm(M), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

}  // namespace

// ---------------------------------------------------------------------------
// Interpolation

RationalMatrix interpolate(const InterpolationSpec& spec) {
  spec.modes.validate();
  const int m = spec.modes.m;
  require(spec.K0.rows() == m && spec.K0.cols() == m, ErrorCode::Input,
          "interpolate: K0 must be m x m");
  auto omegas = spec.modes.nonzero();
  const int q = static_cast<int>(omegas.size());
  require(static_cast<int>(spec.Kk.size()) == q, ErrorCode::Input,
          "interpolate: one target per nonzero mode required");

  auto check_nonsingular = [&](const CMat& K, const std::string& label) {
    Eigen::JacobiSVD<CMat> svd(K);
    require(svd.singularValues()(m - 1) > 1e-12 * svd.singularValues()(0),
            ErrorCode::Input, "interpolate: singular target " + label);
  };
  check_nonsingular(spec.K0.cast<Complex>(), "K0");
  for (int k = 0; k < q; ++k)
    check_nonsingular(spec.Kk[k], "K" + std::to_string(k + 1));

  // Nodes in the bilinear variable w = (1-s)/(1+s): w=1 at s=0 and the
  // conjugate pair (1 -+ j w_k)/(1 +- j w_k) at s = +-j w_k.
  const int N = 2 * q + 1;
  std::vector<Complex> nodes(N);
  std::vector<CMat> values(N);
  nodes[0] = 1.0;
  values[0] = spec.K0.cast<Complex>();
  for (int k = 0; k < q; ++k) {
    Complex z = (1.0 - kJ * omegas[k]) / (1.0 + kJ * omegas[k]);
    nodes[1 + k] = z;
    values[1 + k] = spec.Kk[k];
    nodes[1 + q + k] = std::conj(z);
    values[1 + q + k] = spec.Kk[k].conjugate();
  }
  for (int a = 0; a < N; ++a)
    for (int b = a + 1; b < N; ++b)
      require(std::abs(nodes[a] - nodes[b]) > 1e-12, ErrorCode::Input,
              "interpolate: coincident interpolation nodes");

  // Matrix coefficients of the Lagrange polynomial in w.
  std::vector<CMat> F(N, CMat::Zero(m, m));
  for (int t = 0; t < N; ++t) {
    std::vector<Complex> basis{1.0};
    Complex denom = 1.0;
    for (int l = 0; l < N; ++l) {
      if (l == t) continue;
      // multiply basis by (w - nodes[l])
      std::vector<Complex> next(basis.size() + 1, 0.0);
      for (size_t d = 0; d < basis.size(); ++d) {
        next[d + 1] += basis[d];
        next[d] -= basis[d] * nodes[l];
      }
      basis = std::move(next);
      denom *= nodes[t] - nodes[l];
    }
    for (int d = 0; d < N; ++d) F[d] += values[t] * (basis[d] / denom);
  }

  // Conjugate-symmetric data makes every coefficient real.
  double imag_norm = 0.0, real_norm = 0.0;
  for (const auto& Fd : F) {
    imag_norm = std::max(imag_norm, Fd.imag().cwiseAbs().maxCoeff());
    real_norm = std::max(real_norm, Fd.real().cwiseAbs().maxCoeff());
  }
  require(imag_norm <= 1e-10 * std::max(1.0, real_norm), ErrorCode::Internal,
          "interpolate: coefficients failed to come out real");

  // Substitute w = (1-s)/(1+s): num(s) = sum_d F_d (1-s)^d (1+s)^(N-1-d),
  // den(s) = (1+s)^(N-1).
  const int D = N - 1;
  std::vector<double> one_minus{1.0, -1.0}, one_plus{1.0, 1.0};
  std::vector<std::vector<double>> basis_poly(D + 1);
  for (int d = 0; d <= D; ++d)
    basis_poly[d] =
        poly::mul(poly::power(one_minus, d), poly::power(one_plus, D - d));
  std::vector<double> den = poly::power(one_plus, D);

  RationalMatrix out;
  out.rows = out.cols = m;
  out.entries.assign(m * m, RationalEntry{});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      std::vector<double> num(D + 1, 0.0);
      for (int d = 0; d <= D; ++d)
        num = poly::add(num, poly::scale(basis_poly[d], F[d].real()(i, j)));
      out.at(i, j) = {num, den};
    }
  return out;
}

// ---------------------------------------------------------------------------
// Sector LMI feasibility by projected subgradient ascent

namespace {

double lmi_objective(const LmiProblem& p, const CMat& K, int& active,
                     double& active_sign) {
  double best = std::numeric_limits<double>::infinity();
  active = 0;
  active_sign = 1.0;
  for (size_t c = 0; c < p.constraints.size(); ++c) {
    for (double sign : {1.0, -1.0}) {
      CMat R = std::polar(1.0, sign * p.constraints[c].theta) *
               p.constraints[c].M * K;
      double v = lambda_min_herm(R);
      if (v < best) {
        best = v;
        active = static_cast<int>(c);
        active_sign = sign;
      }
    }
  }
  return best;
}

CMat project_ball(const CMat& K, bool real_K) {
  CMat out = real_K ? CMat(K.real().cast<Complex>()) : K;
  double nrm = out.norm();
  if (nrm > 1.0) out /= nrm;
  return out;
}

}  // namespace

LmiResult solve_sector_lmi(const LmiProblem& p, const LmiOptions& opts) {
  require(p.m >= 1, ErrorCode::Input, "sector lmi: m must be positive");
  require(!p.constraints.empty(), ErrorCode::Input,
          "sector lmi: no constraints");
  for (const auto& c : p.constraints) {
    require(c.M.rows() == p.m && c.M.cols() == p.m, ErrorCode::Input,
            "sector lmi: constraint dimension mismatch");
    require(c.theta >= 0.0 && c.theta < kPi / 2.0, ErrorCode::Input,
            "sector lmi: rotation must lie in [0, pi/2)");
  }

  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int m = p.m;

  // Heuristic starts: identity, the inverse of the mean constraint matrix,
  // then random points.
  std::vector<CMat> starts;
  starts.push_back(CMat::Identity(m, m));
  {
    CMat mean = CMat::Zero(m, m);
    for (const auto& c : p.constraints) mean += c.M;
    mean /= static_cast<double>(p.constraints.size());
    Eigen::FullPivLU<CMat> lu(mean);
    if (lu.isInvertible()) starts.push_back(lu.inverse());
  }
  while (static_cast<int>(starts.size()) < opts.restarts) {
    CMat R(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        R(i, j) = p.real_K ? Complex(gauss(rng), 0.0)
                           : Complex(gauss(rng), gauss(rng));
    starts.push_back(R);
  }

  LmiResult best;
  best.K = CMat::Zero(m, m);
  best.margin = -std::numeric_limits<double>::infinity();

  for (const auto& start : starts) {
    CMat K = project_ball(start, p.real_K);
    if (K.norm() < 1e-12) continue;
    int active = 0;
    double sign = 1.0;
    double val = lmi_objective(p, K, active, sign);
    CMat bestK = K;
    double bestv = val;
    double step0 = 0.5;
    for (int it = 1; it <= opts.iterations; ++it) {
      // Subgradient of lambda_min(Herm(e^{j s theta} M K)) at the active
      // constraint: Re <v v*, e^{j s theta} M dK> with v the bottom
      // eigenvector, i.e. gradient (e^{j s theta} M)^* v v^*.
      const auto& c = p.constraints[active];
      CMat R = std::polar(1.0, sign * c.theta) * c.M * K;
      Eigen::SelfAdjointEigenSolver<CMat> es(herm(R));
      CVec v = es.eigenvectors().col(0);
      CMat grad =
          (std::polar(1.0, sign * c.theta) * c.M).adjoint() * v * v.adjoint();
      if (p.real_K) grad = grad.real().cast<Complex>();
      double gn = grad.norm();
      if (gn < 1e-15) break;
      K = project_ball(K + (step0 / std::sqrt(static_cast<double>(it))) *
                               grad / gn,
                       p.real_K);
      val = lmi_objective(p, K, active, sign);
      if (val > bestv) {
        bestv = val;
        bestK = K;
      }
    }
    if (bestv > best.margin) {
      best.margin = bestv;
      best.K = bestK;
    }
  }

  // Recheck the reported margin independently of the ascent bookkeeping.
  int a = 0;
  double s = 1.0;
  best.margin = lmi_objective(p, best.K, a, s);
  best.feasible = best.margin > opts.feas_tol;
  return best;
}

// ---------------------------------------------------------------------------
// Low-gain search

namespace {

std::vector<TransferMatrix> scaled_controllers(
    const std::vector<RationalMatrix>& ctilde, double eps, int m) {
  std::vector<TransferMatrix> out;
  out.reserve(ctilde.size());
  for (const auto& c : ctilde)
    out.push_back(TransferMatrix::stable(c.scaled(eps).realize(), m));
  return out;
}

/// Eigenvalue angle precondition of the low-gain lemma on one component:
/// M K (L_kk x I) must have spectrum in the open right half plane, except
/// for exactly m zeros on the root component.
bool hurwitz_precondition(const CMat& MK_L, int expected_zeros,
                          std::string& why) {
  Eigen::ComplexEigenSolver<CMat> es(MK_L, false);
  double scale = std::max(es.eigenvalues().cwiseAbs().maxCoeff(), 1e-300);
  int zeros = 0;
  for (int i = 0; i < es.eigenvalues().size(); ++i) {
    Complex lam = es.eigenvalues()(i);
    if (std::abs(lam) <= 1e-8 * scale) {
      ++zeros;
      continue;
    }
    if (lam.real() <= 0.0) {
      why = "eigenvalue " + std::to_string(lam.real()) + "+" +
            std::to_string(lam.imag()) + "j of M K (L x I) leaves the open "
            "right half plane";
      return false;
    }
  }
  if (zeros != expected_zeros) {
    why = "M K (L x I) has " + std::to_string(zeros) +
          " zero eigenvalues, expected " + std::to_string(expected_zeros);
    return false;
  }
  return true;
}

RMat kron_identity_r(const RMat& L, int m) {
  const int n = static_cast<int>(L.rows());
  RMat out = RMat::Zero(n * m, n * m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      out.block(i * m, j * m, m, m) = L(i, j) * RMat::Identity(m, m);
  return out;
}

}  // namespace

EpsilonSearch epsilon_search(const std::vector<TransferMatrix>& agents,
                             const std::vector<RationalMatrix>& ctilde,
                             const WeightedDigraph& G, double eps_min) {
  require(!agents.empty(), ErrorCode::Input, "epsilon_search: no agents");
  const int m = agents[0].io_dim();
  require(ctilde.size() == 1 || ctilde.size() == agents.size(),
          ErrorCode::Input,
          "epsilon_search: need one controller or one per agent");

  EpsilonSearch out;

  // Precondition of the low-gain lemma, mode by mode and component by
  // component, using the actual controller values at the modes.
  auto dec = frobenius_form(G);
  auto ctl_value = [&](size_t agent, Complex s) -> CMat {
    const auto& c = ctilde.size() == 1 ? ctilde[0] : ctilde[agent];
    return c.eval(s);
  };
  out.hurwitz_ok = true;
  std::vector<Complex> mode_points;
  if (agents[0].modes.has_zero()) mode_points.push_back(Complex(0, 0));
  for (double w : agents[0].modes.nonzero()) mode_points.push_back(kJ * w);
  for (size_t kappa = 0; kappa < dec.blocks.size() && out.hurwitz_ok;
       ++kappa) {
    const auto& blk = dec.blocks[kappa];
    for (size_t mp = 0; mp < mode_points.size() && out.hurwitz_ok; ++mp) {
      Complex s = mode_points[mp];
      CMat MK = CMat::Zero(blk.size * m, blk.size * m);
      for (int a = 0; a < blk.size; ++a) {
        int agent = blk.nodes[a];
        CMat Ma = s == Complex(0, 0)
                      ? CMat(agents[agent].M0.cast<Complex>())
                      : agents[agent].Mk[mp - (agents[0].modes.has_zero())];
        MK.block(a * m, a * m, m, m) = Ma * ctl_value(agent, s);
      }
      CMat MKL = MK * kron_identity_r(blk.Lkk, m).cast<Complex>();
      std::string why;
      if (!hurwitz_precondition(MKL, kappa == 0 ? m : 0, why)) {
        out.hurwitz_ok = false;
        out.diagnostics = "low-gain precondition failed on component " +
                          std::to_string(kappa + 1) + " at mode " +
                          std::to_string(s.imag()) + "j: " + why;
      }
    }
  }

  for (double eps = 1.0; eps >= eps_min; eps /= 2.0) {
    auto loop = closed_loop(agents, scaled_controllers(ctilde, eps, m), G);
    auto rep = verify_sync(loop);
    out.trace.emplace_back(eps, rep.pass);
    if (rep.pass) {
      out.found = true;
      out.epsilon = eps;
      out.epsilon_star = (eps == 1.0) ? 1.0 : eps * 2.0;
      out.report = std::move(rep);
      return out;
    }
    if (out.diagnostics.empty() || eps == 1.0)
      out.diagnostics += " eps=" + std::to_string(eps) + ": " + rep.reason;
  }
  out.found = false;
  return out;
}

// ---------------------------------------------------------------------------
// Designs

namespace {

std::vector<ModeCertificate> build_certificates(
    const std::vector<TransferMatrix>& agents,
    const std::vector<RationalMatrix>& ctilde,
    const LaplacianDecomposition& dec, const std::vector<double>& thetas) {
  const int m = agents[0].io_dim();
  std::vector<Complex> mode_points;
  std::vector<double> mode_omegas;
  if (agents[0].modes.has_zero()) {
    mode_points.push_back(Complex(0, 0));
    mode_omegas.push_back(0.0);
  }
  for (double w : agents[0].modes.nonzero()) {
    mode_points.push_back(kJ * w);
    mode_omegas.push_back(w);
  }

  std::vector<ModeCertificate> out;
  for (size_t kappa = 0; kappa < dec.blocks.size(); ++kappa) {
    const auto& blk = dec.blocks[kappa];
    RMat Lk = kron_identity_r(blk.Lkk, m);
    for (size_t mp = 0; mp < mode_points.size(); ++mp) {
      Complex s = mode_points[mp];
      CMat MK = CMat::Zero(blk.size * m, blk.size * m);
      for (int a = 0; a < blk.size; ++a) {
        int agent = blk.nodes[a];
        const auto& c = ctilde.size() == 1 ? ctilde[0] : ctilde[agent];
        CMat Ma = s == Complex(0, 0)
                      ? CMat(agents[agent].M0.cast<Complex>())
                      : agents[agent].Mk[mp - agents[0].modes.has_zero()];
        MK.block(a * m, a * m, m, m) = Ma * c.eval(s);
      }
      ModeCertificate cert;
      cert.omega = mode_omegas[mp];
      cert.kappa = static_cast<int>(kappa) + 1;
      cert.theta = thetas[kappa];
      Eigen::ComplexEigenSolver<CMat> ep(MK * Lk.cast<Complex>(), false);
      Eigen::ComplexEigenSolver<CMat> el(CMat(Lk.cast<Complex>()), false);
      double pscale =
          std::max(ep.eigenvalues().cwiseAbs().maxCoeff(), 1e-300);
      for (int i = 0; i < ep.eigenvalues().size(); ++i)
        if (std::abs(ep.eigenvalues()(i)) > 1e-8 * pscale)
          cert.angles.push_back(std::arg(ep.eigenvalues()(i)));
      double lscale =
          std::max(el.eigenvalues().cwiseAbs().maxCoeff(), 1e-300);
      for (int i = 0; i < el.eigenvalues().size(); ++i)
        if (std::abs(el.eigenvalues()(i)) > 1e-8 * lscale)
          cert.lap_angles.push_back(std::arg(el.eigenvalues()(i)));
      std::sort(cert.angles.rbegin(), cert.angles.rend());
      std::sort(cert.lap_angles.rbegin(), cert.lap_angles.rend());
      try {
        PhaseProfile prof = phases(MK);
        cert.phi_lo = prof.phi_min();
        cert.phi_hi = prof.phi_max();
        cert.phase_condition_ok = prof.phi_max() < kPi / 2.0 - cert.theta &&
                                  prof.phi_min() > -kPi / 2.0 + cert.theta;
      } catch (const Error&) {
        cert.phase_condition_ok = false;
      }
      out.push_back(std::move(cert));
    }
  }
  return out;
}

}  // namespace

DesignResult design_per_agent(const std::vector<TransferMatrix>& agents,
                              const WeightedDigraph& G,
                              const DesignOptions& opts) {
  require(!agents.empty(), ErrorCode::Input, "design: no agents");
  const int m = agents[0].io_dim();
  auto dec = frobenius_form(G);
  auto thetas = component_phase_bounds(dec, opts.refine_theta);

  DesignResult out;
  out.uniform = false;
  out.is_static = agents[0].modes.nonzero().empty();

  for (const auto& agent : agents) {
    InterpolationSpec spec;
    spec.modes = agent.modes;
    require(!agent.modes.omega.empty(), ErrorCode::Input,
            "design: agents carry no persistent modes");
    RMat M0 = agent.modes.has_zero() ? agent.M0 : RMat::Identity(m, m);
    Eigen::FullPivLU<RMat> lu0(M0);
    require(lu0.isInvertible(), ErrorCode::Domain,
            "design: singular residue at the origin");
    spec.K0 = lu0.inverse();
    for (const auto& Mk : agent.Mk) {
      Eigen::FullPivLU<CMat> lu(Mk);
      require(lu.isInvertible(), ErrorCode::Domain,
              "design: singular oscillatory residue");
      spec.Kk.push_back(lu.inverse());
    }
    out.controllers.push_back(interpolate(spec));
  }

  out.certificates = build_certificates(agents, out.controllers, dec, thetas);
  auto es = epsilon_search(agents, out.controllers, G, opts.eps_min);
  out.epsilon = es.epsilon;
  out.epsilon_star = es.epsilon_star;
  out.sync_report = es.report;
  out.feasible = es.found;
  out.message = es.found ? "per-agent design certified at epsilon = " +
                               std::to_string(es.epsilon)
                         : "low-gain search failed: " + es.diagnostics;
  return out;
}

DesignResult design_uniform(const std::vector<TransferMatrix>& agents,
                            const WeightedDigraph& G,
                            const DesignOptions& opts) {
  require(!agents.empty(), ErrorCode::Input, "design: no agents");
  const int m = agents[0].io_dim();
  auto dec = frobenius_form(G);
  auto thetas = component_phase_bounds(dec, opts.refine_theta);

  DesignResult out;
  out.uniform = true;

  std::vector<Complex> mode_points;
  std::vector<double> mode_omegas;
  if (agents[0].modes.has_zero()) {
    mode_points.push_back(Complex(0, 0));
    mode_omegas.push_back(0.0);
  }
  for (double w : agents[0].modes.nonzero()) {
    mode_points.push_back(kJ * w);
    mode_omegas.push_back(w);
  }
  require(!mode_points.empty(), ErrorCode::Input,
          "design: agents carry no persistent modes");

  bool all_feasible = true;
  std::vector<CMat> gains;
  for (size_t mp = 0; mp < mode_points.size(); ++mp) {
    LmiProblem prob;
    prob.m = m;
    prob.real_K = mode_omegas[mp] == 0.0;
    for (size_t kappa = 0; kappa < dec.blocks.size(); ++kappa) {
      for (int node : dec.blocks[kappa].nodes) {
        CMat Ma = mode_omegas[mp] == 0.0
                      ? CMat(agents[node].M0.cast<Complex>())
                      : agents[node].Mk[mp - agents[0].modes.has_zero()];
        prob.constraints.push_back({Ma, thetas[kappa]});
      }
    }
    auto res = solve_sector_lmi(prob, opts.lmi);
    out.lmi_margins.push_back(res.margin);
    gains.push_back(res.K);
    all_feasible = all_feasible && res.feasible;
  }
  out.K = gains;

  if (!all_feasible) {
    out.feasible = false;
    out.message = "sector feasibility failed at one or more modes";
    return out;
  }

  InterpolationSpec spec;
  spec.modes = agents[0].modes;
  if (agents[0].modes.has_zero()) {
    spec.K0 = gains[0].real();
  } else {
    spec.K0 = RMat::Identity(m, m);
  }
  for (size_t mp = agents[0].modes.has_zero() ? 1 : 0; mp < gains.size();
       ++mp)
    spec.Kk.push_back(gains[mp]);

  if (spec.modes.nonzero().empty()) {
    // Consensus specialization: a static gain suffices.
    out.is_static = true;
    out.controllers.push_back(RationalMatrix::constant(spec.K0));
  } else {
    out.controllers.push_back(interpolate(spec));
  }

  out.certificates = build_certificates(agents, out.controllers, dec, thetas);
  auto es = epsilon_search(agents, out.controllers, G, opts.eps_min);
  out.epsilon = es.epsilon;
  out.epsilon_star = es.epsilon_star;
  out.sync_report = es.report;
  out.feasible = es.found;
  out.message = es.found ? "uniform design certified at epsilon = " +
                               std::to_string(es.epsilon)
                         : "low-gain search failed: " + es.diagnostics;
  return out;
}

}  // namespace phasesync
