#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unsupported/Eigen/KroneckerProduct>

#include <cmath>

#include "phasesync/phase.hpp"
#include "support.hpp"

using namespace phasesync;

namespace {

CMat cmat2(Complex a, Complex b, Complex c, Complex d) {
  CMat M(2, 2);
  M << a, b, c, d;
  return M;
}

constexpr Complex J{0.0, 1.0};

}  // namespace

TEST_CASE("support function basics") {
  CMat I2 = CMat::Identity(2, 2);
  CHECK(support(I2, 0.0) == doctest::Approx(1.0).epsilon(1e-12));

  CMat D = cmat2(1.0, 0.0, 0.0, J);
  CHECK(support(D, 0.0) == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(support(CMat::Zero(2, 3), 0.0), Error);
}

TEST_CASE("support dominates the spectrum") {
  auto g = testgen::rng(11);
  for (int trial = 0; trial < 25; ++trial) {
    CMat C = testgen::random_gaussian(g, 3, 3);
    Eigen::ComplexEigenSolver<CMat> ces(C, false);
    for (int k = 0; k < 8; ++k) {
      double theta = testgen::uniform(g, 0.0, 2.0 * kPi);
      double h = support(C, theta);
      for (int i = 0; i < 3; ++i) {
        double proj = (std::polar(1.0, -theta) * ces.eigenvalues()(i)).real();
        CHECK(proj <= h + 1e-9);
      }
    }
  }
}

TEST_CASE("classification of canonical matrices") {
  CHECK(classify(CMat::Identity(2, 2)).kind == Sectoriality::Sectorial);

  CMat D = cmat2(0.0, 0.0, 0.0, 1.0);
  auto quasi = classify(D);
  CHECK(quasi.kind == Sectoriality::QuasiSectorial);
  CHECK(quasi.rank == 1);

  // W of this Jordan-type matrix is the disk centered at 1 with radius 1, so
  // the origin sits on a smooth piece of the boundary: semi- but not
  // quasi-sectorial. The margin certifies the boundary contact.
  CMat E = cmat2(1.0, 2.0, 0.0, 1.0);
  auto semi = classify(E);
  CHECK(semi.kind == Sectoriality::SemiSectorial);
  CHECK(std::abs(semi.margin) < 1e-8);

  // Numerical range is the triangle of three unit-circle points surrounding
  // the origin.
  CMat tri = CMat::Zero(3, 3);
  tri(0, 0) = 1.0;
  tri(1, 1) = std::polar(1.0, 2.5);
  tri(2, 2) = std::polar(1.0, -2.5);
  CHECK(classify(tri).kind == Sectoriality::NotSemiSectorial);
}

TEST_CASE("phases of canonical matrices") {
  auto p1 = phases(cmat2(std::polar(1.0, kPi / 4.0), 0.0, 0.0,
                         std::polar(1.0, -kPi / 4.0)));
  REQUIRE(p1.phases.size() == 2);
  CHECK(p1.phases[0] == doctest::Approx(kPi / 4.0).epsilon(1e-10));
  CHECK(p1.phases[1] == doctest::Approx(-kPi / 4.0).epsilon(1e-10));
  CHECK(p1.center == doctest::Approx(0.0).epsilon(1e-10));

  // I + j diag(1,-1): Hermitian part is the identity, so the phases are the
  // arctangents of the skew spectrum {1, -1}.
  auto p2 = phases(cmat2(1.0 + J, 0.0, 0.0, 1.0 - J));
  REQUIRE(p2.phases.size() == 2);
  CHECK(p2.phases[0] == doctest::Approx(std::atan(1.0)).epsilon(1e-10));
  CHECK(p2.phases[1] == doctest::Approx(-std::atan(1.0)).epsilon(1e-10));

  // Skew-symmetric: rotated Hermitian with a straight-segment range.
  auto p3 = phases(cmat2(0.0, 1.0, -1.0, 0.0));
  REQUIRE(p3.phases.size() == 2);
  CHECK(p3.phases[0] == doctest::Approx(kPi / 2.0).epsilon(1e-9));
  CHECK(p3.phases[1] == doctest::Approx(-kPi / 2.0).epsilon(1e-9));
  CHECK(p3.boundary_detected);

  // Smooth-boundary contact: phases collapse to the +/- pi/2 pair.
  auto p4 = phases(cmat2(1.0, 2.0, 0.0, 1.0));
  REQUIRE(p4.phases.size() == 2);
  CHECK(p4.phases[0] == doctest::Approx(kPi / 2.0).epsilon(1e-7));
  CHECK(p4.phases[1] == doctest::Approx(-kPi / 2.0).epsilon(1e-7));

  CMat tri = CMat::Zero(3, 3);
  tri(0, 0) = 1.0;
  tri(1, 1) = std::polar(1.0, 2.5);
  tri(2, 2) = std::polar(1.0, -2.5);
  CHECK_THROWS_AS(phases(tri), Error);
}

TEST_CASE("constructed congruences reproduce their phase list") {
  auto g = testgen::rng(23);
  for (int trial = 0; trial < 40; ++trial) {
    int n = 2 + static_cast<int>(trial % 3);
    auto phis = testgen::random_phase_list(g, n, testgen::uniform(g, -0.6, 0.6),
                                           testgen::uniform(g, 0.2, 1.3));
    CMat C = testgen::matrix_with_phases(g, phis);
    auto prof = phases(C);
    REQUIRE(static_cast<int>(prof.phases.size()) == n);
    for (int i = 0; i < n; ++i)
      CHECK(prof.phases[i] == doctest::Approx(phis[i]).epsilon(1e-7));
  }
}

TEST_CASE("rotation equivariance of phases") {
  auto g = testgen::rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    auto phis = testgen::random_phase_list(g, 3, 0.0, 0.9);
    CMat C = testgen::matrix_with_phases(g, phis);
    auto base = phases(C);
    double alpha = testgen::uniform(g, -kPi / 4.0, kPi / 4.0);
    auto rotated = phases(std::polar(1.0, alpha) * C);
    REQUIRE(rotated.phases.size() == base.phases.size());
    for (size_t i = 0; i < base.phases.size(); ++i)
      CHECK(rotated.phases[i] ==
            doctest::Approx(base.phases[i] + alpha).epsilon(1e-7));
    CHECK(base.spread() < kPi);
  }
}

TEST_CASE("compress basics") {
  auto g = testgen::rng(7);
  CMat C = testgen::matrix_with_phases(g, {0.4, 0.1, -0.3});
  CHECK((compress(C, CMat::Identity(3, 3)) - C).norm() < 1e-12);

  CMat D = cmat2(std::polar(1.0, kPi / 3.0), 0.0, 0.0, 1.0);
  CMat e1 = CMat::Zero(2, 1);
  e1(0, 0) = 1.0;
  CMat picked = compress(D, e1);
  CHECK(std::abs(picked(0, 0) - std::polar(1.0, kPi / 3.0)) < 1e-12);

  CMat Xbad(3, 2);
  Xbad.col(0) = CMat::Ones(3, 1);
  Xbad.col(1) = 2.0 * CMat::Ones(3, 1);
  CHECK_THROWS_AS(compress(C, Xbad), Error);
}

TEST_CASE("compression keeps phases inside the parent interval") {
  auto g = testgen::rng(41);
  for (int trial = 0; trial < 60; ++trial) {
    int n = 3 + (trial % 2);
    int k = 1 + (trial % (n - 1));
    auto phis = testgen::random_phase_list(g, n, testgen::uniform(g, -0.5, 0.5),
                                           testgen::uniform(g, 0.3, 1.4));
    CMat C = testgen::matrix_with_phases(g, phis);
    CMat X = testgen::random_full_column_rank(g, n, k);
    auto sub = phases(compress(C, X));
    auto parent = phases(C);
    CHECK(sub.phi_max() <= parent.phi_max() + 1e-8);
    CHECK(sub.phi_min() >= parent.phi_min() - 1e-8);
  }
}

TEST_CASE("product angle bounds") {
  CMat I2 = CMat::Identity(2, 2);
  auto triv = product_angle_bounds(I2, I2);
  CHECK(triv.lo == doctest::Approx(0.0));
  CHECK(triv.hi == doctest::Approx(0.0));
  auto angles = product_eigen_angles(I2, I2);
  for (double a : angles) CHECK(std::abs(a) < 1e-10);

  CMat R = std::polar(1.0, kPi / 6.0) * I2;
  auto rot = product_angle_bounds(R, R);
  CHECK(rot.lo == doctest::Approx(kPi / 3.0).epsilon(1e-9));
  CHECK(rot.hi == doctest::Approx(kPi / 3.0).epsilon(1e-9));

  auto g = testgen::rng(53);
  for (int trial = 0; trial < 40; ++trial) {
    int n = 2 + (trial % 3);
    CMat A = testgen::matrix_with_phases(
        g, testgen::random_phase_list(g, n, testgen::uniform(g, -0.4, 0.4),
                                      testgen::uniform(g, 0.2, 1.0)));
    CMat B = testgen::random_psd(g, n);
    auto iv = product_angle_bounds(A, B);
    for (double a : product_eigen_angles(A, B)) {
      CHECK(a >= iv.lo - 1e-8);
      CHECK(a <= iv.hi + 1e-8);
    }
  }
}

TEST_CASE("kronecker phase multiset") {
  CMat I2 = CMat::Identity(2, 2);
  auto triv = kron_phases(I2, I2);
  REQUIRE(triv.phases.size() == 4);
  for (double p : triv.phases) CHECK(std::abs(p) < 1e-12);

  CMat A = cmat2(std::polar(1.0, kPi / 8.0), 0.0, 0.0, 1.0);
  auto mix = kron_phases(A, I2);
  REQUIRE(mix.phases.size() == 4);
  CHECK(mix.phases[0] == doctest::Approx(kPi / 8.0).epsilon(1e-10));
  CHECK(mix.phases[1] == doctest::Approx(kPi / 8.0).epsilon(1e-10));
  CHECK(std::abs(mix.phases[2]) < 1e-10);
  CHECK(std::abs(mix.phases[3]) < 1e-10);

  auto g = testgen::rng(67);
  for (int trial = 0; trial < 25; ++trial) {
    CMat X = testgen::matrix_with_phases(
        g, testgen::random_phase_list(g, 2 + (trial % 2), 0.2, 0.6));
    CMat Y = testgen::matrix_with_phases(
        g, testgen::random_phase_list(g, 2, -0.1, 0.7));
    auto claimed = kron_phases(X, Y);
    CMat K = CMat(Eigen::kroneckerProduct(X, Y));
    auto direct = phases(K);
    REQUIRE(claimed.phases.size() == direct.phases.size());
    for (size_t i = 0; i < claimed.phases.size(); ++i)
      CHECK(claimed.phases[i] ==
            doctest::Approx(direct.phases[i]).epsilon(1e-8));
  }

  CMat wideA = testgen::matrix_with_phases(g, {1.2, -1.2});
  CMat wideB = testgen::matrix_with_phases(g, {1.0, -1.0});
  CHECK_THROWS_AS(kron_phases(wideA, wideB), Error);
}

TEST_CASE("compression of semi-sectorial parents with boundary phases") {
  // Parents built as T* blkdiag(D, e^{j t0}[[1,2],[0,1]]) T carry the exact
  // boundary pair t0 +/- pi/2, so the compression property runs through the
  // rank-deficient Hermitian-part path.
  auto g = testgen::rng(83);
  for (int trial = 0; trial < 20; ++trial) {
    double t0 = testgen::uniform(g, -0.4, 0.4);
    CMat blocks = CMat::Zero(4, 4);
    blocks(0, 0) = std::polar(1.0, t0 + testgen::uniform(g, -1.2, 1.2));
    blocks(1, 1) = std::polar(1.0, t0 + testgen::uniform(g, -1.2, 1.2));
    blocks.block(2, 2, 2, 2) << 1.0, 2.0, 0.0, 1.0;
    blocks.block(2, 2, 2, 2) *= std::polar(1.0, t0);
    CMat T = testgen::random_congruence(g, 4);
    CMat C = T.adjoint() * blocks * T;

    auto parent = phases(C);
    REQUIRE(parent.phases.size() == 4);
    CHECK(parent.phi_max() == doctest::Approx(t0 + kPi / 2.0).epsilon(1e-6));
    CHECK(parent.phi_min() == doctest::Approx(t0 - kPi / 2.0).epsilon(1e-6));
    CHECK(parent.boundary_detected);

    CMat X = testgen::random_full_column_rank(g, 4, 2);
    auto sub = phases(compress(C, X));
    CHECK(sub.phi_max() <= parent.phi_max() + 1e-6);
    CHECK(sub.phi_min() >= parent.phi_min() - 1e-6);
  }
}

TEST_CASE("product bounds with a quasi-sectorial first factor") {
  auto g = testgen::rng(89);
  for (int trial = 0; trial < 15; ++trial) {
    // 0 direct-summed with a sectorial block, rotated by a random unitary.
    CMat core = CMat::Zero(3, 3);
    core(1, 1) = std::polar(1.0, testgen::uniform(g, -0.6, 0.6));
    core(2, 2) = std::polar(1.0, testgen::uniform(g, -0.6, 0.6));
    CMat U = testgen::random_unitary(g, 3);
    CMat A = U * core * U.adjoint();
    REQUIRE(classify(A).kind == Sectoriality::QuasiSectorial);
    CMat B = testgen::random_psd(g, 3);
    auto iv = product_angle_bounds(A, B);
    for (double a : product_eigen_angles(A, B)) {
      CHECK(a >= iv.lo - 1e-8);
      CHECK(a <= iv.hi + 1e-8);
    }
  }
}

TEST_CASE("essential phase") {
  auto g = testgen::rng(71);
  CMat P = testgen::random_psd(g, 3);
  auto herm = essential_phase(P);
  CHECK(herm.value == doctest::Approx(0.0).epsilon(1e-6));
  CHECK_FALSE(herm.exact);

  // Diagonal scalings commute with diagonal matrices, so nothing improves.
  CMat D = cmat2(std::polar(1.0, kPi / 5.0), 0.0, 0.0,
                 std::polar(1.0, -kPi / 7.0));
  auto diag = essential_phase(D);
  CHECK(diag.value == doctest::Approx(kPi / 5.0).epsilon(1e-7));

  for (int trial = 0; trial < 6; ++trial) {
    CMat C = testgen::matrix_with_phases(
        g, testgen::random_phase_list(g, 3, 0.1, 0.8));
    auto res = essential_phase(C);
    auto direct = phases(C);
    CHECK(res.value <= direct.phi_max() + 1e-8);
    // Reported value must be attained by its own scaling.
    CMat Dm = res.scaling.cast<Complex>().asDiagonal();
    CMat scaled = Dm.inverse() * C * Dm;
    CHECK(res.value == doctest::Approx(phases(scaled).phi_max()).epsilon(1e-6));
  }

  // Diagonal matrix whose range surrounds the origin: no scaling can help.
  CMat hopeless = CMat::Zero(3, 3);
  hopeless(0, 0) = 1.0;
  hopeless(1, 1) = std::polar(1.0, 2.5);
  hopeless(2, 2) = std::polar(1.0, -2.5);
  CHECK_THROWS_AS(essential_phase(hopeless), Error);
}
