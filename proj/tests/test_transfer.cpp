#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "rcmps/state.hpp"
#include "rcmps/transfer.hpp"

using namespace rcmps;

namespace {
CMat random_mat(int D, std::uint64_t seed) {
  const Rcmps t = random_init(D, 0.8, seed);
  return t.K + Complex(0, 1) * t.R;  // generic, neither Hermitian nor traceless
}
}  // namespace

TEST_CASE("matrix-free application matches the dense superoperator") {
  const int D = 3;
  const Rcmps s = random_init(D, 0.5, 2);
  const CMat Q = q_matrix(s);
  const CMat T = dense_transfer_qr(Q, s.R);
  const CMat M = random_mat(D, 3);
  const CMat TM = apply_T(s, M);
  const CVec lhs = Eigen::Map<const CVec>(TM.data(), D * D);
  const CVec rhs = T * Eigen::Map<const CVec>(M.data(), D * D);
  CHECK((lhs - rhs).norm() < 1e-13 * (1.0 + rhs.norm()));

  const CMat TaM = apply_T_adjoint(s, M);
  const CVec lhs2 = Eigen::Map<const CVec>(TaM.data(), D * D);
  const CVec rhs2 = T.adjoint() * Eigen::Map<const CVec>(M.data(), D * D);
  CHECK((lhs2 - rhs2).norm() < 1e-13 * (1.0 + rhs2.norm()));
}

TEST_CASE("identity is the exact left fixed point") {
  for (int D : {1, 2, 4, 7}) {
    const Rcmps s = random_init(D, 0.6, 10 + D);
    const CMat I = CMat::Identity(D, D);
    CHECK(frob(apply_T_adjoint(s, I)) < 1e-13 * (1.0 + frob(s.R)));
  }
}

TEST_CASE("right fixed point invariants") {
  const Rcmps s = random_init(3, 0.5, 4);
  const TransferFixture f = right_fixed_point(s);
  CHECK(f.D == 3);
  CHECK(std::abs(f.r.trace().real() - 1.0) < 1e-12);
  CHECK(std::abs(f.r.trace().imag()) < 1e-13);
  CHECK(frob(f.r - f.r.adjoint()) < 1e-12);
  CHECK(frob(apply_T(s, f.r)) < 1e-11);
  Eigen::SelfAdjointEigenSolver<CMat> es(f.r);
  CHECK(es.eigenvalues().minCoeff() > -1e-12);
  CHECK(f.gap > 0.0);
  CHECK(f.correlation_length == doctest::Approx(1.0 / f.gap).epsilon(1e-12));
  CHECK(f.spectral_radius >= f.gap * (1.0 - 1e-12));
  REQUIRE(f.dense);
  REQUIRE(f.zero_index >= 0);
  CHECK(std::abs(f.evals[f.zero_index]) < 1e-10);
}

TEST_CASE("dense and iterative fixtures agree") {
  const Rcmps s = random_init(5, 0.4, 6);
  const TransferFixture fd = right_fixed_point(s);
  const TransferFixture fi = right_fixed_point(s, true);
  CHECK(fd.dense);
  CHECK_FALSE(fi.dense);
  CHECK(frob(fd.r - fi.r) < 1e-9);
  CHECK(fd.gap == doctest::Approx(fi.gap).epsilon(1e-5));
}

TEST_CASE("bond dimension beyond the dense cutoff goes iterative") {
  const Rcmps s = random_init(kDenseFixtureCutoff + 1, 0.2, 8);
  const TransferFixture f = right_fixed_point(s);
  CHECK_FALSE(f.dense);
  CHECK(std::abs(f.r.trace().real() - 1.0) < 1e-11);
  CHECK(frob(apply_T(s, f.r)) < 1e-9);
}

TEST_CASE("propagation semigroup and fixed-point invariance") {
  const Rcmps s = random_init(3, 0.5, 12);
  const TransferFixture f = right_fixed_point(s);
  const CMat M = random_mat(3, 13);

  CHECK(frob(propagate(s, f, 0.0, M) - M) < 1e-12);
  const CMat one_step = propagate(s, f, 1.1, M);
  const CMat two_step = propagate(s, f, 0.7, propagate(s, f, 0.4, M));
  CHECK(frob(one_step - two_step) < 1e-9 * (1.0 + frob(M)));
  CHECK(frob(propagate(s, f, 2.3, f.r) - f.r) < 1e-10);

  // mixing: e^{uT} M -> r tr M as u grows
  const double u = 40.0 / f.gap;
  CHECK(frob(propagate(s, f, u, M) - M.trace() * f.r) < 1e-9 * frob(M));

  // dense and Krylov propagation agree
  const TransferFixture fi = right_fixed_point(s, true);
  CHECK(frob(propagate(s, fi, 1.1, M) - one_step) < 1e-8 * (1.0 + frob(M)));
}

TEST_CASE("resolvent solves have small residuals") {
  const Rcmps s = random_init(3, 0.5, 14);
  const TransferFixture fd = right_fixed_point(s);
  const TransferFixture fi = right_fixed_point(s, true);
  CMat M = random_mat(3, 15);
  M -= (M.trace() / 3.0) * CMat::Identity(3, 3);  // traceless source

  for (const TransferFixture* f : {&fd, &fi}) {
    for (const Complex sval : {Complex(0.0, 0.9), Complex(0.4, -1.3)}) {
      const CMat X = resolvent_solve(s, *f, sval, M);
      CHECK(frob(sval * X - apply_T(s, X) - M) < 1e-8 * (1.0 + frob(M)));
    }
    const CMat W = random_mat(3, 16);
    const CMat Y = resolvent_solve_adjoint(s, *f, Complex(0.2, 0.5), W);
    CHECK(frob(std::conj(Complex(0.2, 0.5)) * Y - apply_T_adjoint(s, Y) - W) <
          1e-8 * (1.0 + frob(W)));
  }

  // k = 0 is regular on traceless input, a pole on the fixed-point direction
  CHECK_NOTHROW(resolvent_solve(s, fd, Complex(0.0, 0.0), M));
  CHECK_THROWS_AS(resolvent_solve(s, fd, Complex(0.0, 0.0), CMat::Identity(3, 3)),
                  NumericalError);
}

TEST_CASE("deflated adjoint solve stays orthogonal to the identity") {
  const Rcmps s = random_init(4, 0.4, 18);
  const TransferFixture f = right_fixed_point(s);
  CMat W = random_mat(4, 19);
  W -= (f.r.adjoint() * W).trace() * CMat::Identity(4, 4);  // tr[r W] = 0
  const CMat Y = deflated_adjoint_solve(s, f, W);
  CHECK(std::abs(Y.trace()) < 1e-9 * (1.0 + frob(Y)));
  // residual may have an identity component outside the deflated subspace
  const CMat res = apply_T_adjoint(s, Y) - W;
  const CMat proj = res - (res.trace() / 4.0) * CMat::Identity(4, 4);
  CHECK(frob(proj) < 1e-8 * (1.0 + frob(W)));
}

TEST_CASE("exactly reducible states are rejected") {
  const Rcmps s = random_init(2, 0.5, 20);
  const Rcmps padded = grow(s, 3, 0.0, 21);
  CHECK_THROWS_AS(right_fixed_point(padded), DegenerateFixedPointError);
}
