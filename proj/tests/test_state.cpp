#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "rcmps/correlators.hpp"
#include "rcmps/state.hpp"
#include "rcmps/transfer.hpp"

using namespace rcmps;

namespace {
std::string temp_path(const char* stem) {
  return (std::filesystem::temp_directory_path() /
          (std::string(stem) + std::to_string(::getpid()) + ".json"))
      .string();
}
}  // namespace

TEST_CASE("random init is deterministic and seed sensitive") {
  const Rcmps a = random_init(4, 0.1, 7);
  const Rcmps b = random_init(4, 0.1, 7);
  const Rcmps c = random_init(4, 0.1, 8);
  CHECK(frob(a.K - b.K) == 0.0);
  CHECK(frob(a.R - b.R) == 0.0);
  CHECK(frob(a.K - c.K) > 1e-6);
  CHECK(frob(a.R - c.R) > 1e-6);
  CHECK_NOTHROW(a.validate());
  CHECK(frob(a.K - a.K.adjoint()) == 0.0);
}

TEST_CASE("validate rejects malformed states") {
  Rcmps s = random_init(3, 0.2, 1);
  Rcmps bad = s;
  bad.K(0, 1) += Complex(0.1, 0.0);  // breaks hermiticity
  CHECK_THROWS(bad.validate());
  bad = s;
  bad.R.resize(2, 3);
  CHECK_THROWS(bad.validate());
  bad = s;
  bad.D = 0;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("drift matrix closes the left-canonical identity") {
  for (int D : {1, 2, 5}) {
    const Rcmps s = random_init(D, 0.4, 17 + D);
    const CMat Q = q_matrix(s);
    const CMat zero = Q + Q.adjoint() + s.R.adjoint() * s.R;
    CHECK(frob(zero) < 1e-14 * (1.0 + frob(Q)));
  }
}

TEST_CASE("grow embeds the original blocks exactly") {
  const Rcmps s = random_init(3, 0.3, 5);
  const Rcmps big = grow(s, 5, 0.01, 9);
  CHECK(big.D == 5);
  CHECK(CMat(big.K.topLeftCorner(3, 3) - s.K).norm() == 0.0);
  CHECK(CMat(big.R.topLeftCorner(3, 3) - s.R).norm() == 0.0);
  CHECK(frob(big.K - big.K.adjoint()) < 1e-15);
  // padding is small but nonzero, keeping the state irreducible
  CHECK(big.R.bottomRightCorner(2, 2).norm() > 0.0);
  CHECK(big.R.bottomRightCorner(2, 2).norm() < 0.1);
  CHECK_THROWS(grow(s, 2, 0.01, 9));  // cannot shrink
}

TEST_CASE("state file round-trip is exact") {
  const Rcmps s = random_init(4, 0.37, 123);
  const ModelParams p{1.5, 2.25};
  const std::string path = temp_path("rt");
  save_state(s, p, path);
  const LoadedState back = load_state(path);
  CHECK(back.state.D == 4);
  CHECK(frob(back.state.K - s.K) == 0.0);
  CHECK(frob(back.state.R - s.R) == 0.0);
  CHECK(back.params.m == p.m);
  CHECK(back.params.g == p.g);
  std::filesystem::remove(path);
}

TEST_CASE("state file errors") {
  CHECK_THROWS_AS(load_state("/nonexistent/dir/x.json"), StateFileError);
  const std::string path = temp_path("bad");
  {
    std::ofstream out(path);
    out << "{\"format\": \"rcmps-state\", \"version\": 1, \"D\": 2}";
  }
  CHECK_THROWS_AS(load_state(path), StateFileError);
  {
    std::ofstream out(path);
    out << "not json at all";
  }
  CHECK_THROWS_AS(load_state(path), StateFileError);
  std::filesystem::remove(path);
}

TEST_CASE("canonicalize undoes gauge and normalization changes") {
  const Rcmps s = random_init(3, 0.4, 11);
  const CMat Q0 = q_matrix(s);

  // invertible gauge plus a real shift of Q (pure normalization change)
  CMat G = CMat::Identity(3, 3) + 0.25 * random_init(3, 1.0, 99).K;
  const CMat Ginv = G.inverse();
  const CMat Q1 = G * Q0 * Ginv + Complex(0.07, 0.0) * CMat::Identity(3, 3);
  const CMat R1 = G * s.R * Ginv;

  const Rcmps out = canonicalize(Q1, R1);
  const CMat Qo = q_matrix(out);
  CHECK(frob(Qo + Qo.adjoint() + out.R.adjoint() * out.R) < 1e-10);

  // physical observables are gauge invariant
  const TransferFixture fa = right_fixed_point(s);
  const TransferFixture fb = right_fixed_point(out);
  const Complex ca = a_expectation(s, fa);
  const Complex cb = a_expectation(out, fb);
  CHECK(std::abs(ca - cb) < 1e-8);
  CHECK(std::abs(pair_correlator(s, fa, 0.7, PairKind::C) -
                 pair_correlator(out, fb, 0.7, PairKind::C)) < 1e-8);
  CHECK(momentum_density(s, fa, 1.3) ==
        doctest::Approx(momentum_density(out, fb, 1.3)).epsilon(1e-7));
}

TEST_CASE("canonicalize of a canonical state is a fixed point up to basis") {
  const Rcmps s = random_init(2, 0.5, 21);
  const Rcmps out = canonicalize(q_matrix(s), s.R);
  const TransferFixture fa = right_fixed_point(s);
  const TransferFixture fb = right_fixed_point(out);
  CHECK(std::abs(a_expectation(s, fa) - a_expectation(out, fb)) < 1e-9);
  CHECK(fa.gap == doctest::Approx(fb.gap).epsilon(1e-7));
}

TEST_CASE("canonicalize rejects a reducible pair") {
  // two identical decoupled blocks: dominant transfer eigenvalue degenerate
  CMat Q = CMat::Zero(2, 2), R = CMat::Zero(2, 2);
  const Complex rho(0.4, 0.1);
  Q(0, 0) = Q(1, 1) = -0.5 * std::norm(rho);
  R(0, 0) = R(1, 1) = rho;
  CHECK_THROWS_AS(canonicalize(Q, R), DegenerateFixedPointError);
}
