#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "rcmps/energy.hpp"
#include "rcmps/state.hpp"

using namespace rcmps;

namespace {
Rcmps coherent(double rho) {
  Rcmps s;
  s.D = 1;
  s.K = CMat::Zero(1, 1);
  s.R = CMat::Constant(1, 1, Complex(rho, 0.0));
  return s;
}
}  // namespace

TEST_CASE("coherent state observables in closed form") {
  const Rcmps s = coherent(0.3);
  const TransferFixture f = right_fixed_point(s);
  const ModelParams p{1.0, 2.0};

  CHECK(phi_expectation(s, f, p.m) ==
        doctest::Approx(0.4242640687119285).epsilon(1e-10));
  CHECK(phi2_density(s, f, *kernel_table(p.m)) ==
        doctest::Approx(0.18).epsilon(1e-7));

  const EnergyBreakdown e = energy_density(s, p);
  CHECK(e.eps_free == doctest::Approx(0.09).epsilon(1e-8));
  CHECK(e.phi4 == doctest::Approx(0.0324).epsilon(1e-6));
  CHECK(e.total == doctest::Approx(0.1548).epsilon(1e-6));
  CHECK(e.total == doctest::Approx(e.eps_free + p.g * e.phi4).epsilon(1e-14));
}

TEST_CASE("the Fock vacuum short-circuits to zero energy") {
  Rcmps s = random_init(3, 0.4, 61);
  s.R.setZero();
  const EnergyBreakdown e = energy_density(s, {1.0, 3.0});
  CHECK(e.total == 0.0);
  CHECK(e.eps_free == 0.0);
  CHECK(e.phi4 == 0.0);
}

TEST_CASE("momentum integral satisfies the Parseval identity") {
  for (std::uint64_t seed : {62u, 63u}) {
    const Rcmps s = random_init(2 + int(seed % 2), 0.5, seed);
    const TransferFixture f = right_fixed_point(s);
    const Complex c = a_expectation(s, f);
    const double want =
        pair_correlator(s, f, 0.0, PairKind::C).real() - std::norm(c);
    for (double m : {1.0, 0.7}) {
      CHECK(connected_density_integral(s, f, m) ==
            doctest::Approx(want).epsilon(1e-6));
    }
    // half-resolution rerun agrees (the convergence diagnostic)
    CHECK(connected_density_integral(s, f, 1.0, 2) ==
          doctest::Approx(want).epsilon(1e-5));
  }
}

TEST_CASE("free part dominates its coherent lower bound") {
  const Rcmps s = random_init(3, 0.5, 64);
  const TransferFixture f = right_fixed_point(s);
  const Complex c = a_expectation(s, f);
  double err = 0.0;
  const double ef = eps_free(s, f, 1.0, {}, &err);
  CHECK(ef >= 1.0 * std::norm(c) - 1e-8);  // the connected part is >= 0
  CHECK(err >= 0.0);
  CHECK(err < 1e-4 * (1.0 + std::abs(ef)));
}

TEST_CASE("energy is gauge invariant and parity even") {
  const Rcmps s = random_init(3, 0.5, 65);
  const ModelParams p{1.0, 1.5};
  const double e0 = energy_density(s, p).total;

  Eigen::SelfAdjointEigenSolver<CMat> es(random_init(3, 1.0, 66).K);
  const CMat U = es.eigenvectors();
  Rcmps t = s;
  t.K = herm(CMat(U * s.K * U.adjoint()));
  t.R = U * s.R * U.adjoint();
  CHECK(energy_density(t, p).total == doctest::Approx(e0).epsilon(1e-8));

  Rcmps neg = s;
  neg.R = -s.R;
  CHECK(energy_density(neg, p).total == doctest::Approx(e0).epsilon(1e-10));
}

TEST_CASE("energy density transforms covariantly under mass rescaling") {
  // x -> x/2 maps (K, R, m, g) -> (2K, sqrt(2) R, 2m, 4g) and multiplies the
  // energy density by 4; <:phi^4:> is invariant.
  const Rcmps s = random_init(2, 0.5, 77);
  const EnergyBreakdown e1 = energy_density(s, {1.0, 1.0});
  Rcmps t = s;
  t.K = 2.0 * s.K;
  t.R = std::sqrt(2.0) * s.R;
  const EnergyBreakdown e2 = energy_density(t, {2.0, 4.0});
  CHECK(e2.total == doctest::Approx(4.0 * e1.total).epsilon(1e-9));
  CHECK(e2.eps_free == doctest::Approx(4.0 * e1.eps_free).epsilon(1e-9));
  CHECK(e2.phi4 == doctest::Approx(e1.phi4).epsilon(1e-7));
}

TEST_CASE("two-route phi^2 stays within its disagreement budget") {
  for (std::uint64_t seed : {70u, 71u, 72u}) {
    const Rcmps s = random_init(1 + int(seed % 4), 0.5, seed);
    const TransferFixture f = right_fixed_point(s);
    double chain = 0.0;
    const double direct = phi2_density(s, f, *kernel_table(1.0), {}, &chain);
    CHECK(direct == doctest::Approx(chain).epsilon(1e-6));
  }
}

TEST_CASE("tight evaluation profile passes its internal convergence check") {
  const Rcmps s = random_init(2, 0.5, 75);
  CHECK_NOTHROW(energy_density(s, {1.0, 1.0}, EvalSettings::tight()));
}
