#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "rcmps/energy.hpp"
#include "rcmps/oracle.hpp"
#include "rcmps/state.hpp"

using namespace rcmps;

TEST_CASE("coherent closed forms") {
  const CoherentValues v = coherent_values(Complex(0.3, 0.0), {1.0, 2.0});
  CHECK(v.phi == doctest::Approx(0.4242640687119285).epsilon(1e-14));
  CHECK(v.phi2 == doctest::Approx(0.18).epsilon(1e-14));
  CHECK(v.energy == doctest::Approx(0.1548).epsilon(1e-14));

  // complex rho, non-unit mass: phi = 2 Re rho / sqrt(2m)
  const CoherentValues w = coherent_values(Complex(0.2, 0.3), {2.0, 1.0});
  CHECK(w.phi == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(w.phi2 == doctest::Approx(0.04).epsilon(1e-14));
  CHECK(w.energy == doctest::Approx(2.0 * 0.13 + 0.2 * 0.2 * 0.2 * 0.2)
                        .epsilon(1e-14));
}

TEST_CASE("coherent closed forms match the production evaluator") {
  const Complex rho(0.22, -0.14);
  const ModelParams p{1.3, 0.8};
  const CoherentValues v = coherent_values(rho, p);
  Rcmps s;
  s.D = 1;
  s.K = CMat::Zero(1, 1);
  s.R = CMat::Constant(1, 1, rho);
  const TransferFixture f = right_fixed_point(s);
  CHECK(phi_expectation(s, f, p.m) == doctest::Approx(v.phi).epsilon(1e-10));
  CHECK(phi2_density(s, f, *kernel_table(p.m)) ==
        doctest::Approx(v.phi2).epsilon(1e-7));
  CHECK(energy_density(s, p).total == doctest::Approx(v.energy).epsilon(1e-7));
}

TEST_CASE("second-order coefficient in closed form and by quadrature") {
  const double closed = -21.0 * std::riemann_zeta(3.0) /
                        (16.0 * M_PI * M_PI * M_PI);
  CHECK(pt2_coefficient() == doctest::Approx(closed).epsilon(1e-13));
  CHECK(pt2_coefficient() == doctest::Approx(-0.0509).epsilon(2e-3));
  CHECK(pt2_coefficient_quadrature() ==
        doctest::Approx(pt2_coefficient()).epsilon(1e-6));
}

TEST_CASE("brute-force energy agrees with the production evaluator") {
  for (std::uint64_t seed : {110u, 111u}) {
    const Rcmps s = random_init(2, 0.5, seed);
    const ModelParams p{1.0, 1.0};
    const BruteForceBreakdown bf = bruteforce_energy(s, p);
    const EnergyBreakdown e = energy_density(s, p);
    CHECK(bf.eps_free == doctest::Approx(e.eps_free).epsilon(1e-6));
    CHECK(bf.phi4 == doctest::Approx(e.phi4).epsilon(1e-4));
    CHECK(bf.total == doctest::Approx(e.total).epsilon(1e-5));
  }
  CHECK_THROWS_AS(bruteforce_energy(random_init(3, 0.3, 112), {1.0, 1.0}),
                  std::invalid_argument);
}

TEST_CASE("hamiltonian truncation at zero coupling is the free vacuum") {
  const HtResult r = ht_reference({6.0, 8.0, 1.0, 0.0, 200000});
  CHECK(std::abs(r.value) < 1e-12);
  CHECK(r.band_lo <= r.value);
  CHECK(r.value <= r.band_hi);
  CHECK(r.basis_size >= 2);  // at least vacuum plus one pair state
}

TEST_CASE("hamiltonian truncation pushes below zero at weak coupling") {
  const HtResult r = ht_reference({6.0, 8.0, 1.0, 0.2, 200000});
  CHECK(r.value < 0.0);
  CHECK(r.value > -0.01);
  CHECK(r.band_lo <= r.value);
  CHECK(r.value <= r.band_hi);
  CHECK(r.band_hi < 0.0);
}

TEST_CASE("hamiltonian truncation basis grows with the energy cutoff") {
  int small = 0, large = 0;
  ht_ground_energy({6.0, 8.0, 1.0, 0.1, 200000}, &small);
  ht_ground_energy({6.0, 11.0, 1.0, 0.1, 200000}, &large);
  CHECK(small >= 2);
  CHECK(large > small);
  CHECK_THROWS_AS(ht_ground_energy({10.0, 14.0, 1.0, 0.1, 10}), NumericalError);
  CHECK_THROWS_AS(ht_ground_energy({-1.0, 8.0, 1.0, 0.1, 1000}),
                  std::invalid_argument);
}

TEST_CASE("truncation band brackets second-order perturbation theory") {
  const double g = 0.1;
  const HtResult r = ht_reference({10.0, 14.0, 1.0, g, 200000});
  const double pred = pt2_coefficient() * g * g;
  CHECK(r.band_lo <= pred);
  CHECK(pred <= r.band_hi);
}
