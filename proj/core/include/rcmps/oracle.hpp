#pragma once

#include "rcmps/model.hpp"
#include "rcmps/state.hpp"

namespace rcmps {

// Closed forms for the D = 1 state with parameter rho (R = [rho]): the state
// is coherent, so every normal-ordered observable is a polynomial in
// phi = 2 Re(rho) / sqrt(2m).
struct CoherentValues {
  double energy = 0.0;
  double phi = 0.0;
  double phi2 = 0.0;
};
CoherentValues coherent_values(Complex rho, const ModelParams& p);

// Independent energy evaluation for D <= 2: dense eigendecomposition of the
// transfer matrix, adaptive momentum-space quadrature for the free part, and
// a fixed-step trapezoid chain with Richardson extrapolation for the quartic
// term.  Shares nothing with the production evaluator except the smearing
// kernel table.
struct BruteForceBreakdown {
  double eps_free = 0.0;
  double phi4 = 0.0;  // <:phi^4:>
  double total = 0.0;
};
BruteForceBreakdown bruteforce_energy(const Rcmps& s, const ModelParams& p);

// Second-order perturbative coefficient: e(g) = c2 g^2 / m^2 + O(g^3) around
// the free vacuum.  The closed form is -21 zeta(3) / (16 pi^3); the
// quadrature version integrates the radial kernel-moment reduction of the
// defining three-momentum integral, sharing nothing with the closed form but
// the Bessel evaluator.
double pt2_coefficient();
double pt2_coefficient_quadrature();

// Hamiltonian truncation on a circle of circumference L: zero-momentum,
// even-particle Fock states with free energy <= E_T, H = H0 + g V with V the
// normal-ordered quartic.  value is the ground energy density at E_T; the
// band widens it by the change between 0.8 E_T and E_T, which tracks the
// truncation error.
struct HtSpec {
  double L = 10.0;
  double E_T = 14.0;
  double m = 1.0;
  double g = 0.0;
  int max_basis = 200000;
};

struct HtResult {
  double value = 0.0;
  double band_lo = 0.0;
  double band_hi = 0.0;
  int basis_size = 0;
};

double ht_ground_energy(const HtSpec& spec, int* basis_size = nullptr);
HtResult ht_reference(const HtSpec& spec);

}  // namespace rcmps
