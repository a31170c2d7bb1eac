#pragma once

// Quadrature for (1/2pi) int w(k) S_c(k) dk over [-k_max, k_max] plus the
// analytic |k| > k_max tail.  S_c has Lorentzian features of width
// |Re lambda| at k = Im lambda for every transfer mode, so the grid is a
// partition: graded refinements around each narrow mode, a sinh-mapped base
// grid on the complement.  Not installed.

#include <vector>

#include "rcmps/state.hpp"
#include "rcmps/transfer.hpp"

namespace rcmps::detail {

struct KQuad {
  std::vector<double> nodes;
  std::vector<double> weights;  // plain dk weights, no 1/2pi
  double k_max = 0;
};

// resolution 1 is production; 2 halves every panel count (convergence check).
// The grid depends only on (fixture spectrum, m), never on the weight w.
KQuad k_quadrature(const TransferFixture& f, double m, int resolution = 1);

// Moments c_j = tr[T^j(M_c) R^dag] of the resolvent expansion; the
// symmetrized large-k density is S_c(k) + S_c(-k) = 4Re(c3)/k^4 - 4Re(c5)/k^6
// up to O(k^-8).
struct KTailMoments {
  double re_c3 = 0;
  double re_c5 = 0;
};

KTailMoments k_tail_moments(const Rcmps& s, const CMat& mc);

// (1/2pi) int_{|k|>K} w(k) S_c(k) dk, both sides, for w = omega_k and w = 1.
double k_tail_omega(const KTailMoments& t, double m, double K);
double k_tail_one(const KTailMoments& t, double K);

}  // namespace rcmps::detail
