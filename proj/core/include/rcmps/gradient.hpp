#pragma once

#include "rcmps/energy.hpp"

namespace rcmps {

// Energy-density derivatives in the constrained parametrization
// Q = -1/2 R^dag R - iK.
struct Gradient {
  CMat dK;  // Hermitian; pairs as dF = tr[dK dK_variation]
  CMat dR;  // pairs as dF = 2 Re tr[dR^dag dR_variation]; descent is R -= eta dR
};

// Reverse accumulation through the fixed point, the k-quadrature with its
// tail moments, and the marching ODEs; costs a small multiple of
// energy_density.  energy_out, if given, receives the matching energy total.
Gradient energy_gradient(const Rcmps& s, const ModelParams& p,
                         const EvalSettings& opt = {},
                         double* energy_out = nullptr);

// Energy total alone, by the same arithmetic path as energy_gradient's
// energy_out but without any adjoint work.  Intended for line-search trials:
// values are directly comparable across the two evaluators, and the g = 0
// case skips the interaction chain entirely.
double objective_value(const Rcmps& s, const ModelParams& p,
                       const EvalSettings& opt = {});

// Central differences of energy_density over all 3D^2 real coordinates.
Gradient fd_gradient(const Rcmps& s, const ModelParams& p, double step);

// Real coordinate chart shared by fd_gradient, the optimizer and the tests:
// [K_pp | Re K_pq (p<q) | Im K_pq (p<q) | Re R | Im R].
RVec pack_params(const CMat& K, const CMat& R);
void unpack_params(const RVec& x, int D, CMat& K, CMat& R);

// Per-coordinate dF/dx in the same chart (the factor-2 bookkeeping between
// matrix pairings and real coordinates lives here and nowhere else).
RVec pack_gradient(const Gradient& g);

}  // namespace rcmps
