#pragma once

#include "rcmps/detail/types.hpp"
#include "rcmps/state.hpp"

namespace rcmps {

// T(M) = QM + MQ^dag + RMR^dag, applied matrix-free in O(D^3).
CMat apply_T(const Rcmps& s, const CMat& M);
CMat apply_T_adjoint(const Rcmps& s, const CMat& M);  // Q^dag Y + YQ + R^dag YR

// Same maps with Q fixed by the caller; used by inner ODE loops that would
// otherwise rebuild Q from (K, R) on every evaluation.
CMat apply_T(const CMat& Q, const CMat& R, const CMat& M);
CMat apply_T_adjoint(const CMat& Q, const CMat& R, const CMat& M);

/// D^2 x D^2 matrix of T in the column-major vec convention:
// kron(I, Q) + kron(conj(Q), I) + kron(conj(R), R).
CMat dense_transfer_qr(const CMat& Q, const CMat& R);

struct DegenerateFixedPointError : NumericalError {
  using NumericalError::NumericalError;
};

// Right fixed point plus cached spectral data.  For D <= dense cutoff the full
// eigendecomposition of the vectorized transfer matrix is stored and every
// propagation / resolvent solve goes through it; beyond the cutoff only r and a
// Ritz estimate of the gap are kept and solves fall back to Krylov iterations.
struct TransferFixture {
  int D = 1;
  CMat r;                      // Hermitian, PSD, tr r = 1, T(r) = 0
  double gap = 0;              // -max Re of the nonzero transfer spectrum
  double correlation_length = 0;  // 1 / gap
  double spectral_radius = 0;  // max |lambda|

  bool dense = false;
  CVec evals;       // D^2 eigenvalues (dense path)
  CMat V, Vinv;     // T = V diag(evals) Vinv
  int zero_index = -1;
};

inline constexpr int kDenseFixtureCutoff = 16;

TransferFixture right_fixed_point(const Rcmps& s);
TransferFixture right_fixed_point(const Rcmps& s, bool force_iterative);

// e^{uT}(M).  Dense fixtures use the exact spectral transform; otherwise the
// flow is integrated adaptively.
CMat propagate(const Rcmps& s, const TransferFixture& f, double u, const CMat& M,
               double rtol = 1e-11);

// X with (s - T)(X) = M.  The input must have no component on the fixed-point
// direction (tr M = 0), otherwise s near 0 is a genuine pole and the call throws.
CMat resolvent_solve(const Rcmps& s, const TransferFixture& f, Complex sval,
                     const CMat& M);

// Y with (conj(s) - T^dag)(Y) = W.  Used by the adjoint sweep of the gradient.
CMat resolvent_solve_adjoint(const Rcmps& s, const TransferFixture& f, Complex sval,
                             const CMat& W);

// Y in the orthogonal complement of the identity with T^dag(Y) = W, where W must
// satisfy tr[r W] = 0.  Used by the fixed-point adjoint.
CMat deflated_adjoint_solve(const Rcmps& s, const TransferFixture& f, const CMat& W);

}  // namespace rcmps
