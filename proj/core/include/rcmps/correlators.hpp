#pragma once

#include <vector>

#include "rcmps/model.hpp"
#include "rcmps/state.hpp"
#include "rcmps/transfer.hpp"

namespace rcmps {

enum class InsertionKind { annihilation, creation };

// One operator insertion for ordered_npoint.  Positions must be pairwise
// distinct; coincident insertions are rejected.
struct Insertion {
  double position = 0;
  InsertionKind kind = InsertionKind::annihilation;
};

// <a> = tr[R r], position independent.
Complex a_expectation(const Rcmps& s, const TransferFixture& f);

// C: <a^dag(x+u) a(x)> = tr[e^{uT}(R r) R^dag]
// P: <a(x+u) a(x)>     = tr[R e^{uT}(R r)]
// Defined for u >= 0 only; C(-u) = conj C(u) and P(-u) = P(u) are the
// caller's contract.
enum class PairKind { C, P };
Complex pair_correlator(const Rcmps& s, const TransferFixture& f, double u,
                        PairKind kind);

// Connected pair density in momentum space:
//   S_c(k) = 2 Re tr[(ik - T)^{-1}(R r - <a> r) R^dag].
// Real, >= -1e-10, O(k^-4) at large k.  k = 0 is regular because the source
// is exactly traceless.
double momentum_density(const Rcmps& s, const TransferFixture& f, double k);

// Normal-ordered expectation of a product of a / a^dag insertions: sorts by
// position, starts the chain at r, applies R.M (annihilation) or M.R^dag
// (creation), propagates by e^{du T} between neighbours, traces at the end.
Complex ordered_npoint(const Rcmps& s, const TransferFixture& f,
                       std::vector<Insertion> insertions);

struct MarchOptions {
  double z_max = 0;        // truncation range; 0 picks it from kernel and gap
  double rtol = 1e-10;     // tolerance of the joint marching ODE
  double tail_tol = 1e-9;  // absolute budget for the dropped |z| > z_max tail
};

// I_n = int_{z_1<...<z_n} prod_i J(z_i) tr[chain] dz for n = 2 or 4, where the
// chain inserts B(M) = RM + MR^dag at each ordered position; <:phi^n:> comes
// out as n!.I_n.  Marches A_j' = T(A_j) + J B(A_{j-1}), A_j(-Z) = 0 jointly,
// in a square-root substitution that absorbs the kernel singularity at z = 0.
double nested_j_integral(const Rcmps& s, const TransferFixture& f, int n,
                         const KernelTable& kernel, const MarchOptions& opt = {});

}  // namespace rcmps
