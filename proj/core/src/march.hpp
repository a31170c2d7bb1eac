#pragma once

// Shared guts of the nested-J marching integrals (correlators) and their
// adjoint sweep (gradient).  Not installed.

#include "rcmps/correlators.hpp"
#include "rcmps/detail/ode.hpp"

namespace rcmps::detail {

// Substitution z = sigma t|t| with sigma = 1/m.  It flattens the |z|^{-1/2}
// kernel singularity: J(z) dz/dt = 2 sqrt(sigma) sqrtx_j(sigma t^2) is smooth
// and even in t.
struct MarchGrid {
  double sigma = 0;
  double t_end = 0;  // z(+-t_end) = +-z_max
  double z_max = 0;
};

// z_override <= 0 picks z_max from the kernel decay and the fixture gap,
// clipped to the table cutoff where J is identically zero.
MarchGrid march_grid(const KernelTable& kernel, double gap, double z_override);

inline double march_z(const MarchGrid& g, double t) {
  return g.sigma * t * std::abs(t);
}
inline double march_jacobian(const MarchGrid& g, double t) {
  return 2.0 * g.sigma * std::abs(t);  // dz/dt
}
inline double march_weight(const KernelTable& kernel, const MarchGrid& g,
                           double t) {
  return 2.0 * std::sqrt(g.sigma) * kernel.sqrtx_j(g.sigma * t * t);
}

inline CMat b_chain(const CMat& R, const CMat& M) {
  return R * M + M * R.adjoint();
}

// Forward solution of A_j' = T(A_j) + J B(A_{j-1}), A_j(-Z) = 0, j = 1..n-1,
// with the running integral of J tr[B(A_{n-1})] carried as the last state
// component.  Integrated in t, split at the t = 0 kink of the substitution.
struct ForwardMarch {
  int n = 0;
  int D = 0;
  MarchGrid grid;
  OdeSolution neg, pos;  // t in [-t_end, 0] and [0, t_end]
  Complex value;         // I_n, imaginary part at noise level

  CMat a_matrix(int j, double t) const;  // A_j(z(t)), j in 1..n-1
};

ForwardMarch march_forward(const Rcmps& s, const TransferFixture& f, int n,
                           const KernelTable& kernel, const MarchGrid& grid,
                           double rtol, bool dense);

}  // namespace rcmps::detail
