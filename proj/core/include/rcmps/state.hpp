#pragma once

#include <cstdint>
#include <string>

#include "rcmps/detail/types.hpp"
#include "rcmps/model.hpp"

namespace rcmps {

// Left-canonical variational state.  Parameters are (K, R) with K Hermitian;
// the drift matrix Q = -R^dag R / 2 - i K keeps Q + Q^dag + R^dag R = 0 for
// every parameter value, so the left fixed point of the transfer operator is
// the identity by construction.
struct Rcmps {
  int D = 1;
  CMat K, R;

  void validate() const;  // shape and hermiticity checks, throws
};

struct StateFileError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

CMat q_matrix(const Rcmps& s);

// Deterministic random state: K Hermitian with entries ~ scale, R with entries
// ~ scale / sqrt(D).
Rcmps random_init(int D, double scale, std::uint64_t seed);

// Embed into a larger bond dimension: original blocks kept exactly, padding
// filled with entries of magnitude `noise`.  noise = 0 produces an exactly
// reducible state, which the fixed-point solver rejects.
Rcmps grow(const Rcmps& s, int D_new, double noise, std::uint64_t seed);

// Bring a general (Q, R) pair to the left-canonical gauge: shift the dominant
// transfer eigenvalue to zero, conjugate by the left fixed point's square root.
// Throws on a degenerate dominant eigenvalue or a non-positive left fixed point.
Rcmps canonicalize(const CMat& Q, const CMat& R);

void save_state(const Rcmps& s, const ModelParams& p, const std::string& path);

struct LoadedState {
  Rcmps state;
  ModelParams params;
};
LoadedState load_state(const std::string& path);

}  // namespace rcmps
