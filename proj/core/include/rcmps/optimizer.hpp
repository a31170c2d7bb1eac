#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "rcmps/gradient.hpp"
#include "rcmps/transfer.hpp"

namespace rcmps {

enum class StopReason {
  grad_converged,
  energy_plateau,
  max_iters,
  line_search_failure,
};

const char* to_string(StopReason r);

struct OptimOptions {
  int max_iters = 500;
  double grad_tol = 1e-6;     // max-norm of the packed gradient
  double energy_tol = 1e-10;  // relative plateau window over 20 iterations
  double step_init = 0.1;
  double precondition_eps = 0.0;  // 0 picks 1e-6 tr(r)/D per state
  std::uint64_t seed = 0;  // recorded by drivers that materialize the init
  EvalSettings eval;
  std::ostream* progress = nullptr;
  int progress_every = 10;
};

struct OptimReport {
  Rcmps state;
  double energy = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  StopReason termination = StopReason::max_iters;
  std::vector<double> energy_trace;  // energy after each accepted step
};

// Tangent-space metric inverse applied to a gradient: the R block is
// right-multiplied by (r + eps I)^{-1}, the K block is rescaled by the
// symmetrized eigenvalue weights of r.  Positive eps keeps the map positive
// definite, so the output still points downhill.
Gradient precondition(const Gradient& g, const TransferFixture& f, double eps);

// Quasi-Newton energy minimization: limited-memory curvature correction on
// top of the tangent-space metric, with growth caps along nearly unoccupied
// directions of r and an Armijo backtracking line search.  The energy trace
// is non-increasing by construction.  Deterministic for identical inputs.
OptimReport minimize(Rcmps s, const ModelParams& p, const OptimOptions& o = {});

struct SweepCell {
  double g = 0.0;
  int D = 1;
  bool converged = false;  // at least one candidate optimization finished
  double energy = 0.0;
  double phi = 0.0;
  double phi2 = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  StopReason termination = StopReason::max_iters;
  double wall_time_s = 0.0;  // summed over this cell's candidate runs
  std::string error;  // first candidate failure when nothing converged
};

struct SweepOptions {
  std::vector<double> couplings;
  std::vector<int> bond_dims;
  OptimOptions optim;
  int threads = 4;
  std::uint64_t seed = 71;
  std::ostream* progress = nullptr;
  // Called from the driver thread as each cell is finalized (flush hooks).
  std::function<void(const SweepCell&)> on_cell;
};

// Phase-diagram driver over the (coupling, bond dimension) grid.  Cells are
// processed in anti-diagonal waves; each cell minimizes from a cold start, a
// warm start at the previous coupling, a growth of the previous bond
// dimension, and a symmetry-biased seed, keeping the lowest energy.  Results
// are deterministic for a fixed seed regardless of the thread count.
std::vector<SweepCell> sweep(const ModelParams& base, const SweepOptions& o);

}  // namespace rcmps
