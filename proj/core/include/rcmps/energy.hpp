#pragma once

#include "rcmps/correlators.hpp"

namespace rcmps {

// Evaluation profile for the observable integrals; tighter costs more.
struct EvalSettings {
  double march_rtol = 1e-10;
  double march_tail_tol = 1e-9;
  bool convergence_check = false;  // rerun the k-quadrature at half resolution

  static EvalSettings fast() { return {1e-8, 1e-7, false}; }
  static EvalSettings standard() { return {}; }
  static EvalSettings tight() { return {1e-11, 1e-10, true}; }
};

struct EnergyBreakdown {
  double eps_free = 0;  // m|<a>|^2 + (1/2pi) int omega_k S_c dk
  double phi4 = 0;      // <:phi^4:> = 4!.I_4
  double total = 0;     // eps_free + g.phi4
  double tol = 0;       // achieved absolute error estimate
};

// Free-part energy density; finite because S_c = O(k^-4).
double eps_free(const Rcmps& s, const TransferFixture& f, double m,
                const EvalSettings& opt = {}, double* err = nullptr);

// <phi> = 2 Re<a> (2m)^{-1/2}
double phi_expectation(const Rcmps& s, const TransferFixture& f, double m);

/// <:phi^2:> computed both from the pair correlator against W2 and as 2 I_2;
// returns the former and optionally reports the latter, throws
// MethodDisagreementError past 1e-6 relative.
double phi2_density(const Rcmps& s, const TransferFixture& f,
                    const KernelTable& kernel, const EvalSettings& opt = {},
                    double* chain_route = nullptr);

// (1/2pi) int S_c dk including the analytic tail; equals C(0) - |<a>|^2 by
// Parseval.  resolution 2 halves the grid (convergence diagnostics).
double connected_density_integral(const Rcmps& s, const TransferFixture& f,
                                  double m, int resolution = 1);

// total = eps_free + g.4!.I_4, with its own fixture and kernel; R = 0 short-
// circuits to the exact vacuum values.
EnergyBreakdown energy_density(const Rcmps& s, const ModelParams& p,
                               const EvalSettings& opt = {});

}  // namespace rcmps
