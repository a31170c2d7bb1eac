#pragma once

#include <memory>
#include <vector>

#include "rcmps/detail/types.hpp"

namespace rcmps {

struct ModelParams {
  double m = 1.0;  // mass, > 0
  double g = 0.0;  // quartic coupling, >= 0
  void validate() const;  // throws std::invalid_argument
};

// Relativistic dispersion sqrt(m^2 + k^2).
double dispersion(double k, double m);

// Modified Bessel function K0, z > 0.  Series below the switchover, asymptotic
// expansion above; relative accuracy ~1e-9 over the full range.
double bessel_K0(double z);

// Half-integral smearing kernel J(x) = (1/2pi) Int dk e^{ikx} (2 w_k)^{-1/2}.
// Evaluated through the rotated-contour representation
//   J(x) = (2/pi) Int_0^inf s^2 (2m + s^4)^{-1/4} e^{-(m + s^4) x} ds,
// which is non-oscillatory and accurate at machine precision for all x > 0.
// J(0) = +inf (the x^{-1/2} singularity); kernel_J(0, m) returns infinity.
double kernel_J(double x, double m);

// Pair kernel W2(u) = K0(m|u|) / (2pi) = Int J(y) J(y - u) dy.  u = 0 is
// logarithmically singular and rejected.
double kernel_W2(double u, double m);

// Tabulated J with spline interpolation.  Near zero the smooth combination
// sqrt(x)*J(x) is interpolated in the variable xi = sqrt(m x); in the decay
// region log J is interpolated; beyond the cutoff J is treated as zero.
class KernelTable {
 public:
  static KernelTable build(double m);

  double mass() const { return m_; }
  double operator()(double x) const;   // J(|x|); +inf at x = 0; 0 beyond cutoff
  double sqrtx_j(double x) const;      // sqrt(|x|)*J(|x|), finite at 0
  double integral() const;             // Int_R J dx = (2m)^{-1/2}
  double cutoff() const { return cutoff_; }

  double decay_rate = 0;      // exponential decay rate of J (= m)
  double singular_coeff = 0;  // c in J ~ c |x|^{-1/2} as x -> 0
  std::vector<double> grid;   // sample abscissae, increasing, > 0
  std::vector<double> values; // J at the sample abscissae

 private:
  double m_ = 1;
  double cutoff_ = 0;       // x beyond which J is treated as 0
  double x_break_ = 0;      // near/far zone boundary
  double integral_ = 0;
  // near zone: spline of h(xi) = sqrt(x)*J(x) at unit mass, xi = sqrt(x), uniform
  std::vector<double> near_y_, near_y2_;
  double near_dxi_ = 0;
  // far zone: spline of log J at unit mass, uniform in x
  std::vector<double> far_y_, far_y2_;
  double far_x0_ = 0, far_dx_ = 0;

  double h_unit(double xi) const;      // sqrt(x)*J(x) at unit mass, xi = sqrt(x)
  double logj_unit(double x) const;
};

// Shared per-mass table registry (tables are immutable once built).
std::shared_ptr<const KernelTable> kernel_table(double m);

}  // namespace rcmps
