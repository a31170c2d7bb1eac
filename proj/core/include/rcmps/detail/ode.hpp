#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "rcmps/detail/types.hpp"

namespace rcmps::detail {

// Dormand-Prince 5(4) with the standard quartic continuous extension.
// Supports decreasing integration direction (t1 < t0).

struct OdeOptions {
  double rtol = 1e-10;
  double atol = 1e-13;
  double h0 = 0;     // 0 -> automatic
  double hmax = std::numeric_limits<double>::infinity();
  long max_steps = 2000000;
};

struct DenseStep {
  double t0, h;            // step covers [t0, t0+h] (h may be negative)
  CVec c0, c1, c2, c3, c4; // y(t0+th*h) = c0 + th*(c1 + (1-th)*(c2 + th*(c3 + (1-th)*c4)))
};

class OdeSolution {
 public:
  double t_begin = 0, t_end = 0;
  CVec y_end;
  std::vector<DenseStep> steps;  // empty unless dense output requested

  CVec eval(double t) const {
    if (steps.empty()) throw NumericalError("ode: dense output not stored");
    // Steps are ordered along the integration direction; binary search on t0.
    const bool fwd = t_end >= t_begin;
    std::size_t lo = 0, hi = steps.size() - 1;
    while (lo < hi) {
      std::size_t mid = (lo + hi + 1) / 2;
      bool before = fwd ? (steps[mid].t0 <= t) : (steps[mid].t0 >= t);
      if (before)
        lo = mid;
      else
        hi = mid - 1;
    }
    const DenseStep& s = steps[lo];
    double th = (t - s.t0) / s.h;
    th = std::clamp(th, 0.0, 1.0);
    return s.c0 + th * (s.c1 + (1.0 - th) * (s.c2 + th * (s.c3 + (1.0 - th) * s.c4)));
  }
};

// f(t, y, dy) fills dy.
template <class RHS>
OdeSolution ode_integrate(RHS&& f, double t0, double t1, CVec y0,
                          const OdeOptions& opt = {}, bool dense = false) {
  OdeSolution sol;
  sol.t_begin = t0;
  sol.t_end = t1;
  if (t1 == t0) {
    sol.y_end = std::move(y0);
    return sol;
  }
  const double dir = t1 > t0 ? 1.0 : -1.0;
  const double span = std::abs(t1 - t0);

  const Eigen::Index n = y0.size();
  CVec k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), y1(n);

  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                          a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                          a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                          a75 = -2187.0 / 6784, a76 = 11.0 / 84;
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
  // Continuous-extension weights (Hairer-Norsett-Wanner, DOPRI5 output).
  static constexpr double d1 = -12715105075.0 / 11282082432.0,
                          d3 = 87487479700.0 / 32700410799.0,
                          d4 = -10690763975.0 / 1880347072.0,
                          d5 = 701980252875.0 / 199316789632.0,
                          d6 = -1453857185.0 / 822651844.0,
                          d7 = 69997945.0 / 29380423.0;

  double t = t0;
  double h = opt.h0 > 0 ? dir * std::min(opt.h0, span) : dir * std::min(span / 100, opt.hmax);
  if (h == 0) h = dir * span / 100;

  f(t, y0, k1);
  bool rejected = false;
  long nsteps = 0;
  while (dir * (t1 - t) > 0) {
    if (++nsteps > opt.max_steps) throw NumericalError("ode: max step count exceeded");
    if (std::abs(h) > opt.hmax) h = dir * opt.hmax;
    if (dir * (t + h - t1) > 0) h = t1 - t;

    ytmp = y0 + h * a21 * k1;
    f(t + c2 * h, ytmp, k2);
    ytmp = y0 + h * (a31 * k1 + a32 * k2);
    f(t + c3 * h, ytmp, k3);
    ytmp = y0 + h * (a41 * k1 + a42 * k2 + a43 * k3);
    f(t + c4 * h, ytmp, k4);
    ytmp = y0 + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    f(t + c5 * h, ytmp, k5);
    ytmp = y0 + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    f(t + h, ytmp, k6);
    y1 = y0 + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    f(t + h, y1, k7);

    double err = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      Complex e = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] +
                       e6 * k6[i] + e7 * k7[i]);
      double sc = opt.atol + opt.rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
      double q = std::abs(e) / sc;
      err += q * q;
    }
    err = std::sqrt(err / static_cast<double>(n));

    if (err <= 1.0) {
      if (dense) {
        DenseStep st;
        st.t0 = t;
        st.h = h;
        st.c0 = y0;
        st.c1 = y1 - y0;
        st.c2 = h * k1 - st.c1;
        st.c3 = st.c1 - h * k7 - st.c2;
        st.c4 = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
        sol.steps.push_back(std::move(st));
      }
      t += h;
      y0.swap(y1);
      k1.swap(k7);  // FSAL
      double fac = err > 0 ? 0.9 * std::pow(err, -0.2) : 5.0;
      fac = std::clamp(fac, 0.2, rejected ? 1.0 : 5.0);
      h *= fac;
      rejected = false;
    } else {
      double fac = std::clamp(0.9 * std::pow(err, -0.2), 0.2, 1.0);
      h *= fac;
      rejected = true;
      if (std::abs(h) < 1e-14 * std::max(1.0, std::abs(t)))
        throw NumericalError("ode: step size underflow");
    }
  }
  sol.y_end = std::move(y0);
  return sol;
}

}  // namespace rcmps::detail
