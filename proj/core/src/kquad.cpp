#include "kquad.hpp"

#include <algorithm>
#include <cmath>

#include "rcmps/detail/quad.hpp"
#include "rcmps/model.hpp"

namespace rcmps::detail {

namespace {

struct Pole {
  double beta;   // k-position, = Im(lambda)
  double gamma;  // half-width, = |Re(lambda)|
};

// Graded panels on one side of a pole: k = pole + sgn*gamma*sinh(tau) turns
// the Lorentzian into an O(1)-scale integrand, so fixed-order panels of
// bounded tau-length suffice down to gamma ~ 1e-13.
void graded_side(KQuad& q, double pole, double gamma, double length, double sgn,
                 bool half) {
  if (length <= 0) return;
  const double tau_max = std::asinh(length / gamma);
  int n = static_cast<int>(std::ceil((half ? 1.3 : 2.6) * tau_max));
  n = std::clamp(n, half ? 4 : 8, half ? 20 : 40);
  const GlRule& rule = gl_rule(8);
  const double dtau = tau_max / n;
  for (int p = 0; p < n; ++p) {
    const double mid = (p + 0.5) * dtau, hw = 0.5 * dtau;
    for (std::size_t i = 0; i < rule.x.size(); ++i) {
      const double tau = mid + hw * rule.x[i];
      q.nodes.push_back(pole + sgn * gamma * std::sinh(tau));
      q.weights.push_back(hw * rule.w[i] * gamma * std::cosh(tau));
    }
  }
}

// Base panels over a pole-free gap [a, b], uniform in t = asinh(k/m).
void base_gap(KQuad& q, double a, double b, double m, double t_span,
              bool half) {
  if (b <= a) return;
  const double ta = std::asinh(a / m), tb = std::asinh(b / m);
  const int base = half ? 24 : 48;
  int n = static_cast<int>(std::ceil(base * (tb - ta) / t_span));
  n = std::clamp(n, half ? 2 : 4, 2 * base);
  const GlRule& rule = gl_rule(12);
  const double dt = (tb - ta) / n;
  for (int p = 0; p < n; ++p) {
    const double mid = ta + (p + 0.5) * dt, hw = 0.5 * dt;
    for (std::size_t i = 0; i < rule.x.size(); ++i) {
      const double t = mid + hw * rule.x[i];
      q.nodes.push_back(m * std::sinh(t));
      q.weights.push_back(hw * rule.w[i] * m * std::cosh(t));
    }
  }
}

}  // namespace

KQuad k_quadrature(const TransferFixture& f, double m, int resolution) {
  const bool half = resolution > 1;
  KQuad q;
  q.k_max = std::max(1000.0 * m, 4.0 * f.spectral_radius);

  double lam_scale = 1.0;
  for (const Complex& lam : f.evals)
    lam_scale = std::max(lam_scale, std::abs(lam));

  std::vector<Pole> poles;
  for (const Complex& lam : f.evals) {
    if (std::abs(lam) <= 1e-11 * lam_scale) continue;  // fixed-point mode
    const double gamma = std::max(std::abs(lam.real()), 1e-13);
    if (gamma >= 0.5 * m) continue;  // broad: the base grid resolves it
    if (std::abs(lam.imag()) > q.k_max) continue;
    poles.push_back({lam.imag(), gamma});
  }
  std::sort(poles.begin(), poles.end(), [](const Pole& a, const Pole& b) {
    return a.beta != b.beta ? a.beta < b.beta : a.gamma < b.gamma;
  });

  // Refinement intervals [beta +- 0.75 omega(beta)], merged where they
  // overlap; the union is carved out of the base-grid domain exactly.
  struct Cluster {
    double lo, hi;
    std::vector<Pole> ps;
  };
  std::vector<Cluster> clusters;
  for (const Pole& p : poles) {
    const double h = 0.75 * dispersion(p.beta, m);
    const double lo = std::max(p.beta - h, -q.k_max);
    const double hi = std::min(p.beta + h, q.k_max);
    if (hi <= lo) continue;
    if (!clusters.empty() && lo <= clusters.back().hi) {
      clusters.back().hi = std::max(clusters.back().hi, hi);
      clusters.back().ps.push_back(p);
    } else {
      clusters.push_back({lo, hi, {p}});
    }
  }

  const double t_span = 2.0 * std::asinh(q.k_max / m);
  double cursor = -q.k_max;
  for (const Cluster& c : clusters) {
    base_gap(q, cursor, c.lo, m, t_span, half);
    // Subdivide the cluster at its pole positions; each piece is graded
    // toward the pole(s) it touches.
    std::vector<Pole> ps = c.ps;  // sorted by beta, duplicates collapse below
    double x0 = c.lo;
    const Pole* left = nullptr;  // pole sitting at x0, if any
    for (std::size_t i = 0; i <= ps.size(); ++i) {
      const bool last = i == ps.size();
      const double x1 = last ? c.hi : ps[i].beta;
      if (x1 > x0) {
        if (left && !last) {
          const double mid = 0.5 * (x0 + x1);
          graded_side(q, x0, left->gamma, mid - x0, +1.0, half);
          graded_side(q, x1, ps[i].gamma, x1 - mid, -1.0, half);
        } else if (left) {
          graded_side(q, x0, left->gamma, x1 - x0, +1.0, half);
        } else {
          graded_side(q, x1, ps[i].gamma, x1 - x0, -1.0, half);
        }
      }
      if (!last) {
        if (left == nullptr || x1 > x0) {
          x0 = x1;
          left = &ps[i];
        }
        // else: same beta as the current left pole; keep the narrower one
      }
    }
    cursor = c.hi;
  }
  base_gap(q, cursor, q.k_max, m, t_span, half);
  return q;
}

KTailMoments k_tail_moments(const Rcmps& s, const CMat& mc) {
  KTailMoments t;
  CMat v = mc;
  for (int j = 1; j <= 5; ++j) {
    v = apply_T(s, v);
    if (j == 3) t.re_c3 = (v * s.R.adjoint()).trace().real();
    if (j == 5) t.re_c5 = (v * s.R.adjoint()).trace().real();
  }
  return t;
}

double k_tail_omega(const KTailMoments& t, double m, double K) {
  const double K2 = K * K;
  return t.re_c3 / (M_PI * K2) * (1.0 + m * m / (4.0 * K2)) -
         t.re_c5 / (2.0 * M_PI * K2 * K2);
}

double k_tail_one(const KTailMoments& t, double K) {
  const double K3 = K * K * K;
  return 2.0 / M_PI * (t.re_c3 / (3.0 * K3) - t.re_c5 / (5.0 * K3 * K * K));
}

}  // namespace rcmps::detail
