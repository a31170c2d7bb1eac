#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <mutex>
#include <stdexcept>
#include <vector>

namespace rcmps::detail {

// Gauss-Legendre rule on [-1,1].  Nodes by Newton iteration on P_n; cached per order.
struct GlRule {
  std::vector<double> x, w;
};

inline const GlRule& gl_rule(int n) {
  static std::map<int, GlRule> cache;
  static std::mutex mu;  // sweep workers request rules concurrently
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;

  GlRule r;
  r.x.resize(n);
  r.w.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double p0 = 0, p1 = 0;
    for (int iter = 0; iter < 100; ++iter) {
      p0 = 1.0;
      p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      double dp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    p0 = 1.0;
    p1 = x;
    for (int k = 2; k <= n; ++k) {
      double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    double dp = n * (x * p1 - p0) / (x * x - 1.0);
    r.x[i] = -x;
    r.x[n - 1 - i] = x;
    r.w[i] = r.w[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return cache.emplace(n, std::move(r)).first->second;
}

template <class F>
double gl_panel(F&& f, double a, double b, const GlRule& r) {
  double mid = 0.5 * (a + b), half = 0.5 * (b - a), s = 0;
  for (std::size_t i = 0; i < r.x.size(); ++i) s += r.w[i] * f(mid + half * r.x[i]);
  return s * half;
}

template <class F>
double gl_panel(F&& f, double a, double b, int order) {
  return gl_panel(f, a, b, gl_rule(order));
}

/// Adaptive bisection: panel accepted when GL-12 on it matches the sum of GL-12
// on its halves.  Suited to mildly singular integrands; not oscillatory tails.
template <class F>
double integrate_adaptive(F&& f, double a, double b, double rtol, double atol,
                          int max_depth = 40) {
  const GlRule& rule = gl_rule(12);
  struct Seg {
    double a, b, val;
    int depth;
  };
  double whole = gl_panel(f, a, b, rule);
  std::vector<Seg> stack{{a, b, whole, 0}};
  double total = 0, scale = std::abs(whole);
  while (!stack.empty()) {
    Seg s = stack.back();
    stack.pop_back();
    double mid = 0.5 * (s.a + s.b);
    double left = gl_panel(f, s.a, mid, rule);
    double right = gl_panel(f, mid, s.b, rule);
    double err = std::abs(left + right - s.val);
    if (err < atol + rtol * std::max(scale, std::abs(left + right)) ||
        s.depth >= max_depth) {
      total += left + right;
    } else {
      stack.push_back({s.a, mid, left, s.depth + 1});
      stack.push_back({mid, s.b, right, s.depth + 1});
    }
  }
  return total;
}

}  // namespace rcmps::detail
