#include "rcmps/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <stdexcept>

#include "rcmps/detail/quad.hpp"

namespace rcmps {

namespace {

constexpr double kEulerGamma = 0.57721566490153286061;
constexpr double kSingularCoeff = 0.28209479177387814;  // 1/(2 sqrt(pi))

// Not-a-knot cubic spline on a uniform grid: returns second derivatives.
std::vector<double> spline_second_derivs(const std::vector<double>& y, double h) {
  const int n = static_cast<int>(y.size());
  std::vector<double> M(n, 0.0);
  if (n < 4) return M;
  auto d = [&](int i) { return 6.0 * (y[i - 1] - 2.0 * y[i] + y[i + 1]) / (h * h); };
  // Not-a-knot endpoints collapse the first and last interior equations.
  M[1] = d(1) / 6.0;
  M[n - 2] = d(n - 2) / 6.0;
  if (n > 4) {
    const int m = n - 4;  // unknowns M[2..n-3]
    std::vector<double> diag(m, 4.0), rhs(m);
    for (int i = 0; i < m; ++i) rhs[i] = d(i + 2);
    rhs[0] -= M[1];
    rhs[m - 1] -= M[n - 2];
    for (int i = 1; i < m; ++i) {
      double w = 1.0 / diag[i - 1];
      diag[i] -= w;
      rhs[i] -= w * rhs[i - 1];
    }
    M[2 + m - 1] = rhs[m - 1] / diag[m - 1];
    for (int i = m - 2; i >= 0; --i) M[2 + i] = (rhs[i] - M[2 + i + 1]) / diag[i];
  }
  M[0] = 2.0 * M[1] - M[2];
  M[n - 1] = 2.0 * M[n - 2] - M[n - 3];
  return M;
}

double spline_eval(const std::vector<double>& y, const std::vector<double>& M,
                   double x0, double h, double x) {
  const int n = static_cast<int>(y.size());
  int i = static_cast<int>((x - x0) / h);
  i = std::clamp(i, 0, n - 2);
  double t = (x - (x0 + i * h)) / h;
  double a = 1.0 - t;
  return a * y[i] + t * y[i + 1] +
         (h * h / 6.0) * ((a * a * a - a) * M[i] + (t * t * t - t) * M[i + 1]);
}

}  // namespace

void ModelParams::validate() const {
  if (!(m > 0) || !std::isfinite(m)) throw std::invalid_argument("mass must be positive");
  if (!(g >= 0) || !std::isfinite(g)) throw std::invalid_argument("coupling must be non-negative");
}

double dispersion(double k, double m) { return std::hypot(k, m); }

double bessel_K0(double z) {
  if (!(z > 0)) throw std::domain_error("bessel_K0: argument must be positive");
  if (z <= 9.5) {
    // Series in extended precision: the log term and the sum cancel strongly
    // near the switchover.
    const long double q = static_cast<long double>(z) * z / 4.0L;
    long double term = 1.0L, i0 = 1.0L, sum = 0.0L, hk = 0.0L;
    for (int k = 1; k < 120; ++k) {
      term *= q / (static_cast<long double>(k) * k);
      i0 += term;
      hk += 1.0L / k;
      long double add = term * hk;
      sum += add;
      if (add < 1e-25L * sum && term < 1e-25L * i0) break;
    }
    long double lead = -(std::log(static_cast<long double>(z) / 2.0L) + kEulerGamma);
    return static_cast<double>(lead * i0 + sum);
  }
  // Asymptotic expansion, truncated at the smallest term.
  double t = 1.0, sum = 1.0;
  for (int k = 1; k <= 25; ++k) {
    double next = t * (-(2.0 * k - 1.0) * (2.0 * k - 1.0) / (8.0 * k * z));
    if (std::abs(next) >= std::abs(t)) break;
    t = next;
    sum += t;
    if (std::abs(t) < 1e-17 * std::abs(sum)) break;
  }
  return std::sqrt(M_PI / (2.0 * z)) * std::exp(-z) * sum;
}

double kernel_W2(double u, double m) {
  if (u == 0) throw std::domain_error("kernel_W2: logarithmically singular at u = 0");
  return bessel_K0(m * std::abs(u)) / (2.0 * M_PI);
}

double kernel_J(double x, double m) {
  x = std::abs(x);
  if (x == 0) return std::numeric_limits<double>::infinity();
  if (m * x > 700) return 0.0;

  // Panels for (2/pi) Int s^2 (2m+s^4)^{-1/4} e^{-s^4 x} ds (e^{-mx} pulled out).
  // Scales: integrand peak near s* = (2x)^{-1/4}, mass feature near sm = (2m)^{1/4},
  // negligible beyond s_up = (45/x)^{1/4}.
  const double s_up = std::pow(45.0 / x, 0.25);
  const double s_m = std::pow(2.0 * m, 0.25);

  std::vector<double> edges{0.0};
  double e = std::min(s_m, s_up) / 4.0;
  while (e < s_up / 8.0) {
    edges.push_back(e);
    e *= 2.0;
  }
  const double lo = edges.back();
  const int nu = 10;
  for (int i = 1; i <= nu; ++i) edges.push_back(lo + (s_up - lo) * i / nu);

  const auto& rule = detail::gl_rule(16);
  double total = 0;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    total += detail::gl_panel(
        [&](double s) {
          double s4 = s * s * s * s;
          return s * s * std::pow(2.0 * m + s4, -0.25) * std::exp(-s4 * x);
        },
        edges[i], edges[i + 1], rule);
  }
  return (2.0 / M_PI) * std::exp(-m * x) * total;
}

KernelTable KernelTable::build(double m) {
  if (!(m > 0)) throw std::invalid_argument("KernelTable: mass must be positive");
  KernelTable t;
  t.m_ = m;
  t.decay_rate = m;
  t.singular_coeff = kSingularCoeff;
  t.x_break_ = 1.0 / m;
  t.cutoff_ = 60.0 / m;

  // Near zone at unit mass: h(xi) = sqrt(x) J(x), xi = sqrt(x) in [0, 1].
  const int n_near = 513;
  t.near_dxi_ = 1.0 / (n_near - 1);
  t.near_y_.resize(n_near);
  t.near_y_[0] = kSingularCoeff;
  for (int i = 1; i < n_near; ++i) {
    double xi = i * t.near_dxi_;
    double x = xi * xi;
    t.near_y_[i] = std::sqrt(x) * kernel_J(x, 1.0);
  }
  t.near_y2_ = spline_second_derivs(t.near_y_, t.near_dxi_);

  // Far zone at unit mass: log J on [1, 60].
  t.far_x0_ = 1.0;
  t.far_dx_ = 0.025;
  const int n_far = static_cast<int>(std::lround((60.0 - 1.0) / t.far_dx_)) + 1;
  t.far_y_.resize(n_far);
  for (int i = 0; i < n_far; ++i) {
    double x = t.far_x0_ + i * t.far_dx_;
    t.far_y_[i] = std::log(kernel_J(x, 1.0));
  }
  t.far_y2_ = spline_second_derivs(t.far_y_, t.far_dx_);

  // Published samples (physical units).
  for (int i = 1; i < n_near; ++i) {
    double xu = (i * t.near_dxi_) * (i * t.near_dxi_);
    t.grid.push_back(xu / m);
    t.values.push_back(std::sqrt(m) * t.near_y_[i] / (i * t.near_dxi_));
  }
  for (int i = 1; i < n_far; ++i) {
    double xu = t.far_x0_ + i * t.far_dx_;
    t.grid.push_back(xu / m);
    t.values.push_back(std::sqrt(m) * std::exp(t.far_y_[i]));
  }

  // Integral of the interpolant over the whole line (accuracy check for the table).
  // One-sided: Int_0^1 J dx = 2 Int_0^1 h dxi (x = xi^2), plus the decay zone.
  const auto& rule = detail::gl_rule(12);
  double near_int = 2.0 * detail::gl_panel([&](double xi) { return t.h_unit(xi); }, 0.0, 1.0, rule);
  double far_int = 0;
  for (double a = 1.0; a < 60.0; a += 1.0)
    far_int += detail::gl_panel([&](double x) { return std::exp(t.logj_unit(x)); }, a,
                                std::min(a + 1.0, 60.0), rule);
  t.integral_ = 2.0 * (near_int + far_int) / std::sqrt(m);
  return t;
}

double KernelTable::h_unit(double xi) const {
  return spline_eval(near_y_, near_y2_, 0.0, near_dxi_, xi);
}

double KernelTable::logj_unit(double x) const {
  return spline_eval(far_y_, far_y2_, far_x0_, far_dx_, x);
}

double KernelTable::operator()(double x) const {
  x = std::abs(x);
  if (x >= cutoff_) return 0.0;
  if (x == 0) return std::numeric_limits<double>::infinity();
  double xu = m_ * x;
  if (xu <= 1.0) return h_unit(std::sqrt(xu)) / std::sqrt(x);
  return std::sqrt(m_) * std::exp(logj_unit(xu));
}

double KernelTable::sqrtx_j(double x) const {
  x = std::abs(x);
  if (x >= cutoff_) return 0.0;
  double xu = m_ * x;
  if (xu <= 1.0) return h_unit(std::sqrt(xu));
  return std::sqrt(x) * std::sqrt(m_) * std::exp(logj_unit(xu));
}

double KernelTable::integral() const { return integral_; }

std::shared_ptr<const KernelTable> kernel_table(double m) {
  static std::mutex mu;
  static std::map<double, std::shared_ptr<const KernelTable>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(m);
  if (it != cache.end()) return it->second;
  auto t = std::make_shared<const KernelTable>(KernelTable::build(m));
  cache.emplace(m, t);
  return t;
}

}  // namespace rcmps
