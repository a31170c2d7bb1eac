#include "rcmps/energy.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "kquad.hpp"
#include "rcmps/detail/ode.hpp"
#include "rcmps/detail/quad.hpp"

namespace rcmps {

namespace {

constexpr double kEulerGamma = 0.5772156649015328606;

// S_c(k) for one fixed connected source at many k.  Dense fixtures amortize
// the spectral transforms, so each node costs O(D^2).
class ScEvaluator {
 public:
  ScEvaluator(const Rcmps& s, const TransferFixture& f, const CMat& mc)
      : s_(&s), f_(&f), mc_(mc) {
    if (f.dense) {
      const Eigen::Index n = static_cast<Eigen::Index>(s.D) * s.D;
      vy_ = f.Vinv * Eigen::Map<const CVec>(mc_.data(), n);
      if (f.zero_index >= 0) vy_[f.zero_index] = 0;  // deflated source
      p_ = f.V.adjoint() * Eigen::Map<const CVec>(s.R.data(), n);
    }
  }

  double operator()(double k) const {
    if (!f_->dense) {
      const CMat x = resolvent_solve(*s_, *f_, Complex(0.0, k), mc_);
      return 2.0 * (x * s_->R.adjoint()).trace().real();
    }
    Complex acc = 0;
    const Complex sk(0.0, k);
    for (Eigen::Index i = 0; i < vy_.size(); ++i) {
      if (i == f_->zero_index) continue;
      acc += std::conj(p_[i]) * vy_[i] / (sk - f_->evals[i]);
    }
    return 2.0 * acc.real();
  }

 private:
  const Rcmps* s_;
  const TransferFixture* f_;
  CMat mc_;
  CVec vy_, p_;  // Vinv vec(M_c) and V^H vec(R)
};

double quad_sum(const ScEvaluator& sc, const detail::KQuad& q, double m,
                bool weight_omega) {
  double acc = 0;
  for (std::size_t i = 0; i < q.nodes.size(); ++i) {
    const double w = weight_omega ? dispersion(q.nodes[i], m) : 1.0;
    acc += q.weights[i] * w * sc(q.nodes[i]);
  }
  return acc / (2.0 * M_PI);
}

// Connected G2(u) = 2Re[C(u) - |c|^2] + 2Re[P(u) - c^2] for u >= 0.  Dense
// fixtures use the mode sum; otherwise one dense-output flow of e^{uT}(R r)
// serves every evaluation.
class G2Evaluator {
 public:
  G2Evaluator(const Rcmps& s, const TransferFixture& f, double u_max) {
    const Eigen::Index n = static_cast<Eigen::Index>(s.D) * s.D;
    if (f.dense) {
      const CMat rr = s.R * f.r;
      const CMat rdag = s.R.adjoint();
      const CVec vt = f.Vinv * Eigen::Map<const CVec>(rr.data(), n);
      const CVec pc = f.V.adjoint() * Eigen::Map<const CVec>(s.R.data(), n);
      const CVec pp = f.V.adjoint() * Eigen::Map<const CVec>(rdag.data(), n);
      for (Eigen::Index i = 0; i < n; ++i) {
        if (i == f.zero_index) continue;  // carries the disconnected part
        lam_.push_back(f.evals[i]);
        wts_.push_back((std::conj(pc[i]) + std::conj(pp[i])) * vt[i]);
      }
      return;
    }
    s_ = &s;
    D_ = s.D;
    c_ = (s.R * f.r).trace();
    const CMat Q = q_matrix(s);
    const CMat R = s.R;
    auto rhs = [&Q, &R, this](double, const CVec& y, CVec& dy) {
      const CMat M = Eigen::Map<const CMat>(y.data(), D_, D_);
      Eigen::Map<CMat>(dy.data(), D_, D_) = apply_T(Q, R, M);
    };
    const CMat rr = s.R * f.r;
    detail::OdeOptions oo;
    oo.rtol = 1e-11;
    flow_ = detail::ode_integrate(rhs, 0.0, u_max,
                                  Eigen::Map<const CVec>(rr.data(), n), oo,
                                  true);
  }

  double operator()(double u) const {
    if (s_ == nullptr) {
      Complex acc = 0;
      for (std::size_t j = 0; j < lam_.size(); ++j)
        acc += wts_[j] * std::exp(lam_[j] * u);
      return 2.0 * acc.real();
    }
    const CVec y = flow_.eval(u);
    const CMat x = Eigen::Map<const CMat>(y.data(), D_, D_);
    const Complex cu = (x * s_->R.adjoint()).trace() - std::norm(c_);
    const Complex pu = (s_->R * x).trace() - c_ * c_;
    return 2.0 * (cu.real() + pu.real());
  }

 private:
  std::vector<Complex> lam_, wts_;
  const Rcmps* s_ = nullptr;
  int D_ = 0;
  Complex c_;
  detail::OdeSolution flow_;
};

}  // namespace

double eps_free(const Rcmps& s, const TransferFixture& f, double m,
                const EvalSettings& opt, double* err) {
  const Complex c = a_expectation(s, f);
  const double disc = m * std::norm(c);
  const CMat mc = s.R * f.r - c * f.r;
  if (frob(mc) <= 1e-14 * (1.0 + frob(s.R))) {
    if (err) *err = 1e-15 * (1.0 + disc);
    return disc;
  }
  const ScEvaluator sc(s, f, mc);
  const detail::KTailMoments tm = detail::k_tail_moments(s, mc);
  const detail::KQuad q = detail::k_quadrature(f, m, 1);
  const double conn = quad_sum(sc, q, m, true) + detail::k_tail_omega(tm, m, q.k_max);
  double est = 1e-9 * (1.0 + std::abs(conn));
  if (opt.convergence_check) {
    const detail::KQuad qh = detail::k_quadrature(f, m, 2);
    const double conn_h =
        quad_sum(sc, qh, m, true) + detail::k_tail_omega(tm, m, qh.k_max);
    est = std::abs(conn - conn_h) + 1e-12 * (1.0 + std::abs(conn));
  }
  if (err) *err = est;
  return disc + conn;
}

double phi_expectation(const Rcmps& s, const TransferFixture& f, double m) {
  return 2.0 * a_expectation(s, f).real() / std::sqrt(2.0 * m);
}

double connected_density_integral(const Rcmps& s, const TransferFixture& f,
                                  double m, int resolution) {
  const Complex c = a_expectation(s, f);
  const CMat mc = s.R * f.r - c * f.r;
  if (frob(mc) <= 1e-14 * (1.0 + frob(s.R))) return 0.0;
  const ScEvaluator sc(s, f, mc);
  const detail::KQuad q = detail::k_quadrature(f, m, resolution);
  return quad_sum(sc, q, m, false) +
         detail::k_tail_one(detail::k_tail_moments(s, mc), q.k_max);
}

double phi2_density(const Rcmps& s, const TransferFixture& f,
                    const KernelTable& kernel, const EvalSettings& opt,
                    double* chain_route) {
  if (frob(s.R) == 0) {
    if (chain_route) *chain_route = 0.0;
    return 0.0;
  }
  const double m = kernel.mass();

  // Route one: G2 against W2 = J*J, split into the u -> inf plateau (exact
  // integral of W2), a patched [0, eps] sliver where W2 is logarithmic, and
  // panelled quadrature up to U; the integrand is dead beyond U.
  const Complex c = a_expectation(s, f);
  const double g2_inf = 2.0 * (c * c).real() + 2.0 * std::norm(c);
  const double eps_u = 1e-6 / m;
  const double u_max = 40.0 / m;
  const G2Evaluator g2(s, f, u_max);
  const double patch = 2.0 * g2(0.0) * eps_u / (2.0 * M_PI) *
                       (std::log(2.0 / (m * eps_u)) + 1.0 - kEulerGamma);

  // Octave panels, subdivided so each piece sees a bounded oscillation phase
  // from the fastest transfer mode.
  const double beta_max = f.spectral_radius + m;
  const detail::GlRule& rule = detail::gl_rule(12);
  double conn = 0;
  double a = eps_u;
  while (a < u_max) {
    const double b = std::min(2.0 * a, u_max);
    const int nsub = std::clamp(
        static_cast<int>(std::ceil((b - a) * beta_max / 8.0)), 1, 400);
    for (int p = 0; p < nsub; ++p) {
      const double pa = a + (b - a) * p / nsub;
      const double pb = a + (b - a) * (p + 1) / nsub;
      conn += detail::gl_panel(
          [&](double u) { return kernel_W2(u, m) * g2(u); }, pa, pb, rule);
    }
    a = b;
  }
  const double route_w2 = g2_inf / (2.0 * m) + patch + 2.0 * conn;

  // Route two: the marching chain.
  MarchOptions mo;
  mo.rtol = opt.march_rtol;
  mo.tail_tol = opt.march_tail_tol;
  const double route_march = 2.0 * nested_j_integral(s, f, 2, kernel, mo);
  if (chain_route) *chain_route = route_march;

  const double denom =
      std::max({std::abs(route_w2), std::abs(route_march), 1e-8});
  if (std::abs(route_w2 - route_march) > 1e-6 * denom) {
    std::ostringstream msg;
    msg << "phi2_density: correlator route " << route_w2
        << " and chain route " << route_march << " disagree beyond 1e-6";
    throw MethodDisagreementError(msg.str());
  }
  return route_w2;
}

EnergyBreakdown energy_density(const Rcmps& s, const ModelParams& p,
                               const EvalSettings& opt) {
  p.validate();
  s.validate();
  EnergyBreakdown out;
  if (frob(s.R) <= 1e-12) return out;  // Fock vacuum exactly

  const TransferFixture f = right_fixed_point(s);
  double err_free = 0;
  out.eps_free = eps_free(s, f, p.m, opt, &err_free);

  const auto kernel = kernel_table(p.m);
  MarchOptions mo;
  mo.rtol = opt.march_rtol;
  mo.tail_tol = opt.march_tail_tol;
  out.phi4 = 24.0 * nested_j_integral(s, f, 4, *kernel, mo);
  out.total = out.eps_free + p.g * out.phi4;
  out.tol = std::max(err_free, 10.0 * opt.march_rtol *
                                   (1.0 + std::abs(out.phi4)) *
                                   std::max(1.0, p.g));
  return out;
}

}  // namespace rcmps
