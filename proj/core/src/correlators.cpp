#include "rcmps/correlators.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "march.hpp"

namespace rcmps {

Complex a_expectation(const Rcmps& s, const TransferFixture& f) {
  return (s.R * f.r).trace();
}

Complex pair_correlator(const Rcmps& s, const TransferFixture& f, double u,
                        PairKind kind) {
  if (!(u >= 0)) throw std::invalid_argument("pair_correlator: u must be >= 0");
  const CMat evolved = propagate(s, f, u, s.R * f.r);
  if (kind == PairKind::C) return (evolved * s.R.adjoint()).trace();
  return (s.R * evolved).trace();
}

double momentum_density(const Rcmps& s, const TransferFixture& f, double k) {
  const Complex c = a_expectation(s, f);
  const CMat mc = s.R * f.r - c * f.r;  // traceless: tr[Rr] - c tr[r]
  const CMat x = resolvent_solve(s, f, Complex(0.0, k), mc);
  return 2.0 * (x * s.R.adjoint()).trace().real();
}

Complex ordered_npoint(const Rcmps& s, const TransferFixture& f,
                       std::vector<Insertion> insertions) {
  if (insertions.empty())
    throw std::invalid_argument("ordered_npoint: empty insertion list");
  for (const Insertion& ins : insertions)
    if (!std::isfinite(ins.position))
      throw std::invalid_argument("ordered_npoint: non-finite position");
  std::sort(insertions.begin(), insertions.end(),
            [](const Insertion& a, const Insertion& b) {
              return a.position < b.position;
            });
  for (std::size_t i = 0; i + 1 < insertions.size(); ++i)
    if (insertions[i].position == insertions[i + 1].position)
      throw std::invalid_argument("ordered_npoint: coincident insertions");

  CMat M = f.r;
  double prev = insertions.front().position;
  for (const Insertion& ins : insertions) {
    if (ins.position > prev) {
      M = propagate(s, f, ins.position - prev, M);
      prev = ins.position;
    }
    M = ins.kind == InsertionKind::annihilation ? CMat(s.R * M)
                                                : CMat(M * s.R.adjoint());
  }
  return M.trace();
}

namespace detail {

MarchGrid march_grid(const KernelTable& kernel, double gap, double z_override) {
  const double m = kernel.mass();
  MarchGrid g;
  g.sigma = 1.0 / m;
  double z = z_override;
  if (z <= 0) {
    // The kernel decay alone bounds the dropped tail (~e^{-45} at the floor);
    // the gap term buys extra chain memory, capped so slow-mixing states do
    // not inflate the range past where J has effectively vanished.
    z = std::max(45.0 / m, std::min(20.0 / gap, 90.0 / m));
    z = std::min(z, kernel.cutoff());
  }
  g.z_max = z;
  g.t_end = std::sqrt(z / g.sigma);
  return g;
}

CMat ForwardMarch::a_matrix(int j, double t) const {
  const Eigen::Index block = static_cast<Eigen::Index>(D) * D;
  const OdeSolution& seg = t <= 0 ? neg : pos;
  const CVec y = seg.eval(t);
  return Eigen::Map<const CMat>(y.data() + (j - 1) * block, D, D);
}

ForwardMarch march_forward(const Rcmps& s, const TransferFixture& f, int n,
                           const KernelTable& kernel, const MarchGrid& grid,
                           double rtol, bool dense) {
  const int D = s.D;
  const int nm = n - 1;
  const Eigen::Index block = static_cast<Eigen::Index>(D) * D;
  const CMat Q = q_matrix(s);
  const CMat b_r = b_chain(s.R, f.r);  // B(A_0), A_0 = r

  auto rhs = [&](double t, const CVec& y, CVec& dy) {
    const double jac = march_jacobian(grid, t);
    const double w = march_weight(kernel, grid, t);
    CMat prev = b_r;
    for (int j = 0; j < nm; ++j) {
      const CMat aj = Eigen::Map<const CMat>(y.data() + j * block, D, D);
      CMat daj = jac * apply_T(Q, s.R, aj);
      daj.noalias() += w * prev;
      Eigen::Map<CMat>(dy.data() + j * block, D, D) = daj;
      if (j + 1 < nm)
        prev = b_chain(s.R, aj);
      else
        dy[nm * block] = w * b_chain(s.R, aj).trace();
    }
  };

  ForwardMarch fm;
  fm.n = n;
  fm.D = D;
  fm.grid = grid;
  OdeOptions oopt;
  oopt.rtol = rtol;
  fm.neg = ode_integrate(rhs, -grid.t_end, 0.0, CVec::Zero(nm * block + 1),
                         oopt, dense);
  fm.pos = ode_integrate(rhs, 0.0, grid.t_end, fm.neg.y_end, oopt, dense);
  fm.value = fm.pos.y_end[nm * block];
  return fm;
}

}  // namespace detail

double nested_j_integral(const Rcmps& s, const TransferFixture& f, int n,
                         const KernelTable& kernel, const MarchOptions& opt) {
  if (n != 2 && n != 4)
    throw std::invalid_argument("nested_j_integral: n must be 2 or 4");
  const double rnorm = frob(s.R);
  if (rnorm == 0) return 0.0;  // every chain term carries at least one R

  const detail::MarchGrid grid = detail::march_grid(kernel, f.gap, opt.z_max);

  if (grid.z_max < kernel.cutoff()) {
    // Every dropped configuration keeps at least one kernel factor beyond
    // z_max; the other n-1 integrals are bounded by int J = (2m)^{-1/2} and
    // each insertion by 2||R||_F.
    const double m = kernel.mass();
    const double jtail = kernel(grid.z_max) / m;
    const double jint = 1.0 / std::sqrt(2.0 * m);
    const double per_insert = 2.0 * rnorm;
    const double est = 2.0 * n * jtail * per_insert *
                       std::pow(per_insert * jint, n - 1) * frob(f.r) *
                       std::sqrt(static_cast<double>(s.D));
    if (est > opt.tail_tol) {
      std::ostringstream msg;
      msg << "nested_j_integral: dropped-tail estimate " << est
          << " exceeds budget " << opt.tail_tol << " at z_max " << grid.z_max;
      throw NumericalError(msg.str());
    }
  }

  const detail::ForwardMarch fm =
      detail::march_forward(s, f, n, kernel, grid, opt.rtol, false);
  if (std::abs(fm.value.imag()) > 1e-8 * (1.0 + std::abs(fm.value.real())))
    throw NumericalError("nested_j_integral: chain value has a non-real part");
  return fm.value.real();
}

}  // namespace rcmps
