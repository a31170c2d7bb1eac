#include "rcmps/transfer.hpp"

#include <cmath>

#include "rcmps/detail/gmres.hpp"
#include "rcmps/detail/ode.hpp"
#include "rcmps/detail/rng.hpp"

namespace rcmps {

namespace {

inline CMat mat_of(const CVec& v, int D) { return Eigen::Map<const CMat>(v.data(), D, D); }
inline CVec vec_of(const CMat& M) {
  return Eigen::Map<const CVec>(M.data(), M.size());
}

}  // namespace

CMat apply_T(const CMat& Q, const CMat& R, const CMat& M) {
  return Q * M + M * Q.adjoint() + R * M * R.adjoint();
}

CMat apply_T_adjoint(const CMat& Q, const CMat& R, const CMat& M) {
  return Q.adjoint() * M + M * Q + R.adjoint() * M * R;
}

CMat apply_T(const Rcmps& s, const CMat& M) {
  return apply_T(q_matrix(s), s.R, M);
}

CMat apply_T_adjoint(const Rcmps& s, const CMat& M) {
  return apply_T_adjoint(q_matrix(s), s.R, M);
}

CMat dense_transfer_qr(const CMat& Q, const CMat& R) {
  const int D = static_cast<int>(Q.rows());
  CMat T = CMat::Zero(D * D, D * D);
  CMat I = CMat::Identity(D, D);
  auto kron_into = [&](const CMat& A, const CMat& B) {
    // T += kron(A, B), column-major vec convention
    for (int i = 0; i < D; ++i)
      for (int j = 0; j < D; ++j)
        if (A(i, j) != Complex(0, 0))
          T.block(i * D, j * D, D, D) += A(i, j) * B;
  };
  kron_into(I, Q);
  kron_into(Q.conjugate(), I);
  kron_into(R.conjugate(), R);
  return T;
}

namespace {

TransferFixture dense_fixture(const Rcmps& s) {
  const int D = s.D;
  TransferFixture f;
  f.D = D;

  CMat T = dense_transfer_qr(q_matrix(s), s.R);
  Eigen::ComplexEigenSolver<CMat> eig(T);
  if (eig.info() != Eigen::Success)
    throw NumericalError("fixed point: eigensolver failed");
  f.dense = true;
  f.evals = eig.eigenvalues();
  f.V = eig.eigenvectors();
  Eigen::PartialPivLU<CMat> lu(f.V);
  f.Vinv = lu.solve(CMat::Identity(D * D, D * D));

  const double lam_scale = std::max(1.0, f.evals.cwiseAbs().maxCoeff());
  f.spectral_radius = f.evals.cwiseAbs().maxCoeff();

  // The gauge pins an exact zero eigenvalue (left eigenvector = identity).
  int zi = 0;
  for (int i = 1; i < f.evals.size(); ++i)
    if (std::abs(f.evals[i]) < std::abs(f.evals[zi])) zi = i;
  if (std::abs(f.evals[zi]) > 1e-8 * lam_scale)
    throw NumericalError("fixed point: no zero transfer eigenvalue; state not canonical");
  f.zero_index = zi;

  int near_zero = 0;
  for (int i = 0; i < f.evals.size(); ++i)
    if (std::abs(f.evals[i]) <= 1e-11 * lam_scale) ++near_zero;
  if (near_zero > 1 && s.R.norm() > 1e-4)
    throw DegenerateFixedPointError(
        "fixed point: zero transfer eigenvalue is degenerate (reducible state)");

  double max_re = -1e300;
  for (int i = 0; i < f.evals.size(); ++i) {
    if (i == zi) continue;
    max_re = std::max(max_re, f.evals[i].real());
  }
  if (max_re > 1e-8 * lam_scale)
    throw NumericalError("fixed point: transfer spectrum extends into the right half plane");
  f.gap = std::max(-max_re, 1e-14);
  f.correlation_length = 1.0 / f.gap;

  CMat r = mat_of(f.V.col(zi), D);
  Complex tr = r.trace();
  if (std::abs(tr) < 1e-8 * r.norm())
    throw NumericalError("fixed point: non-physical (traceless) fixed point");
  r /= tr;
  r = herm(r);

  // Polish if the eigenvector is contaminated by near-degenerate neighbours.
  double resid = apply_T(s, r).norm() / r.norm();
  if (resid > 1e-11) {
    CVec b = -vec_of(apply_T(s, r));
    auto op = [&](const CVec& x) { return vec_of(apply_T(s, mat_of(x, D))); };
    detail::GmresOptions go;
    go.tol = 1e-5;
    go.max_iters = std::min(200, D * D);
    auto res = detail::gmres(op, b, go);
    CMat rp = r + mat_of(res.x, D);
    rp /= rp.trace();
    rp = herm(rp);
    if (apply_T(s, rp).norm() / rp.norm() < resid) r = rp;
  }
  if (apply_T(s, r).norm() > 1e-10 * r.norm())
    throw NumericalError("fixed point: residual exceeds tolerance");

  Eigen::SelfAdjointEigenSolver<CMat> sae(r);
  if (sae.eigenvalues().minCoeff() < -1e-12)
    throw NumericalError("fixed point: not positive semidefinite");
  f.r = r;
  return f;
}

TransferFixture iterative_fixture(const Rcmps& s) {
  const int D = s.D;
  TransferFixture f;
  f.D = D;
  f.dense = false;

  // The fixed-point equation is linear: one deflated solve from r0 = I/D.
  CMat r0 = CMat::Identity(D, D) / static_cast<double>(D);
  CVec b = -vec_of(apply_T(s, r0));  // traceless since tr T(M) = 0 in this gauge
  auto op = [&](const CVec& x) { return vec_of(apply_T(s, mat_of(x, D))); };
  detail::GmresOptions go;
  go.tol = 1e-12;
  go.max_iters = D * D;
  auto sol = detail::gmres(op, b, go);
  if (!sol.converged)
    throw NumericalError("fixed point: deflated solve did not converge");
  CMat r = r0 + mat_of(sol.x, D);
  r /= r.trace();
  r = herm(r);
  if (apply_T(s, r).norm() > 1e-10 * r.norm())
    throw NumericalError("fixed point: residual exceeds tolerance");
  Eigen::SelfAdjointEigenSolver<CMat> sae(r);
  if (sae.eigenvalues().minCoeff() < -1e-12)
    throw NumericalError("fixed point: not positive semidefinite");
  f.r = r;

  // Ritz estimate of gap and spectral radius on the traceless subspace.
  const int n = D * D;
  const int kry = std::min(n - 1, 80);
  detail::Rng rng(12345);
  CVec v0(n);
  for (int i = 0; i < n; ++i) v0[i] = rng.cnormal();
  CMat m0 = mat_of(v0, D);
  m0 -= (m0.trace() / static_cast<double>(D)) * CMat::Identity(D, D);
  v0 = vec_of(m0);
  v0.normalize();
  std::vector<CVec> V{v0};
  CMat H = CMat::Zero(kry + 1, kry);
  int built = 0;
  for (int j = 0; j < kry; ++j) {
    CVec w = op(V[j]);
    for (int i = 0; i <= j; ++i) {
      H(i, j) = V[i].dot(w);
      w -= H(i, j) * V[i];
    }
    H(j + 1, j) = w.norm();
    built = j + 1;
    if (std::abs(H(j + 1, j)) < 1e-12) break;
    V.push_back(w / H(j + 1, j).real());
  }
  Eigen::ComplexEigenSolver<CMat> reig(H.topLeftCorner(built, built));
  double max_re = -1e300, rad = 0;
  for (int i = 0; i < built; ++i) {
    Complex lam = reig.eigenvalues()[i];
    rad = std::max(rad, std::abs(lam));
    if (std::abs(lam) > 1e-10) max_re = std::max(max_re, lam.real());
  }
  f.gap = std::max(-max_re, 1e-14);
  f.correlation_length = 1.0 / f.gap;
  f.spectral_radius = rad;
  f.evals = reig.eigenvalues();  // Ritz values; observable grids refine on them
  return f;
}

}  // namespace

TransferFixture right_fixed_point(const Rcmps& s, bool force_iterative) {
  s.validate();
  if (s.D == 1) {
    TransferFixture f;
    f.D = 1;
    f.r = CMat::Ones(1, 1);
    f.gap = std::numeric_limits<double>::infinity();
    f.correlation_length = 0;
    f.spectral_radius = 0;
    f.dense = true;
    f.evals = CVec::Zero(1);
    f.V = CMat::Ones(1, 1);
    f.Vinv = CMat::Ones(1, 1);
    f.zero_index = 0;
    return f;
  }
  if (s.R.norm() <= 1e-15)
    throw DegenerateFixedPointError("fixed point: R = 0 leaves every K-diagonal invariant");
  if (!force_iterative && s.D <= kDenseFixtureCutoff) return dense_fixture(s);
  return iterative_fixture(s);
}

TransferFixture right_fixed_point(const Rcmps& s) { return right_fixed_point(s, false); }

CMat propagate(const Rcmps& s, const TransferFixture& f, double u, const CMat& M,
               double rtol) {
  const int D = s.D;
  if (u == 0) return M;
  if (f.dense) {
    CVec y = f.Vinv * vec_of(M);
    for (int i = 0; i < y.size(); ++i) {
      double a = f.evals[i].real() * u;
      if (a > 700) throw NumericalError("propagate: growing mode");
      y[i] *= std::exp(f.evals[i] * u);
    }
    return mat_of(CVec(f.V * y), D);
  }
  auto rhs = [&](double, const CVec& y, CVec& dy) {
    dy = vec_of(apply_T(s, mat_of(y, D)));
  };
  detail::OdeOptions opt;
  opt.rtol = rtol;
  opt.atol = 1e-14 * std::max(1.0, M.norm());
  auto sol = detail::ode_integrate(rhs, 0.0, u, vec_of(M), opt, false);
  return mat_of(sol.y_end, D);
}

CMat resolvent_solve(const Rcmps& s, const TransferFixture& f, Complex sval,
                     const CMat& M) {
  const int D = s.D;
  const double mn = M.norm();
  if (mn == 0) return CMat::Zero(D, D);
  const bool deflated = std::abs(M.trace()) <= 1e-9 * mn * std::sqrt(static_cast<double>(D));
  if (std::abs(sval) < 1e-6 * std::max(1.0, f.spectral_radius) && !deflated)
    throw NumericalError("resolvent: input has a fixed-point component and s is near zero");
  if (f.dense) {
    CVec y = f.Vinv * vec_of(M);
    if (deflated && f.zero_index >= 0) y[f.zero_index] = 0;
    for (int i = 0; i < y.size(); ++i) {
      if (i == f.zero_index && deflated) continue;
      y[i] /= (sval - f.evals[i]);
    }
    return mat_of(CVec(f.V * y), D);
  }
  auto op = [&](const CVec& x) {
    return CVec(sval * x - vec_of(apply_T(s, mat_of(x, D))));
  };
  detail::GmresOptions go;
  go.tol = 1e-11;
  go.max_iters = D * D;
  auto sol = detail::gmres(op, vec_of(M), go);
  if (!sol.converged) throw NumericalError("resolvent: Krylov solve did not converge");
  return mat_of(sol.x, D);
}

CMat resolvent_solve_adjoint(const Rcmps& s, const TransferFixture& f, Complex sval,
                             const CMat& W) {
  const int D = s.D;
  if (W.norm() == 0) return CMat::Zero(D, D);
  // The identity-direction component of the solution is projected out: it pairs
  // to zero against every gauge-constrained variation, and keeping it would
  // blow up as s -> 0.
  if (f.dense) {
    CVec y = f.V.adjoint() * vec_of(W);
    for (int i = 0; i < y.size(); ++i) {
      if (i == f.zero_index)
        y[i] = 0;
      else
        y[i] /= (std::conj(sval) - std::conj(f.evals[i]));
    }
    return mat_of(CVec(f.Vinv.adjoint() * y), D);
  }
  // Removing the tr[r W] coefficient confines the solve to the invariant
  // complement of the identity mode.
  CMat Wp = W - (f.r * W).trace() * CMat::Identity(D, D);
  auto op = [&](const CVec& x) {
    return CVec(std::conj(sval) * x - vec_of(apply_T_adjoint(s, mat_of(x, D))));
  };
  detail::GmresOptions go;
  go.tol = 1e-11;
  go.max_iters = D * D;
  auto sol = detail::gmres(op, vec_of(Wp), go);
  if (!sol.converged)
    throw NumericalError("adjoint resolvent: Krylov solve did not converge");
  return mat_of(sol.x, D);
}

CMat deflated_adjoint_solve(const Rcmps& s, const TransferFixture& f, const CMat& W) {
  const int D = s.D;
  const double wn = W.norm();
  if (wn == 0) return CMat::Zero(D, D);
  if (std::abs((f.r * W).trace()) > 1e-7 * wn)
    throw NumericalError("deflated adjoint solve: right-hand side not orthogonal to r");
  if (f.dense) {
    CVec y = f.V.adjoint() * vec_of(W);
    for (int i = 0; i < y.size(); ++i) {
      if (i == f.zero_index)
        y[i] = 0;
      else
        y[i] /= std::conj(f.evals[i]);
    }
    return mat_of(CVec(f.Vinv.adjoint() * y), D);
  }
  CMat Wp = W - ((f.r * W).trace()) * CMat::Identity(D, D);
  auto op = [&](const CVec& x) {
    return vec_of(apply_T_adjoint(s, mat_of(x, D)));
  };
  detail::GmresOptions go;
  go.tol = 1e-11;
  go.max_iters = D * D;
  auto sol = detail::gmres(op, vec_of(Wp), go);
  if (!sol.converged)
    throw NumericalError("deflated adjoint solve: Krylov solve did not converge");
  return mat_of(sol.x, D);
}

}  // namespace rcmps
