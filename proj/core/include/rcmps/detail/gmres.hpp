#pragma once

#include <cmath>
#include <vector>

#include "rcmps/detail/types.hpp"

namespace rcmps::detail {

// Full-memory GMRES with modified Gram-Schmidt and Givens rotations.
// The operator is passed as a functor CVec(const CVec&).

struct GmresOptions {
  double tol = 1e-12;  // relative to |b|
  int max_iters = 500;
};

struct GmresResult {
  CVec x;
  double resid = 0;  // relative residual achieved
  int iters = 0;
  bool converged = false;
};

template <class Op>
GmresResult gmres(Op&& apply, const CVec& b, const GmresOptions& opt = {}) {
  GmresResult out;
  const double bnorm = b.norm();
  if (bnorm == 0) {
    out.x = CVec::Zero(b.size());
    out.converged = true;
    return out;
  }
  const int mmax = std::min<int>(opt.max_iters, static_cast<int>(b.size()));
  std::vector<CVec> V;
  V.reserve(mmax + 1);
  V.push_back(b / bnorm);
  CMat H = CMat::Zero(mmax + 1, mmax);
  std::vector<Complex> cs(mmax), sn(mmax);
  CVec g = CVec::Zero(mmax + 1);
  g[0] = bnorm;

  int m = 0;
  for (; m < mmax; ++m) {
    CVec w = apply(V[m]);
    for (int i = 0; i <= m; ++i) {
      H(i, m) = V[i].dot(w);
      w -= H(i, m) * V[i];
    }
    // one re-orthogonalization pass keeps the basis clean for ill-conditioned ops
    for (int i = 0; i <= m; ++i) {
      Complex corr = V[i].dot(w);
      H(i, m) += corr;
      w -= corr * V[i];
    }
    H(m + 1, m) = w.norm();

    for (int i = 0; i < m; ++i) {
      Complex tmp = std::conj(cs[i]) * H(i, m) + std::conj(sn[i]) * H(i + 1, m);
      H(i + 1, m) = -sn[i] * H(i, m) + cs[i] * H(i + 1, m);
      H(i, m) = tmp;
    }
    double denom = std::sqrt(std::norm(H(m, m)) + std::norm(H(m + 1, m)));
    if (denom == 0) {
      cs[m] = 1;
      sn[m] = 0;
    } else {
      cs[m] = H(m, m) / denom;
      sn[m] = H(m + 1, m) / denom;
    }
    H(m, m) = std::conj(cs[m]) * H(m, m) + std::conj(sn[m]) * H(m + 1, m);
    H(m + 1, m) = 0;
    g[m + 1] = -sn[m] * g[m];
    g[m] = std::conj(cs[m]) * g[m];

    double rel = std::abs(g[m + 1]) / bnorm;
    if (rel < opt.tol || std::abs(H(m + 1, m)) == 0) {
      ++m;
      break;
    }
    if (m + 1 < mmax + 1 && std::real(H.coeff(m + 1, m)) == 0 &&
        std::imag(H.coeff(m + 1, m)) == 0) {
      // happy breakdown handled above via rel check; keep going otherwise
    }
    V.push_back(w / w.norm());
  }

  CVec y = CVec::Zero(m);
  for (int i = m - 1; i >= 0; --i) {
    Complex s = g[i];
    for (int j = i + 1; j < m; ++j) s -= H(i, j) * y[j];
    y[i] = s / H(i, i);
  }
  CVec x = CVec::Zero(b.size());
  for (int i = 0; i < m; ++i) x += y[i] * V[i];

  out.x = std::move(x);
  out.iters = m;
  out.resid = (apply(out.x) - b).norm() / bnorm;
  out.converged = out.resid < 10 * opt.tol;
  return out;
}

}  // namespace rcmps::detail
