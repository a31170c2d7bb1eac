#include "rcmps/optimizer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <deque>
#include <limits>
#include <mutex>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "rcmps/correlators.hpp"
#include "rcmps/state.hpp"
#include "rcmps/transfer.hpp"

namespace rcmps {

const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::grad_converged:
      return "grad_converged";
    case StopReason::energy_plateau:
      return "energy_plateau";
    case StopReason::max_iters:
      return "max_iters";
    case StopReason::line_search_failure:
      return "line_search_failure";
  }
  return "unknown";
}

namespace {

// Tangent-space metric preconditioning.  dE pairs with dR through r, so the
// R-block is divided by (r + eps I) on the right; a dK variation enters the
// state through both indices, so its natural weight is the symmetrized
// (lam_i + lam_j)/2 + eps in the eigenbasis of r.  The metric inverse is kept
// positive and linear so it can seed a quasi-Newton recursion; growth caps
// are applied to the final direction only.
struct Precond {
  CMat V;
  RVec lam;
  double eps = 0.0;
  bool ok = false;

  void build(const Rcmps& s, double eps_opt) {
    ok = false;
    try {
      const TransferFixture f = right_fixed_point(s);
      Eigen::SelfAdjointEigenSolver<CMat> es(f.r);
      if (es.info() != Eigen::Success) return;
      lam = es.eigenvalues().cwiseMax(0.0);
      V = es.eigenvectors();
      eps = eps_opt > 0.0
                ? eps_opt
                : 1e-6 * std::max(f.r.trace().real(), 0.0) / s.D;
      ok = true;
    } catch (const std::exception&) {
    }
  }

  // Metric inverse on a packed cotangent.  The packing factors between
  // coordinate and matrix form cancel in the entrywise ratio, so the params
  // packing can carry both.
  RVec apply(const RVec& q, int D) const {
    if (!ok) return q;
    CMat QK, QR;
    unpack_params(q, D, QK, QR);
    CMat Kt = V.adjoint() * QK * V;
    for (int i = 0; i < D; ++i)
      for (int j = 0; j < D; ++j) Kt(i, j) /= 0.5 * (lam[i] + lam[j]) + eps;
    QK = herm(CMat(V * Kt * V.adjoint()));
    CMat G = QR * V;
    for (int i = 0; i < D; ++i) G.col(i) /= lam[i] + eps;
    QR = G * V.adjoint();
    return pack_params(QK, QR);
  }

  // Growth caps on a direction.  Along a nearly unoccupied direction of r
  // the energy is locally flat, so an uncapped 1/eps kick would park weight
  // there that the line search cannot price and later gradients cannot
  // remove; each direction may move at most in proportion to the weight the
  // parameters already carry.
  RVec cap(const RVec& d, const Rcmps& s) const {
    if (!ok) return d;
    const int D = s.D;
    CMat DK, DR;
    unpack_params(d, D, DK, DR);
    CMat G = DR * V;
    const CMat RV = s.R * V;
    const double slack = 0.02 * frob(s.R) / std::sqrt(double(D)) + 1e-12;
    for (int i = 0; i < D; ++i) {
      const double c = 2.0 * RV.col(i).norm() + slack;
      const double n = G.col(i).norm();
      if (n > c) G.col(i) *= c / n;
    }
    DR = G * V.adjoint();
    CMat Kt = V.adjoint() * DK * V;
    const CMat Kc = V.adjoint() * s.K * V;
    for (int i = 0; i < D; ++i)
      for (int j = 0; j < D; ++j) {
        const double c = 2.0 * std::abs(Kc(i, j)) + 0.5;
        const double n = std::abs(Kt(i, j));
        if (n > c) Kt(i, j) *= c / n;
      }
    DK = herm(CMat(V * Kt * V.adjoint()));
    return pack_params(DK, DR);
  }
};

// Levels with no stationary weight in r are transient: the physical state
// lives on the support of r and does not see R's action on them, so descent
// leaves arbitrary weight parked there (the energy is exactly flat).  The
// canonical representative drops that weight.  K is kept whole so the pruned
// transfer operator stays irreducible.
bool prune_transient(const Rcmps& s, Rcmps& out) {
  const TransferFixture f = right_fixed_point(s);
  Eigen::SelfAdjointEigenSolver<CMat> es(f.r);
  if (es.info() != Eigen::Success) return false;
  const RVec lam = es.eigenvalues();
  const CMat& V = es.eigenvectors();
  const double eps = 1e-6 * std::max(f.r.trace().real(), 0.0) / s.D;
  CMat P = CMat::Zero(s.D, s.D);
  int kept = 0;
  for (int i = 0; i < s.D; ++i) {
    if (lam[i] > eps) {
      P.noalias() += V.col(i) * V.col(i).adjoint();
      ++kept;
    }
  }
  if (kept == s.D) return false;
  out = s;
  out.R = P * s.R * P;
  // A remainder this small is the Fock vacuum at evaluation resolution, and
  // near-zero R makes the fixed-point solve degenerate; snap to the exact
  // vacuum, which the evaluators handle in closed form.
  if (frob(out.R) <= 1e-6 * (1.0 + frob(s.R))) out.R.setZero();
  return true;
}

}  // namespace

Gradient precondition(const Gradient& g, const TransferFixture& f, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("precondition: eps must be > 0");
  Eigen::SelfAdjointEigenSolver<CMat> es(f.r);
  if (es.info() != Eigen::Success)
    throw NumericalError("precondition: eigendecomposition of r failed");
  const RVec lam = es.eigenvalues().cwiseMax(0.0);
  const CMat& V = es.eigenvectors();
  const int D = f.D;
  CMat G = g.dR * V;
  for (int i = 0; i < D; ++i) G.col(i) /= lam[i] + eps;
  CMat Kt = V.adjoint() * g.dK * V;
  for (int i = 0; i < D; ++i)
    for (int j = 0; j < D; ++j) Kt(i, j) /= 0.5 * (lam[i] + lam[j]) + eps;
  return {herm(CMat(V * Kt * V.adjoint())), CMat(G * V.adjoint())};
}

OptimReport minimize(Rcmps s, const ModelParams& p, const OptimOptions& o) {
  p.validate();
  s.K = herm(s.K);
  s.validate();

  OptimReport rep;
  double energy = 0.0;
  Gradient g = energy_gradient(s, p, o.eval, &energy);
  rep.energy_trace.push_back(energy);

  double step = o.step_init;
  int iter = 0;
  StopReason reason = StopReason::max_iters;

  // Limited-memory quasi-Newton over the packed coordinates, seeded by the
  // tangent-space metric inverse.  Monotone by construction: every accepted
  // step passes the Armijo test against the current energy.
  std::deque<RVec> S, Y;
  std::deque<double> RHO;
  constexpr std::size_t kMemory = 8;
  Precond pc;
  pc.build(s, o.precondition_eps);
  bool retried = false;

  for (; iter < o.max_iters; ++iter) {
    const RVec gx = pack_gradient(g);
    const double gnorm = gx.cwiseAbs().maxCoeff();
    if (o.progress && iter % o.progress_every == 0) {
      std::ostream& os = *o.progress;
      os.precision(12);
      os << "  iter " << iter << "  E=" << energy;
      os.precision(3);
      os << "  |g|=" << gnorm << "  step=" << step << "\n";
    }
    if (gnorm <= o.grad_tol) {
      reason = StopReason::grad_converged;
      break;
    }

    RVec q = gx;
    std::vector<double> alpha(S.size(), 0.0);
    for (int i = int(S.size()) - 1; i >= 0; --i) {
      alpha[i] = RHO[i] * S[i].dot(q);
      q -= alpha[i] * Y[i];
    }
    RVec z = pc.apply(q, s.D);
    for (std::size_t i = 0; i < S.size(); ++i) {
      const double beta = RHO[i] * Y[i].dot(z);
      z += (alpha[i] - beta) * S[i];
    }
    RVec dir = pc.cap(-z, s);
    double slope = gx.dot(dir);
    if (!(slope < 0.0)) {
      S.clear();
      Y.clear();
      RHO.clear();
      dir = pc.cap(pc.apply(-gx, s.D), s);
      slope = gx.dot(dir);
      if (!(slope < 0.0)) {
        dir = -gx;
        slope = -gx.squaredNorm();
      }
    }

    const RVec x0 = pack_params(s.K, s.R);
    const bool memoryless = S.empty();
    Rcmps trial = s;
    double t = memoryless ? step : 1.0;
    bool accepted = false;
    for (int bt = 0; bt < 40; ++bt, t *= 0.5) {
      const RVec x = x0 + t * dir;
      unpack_params(x, s.D, trial.K, trial.R);
      double ft;
      try {
        ft = objective_value(trial, p, o.eval);
      } catch (const std::exception&) {
        continue;  // stepped outside the solver's domain; shrink
      }
      if (ft <= energy + 1e-4 * t * slope + 4e-15 * (1.0 + std::abs(energy))) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (!retried && !S.empty()) {
        // A stale curvature memory can propose a direction the line search
        // cannot use; drop it and try once more from the metric direction.
        retried = true;
        S.clear();
        Y.clear();
        RHO.clear();
        --iter;
        continue;
      }
      reason = StopReason::line_search_failure;
      break;
    }
    retried = false;

    s = trial;
    s.K = herm(s.K);
    if (memoryless) step = std::min(t * 1.2, 1e3);
    Gradient g2 = energy_gradient(s, p, o.eval, &energy);
    const RVec sk = t * dir;
    const RVec yk = pack_gradient(g2) - gx;
    const double sy = sk.dot(yk);
    if (sy > 1e-12 * sk.norm() * yk.norm()) {
      S.push_back(sk);
      Y.push_back(yk);
      RHO.push_back(1.0 / sy);
      if (S.size() > kMemory) {
        S.pop_front();
        Y.pop_front();
        RHO.pop_front();
      }
    }
    pc.build(s, o.precondition_eps);
    g = std::move(g2);
    rep.energy_trace.push_back(energy);

    const std::size_t n = rep.energy_trace.size();
    if (n >= 21) {
      const double drop = rep.energy_trace[n - 21] - rep.energy_trace[n - 1];
      if (drop <= o.energy_tol * (1.0 + std::abs(energy))) {
        reason = StopReason::energy_plateau;
        ++iter;
        break;
      }
    }
  }

  // Canonical form of the result: drop transient-level weight if that is
  // energetically free at plateau resolution, and report the state actually
  // returned.
  try {
    Rcmps pruned = s;
    if (prune_transient(s, pruned)) {
      double e2 = 0.0;
      Gradient g2 = energy_gradient(pruned, p, o.eval, &e2);
      if (e2 <= energy + o.energy_tol * (1.0 + std::abs(energy))) {
        s = std::move(pruned);
        g = std::move(g2);
        energy = e2;
      }
    }
  } catch (const std::exception&) {
  }

  rep.state = std::move(s);
  rep.energy = energy;
  rep.grad_norm = pack_gradient(g).cwiseAbs().maxCoeff();
  rep.iterations = iter;
  rep.termination = reason;
  return rep;
}

namespace {

struct SweepJob {
  int cell = 0;
  int cand = 0;
  Rcmps init;
};

struct SweepJobResult {
  bool ok = false;
  OptimReport rep;
  std::string error;
  double seconds = 0.0;
};

}  // namespace

std::vector<SweepCell> sweep(const ModelParams& base, const SweepOptions& o) {
  base.validate();
  if (o.couplings.empty() || o.bond_dims.empty())
    throw std::invalid_argument("sweep: empty grid");
  for (int D : o.bond_dims)
    if (D < 1) throw std::invalid_argument("sweep: bond dimension must be >= 1");

  const int NC = static_cast<int>(o.couplings.size());
  const int ND = static_cast<int>(o.bond_dims.size());
  std::vector<SweepCell> cells(static_cast<std::size_t>(NC) * ND);
  std::vector<std::optional<Rcmps>> winner(cells.size());
  for (int ci = 0; ci < NC; ++ci)
    for (int di = 0; di < ND; ++di) {
      cells[ci * ND + di].g = o.couplings[ci];
      cells[ci * ND + di].D = o.bond_dims[di];
    }

  std::mutex io_mu;
  for (int diag = 0; diag <= NC + ND - 2; ++diag) {
    std::vector<SweepJob> jobs;
    for (int ci = 0; ci < NC; ++ci) {
      const int di = diag - ci;
      if (di < 0 || di >= ND) continue;
      const int cell = ci * ND + di;
      const int D = o.bond_dims[di];
      const auto mix = [&](int cand) {
        return o.seed * 1000003ull +
               static_cast<std::uint64_t>(ci * 8191 + di * 131 + cand);
      };

      std::optional<Rcmps> seed_state;
      if (ci > 0 && winner[(ci - 1) * ND + di]) {
        jobs.push_back({cell, 0, *winner[(ci - 1) * ND + di]});
        seed_state = *winner[(ci - 1) * ND + di];
      }
      if (di > 0 && winner[ci * ND + di - 1]) {
        Rcmps grown = grow(*winner[ci * ND + di - 1], D, 0.02, mix(1));
        if (!seed_state) seed_state = grown;
        jobs.push_back({cell, 1, std::move(grown)});
      }
      const Rcmps cold = random_init(D, 0.3, mix(3));
      if (!seed_state) seed_state = cold;
      Rcmps biased = *seed_state;  // nudged off the phi -> -phi axis
      biased.R += 0.5 * CMat::Identity(D, D);
      jobs.push_back({cell, 2, std::move(biased)});
      jobs.push_back({cell, 3, cold});
    }

    std::vector<SweepJobResult> res(jobs.size());
    std::atomic<std::size_t> next{0};
    const auto work = [&]() {
      for (;;) {
        const std::size_t j = next.fetch_add(1);
        if (j >= jobs.size()) return;
        ModelParams pj = base;
        pj.g = cells[jobs[j].cell].g;
        const auto t0 = std::chrono::steady_clock::now();
        try {
          res[j].rep = minimize(jobs[j].init, pj, o.optim);
          res[j].ok = true;
        } catch (const std::exception& e) {
          res[j].error = e.what();
        }
        res[j].seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                .count();
        if (o.progress) {
          std::lock_guard<std::mutex> lock(io_mu);
          std::ostream& os = *o.progress;
          os << "[sweep] g=" << cells[jobs[j].cell].g
             << " D=" << cells[jobs[j].cell].D << " cand=" << jobs[j].cand;
          if (res[j].ok) {
            os.precision(12);
            os << " E=" << res[j].rep.energy << " ("
               << to_string(res[j].rep.termination) << ")\n";
          } else {
            os << " failed: " << res[j].error << "\n";
          }
          os.flush();
        }
      }
    };
    const int nt =
        std::max(1, std::min(o.threads, static_cast<int>(jobs.size())));
    if (nt <= 1) {
      work();
    } else {
      std::vector<std::thread> pool;
      pool.reserve(nt);
      for (int i = 0; i < nt; ++i) pool.emplace_back(work);
      for (auto& th : pool) th.join();
    }

    for (int ci = 0; ci < NC; ++ci) {
      const int di = diag - ci;
      if (di < 0 || di >= ND) continue;
      const int cell = ci * ND + di;
      int best = -1;
      SweepCell& out = cells[cell];
      for (std::size_t j = 0; j < jobs.size(); ++j) {
        if (jobs[j].cell != cell) continue;
        out.wall_time_s += res[j].seconds;
        if (!res[j].ok) continue;
        if (best < 0 || res[j].rep.energy < res[best].rep.energy)
          best = static_cast<int>(j);
      }
      if (best < 0) {
        for (std::size_t j = 0; j < jobs.size(); ++j)
          if (jobs[j].cell == cell && !res[j].error.empty()) {
            out.error = res[j].error;
            break;
          }
        if (o.on_cell) o.on_cell(out);
        continue;
      }
      const OptimReport& rep = res[best].rep;
      out.converged = true;
      out.energy = rep.energy;
      out.grad_norm = rep.grad_norm;
      out.iterations = rep.iterations;
      out.termination = rep.termination;
      winner[cell] = rep.state;
      try {
        ModelParams pj = base;
        pj.g = out.g;
        const TransferFixture f = right_fixed_point(rep.state);
        out.phi = phi_expectation(rep.state, f, pj.m);
        out.phi2 = phi2_density(rep.state, f, *kernel_table(pj.m), o.optim.eval);
      } catch (const std::exception& e) {
        out.phi2 = std::numeric_limits<double>::quiet_NaN();
        out.error = e.what();
      }
      if (o.on_cell) o.on_cell(out);
    }
  }
  return cells;
}

}  // namespace rcmps
