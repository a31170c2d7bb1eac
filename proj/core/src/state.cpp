#include "rcmps/state.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "rcmps/detail/rng.hpp"
#include "rcmps/transfer.hpp"

namespace rcmps {

using json = nlohmann::ordered_json;

void Rcmps::validate() const {
  if (D < 1) throw std::invalid_argument("state: D must be >= 1");
  if (K.rows() != D || K.cols() != D || R.rows() != D || R.cols() != D)
    throw std::invalid_argument("state: K and R must be D x D");
  double scale = std::max(1.0, K.norm());
  if ((K - K.adjoint()).norm() > 1e-10 * scale)
    throw std::invalid_argument("state: K must be Hermitian");
}

CMat q_matrix(const Rcmps& s) {
  // herm() guards the exact zero mode of the transfer operator against
  // rounding drift in K.
  return -0.5 * (s.R.adjoint() * s.R) - Complex(0, 1) * herm(s.K);
}

Rcmps random_init(int D, double scale, std::uint64_t seed) {
  if (D < 1) throw std::invalid_argument("random_init: D must be >= 1");
  detail::Rng rng(seed);
  Rcmps s;
  s.D = D;
  s.K = CMat::Zero(D, D);
  s.R = CMat::Zero(D, D);
  for (int p = 0; p < D; ++p)
    for (int q = p; q < D; ++q) {
      if (p == q) {
        s.K(p, p) = scale * rng.normal();
      } else {
        Complex z = scale * rng.cnormal();
        s.K(p, q) = z;
        s.K(q, p) = std::conj(z);
      }
    }
  double rs = scale / std::sqrt(static_cast<double>(D));
  for (int i = 0; i < D; ++i)
    for (int j = 0; j < D; ++j) s.R(i, j) = rs * rng.cnormal();
  return s;
}

Rcmps grow(const Rcmps& s, int D_new, double noise, std::uint64_t seed) {
  s.validate();
  if (D_new < s.D) throw std::invalid_argument("grow: target bond dimension smaller than source");
  if (D_new == s.D) return s;
  Rcmps out = random_init(D_new, noise, seed);
  out.K.topLeftCorner(s.D, s.D) = s.K;
  out.R.topLeftCorner(s.D, s.D) = s.R;
  // Re-impose hermiticity on the K padding columns against the exact block.
  out.K = herm(out.K);
  return out;
}

Rcmps canonicalize(const CMat& Q, const CMat& R) {
  const int D = static_cast<int>(Q.rows());
  if (Q.cols() != D || R.rows() != D || R.cols() != D)
    throw std::invalid_argument("canonicalize: Q and R must be square and equal-sized");

  if (D == 1) {
    // Shifting the dominant eigenvalue to zero fixes Re Q = -|R|^2/2; what is
    // left of Q is the phase, K = -Im Q.
    Rcmps s;
    s.D = 1;
    s.R = R;
    s.K = CMat::Zero(1, 1);
    s.K(0, 0) = -Q(0, 0).imag();
    return s;
  }

  CMat T = dense_transfer_qr(Q, R);
  Eigen::ComplexEigenSolver<CMat> eig(T);
  if (eig.info() != Eigen::Success) throw NumericalError("canonicalize: eigensolver failed");
  const CVec& ev = eig.eigenvalues();

  int idx = 0;
  for (int i = 1; i < ev.size(); ++i)
    if (ev[i].real() > ev[idx].real()) idx = i;
  double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  int near = 0;
  for (int i = 0; i < ev.size(); ++i)
    if (ev[i].real() > ev[idx].real() - 1e-9 * scale) ++near;
  if (near > 1)
    throw DegenerateFixedPointError("canonicalize: dominant transfer eigenvalue is degenerate");
  if (std::abs(ev[idx].imag()) > 1e-8 * scale)
    throw NumericalError("canonicalize: dominant transfer eigenvalue is not real");

  // Left eigenvector for the dominant eigenvalue.
  CMat TH = T.adjoint();
  Eigen::ComplexEigenSolver<CMat> eigH(TH);
  if (eigH.info() != Eigen::Success) throw NumericalError("canonicalize: eigensolver failed");
  int idxH = 0;
  double best = 1e300;
  for (int i = 0; i < ev.size(); ++i) {
    double d = std::abs(eigH.eigenvalues()[i] - std::conj(ev[idx]));
    if (d < best) {
      best = d;
      idxH = i;
    }
  }
  CVec lv = eigH.eigenvectors().col(idxH);
  CMat ell = Eigen::Map<const CMat>(lv.data(), D, D);
  Complex tr = ell.trace();
  if (std::abs(tr) < 1e-10 * ell.norm())
    throw NumericalError("canonicalize: left fixed point has vanishing trace");
  ell *= std::conj(tr) / std::abs(tr);
  ell = herm(ell);

  Eigen::SelfAdjointEigenSolver<CMat> sae(ell);
  double emax = sae.eigenvalues().maxCoeff();
  double emin = sae.eigenvalues().minCoeff();
  if (!(emin > 1e-10 * emax))
    throw NumericalError("canonicalize: left fixed point is not positive definite");
  CVec sq = sae.eigenvalues().cwiseSqrt();
  CMat L = sae.eigenvectors() * sq.asDiagonal() * sae.eigenvectors().adjoint();
  CMat Linv = sae.eigenvectors() * sq.cwiseInverse().asDiagonal() * sae.eigenvectors().adjoint();

  CMat Qs = Q - 0.5 * ev[idx].real() * CMat::Identity(D, D);
  CMat Qn = L * Qs * Linv;
  CMat Rn = L * R * Linv;
  CMat K = Complex(0, 1) * (Qn + 0.5 * Rn.adjoint() * Rn);
  if ((K - K.adjoint()).norm() > 1e-8 * std::max(1.0, K.norm()))
    throw NumericalError("canonicalize: gauge residual too large");
  Rcmps out;
  out.D = D;
  out.K = herm(K);
  out.R = Rn;
  return out;
}

namespace {

json matrix_to_json(const CMat& M) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j)
      row.push_back(json::array({M(i, j).real(), M(i, j).imag()}));
    rows.push_back(row);
  }
  return rows;
}

CMat matrix_from_json(const json& j, int D, const char* name) {
  if (!j.is_array() || static_cast<int>(j.size()) != D)
    throw StateFileError(std::string("state file: bad matrix ") + name);
  CMat M(D, D);
  for (int i = 0; i < D; ++i) {
    const json& row = j[i];
    if (!row.is_array() || static_cast<int>(row.size()) != D)
      throw StateFileError(std::string("state file: bad matrix ") + name);
    for (int k = 0; k < D; ++k) {
      const json& e = row[k];
      if (!e.is_array() || e.size() != 2)
        throw StateFileError(std::string("state file: bad entry in ") + name);
      M(i, k) = Complex(e[0].get<double>(), e[1].get<double>());
    }
  }
  return M;
}

}  // namespace

void save_state(const Rcmps& s, const ModelParams& p, const std::string& path) {
  s.validate();
  json j;
  j["format"] = "rcmps-state";
  j["version"] = 1;
  j["D"] = s.D;
  j["m"] = p.m;
  j["g"] = p.g;
  j["K"] = matrix_to_json(s.K);
  j["R"] = matrix_to_json(s.R);
  std::ofstream out(path);
  if (!out) throw StateFileError("cannot open for writing: " + path);
  out << j.dump(1) << "\n";
  if (!out) throw StateFileError("write failed: " + path);
}

LoadedState load_state(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw StateFileError("cannot open: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw StateFileError("state file: malformed JSON: " + std::string(e.what()));
  }
  if (!j.contains("format") || j["format"] != "rcmps-state")
    throw StateFileError("state file: unrecognized format tag");
  if (!j.contains("version") || !j["version"].is_number_integer())
    throw StateFileError("state file: missing version");
  if (j["version"].get<int>() != 1)
    throw StateFileError("state file: unsupported version " +
                         std::to_string(j["version"].get<int>()));
  LoadedState out;
  try {
    out.state.D = j.at("D").get<int>();
    out.params.m = j.at("m").get<double>();
    out.params.g = j.at("g").get<double>();
  } catch (const json::exception& e) {
    throw StateFileError("state file: missing field: " + std::string(e.what()));
  }
  if (out.state.D < 1) throw StateFileError("state file: D must be >= 1");
  out.params.validate();
  out.state.K = matrix_from_json(j.at("K"), out.state.D, "K");
  out.state.R = matrix_from_json(j.at("R"), out.state.D, "R");
  try {
    out.state.validate();
  } catch (const std::invalid_argument& e) {
    throw StateFileError(std::string("state file: ") + e.what());
  }
  return out;
}

}  // namespace rcmps
