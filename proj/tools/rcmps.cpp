// Command-line front end: optimize / observe / sweep / check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rcmps/detail/rng.hpp"
#include "rcmps/energy.hpp"
#include "rcmps/gradient.hpp"
#include "rcmps/optimizer.hpp"
#include "rcmps/oracle.hpp"
#include "rcmps/state.hpp"

namespace {

using nlohmann::ordered_json;
using namespace rcmps;

constexpr const char* kVersion = "0.1.0";

// Exit codes are part of the tool contract; scripts rely on them.
enum ExitCode : int {
  kOk = 0,
  kNotConverged = 2,
  kNumerical = 3,
  kIoError = 4,
  kParamMismatch = 5,
  kUsage = 64,
};

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string config_hash(const ordered_json& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(config.dump())));
  return std::string(buf);
}

// "a:b:step" -> inclusive grid with step > 0, b >= a.
bool parse_grid(const std::string& text, std::vector<double>& out) {
  auto p1 = text.find(':');
  if (p1 == std::string::npos) return false;
  auto p2 = text.find(':', p1 + 1);
  if (p2 == std::string::npos) return false;
  double a, b, step;
  try {
    a = std::stod(text.substr(0, p1));
    b = std::stod(text.substr(p1 + 1, p2 - p1 - 1));
    step = std::stod(text.substr(p2 + 1));
  } catch (const std::exception&) {
    return false;
  }
  if (!(step > 0) || !(b >= a)) return false;
  int n = static_cast<int>(std::floor((b - a) / step + 1e-9)) + 1;
  out.clear();
  out.reserve(n);
  for (int j = 0; j < n; ++j) out.push_back(a + j * step);
  return true;
}

int resolve_threads(int flag_value) {
  if (flag_value > 0) return flag_value;
  if (const char* env = std::getenv("RCMPS_THREADS")) {
    int v = std::atoi(env);
    if (v >= 1) return v;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

// --init accepts a state-file path or "random:<seed>".  Loaded states may be
// grown to a larger -D; shrinking is refused.  used_seed reports the seed that
// actually fed the random draw (for the run record).
Rcmps initial_state(const std::string& init, int D, std::uint64_t seed,
                    std::uint64_t* used_seed) {
  *used_seed = seed;
  if (init.empty() || init.rfind("random:", 0) == 0) {
    if (D <= 0)
      throw std::invalid_argument("a random start needs -D");
    if (!init.empty()) *used_seed = std::stoull(init.substr(7));
    // Scale 0.1 starts near the Fock vacuum; the g = 0 optimum sits there and
    // the interacting minima are reached by warm starts anyway.
    return random_init(D, 0.1, *used_seed);
  }
  LoadedState ls = load_state(init);
  if (D > 0 && D < ls.state.D)
    throw std::invalid_argument("-D is smaller than the stored bond dimension");
  if (D > ls.state.D) return grow(ls.state, D, 0.02, seed);
  return ls.state;
}

int cmd_optimize(double m, double g, int D, double tol, int max_iters,
                 std::uint64_t seed, const std::string& init,
                 const std::string& out) {
  if (out.empty()) {
    std::cerr << "optimize: --out is required\n";
    return kUsage;
  }
  ModelParams p{m, g};
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    std::cerr << "optimize: " << e.what() << "\n";
    return kUsage;
  }

  Rcmps s0;
  std::uint64_t used_seed = seed;
  try {
    s0 = initial_state(init, D, seed, &used_seed);
  } catch (const std::invalid_argument& e) {
    std::cerr << "optimize: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "optimize: " << e.what() << "\n";
    return kIoError;
  }

  OptimOptions oo;
  oo.grad_tol = tol;
  oo.max_iters = max_iters;
  oo.seed = used_seed;
  oo.progress = &std::cerr;
  oo.progress_every = 50;

  OptimReport rep;
  try {
    rep = minimize(s0, p, oo);
  } catch (const NumericalError& e) {
    std::cerr << "optimize: " << e.what() << "\n";
    return kNumerical;
  }

  try {
    save_state(rep.state, p, out);
  } catch (const std::exception& e) {
    std::cerr << "optimize: " << e.what() << "\n";
    return kIoError;
  }

  ordered_json config{{"command", "optimize"},
                      {"m", m},
                      {"g", g},
                      {"D", rep.state.D},
                      {"tol", tol},
                      {"max_iters", max_iters},
                      {"seed", used_seed},
                      {"init", init},
                      {"out", out}};
  ordered_json rec;
  rec["record"] = "optimize-report";
  rec["version"] = kVersion;
  rec["config_hash"] = config_hash(config);
  rec["seed"] = used_seed;
  rec["config"] = config;
  rec["energy"] = rep.energy;
  rec["grad_norm"] = rep.grad_norm;
  rec["iterations"] = rep.iterations;
  rec["stop"] = to_string(rep.termination);
  rec["state_file"] = out;
  std::cout << rec.dump(1) << "\n";

  switch (rep.termination) {
    case StopReason::grad_converged:
    case StopReason::energy_plateau:
      return kOk;
    case StopReason::max_iters:
      return kNotConverged;
    case StopReason::line_search_failure:
      return kNumerical;
  }
  return kNumerical;
}

int cmd_observe(const std::string& path, bool has_m, double m_flag, bool has_g,
                double g_flag, bool override_params, const std::string& kgrid) {
  LoadedState ls;
  try {
    ls = load_state(path);
  } catch (const std::exception& e) {
    std::cerr << "observe: " << e.what() << "\n";
    return kIoError;
  }

  double m = ls.params.m, g = ls.params.g;
  bool mismatch = (has_m && std::abs(m_flag - m) > 1e-12 * (1.0 + std::abs(m))) ||
                  (has_g && std::abs(g_flag - g) > 1e-12 * (1.0 + std::abs(g)));
  if (mismatch && !override_params) {
    std::cerr << "observe: flags disagree with the parameters stored in " << path
              << " (m=" << m << ", g=" << g << "); pass --override to proceed\n";
    return kParamMismatch;
  }
  if (has_m) m = m_flag;
  if (has_g) g = g_flag;

  std::vector<double> ks;
  if (!kgrid.empty() && !parse_grid(kgrid, ks)) {
    std::cerr << "observe: bad --kgrid, expected a:b:step\n";
    return kUsage;
  }

  const Rcmps& s = ls.state;
  ordered_json config{{"command", "observe"}, {"state", path}, {"m", m},
                      {"g", g},               {"kgrid", kgrid}};
  ordered_json rec;
  rec["record"] = "observe-report";
  rec["version"] = kVersion;
  rec["config_hash"] = config_hash(config);
  rec["seed"] = 0;
  rec["config"] = config;
  rec["D"] = s.D;
  rec["m"] = m;
  rec["g"] = g;

  try {
    ModelParams p{m, g};
    p.validate();
    EnergyBreakdown eb = energy_density(s, p);
    rec["energy"] = ordered_json{
        {"free", eb.eps_free}, {"quartic", eb.phi4}, {"total", eb.total}};
    auto samples = ordered_json::array();
    if (frob(s.R) <= 1e-12) {
      // Fock vacuum: every connected correlator vanishes identically.
      rec["phi"] = 0.0;
      rec["phi2"] = 0.0;
      rec["a_expectation"] = ordered_json::array({0.0, 0.0});
      rec["gap"] = 0.0;
      for (double k : ks) samples.push_back(ordered_json{{"k", k}, {"S_c", 0.0}});
    } else {
      TransferFixture f = right_fixed_point(s);
      auto kt = kernel_table(m);
      rec["phi"] = phi_expectation(s, f, m);
      rec["phi2"] = phi2_density(s, f, *kt);
      Complex a = a_expectation(s, f);
      rec["a_expectation"] = ordered_json::array({a.real(), a.imag()});
      rec["gap"] = f.gap;
      for (double k : ks)
        samples.push_back(ordered_json{{"k", k}, {"S_c", momentum_density(s, f, k)}});
    }
    rec["S_c"] = samples;
  } catch (const std::invalid_argument& e) {
    std::cerr << "observe: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericalError& e) {
    std::cerr << "observe: " << e.what() << "\n";
    return kNumerical;
  }

  std::cout << rec.dump(1) << "\n";
  return kOk;
}

int cmd_sweep(double m, const std::vector<double>& gs, const std::vector<int>& Ds,
              double tol, int max_iters, std::uint64_t seed, int threads,
              const std::string& out) {
  if (gs.empty()) {
    std::cerr << "sweep: empty coupling list (--g or --g-range)\n";
    return kUsage;
  }
  if (Ds.empty()) {
    std::cerr << "sweep: empty bond-dimension list (-D or --D-list)\n";
    return kUsage;
  }
  if (out.empty()) {
    std::cerr << "sweep: --out is required\n";
    return kUsage;
  }
  ModelParams base{m, 0.0};
  try {
    base.validate();
  } catch (const std::invalid_argument& e) {
    std::cerr << "sweep: " << e.what() << "\n";
    return kUsage;
  }

  std::ofstream csv(out);
  if (!csv) {
    std::cerr << "sweep: cannot open " << out << "\n";
    return kIoError;
  }

  ordered_json config{{"command", "sweep"}, {"m", m},
                      {"g", gs},            {"D", Ds},
                      {"tol", tol},         {"max_iters", max_iters},
                      {"seed", seed},       {"threads", threads}};
  csv << "# rcmps-sweep version=" << kVersion
      << " config_hash=" << config_hash(config) << " seed=" << seed << "\n";
  csv << "g,D,energy,phi,phi2,grad_norm,iterations,wall_time_s,status\n";
  csv.flush();

  const int total = static_cast<int>(gs.size() * Ds.size());
  int ok_cells = 0;

  SweepOptions so;
  so.couplings = gs;
  so.bond_dims = Ds;
  so.optim.grad_tol = tol;
  so.optim.max_iters = max_iters;
  so.threads = threads;
  so.seed = seed;
  so.progress = &std::cerr;
  so.on_cell = [&](const SweepCell& c) {
    std::string status;
    if (c.converged) {
      ++ok_cells;
      status = to_string(c.termination);
    } else {
      status = "failed: " + c.error;
    }
    std::replace(status.begin(), status.end(), ',', ';');
    std::replace(status.begin(), status.end(), '\n', ';');

    std::ostringstream row;
    row << std::setprecision(12) << c.g << ',' << c.D << ',';
    if (c.converged)
      row << c.energy << ',' << c.phi << ',' << c.phi2 << ',' << c.grad_norm
          << ',' << c.iterations << ',';
    else
      row << ",,,,,";
    row << std::setprecision(3) << std::fixed << c.wall_time_s << ','
        << status << '\n';
    csv << row.str();
    csv.flush();
  };

  try {
    sweep(base, so);
  } catch (const std::exception& e) {
    std::cerr << "sweep: " << e.what() << "\n";
    return kNumerical;
  }
  if (!csv) {
    std::cerr << "sweep: write failure on " << out << "\n";
    return kIoError;
  }
  std::cerr << "sweep: " << ok_cells << "/" << total << " cells converged\n";
  return 10 * ok_cells >= 9 * total ? kOk : kNumerical;
}

CMat random_unitary(int D, std::uint64_t seed) {
  detail::Rng rng(seed);
  CMat A(D, D);
  for (int j = 0; j < D; ++j)
    for (int i = 0; i < D; ++i) A(i, j) = rng.cnormal();
  Eigen::HouseholderQR<CMat> qr(A);
  CMat Q = qr.householderQ();
  CMat R = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < D; ++j) Q.col(j) *= R(j, j) / std::abs(R(j, j));
  return Q;
}

std::string rel_report(const char* what, double got, double want, double rtol) {
  double scale = std::max({std::abs(got), std::abs(want), 1e-8});
  if (std::abs(got - want) <= rtol * scale) return {};
  std::ostringstream os;
  os << what << " " << std::setprecision(10) << got << " vs " << want;
  return os.str();
}

int cmd_check(bool quick) {
  struct Item {
    const char* name;
    std::function<std::string()> run;  // empty string = pass
  };
  std::vector<Item> items;

  items.push_back({"coherent closed forms at D=1", [] {
    ModelParams p{1.0, 2.0};
    Rcmps s;
    s.D = 1;
    s.K = CMat::Constant(1, 1, Complex(0.2, 0.0));
    s.R = CMat::Constant(1, 1, Complex(0.3, 0.0));
    CoherentValues cv = coherent_values(Complex(0.3, 0.0), p);
    EnergyBreakdown eb = energy_density(s, p);
    TransferFixture f = right_fixed_point(s);
    if (std::abs(eb.total - cv.energy) > 1e-8)
      return rel_report("energy", eb.total, cv.energy, 1e-8);
    double phi = phi_expectation(s, f, p.m);
    if (std::abs(phi - cv.phi) > 1e-10)
      return rel_report("phi", phi, cv.phi, 1e-10);
    double phi2 = phi2_density(s, f, *kernel_table(p.m));
    if (std::abs(phi2 - cv.phi2) > 1e-8)
      return rel_report("phi2", phi2, cv.phi2, 1e-8);
    return std::string{};
  }});

  items.push_back({"energy gauge invariance", [] {
    ModelParams p{1.0, 1.0};
    Rcmps s = random_init(3, 0.5, 101);
    CMat U = random_unitary(3, 102);
    Rcmps s2;
    s2.D = 3;
    s2.K = herm(U * s.K * U.adjoint());
    s2.R = U * s.R * U.adjoint();
    double e1 = energy_density(s, p).total;
    double e2 = energy_density(s2, p).total;
    return rel_report("energy", e2, e1, 1e-6);
  }});

  items.push_back({"energy parity under R -> -R", [] {
    ModelParams p{1.0, 1.0};
    Rcmps s = random_init(3, 0.5, 103);
    Rcmps s2 = s;
    s2.R = -s.R;
    double e1 = energy_density(s, p).total;
    double e2 = energy_density(s2, p).total;
    return rel_report("energy", e2, e1, 1e-10);
  }});

  items.push_back({"two-route phi^2 agreement", [] {
    const std::uint64_t seeds[] = {111, 112, 113};
    const int dims[] = {2, 3, 4};
    for (int i = 0; i < 3; ++i) {
      Rcmps s = random_init(dims[i], 0.5, seeds[i]);
      TransferFixture f = right_fixed_point(s);
      double chain = 0.0;
      double w2 = phi2_density(s, f, *kernel_table(1.0), {}, &chain);
      std::string bad = rel_report("phi2 routes", chain, w2, 1e-7);
      if (!bad.empty()) return bad + " at D=" + std::to_string(dims[i]);
    }
    return std::string{};
  }});

  items.push_back({"finite-difference gradient agreement", [] {
    ModelParams p{1.0, 1.0};
    Rcmps s = random_init(2, 0.5, 121);
    RVec ga = pack_gradient(energy_gradient(s, p));
    RVec gf = pack_gradient(fd_gradient(s, p, 1e-5));
    for (int i = 0; i < ga.size(); ++i) {
      double diff = std::abs(ga[i] - gf[i]);
      if (diff > 1e-5 * std::abs(gf[i]) && diff > 1e-7) {
        std::ostringstream os;
        os << "component " << i << ": " << std::setprecision(10) << ga[i]
           << " vs " << gf[i];
        return os.str();
      }
    }
    return std::string{};
  }});

  if (!quick) {
    items.push_back({"quartic term vs dense D=2 evaluation", [] {
      ModelParams p{1.0, 1.0};
      Rcmps s = random_init(2, 0.5, 131);
      EnergyBreakdown eb = energy_density(s, p);
      BruteForceBreakdown bf = bruteforce_energy(s, p);
      std::string bad = rel_report("free part", eb.eps_free, bf.eps_free, 1e-6);
      if (!bad.empty()) return bad;
      return rel_report("quartic part", eb.phi4, bf.phi4, 1e-4);
    }});
  }

  items.push_back({"second-order perturbative coefficient", [] {
    return rel_report("pt2", pt2_coefficient_quadrature(), pt2_coefficient(),
                      1e-6);
  }});

  std::cout << "rcmps " << kVersion << " self-check\n";
  int failed = 0;
  for (const auto& it : items) {
    std::string detail;
    try {
      detail = it.run();
    } catch (const std::exception& e) {
      detail = e.what();
    }
    if (detail.empty()) {
      std::cout << "[ ok ] " << it.name << "\n";
    } else {
      std::cout << "[FAIL] " << it.name << ": " << detail << "\n";
      ++failed;
    }
    std::cout.flush();
  }
  std::cout << (failed == 0 ? "all checks passed\n" : "checks FAILED\n");
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"variational ground states of the 1+1d quartic scalar field"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  double m = 1.0, g = 0.0, tol = 1e-6;
  int D = 0, max_iters = 500, threads = 0;
  std::uint64_t seed = 1;
  std::string init, out, kgrid, grange, state_path;
  std::vector<int> D_list;
  std::vector<double> g_list;
  bool quick = false, override_params = false;

  auto* opt = app.add_subcommand("optimize",
                                 "minimize the energy density at fixed (m, g, D)");
  opt->add_option("--m", m, "mass");
  opt->add_option("--g", g, "quartic coupling");
  opt->add_option("-D", D, "bond dimension");
  opt->add_option("--tol", tol, "gradient max-norm target");
  opt->add_option("--max-iters", max_iters, "iteration cap");
  opt->add_option("--seed", seed, "random seed");
  opt->add_option("--init", init, "warm start: state file or random:<seed>");
  opt->add_option("--out", out, "output state file");
  opt->add_option("--threads", threads, "accepted for symmetry; optimize is serial");

  auto* obs = app.add_subcommand("observe", "evaluate observables of a stored state");
  obs->add_option("state", state_path, "state file")->required();
  auto* obs_m = obs->add_option("--m", m, "mass, must match the file unless --override");
  auto* obs_g = obs->add_option("--g", g, "coupling, must match the file unless --override");
  obs->add_option("--kgrid", kgrid, "momentum grid a:b:step for S_c samples");
  obs->add_flag("--override", override_params, "let flags win over file parameters");

  auto* sw = app.add_subcommand("sweep", "optimize over a (g, D) grid, write CSV");
  sw->add_option("--m", m, "mass");
  sw->add_option("--g", g_list, "coupling value(s)")->delimiter(',');
  sw->add_option("--g-range", grange, "coupling range a:b:step");
  sw->add_option("-D,--D-list", D_list, "bond dimension(s)")->delimiter(',');
  sw->add_option("--tol", tol, "gradient max-norm target");
  sw->add_option("--max-iters", max_iters, "iteration cap per cell");
  sw->add_option("--seed", seed, "random seed");
  sw->add_option("--threads", threads,
                 "worker threads (default: RCMPS_THREADS or hardware)");
  sw->add_option("--out", out, "output CSV file");

  auto* chk = app.add_subcommand("check", "run the self-consistency suite");
  chk->add_flag("--quick", quick, "skip the slow dense cross-checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : kUsage;
  }

  try {
    if (opt->parsed())
      return cmd_optimize(m, g, D, tol, max_iters, seed, init, out);
    if (obs->parsed())
      return cmd_observe(state_path, obs_m->count() > 0, m, obs_g->count() > 0,
                         g, override_params, kgrid);
    if (sw->parsed()) {
      if (!grange.empty()) {
        if (!parse_grid(grange, g_list)) {
          std::cerr << "sweep: bad --g-range, expected a:b:step\n";
          return kUsage;
        }
      }
      return cmd_sweep(m, g_list, D_list, tol, max_iters, seed,
                       resolve_threads(threads), out);
    }
    if (chk->parsed()) return cmd_check(quick);
  } catch (const NumericalError& e) {
    std::cerr << "rcmps: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "rcmps: " << e.what() << "\n";
    return kIoError;
  }
  return kUsage;
}
