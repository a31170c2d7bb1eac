// Exercises the installed command-line tool end to end: exit codes, record
// shapes, state files, and the sweep CSV.  argv[1] is the tool binary.

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

static int failures = 0;
#define EXPECT(cond)                                                      \
  do {                                                                    \
    if (!(cond)) {                                                        \
      std::printf("FAILED %s:%d: %s\n", __FILE__, __LINE__, #cond);       \
      ++failures;                                                         \
    }                                                                     \
  } while (0)

namespace {

std::string bin;
fs::path work;

int run(const std::string& args, const std::string& stdout_file = "") {
  std::string cmd = bin + " " + args;
  if (!stdout_file.empty()) cmd += " > " + stdout_file;
  cmd += " 2> " + (work / "stderr.txt").string();
  const int rc = std::system(cmd.c_str());
  if (rc == -1) return -1;
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -2;
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  EXPECT(bool(in));
  return json::parse(in, nullptr, false);
}

struct CsvRow {
  double energy = 0, phi = 0, phi2 = 0, grad_norm = 0, wall = 0;
  int iterations = 0;
  std::string status;
  bool converged = false;
};

std::map<std::pair<double, int>, CsvRow> read_sweep_csv(const fs::path& p,
                                                        std::string* header) {
  std::ifstream in(p);
  EXPECT(bool(in));
  std::string line;
  std::getline(in, line);  // "# rcmps-sweep ..." banner
  EXPECT(line.rfind("# rcmps-sweep", 0) == 0);
  std::getline(in, *header);
  std::map<std::pair<double, int>, CsvRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() < 9) {
      EXPECT(f.size() >= 9);
      continue;
    }
    CsvRow r;
    const double g = std::stod(f[0]);
    const int D = std::stoi(f[1]);
    r.converged = !f[2].empty();
    if (r.converged) {
      r.energy = std::stod(f[2]);
      r.phi = std::stod(f[3]);
      r.phi2 = std::stod(f[4]);
      r.grad_norm = std::stod(f[5]);
      r.iterations = std::stoi(f[6]);
    }
    r.wall = std::stod(f[7]);
    r.status = f[8];
    rows[{g, D}] = r;
  }
  return rows;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::printf("usage: test_cli <rcmps binary>\n");
    return 2;
  }
  bin = argv[1];
  work = fs::temp_directory_path() /
         ("rcmps_cli_" + std::to_string(::getpid()));
  fs::create_directories(work);
  const std::string state = (work / "state.json").string();
  const std::string rec_path = (work / "rec.json").string();

  // ---- usage and version ----
  EXPECT(run("--version", rec_path) == 0);
  EXPECT(run("") == 64);                       // a subcommand is required
  EXPECT(run("optimize -D 2") == 64);          // --out is required
  EXPECT(run("optimize --out " + state) == 64);  // random start needs -D
  EXPECT(run("optimize -D 2 --m 0 --out " + state) == 64);  // bad mass

  // ---- optimize: free theory converges and writes a loadable state ----
  int rc = run("optimize --m 1 --g 0 -D 3 --seed 4 --out " + state, rec_path);
  EXPECT(rc == 0);
  json rec = read_json(rec_path);
  EXPECT(rec.is_object());
  EXPECT(rec["record"] == "optimize-report");
  EXPECT(rec.contains("version"));
  EXPECT(rec.contains("config_hash"));
  EXPECT(rec["seed"] == 4);
  EXPECT(double(rec["energy"]) <= 1e-8);
  EXPECT(rec["stop"] == "grad_converged" || rec["stop"] == "energy_plateau");
  EXPECT(fs::exists(state));

  // deterministic rerun: identical energy and hash
  const std::string rec2_path = (work / "rec2.json").string();
  EXPECT(run("optimize --m 1 --g 0 -D 3 --seed 4 --out " + state, rec2_path) == 0);
  json rec2 = read_json(rec2_path);
  EXPECT(double(rec["energy"]) == double(rec2["energy"]));
  EXPECT(rec["config_hash"] == rec2["config_hash"]);

  // --init random:<seed> overrides --seed in the record
  EXPECT(run("optimize --m 1 --g 0 -D 2 --init random:99 --out " + state,
             rec_path) == 0);
  EXPECT(read_json(rec_path)["seed"] == 99);

  // iteration cap surfaces as exit code 2
  EXPECT(run("optimize --m 1 --g 1 -D 2 --seed 1 --max-iters 2 --out " + state) == 2);

  // ---- observe ----
  // state.json now holds a D=2 g=0 vacuum from the random:99 run above
  EXPECT(run("optimize --m 1 --g 0 -D 2 --seed 3 --out " + state) == 0);
  EXPECT(run("observe " + state, rec_path) == 0);
  rec = read_json(rec_path);
  EXPECT(rec["record"] == "observe-report");
  EXPECT(rec["D"] == 2);
  EXPECT(std::abs(double(rec["energy"]["total"])) <= 1e-8);
  EXPECT(std::abs(double(rec["phi"])) <= 1e-6);
  EXPECT(rec["S_c"].size() == 0);  // no --kgrid, no samples

  EXPECT(run("observe " + state + " --kgrid 0:10:0.1", rec_path) == 0);
  rec = read_json(rec_path);
  EXPECT(rec["S_c"].size() == 101);
  for (const auto& s : rec["S_c"]) EXPECT(double(s["S_c"]) >= -1e-10);
  EXPECT(double(rec["S_c"][0]["k"]) == 0.0);
  EXPECT(std::abs(double(rec["S_c"][100]["k"]) - 10.0) < 1e-12);

  // parameter guard: flags must match the stored (m, g) unless --override
  EXPECT(run("observe " + state + " --g 1") == 5);
  EXPECT(run("observe " + state + " --g 1 --override", rec_path) == 0);
  EXPECT(double(read_json(rec_path)["g"]) == 1.0);
  EXPECT(run("observe " + state + " --kgrid nonsense") == 64);
  EXPECT(run("observe " + (work / "missing.json").string()) == 4);
  {
    std::ofstream corrupt(work / "corrupt.json");
    corrupt << "{\"format\": \"something-else\"}";
  }
  EXPECT(run("observe " + (work / "corrupt.json").string()) == 4);

  // warm start from the stored state, grown to a larger bond dimension
  EXPECT(run("optimize --m 1 --g 0 -D 3 --init " + state + " --out " +
             (work / "grown.json").string(), rec_path) == 0);
  EXPECT(run("observe " + (work / "grown.json").string(), rec_path) == 0);
  EXPECT(read_json(rec_path)["D"] == 3);

  // ---- sweep ----
  const std::string csv = (work / "sweep.csv").string();
  EXPECT(run("sweep --m 1 -D 1,2 --out " + csv) == 64);  // no couplings
  EXPECT(run("sweep --m 1 --g 0,0.4 --out " + csv) == 64);  // no dims
  EXPECT(run("sweep --m 1 --g 0,0.4 -D 1,2") == 64);  // no --out
  EXPECT(run("sweep --m 1 --g-range 1:0:0.5 -D 1 --out " + csv) == 64);

  EXPECT(run("sweep --m 1 --g 0,0.4 -D 1,2 --threads 2 --seed 7 --out " + csv) == 0);
  std::string header;
  auto rows = read_sweep_csv(csv, &header);
  EXPECT(header == "g,D,energy,phi,phi2,grad_norm,iterations,wall_time_s,status");
  EXPECT(rows.size() == 4);
  for (const auto& [key, row] : rows) {
    EXPECT(row.converged);
    EXPECT(row.wall > 0.0);
    EXPECT(row.status == "grad_converged" || row.status == "energy_plateau");
  }
  EXPECT((rows[{0.0, 1}].energy <= 1e-8));
  EXPECT((rows[{0.0, 2}].energy <= 1e-8));
  EXPECT((rows[{0.4, 2}].energy <= rows[{0.4, 1}].energy + 1e-9));

  // g-range expansion: 0:1:0.5 -> {0, 0.5, 1}
  EXPECT(run("sweep --m 1 --g-range 0:1:0.5 -D 1 --seed 7 --out " + csv) == 0);
  rows = read_sweep_csv(csv, &header);
  EXPECT(rows.size() == 3);
  EXPECT(rows.count({0.5, 1}) == 1);

  // ---- self-check ----
  EXPECT(run("check --quick", rec_path) == 0);

  fs::remove_all(work);
  if (failures == 0) std::printf("cli: all checks passed\n");
  return failures == 0 ? 0 : 1;
}
