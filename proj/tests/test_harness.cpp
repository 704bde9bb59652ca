#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "kamtori/config.hpp"
#include "kamtori/errors.hpp"
#include "kamtori/format.hpp"
#include "kamtori/harness.hpp"
#include "support.hpp"

using namespace kamtori;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// Fresh output root per test case, exported through KAMTORI_OUT.
struct TempRoot {
  fs::path dir;
  TempRoot() {
    static int counter = 0;
    dir = fs::temp_directory_path() /
          ("kamtori_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(dir);
    fs::create_directories(dir);
    ::setenv("KAMTORI_OUT", dir.c_str(), 1);
  }
  ~TempRoot() {
    ::unsetenv("KAMTORI_OUT");
    std::error_code ec;
    fs::remove_all(dir, ec);
  }
};

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(read_text_file(path));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

std::string header_of(const fs::path& path) {
  const std::string text = read_text_file(path);
  return text.substr(0, text.find('\n'));
}

json load_json(const fs::path& path) { return json::parse(read_text_file(path)); }

std::string cli() { return KAMTORI_CLI_PATH; }

int run_cli(const std::string& args, std::string* out = nullptr) {
  const fs::path capture = fs::temp_directory_path() / ("kamtori_cli_" + std::to_string(::getpid()));
  const int status = std::system((cli() + " " + args + " >" + capture.string() + " 2>&1").c_str());
  if (out) *out = read_text_file(capture);
  fs::remove(capture);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

RunConfig quick(ExperimentKind kind, std::string text = "") {
  RunConfig c = parse_config(text);
  c.kind = kind;
  return c;
}

// First-order distance of (p, q) from the level set H = e.
double level_distance(double p, double q, double e) {
  const double g = std::hypot(p, std::sin(q));
  return std::abs(p * p / 2 + 1 - std::cos(q) - e) / std::max(g, 1e-12);
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("number formatting round-trips") {
  kt::Gen g(31);
  for (int i = 0; i < 1000; ++i) {
    const double v = g.uniform(-1, 1) * std::pow(10.0, g.uniform(-300, 300));
    CHECK(std::stod(format_real(v)) == v);
  }
  CHECK(format_real(0.1) == "0.10000000000000001");
  CHECK(format_real(2.0) == "2");
  CHECK(format_real(-0.0).find(',') == std::string::npos);
}

TEST_CASE("csv writer") {
  CsvWriter w({"a", "b"});
  w.add(1.5).add_text("x");
  w.end_row();
  CHECK(w.text() == "a,b\n1.5,x\n");
  CHECK(w.rows() == 1);
  w.add(1.0);
  CHECK_THROWS(w.end_row());
  CsvWriter w2({"a"});
  w2.add(1.0);
  CHECK_THROWS(w2.add(2.0));
}

TEST_CASE("sha256 known vectors") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("config parsing") {
  const RunConfig c = parse_config(
      "# reference state\n"
      "experiment = figure1\n"
      "system = ruessmann3   # three oscillators\n"
      "x0 = 0.2, 0.1, 0.4*sqrt(2)\n"
      "y0 = [0.37, 0.2, 0.53]\n"
      "h = 2*pi/100\n"
      "n_steps = 1e3\n"
      "\n"
      "solver = fixed-point\n");
  CHECK(c.kind == ExperimentKind::kFigure1);
  CHECK(*c.system == "ruessmann3");
  REQUIRE(c.p0->size() == 3);
  CHECK((*c.p0)[2] == doctest::Approx(0.4 * std::sqrt(2.0)).epsilon(1e-15));
  CHECK(*c.q0 == std::vector<double>{0.37, 0.2, 0.53});
  CHECK(*c.h == doctest::Approx(2 * kt::kPi / 100).epsilon(1e-15));
  CHECK(*c.n_steps == 1000);
  CHECK(c.solver.method == SolverMethod::kFixedPoint);
}

TEST_CASE("minimal figure 1 config takes documented defaults") {
  const RunConfig c = resolve(parse_config("experiment = figure1\n"));
  CHECK(*c.system == "pendulum");
  CHECK(*c.scheme == "im");
  CHECK(*c.p0 == std::vector<double>{0.7});
  CHECK(*c.q0 == std::vector<double>{0.0});
  CHECK(*c.h == 0.01);
  CHECK(*c.n_steps == 100000);
  CHECK(*c.h_values == std::vector<double>{0.01, 0.02, 0.05, 0.1, 0.2, 0.5});
  CHECK(c.solver.tol == 1e-13);
  CHECK(c.solver.max_iter == 50);
  CHECK(c.n_lines == 5);
  CHECK(c.output_dir == "figure1");

  const RunConfig f4 = resolve(parse_config("experiment = figure4\n"));
  CHECK(*f4.system == "ruessmann3");
  CHECK(config_grid(f4).size() == 299);
  const RunConfig f2 = resolve(parse_config("experiment = figure2\n"));
  CHECK(config_grid(f2).size() == 600);
}

TEST_CASE("config errors") {
  auto error_of = [](const std::string& text) -> std::string {
    try {
      resolve(parse_config(text));
    } catch (const ConfigError& e) {
      return e.what();
    } catch (const ArgumentError& e) {
      return std::string("argument: ") + e.what();
    }
    return "";
  };
  std::string e = error_of("h = 0.1\nscheme = imm\n");
  CHECK(e.find("line 2") != std::string::npos);
  CHECK(e.find("imm") != std::string::npos);
  CHECK(e.find("im, sv, se, runge") != std::string::npos);

  e = error_of("experiment = scan\nh_start = 2\nh_stop = 1\n");
  CHECK(e.find("h_stop < h_start") != std::string::npos);

  CHECK(error_of("colour = red\n").find("line 1: unknown key 'colour'") != std::string::npos);
  CHECK(error_of("h = 0.1\nh = 0.2\n").find("line 2: duplicate key") != std::string::npos);
  CHECK(error_of("p0 = 1\nx0 = 2\n").find("duplicate") != std::string::npos);
  CHECK(error_of("h = 1/0\n").find("line 1: non-finite") != std::string::npos);
  CHECK(error_of("h = 1e999\n").find("line 1") != std::string::npos);
  CHECK(error_of("h = abc\n").find("line 1") != std::string::npos);
  CHECK(error_of("just text\n").find("key = value") != std::string::npos);
  CHECK(error_of("system = kepler\n").find("pendulum, ruessmann3") != std::string::npos);
  CHECK(error_of("experiment = integrate\nh_step = 0.1\n").find("scan") != std::string::npos);
  CHECK(error_of("experiment = drift\nh_values = 0.1, 0.2\n").find("at least 3") != std::string::npos);
  CHECK(error_of("p0 = 0.1, 0.2\nq0 = 0, 0\n").find("component") != std::string::npos);
  CHECK(error_of("component = 2\n").find("component") != std::string::npos);
  CHECK(error_of("peak_window = 4\n").find("odd") != std::string::npos);
  CHECK(error_of("tol = 0\n").find("tol") != std::string::npos);
  CHECK(error_of("experiment = portrait\nsystem = ruessmann3\n").find("argument") != std::string::npos);
  CHECK_THROWS_AS(resolve(parse_config("experiment = figure3\nsystem = ruessmann3\n")),
                  UnsupportedDimensionError);
  CHECK_THROWS_AS(load_config("/nonexistent/kamtori.cfg"), ConfigError);
}

TEST_CASE("config-defined systems") {
  const RunConfig c = resolve(parse_config(
      "system = duffing\nhamiltonian = p1^2/2 + q1^2/2 + q1^4/4\ndof = 1\np0 = 0.5\nq0 = 0\n"));
  const SystemPtr s = build_system(c);
  CHECK(s->name() == "duffing");
  CHECK(eval_hamiltonian(*s, PhaseState({0.5}, {0.0})) == doctest::Approx(0.125));
  CHECK_THROWS_AS(resolve(parse_config("system = duffing\nhamiltonian = p1^2/2\n")), ConfigError);
  CHECK_THROWS_AS(resolve(parse_config("system = pendulum\nhamiltonian = p1^2/2\np0=1\nq0=1\n")),
                  ConfigError);
}

TEST_CASE("config echo parses back to the same config") {
  for (const char* text : {"experiment = figure1\n", "experiment = figure4\nthreads = 2\n",
                           "experiment = label\nomega = 0.7627\nh = 2.05\n",
                           "system = d\nhamiltonian = p1^2/2 + q1^4\nintegrals = p1^2/2 + q1^4\n"
                           "p0 = 0.1\nq0 = 0.2\nsolver = fixed-point\n"}) {
    const RunConfig a = resolve(parse_config(text));
    const RunConfig b = resolve(parse_config(config_echo(a)));
    CHECK(config_entries(a) == config_entries(b));
  }
}

TEST_CASE("output root") {
  {
    TempRoot root;
    CHECK(output_root() == root.dir);
    RunConfig c;
    c.output_dir = "x";
    CHECK(run_directory(c) == root.dir / "x");
    c.output_dir = "/abs/y";
    CHECK(run_directory(c) == fs::path("/abs/y"));
  }
  CHECK(output_root() == fs::path("runs"));
}

TEST_CASE("integrate with zero steps") {
  TempRoot root;
  const RunManifest m = run(quick(ExperimentKind::kIntegrate, "n_steps = 0\np0 = 0.3\nq0 = 1.25\n"));
  CHECK(m.status == "ok");
  const auto rows = read_csv(m.directory / "trajectory.csv");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == std::vector<std::string>{"n", "t", "p1", "q1", "H"});
  CHECK(rows[1][0] == "0");
  CHECK(std::stod(rows[1][2]) == 0.3);
  CHECK(std::stod(rows[1][3]) == 1.25);
  CHECK(std::stod(rows[1][4]) == eval_hamiltonian(PendulumModel{}, PhaseState({0.3}, {1.25})));
  const json s = load_json(m.directory / "summary.json");
  CHECK(s["max_energy_error"].get<double>() == 0.0);
}

TEST_CASE("manifest completeness and reproducibility") {
  TempRoot root;
  const RunConfig c = quick(ExperimentKind::kSpectrum, "n_steps = 4000\nh = 0.05\n");
  const RunManifest a = run(c);
  std::set<std::string> on_disk;
  for (const auto& e : fs::directory_iterator(a.directory))
    if (e.path().filename() != "manifest.json") on_disk.insert(e.path().filename().string());
  std::set<std::string> listed;
  for (const auto& f : a.files) {
    listed.insert(f.path);
    CHECK(sha256_file(a.directory / f.path) == f.sha256);
    CHECK(fs::file_size(a.directory / f.path) == f.bytes);
  }
  CHECK(on_disk == listed);
  CHECK(listed == std::set<std::string>{"spectrum.csv", "frequencies.json"});

  const json mj = load_json(a.directory / "manifest.json");
  CHECK(mj["status"] == "ok");
  CHECK(mj["experiment"] == "spectrum");
  CHECK(mj["version"] == std::string(artifact_version()));
  CHECK(mj["config"]["n_steps"] == "4000");
  CHECK(mj["files"].size() == 2);
  CHECK_FALSE(mj["started"].get<std::string>().empty());

  // Rerunning into the same directory replaces the outputs byte for byte
  // and leaves foreign files alone.
  write_text_file(a.directory / "notes.txt", "mine");
  const RunManifest b = run(c);
  REQUIRE(a.files.size() == b.files.size());
  for (std::size_t i = 0; i < a.files.size(); ++i) CHECK(a.files[i].sha256 == b.files[i].sha256);
  CHECK(read_text_file(a.directory / "notes.txt") == "mine");
}

TEST_CASE("csv schemas") {
  TempRoot root;
  RunManifest m = run(quick(ExperimentKind::kSpectrum, "n_steps = 2000\n"));
  CHECK(header_of(m.directory / "spectrum.csv") == "line_index,omega,re_amp,im_amp,abs_amp");
  const auto lines = read_csv(m.directory / "spectrum.csv");
  REQUIRE(lines.size() >= 2);
  for (std::size_t i = 1; i < lines.size(); ++i)
    CHECK(std::stod(lines[i][4]) >= 1e-6 * std::stod(lines[1][4]));

  m = run(quick(ExperimentKind::kScan, "h_start = 0.1\nh_stop = 0.3\nh_step = 0.1\nn_steps = 200\n"));
  CHECK(header_of(m.directory / "scan.csv") == "h,err_I1,err_H,converged");
  CHECK(read_csv(m.directory / "scan.csv").size() == 4);
  const json peaks = load_json(m.directory / "peaks.json");
  CHECK(peaks["column"] == "err_H");
  CHECK(peaks["peaks"].empty());

  m = run(quick(ExperimentKind::kScan, "system = ruessmann3\nh_start = 0.1\nh_stop = 0.2\nh_step = 0.1\n"
                                       "n_steps = 100\noutput_dir = r3\n"));
  CHECK(header_of(m.directory / "scan.csv") == "h,err_I1,err_I2,err_I3,err_H,converged");

  m = run(quick(ExperimentKind::kDrift, "h_values = 0.05, 0.1, 0.2\nn_steps = 20000\n"));
  CHECK(header_of(m.directory / "drift.csv") == "h,omega_h,omega_exact,abs_error");
  const json d = load_json(m.directory / "drift.json");
  for (const char* k : {"slope", "intercept", "r2"}) CHECK(d.contains(k));

  m = run(quick(ExperimentKind::kPortrait, "n_steps = 10\n"));
  CHECK(header_of(m.directory / "portrait.csv") == "n,p,q");
}

TEST_CASE("label experiment") {
  TempRoot root;
  RunManifest m = run(quick(ExperimentKind::kLabel, "omega = 0.7627\nh = 2.05\n"));
  json j = load_json(m.directory / "label.json");
  CHECK(j["found"] == true);
  CHECK(j["k"] == json::array({4}));
  CHECK(j["l"] == 1);
  CHECK(j["order"] == 4);
  m = run(quick(ExperimentKind::kLabel, "omega = 0.9681\nh = 0.01\nlabel_tol = 0.01\n"));
  j = load_json(m.directory / "label.json");
  CHECK(j["found"] == false);
  CHECK_FALSE(j.contains("k"));
}

TEST_CASE("phase portraits") {
  PendulumModel pend;
  const Scheme im = Scheme::of(SchemeKind::kImplicitMidpoint);
  auto worst_distance = [&](double h) {
    const Trajectory t = integrate(im, pend, PhaseState({0.7}, {0.0}), h, 10000);
    const auto rows = read_csv([&] {
      const fs::path p = fs::temp_directory_path() / ("kamtori_portrait_" + std::to_string(::getpid()));
      emit_phase_portrait(t, p);
      return p;
    }());
    double worst = 0.0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const double q = std::stod(rows[i][2]);
      CHECK(q >= 0.0);
      CHECK(q < 2 * kt::kPi);
      worst = std::max(worst, level_distance(std::stod(rows[i][1]), q, 0.245));
    }
    return worst;
  };
  CHECK(worst_distance(0.01) <= 1e-3);
  CHECK(worst_distance(2.05) > 1e-2);

  CHECK(portrait_csv(Trajectory{im, 0.1, {}, "pendulum"}) == "n,p,q\n");
  RuessmannModel r;
  CHECK_THROWS_AS(portrait_csv(integrate(im, r, RuessmannModel::reference_initial_state(), 0.1, 2)),
                  UnsupportedDimensionError);
}

TEST_CASE("validation errors write nothing") {
  TempRoot root;
  CHECK_THROWS_AS(run(quick(ExperimentKind::kIntegrate, "scheme = imm\n")), ConfigError);
  CHECK_THROWS_AS(run(quick(ExperimentKind::kScan, "h_start = 2\nh_stop = 1\n")), ConfigError);
  CHECK(fs::is_empty(root.dir));
}

TEST_CASE("numerical failure marks the manifest") {
  TempRoot root;
  const RunConfig c = quick(ExperimentKind::kIntegrate,
                            "system = root\nhamiltonian = p1^2/2 + sqrt(q1)\np0 = 0\nq0 = 0.1\n"
                            "scheme = runge\nh = 1\nn_steps = 5\n");
  CHECK_THROWS_AS(run(c), DivergenceError);
  const json mj = load_json(root.dir / "integrate" / "manifest.json");
  CHECK(mj["status"] == "failed");
  CHECK(mj["failed_stage"] == "integrate");
  CHECK(mj["error"].get<std::string>().find("at step") != std::string::npos);
  CHECK(mj["files"].empty());
}

TEST_CASE("figure 1") {
  TempRoot root;
  const RunManifest m = run(quick(ExperimentKind::kFigure1));
  const auto rows = read_csv(m.directory / "spectrum.csv");
  bool found = false;
  for (std::size_t i = 1; i < rows.size(); ++i)
    found = found || std::abs(std::stod(rows[i][1]) - 0.9681) <= 1e-3;
  CHECK(found);
  const json f = load_json(m.directory / "frequencies.json");
  CHECK(std::abs(f["omega_h"][0].get<double>() - 0.9681) <= 1e-3);
  const json d = load_json(m.directory / "drift.json");
  CHECK(std::abs(d["slope"].get<double>() - 2.0) <= 0.2);
  CHECK(read_csv(m.directory / "drift.csv").size() == 7);
}

TEST_CASE("figure 2 on a narrowed grid") {
  TempRoot root;
  const RunManifest m = run(quick(ExperimentKind::kFigure2, "h_start = 1.9\nh_stop = 2.2\nthreads = 1\n"));
  const json p = load_json(m.directory / "peaks.json");
  bool near = false;
  for (const auto& pk : p["peaks"]) near = near || (pk["h"] >= 1.95 && pk["h"] <= 2.15);
  CHECK(near);
}

TEST_CASE("figures 3 and 4 emit their file sets") {
  TempRoot root;
  RunManifest m = run(quick(ExperimentKind::kFigure3, "h_values = 0.01, 2.05\nn_steps = 500\n"));
  const json idx = load_json(m.directory / "portraits.json");
  REQUIRE(idx.size() == 2);
  for (const auto& e : idx) CHECK(fs::exists(m.directory / e["file"].get<std::string>()));
  CHECK(idx[1]["file"] == "portrait_h2.05.csv");

  m = run(quick(ExperimentKind::kFigure4, "h_start = 0.1\nh_stop = 0.3\nh_step = 0.1\nn_steps = 200\n"));
  for (const char* s : {"im", "sv", "se", "runge"})
    CHECK(header_of(m.directory / ("scan_" + std::string(s) + ".csv")) ==
          "h,err_I1,err_I2,err_I3,err_H,converged");
  const json p = load_json(m.directory / "peaks.json");
  REQUIRE(p.size() == 4);
  CHECK(p[3]["scheme"] == "runge");
}

TEST_CASE("command line exit codes") {
  TempRoot root;
  std::string out;
  CHECK(run_cli("--version", &out) == 0);
  CHECK(out.find(std::string(artifact_version())) != std::string::npos);
  CHECK(run_cli("") == 1);
  CHECK(run_cli("integrate --bogus 1") == 1);
  CHECK(run_cli("integrate --scheme imm", &out) == 1);
  CHECK(out.find("imm") != std::string::npos);
  CHECK(run_cli("scan --h-start 2 --h-stop 1") == 1);

  CHECK(run_cli("label --omega 0.7627 --h 2.05 --kmax 8 --lmax 2 --tol 0.05", &out) == 0);
  const json j = json::parse(out.substr(0, out.rfind("wrote")));
  CHECK(j["k"] == json::array({4}));

  CHECK(run_cli("integrate --system root --hamiltonian 'p1^2/2 + sqrt(q1)' --p0 0 --q0 0.1 "
                "--scheme runge --h 1 --n-steps 5",
                &out) == 2);
  CHECK(out.find("numerical failure") != std::string::npos);

  const fs::path cfg = root.dir / "run.cfg";
  write_text_file(cfg, "n_steps = 0\np0 = 0.25\nq0 = 0\noutput_dir = from_file\n");
  CHECK(run_cli("integrate --config " + cfg.string()) == 0);
  CHECK(fs::exists(root.dir / "from_file" / "trajectory.csv"));
  CHECK(run_cli("integrate --config " + cfg.string() + " --p0 0.5") == 0);
  CHECK(read_csv(root.dir / "from_file" / "trajectory.csv")[1][2] == "0.5");

  CHECK(run_cli("verify-acceptance --list", &out) == 0);
  CHECK(out.find("naff-properties") != std::string::npos);
  CHECK(run_cli("verify-acceptance --only no-such-criterion") == 1);
}

}  // TEST_SUITE
