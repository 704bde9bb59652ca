#include "kamtori/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <numbers>

#include <json.hpp>

#include "kamtori/errors.hpp"
#include "kamtori/format.hpp"

namespace kamtori {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string_view artifact_version() { return "0.1.0"; }

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

ordered_json to_json(const std::vector<double>& v) {
  ordered_json a = ordered_json::array();
  for (double x : v) a.push_back(x);
  return a;
}

ordered_json peaks_json(const std::vector<Peak>& peaks) {
  ordered_json a = ordered_json::array();
  for (const auto& p : peaks) a.push_back({{"h", p.h}, {"error", p.error}, {"index", p.index}});
  return a;
}

std::string dump(const ordered_json& j) { return j.dump(2) + "\n"; }

std::string h_tag(double h) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", h);
  return buf;
}

// Collects emitted files and tracks the current stage for failure reports.
class RunContext {
 public:
  RunContext(const RunConfig& cfg, fs::path dir) : cfg_(cfg), dir_(std::move(dir)) {}

  void stage(std::string name) { stage_ = std::move(name); }
  const std::string& current_stage() const { return stage_; }

  void emit(const std::string& name, std::string_view content) {
    write_text_file(dir_ / name, content);
    files_.push_back({name, sha256_hex(content), content.size()});
  }

  std::vector<ManifestFile> take_files() { return std::move(files_); }
  const RunConfig& cfg() const { return cfg_; }

 private:
  const RunConfig& cfg_;
  fs::path dir_;
  std::string stage_ = "setup";
  std::vector<ManifestFile> files_;
};

std::vector<SpectrumLine> trajectory_spectrum(const Trajectory& traj, const SystemModel& system,
                                              std::size_t component, std::size_t n_lines) {
  return naff_decompose(observable_series(traj, system, component), n_lines);
}

ordered_json frequencies_json(const Trajectory& traj, const SystemModel& system,
                              const PhaseState& s0, std::size_t n_lines) {
  ordered_json j;
  j["h"] = traj.h;
  j["scheme"] = std::string(traj.scheme.cli_name());
  j["omega_h"] = to_json(fundamental_frequencies(traj, system, n_lines));
  try {
    j["omega_exact"] = to_json(reference_frequency(system, s0));
  } catch (const ArgumentError&) {
    j["omega_exact"] = nullptr;
  }
  return j;
}

ordered_json drift_json(const FrequencyDrift& d, const Scheme& scheme, std::size_t component) {
  return {{"scheme", std::string(scheme.cli_name())},
          {"component", component + 1},
          {"slope", d.fit.slope},
          {"intercept", d.fit.intercept},
          {"r2", d.fit.r2}};
}

void run_integrate(RunContext& ctx, const SystemModel& sys, const PhaseState& s0) {
  const RunConfig& c = ctx.cfg();
  const Scheme scheme = scheme_from_name(*c.scheme);
  ctx.stage("integrate");
  const Trajectory traj = integrate(scheme, sys, s0, *c.h, *c.n_steps, c.solver);
  ctx.stage("write");
  ctx.emit("trajectory.csv", trajectory_csv(traj, sys));
  const DriftCheck d = energy_drift_check(traj, sys, std::abs(*c.h), scheme.order);
  ctx.emit("summary.json", dump({{"h", *c.h},
                                 {"scheme", *c.scheme},
                                 {"n_steps", *c.n_steps},
                                 {"order", scheme.order},
                                 {"max_energy_error", d.max_error},
                                 {"c_est", d.c_est},
                                 {"first_half_max", d.first_half_max},
                                 {"second_half_max", d.second_half_max},
                                 {"bounded", d.passed}}));
}

void run_spectrum(RunContext& ctx, const SystemModel& sys, const PhaseState& s0,
                  const std::string& prefix = "") {
  const RunConfig& c = ctx.cfg();
  const Scheme scheme = scheme_from_name(*c.scheme);
  ctx.stage("integrate");
  const Trajectory traj = integrate(scheme, sys, s0, *c.h, *c.n_steps, c.solver);
  ctx.stage("naff");
  auto lines = trajectory_spectrum(traj, sys, c.component - 1, c.n_lines);
  // Report lines down to 1e-6 of the strongest one.
  if (!lines.empty()) {
    const double floor = 1e-6 * std::abs(lines.front().amplitude);
    std::erase_if(lines, [&](const SpectrumLine& l) { return std::abs(l.amplitude) < floor; });
  }
  const auto freqs = frequencies_json(traj, sys, s0, c.n_lines);
  ctx.stage("write");
  ctx.emit(prefix + "spectrum.csv", spectrum_csv(lines));
  ctx.emit(prefix + "frequencies.json", dump(freqs));
}

void run_drift(RunContext& ctx, const SystemModel& sys, const PhaseState& s0) {
  const RunConfig& c = ctx.cfg();
  const Scheme scheme = scheme_from_name(*c.scheme);
  ctx.stage("drift");
  const FrequencyDrift d = frequency_drift(scheme, sys, s0, *c.h_values, *c.n_steps, c.solver,
                                           c.component - 1, c.n_lines);
  ctx.stage("write");
  ctx.emit("drift.csv", drift_csv(d));
  ctx.emit("drift.json", dump(drift_json(d, scheme, c.component - 1)));
}

void run_label(RunContext& ctx, const SystemModel& sys, const PhaseState& s0) {
  const RunConfig& c = ctx.cfg();
  std::vector<double> omega;
  if (c.omega) {
    omega = *c.omega;
  } else {
    ctx.stage("integrate");
    const Trajectory traj =
        integrate(scheme_from_name(*c.scheme), sys, s0, *c.h, *c.n_steps, c.solver);
    ctx.stage("naff");
    omega = fundamental_frequencies(traj, sys, c.n_lines);
  }
  ctx.stage("label");
  const auto label = search_resonance(omega, *c.h, c.k_max, c.l_max, c.label_tol);
  ordered_json j{{"h", *c.h},       {"omega_h", to_json(omega)}, {"k_max", c.k_max},
                 {"l_max", c.l_max}, {"tol", c.label_tol},       {"found", label.has_value()}};
  if (label) {
    j["k"] = label->k;
    j["l"] = label->l;
    j["residual"] = label->residual;
    j["order"] = label->order;
  }
  ctx.stage("write");
  ctx.emit("label.json", dump(j));
}

void run_portrait(RunContext& ctx, const SystemModel& sys, const PhaseState& s0, double h,
                  const std::string& name) {
  const RunConfig& c = ctx.cfg();
  ctx.stage("integrate h=" + format_real(h));
  const Trajectory traj = integrate(scheme_from_name(*c.scheme), sys, s0, h, *c.n_steps, c.solver);
  ctx.stage("write");
  ctx.emit(name, portrait_csv(traj));
}

std::vector<Peak> scan_peaks(const RunConfig& c, const std::vector<ScanRow>& rows) {
  return detect_peaks(rows, *c.peak_invariant - 1, c.peak_window, c.peak_factor);
}

void run_scan(RunContext& ctx, const SystemModel& sys, const PhaseState& s0,
              const std::string& scheme_name, const std::string& csv_name,
              ordered_json& peaks_out) {
  const RunConfig& c = ctx.cfg();
  const auto grid = config_grid(c);
  ctx.stage("scan " + scheme_name);
  const auto rows = scan_step_sizes(scheme_from_name(scheme_name), sys, s0, grid, *c.n_steps,
                                    c.solver, ScanOptions{c.threads});
  ctx.stage("write");
  ctx.emit(csv_name, scan_csv(rows, sys));
  const auto cols = scan_columns(sys);
  ordered_json per;
  per["scheme"] = scheme_name;
  per["column"] = cols[*c.peak_invariant];
  per["window"] = c.peak_window;
  per["factor"] = c.peak_factor;
  per["peaks"] = peaks_json(scan_peaks(c, rows));
  std::size_t failed = 0;
  for (const auto& r : rows) failed += r.converged ? 0 : 1;
  per["unconverged_rows"] = failed;
  peaks_out.push_back(per);
}

void dispatch(RunContext& ctx, const SystemModel& sys, const PhaseState& s0) {
  const RunConfig& c = ctx.cfg();
  switch (c.kind) {
    case ExperimentKind::kIntegrate:
      run_integrate(ctx, sys, s0);
      break;
    case ExperimentKind::kSpectrum:
      run_spectrum(ctx, sys, s0);
      break;
    case ExperimentKind::kDrift:
      run_drift(ctx, sys, s0);
      break;
    case ExperimentKind::kLabel:
      run_label(ctx, sys, s0);
      break;
    case ExperimentKind::kPortrait:
      run_portrait(ctx, sys, s0, *c.h, "portrait.csv");
      break;
    case ExperimentKind::kScan:
    case ExperimentKind::kFigure2: {
      ordered_json peaks = ordered_json::array();
      run_scan(ctx, sys, s0, *c.scheme, "scan.csv", peaks);
      ctx.emit("peaks.json", dump(peaks.front()));
      break;
    }
    case ExperimentKind::kFigure1:
      run_spectrum(ctx, sys, s0);
      run_drift(ctx, sys, s0);
      break;
    case ExperimentKind::kFigure3: {
      ordered_json index = ordered_json::array();
      for (double h : *c.h_values) {
        const std::string name = "portrait_h" + h_tag(h) + ".csv";
        run_portrait(ctx, sys, s0, h, name);
        index.push_back({{"h", h}, {"file", name}});
      }
      ctx.emit("portraits.json", dump(index));
      break;
    }
    case ExperimentKind::kFigure4: {
      ordered_json peaks = ordered_json::array();
      for (const auto& name : scheme_names())
        run_scan(ctx, sys, s0, name, "scan_" + name + ".csv", peaks);
      ctx.emit("peaks.json", dump(peaks));
      break;
    }
  }
}

// Files listed by an earlier manifest in the same directory. Anything else
// there belongs to the user and is left alone.
void remove_previous_outputs(const fs::path& dir) {
  const fs::path manifest = dir / "manifest.json";
  if (!fs::exists(manifest)) return;
  try {
    const auto j = ordered_json::parse(read_text_file(manifest));
    for (const auto& f : j.at("files")) {
      const fs::path rel(f.at("path").get<std::string>());
      if (rel.is_relative() && rel.filename() == rel) fs::remove(dir / rel);
    }
  } catch (const ordered_json::exception&) {
    throw Error("unreadable manifest.json in '" + dir.string() + "'");
  }
  fs::remove(manifest);
}

}  // namespace

fs::path output_root() {
  const char* env = std::getenv("KAMTORI_OUT");
  return env && *env ? fs::path(env) : fs::path("runs");
}

fs::path run_directory(const RunConfig& cfg) {
  const fs::path dir(cfg.output_dir);
  return dir.is_absolute() ? dir : output_root() / dir;
}

std::string manifest_json(const RunManifest& m) {
  ordered_json j;
  j["artifact"] = "kamtori";
  j["version"] = m.version;
  j["experiment"] = m.experiment;
  j["status"] = m.status;
  if (m.status != "ok") {
    j["failed_stage"] = m.failed_stage;
    j["error"] = m.error;
  }
  j["started"] = m.started;
  j["finished"] = m.finished;
  ordered_json cfg = ordered_json::object();
  for (const auto& [k, v] : m.config) cfg[k] = v;
  j["config"] = cfg;
  ordered_json files = ordered_json::array();
  for (const auto& f : m.files)
    files.push_back({{"path", f.path}, {"sha256", f.sha256}, {"bytes", f.bytes}});
  j["files"] = files;
  return dump(j);
}

RunManifest run(const RunConfig& raw) {
  const RunConfig cfg = resolve(raw);
  const SystemPtr system = build_system(cfg);
  const PhaseState s0 = initial_state(cfg, *system);

  RunManifest m;
  m.experiment = std::string(experiment_name(cfg.kind));
  m.version = std::string(artifact_version());
  m.config = config_entries(cfg);
  m.directory = run_directory(cfg);
  m.started = utc_now();

  fs::create_directories(m.directory);
  remove_previous_outputs(m.directory);

  RunContext ctx(cfg, m.directory);
  try {
    dispatch(ctx, *system, s0);
    m.status = "ok";
  } catch (const NumericalError& e) {
    m.status = "failed";
    m.failed_stage = ctx.current_stage();
    m.error = e.what();
    m.files = ctx.take_files();
    m.finished = utc_now();
    write_text_file(m.directory / "manifest.json", manifest_json(m));
    throw;
  }
  m.files = ctx.take_files();
  m.finished = utc_now();
  write_text_file(m.directory / "manifest.json", manifest_json(m));
  return m;
}

std::vector<double> reference_frequency(const SystemModel& system, const PhaseState& s0) {
  if (system.name() == "pendulum") {
    const double energy = eval_hamiltonian(system, s0);
    return {2.0 * std::numbers::pi / pendulum_period(energy)};
  }
  if (system.has_action_angle()) {
    const PhaseState aa = to_action_angle(system, s0);
    if (auto w = system.exact_frequency(aa.p)) return *w;
  }
  throw ArgumentError("no exact frequency available for system '" + std::string(system.name()) +
                      "'");
}

FrequencyDrift frequency_drift(const Scheme& scheme, const SystemModel& system,
                               const PhaseState& s0, std::span<const double> h_values,
                               std::size_t n_steps, const SolverConfig& cfg,
                               std::size_t component, std::size_t n_lines) {
  if (component >= system.dof()) throw ArgumentError("component out of range");
  const double exact = reference_frequency(system, s0)[component];
  FrequencyDrift out;
  std::vector<double> hs, errs;
  for (double h : h_values) {
    const Trajectory traj = integrate(scheme, system, s0, h, n_steps, cfg);
    const double w = fundamental_frequencies(traj, system, n_lines)[component];
    out.points.push_back({h, w, exact, std::abs(w - exact)});
    hs.push_back(h);
    errs.push_back(std::abs(w - exact));
  }
  out.fit = fit_convergence_order(hs, errs);
  return out;
}

std::string trajectory_csv(const Trajectory& traj, const SystemModel& system) {
  const std::size_t n = system.dof();
  std::vector<std::string> header{"n", "t"};
  for (std::size_t i = 1; i <= n; ++i) header.push_back("p" + std::to_string(i));
  for (std::size_t i = 1; i <= n; ++i) header.push_back("q" + std::to_string(i));
  header.push_back("H");
  CsvWriter w(header);
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    const PhaseState& s = traj.states[k];
    w.add_int(static_cast<long long>(k)).add(static_cast<double>(k) * traj.h);
    for (double v : s.p) w.add(v);
    for (double v : s.q) w.add(v);
    w.add(system.hamiltonian(s.p, s.q));
    w.end_row();
  }
  return w.text();
}

std::string spectrum_csv(const std::vector<SpectrumLine>& lines) {
  CsvWriter w({"line_index", "omega", "re_amp", "im_amp", "abs_amp"});
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& l = lines[i];
    w.add_int(static_cast<long long>(i))
        .add(l.omega)
        .add(l.amplitude.real())
        .add(l.amplitude.imag())
        .add(std::abs(l.amplitude));
    w.end_row();
  }
  return w.text();
}

std::vector<std::string> scan_columns(const SystemModel& system) {
  std::vector<std::string> cols{"h"};
  for (std::size_t j = 1; j <= system.first_integral_count(); ++j)
    cols.push_back("err_I" + std::to_string(j));
  cols.push_back("err_H");
  cols.push_back("converged");
  return cols;
}

std::string scan_csv(const std::vector<ScanRow>& rows, const SystemModel& system) {
  CsvWriter w(scan_columns(system));
  for (const auto& r : rows) {
    w.add(r.h);
    for (double e : r.errors) w.add(e);
    w.add_int(r.converged ? 1 : 0);
    w.end_row();
  }
  return w.text();
}

std::string drift_csv(const FrequencyDrift& drift) {
  CsvWriter w({"h", "omega_h", "omega_exact", "abs_error"});
  for (const auto& p : drift.points) {
    w.add(p.h).add(p.omega_h).add(p.omega_exact).add(p.error);
    w.end_row();
  }
  return w.text();
}

std::string portrait_csv(const Trajectory& traj) {
  CsvWriter w({"n", "p", "q"});
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    const PhaseState& s = traj.states[k];
    if (s.dof() != 1)
      throw UnsupportedDimensionError("phase portraits need a one-degree-of-freedom trajectory");
    w.add_int(static_cast<long long>(k)).add(s.p[0]).add(wrap_angle(s.q[0]));
    w.end_row();
  }
  return w.text();
}

void emit_phase_portrait(const Trajectory& traj, const fs::path& path) {
  write_text_file(path, portrait_csv(traj));
}

}  // namespace kamtori
