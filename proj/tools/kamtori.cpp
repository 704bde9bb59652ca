// kamtori command line: one subcommand per experiment kind.
//
// Exit codes: 0 success, 1 invalid input or configuration, 2 numerical
// failure (including failed acceptance criteria).

#include <iostream>
#include <list>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kamtori/acceptance.hpp"
#include "kamtori/config.hpp"
#include "kamtori/errors.hpp"
#include "kamtori/format.hpp"
#include "kamtori/harness.hpp"

namespace {

using namespace kamtori;

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitNumerical = 2;

struct Flag {
  std::string name;  // without leading dashes
  std::string key;   // config key it sets
  std::string help;
};

// Flags shared by the run subcommands; "--n-steps" sets n_steps and so on.
std::vector<Flag> run_flags() {
  std::vector<Flag> flags;
  for (const auto& key : config_keys()) {
    if (key == "experiment") continue;
    std::string name = key;
    for (auto& c : name)
      if (c == '_') c = '-';
    flags.push_back({name, key, "config key '" + key + "'"});
  }
  return flags;
}

struct SubcommandState {
  std::map<std::string, std::string> values;  // flag name -> raw text
  std::string config_path;
  ExperimentKind kind = ExperimentKind::kIntegrate;
  std::map<std::string, std::string> renames;  // flag name -> config key
};

CLI::App* add_run_command(CLI::App& app, const std::string& name, const std::string& about,
                          SubcommandState& st, const std::map<std::string, std::string>& extra) {
  CLI::App* sub = app.add_subcommand(name, about);
  sub->set_help_flag("--help", "print this help and exit");  // -h would clash with --h
  sub->add_option("--config", st.config_path, "key = value config file")->check(CLI::ExistingFile);
  for (const auto& f : run_flags()) {
    if (extra.count(f.name)) continue;
    st.renames[f.name] = f.key;
    sub->add_option_function<std::string>(
        "--" + f.name, [&st, n = f.name](const std::string& v) { st.values[n] = v; }, f.help);
  }
  for (const auto& [flag, key] : extra) {
    st.renames[flag] = key;
    sub->add_option_function<std::string>(
        "--" + flag, [&st, n = flag](const std::string& v) { st.values[n] = v; },
        "config key '" + key + "'");
  }
  return sub;
}

RunConfig assemble(const SubcommandState& st) {
  RunConfig cfg = st.config_path.empty() ? RunConfig{} : load_config(st.config_path);
  cfg.kind = st.kind;
  for (const auto& [flag, raw] : st.values) {
    try {
      apply_setting(cfg, st.renames.at(flag), raw);
    } catch (const Error& e) {
      throw ConfigError("--" + flag + ": " + e.what());
    }
  }
  return cfg;
}

void print_primary(const RunManifest& m) {
  const auto show = [&](const std::string& file) {
    for (const auto& f : m.files)
      if (f.path == file) {
        std::cout << read_text_file(m.directory / file);
        return true;
      }
    return false;
  };
  if (m.experiment == "spectrum") show("spectrum.csv");
  else if (m.experiment == "scan") show("scan.csv");
  else if (m.experiment == "label") show("label.json");
  else if (m.experiment == "drift") show("drift.json");
  std::cerr << "wrote " << (m.directory / "manifest.json").string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kamtori: symplectic integrators, NAFF and numerical resonances"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(artifact_version()));

  // One state per subcommand: "label" maps --tol to a different key.
  std::list<SubcommandState> states;
  std::vector<std::pair<CLI::App*, SubcommandState*>> runs;
  auto add = [&](const std::string& name, const std::string& about, ExperimentKind kind,
                 const std::map<std::string, std::string>& extra = {}) {
    SubcommandState& st = states.emplace_back();
    st.kind = kind;
    runs.emplace_back(add_run_command(app, name, about, st, extra), &st);
  };
  add("integrate", "integrate one trajectory (trajectory.csv, summary.json)",
      ExperimentKind::kIntegrate);
  add("spectrum", "NAFF spectrum of one trajectory (spectrum.csv)", ExperimentKind::kSpectrum);
  add("scan", "invariant errors over a step-size grid (scan.csv, peaks.json)",
      ExperimentKind::kScan);
  add("label", "resonance label (k, l) for omega_h at h (label.json)", ExperimentKind::kLabel,
      {{"kmax", "k_max"}, {"lmax", "l_max"}, {"tol", "label_tol"}, {"solver-tol", "tol"}});
  add("drift", "frequency drift order over h_values (drift.csv, drift.json)",
      ExperimentKind::kDrift);
  add("portrait", "phase portrait of a one-degree-of-freedom run (portrait.csv)",
      ExperimentKind::kPortrait);

  int figure = 0;
  SubcommandState& fig_st = states.emplace_back();
  CLI::App* fig = add_run_command(app, "figure", "canned experiment for figure 1, 2, 3 or 4",
                                  fig_st, {});
  fig->add_option("number", figure, "figure number")->required()->check(CLI::Range(1, 4));

  AcceptanceOptions acc;
  bool list_only = false;
  CLI::App* verify = app.add_subcommand("verify-acceptance", "run the acceptance criteria");
  verify->add_option("--only", acc.only, "criterion id (repeatable)");
  verify->add_option("--threads", acc.threads, "scan worker threads (0: all cores)");
  verify->add_flag("--list", list_only, "print criterion ids and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (verify->parsed()) {
      if (list_only) {
        for (const auto& id : acceptance_ids()) std::cout << id << "\n";
        return kExitOk;
      }
      std::size_t passed = 0, total = 0;
      run_acceptance(acc, [&](const CriterionResult& r) {
        std::cout << format_result(r) << std::endl;
        passed += r.passed ? 1 : 0;
        ++total;
      });
      std::cout << passed << "/" << total << " criteria passed" << std::endl;
      return passed == total ? kExitOk : kExitNumerical;
    }

    RunConfig cfg;
    if (fig->parsed()) {
      fig_st.kind = static_cast<ExperimentKind>(static_cast<int>(ExperimentKind::kFigure1) +
                                                figure - 1);
      cfg = assemble(fig_st);
    } else {
      for (const auto& [sub, st] : runs)
        if (sub->parsed()) cfg = assemble(*st);
    }
    print_primary(run(cfg));
    return kExitOk;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
}
