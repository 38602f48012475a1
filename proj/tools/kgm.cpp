// kgm command-line driver. Uses only the C interface.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "kgm/kgm.h"

namespace {

struct Options {
  std::string config;
  std::string out;
  std::string seed;
  std::string profile;
  std::vector<std::string> sets;
};

int fail(const char* what, kgm_status s) {
  std::cerr << "kgm: " << what << ": " << kgm_status_string(s) << ": " << kgm_last_error() << "\n";
  return 2;
}

int run(const std::string& command, const Options& o) {
  kgm_config* cfg = nullptr;
  kgm_status s = o.config.empty() ? kgm_config_create(&cfg) : kgm_config_load(o.config.c_str(), &cfg);
  if (s != KGM_OK) return fail("config", s);

  auto set = [&](const std::string& key, const std::string& value) {
    return kgm_config_set(cfg, key.c_str(), value.c_str());
  };
  if (!o.seed.empty() && (s = set("run.seed", o.seed)) != KGM_OK) {
    kgm_config_destroy(cfg);
    return fail("--seed", s);
  }
  if (!o.profile.empty() && (s = set("run.profile", o.profile)) != KGM_OK) {
    kgm_config_destroy(cfg);
    return fail("--profile", s);
  }
  for (const auto& kv : o.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      kgm_config_destroy(cfg);
      std::cerr << "kgm: --set expects key=value, got '" << kv << "'\n";
      return 2;
    }
    if ((s = set(kv.substr(0, eq), kv.substr(eq + 1))) != KGM_OK) {
      kgm_config_destroy(cfg);
      return fail("--set", s);
    }
  }

  kgm_report* report = nullptr;
  s = kgm_run(cfg, command.c_str(), o.out.c_str(), &report);
  kgm_config_destroy(cfg);
  if (s != KGM_OK) return fail(command.c_str(), s);
  std::fputs(kgm_report_text(report), stdout);
  const int code = kgm_report_passed(report) ? 0 : 1;
  kgm_report_destroy(report);
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Static Klein-Gordon-Maxwell solver and experiment harness"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kgm_api_version()));

  Options o;
  const char* commands[][2] = {
      {"solve", "Minimize the reduced functional and verify the solution"},
      {"invariants", "Run the invariant suite"},
      {"sweep-delta", "Sweep the coupling scale across the smallness threshold"},
      {"nonexistence", "Check decay of descent iterates for zero total flux"},
      {"constants", "Estimate the embedding and extension constants"},
      {"residual", "Evaluate the strong residual of a supplied pair (u, phi)"},
  };
  std::string chosen;
  for (const auto& c : commands) {
    auto* sub = app.add_subcommand(c[0], c[1]);
    sub->add_option("--config", o.config, "Configuration file (key = value)")->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "Output directory for report.txt and artifacts");
    sub->add_option("--seed", o.seed, "Random seed");
    sub->add_option("--profile", o.profile, "Grid profile")->check(CLI::IsMember({"fast", "fidelity"}));
    sub->add_option("--set", o.sets, "Override a configuration key (key=value), repeatable");
    sub->callback([&chosen, name = std::string(c[0])] { chosen = name; });
  }

  CLI11_PARSE(app, argc, argv);
  return run(chosen, o);
}
