#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "arratia/cli.hpp"

namespace {

using arratia::Json;
namespace cli = arratia::cli;

struct Flags {
  std::optional<std::uint64_t> seed;
  std::optional<long long> replicates;
  unsigned threads = 0;
  std::string out = "out";
  std::string config;

  std::string profile;
  std::optional<double> alpha;
  std::optional<double> center;
  std::vector<int> levels;
  std::optional<double> dt;
  std::optional<bool> bridge;

  std::optional<double> t_end;
  std::optional<double> t_min;
  std::optional<double> lambda;
  std::optional<std::size_t> n_times;
  std::string grid;

  std::vector<std::string> observables;
  std::optional<double> u0;
  bool fit = false;

  std::string suite;
  bool quick = false;
  std::optional<double> drift;
  std::optional<double> t;
};

void add_profile_options(CLI::App* sub, Flags& f) {
  sub->add_option("--profile", f.profile, "uniform | power | square | path to profile JSON");
  sub->add_option("--alpha", f.alpha, "exponent of the power profile");
  sub->add_option("--center", f.center, "center u0 of the power profile");
  sub->add_option("--dt", f.dt, "time step");
  sub->add_option("--bridge", f.bridge, "bridge crossing correction (true/false)");
}

void add_grid_options(CLI::App* sub, Flags& f) {
  sub->add_option("--grid", f.grid, "geometric | uniform");
  sub->add_option("--t-end", f.t_end, "last save time");
  sub->add_option("--t-min", f.t_min, "smallest save time of a geometric grid");
  sub->add_option("--lambda", f.lambda, "geometric grid ratio");
  sub->add_option("--n-times", f.n_times, "number of save times");
}

Json resolve(const std::string& command, const Flags& f) {
  Json c = cli::default_config(command);
  if (!f.config.empty()) cli::overlay(c, cli::load_config_file(f.config));
  c["command"] = command;
  if (f.seed) c["seed"] = *f.seed;
  if (f.replicates) c["replicates"] = *f.replicates;

  std::optional<int> level;
  if (command != "converge" && !f.levels.empty()) {
    if (f.levels.size() != 1) throw arratia::ConfigError("--levels takes a single level for " + command);
    level = f.levels.front();
  }
  if (!f.profile.empty()) {
    c["profile"] = cli::profile_argument(f.profile, f.alpha, f.center, level);
  } else if (level) {
    c["profile"]["level"] = *level;
  }
  if (f.dt) c["stepper"]["dt"] = *f.dt;
  if (f.bridge) c["stepper"]["bridge_correction"] = *f.bridge;

  if (c.contains("grid")) {
    Json& g = c["grid"];
    if (!f.grid.empty()) g["kind"] = f.grid;
    if (f.t_end) g["t_end"] = *f.t_end;
    if (f.t_min) g["t_min"] = *f.t_min;
    if (f.lambda) g["lambda"] = *f.lambda;
    if (f.n_times) g["n"] = *f.n_times;
  }
  if (command == "estimate") {
    if (!f.observables.empty()) c["observables"] = f.observables;
    if (f.u0) c["u0"] = *f.u0;
    if (f.fit) c["fit"] = true;
  }
  if (command == "verify") {
    if (!f.suite.empty()) c["suite"] = f.suite;
    if (f.quick) c["quick"] = true;
    if (f.drift) c["inject_drift"] = *f.drift;
  }
  if (command == "converge") {
    if (!f.levels.empty()) c["levels"] = f.levels;
    if (f.u0) c["u0"] = *f.u0;
    if (f.t) c["t"] = *f.t;
  }
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation and statistical verification of the modified Arratia flow"};
  app.require_subcommand(1);
  Flags f;
  app.add_option("--seed", f.seed, "master seed")->configurable(false);
  app.add_option("--replicates", f.replicates, "number of replicates");
  app.add_option("--threads", f.threads, "worker threads (0: all cores)");
  app.add_option("--out", f.out, "output directory");
  app.add_option("--config", f.config, "run config or manifest JSON");
  app.fallthrough();

  auto* sim = app.add_subcommand("simulate", "write trajectory CSV");
  add_profile_options(sim, f);
  add_grid_options(sim, f);
  sim->add_option("--levels", f.levels, "dyadic level of the profile");

  auto* est = app.add_subcommand("estimate", "write observable curves and exponent fits");
  add_profile_options(est, f);
  add_grid_options(est, f);
  est->add_option("--levels", f.levels, "dyadic level of the profile");
  est->add_option("--observable", f.observables, "mass | inverse_mass | abs_displacement | cluster_count");
  est->add_option("--u0", f.u0, "mass coordinate");
  est->add_flag("--fit", f.fit, "fit log-log exponents");

  auto* ver = app.add_subcommand("verify", "run verification suites");
  ver->add_option("--suite", f.suite, "suite name, comma list, or all");
  ver->add_flag("--quick", f.quick, "reduced replicate counts");
  ver->add_option("--inject-drift", f.drift, "")->group("");

  auto* con = app.add_subcommand("converge", "dyadic approximation stabilization table");
  add_profile_options(con, f);
  con->add_option("--levels", f.levels, "dyadic levels, at least three")->delimiter(',');
  con->add_option("--u0", f.u0, "mass coordinate");
  con->add_option("--t", f.t, "time");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return cli::kUsageError;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  Json config;
  try {
    config = resolve(command, f);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kUsageError;
  }
  cli::Context ctx;
  ctx.out_dir = f.out;
  ctx.threads = f.threads;
  return cli::run_guarded(config, ctx);
}
