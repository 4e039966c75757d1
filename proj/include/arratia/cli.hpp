#pragma once

// Batch commands behind the arratia command-line tool. Each command takes a
// fully resolved JSON run config, writes its outputs plus manifest.json into
// the output directory and returns a process exit code.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "arratia/errors.hpp"
#include "arratia/estimators.hpp"
#include "arratia/flow_sim.hpp"
#include "arratia/io.hpp"
#include "arratia/mass_profile.hpp"
#include "arratia/replicates.hpp"
#include "arratia/verify.hpp"

namespace arratia::cli {

enum ExitCode : int { kOk = 0, kVerificationFailure = 1, kUsageError = 2 };

inline Json default_stepper_json() {
  return Json{{"dt", 2e-6},         {"bridge_correction", true}, {"adaptive", false}, {"adaptive_c", 1.0},
              {"dt_min", 1e-9},     {"warmup_ratio", 0.0},       {"warmup_dt0", 1e-9}, {"drift", 0.0}};
}

inline Json default_config(const std::string& command) {
  Json c;
  c["command"] = command;
  c["seed"] = 1;
  c["profile"] = Json{{"kind", "uniform"}, {"total_mass", 1.0}, {"level", 10}};
  c["stepper"] = default_stepper_json();
  if (command == "simulate") {
    c["replicates"] = 1;
    c["grid"] = Json{{"kind", "uniform"}, {"t_end", 0.1}, {"n", 10}};
  } else if (command == "estimate") {
    c["replicates"] = 1000;
    c["grid"] = Json{{"kind", "geometric"}, {"t_min", 1e-4}, {"t_end", 1e-2}, {"lambda", 0.7}};
    c["observables"] = Json::array({"mass"});
    c["u0"] = 0.5;
    c["fit"] = false;
  } else if (command == "verify") {
    c["replicates"] = nullptr;  // per-suite default
    c["suite"] = "all";
    c["quick"] = false;
    c["inject_drift"] = 0.0;
  } else if (command == "converge") {
    c["replicates"] = 2000;
    c["profile"] = Json{{"kind", "power"}, {"alpha", 2.0}, {"u0", 0.0}, {"scale", 1.0}, {"total_mass", 1.0}};
    c["levels"] = Json::array({6, 7, 8, 9, 10});
    c["u0"] = 0.5;
    c["t"] = 0.01;
  } else {
    throw ConfigError("unknown command '" + command + "'");
  }
  return c;
}

// Recursive overlay of `patch` onto `base`.
inline void overlay(Json& base, const Json& patch) {
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    if (it.value().is_object() && base.contains(it.key()) && base[it.key()].is_object() && it.key() != "profile") {
      overlay(base[it.key()], it.value());
    } else {
      base[it.key()] = it.value();
    }
  }
}

// A config file is either a bare config or a manifest wrapping one.
inline Json load_config_file(const std::string& path) {
  Json j = read_json_file(path);
  if (j.contains("config") && j["config"].is_object()) return j["config"];
  return j;
}

// Profile named on the command line: a built-in family or a JSON file path.
inline Json profile_argument(const std::string& arg, std::optional<double> alpha, std::optional<double> center,
                             std::optional<int> level) {
  Json p;
  if (arg == "uniform") {
    p = Json{{"kind", "uniform"}, {"total_mass", 1.0}};
  } else if (arg == "power") {
    p = Json{{"kind", "power"}, {"alpha", alpha.value_or(1.0)}, {"u0", center.value_or(0.5)}, {"scale", 1.0},
             {"total_mass", 1.0}};
  } else if (arg == "square") {
    p = Json{{"kind", "power"}, {"alpha", 2.0}, {"u0", 0.0}, {"scale", 1.0}, {"total_mass", 1.0}};
  } else {
    if (!std::filesystem::exists(arg)) throw ConfigError("profile file not found: '" + arg + "'");
    p = read_json_file(arg);
  }
  if (level) p["level"] = *level;
  return p;
}

inline StepperConfig stepper_from_json(const Json& j) {
  StepperConfig s;
  s.dt = j.value("dt", s.dt);
  s.bridge_correction = j.value("bridge_correction", s.bridge_correction);
  s.adaptive = j.value("adaptive", s.adaptive);
  s.adaptive_c = j.value("adaptive_c", s.adaptive_c);
  s.dt_min = j.value("dt_min", s.dt_min);
  s.warmup_ratio = j.value("warmup_ratio", s.warmup_ratio);
  s.warmup_dt0 = j.value("warmup_dt0", s.warmup_dt0);
  s.drift = j.value("drift", s.drift);
  s.record_events = false;
  return s;
}

inline std::vector<double> grid_from_json(const Json& g) {
  const std::string kind = g.value("kind", std::string("geometric"));
  if (kind == "geometric") {
    const double t_end = g.at("t_end").get<double>();
    const double lambda = g.value("lambda", 0.7);
    if (g.contains("n")) return geometric_grid(t_end, lambda, g.at("n").get<std::size_t>());
    return geometric_grid_between(g.at("t_min").get<double>(), t_end, lambda);
  }
  if (kind == "uniform") return uniform_grid(g.at("t_end").get<double>(), g.at("n").get<std::size_t>());
  if (kind == "list") {
    auto t = g.at("times").get<std::vector<double>>();
    StepperConfig probe;
    probe.save_times = t;
    probe.validate();
    return t;
  }
  throw ConfigError("unknown grid kind '" + kind + "'");
}

inline RunOptions run_options(const Json& c, unsigned threads, std::size_t fallback_replicates = 1000) {
  RunOptions r;
  const Json& rep = c.at("replicates");
  if (rep.is_null()) {
    r.replicates = fallback_replicates;
  } else {
    const auto n = rep.get<std::int64_t>();
    if (n <= 0) throw ConfigError("replicates must be positive");
    r.replicates = static_cast<std::size_t>(n);
  }
  r.seed = c.at("seed").get<std::uint64_t>();
  r.threads = threads;
  return r;
}

struct Context {
  std::filesystem::path out_dir = ".";
  unsigned threads = 0;
  std::ostream* log = &std::cout;
};

inline void prepare_out(const Context& ctx) {
  std::error_code ec;
  std::filesystem::create_directories(ctx.out_dir, ec);
  if (ec || !std::filesystem::is_directory(ctx.out_dir)) {
    throw ConfigError("cannot create output directory '" + ctx.out_dir.string() + "'");
  }
}

inline void write_manifest(const Context& ctx, const Json& config) {
  write_text_file(ctx.out_dir / "manifest.json", make_manifest(config).dump(2) + "\n");
}

//---------------------------------------------------------------------------//
// simulate
//---------------------------------------------------------------------------//

inline int cmd_simulate(const Json& config, const Context& ctx) {
  const ProfileSpec profile = profile_from_json(config.at("profile"));
  const StepProfile g = profile.realize();
  StepperConfig stepper = stepper_from_json(config.at("stepper"));
  stepper.save_times = grid_from_json(config.at("grid"));
  stepper.validate();
  const RunOptions run = run_options(config, ctx.threads);
  prepare_out(ctx);

  struct Rows {
    std::vector<std::string> chunks;
    void merge(const Rows& o) { chunks.insert(chunks.end(), o.chunks.begin(), o.chunks.end()); }
  };
  const auto rows = run_replicates(
      run, [] { return Rows{}; },
      [&](std::size_t r, Rows& acc) {
        std::ostringstream os;
        write_trajectory_rows(os, r, simulate(g, stepper, {run.seed, r, 0}));
        acc.chunks.push_back(os.str());
      });
  std::string csv = std::string(kTrajectoryHeader) + "\n";
  for (const auto& c : rows.chunks) csv += c;
  write_text_file(ctx.out_dir / "trajectory.csv", csv);
  write_manifest(ctx, config);
  *ctx.log << "wrote " << (ctx.out_dir / "trajectory.csv").string() << " (" << run.replicates << " replicates, "
           << g.size() << " pieces)\n";
  return kOk;
}

//---------------------------------------------------------------------------//
// estimate
//---------------------------------------------------------------------------//

inline std::optional<double> exponent_target(const ProfileSpec& p, ObservableKind kind) {
  if (!p.family || p.family->kind() == ProfileKind::tabulated) return std::nullopt;
  const double alpha = p.family->kind() == ProfileKind::uniform ? 1.0 : p.family->alpha();
  const double kappa = 1.0 / (2.0 * alpha + 1.0);
  switch (kind) {
    case ObservableKind::mass: return kappa;
    case ObservableKind::inverse_mass: return -kappa;
    case ObservableKind::abs_displacement: return alpha * kappa;
    case ObservableKind::cluster_count: return std::nullopt;
  }
  return std::nullopt;
}

inline int cmd_estimate(const Json& config, const Context& ctx) {
  const ProfileSpec profile = profile_from_json(config.at("profile"));
  const StepProfile g = profile.realize();
  StepperConfig stepper = stepper_from_json(config.at("stepper"));
  stepper.save_times = grid_from_json(config.at("grid"));
  const double u0 = config.at("u0").get<double>();
  std::vector<Observable> obs;
  for (const auto& name : config.at("observables")) obs.push_back(parse_observable(name.get<std::string>(), u0));
  if (obs.empty()) throw ConfigError("at least one observable is required");
  const RunOptions run = run_options(config, ctx.threads);
  if (run.replicates < 2) throw ConfigError("estimate needs at least 2 replicates");
  prepare_out(ctx);

  const auto acc = accumulate_observables(g, stepper, obs, run);
  std::ostringstream csv;
  csv << kCurveHeader << '\n';
  std::vector<Curve> curves;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    curves.push_back(curve_from(acc, i, stepper.save_times));
    write_curve_rows(csv, curves.back());
  }
  write_text_file(ctx.out_dir / "curve.csv", csv.str());

  if (config.value("fit", false)) {
    const double t_lo = config.contains("fit_range") ? config["fit_range"][0].get<double>()
                                                     : std::max(stepper.save_times.front(), 20.0 * stepper.dt);
    const double t_hi = config.contains("fit_range") ? config["fit_range"][1].get<double>() : stepper.save_times.back();
    Json fits = Json::array();
    for (std::size_t i = 0; i < obs.size(); ++i) {
      Json f = fit_to_json(fit_exponent(fit_points(curves[i]), t_lo, t_hi), exponent_target(profile, obs[i].kind));
      f["observable"] = curves[i].observable;
      fits.push_back(f);
    }
    write_text_file(ctx.out_dir / "fit.json", (fits.size() == 1 ? fits[0] : fits).dump(2) + "\n");
  }
  write_manifest(ctx, config);
  *ctx.log << "wrote " << (ctx.out_dir / "curve.csv").string() << '\n';
  return kOk;
}

//---------------------------------------------------------------------------//
// verify
//---------------------------------------------------------------------------//

struct SuiteSettings {
  bool quick = false;
  std::uint64_t seed = 1;
  std::optional<std::size_t> replicates;
  unsigned threads = 0;
  double drift = 0.0;

  MonteCarlo mc(std::size_t full_n, std::size_t quick_n, double dt, double quick_dt) const {
    MonteCarlo m;
    m.run.replicates = replicates.value_or(quick ? quick_n : full_n);
    m.run.seed = seed;
    m.run.threads = threads;
    m.stepper.dt = quick ? quick_dt : dt;
    m.stepper.drift = drift;
    m.stepper.record_events = false;
    return m;
  }
};

using Suite = std::function<std::vector<VerificationReport>(const SuiteSettings&)>;

inline std::vector<MassBoundCase> default_mass_bound_cases() {
  const double rs[] = {0.02, 0.05, 0.1, 0.2};
  const double ts[] = {1e-4, 3e-4, 1e-3, 3e-3, 1e-2};
  const double us[] = {0.3, 0.5, 0.6};
  std::vector<MassBoundCase> out;
  std::size_t k = 0;
  for (double r : rs) {
    for (double t : ts) out.push_back({us[k++ % 3], r, t, Side::right});
  }
  return out;
}

// Flat over [0.25, 0.75): every coordinate there starts in one particle of mass 0.5.
inline StepProfile flat_control_profile() { return StepProfile::equal_pieces({0.0, 1.0, 1.0, 2.0}); }

inline const std::map<std::string, Suite>& suites() {
  static const std::map<std::string, Suite> table{
      {"two_particle",
       [](const SuiteSettings& s) {
         return std::vector{check_two_particle({0.5, 0.5, 0.1, 0.0}, 0.01, s.mc(100000, 20000, 1e-6, 1e-5))};
       }},
      {"mass_bound",
       [](const SuiteSettings& s) {
         const auto mc = s.mc(100000, 5000, 2e-6, 1e-5);
         auto reps = check_mass_bounds(dyadic_step_approximation(TabulatedProfile::uniform(), 10),
                                       default_mass_bound_cases(), mc);
         reps.push_back(check_mass_bound(0.3, 0.01, 0.4, flat_control_profile(), mc));
         reps.back().check = "mass_bound_flat_control";
         return reps;
       }},
      {"inverse_mass",
       [](const SuiteSettings& s) {
         return std::vector{check_inverse_mass_integral(dyadic_step_approximation(TabulatedProfile::uniform(), 8), 1.0,
                                                        geometric_grid_between(1e-3, 1e-1, 0.7),
                                                        s.mc(2000, 300, 1e-5, 2e-5))};
       }},
      {"moment_growth",
       [](const SuiteSettings& s) {
         return std::vector{check_moment_growth(StepProfile::equal_pieces({0.0, 10.0, 20.0, 30.0}), 0.5,
                                                geometric_grid_between(1e-4, 1e-2, 0.7),
                                                s.mc(4000, 1000, 1e-5, 1e-5))};
       }},
      {"qv_identity",
       [](const SuiteSettings& s) {
         const TwoParticleSpec tp{0.5, 0.5, 0.1, 0.0};
         auto two = s.mc(10000, 2000, 1e-6, 1e-5);
         two.stepper.save_times = geometric_grid(0.01, 0.7, 8);
         QvOptions a;
         a.compare_times = two.stepper.save_times;
         a.closed_form = tp;
         auto r1 = check_qv_identity(0.25, tp.profile(), two, a);
         r1.check = "qv_identity_two_particle";
         auto uni = s.mc(10000, 1000, 1e-6, 2e-6);
         uni.stepper.save_times = geometric_grid(0.01, 0.7, 20);
         QvOptions b;
         b.compare_times.assign(uni.stepper.save_times.end() - 8, uni.stepper.save_times.end());
         auto r2 = check_qv_identity(0.5, dyadic_step_approximation(TabulatedProfile::uniform(), 8), uni, b);
         r2.check = "qv_identity_uniform";
         return std::vector{r1, r2};
       }},
      {"martingale",
       [](const SuiteSettings& s) {
         return std::vector{check_martingale({0.3, 0.5, 0.7}, {{1e-3, 1e-2}, {1e-2, 5e-2}},
                                             dyadic_step_approximation(TabulatedProfile::uniform(), 8),
                                             s.mc(4000, 1000, 1e-5, 2e-5))};
       }},
      {"center_of_mass",
       [](const SuiteSettings& s) {
         return std::vector{check_center_of_mass(dyadic_step_approximation(TabulatedProfile::uniform(), 8), 0.1,
                                                 s.mc(10000, 2000, 1e-4, 1e-4))};
       }},
      {"mass_exponent",
       [](const SuiteSettings& s) {
         const auto grid = geometric_grid_between(1e-4, 1e-2, 0.7);
         const auto mc = s.mc(10000, 1000, 2e-6, 2e-6);
         auto a1 = check_mass_exponent(TabulatedProfile::uniform(), 10, 0.5, grid, mc);
         auto a2 = check_mass_exponent(TabulatedProfile::power(2.0, 0.5), 10, 0.5, grid, mc);
         return std::vector{a1, a2};
       }},
      {"displacement_exponent",
       [](const SuiteSettings& s) {
         const auto grid = geometric_grid_between(1e-4, 1e-2, 0.7);
         auto a1 = check_displacement_exponent(TabulatedProfile::uniform(), 10, 0.5, grid,
                                               s.mc(10000, 1000, 2e-6, 2e-6));
         auto ctl = check_displacement_exponent(StepProfile({0.0, 1.0}, {0.0}), 1.0, 0.5, grid,
                                                s.mc(10000, 2000, 2e-6, 2e-6), ExponentTarget{0.5, 0.02});
         ctl.check = "displacement_exponent_single_cluster";
         return std::vector{a1, ctl};
       }},
      {"rescaling",
       [](const SuiteSettings& s) {
         RescalingOptions o;
         return std::vector{check_rescaling(o, s.mc(4000, 500, 1e-6, 2e-6))};
       }},
      {"dyadic_convergence",
       [](const SuiteSettings& s) {
         return std::vector{check_dyadic_convergence(TabulatedProfile::power(2.0, 0.0), {6, 7, 8, 9, 10}, 0.5, 0.01,
                                                     s.mc(10000, 1000, 2e-6, 5e-6))};
       }},
      {"lil",
       [](const SuiteSettings& s) {
         LilOptions o;
         return std::vector{
             check_lil_pathwise(dyadic_step_approximation(TabulatedProfile::uniform(), 10), 1.0, o,
                                s.mc(2000, 300, 2e-6, 2e-6))};
       }},
  };
  return table;
}

inline std::vector<std::string> suite_names() {
  std::vector<std::string> out;
  for (const auto& [k, v] : suites()) out.push_back(k);
  return out;
}

inline int cmd_verify(const Json& config, const Context& ctx) {
  SuiteSettings s;
  s.quick = config.value("quick", false);
  s.seed = config.at("seed").get<std::uint64_t>();
  if (!config.at("replicates").is_null()) {
    const auto n = config.at("replicates").get<std::int64_t>();
    if (n <= 0) throw ConfigError("replicates must be positive");
    s.replicates = static_cast<std::size_t>(n);
  }
  s.threads = ctx.threads;
  s.drift = config.value("inject_drift", 0.0);
  const std::string suite = config.at("suite").get<std::string>();
  std::vector<std::string> names;
  if (suite == "all") {
    names = suite_names();
  } else {
    std::stringstream ss(suite);
    for (std::string item; std::getline(ss, item, ',');) {
      if (!suites().count(item)) throw ConfigError("unknown suite '" + item + "'");
      names.push_back(item);
    }
  }
  prepare_out(ctx);
  std::vector<VerificationReport> reports;
  for (const auto& name : names) {
    *ctx.log << "running " << name << "...\n" << std::flush;
    for (auto& r : suites().at(name)(s)) reports.push_back(std::move(r));
  }
  Json j = Json::array();
  bool failed = false;
  for (const auto& r : reports) {
    j.push_back(report_to_json(r));
    failed = failed || r.verdict == Verdict::fail;
  }
  write_text_file(ctx.out_dir / "report.json", j.dump(2) + "\n");
  const std::string table = report_table(reports);
  write_text_file(ctx.out_dir / "report.txt", table);
  write_manifest(ctx, config);
  *ctx.log << table;
  return failed ? kVerificationFailure : kOk;
}

//---------------------------------------------------------------------------//
// converge
//---------------------------------------------------------------------------//

inline int cmd_converge(const Json& config, const Context& ctx) {
  const ProfileSpec profile = profile_from_json(config.at("profile"));
  const auto levels = config.at("levels").get<std::vector<int>>();
  if (levels.size() < 3) throw ConfigError("converge needs at least 3 levels");
  MonteCarlo mc;
  mc.run = run_options(config, ctx.threads);
  mc.stepper = stepper_from_json(config.at("stepper"));
  const double u0 = config.at("u0").get<double>();
  const double t = config.at("t").get<double>();
  prepare_out(ctx);
  std::vector<ConvergenceRow> rows;
  const auto rep = check_dyadic_convergence(profile.as_family(), levels, u0, t, mc, &rows);
  std::ostringstream csv;
  csv << "level,pieces,statistic,value,se,diff_from_previous\n";
  const auto& names = convergence_statistics();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k < names.size(); ++k) {
      csv << rows[i].level << ',' << rows[i].pieces << ',' << names[k] << ',' << fmt17(rows[i].value[k]) << ','
          << fmt17(rows[i].se[k]) << ',';
      if (i > 0) csv << fmt17(std::abs(rows[i].value[k] - rows[i - 1].value[k]));
      csv << '\n';
    }
  }
  write_text_file(ctx.out_dir / "convergence.csv", csv.str());
  write_text_file(ctx.out_dir / "report.json", report_to_json(rep).dump(2) + "\n");
  write_manifest(ctx, config);
  *ctx.log << report_table({rep});
  return rep.verdict == Verdict::fail ? kVerificationFailure : kOk;
}

inline int dispatch(const Json& config, const Context& ctx) {
  const std::string cmd = config.at("command").get<std::string>();
  if (cmd == "simulate") return cmd_simulate(config, ctx);
  if (cmd == "estimate") return cmd_estimate(config, ctx);
  if (cmd == "verify") return cmd_verify(config, ctx);
  if (cmd == "converge") return cmd_converge(config, ctx);
  throw ConfigError("unknown command '" + cmd + "'");
}

// Runs a command, mapping input errors to exit code 2.
inline int run_guarded(const Json& config, const Context& ctx, std::ostream& err = std::cerr) {
  try {
    return dispatch(config, ctx);
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
  } catch (const std::domain_error& e) {
    err << "error: " << e.what() << '\n';
  } catch (const std::out_of_range& e) {
    err << "error: " << e.what() << '\n';
  } catch (const Json::exception& e) {
    err << "error: malformed config: " << e.what() << '\n';
  }
  return kUsageError;
}

}  // namespace arratia::cli
