#pragma once

// Statistical checks of the flow against its known probability bounds,
// moment exponents, martingale identities and the two-particle closed form.
// Every check returns a VerificationReport; a check fails only when its
// confidence interval excludes the theoretical region.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "arratia/errors.hpp"
#include "arratia/estimators.hpp"
#include "arratia/flow_sim.hpp"
#include "arratia/mass_profile.hpp"
#include "arratia/replicates.hpp"

namespace arratia {

enum class Verdict { pass, fail, inconclusive };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "?";
}

struct Metric {
  std::string name;
  double value = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double target_lo = 0.0;
  double target_hi = 0.0;
  Verdict verdict = Verdict::inconclusive;
  std::string note;
};

struct VerificationReport {
  std::string check;
  std::vector<std::pair<std::string, std::string>> parameters;
  std::vector<Metric> metrics;
  std::vector<std::string> notes;
  Verdict verdict = Verdict::inconclusive;
  std::size_t replicates = 0;
  double wall_seconds = 0.0;

  void param(const std::string& key, double v) {
    std::ostringstream os;
    os.precision(10);
    os << v;
    parameters.emplace_back(key, os.str());
  }
  void param(const std::string& key, const std::string& v) { parameters.emplace_back(key, v); }

  const Metric* metric(const std::string& name) const {
    for (const auto& m : metrics) {
      if (m.name == name) return &m;
    }
    return nullptr;
  }

  // fail dominates, then inconclusive; an empty report is inconclusive.
  void finalize() {
    if (metrics.empty()) {
      verdict = Verdict::inconclusive;
      return;
    }
    verdict = Verdict::pass;
    for (const auto& m : metrics) {
      if (m.verdict == Verdict::fail) {
        verdict = Verdict::fail;
        return;
      }
      if (m.verdict == Verdict::inconclusive) verdict = Verdict::inconclusive;
    }
  }
};

// Point estimate inside the band: pass. CI disjoint from the band: fail.
inline Verdict band_verdict(double value, double ci_lo, double ci_hi, double lo, double hi) {
  if (value >= lo && value <= hi) return Verdict::pass;
  if (ci_hi < lo || ci_lo > hi) return Verdict::fail;
  return Verdict::inconclusive;
}

inline Verdict overlap_verdict(double a_lo, double a_hi, double b_lo, double b_hi) {
  return (a_hi >= b_lo && b_hi >= a_lo) ? Verdict::pass : Verdict::fail;
}

inline Metric band_metric(std::string name, double value, double se, double lo, double hi, std::string note = {}) {
  Metric m{std::move(name), value, value - kZ95 * se, value + kZ95 * se, lo, hi, Verdict::inconclusive, std::move(note)};
  m.verdict = band_verdict(m.value, m.ci_lo, m.ci_hi, lo, hi);
  return m;
}

// Two estimates with their own intervals; the second interval is stored as the target.
inline Metric overlap_metric(std::string name, double value, double lo, double hi, double other_lo, double other_hi,
                             std::string note = {}) {
  Metric m{std::move(name), value, lo, hi, other_lo, other_hi, Verdict::inconclusive, std::move(note)};
  m.verdict = overlap_verdict(lo, hi, other_lo, other_hi);
  return m;
}

inline double student_quantile(double p, double dof) {
  return boost::math::quantile(boost::math::students_t_distribution<double>(dof), p);
}

// Two-sided z for a family of `tests` comparisons at overall level 0.95.
inline double bonferroni_z(std::size_t tests) {
  return normal_quantile(1.0 - 0.05 / (2.0 * static_cast<double>(std::max<std::size_t>(1, tests))));
}

namespace detail {

class WallClock {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline StepProfile canonical(const StepProfile& p) { return p.is_canonical() ? p : canonicalize(p); }

// Sorted union of time lists.
inline std::vector<double> merge_times(std::vector<double> a, const std::vector<double>& b) {
  a.insert(a.end(), b.begin(), b.end());
  std::sort(a.begin(), a.end());
  a.erase(std::unique(a.begin(), a.end()), a.end());
  return a;
}

inline std::size_t time_index(const std::vector<double>& grid, double t) {
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (std::abs(grid[i] - t) <= 1e-12 * std::max(1.0, t)) return i;
  }
  throw RangeError("time " + std::to_string(t) + " is not on the simulation grid");
}

// Second moment and its standard error, E[x^2].
struct SecondMoment {
  double value = 0.0;
  double se = 0.0;
};

inline SecondMoment second_moment(const std::vector<double>& xs) {
  RunningMoments m;
  for (double x : xs) m.add(x * x);
  return {m.mean, m.std_error()};
}

// Sample variance with a fourth-moment standard error.
inline SecondMoment sample_variance(const std::vector<double>& xs) {
  RunningMoments m;
  for (double x : xs) m.add(x);
  const double n = static_cast<double>(xs.size());
  double m4 = 0.0;
  for (double x : xs) {
    const double d = x - m.mean;
    m4 += d * d * d * d;
  }
  m4 /= n;
  const double v = m.variance();
  return {v, std::sqrt(std::max(0.0, m4 - v * v) / n)};
}

}  // namespace detail

//---------------------------------------------------------------------------//
// Two-particle closed form
//---------------------------------------------------------------------------//

struct TwoParticleSpec {
  double m1 = 0.5;
  double m2 = 0.5;
  double gap = 0.1;
  double x1 = 0.0;

  double sigma2() const { return 1.0 / m1 + 1.0 / m2; }

  void validate() const {
    if (!(m1 > 0.0 && m2 > 0.0)) throw ConfigError("two-particle masses must be positive");
    if (!(gap > 0.0)) throw ConfigError("two-particle gap must be positive");
  }

  StepProfile profile() const { return StepProfile({0.0, m1, m1 + m2}, {x1, x1 + gap}); }
};

struct TwoParticleOracle {
  double merge_probability = 0.0;
  double mean_mass = 0.0;      // E m seen from particle 1
  double mean_position = 0.0;  // E x1(t)
};

// The gap is a Brownian motion with variance rate 1/m1 + 1/m2 absorbed at 0;
// reflection gives P{tau <= t} = 2 Phi(-gap / (sigma sqrt t)).
inline TwoParticleOracle two_particle_oracle(const TwoParticleSpec& spec, double t) {
  spec.validate();
  if (!(t > 0.0)) throw DomainError("two_particle_oracle needs t > 0");
  const double p = std::isinf(spec.gap) ? 0.0 : 2.0 * normal_cdf(-spec.gap / std::sqrt(spec.sigma2() * t));
  return {p, spec.m1 + spec.m2 * p, spec.x1};
}

// E[1/m(u, s)] for u in the first particle.
inline double two_particle_inverse_mass(const TwoParticleSpec& spec, double s) {
  if (s <= 0.0) return 1.0 / spec.m1;
  const double p = two_particle_oracle(spec, s).merge_probability;
  return (1.0 - p) / spec.m1 + p / (spec.m1 + spec.m2);
}

// int_0^t E[1/m(u, s)] ds, adaptive Gauss-Kronrod.
inline double two_particle_qv(const TwoParticleSpec& spec, double t) {
  auto f = [&](double s) { return two_particle_inverse_mass(spec, s); };
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, 0.0, t, 15, 1e-13);
}

struct MonteCarlo {
  RunOptions run;
  StepperConfig stepper;
};

inline VerificationReport check_two_particle(const TwoParticleSpec& spec, double t, const MonteCarlo& mc,
                                             double tolerance = 0.01) {
  detail::WallClock clock;
  VerificationReport rep;
  rep.check = "two_particle";
  rep.param("m1", spec.m1);
  rep.param("m2", spec.m2);
  rep.param("gap", spec.gap);
  rep.param("t", t);
  rep.param("dt", mc.stepper.dt);
  rep.param("bridge_correction", mc.stepper.bridge_correction ? "on" : "off");
  rep.param("tolerance", tolerance);
  const auto oracle = two_particle_oracle(spec, t);
  StepperConfig cfg = mc.stepper;
  cfg.save_times = {t};
  const StepProfile g = spec.profile();
  const double u1 = 0.5 * spec.m1;
  const auto table = run_replicates(
      mc.run, [] { return ReplicateTable{}; },
      [&](std::size_t r, ReplicateTable& acc) {
        const Trajectory tr = simulate(g, cfg, {mc.run.seed, r, 0});
        const auto& s = tr.snapshots[0];
        acc.rows.push_back({cluster_count(s) == 1 ? 1.0 : 0.0, mass_at(s, u1), position_at(s, u1)});
      });
  RunningMoments merged, mass, pos;
  for (const auto& row : table.rows) {
    merged.add(row[0]);
    mass.add(row[1]);
    pos.add(row[2]);
  }
  rep.metrics.push_back(band_metric("merge_probability", merged.mean, merged.std_error(),
                                    oracle.merge_probability - tolerance, oracle.merge_probability + tolerance,
                                    "oracle 2*Phi(-gap/(sigma*sqrt(t)))"));
  rep.metrics.push_back(band_metric("mean_mass", mass.mean, mass.std_error(), oracle.mean_mass - tolerance,
                                    oracle.mean_mass + tolerance, "oracle m1 + m2*P"));
  const double z = bonferroni_z(1);
  Metric mp{"mean_position", pos.mean, pos.mean - z * pos.std_error(), pos.mean + z * pos.std_error(),
            spec.x1, spec.x1, Verdict::inconclusive, "martingale: E x1(t) = x1(0)"};
  mp.verdict = (mp.ci_lo <= spec.x1 && spec.x1 <= mp.ci_hi) ? Verdict::pass : Verdict::fail;
  rep.metrics.push_back(mp);
  rep.replicates = table.size();
  rep.wall_seconds = clock.seconds();
  rep.finalize();
  return rep;
}

//---------------------------------------------------------------------------//
// Mass lower-bound probability
//---------------------------------------------------------------------------//

struct MassBoundCase {
  double u0 = 0.5;
  double r = 0.1;
  double t = 0.01;
  Side side = Side::right;
};

// P{m(u,t) < r} <= 2 Phi(G sqrt(r/t)) - 1 <= 2 sqrt(r) G / sqrt(2 pi t).
inline double mass_bound_cdf_form(double G, double r, double t) {
  return 2.0 * normal_cdf(G * std::sqrt(r) / std::sqrt(t)) - 1.0;
}

inline double mass_bound_linear_form(double G, double r, double t) {
  return 2.0 * std::sqrt(r) * G / std::sqrt(2.0 * M_PI * t);
}

inline VerificationReport mass_bound_report(const MassBoundCase& c, const StepProfile& g,
                                            const std::vector<double>& masses) {
  VerificationReport rep;
  rep.check = "mass_bound";
  rep.param("u0", c.u0);
  rep.param("r", c.r);
  rep.param("t", c.t);
  rep.param("side", c.side == Side::right ? "right" : "left");
  const double G = increment(g, c.u0, c.r, c.side);
  const double bound = mass_bound_cdf_form(G, c.r, c.t);
  const double linear = mass_bound_linear_form(G, c.r, c.t);
  rep.param("G", G);
  const auto cdf = cdf_from_masses(masses, {c.r}).front();
  rep.replicates = masses.size();
  if (G == 0.0) {
    Metric m{"count_below_r", static_cast<double>(cdf.count), 0.0, static_cast<double>(cdf.count), 0.0, 0.0,
             cdf.count == 0 ? Verdict::pass : Verdict::fail, "flat profile over the window: exact zero required"};
    rep.metrics.push_back(m);
  } else {
    const double lower = clopper_pearson_lower(cdf.count, cdf.n, kCdfLevel);
    Metric m{"p_below_r", cdf.p_hat, lower, cdf.upper, 0.0, bound, Verdict::inconclusive,
             "99% Clopper-Pearson upper bound against 2*Phi(G*sqrt(r/t))-1"};
    m.verdict = cdf.upper <= bound ? Verdict::pass : (lower > bound ? Verdict::fail : Verdict::inconclusive);
    rep.metrics.push_back(m);
    Metric lin{"p_below_r_linear_bound", cdf.p_hat, lower, cdf.upper, 0.0, linear, Verdict::inconclusive,
               "weaker linear form 2*sqrt(r)*G/sqrt(2*pi*t)"};
    lin.verdict = cdf.upper <= linear ? Verdict::pass : (lower > linear ? Verdict::fail : Verdict::inconclusive);
    rep.metrics.push_back(lin);
  }
  rep.finalize();
  return rep;
}

// All cases share one set of replicates simulated over the union of their times.
inline std::vector<VerificationReport> check_mass_bounds(const StepProfile& profile,
                                                         const std::vector<MassBoundCase>& cases,
                                                         const MonteCarlo& mc) {
  detail::WallClock clock;
  const StepProfile g = detail::canonical(profile);
  std::vector<double> times;
  for (const auto& c : cases) {
    validate_r_grid({c.r}, c.u0, g.total_mass(), c.side);
    if (!(c.t > 0.0)) throw DomainError("mass bound check needs t > 0");
    times.push_back(c.t);
  }
  times = detail::merge_times(times, {});
  StepperConfig cfg = mc.stepper;
  cfg.save_times = times;
  const auto table = run_replicates(
      mc.run, [] { return ReplicateTable{}; },
      [&](std::size_t r, ReplicateTable& acc) {
        const Trajectory tr = simulate(g, cfg, {mc.run.seed, r, 0});
        std::vector<double> row;
        row.reserve(cases.size());
        for (const auto& c : cases) row.push_back(mass_at(tr.snapshots[detail::time_index(times, c.t)], c.u0));
        acc.rows.push_back(std::move(row));
      });
  std::vector<VerificationReport> out;
  const double wall = clock.seconds();
  for (std::size_t i = 0; i < cases.size(); ++i) {
    out.push_back(mass_bound_report(cases[i], g, table.column(i)));
    out.back().wall_seconds = wall;
  }
  return out;
}

inline VerificationReport check_mass_bound(double u0, double t, double r, const StepProfile& profile,
                                           const MonteCarlo& mc, Side side = Side::right) {
  return check_mass_bounds(profile, {{u0, r, t, side}}, mc).front();
}

//---------------------------------------------------------------------------//
// Envelope checks: E int du/m^beta <= C/sqrt(t), E sup ||X - g||^(2+delta) <= C t^(1+delta/2)
//---------------------------------------------------------------------------//

namespace detail {

// Every point must not lie significantly above C * t^power, with C fixed by
// the upper CI at the largest time.
inline void envelope_metrics(VerificationReport& rep, const Curve& curve, double power, const std::string& label) {
  const auto& last = curve.points.back();
  const double c_hat = last.ci_hi / std::pow(last.t, power);
  rep.param("envelope_constant", c_hat);
  for (const auto& p : curve.points) {
    if (p.t <= 0.0) continue;
    const double env = c_hat * std::pow(p.t, power);
    Metric m{label + "@t=" + std::to_string(p.t), p.mean, p.ci_lo, p.ci_hi, -INFINITY, env,
             p.ci_lo <= env ? Verdict::pass : Verdict::fail, "curve below calibrated envelope"};
    rep.metrics.push_back(m);
  }
}

inline void slope_note(VerificationReport& rep, const Curve& curve, double t_min, double t_max, const std::string& name,
                       std::optional<std::pair<double, double>> band = std::nullopt) {
  try {
    const auto fit = fit_exponent(fit_points(curve), t_min, t_max);
    rep.param(name + "_slope", fit.slope);
    rep.param(name + "_slope_stderr", fit.stderr_slope);
    if (band) rep.metrics.push_back(band_metric(name + "_slope", fit.slope, fit.stderr_slope, band->first, band->second));
    for (const auto& w : fit.warnings) rep.notes.push_back(w);
  } catch (const ConfigError& e) {
    rep.notes.push_back(std::string("slope fit skipped: ") + e.what());
    if (band) {
      rep.metrics.push_back({name + "_slope", 0.0, 0.0, 0.0, band->first, band->second, Verdict::inconclusive,
                             "window too small"});
    }
  }
}

}  // namespace detail

inline VerificationReport check_inverse_mass_integral(const StepProfile& profile, double beta,
                                                      const std::vector<double>& times, const MonteCarlo& mc,
                                                      double p_integrability = INFINITY) {
  detail::WallClock clock;
  const double beta_max = 1.5 - (std::isinf(p_integrability) ? 0.0 : 1.0 / p_integrability);
  if (!(beta > 0.0 && beta < beta_max)) {
    throw ConfigError("beta must lie in (0, 3/2 - 1/p)");
  }
  const StepProfile g = detail::canonical(profile);
  VerificationReport rep;
  rep.check = "inverse_mass_integral";
  rep.param("beta", beta);
  rep.param("pieces", static_cast<double>(g.size()));
  StepperConfig cfg = mc.stepper;
  cfg.save_times = times;
  const auto acc = run_replicates(
      mc.run, [&] { return EstimatorAccumulator({"inverse_mass_integral"}, times.size()); },
      [&](std::size_t r, EstimatorAccumulator& a) {
        const Trajectory tr = simulate(g, cfg, {mc.run.seed, r, 0});
        for (std::size_t j = 0; j < times.size(); ++j) a.add(0, j, inverse_mass_integral(tr.snapshots[j], beta));
      });
  const Curve curve = curve_from(acc, 0, times);
  detail::envelope_metrics(rep, curve, -0.5, "E_int_m^-beta");
  detail::slope_note(rep, curve, std::max(times.front(), 20.0 * cfg.dt), times.back(), "inverse_mass_integral");
  rep.replicates = mc.run.replicates;
  rep.wall_seconds = clock.seconds();
  rep.finalize();
  return rep;
}

// sum_k m_k^0 |x_{c(k)}(t) - x_k^0|^p : ||X(t) - g||_p^p for a step profile.
inline double lp_distance_pow(const ClusterState& s, const StepProfile& g, double p) {
  double total = 0.0;
  for (const auto& c : s.clusters) {
    for (std::size_t k = c.lo; k <= c.hi; ++k) {
      total += g.piece_mass(k) * std::pow(std::abs(c.position - g.values()[k]), p);
    }
  }
  return total;
}

inline VerificationReport check_moment_growth(const StepProfile& profile, double delta,
                                              const std::vector<double>& times, const MonteCarlo& mc,
                                              double eps = INFINITY, double slope_slack = 0.1) {
  detail::WallClock clock;
  const double delta_max = std::isinf(eps) ? 1.0 : eps / (2.0 + eps);
  if (!(delta >= 0.0 && delta < 1.0 && delta < delta_max)) {
    throw ConfigError("delta must lie in [0, 1) and below eps/(2+eps)");
  }
  const StepProfile g = detail::canonical(profile);
  const double p = 2.0 + delta;
  const double power = 1.0 + 0.5 * delta;
  VerificationReport rep;
  rep.check = "moment_growth";
  rep.param("delta", delta);
  rep.param("target_exponent", power);
  rep.notes.push_back("supremum taken over the saved time grid");
  StepperConfig cfg = mc.stepper;
  cfg.save_times = times;
  const auto acc = run_replicates(
      mc.run, [&] { return EstimatorAccumulator({"sup_lp_distance"}, times.size()); },
      [&](std::size_t r, EstimatorAccumulator& a) {
        const Trajectory tr = simulate(g, cfg, {mc.run.seed, r, 0});
        double running = 0.0;
        for (std::size_t j = 0; j < times.size(); ++j) {
          running = std::max(running, lp_distance_pow(tr.snapshots[j], g, p));
          a.add(0, j, running);
        }
      });
  const Curve curve = curve_from(acc, 0, times);
  for (const auto& pt : curve.points) {
    if (pt.t == 0.0) {
      rep.metrics.push_back({"value_at_t=0", pt.mean, pt.mean, pt.mean, 0.0, 0.0,
                             pt.mean == 0.0 ? Verdict::pass : Verdict::fail, "exact"});
    }
  }
  Curve positive{curve.observable, {}};
  for (const auto& pt : curve.points) {
    if (pt.t > 0.0) positive.points.push_back(pt);
  }
  detail::envelope_metrics(rep, positive, power, "E_sup_lp");
  detail::slope_note(rep, positive, std::max(positive.points.front().t, 20.0 * cfg.dt), times.back(), "moment",
                     std::make_pair(power - slope_slack, INFINITY));
  rep.replicates = mc.run.replicates;
  rep.wall_seconds = clock.seconds();
  rep.finalize();
  return rep;
}

//---------------------------------------------------------------------------//
// Quadratic variation identity
//---------------------------------------------------------------------------//

struct QvOptions {
  std::vector<double> compare_times;            // subset of the simulation grid
  std::optional<StepFunction> test_function;    // defaults to I[u0-0.1, u0+0.1)
  std::optional<TwoParticleSpec> closed_form;   // exact right-hand side when set
  std::size_t batches = kDefaultBatches;
};

namespace detail {

// Save times refined by a geometric grid reaching about 1e-3 of the earliest
// comparison time, so the integral's first panel is small.
inline std::vector<double> qv_grid(const std::vector<double>& save_times, const std::vector<double>& compare) {
  const double first = compare.empty() ? save_times.front() : *std::min_element(compare.begin(), compare.end());
  std::vector<double> out = save_times;
  for (double t : geometric_grid_between(1e-3 * first, save_times.back(), 0.7)) {
    const bool near = std::any_of(save_times.begin(), save_times.end(),
                                  [t](double s) { return std::abs(s - t) <= 1e-6 * s; });
    if (!near && t > 0.0) out.push_back(t);
  }
  return merge_times(std::move(out), {});
}

}  // namespace detail

// E (X(u0,t) - g(u0))^2 against int_0^t E[1/m(u0,s)] ds, and for a test
// function h, E (X(t) - g, h)^2 against int_0^t E ||pr_X(s) h||^2 ds.
// The integrals run over stepper.save_times refined near 0.
inline VerificationReport check_qv_identity(double u0, const StepProfile& profile, const MonteCarlo& mc,
                                            const QvOptions& opts) {
  detail::WallClock clock;
  const StepProfile g = detail::canonical(profile);
  mc.stepper.validate();
  StepperConfig cfg = mc.stepper;
  cfg.save_times = detail::qv_grid(mc.stepper.save_times, opts.compare_times);
  const auto& grid = cfg.save_times;
  if (!(u0 > 0.0 && u0 < g.total_mass())) throw ConfigError("u0 must be interior");
  if (opts.batches < 2 || opts.batches > mc.run.replicates) throw ConfigError("need 2 <= batches <= replicates");
  const StepFunction h = opts.test_function ? *opts.test_function
                                            : indicator(u0 - 0.1, u0 + 0.1, g.total_mass());
  const double gh = g.function().inner(h);
  const double g0 = g(u0);
  const std::size_t nt = grid.size();
  std::vector<std::size_t> cmp;
  for (double t : opts.compare_times) cmp.push_back(detail::time_index(grid, t));

  // columns: [0,nt) inverse mass, [nt,2nt) ||pr h||^2, then displacement and (X-g,h) at compare times
  const auto table = run_replicates(
      mc.run, [] { return ReplicateTable{}; },
      [&](std::size_t r, ReplicateTable& acc) {
        const Trajectory tr = simulate(g, cfg, {mc.run.seed, r, 0});
        std::vector<double> row(2 * nt + 2 * cmp.size());
        for (std::size_t j = 0; j < nt; ++j) {
          const auto& s = tr.snapshots[j];
          row[j] = 1.0 / mass_at(s, u0);
          const StepFunction x = as_step_function(s);
          const StepFunction pr = project(StepProfile({x.breakpoints().begin(), x.breakpoints().end()},
                                                      {x.values().begin(), x.values().end()}),
                                          h);
          row[nt + j] = pr.inner(pr);
        }
        for (std::size_t c = 0; c < cmp.size(); ++c) {
          const auto& s = tr.snapshots[cmp[c]];
          row[2 * nt + c] = position_at(s, u0) - g0;
          row[2 * nt + cmp.size() + c] = as_step_function(s).inner(h) - gh;
        }
        acc.rows.push_back(std::move(row));
      });

  const std::size_t n = table.size();
  const std::size_t B = opts.batches;
  // simultaneous 95% over all comparisons
  const std::size_t family = std::max<std::size_t>(1, 2 * cmp.size());
  const double z = bonferroni_z(family);
  const double tq = student_quantile(1.0 - 0.025 / static_cast<double>(family), static_cast<double>(B - 1));
  // batch means of the integrand curves
  std::vector<std::vector<double>> inv_curve(B, std::vector<double>(nt, 0.0));
  std::vector<std::vector<double>> pr_curve(B, std::vector<double>(nt, 0.0));
  std::vector<std::size_t> count(B, 0);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t b = batch_of(r, n, B);
    ++count[b];
    for (std::size_t j = 0; j < nt; ++j) {
      inv_curve[b][j] += table.rows[r][j];
      pr_curve[b][j] += table.rows[r][nt + j];
    }
  }
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t j = 0; j < nt; ++j) {
      inv_curve[b][j] /= static_cast<double>(count[b]);
      pr_curve[b][j] /= static_cast<double>(count[b]);
    }
  }

  VerificationReport rep;
  rep.check = "qv_identity";
  rep.param("u0", u0);
  rep.param("batches", static_cast<double>(B));
  rep.param("integration_points", static_cast<double>(nt));
  rep.param("simultaneous_z", z);
  rep.param("closed_form", opts.closed_form ? "two_particle" : "monte_carlo");
  for (std::size_t c = 0; c < cmp.size(); ++c) {
    const double t = grid[cmp[c]];
    // left side: second moment of the displacement, normal CI
    const auto lhs = detail::second_moment(table.column(2 * nt + c));
    const double l_lo = lhs.value - z * lhs.se, l_hi = lhs.value + z * lhs.se;
    double r_val, r_lo, r_hi;
    if (opts.closed_form) {
      r_val = r_lo = r_hi = two_particle_qv(*opts.closed_form, t);
    } else {
      RunningMoments bm;
      for (std::size_t b = 0; b < B; ++b) {
        const auto q = qv_integral(grid, inv_curve[b], t);
        if (b == 0 && !q.warning.empty()) rep.notes.push_back(q.warning);
        bm.add(q.value);
      }
      r_val = bm.mean;
      r_lo = bm.mean - tq * bm.std_error();
      r_hi = bm.mean + tq * bm.std_error();
    }
    rep.metrics.push_back(overlap_metric("E(X-g)^2@t=" + std::to_string(t), lhs.value, l_lo, l_hi, r_lo, r_hi,
                                         "target interval is int E[1/m] ds = " + std::to_string(r_val)));
    // test-function version
    const auto lh = detail::second_moment(table.column(2 * nt + cmp.size() + c));
    RunningMoments hm;
    for (std::size_t b = 0; b < B; ++b) hm.add(qv_integral(grid, pr_curve[b], t).value);
    rep.metrics.push_back(overlap_metric("E(X-g,h)^2@t=" + std::to_string(t), lh.value, lh.value - z * lh.se,
                                         lh.value + z * lh.se, hm.mean - tq * hm.std_error(),
                                         hm.mean + tq * hm.std_error(), "target is int E||pr h||^2 ds"));
  }
  rep.replicates = n;
  rep.wall_seconds = clock.seconds();
  rep.finalize();
  return rep;
}

//---------------------------------------------------------------------------//
// Martingale property of X(u0, .)
//---------------------------------------------------------------------------//

struct TimePair {
  double s = 0.0;
  double t = 0.0;
};

inline VerificationReport check_martingale(const std::vector<double>& u0s, const std::vector<TimePair>& pairs,
                                           const StepProfile& profile, const MonteCarlo& mc) {
  detail::WallClock clock;
  const StepProfile g = detail::canonical(profile);
  std::vector<double> times;
  for (const auto& p : pairs) {
    if (!(p.s < p.t) || !(p.s > 0.0)) throw ConfigError("martingale pairs need 0 < s < t");
    times.push_back(p.s);
    times.push_back(p.t);
  }
  times = detail::merge_times(times, {});
  StepperConfig cfg = mc.stepper;
  cfg.save_times = times;
  const std::size_t nt = times.size();
  const auto table = run_replicates(
      mc.run, [] { return ReplicateTable{}; },
      [&](std::size_t r, ReplicateTable& acc) {
        const Trajectory tr = simulate(g, cfg, {mc.run.seed, r, 0});
        std::vector<double> row;
        row.reserve(u0s.size() * nt);
        for (double u : u0s) {
          for (std::size_t j = 0; j < nt; ++j) row.push_back(position_at(tr.snapshots[j], u));
        }
        acc.rows.push_back(std::move(row));
      });
  VerificationReport rep;
  rep.check = "martingale";
  rep.notes.push_back("orthogonality is tested against functionals of X(u0,s) only, a subset of the flow filtration");
  const std::size_t tests = u0s.size() * (nt + 2 * pairs.size());
  const double z = bonferroni_z(tests);
  rep.param("bonferroni_z", z);
  const double n = static_cast<double>(table.size());
  for (std::size_t i = 0; i < u0s.size(); ++i) {
    const double g0 = g(u0s[i]);
    for (std::size_t j = 0; j < nt; ++j) {
      RunningMoments m;
      for (const auto& row : table.rows) m.add(row[i * nt + j] - g0);
      Metric mm{"mean_displacement(u0=" + std::to_string(u0s[i]) + ",t=" + std::to_string(times[j]) + ")", m.mean,
                m.mean - z * m.std_error(), m.mean + z * m.std_error(), 0.0, 0.0, Verdict::inconclusive, ""};
      mm.verdict = (mm.ci_lo <= 0.0 && 0.0 <= mm.ci_hi) ? Verdict::pass : Verdict::fail;
      rep.metrics.push_back(mm);
    }
    for (const auto& p : pairs) {
      const std::size_t js = detail::time_index(times, p.s), jt = detail::time_index(times, p.t);
      std::vector<double> xs, dx;
      for (const auto& row : table.rows) {
        xs.push_back(row[i * nt + js]);
        dx.push_back(row[i * nt + jt] - row[i * nt + js]);
      }
      std::vector<double> sorted = xs;
      std::nth_element(sorted.begin(), sorted.begin() + static_cast<long>(sorted.size() / 2), sorted.end());
      const double median = sorted[sorted.size() / 2];
      auto corr = [&](auto phi) {
        RunningMoments a, b;
        for (std::size_t k = 0; k < xs.size(); ++k) {
          a.add(phi(xs[k]));
          b.add(dx[k]);
        }
        double cov = 0.0;
        for (std::size_t k = 0; k < xs.size(); ++k) cov += (phi(xs[k]) - a.mean) * (dx[k] - b.mean);
        const double denom = std::sqrt(a.m2 * b.m2);
        return denom > 0.0 ? cov / denom : 0.0;
      };
      const std::string tag = "(u0=" + std::to_string(u0s[i]) + ",s=" + std::to_string(p.s) + ",t=" +
                              std::to_string(p.t) + ")";
      for (int kind = 0; kind < 2; ++kind) {
        const double rho = kind == 0 ? corr([](double x) { return x; })
                                     : corr([&](double x) { return x > median ? 1.0 : (x < median ? -1.0 : 0.0); });
        const double fz = std::atanh(std::clamp(rho, -0.999999, 0.999999));
        const double half = z / std::sqrt(n - 3.0);
        Metric m{std::string(kind == 0 ? "corr_identity" : "corr_sign_median") + tag, rho, std::tanh(fz - half),
                 std::tanh(fz + half), 0.0, 0.0, Verdict::inconclusive, "Fisher-z interval"};
        m.verdict = (m.ci_lo <= 0.0 && 0.0 <= m.ci_hi) ? Verdict::pass : Verdict::fail;
        rep.metrics.push_back(m);
      }
    }
  }
  rep.replicates = table.size();
  rep.wall_seconds = clock.seconds();
  rep.finalize();
  return rep;
}

//---------------------------------------------------------------------------//
// Center of mass
//---------------------------------------------------------------------------//

// The mass-weighted mean position is a Brownian motion with variance rate 1/b.
inline VerificationReport check_center_of_mass(const StepProfile& profile, double t, const MonteCarlo& mc) {
  detail::WallClock clock;
  const StepProfile g = detail::canonical(profile);
  StepperConfig cfg = mc.stepper;
  cfg.save_times = {t};
  const ClusterState s0 = init_state(g);
  const double com0 = mass_weighted_mean(s0);
  const auto table = run_replicates(
      mc.run, [] { return ReplicateTable{}; },
      [&](std::size_t r, ReplicateTable& acc) {
        const Trajectory tr = simulate(g, cfg, {mc.run.seed, r, 0});
        acc.rows.push_back({mass_weighted_mean(tr.snapshots[0]) - com0});
      });
  RunningMoments m;
  for (const auto& row : table.rows) m.add(row[0]);
  const double n = static_cast<double>(table.size());
  const double var = m.variance();
  const boost::math::chi_squared_distribution<double> chi(n - 1.0);
  const double lo = (n - 1.0) * var / boost::math::quantile(chi, 0.975);
  const double hi = (n - 1.0) * var / boost::math::quantile(chi, 0.025);
  const double target = t / g.total_mass();
  VerificationReport rep;
  rep.check = "center_of_mass";
  rep.param("t", t);
  rep.param("total_mass", g.total_mass());
  rep.metrics.push_back({"variance", var, lo, hi, target, target,
                         (lo <= target && target <= hi) ? Verdict::pass : Verdict::fail,
                         "chi-square 95% interval against t/b"});
  rep.metrics.push_back(band_metric("mean_shift", m.mean, m.std_error(), -kZ95 * m.std_error(),
                                    kZ95 * m.std_error(), "center of mass starts at the profile mean"));
  rep.metrics.back().verdict = overlap_verdict(rep.metrics.back().ci_lo, rep.metrics.back().ci_hi, 0.0, 0.0);
  rep.replicates = table.size();
  rep.wall_seconds = clock.seconds();
  rep.finalize();
  return rep;
}

//---------------------------------------------------------------------------//
// Small-time exponents
//---------------------------------------------------------------------------//

struct ExponentTarget {
  double value = 0.0;
  double tolerance = 0.06;
};

inline constexpr double kSlopeTolerance = 0.06;
inline constexpr std::size_t kMinLocalPieces = 16;

namespace detail {

inline double family_alpha(const TabulatedProfile& g) {
  switch (g.kind()) {
    case ProfileKind::uniform: return 1.0;
    case ProfileKind::power: return g.alpha();
    case ProfileKind::tabulated: break;
  }
  throw ConfigError("exponent checks need an analytic uniform or power profile");
}

inline void boundary_note(VerificationReport& rep, const Curve& mass, double u0, double b) {
  const double margin = 0.25 * std::min(u0, b - u0);
  std::size_t over = 0;
  for (const auto& p : mass.points) over += p.mean >= margin ? 1 : 0;
  rep.param("boundary_margin", margin);
  rep.param("points_over_margin", static_cast<double>(over));
  if (over > 0) {
    rep.notes.push_back(std::to_string(over) + " grid times have E m(u0,t) above a quarter of the distance to the "
                        "domain boundary; finite-domain effects may bend the curve there");
  }
}

inline VerificationReport hypotheses_not_met(const std::string& check, const std::string& why) {
  VerificationReport rep;
  rep.check = check;
  rep.notes.push_back("hypotheses not met: " + why);
  rep.verdict = Verdict::inconclusive;
  return rep;
}

}  // namespace detail

// Slopes of E m(u0,t) and E[1/m(u0,t)] on a log-log grid against +-1/(2 alpha + 1).
inline VerificationReport check_mass_exponent(const StepProfile& profile, double alpha, double u0,
                                              const std::vector<double>& times, const MonteCarlo& mc,
                                              double tolerance = kSlopeTolerance) {
  detail::WallClock clock;
  if (!(alpha > 0.5)) throw ConfigError("mass exponent check needs alpha > 1/2");
  const StepProfile g = detail::canonical(profile);
  if (g.size() < kMinLocalPieces) {
    return detail::hypotheses_not_met("mass_exponent", "profile has no local power growth at u0 (too few pieces)");
  }
  const double kappa = 1.0 / (2.0 * alpha + 1.0);
  StepperConfig cfg = mc.stepper;
  cfg.save_times = times;
  const auto acc = accumulate_observables(g, cfg, {{ObservableKind::mass, u0}, {ObservableKind::inverse_mass, u0}},
                                          mc.run);
  const Curve mass = curve_from(acc, 0, times);
  const Curve inv = curve_from(acc, 1, times);
  VerificationReport rep;
  rep.check = "mass_exponent";
  rep.param("alpha", alpha);
  rep.param("u0", u0);
  rep.param("target", kappa);
  rep.param("tolerance", tolerance);
  const double t_min = std::max(times.front(), 20.0 * cfg.dt);
  detail::slope_note(rep, mass, t_min, times.back(), "mass", std::make_pair(kappa - tolerance, kappa + tolerance));
  detail::slope_note(rep, inv, t_min, times.back(), "inverse_mass",
                     std::make_pair(-kappa - tolerance, -kappa + tolerance));
  detail::boundary_note(rep, mass, u0, g.total_mass());
  rep.replicates = mc.run.replicates;
  rep.wall_seconds = clock.seconds();
  rep.finalize();
  return rep;
}

inline VerificationReport check_mass_exponent(const TabulatedProfile& family, int level, double u0,
                                              const std::vector<double>& times, const MonteCarlo& mc,
                                              double tolerance = kSlopeTolerance) {
  const double alpha = detail::family_alpha(family);
  if (!(alpha > 0.5)) throw ConfigError("mass exponent check needs alpha > 1/2");
  auto rep = check_mass_exponent(dyadic_step_approximation(family, level), alpha, u0, times, mc, tolerance);
  rep.param("level", static_cast<double>(level));
  return rep;
}

// Slope of E|X(u0,t) - g(u0)| against alpha/(2 alpha + 1), or an explicit target.
inline VerificationReport check_displacement_exponent(const StepProfile& profile, double alpha, double u0,
                                                      const std::vector<double>& times, const MonteCarlo& mc,
                                                      std::optional<ExponentTarget> target = std::nullopt) {
  detail::WallClock clock;
  const StepProfile g = detail::canonical(profile);
  if (!target) {
    if (!(alpha > 0.5)) throw ConfigError("displacement exponent check needs alpha > 1/2");
    if (g.size() < kMinLocalPieces) {
      return detail::hypotheses_not_met("displacement_exponent", "profile has no local power growth at u0");
    }
    target = ExponentTarget{alpha / (2.0 * alpha + 1.0), kSlopeTolerance};
  }
  StepperConfig cfg = mc.stepper;
  cfg.save_times = times;
  const auto acc = accumulate_observables(
      g, cfg, {{ObservableKind::abs_displacement, u0}, {ObservableKind::mass, u0}}, mc.run);
  const Curve disp = curve_from(acc, 0, times);
  VerificationReport rep;
  rep.check = "displacement_exponent";
  rep.param("alpha", alpha);
  rep.param("u0", u0);
  rep.param("target", target->value);
  rep.param("tolerance", target->tolerance);
  detail::slope_note(rep, disp, std::max(times.front(), 20.0 * cfg.dt), times.back(), "displacement",
                     std::make_pair(target->value - target->tolerance, target->value + target->tolerance));
  if (g.size() > 1) detail::boundary_note(rep, curve_from(acc, 1, times), u0, g.total_mass());
  rep.replicates = mc.run.replicates;
  rep.wall_seconds = clock.seconds();
  rep.finalize();
  return rep;
}

inline VerificationReport check_displacement_exponent(const TabulatedProfile& family, int level, double u0,
                                                      const std::vector<double>& times, const MonteCarlo& mc) {
  auto rep = check_displacement_exponent(dyadic_step_approximation(family, level), detail::family_alpha(family), u0,
                                         times, mc);
  rep.param("level", static_cast<double>(level));
  return rep;
}

//---------------------------------------------------------------------------//
// Rescaling invariance
//---------------------------------------------------------------------------//

struct RescalingOptions {
  double alpha = 1.0;
  double u0 = 0.5;
  double rho = 0.5;
  int level = 10;
  std::vector<double> times{1e-4, 2e-4, 5e-4, 1e-3};  // in the rescaled clock
  double probe = 0.0;                                  // rescaled coordinate
};

// Base system with g(w) = sgn(w-u0)|w-u0|^alpha on [0,1], viewed through
// X_rho(u,t) = rho^-alpha X(u rho + u0, t rho^gamma), against a system
// started directly from sgn(u)|u|^alpha on the rescaled domain.
inline VerificationReport check_rescaling(const RescalingOptions& o, const MonteCarlo& mc) {
  detail::WallClock clock;
  const RescaleParams params{o.rho, -o.u0, o.alpha};
  params.validate();
  const double gamma = params.gamma();
  const double tscale = std::pow(o.rho, gamma);
  const StepProfile base = dyadic_step_approximation(TabulatedProfile::power(o.alpha, o.u0), o.level);
  const double width = 1.0 / o.rho;
  const double shift = o.u0 / o.rho;  // rescaled u = direct coordinate - shift
  const StepProfile direct =
      dyadic_step_approximation(TabulatedProfile::power(o.alpha, shift, 1.0, width), o.level);
  if (!(o.probe > -shift && o.probe < width - shift)) throw ConfigError("probe outside the rescaled domain");

  StepperConfig base_cfg = mc.stepper;
  base_cfg.save_times.clear();
  for (double t : o.times) base_cfg.save_times.push_back(t * tscale);
  StepperConfig direct_cfg = mc.stepper;
  direct_cfg.save_times = o.times;
  direct_cfg.dt = mc.stepper.dt / tscale;
  direct_cfg.dt_min = mc.stepper.dt_min / tscale;
  direct_cfg.warmup_dt0 = mc.stepper.warmup_dt0 / tscale;

  // cell midpoints in rescaled coordinates for the exact mass identity
  std::vector<double> probes;
  const std::size_t cells = base.size();
  for (std::size_t k = 1; k < cells; k += std::max<std::size_t>(1, cells / 32)) {
    const double w = (base.breakpoints()[k] + base.breakpoints()[k + 1]) / 2.0;
    probes.push_back((w + params.q) / o.rho);
  }

  const std::size_t nt = o.times.size();
  const auto table = run_replicates(
      mc.run, [] { return ReplicateTable{}; },
      [&](std::size_t r, ReplicateTable& acc) {
        const Trajectory src = simulate(base, base_cfg, {mc.run.seed, r, 0});
        const Trajectory view = rescale_view(src, params, o.times);
        const Trajectory dir = simulate(direct, direct_cfg, {mc.run.seed, r, 1});
        std::vector<double> row(5 * nt + 1, 0.0);
        double worst = 0.0;
        for (std::size_t j = 0; j < nt; ++j) {
          const auto& vs = view.snapshots[j];
          const auto& ss = src.snapshots[j];
          for (double u : probes) {
            const double lhs = mass_at(vs, u);
            const double rhs = mass_at(ss, u * o.rho - params.q) / o.rho;
            worst = std::max(worst, std::abs(lhs - rhs) / rhs);
          }
          const double view0 = std::pow(o.rho, -o.alpha) * base(o.probe * o.rho - params.q);
          row[j] = position_at(vs, o.probe) - view0;
          row[nt + j] = mass_at(vs, o.probe);
          row[2 * nt + j] = position_at(dir.snapshots[j], o.probe + shift) - direct(o.probe + shift);
          row[3 * nt + j] = mass_at(dir.snapshots[j], o.probe + shift);
        }
        row[5 * nt] = worst;
        acc.rows.push_back(std::move(row));
      });

  VerificationReport rep;
  rep.check = "rescaling";
  rep.param("alpha", o.alpha);
  rep.param("rho", o.rho);
  rep.param("q", params.q);
  rep.param("level", static_cast<double>(o.level));
  rep.param("probe", o.probe);
  double worst = 0.0;
  for (const auto& row : table.rows) worst = std::max(worst, row[5 * nt]);
  rep.metrics.push_back({"mass_identity_max_rel_error", worst, worst, worst, 0.0, 1e-12,
                         worst <= 1e-12 ? Verdict::pass : Verdict::fail, "m_rho(u,t) = m(u rho - q, t rho^gamma)/rho"});
  const double margin = 0.25 * std::min(shift, width - shift);
  bool margin_ok = true;
  for (std::size_t j = 0; j < nt; ++j) {
    const std::string tag = "@t=" + std::to_string(o.times[j]);
    const auto dv = table.column(j), dd = table.column(2 * nt + j);
    RunningMoments mv, md, mmv, mmd;
    for (double x : dv) mv.add(x);
    for (double x : dd) md.add(x);
    for (double x : table.column(nt + j)) mmv.add(x);
    for (double x : table.column(3 * nt + j)) mmd.add(x);
    margin_ok = margin_ok && mmd.mean < margin;
    const auto vv = detail::sample_variance(dv), vd = detail::sample_variance(dd);
    rep.metrics.push_back(overlap_metric("displacement_variance" + tag, vv.value, vv.value - kZ95 * vv.se,
                                         vv.value + kZ95 * vv.se, vd.value - kZ95 * vd.se, vd.value + kZ95 * vd.se,
                                         "rescaled view vs direct simulation"));
    rep.metrics.push_back(overlap_metric("displacement_mean" + tag, mv.mean, mv.mean - kZ95 * mv.std_error(),
                                         mv.mean + kZ95 * mv.std_error(), md.mean - kZ95 * md.std_error(),
                                         md.mean + kZ95 * md.std_error()));
    rep.metrics.push_back(overlap_metric("mean_mass" + tag, mmv.mean, mmv.mean - kZ95 * mmv.std_error(),
                                         mmv.mean + kZ95 * mmv.std_error(), mmd.mean - kZ95 * mmd.std_error(),
                                         mmd.mean + kZ95 * mmd.std_error()));
  }
  rep.replicates = table.size();
  rep.wall_seconds = clock.seconds();
  rep.finalize();
  if (!margin_ok) {
    rep.notes.push_back("boundary margin violated: E m at the probe exceeds a quarter of the distance to the edge");
    if (rep.verdict == Verdict::pass) rep.verdict = Verdict::inconclusive;
  }
  return rep;
}

//---------------------------------------------------------------------------//
// Dyadic convergence
//---------------------------------------------------------------------------//

struct ConvergenceRow {
  int level = 0;
  std::size_t pieces = 0;
  std::vector<double> value;  // per statistic
  std::vector<double> se;
};

inline const std::vector<std::string>& convergence_statistics() {
  static const std::vector<std::string> names{"E_m", "Var_X", "E_cluster_count"};
  return names;
}

// Statistics of the dyadic approximants g_n at (u0, t); successive
// differences must not grow significantly and the last two levels must agree.
inline VerificationReport check_dyadic_convergence(const TabulatedProfile& g, const std::vector<int>& levels, double u0,
                                                   double t, const MonteCarlo& mc,
                                                   std::vector<ConvergenceRow>* rows_out = nullptr) {
  detail::WallClock clock;
  if (levels.size() < 3) throw ConfigError("dyadic convergence needs at least 3 levels");
  for (std::size_t i = 1; i < levels.size(); ++i) {
    if (levels[i] <= levels[i - 1]) throw ConfigError("levels must be strictly increasing");
  }
  std::vector<ConvergenceRow> rows;
  for (int level : levels) {
    const StepProfile gn = canonicalize(dyadic_step_approximation(g, level));
    ConvergenceRow row{level, gn.size(), {}, {}};
    if (t == 0.0) {
      const ClusterState s = init_state(gn);
      row.value = {mass_at(s, u0), 0.0, static_cast<double>(cluster_count(s))};
      row.se = {0.0, 0.0, 0.0};
    } else {
      StepperConfig cfg = mc.stepper;
      cfg.save_times = {t};
      const auto table = run_replicates(
          mc.run, [] { return ReplicateTable{}; },
          [&](std::size_t r, ReplicateTable& acc) {
            const Trajectory tr = simulate(gn, cfg, {mc.run.seed, r, 0});
            const auto& s = tr.snapshots[0];
            acc.rows.push_back({mass_at(s, u0), position_at(s, u0), static_cast<double>(cluster_count(s))});
          });
      RunningMoments m, c;
      for (double x : table.column(0)) m.add(x);
      for (double x : table.column(2)) c.add(x);
      const auto v = detail::sample_variance(table.column(1));
      row.value = {m.mean, v.value, c.mean};
      row.se = {m.std_error(), v.se, c.std_error()};
    }
    rows.push_back(std::move(row));
  }
  VerificationReport rep;
  rep.check = "dyadic_convergence";
  rep.param("u0", u0);
  rep.param("t", t);
  std::string lv;
  for (int l : levels) lv += (lv.empty() ? "" : ",") + std::to_string(l);
  rep.param("levels", lv);
  const auto& names = convergence_statistics();
  const double z = bonferroni_z(names.size() * levels.size());
  for (std::size_t k = 0; k < names.size(); ++k) {
    std::vector<double> diff, dse;
    for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
      diff.push_back(std::abs(rows[i + 1].value[k] - rows[i].value[k]));
      dse.push_back(std::hypot(rows[i + 1].se[k], rows[i].se[k]));
    }
    for (std::size_t i = 0; i + 1 < diff.size(); ++i) {
      const double slack = z * std::hypot(dse[i], dse[i + 1]);
      Metric m{names[k] + "_diff_" + std::to_string(levels[i + 1]) + "_" + std::to_string(levels[i + 2]), diff[i + 1],
               diff[i + 1], diff[i + 1], 0.0, diff[i] + slack,
               diff[i + 1] <= diff[i] + slack ? Verdict::pass : Verdict::fail,
               "must not exceed the previous difference beyond sampling error"};
      rep.metrics.push_back(m);
    }
    const auto& a = rows[rows.size() - 2];
    const auto& b = rows.back();
    rep.metrics.push_back(overlap_metric(names[k] + "_last_levels_overlap", b.value[k], b.value[k] - kZ95 * b.se[k],
                                         b.value[k] + kZ95 * b.se[k], a.value[k] - kZ95 * a.se[k],
                                         a.value[k] + kZ95 * a.se[k]));
  }
  rep.replicates = t == 0.0 ? 0 : mc.run.replicates;
  rep.wall_seconds = clock.seconds();
  rep.finalize();
  if (rows_out) *rows_out = std::move(rows);
  return rep;
}

//---------------------------------------------------------------------------//
// Pathwise window surrogate for the small-time limits
//---------------------------------------------------------------------------//

struct LilOptions {
  double u0 = 0.5;
  double lambda = 0.7;
  int n_min = 13;  // first time lambda^n_min
  int n_max = 32;  // last time lambda^n_max
  double eps = 0.5;
  std::optional<double> normalization_exponent;  // default 1/(2 alpha + 1)
  double required_fraction = 0.95;
};

// Per path, the slope in n of log m(u0,t_n) - k log t_n -/+ (1+eps) log ln(1/t_n)
// at t_n = lambda^n. The upper ratio should trend to 0 (negative slope) and
// the lower ratio to infinity (positive slope) across the window.
inline VerificationReport check_lil_pathwise(const StepProfile& profile, double alpha, const LilOptions& o,
                                             const MonteCarlo& mc) {
  detail::WallClock clock;
  const StepProfile g = detail::canonical(profile);
  VerificationReport rep;
  rep.check = "lil_pathwise";
  rep.notes.push_back("finite-window surrogate: almost-sure limits are not verifiable at finite scale");
  if (g.size() < kMinLocalPieces) {
    rep.notes.push_back("hypotheses not met: profile has no local power growth at u0");
    rep.verdict = Verdict::inconclusive;
    return rep;
  }
  if (!(o.lambda > 0.0 && o.lambda < 1.0)) throw ConfigError("lambda must lie in (0,1)");
  std::vector<double> times;
  std::vector<int> ns;
  for (int n = o.n_max; n >= o.n_min; --n) {
    const double t = std::pow(o.lambda, n);
    if (t >= 20.0 * mc.stepper.dt) {
      times.push_back(t);
      ns.push_back(n);
    }
  }
  const double kappa = o.normalization_exponent.value_or(1.0 / (2.0 * alpha + 1.0));
  rep.param("alpha", alpha);
  rep.param("lambda", o.lambda);
  rep.param("eps", o.eps);
  rep.param("normalization_exponent", kappa);
  rep.param("window_points", static_cast<double>(times.size()));
  if (times.size() < 5) {
    rep.notes.push_back("window too small: fewer than 5 times above 20*dt");
    rep.verdict = Verdict::inconclusive;
    return rep;
  }
  StepperConfig cfg = mc.stepper;
  cfg.save_times = times;
  const auto table = run_replicates(
      mc.run, [] { return ReplicateTable{}; },
      [&](std::size_t r, ReplicateTable& acc) {
        const Trajectory tr = simulate(g, cfg, {mc.run.seed, r, 0});
        std::vector<double> lu, ll, xn;
        for (std::size_t j = 0; j < times.size(); ++j) {
          const double lm = std::log(mass_at(tr.snapshots[j], o.u0)) - kappa * std::log(times[j]);
          const double lln = std::log(std::log(1.0 / times[j]));
          lu.push_back(lm - (1.0 + o.eps) * lln);
          ll.push_back(lm + (1.0 + o.eps) * lln);
          xn.push_back(static_cast<double>(ns[j]));
        }
        auto slope = [&](const std::vector<double>& y) {
          const double xm = std::accumulate(xn.begin(), xn.end(), 0.0) / static_cast<double>(xn.size());
          const double ym = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
          double sxy = 0, sxx = 0;
          for (std::size_t k = 0; k < y.size(); ++k) {
            sxy += (xn[k] - xm) * (y[k] - ym);
            sxx += (xn[k] - xm) * (xn[k] - xm);
          }
          return sxy / sxx;
        };
        acc.rows.push_back({slope(lu) < 0.0 ? 1.0 : 0.0, slope(ll) > 0.0 ? 1.0 : 0.0});
      });
  const auto n = static_cast<std::uint64_t>(table.size());
  for (int which = 0; which < 2; ++which) {
    std::uint64_t k = 0;
    for (const auto& row : table.rows) k += row[static_cast<std::size_t>(which)] > 0.5 ? 1 : 0;
    const double frac = static_cast<double>(k) / static_cast<double>(n);
    const double lo = clopper_pearson_lower(k, n, kCdfLevel);
    const double hi = clopper_pearson_upper(k, n, kCdfLevel);
    Metric m{which == 0 ? "fraction_upper_ratio_decreasing" : "fraction_lower_ratio_increasing", frac, lo, hi,
             o.required_fraction, 1.0, Verdict::inconclusive, "99% Clopper-Pearson interval"};
    m.verdict = frac >= o.required_fraction ? Verdict::pass
                                            : (hi < o.required_fraction ? Verdict::fail : Verdict::inconclusive);
    rep.metrics.push_back(m);
  }
  rep.replicates = table.size();
  rep.wall_seconds = clock.seconds();
  rep.finalize();
  return rep;
}

}  // namespace arratia
