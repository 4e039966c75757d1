#pragma once

// Monte Carlo statistics over replicates: streaming moments, observable
// curves, empirical mass CDFs, quadratic-variation integrals and log-log
// exponent fits.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/beta.hpp>

#include "arratia/errors.hpp"
#include "arratia/flow_sim.hpp"
#include "arratia/mass_profile.hpp"
#include "arratia/replicates.hpp"

namespace arratia {

inline constexpr double kZ95 = 1.959963984540054;

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

// One-sided Clopper-Pearson bounds for k successes in n trials.
inline double clopper_pearson_upper(std::uint64_t k, std::uint64_t n, double level) {
  if (n == 0 || k >= n) return 1.0;
  return boost::math::ibeta_inv(static_cast<double>(k + 1), static_cast<double>(n - k), level);
}

inline double clopper_pearson_lower(std::uint64_t k, std::uint64_t n, double level) {
  if (n == 0 || k == 0) return 0.0;
  return boost::math::ibeta_inv(static_cast<double>(k), static_cast<double>(n - k + 1), 1.0 - level);
}

//---------------------------------------------------------------------------//
// Streaming moments
//---------------------------------------------------------------------------//

// Welford accumulation with Chan's pairwise merge.
struct RunningMoments {
  std::uint64_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }

  void merge(const RunningMoments& o) {
    if (o.n == 0) return;
    if (n == 0) {
      *this = o;
      return;
    }
    const double na = static_cast<double>(n);
    const double nb = static_cast<double>(o.n);
    const double nt = na + nb;
    const double d = o.mean - mean;
    mean += d * nb / nt;
    m2 += o.m2 + d * d * na * nb / nt;
    n += o.n;
  }

  double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
  double std_error() const { return n > 1 ? std::sqrt(m2 / (static_cast<double>(n) * static_cast<double>(n - 1))) : 0.0; }
};

// Moments per (observable, time index) cell.
class EstimatorAccumulator {
 public:
  EstimatorAccumulator() = default;
  EstimatorAccumulator(std::vector<std::string> observables, std::size_t n_times)
      : observables_(std::move(observables)), n_times_(n_times), cells_(observables_.size() * n_times) {}

  const std::vector<std::string>& observables() const { return observables_; }
  std::size_t n_times() const { return n_times_; }

  RunningMoments& cell(std::size_t obs, std::size_t t) { return cells_[obs * n_times_ + t]; }
  const RunningMoments& cell(std::size_t obs, std::size_t t) const { return cells_[obs * n_times_ + t]; }

  void add(std::size_t obs, std::size_t t, double x) { cell(obs, t).add(x); }

  void merge(const EstimatorAccumulator& o) {
    if (o.observables_ != observables_ || o.n_times_ != n_times_) {
      throw ConfigError("cannot merge accumulators with different cell layouts");
    }
    for (std::size_t i = 0; i < cells_.size(); ++i) cells_[i].merge(o.cells_[i]);
  }

 private:
  std::vector<std::string> observables_;
  std::size_t n_times_ = 0;
  std::vector<RunningMoments> cells_;
};

inline EstimatorAccumulator merge_accumulators(EstimatorAccumulator a, const EstimatorAccumulator& b) {
  a.merge(b);
  return a;
}

//---------------------------------------------------------------------------//
// Observables
//---------------------------------------------------------------------------//

enum class ObservableKind { mass, inverse_mass, abs_displacement, cluster_count };

struct Observable {
  ObservableKind kind = ObservableKind::mass;
  double u0 = 0.5;

  std::string name() const {
    switch (kind) {
      case ObservableKind::mass: return "mass";
      case ObservableKind::inverse_mass: return "inverse_mass";
      case ObservableKind::abs_displacement: return "abs_displacement";
      case ObservableKind::cluster_count: return "cluster_count";
    }
    return "unknown";
  }

  // g0 is X(u0, 0), needed for displacements.
  double evaluate(const ClusterState& s, double g0) const {
    switch (kind) {
      case ObservableKind::mass: return mass_at(s, u0);
      case ObservableKind::inverse_mass: return 1.0 / mass_at(s, u0);
      case ObservableKind::abs_displacement: return std::abs(position_at(s, u0) - g0);
      case ObservableKind::cluster_count: return static_cast<double>(cluster_count(s));
    }
    return 0.0;
  }
};

inline Observable parse_observable(const std::string& name, double u0) {
  if (name == "mass" || name == "mass_at") return {ObservableKind::mass, u0};
  if (name == "inverse_mass" || name == "inverse_mass_at") return {ObservableKind::inverse_mass, u0};
  if (name == "abs_displacement") return {ObservableKind::abs_displacement, u0};
  if (name == "cluster_count") return {ObservableKind::cluster_count, u0};
  throw ConfigError("unknown observable '" + name + "'");
}

struct CurvePoint {
  double t = 0.0;
  std::uint64_t n = 0;
  double mean = 0.0;
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

struct Curve {
  std::string observable;
  std::vector<CurvePoint> points;
};

inline CurvePoint curve_point(double t, const RunningMoments& m) {
  const double se = m.std_error();
  return {t, m.n, m.mean, se, m.mean - kZ95 * se, m.mean + kZ95 * se};
}

// Moments of every observable at every save time of `stepper`.
inline EstimatorAccumulator accumulate_observables(const StepProfile& profile, const StepperConfig& stepper,
                                                   const std::vector<Observable>& observables,
                                                   const RunOptions& run) {
  stepper.validate();
  const StepProfile canon = profile.is_canonical() ? profile : canonicalize(profile);
  std::vector<std::string> names;
  std::vector<double> g0;
  for (const auto& o : observables) {
    if (o.kind != ObservableKind::cluster_count && !(o.u0 > 0.0 && o.u0 < canon.total_mass())) {
      throw ConfigError("observable coordinate u0 must lie inside (0, b)");
    }
    names.push_back(o.name());
    g0.push_back(o.kind == ObservableKind::cluster_count ? 0.0 : canon(o.u0));
  }
  const std::size_t nt = stepper.save_times.size();
  return run_replicates(
      run, [&] { return EstimatorAccumulator(names, nt); },
      [&](std::size_t rep, EstimatorAccumulator& acc) {
        const Trajectory tr = simulate(canon, stepper, {run.seed, rep, 0});
        for (std::size_t i = 0; i < observables.size(); ++i) {
          for (std::size_t j = 0; j < nt; ++j) acc.add(i, j, observables[i].evaluate(tr.snapshots[j], g0[i]));
        }
      });
}

inline Curve curve_from(const EstimatorAccumulator& acc, std::size_t obs, const std::vector<double>& times) {
  Curve c{acc.observables()[obs], {}};
  for (std::size_t j = 0; j < times.size(); ++j) c.points.push_back(curve_point(times[j], acc.cell(obs, j)));
  return c;
}

// Mean curve with 95% normal CI of one observable on the given time grid.
inline Curve estimate_curve(const Observable& observable, const StepProfile& profile,
                            const std::vector<double>& times, const RunOptions& run,
                            StepperConfig stepper = {}) {
  if (run.replicates < 2) throw ConfigError("estimate_curve needs at least 2 replicates");
  stepper.save_times = times;
  const auto acc = accumulate_observables(profile, stepper, {observable}, run);
  return curve_from(acc, 0, times);
}

//---------------------------------------------------------------------------//
// Empirical CDF of the mass
//---------------------------------------------------------------------------//

struct CdfPoint {
  double r = 0.0;
  std::uint64_t count = 0;  // replicates with m(u0, t) < r
  std::uint64_t n = 0;
  double p_hat = 0.0;
  double upper = 1.0;  // one-sided Clopper-Pearson bound
};

inline constexpr double kCdfLevel = 0.99;

inline std::vector<CdfPoint> cdf_from_masses(const std::vector<double>& masses, const std::vector<double>& r_grid,
                                             double level = kCdfLevel) {
  std::vector<CdfPoint> out;
  const auto n = static_cast<std::uint64_t>(masses.size());
  for (double r : r_grid) {
    std::uint64_t k = 0;
    for (double m : masses) k += (m < r) ? 1 : 0;
    out.push_back({r, k, n, n ? static_cast<double>(k) / static_cast<double>(n) : 0.0,
                   clopper_pearson_upper(k, n, level)});
  }
  return out;
}

inline void validate_r_grid(const std::vector<double>& r_grid, double u0, double b, Side side) {
  const double r_max = side == Side::right ? b - u0 : u0;
  for (double r : r_grid) {
    if (!(r > 0.0 && r < r_max)) {
      throw DomainError("r must lie in (0, " + std::to_string(r_max) + ") for this side");
    }
  }
}

// P{m(u0, t) < r} for each r, with a 99% one-sided upper bound.
inline std::vector<CdfPoint> empirical_mass_cdf(double u0, double t, const std::vector<double>& r_grid,
                                                const StepProfile& profile, const RunOptions& run,
                                                StepperConfig stepper = {}, Side side = Side::right) {
  validate_r_grid(r_grid, u0, profile.total_mass(), side);
  if (!(t > 0.0)) throw DomainError("empirical_mass_cdf needs t > 0");
  stepper.save_times = {t};
  const StepProfile canon = profile.is_canonical() ? profile : canonicalize(profile);
  const auto table = run_replicates(
      run, [] { return ReplicateTable{}; },
      [&](std::size_t rep, ReplicateTable& acc) {
        const Trajectory tr = simulate(canon, stepper, {run.seed, rep, 0});
        acc.rows.push_back({mass_at(tr.snapshots[0], u0)});
      });
  return cdf_from_masses(table.column(0), r_grid);
}

//---------------------------------------------------------------------------//
// Quadratic-variation integral
//---------------------------------------------------------------------------//

struct QvIntegral {
  double value = 0.0;
  double first_panel_exponent = 0.0;  // local power-law exponent used on [0, t_1]
  std::string warning;
};

// int_0^t y(s) ds from samples on an increasing grid. The panel [0, t_1] uses
// a power law y ~ s^-k fitted through the first two samples (k clamped to
// [0, 0.95]); with fewer than two samples before t, or a first panel that is
// not small against t, the endpoint rule is used and a warning is attached.
inline QvIntegral qv_integral(const std::vector<double>& times, const std::vector<double>& values, double t) {
  if (times.size() != values.size() || times.empty()) throw ConfigError("qv_integral needs matching samples");
  if (t > times.back() * (1.0 + 1e-12)) throw RangeError("qv_integral: t beyond the sampled grid");
  QvIntegral out;
  std::size_t i0 = 0;
  double total = 0.0;
  if (times[0] == 0.0) {
    i0 = 0;
  } else {
    const double t1 = times[0];
    const bool geometric_start = times.size() >= 2 && times[1] <= 4.0 * t1 && t1 <= 1e-2 * t &&
                                 values[0] > 0.0 && values[1] > 0.0;
    if (geometric_start) {
      double k = -std::log(values[1] / values[0]) / std::log(times[1] / t1);
      k = std::clamp(k, 0.0, 0.95);
      out.first_panel_exponent = k;
      total = values[0] * t1 / (1.0 - k);
    } else {
      out.warning = "grid lacks geometric sub-panels near 0; endpoint rule used on the first panel";
      total = values[0] * t1;
    }
  }
  for (std::size_t i = i0; i + 1 < times.size() && times[i] < t; ++i) {
    const double a = times[i];
    const double b = std::min(times[i + 1], t);
    const double yb = b == times[i + 1] ? values[i + 1]
                                        : values[i] + (values[i + 1] - values[i]) * (b - a) / (times[i + 1] - a);
    total += 0.5 * (values[i] + yb) * (b - a);
  }
  if (t < times.front()) {
    out.value = total * (t / times.front());
    out.warning = "t precedes the first grid point";
    return out;
  }
  out.value = total;
  return out;
}

//---------------------------------------------------------------------------//
// Exponent fits
//---------------------------------------------------------------------------//

struct FitPoint {
  double t = 0.0;
  double y = 0.0;
  double se = 0.0;
  std::uint64_t n = 0;
};

struct ExponentFit {
  double slope = 0.0;
  double intercept = 0.0;
  double stderr_slope = 0.0;
  double r2 = 0.0;
  double t_min = 0.0;
  double t_max = 0.0;
  std::vector<double> weights;
  std::size_t used = 0;
  std::vector<std::string> warnings;
};

inline constexpr std::uint64_t kMinFitReplicates = 100;

inline std::vector<FitPoint> fit_points(const Curve& c) {
  std::vector<FitPoint> out;
  for (const auto& p : c.points) out.push_back({p.t, p.mean, p.se, p.n});
  return out;
}

// Weighted least squares of ln y on ln t over t in [t_min, t_max], weights
// 1/(se/y)^2 (equal weights when any se is zero). The slope standard error is
// scaled by the weighted residual variance.
inline ExponentFit fit_exponent(const std::vector<FitPoint>& pts, double t_min, double t_max) {
  ExponentFit fit;
  fit.t_min = t_min;
  fit.t_max = t_max;
  std::vector<double> x, y, se_rel;
  bool any_zero_se = false;
  for (const auto& p : pts) {
    if (p.t < t_min || p.t > t_max) continue;
    if (p.n < kMinFitReplicates) {
      fit.warnings.push_back("t=" + std::to_string(p.t) + " skipped: fewer than 100 replicates");
      continue;
    }
    if (!(p.y > 0.0) || !(p.t > 0.0)) {
      fit.warnings.push_back("t=" + std::to_string(p.t) + " skipped: non-positive value");
      continue;
    }
    x.push_back(std::log(p.t));
    y.push_back(std::log(p.y));
    se_rel.push_back(p.se / p.y);
    any_zero_se = any_zero_se || !(p.se > 0.0);
  }
  if (x.size() < 5) throw ConfigError("fit_exponent needs at least 5 usable points in range");
  const std::size_t n = x.size();
  fit.weights.resize(n);
  for (std::size_t i = 0; i < n; ++i) fit.weights[i] = any_zero_se ? 1.0 : 1.0 / (se_rel[i] * se_rel[i]);
  double sw = 0, sx = 0, sy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sw += fit.weights[i];
    sx += fit.weights[i] * x[i];
    sy += fit.weights[i] * y[i];
  }
  const double xm = sx / sw, ym = sy / sw;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - xm, dy = y[i] - ym;
    sxx += fit.weights[i] * dx * dx;
    sxy += fit.weights[i] * dx * dy;
    syy += fit.weights[i] * dy * dy;
  }
  if (!(sxx > 0.0)) throw ConfigError("fit_exponent needs distinct times");
  fit.slope = sxy / sxx;
  fit.intercept = ym - fit.slope * xm;
  double ssr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (fit.intercept + fit.slope * x[i]);
    ssr += fit.weights[i] * r * r;
  }
  fit.stderr_slope = std::sqrt(ssr / static_cast<double>(n - 2) / sxx);
  fit.r2 = syy > 0.0 ? 1.0 - ssr / syy : 1.0;
  fit.used = n;
  return fit;
}

//---------------------------------------------------------------------------//
// Batch means
//---------------------------------------------------------------------------//

inline constexpr std::size_t kDefaultBatches = 30;

// Mean and standard error across batch statistics.
inline RunningMoments batch_moments(const std::vector<double>& batch_values) {
  RunningMoments m;
  for (double v : batch_values) m.add(v);
  return m;
}

// Contiguous batch index of a replicate.
inline std::size_t batch_of(std::size_t replicate, std::size_t replicates, std::size_t batches) {
  return replicate * batches / replicates;
}

}  // namespace arratia
