#pragma once

// Finite coalescing particle system: each cluster moves as an independent
// Brownian motion with variance rate 1/mass; clusters that meet merge, add
// their masses and move together from then on.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "arratia/errors.hpp"
#include "arratia/mass_profile.hpp"
#include "arratia/rng.hpp"

namespace arratia {

struct Cluster {
  double position = 0.0;
  double mass = 0.0;
  std::size_t lo = 0;  // first initial piece absorbed (0-based)
  std::size_t hi = 0;  // last initial piece absorbed, inclusive
};

using Breakpoints = std::shared_ptr<const std::vector<double>>;

// Live system at one time. `breakpoints` maps initial piece k to the mass
// coordinates [bp[k], bp[k+1]); it is shared and never mutated.
struct ClusterState {
  double time = 0.0;
  std::vector<Cluster> clusters;
  Breakpoints breakpoints;

  double lower() const { return breakpoints->front(); }
  double upper() const { return breakpoints->back(); }
  double total_mass() const { return upper() - lower(); }
  std::size_t pieces() const { return breakpoints->size() - 1; }
};

struct MergeEvent {
  double time = 0.0;  // end of the step in which the merge was detected
  std::size_t lo = 0;
  std::size_t hi = 0;
};

struct StepperConfig {
  double dt = 1e-4;
  bool bridge_correction = true;
  // Cap each step at adaptive_c * (min gap)^2 * (min mass) / 4, floored at dt_min.
  bool adaptive = false;
  double adaptive_c = 1.0;
  double dt_min = 1e-9;
  // When > 0, steps near t = 0 are capped at warmup_ratio * t (geometric
  // ramp from warmup_dt0), so the first coalescences are resolved.
  double warmup_ratio = 0.0;
  double warmup_dt0 = 1e-9;
  std::vector<double> save_times;
  std::string scheme = "pava-bridge";
  // Negative-control fixture: deterministic drift added to every cluster.
  double drift = 0.0;
  bool record_events = true;

  double horizon() const { return save_times.empty() ? 0.0 : save_times.back(); }

  void validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dt must be positive");
    if (adaptive && !(dt_min > 0.0)) throw ConfigError("adaptive stepping needs dt_min > 0");
    if (adaptive && !(adaptive_c > 0.0)) throw ConfigError("adaptive_c must be positive");
    if (warmup_ratio < 0.0) throw ConfigError("warmup_ratio must be non-negative");
    if (warmup_ratio > 0.0 && !(warmup_dt0 > 0.0)) throw ConfigError("warmup_dt0 must be positive");
    if (save_times.empty()) throw ConfigError("at least one save time is required");
    for (std::size_t i = 0; i < save_times.size(); ++i) {
      if (!(save_times[i] >= 0.0) || !std::isfinite(save_times[i])) {
        throw ConfigError("save times must be finite and non-negative");
      }
      if (i > 0 && !(save_times[i] > save_times[i - 1])) {
        throw ConfigError("save times must be strictly increasing");
      }
    }
  }
};

// Save times T * lambda^j, j = n-1 .. 0, ascending.
inline std::vector<double> geometric_grid(double t_end, double lambda, std::size_t n) {
  if (!(lambda > 0.0 && lambda < 1.0)) throw ConfigError("geometric grid ratio must be in (0,1)");
  if (!(t_end > 0.0)) throw ConfigError("grid end time must be positive");
  std::vector<double> t(n);
  for (std::size_t j = 0; j < n; ++j) t[n - 1 - j] = t_end * std::pow(lambda, static_cast<double>(j));
  if (n > 0) t.back() = t_end;
  return t;
}

// Geometric grid with ratio lambda ending at t_end; its first point lies in [t_min, t_min / lambda).
inline std::vector<double> geometric_grid_between(double t_min, double t_end, double lambda) {
  if (!(t_min > 0.0 && t_min <= t_end)) throw ConfigError("need 0 < t_min <= t_end");
  const auto n = static_cast<std::size_t>(std::floor(std::log(t_min / t_end) / std::log(lambda) + 1e-9)) + 1;
  return geometric_grid(t_end, lambda, n);
}

inline std::vector<double> uniform_grid(double t_end, std::size_t n) {
  if (!(t_end > 0.0) || n == 0) throw ConfigError("uniform grid needs t_end > 0 and n >= 1");
  std::vector<double> t(n);
  for (std::size_t j = 0; j < n; ++j) t[j] = t_end * static_cast<double>(j + 1) / static_cast<double>(n);
  t.back() = t_end;
  return t;
}

//---------------------------------------------------------------------------//
// State construction and queries
//---------------------------------------------------------------------------//

inline ClusterState init_state(const StepProfile& profile) {
  if (!profile.is_canonical()) {
    throw ValidationError("init_state requires a canonical profile (strictly increasing values)");
  }
  ClusterState s;
  s.time = 0.0;
  s.breakpoints = std::make_shared<const std::vector<double>>(profile.breakpoints().begin(),
                                                             profile.breakpoints().end());
  s.clusters.reserve(profile.size());
  for (std::size_t k = 0; k < profile.size(); ++k) {
    s.clusters.push_back({profile.values()[k], profile.piece_mass(k), k, k});
  }
  return s;
}

inline std::size_t cluster_count(const ClusterState& s) { return s.clusters.size(); }

// Index of the cluster containing initial piece k.
inline std::size_t cluster_of_piece(const ClusterState& s, std::size_t piece) {
  auto it = std::lower_bound(s.clusters.begin(), s.clusters.end(), piece,
                             [](const Cluster& c, std::size_t k) { return c.hi < k; });
  return static_cast<std::size_t>(it - s.clusters.begin());
}

// Initial piece owning mass coordinate u (right-continuous convention).
inline std::size_t piece_at(const ClusterState& s, double u) {
  const auto& bp = *s.breakpoints;
  if (!(u > bp.front() && u < bp.back())) {
    throw DomainError("mass coordinate must lie strictly inside the domain");
  }
  auto it = std::upper_bound(bp.begin() + 1, bp.end() - 1, u);
  return static_cast<std::size_t>(it - bp.begin()) - 1;
}

inline const Cluster& cluster_at(const ClusterState& s, double u) {
  return s.clusters[cluster_of_piece(s, piece_at(s, u))];
}

// m(u, t): mass of the cluster carrying coordinate u.
inline double mass_at(const ClusterState& s, double u) { return cluster_at(s, u).mass; }

// X(u, t): position of the particle starting at coordinate u.
inline double position_at(const ClusterState& s, double u) { return cluster_at(s, u).position; }

// int du / m(u,t)^beta over the domain, as an exact block sum.
inline double inverse_mass_integral(const ClusterState& s, double beta) {
  double total = 0.0;
  for (const auto& c : s.clusters) total += std::pow(c.mass, 1.0 - beta);
  return total;
}

inline double mass_weighted_mean(const ClusterState& s) {
  double moment = 0.0, mass = 0.0;
  for (const auto& c : s.clusters) {
    moment += c.mass * c.position;
    mass += c.mass;
  }
  return moment / mass;
}

// X(t) as a step function of the mass coordinate.
inline StepFunction as_step_function(const ClusterState& s) {
  const auto& bp = *s.breakpoints;
  std::vector<double> cuts;
  std::vector<double> vals;
  cuts.reserve(s.clusters.size() + 1);
  vals.reserve(s.clusters.size());
  cuts.push_back(bp.front());
  for (const auto& c : s.clusters) {
    cuts.push_back(bp[c.hi + 1]);
    vals.push_back(c.position);
  }
  return StepFunction(std::move(cuts), std::move(vals));
}

// Empty string when every structural invariant holds, else a description.
inline std::string check_invariants(const ClusterState& s, double mass_rel_tol = 1e-9) {
  if (!s.breakpoints || s.breakpoints->size() < 2) return "missing breakpoints";
  if (s.clusters.empty()) return "no clusters";
  const auto& bp = *s.breakpoints;
  double total = 0.0;
  std::size_t expect_lo = 0;
  for (std::size_t i = 0; i < s.clusters.size(); ++i) {
    const auto& c = s.clusters[i];
    if (!(c.mass > 0.0)) return "non-positive mass at cluster " + std::to_string(i);
    if (c.lo != expect_lo || c.hi < c.lo) return "non-contiguous blocks at cluster " + std::to_string(i);
    expect_lo = c.hi + 1;
    if (i > 0 && !(c.position > s.clusters[i - 1].position)) {
      return "positions not strictly increasing at cluster " + std::to_string(i);
    }
    const double block = bp[c.hi + 1] - bp[c.lo];
    if (std::abs(block - c.mass) > mass_rel_tol * s.total_mass()) {
      return "cluster mass differs from its block length at cluster " + std::to_string(i);
    }
    total += c.mass;
  }
  if (expect_lo != s.pieces()) return "blocks do not cover all pieces";
  if (std::abs(total - s.total_mass()) > mass_rel_tol * s.total_mass()) return "mass not conserved";
  return {};
}

//---------------------------------------------------------------------------//
// Coalescence
//---------------------------------------------------------------------------//

namespace detail {

struct WorkCluster {
  double position;
  double mass;
  double start_moment;  // sum of mass * position at step start
  std::size_t lo;
  std::size_t hi;
  std::size_t parts;
};

inline WorkCluster merge(const WorkCluster& a, const WorkCluster& b) {
  const double mass = a.mass + b.mass;
  return {(a.mass * a.position + b.mass * b.position) / mass, mass, a.start_moment + b.start_moment,
          a.lo, b.hi, a.parts + b.parts};
}

// Pool-adjacent-violators sweep, in place on the stack vector.
inline void pava(std::vector<WorkCluster>& items) {
  std::size_t top = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    items[top] = items[i];
    while (top > 0 && items[top - 1].position >= items[top].position) {
      items[top - 1] = merge(items[top - 1], items[top]);
      --top;
    }
    ++top;
  }
  items.resize(top);
}

}  // namespace detail

// Merges adjacent out-of-order (or tied) clusters into their mass-weighted
// mean until positions strictly increase.
inline std::vector<Cluster> resolve_coalescence(std::vector<Cluster> clusters) {
  std::vector<detail::WorkCluster> work;
  work.reserve(clusters.size());
  for (const auto& c : clusters) work.push_back({c.position, c.mass, 0.0, c.lo, c.hi, 1});
  detail::pava(work);
  clusters.clear();
  for (const auto& w : work) clusters.push_back({w.position, w.mass, w.lo, w.hi});
  return clusters;
}

// Probability that a Brownian bridge gap starting at gap0 and ending at gap1
// (both > 0) touched zero over a step of length dt with variance rate sigma2.
inline double bridge_crossing_probability(double gap0, double gap1, double sigma2, double dt) {
  if (gap0 <= 0.0 || gap1 <= 0.0) return 1.0;
  return std::exp(-2.0 * gap0 * gap1 / (sigma2 * dt));
}

// Reusable scratch for the stepping loop.
class Stepper {
 public:
  explicit Stepper(StepperConfig config) : config_(std::move(config)) {}

  const StepperConfig& config() const { return config_; }

  // One step of length dt: Gaussian increments, order-violation merges, then
  // the optional bridge-crossing merges.
  void advance(ClusterState& s, double dt, GaussianStream& rng, std::vector<MergeEvent>* events = nullptr) {
    const double t_end = s.time + dt;
    auto& cl = s.clusters;
    if (cl.size() == 1) {
      cl[0].position += config_.drift * dt + std::sqrt(dt / cl[0].mass) * rng();
      s.time = t_end;
      return;
    }
    work_.clear();
    for (const auto& c : cl) {
      const double x = c.position + config_.drift * dt + std::sqrt(dt / c.mass) * rng();
      work_.push_back({x, c.mass, c.mass * c.position, c.lo, c.hi, 1});
    }
    detail::pava(work_);
    if (config_.bridge_correction && work_.size() > 1) bridge_merge(dt, rng);
    cl.clear();
    for (const auto& w : work_) {
      cl.push_back({w.position, w.mass, w.lo, w.hi});
      if (events && w.parts > 1) events->push_back({t_end, w.lo, w.hi});
    }
    s.time = t_end;
  }

  // Largest admissible step from the current state, not exceeding `remaining`.
  double step_size(const ClusterState& s, double remaining) const {
    double h = std::min(config_.dt, remaining);
    if (config_.warmup_ratio > 0.0) {
      h = std::min(h, std::max(config_.warmup_dt0, config_.warmup_ratio * s.time));
    }
    if (config_.adaptive && s.clusters.size() > 1) {
      double min_gap2 = INFINITY, min_mass = INFINITY;
      for (std::size_t i = 0; i < s.clusters.size(); ++i) {
        min_mass = std::min(min_mass, s.clusters[i].mass);
        if (i > 0) {
          const double g = s.clusters[i].position - s.clusters[i - 1].position;
          min_gap2 = std::min(min_gap2, g * g);
        }
      }
      h = std::min(h, std::max(config_.dt_min, config_.adaptive_c * min_gap2 * min_mass / 4.0));
    }
    // avoid a sliver step right before a save time
    if (remaining - h < 1e-9 * h) h = remaining;
    return std::min(h, remaining);
  }

 private:
  void bridge_merge(double dt, GaussianStream& rng) {
    const std::size_t n = work_.size();
    flags_.assign(n, 0);
    bool any = false;
    for (std::size_t j = 0; j + 1 < n; ++j) {
      const auto& a = work_[j];
      const auto& b = work_[j + 1];
      const double gap0 = b.start_moment / b.mass - a.start_moment / a.mass;
      const double gap1 = b.position - a.position;
      const double sigma2 = 1.0 / a.mass + 1.0 / b.mass;
      const double expo = 2.0 * gap0 * gap1 / (sigma2 * dt);
      // exp(-40) is below one ulp of a uniform draw
      if (expo > 40.0) continue;
      if (rng.uniform() < std::exp(-expo)) {
        flags_[j] = 1;
        any = true;
      }
    }
    if (!any) return;
    std::size_t top = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j > 0 && flags_[j - 1]) {
        work_[top - 1] = detail::merge(work_[top - 1], work_[j]);
      } else {
        work_[top++] = work_[j];
      }
    }
    work_.resize(top);
  }

  StepperConfig config_;
  std::vector<detail::WorkCluster> work_;
  std::vector<char> flags_;
};

inline ClusterState advance(ClusterState state, double dt, GaussianStream& rng, const StepperConfig& config) {
  if (!(dt > 0.0)) throw DomainError("advance requires dt > 0");
  Stepper stepper(config);
  stepper.advance(state, dt, rng);
  return state;
}

//---------------------------------------------------------------------------//
// Trajectories
//---------------------------------------------------------------------------//

struct Trajectory {
  Breakpoints breakpoints;
  std::vector<double> save_times;
  std::vector<ClusterState> snapshots;
  std::vector<MergeEvent> events;

  double lower() const { return breakpoints->front(); }
  double upper() const { return breakpoints->back(); }

  // Snapshot at a saved time (relative match 1e-9).
  const ClusterState& at(double t) const {
    for (const auto& s : snapshots) {
      if (std::abs(s.time - t) <= 1e-9 * std::max(1.0, std::abs(t))) return s;
    }
    throw RangeError("time " + std::to_string(t) + " is not on the saved grid");
  }
};

// Runs the system over config.save_times. Deterministic in (profile, config, key).
inline Trajectory simulate(const StepProfile& profile, const StepperConfig& config, const StreamKey& key) {
  config.validate();
  ClusterState state = init_state(profile.is_canonical() ? profile : canonicalize(profile));
  GaussianStream rng(key);
  Stepper stepper(config);
  Trajectory traj;
  traj.breakpoints = state.breakpoints;
  traj.save_times = config.save_times;
  traj.snapshots.reserve(config.save_times.size());
  auto* events = config.record_events ? &traj.events : nullptr;
  for (double target : config.save_times) {
    while (state.time < target) {
      const double remaining = target - state.time;
      if (state.clusters.size() == 1) {
        // a lone cluster is an exact Brownian motion: jump straight to the target
        stepper.advance(state, remaining, rng);
        break;
      }
      stepper.advance(state, stepper.step_size(state, remaining), rng, events);
    }
    state.time = target;
    traj.snapshots.push_back(state);
  }
  return traj;
}

//---------------------------------------------------------------------------//
// Rescaling: X_rho(u, t) = rho^-alpha X(u rho - q, t rho^gamma), gamma = 2 alpha + 1
//---------------------------------------------------------------------------//

struct RescaleParams {
  double rho = 1.0;
  double q = 0.0;
  double alpha = 1.0;

  double gamma() const { return 2.0 * alpha + 1.0; }

  void validate() const {
    if (!(rho > 0.0 && rho <= 1.0)) throw ConfigError("rho must lie in (0, 1]");
    if (!(alpha > 0.5)) throw ConfigError("rescaling exponent alpha must exceed 1/2");
  }
};

namespace detail {

inline ClusterState rescale_state(const ClusterState& s, const RescaleParams& p, const Breakpoints& bp) {
  ClusterState out;
  out.breakpoints = bp;
  out.time = s.time / std::pow(p.rho, p.gamma());
  const double pos_scale = std::pow(p.rho, -p.alpha);
  out.clusters.reserve(s.clusters.size());
  for (const auto& c : s.clusters) out.clusters.push_back({c.position * pos_scale, c.mass / p.rho, c.lo, c.hi});
  return out;
}

}  // namespace detail

// Pure re-indexing of saved data; no re-simulation. With `times` given, only
// those rescaled times are produced and each must map onto a saved time.
inline Trajectory rescale_view(const Trajectory& traj, const RescaleParams& params,
                               std::optional<std::vector<double>> times = std::nullopt) {
  params.validate();
  auto bp = std::make_shared<std::vector<double>>(*traj.breakpoints);
  for (double& w : *bp) w = (w + params.q) / params.rho;
  Breakpoints shared = bp;
  Trajectory out;
  out.breakpoints = shared;
  const double tscale = std::pow(params.rho, params.gamma());
  if (!times) {
    for (const auto& s : traj.snapshots) {
      out.snapshots.push_back(detail::rescale_state(s, params, shared));
      out.save_times.push_back(out.snapshots.back().time);
    }
  } else {
    for (double t : *times) {
      const ClusterState& src = traj.at(t * tscale);
      out.snapshots.push_back(detail::rescale_state(src, params, shared));
      out.snapshots.back().time = t;
      out.save_times.push_back(t);
    }
  }
  for (const auto& e : traj.events) out.events.push_back({e.time / tscale, e.lo, e.hi});
  return out;
}

}  // namespace arratia
