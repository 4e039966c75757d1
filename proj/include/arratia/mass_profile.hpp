#pragma once

// Initial mass/position profiles: non-decreasing functions on [0, b] that
// assign a starting position to each infinitesimal unit of mass.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "arratia/errors.hpp"

namespace arratia {

// Adjacent values closer than this are treated as one level set.
inline constexpr double kTieTolerance = 1e-12;

enum class Side { right, left };

//---------------------------------------------------------------------------//
// StepFunction: piecewise-constant function on [breakpoints.front(),
// breakpoints.back()], right-continuous. No monotonicity requirement; used for
// test functions and projections.
//---------------------------------------------------------------------------//
class StepFunction {
 public:
  StepFunction() = default;

  StepFunction(std::vector<double> breakpoints, std::vector<double> values)
      : breakpoints_(std::move(breakpoints)), values_(std::move(values)) {
    if (breakpoints_.size() < 2 || breakpoints_.size() != values_.size() + 1) {
      throw ValidationError("step function needs d >= 1 values and d + 1 breakpoints");
    }
    for (std::size_t i = 0; i + 1 < breakpoints_.size(); ++i) {
      if (!(breakpoints_[i] < breakpoints_[i + 1])) {
        throw ValidationError("breakpoints must be strictly increasing");
      }
    }
    for (double v : values_) {
      if (!std::isfinite(v)) throw ValidationError("step function values must be finite");
    }
    if (!std::isfinite(breakpoints_.front()) || !std::isfinite(breakpoints_.back())) {
      throw ValidationError("breakpoints must be finite");
    }
  }

  double lower() const { return breakpoints_.front(); }
  double upper() const { return breakpoints_.back(); }
  double length() const { return upper() - lower(); }
  std::size_t size() const { return values_.size(); }

  std::span<const double> breakpoints() const { return breakpoints_; }
  std::span<const double> values() const { return values_; }

  double piece_mass(std::size_t k) const { return breakpoints_[k + 1] - breakpoints_[k]; }

  // Piece k with breakpoints[k] <= u < breakpoints[k+1]; clamps outside the domain.
  std::size_t piece_index(double u) const {
    auto it = std::upper_bound(breakpoints_.begin() + 1, breakpoints_.end() - 1, u);
    return static_cast<std::size_t>(it - breakpoints_.begin()) - 1;
  }

  double operator()(double u) const { return values_[piece_index(u)]; }

  double integral() const {
    double s = 0.0;
    for (std::size_t k = 0; k < size(); ++k) s += values_[k] * piece_mass(k);
    return s;
  }

  // Integral over [lo, hi] intersected with the domain.
  double integral(double lo, double hi) const {
    lo = std::max(lo, lower());
    hi = std::min(hi, upper());
    if (!(lo < hi)) return 0.0;
    double s = 0.0;
    for (std::size_t k = piece_index(lo); k < size() && breakpoints_[k] < hi; ++k) {
      const double a = std::max(lo, breakpoints_[k]);
      const double b = std::min(hi, breakpoints_[k + 1]);
      if (b > a) s += values_[k] * (b - a);
    }
    return s;
  }

  // L2 inner product; both functions must share the same domain.
  double inner(const StepFunction& other) const {
    double s = 0.0;
    std::size_t i = 0, j = 0;
    double a = std::max(lower(), other.lower());
    while (i < size() && j < other.size()) {
      const double b = std::min(breakpoints_[i + 1], other.breakpoints_[j + 1]);
      if (b > a) s += values_[i] * other.values_[j] * (b - a);
      a = std::max(a, b);
      if (breakpoints_[i + 1] <= b) ++i;
      if (other.breakpoints_[j + 1] <= b) ++j;
    }
    return s;
  }

 private:
  std::vector<double> breakpoints_;
  std::vector<double> values_;
};

// Indicator of [lo, hi) as a step function on [0, b].
inline StepFunction indicator(double lo, double hi, double b) {
  lo = std::clamp(lo, 0.0, b);
  hi = std::clamp(hi, 0.0, b);
  std::vector<double> bp{0.0};
  std::vector<double> vals;
  if (lo > 0.0) {
    bp.push_back(lo);
    vals.push_back(0.0);
  }
  if (hi > lo) {
    bp.push_back(hi);
    vals.push_back(1.0);
  }
  if (hi < b) {
    bp.push_back(b);
    vals.push_back(0.0);
  }
  if (bp.back() != b) {
    bp.push_back(b);
    vals.push_back(0.0);
  }
  return StepFunction(std::move(bp), std::move(vals));
}

//---------------------------------------------------------------------------//
// StepProfile: non-decreasing step function on [0, b]. Each piece is one
// initial particle: position = value, mass = piece length.
//---------------------------------------------------------------------------//
class StepProfile {
 public:
  StepProfile() = default;

  StepProfile(std::vector<double> breakpoints, std::vector<double> values)
      : fn_(std::move(breakpoints), std::move(values)) {
    if (fn_.lower() != 0.0) throw ValidationError("profile breakpoints must start at 0");
    const auto v = fn_.values();
    for (std::size_t k = 0; k + 1 < v.size(); ++k) {
      if (v[k + 1] < v[k]) {
        throw ValidationError("profile values must be non-decreasing (piece " +
                              std::to_string(k + 1) + ")");
      }
    }
  }

  // d pieces of equal mass b/d.
  static StepProfile equal_pieces(std::vector<double> values, double total_mass = 1.0) {
    if (values.empty()) throw ValidationError("profile needs at least one value");
    if (!(total_mass > 0.0)) throw ValidationError("total mass must be positive");
    const std::size_t d = values.size();
    std::vector<double> bp(d + 1);
    for (std::size_t k = 0; k <= d; ++k) {
      bp[k] = total_mass * static_cast<double>(k) / static_cast<double>(d);
    }
    bp.back() = total_mass;
    return StepProfile(std::move(bp), std::move(values));
  }

  const StepFunction& function() const { return fn_; }
  double total_mass() const { return fn_.upper(); }
  std::size_t size() const { return fn_.size(); }
  std::span<const double> breakpoints() const { return fn_.breakpoints(); }
  std::span<const double> values() const { return fn_.values(); }
  double piece_mass(std::size_t k) const { return fn_.piece_mass(k); }
  std::size_t piece_index(double u) const { return fn_.piece_index(u); }
  double operator()(double u) const { return fn_(u); }

  bool is_canonical() const {
    const auto v = values();
    for (std::size_t k = 0; k + 1 < v.size(); ++k) {
      if (v[k + 1] - v[k] <= kTieTolerance) return false;
    }
    return true;
  }

 private:
  StepFunction fn_;
};

// Merges adjacent pieces whose values agree within kTieTolerance. A merged
// piece takes the mass-weighted mean value, so the integral is unchanged.
inline StepProfile canonicalize(const StepProfile& profile) {
  const auto bp = profile.breakpoints();
  const auto v = profile.values();
  std::vector<double> out_bp{bp.front()};
  std::vector<double> out_v;
  double group_integral = v[0] * profile.piece_mass(0);
  double group_lo = bp[0];
  for (std::size_t k = 1; k < v.size(); ++k) {
    if (v[k] - v[k - 1] <= kTieTolerance) {
      group_integral += v[k] * profile.piece_mass(k);
      continue;
    }
    out_bp.push_back(bp[k]);
    out_v.push_back(group_integral / (bp[k] - group_lo));
    group_lo = bp[k];
    group_integral = v[k] * profile.piece_mass(k);
  }
  out_bp.push_back(bp.back());
  out_v.push_back(group_integral / (bp.back() - group_lo));
  // Weighted means can drift by an ulp; single-piece groups keep their exact
  // value and the sequence stays non-decreasing.
  for (std::size_t k = 0; k < out_v.size(); ++k) {
    const std::size_t src = profile.piece_index(out_bp[k]);
    if (bp[src + 1] == out_bp[k + 1]) out_v[k] = v[src];
    if (k > 0 && out_v[k] < out_v[k - 1]) out_v[k] = out_v[k - 1];
  }
  return StepProfile(std::move(out_bp), std::move(out_v));
}

//---------------------------------------------------------------------------//
// TabulatedProfile: general non-decreasing profile, either sampled data or one
// of the analytic families evaluated in closed form.
//---------------------------------------------------------------------------//
enum class ProfileKind { tabulated, uniform, power };

// step_right: value[i] on [u_i, u_{i+1}).  step_left: value[i] on (u_{i-1}, u_i].
enum class Interpolation { step_right, step_left, linear };

class TabulatedProfile {
 public:
  // g(u) = u on [0, b].
  static TabulatedProfile uniform(double total_mass = 1.0) {
    if (!(total_mass > 0.0)) throw ValidationError("total mass must be positive");
    TabulatedProfile p;
    p.kind_ = ProfileKind::uniform;
    p.total_mass_ = total_mass;
    p.alpha_ = 1.0;
    p.u0_ = 0.0;
    return p;
  }

  // g(u) = scale * sgn(u - u0) * |u - u0|^alpha on [0, b].
  static TabulatedProfile power(double alpha, double u0, double scale = 1.0,
                                double total_mass = 1.0) {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ValidationError("power exponent must be positive");
    if (!(scale > 0.0)) throw ValidationError("power scale must be positive");
    if (!(total_mass > 0.0)) throw ValidationError("total mass must be positive");
    TabulatedProfile p;
    p.kind_ = ProfileKind::power;
    p.total_mass_ = total_mass;
    p.alpha_ = alpha;
    p.u0_ = u0;
    p.scale_ = scale;
    return p;
  }

  // Sampled profile on [points.front() = 0, points.back() = b].
  static TabulatedProfile tabulated(std::vector<double> points, std::vector<double> values,
                                    Interpolation mode = Interpolation::step_right) {
    if (points.size() < 2 || points.size() != values.size()) {
      throw ValidationError("tabulated profile needs >= 2 points and one value per point");
    }
    if (points.front() != 0.0) throw ValidationError("tabulated profile must start at u = 0");
    for (std::size_t i = 0; i + 1 < points.size(); ++i) {
      if (!(points[i] < points[i + 1])) throw ValidationError("sample points must be strictly increasing");
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!std::isfinite(values[i])) throw ValidationError("profile values must be finite");
      if (i > 0 && values[i] < values[i - 1]) {
        throw ValidationError("profile values must be non-decreasing");
      }
    }
    TabulatedProfile p;
    p.kind_ = ProfileKind::tabulated;
    p.total_mass_ = points.back();
    p.points_ = std::move(points);
    p.values_ = std::move(values);
    p.mode_ = mode;
    return p;
  }

  ProfileKind kind() const { return kind_; }
  Interpolation interpolation() const { return mode_; }
  double total_mass() const { return total_mass_; }
  double alpha() const { return alpha_; }
  double u0() const { return u0_; }
  double scale() const { return scale_; }
  std::span<const double> points() const { return points_; }
  std::span<const double> values() const { return values_; }

  double operator()(double u) const {
    switch (kind_) {
      case ProfileKind::uniform:
        return u;
      case ProfileKind::power: {
        const double v = u - u0_;
        const double mag = scale_ * std::pow(std::abs(v), alpha_);
        return v < 0.0 ? -mag : (v > 0.0 ? mag : 0.0);
      }
      case ProfileKind::tabulated:
        break;
    }
    return eval_table(u);
  }

  // Exact integral of g over [lo, hi] clipped to [0, b].
  double integral(double lo, double hi) const {
    lo = std::max(lo, 0.0);
    hi = std::min(hi, total_mass_);
    if (!(lo < hi)) return 0.0;
    switch (kind_) {
      case ProfileKind::uniform:
        return 0.5 * (hi - lo) * (hi + lo);
      case ProfileKind::power: {
        auto anti = [&](double v) { return scale_ * std::pow(std::abs(v), alpha_ + 1.0) / (alpha_ + 1.0); };
        return anti(hi - u0_) - anti(lo - u0_);
      }
      case ProfileKind::tabulated:
        break;
    }
    return integrate_table(lo, hi);
  }

  // (int_0^b |g|^p du)^(1/p), exact for every kind.
  double lp_norm(double p) const {
    if (!(p >= 1.0)) throw DomainError("lp_norm requires p >= 1");
    double s = 0.0;
    switch (kind_) {
      case ProfileKind::uniform:
        s = std::pow(total_mass_, p + 1.0) / (p + 1.0);
        break;
      case ProfileKind::power: {
        const double e = alpha_ * p + 1.0;
        auto part = [&](double lo, double hi) {
          // int over v in [lo, hi] of |v|^(alpha p), split at 0
          auto anti = [&](double v) { return (v < 0 ? -1.0 : 1.0) * std::pow(std::abs(v), e) / e; };
          return anti(hi) - anti(lo);
        };
        s = std::pow(scale_, p) * part(-u0_, total_mass_ - u0_);
        break;
      }
      case ProfileKind::tabulated:
        s = table_abs_power_integral(p);
        break;
    }
    return std::pow(s, 1.0 / p);
  }

 private:
  double eval_table(double u) const {
    const auto& x = points_;
    const auto& y = values_;
    if (u <= x.front()) return y.front();
    if (u >= x.back()) return y.back();
    switch (mode_) {
      case Interpolation::step_right: {
        auto it = std::upper_bound(x.begin(), x.end(), u);
        return y[static_cast<std::size_t>(it - x.begin()) - 1];
      }
      case Interpolation::step_left: {
        auto it = std::lower_bound(x.begin(), x.end(), u);
        return y[static_cast<std::size_t>(it - x.begin())];
      }
      case Interpolation::linear: {
        auto it = std::upper_bound(x.begin(), x.end(), u);
        const std::size_t i = static_cast<std::size_t>(it - x.begin()) - 1;
        const double w = (u - x[i]) / (x[i + 1] - x[i]);
        return y[i] + w * (y[i + 1] - y[i]);
      }
    }
    return y.back();
  }

  double integrate_table(double lo, double hi) const {
    const auto& x = points_;
    const auto& y = values_;
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < x.size(); ++i) {
      const double a = std::max(lo, x[i]);
      const double b = std::min(hi, x[i + 1]);
      if (!(b > a)) continue;
      switch (mode_) {
        case Interpolation::step_right:
          s += y[i] * (b - a);
          break;
        case Interpolation::step_left:
          s += y[i + 1] * (b - a);
          break;
        case Interpolation::linear:
          s += 0.5 * (eval_table(a) + eval_table(b)) * (b - a);
          break;
      }
    }
    return s;
  }

  double table_abs_power_integral(double p) const {
    const auto& x = points_;
    const auto& y = values_;
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < x.size(); ++i) {
      const double w = x[i + 1] - x[i];
      switch (mode_) {
        case Interpolation::step_right:
          s += std::pow(std::abs(y[i]), p) * w;
          break;
        case Interpolation::step_left:
          s += std::pow(std::abs(y[i + 1]), p) * w;
          break;
        case Interpolation::linear:
          s += abs_power_linear(y[i], y[i + 1], w, p);
          break;
      }
    }
    return s;
  }

  // int over a segment of width w of |linear(y0 -> y1)|^p.
  static double abs_power_linear(double y0, double y1, double w, double p) {
    if (y0 == y1) return std::pow(std::abs(y0), p) * w;
    const double slope = (y1 - y0) / w;
    auto anti = [&](double y) { return (y < 0 ? -1.0 : 1.0) * std::pow(std::abs(y), p + 1.0) / (p + 1.0); };
    return (anti(y1) - anti(y0)) / slope;
  }

  ProfileKind kind_ = ProfileKind::tabulated;
  Interpolation mode_ = Interpolation::step_right;
  double total_mass_ = 1.0;
  double alpha_ = 1.0;
  double u0_ = 0.0;
  double scale_ = 1.0;
  std::vector<double> points_;
  std::vector<double> values_;
};

//---------------------------------------------------------------------------//
// Operations
//---------------------------------------------------------------------------//

// G(u, r) = g(u + r) - g(u) (right) or g(u) - g(u - r) (left).
template <class Profile>
double increment(const Profile& g, double u, double r, Side side = Side::right) {
  const double b = g.total_mass();
  if (side == Side::right) {
    if (!(r > 0.0 && r < b - u)) throw DomainError("right increment requires 0 < r < b - u");
    return g(u + r) - g(u);
  }
  if (!(r > 0.0 && r < u)) throw DomainError("left increment requires 0 < r < u");
  return g(u) - g(u - r);
}

// Conditional expectation of g on the 2^level dyadic cells of [0, b].
inline StepProfile dyadic_step_approximation(const TabulatedProfile& g, int level) {
  if (level < 0 || level > 30) throw DomainError("dyadic level must be in [0, 30]");
  const std::size_t cells = std::size_t{1} << level;
  const double b = g.total_mass();
  std::vector<double> bp(cells + 1);
  for (std::size_t k = 0; k <= cells; ++k) {
    bp[k] = b * static_cast<double>(k) / static_cast<double>(cells);
  }
  bp.back() = b;
  std::vector<double> vals(cells);
  for (std::size_t k = 0; k < cells; ++k) {
    vals[k] = g.integral(bp[k], bp[k + 1]) / (bp[k + 1] - bp[k]);
    // rounding in flat regions must not break monotonicity
    if (k > 0 && vals[k] < vals[k - 1]) vals[k] = vals[k - 1];
  }
  return StepProfile(std::move(bp), std::move(vals));
}

// Level-set partition of a step profile: intervals [cuts[i], cuts[i+1]).
struct Partition {
  std::vector<double> cuts;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double total_mass() const { return cuts.back() - cuts.front(); }
};

inline Partition partition_of(const StepProfile& profile) {
  const StepProfile c = profile.is_canonical() ? profile : canonicalize(profile);
  const auto bp = c.breakpoints();
  const auto v = c.values();
  return Partition{{bp.begin(), bp.end()}, {v.begin(), v.end()}};
}

// True iff the interior of every interval of `finer` lies in one interval of
// `coarser`, i.e. every interior cut of `coarser` is also a cut of `finer`.
inline bool partition_leq(const Partition& finer, const Partition& coarser) {
  const double b = finer.total_mass();
  const double tol = kTieTolerance * std::max(1.0, std::abs(b));
  if (std::abs(b - coarser.total_mass()) > tol) {
    throw ValidationError("partitions must cover the same total mass");
  }
  std::size_t j = 0;
  for (std::size_t i = 1; i + 1 < coarser.cuts.size(); ++i) {
    const double c = coarser.cuts[i];
    while (j < finer.cuts.size() && finer.cuts[j] < c - tol) ++j;
    if (j == finer.cuts.size() || std::abs(finer.cuts[j] - c) > tol) return false;
  }
  return true;
}

// Orthogonal projection of h onto functions constant on the level sets of f.
inline StepFunction project(const StepProfile& f, const StepFunction& h) {
  const Partition part = partition_of(f);
  std::vector<double> vals(part.size());
  for (std::size_t k = 0; k < part.size(); ++k) {
    const double lo = part.cuts[k];
    const double hi = part.cuts[k + 1];
    vals[k] = h.integral(lo, hi) / (hi - lo);
  }
  return StepFunction(part.cuts, std::move(vals));
}

// Right-continuous version of g: the right limit of the interpolant at every
// point, left limit at the right endpoint.
inline TabulatedProfile cadlag_modification(const TabulatedProfile& g) {
  if (g.kind() != ProfileKind::tabulated || g.interpolation() != Interpolation::step_left) {
    return g;
  }
  const auto x = g.points();
  const auto y = g.values();
  const std::size_t n = x.size();
  std::vector<double> right(n);
  for (std::size_t i = 0; i + 1 < n; ++i) right[i] = y[i + 1];
  right[n - 1] = y[n - 1];
  return TabulatedProfile::tabulated({x.begin(), x.end()}, std::move(right), Interpolation::step_right);
}

inline double lp_norm(const StepFunction& g, double p) {
  if (!(p >= 1.0)) throw DomainError("lp_norm requires p >= 1");
  double s = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    s += std::pow(std::abs(g.values()[k]), p) * g.piece_mass(k);
  }
  return std::pow(s, 1.0 / p);
}

inline double lp_norm(const StepProfile& g, double p) { return lp_norm(g.function(), p); }

inline double lp_norm(const TabulatedProfile& g, double p) { return g.lp_norm(p); }

}  // namespace arratia
