#pragma once

// Serialization: profile JSON, trajectory/curve CSV, fit and report JSON,
// run manifests. Doubles go out with 17 significant digits.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "arratia/errors.hpp"
#include "arratia/estimators.hpp"
#include "arratia/flow_sim.hpp"
#include "arratia/mass_profile.hpp"
#include "arratia/verify.hpp"

namespace arratia {

using Json = nlohmann::ordered_json;

inline constexpr const char* kVersion = "0.1.0";

inline std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

//---------------------------------------------------------------------------//
// Profiles
//---------------------------------------------------------------------------//

// Either an explicit step profile or an analytic/tabulated family that is
// realized through its dyadic approximation at `level`.
struct ProfileSpec {
  std::optional<StepProfile> step;
  std::optional<TabulatedProfile> family;
  int level = 10;

  StepProfile realize() const {
    if (step) return canonicalize(*step);
    return canonicalize(dyadic_step_approximation(*family, level));
  }

  // Family view of either variant (a step profile becomes a right-continuous table).
  TabulatedProfile as_family() const {
    if (family) return *family;
    std::vector<double> pts(step->breakpoints().begin(), step->breakpoints().end());
    std::vector<double> vals(step->values().begin(), step->values().end());
    vals.push_back(vals.back());
    return TabulatedProfile::tabulated(std::move(pts), std::move(vals), Interpolation::step_right);
  }

  double total_mass() const { return step ? step->total_mass() : family->total_mass(); }
};

inline const char* to_string(Interpolation m) {
  switch (m) {
    case Interpolation::step_right: return "step_right";
    case Interpolation::step_left: return "step_left";
    case Interpolation::linear: return "linear";
  }
  return "?";
}

inline Interpolation parse_interpolation(const std::string& s) {
  if (s == "step_right") return Interpolation::step_right;
  if (s == "step_left") return Interpolation::step_left;
  if (s == "linear") return Interpolation::linear;
  throw ConfigError("unknown interpolation '" + s + "'");
}

inline Json profile_to_json(const ProfileSpec& p) {
  Json j;
  if (p.step) {
    j["kind"] = "step";
    j["total_mass"] = p.step->total_mass();
    j["breakpoints"] = std::vector<double>(p.step->breakpoints().begin(), p.step->breakpoints().end());
    j["values"] = std::vector<double>(p.step->values().begin(), p.step->values().end());
    return j;
  }
  const auto& f = *p.family;
  j["total_mass"] = f.total_mass();
  switch (f.kind()) {
    case ProfileKind::uniform:
      j["kind"] = "uniform";
      break;
    case ProfileKind::power:
      j["kind"] = "power";
      j["alpha"] = f.alpha();
      j["u0"] = f.u0();
      j["scale"] = f.scale();
      break;
    case ProfileKind::tabulated:
      j["kind"] = "tabulated";
      j["breakpoints"] = std::vector<double>(f.points().begin(), f.points().end());
      j["values"] = std::vector<double>(f.values().begin(), f.values().end());
      j["interpolation"] = to_string(f.interpolation());
      break;
  }
  j["level"] = p.level;
  return j;
}

inline ProfileSpec profile_from_json(const Json& j) {
  try {
    const std::string kind = j.at("kind").get<std::string>();
    ProfileSpec p;
    p.level = j.value("level", 10);
    const double b = j.value("total_mass", 1.0);
    if (kind == "step") {
      p.step = StepProfile(j.at("breakpoints").get<std::vector<double>>(), j.at("values").get<std::vector<double>>());
      if (j.contains("total_mass") && std::abs(p.step->total_mass() - b) > 1e-12 * b) {
        throw ConfigError("total_mass does not match the last breakpoint");
      }
    } else if (kind == "uniform") {
      p.family = TabulatedProfile::uniform(b);
    } else if (kind == "power") {
      p.family = TabulatedProfile::power(j.at("alpha").get<double>(), j.value("u0", 0.5 * b), j.value("scale", 1.0), b);
    } else if (kind == "tabulated") {
      p.family = TabulatedProfile::tabulated(j.at("breakpoints").get<std::vector<double>>(),
                                             j.at("values").get<std::vector<double>>(),
                                             parse_interpolation(j.value("interpolation", std::string("step_right"))));
    } else {
      throw ConfigError("unknown profile kind '" + kind + "'");
    }
    if (p.level < 0 || p.level > 30) throw ConfigError("profile level must lie in [0, 30]");
    return p;
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("malformed profile JSON: ") + e.what());
  } catch (const ValidationError& e) {
    throw ConfigError(std::string("invalid profile: ") + e.what());
  }
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("cannot parse '" + path + "': " + e.what());
  }
}

//---------------------------------------------------------------------------//
// CSV
//---------------------------------------------------------------------------//

inline constexpr const char* kTrajectoryHeader = "replicate,t,cluster_idx,position,mass,index_lo,index_hi";
inline constexpr const char* kCurveHeader = "observable,t,n,mean,se,ci_lo,ci_hi";

inline void write_trajectory_rows(std::ostream& os, std::size_t replicate, const Trajectory& tr) {
  for (const auto& s : tr.snapshots) {
    for (std::size_t c = 0; c < s.clusters.size(); ++c) {
      const auto& cl = s.clusters[c];
      os << replicate << ',' << fmt17(s.time) << ',' << c << ',' << fmt17(cl.position) << ',' << fmt17(cl.mass) << ','
         << cl.lo << ',' << cl.hi << '\n';
    }
  }
}

inline void write_curve_rows(std::ostream& os, const Curve& c) {
  for (const auto& p : c.points) {
    os << c.observable << ',' << fmt17(p.t) << ',' << p.n << ',' << fmt17(p.mean) << ',' << fmt17(p.se) << ','
       << fmt17(p.ci_lo) << ',' << fmt17(p.ci_hi) << '\n';
  }
}

inline Json fit_to_json(const ExponentFit& f, std::optional<double> target) {
  Json j;
  j["slope"] = f.slope;
  j["stderr"] = f.stderr_slope;
  j["target"] = target ? Json(*target) : Json(nullptr);
  j["range"] = {f.t_min, f.t_max};
  j["intercept"] = f.intercept;
  j["r2"] = f.r2;
  j["warnings"] = f.warnings;
  return j;
}

//---------------------------------------------------------------------------//
// Reports
//---------------------------------------------------------------------------//

inline Json report_to_json(const VerificationReport& r) {
  Json j;
  j["check"] = r.check;
  j["verdict"] = to_string(r.verdict);
  j["replicates"] = r.replicates;
  j["wall_seconds"] = r.wall_seconds;
  Json params = Json::object();
  for (const auto& [k, v] : r.parameters) params[k] = v;
  j["parameters"] = params;
  Json metrics = Json::array();
  for (const auto& m : r.metrics) {
    metrics.push_back({{"name", m.name},
                       {"value", m.value},
                       {"ci", {m.ci_lo, m.ci_hi}},
                       {"target", {m.target_lo, m.target_hi}},
                       {"verdict", to_string(m.verdict)},
                       {"note", m.note}});
  }
  j["metrics"] = metrics;
  j["notes"] = r.notes;
  return j;
}

inline std::string report_table(const std::vector<VerificationReport>& reports) {
  std::ostringstream os;
  auto num = [](double x) {
    std::ostringstream s;
    s << std::setprecision(6) << x;
    return s.str();
  };
  for (const auto& r : reports) {
    os << "== " << r.check << ": " << to_string(r.verdict) << "  (N=" << r.replicates << ", " << std::fixed
       << std::setprecision(2) << r.wall_seconds << " s)\n"
       << std::defaultfloat;
    std::size_t w = 6;
    for (const auto& m : r.metrics) w = std::max(w, m.name.size());
    os << "  " << std::left << std::setw(static_cast<int>(w)) << "metric" << "  " << std::setw(13) << "value"
       << std::setw(29) << "ci" << std::setw(29) << "target" << "verdict\n";
    for (const auto& m : r.metrics) {
      os << "  " << std::setw(static_cast<int>(w)) << m.name << "  " << std::setw(13) << num(m.value)
         << std::setw(29) << ("[" + num(m.ci_lo) + ", " + num(m.ci_hi) + "]") << std::setw(29)
         << ("[" + num(m.target_lo) + ", " + num(m.target_hi) + "]") << to_string(m.verdict) << '\n';
    }
    for (const auto& n : r.notes) os << "  note: " << n << '\n';
    os << std::right;
  }
  return os.str();
}

//---------------------------------------------------------------------------//
// Manifests
//---------------------------------------------------------------------------//

inline std::string config_hash(const Json& config) { return hex64(fnv1a(config.dump())); }

inline Json make_manifest(const Json& config) {
  Json m;
  m["version"] = kVersion;
  m["seed"] = config.value("seed", std::uint64_t{1});
  m["config_hash"] = config_hash(config);
  m["config"] = config;
  return m;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw ConfigError("write failed for '" + path.string() + "'");
}

}  // namespace arratia
