#pragma once

// Experiment configuration: a JSON document validated in one pass. Every
// violation is collected; unknown keys are rejected.
//
// {
//   "equation": {"alpha", "beta", "n_cut", "dt", "nonlinearity_enabled", "bilinear_path"},
//   "noise":    {"z0": [{"k": [k1, k2], "parity": "cos"|"sin"|"both", "amplitude"}]},
//   "run":      {"T", "seed", "snapshot_stride", "ensemble_size", "workers", "initial_state"},
//   "analysis": {"output_modes", "observable", "bracket", "reach", "malliavin", "lln", "clt", "mix", "moment"}
// }

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hypomhd/ergodic.hpp"
#include "hypomhd/galerkin.hpp"
#include "hypomhd/malliavin.hpp"

namespace hypomhd {

using nlohmann::json;

class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> violations)
      : Error(ErrorCode::kConfig, join(violations)), violations_(std::move(violations)) {}
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : "; ") + x;
    return s;
  }
  std::vector<std::string> violations_;
};

struct ModeValue {
  Mode mode;
  double value = 0.0;
};

struct RunSettings {
  double T = 1.0;
  std::optional<std::uint64_t> seed;
  int snapshot_stride = 1;
  std::size_t ensemble_size = 16;
  unsigned workers = 1;
  std::vector<ModeValue> initial_state;
};

struct BracketSettings {
  int kmax = 3;
};

struct ReachSettings {
  int radius = 10;
  int max_depth = 0;
  std::vector<WaveVector> certificates;
};

struct MalliavinSettings {
  ConeSpec cone{0.5, 1};
  int samples = 2000;
  std::size_t paths = 1;
  std::vector<Mode> profile_modes;
};

struct LlnSettings {
  double burn_in = 0.0;
};

struct CltSettings {
  std::size_t replicas = 100;
  double pilot_T = 100.0;
  double burn_in = 0.0;
};

struct MixSettings {
  std::vector<ModeValue> initial_a;
  std::vector<ModeValue> initial_b;
  int stride = 10;
};

struct MomentSettings {
  double eta = 0.05;
};

struct ExperimentConfig {
  EquationParams equation;
  NoiseSpec noise;
  RunSettings run;
  std::vector<Mode> output_modes;
  Observable observable = Observable::total_energy();
  BracketSettings bracket;
  ReachSettings reach;
  MalliavinSettings malliavin;
  LlnSettings lln;
  CltSettings clt;
  MixSettings mix;
  MomentSettings moment;
  json source;  // validated input, echoed into manifests
};

namespace detail {

class Reader {
 public:
  std::vector<std::string> errors;

  void keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) {
      errors.push_back(path + ": expected an object");
      return;
    }
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = obj.begin(); it != obj.end(); ++it)
      if (!ok.count(it.key())) errors.push_back(path + ": unknown key \"" + it.key() + "\"");
  }

  template <class T>
  void get(const json& obj, const char* key, const std::string& path, T& out) {
    if (!obj.is_object() || !obj.contains(key)) return;
    const json& v = obj.at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw std::invalid_argument("");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw std::invalid_argument("");
        if constexpr (std::is_unsigned_v<T>)
          if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)
            throw std::invalid_argument("");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw std::invalid_argument("");
      }
      out = v.get<T>();
    } catch (const std::exception&) {
      errors.push_back(path + "." + key + ": wrong type");
    }
  }

  std::optional<WaveVector> wave(const json& v, const std::string& path) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer()) {
      errors.push_back(path + ": expected [k1, k2] integers");
      return std::nullopt;
    }
    return WaveVector{v[0].get<int>(), v[1].get<int>()};
  }

  std::optional<Parity> parity(const json& v, const std::string& path) {
    if (v == "cos" || v == 0) return Parity::kCos;
    if (v == "sin" || v == 1) return Parity::kSin;
    errors.push_back(path + ": parity must be \"cos\" or \"sin\"");
    return std::nullopt;
  }

  std::optional<Mode> mode(const json& v, const std::string& path) {
    keys(v, path, {"slot", "k", "parity"});
    if (!v.is_object()) return std::nullopt;
    Mode m;
    if (!v.contains("slot") || !v.contains("k") || !v.contains("parity")) {
      errors.push_back(path + ": mode needs slot, k and parity");
      return std::nullopt;
    }
    if (v["slot"] == "velocity") m.slot = Slot::kVelocity;
    else if (v["slot"] == "magnetic") m.slot = Slot::kMagnetic;
    else {
      errors.push_back(path + ".slot: must be \"velocity\" or \"magnetic\"");
      return std::nullopt;
    }
    auto k = wave(v["k"], path + ".k");
    auto p = parity(v["parity"], path + ".parity");
    if (!k || !p) return std::nullopt;
    if (k->is_zero()) {
      errors.push_back(path + ".k: zero wavevector");
      return std::nullopt;
    }
    m.k = *k;
    m.m = *p;
    return m;
  }

  std::vector<Mode> modes(const json& obj, const char* key, const std::string& path) {
    std::vector<Mode> out;
    if (!obj.is_object() || !obj.contains(key)) return out;
    const json& a = obj.at(key);
    if (!a.is_array()) {
      errors.push_back(path + "." + key + ": expected a list");
      return out;
    }
    for (std::size_t i = 0; i < a.size(); ++i)
      if (auto m = mode(a[i], path + "." + key + "[" + std::to_string(i) + "]")) out.push_back(*m);
    return out;
  }

  std::vector<ModeValue> state(const json& obj, const char* key, const std::string& path) {
    std::vector<ModeValue> out;
    if (!obj.is_object() || !obj.contains(key)) return out;
    const json& a = obj.at(key);
    if (!a.is_array()) {
      errors.push_back(path + "." + key + ": expected a list");
      return out;
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
      const std::string p = path + "." + key + "[" + std::to_string(i) + "]";
      keys(a[i], p, {"mode", "value"});
      if (!a[i].is_object() || !a[i].contains("mode") || !a[i].contains("value") || !a[i]["value"].is_number()) {
        errors.push_back(p + ": expected {\"mode\": ..., \"value\": number}");
        continue;
      }
      if (auto m = mode(a[i]["mode"], p + ".mode")) out.push_back({*m, a[i]["value"].get<double>()});
    }
    return out;
  }
};

inline const json& sub(const json& j, const char* key) {
  static const json empty = json::object();
  return j.is_object() && j.contains(key) ? j.at(key) : empty;
}

}  // namespace detail

/// Validates a parsed document; throws ConfigError listing every violation.
inline ExperimentConfig parse_config(const json& doc) {
  detail::Reader rd;
  ExperimentConfig c;
  c.source = doc;
  rd.keys(doc, "config", {"equation", "noise", "run", "analysis"});
  using detail::sub;

  const json& eq = sub(doc, "equation");
  rd.keys(eq, "equation", {"alpha", "beta", "n_cut", "dt", "nonlinearity_enabled", "bilinear_path"});
  rd.get(eq, "alpha", "equation", c.equation.alpha);
  rd.get(eq, "beta", "equation", c.equation.beta);
  rd.get(eq, "n_cut", "equation", c.equation.n_cut);
  rd.get(eq, "dt", "equation", c.equation.dt);
  rd.get(eq, "nonlinearity_enabled", "equation", c.equation.nonlinearity_enabled);
  if (eq.contains("bilinear_path")) {
    if (eq["bilinear_path"] == "transform") c.equation.path = BilinearPath::kTransform;
    else if (eq["bilinear_path"] == "convolution") c.equation.path = BilinearPath::kConvolution;
    else rd.errors.push_back("equation.bilinear_path: must be \"transform\" or \"convolution\"");
  }
  if (!(c.equation.alpha > 1.0)) rd.errors.push_back("alpha must exceed 1");
  if (!(c.equation.beta > 1.0)) rd.errors.push_back("beta must exceed 1");
  if (c.equation.n_cut < 1) rd.errors.push_back("n_cut must be >= 1");
  if (!(c.equation.dt > 0.0)) rd.errors.push_back("dt must be positive");

  const json& nz = sub(doc, "noise");
  rd.keys(nz, "noise", {"z0"});
  if (nz.contains("z0")) {
    const json& z = nz["z0"];
    if (!z.is_array()) rd.errors.push_back("noise.z0: expected a list");
    for (std::size_t i = 0; z.is_array() && i < z.size(); ++i) {
      const std::string p = "noise.z0[" + std::to_string(i) + "]";
      rd.keys(z[i], p, {"k", "parity", "amplitude"});
      if (!z[i].is_object() || !z[i].contains("k")) {
        rd.errors.push_back(p + ": missing k");
        continue;
      }
      auto k = rd.wave(z[i]["k"], p + ".k");
      double amp = 1.0;
      rd.get(z[i], "amplitude", p, amp);
      std::vector<Parity> parities{Parity::kCos, Parity::kSin};
      if (z[i].contains("parity") && z[i]["parity"] != "both") {
        auto q = rd.parity(z[i]["parity"], p + ".parity");
        parities = q ? std::vector<Parity>{*q} : std::vector<Parity>{};
      }
      if (!k) continue;
      if (k->is_zero()) rd.errors.push_back(p + ".k: zero wavevector");
      else if (!k->is_zero() && k->norm2() > long(c.equation.n_cut) * c.equation.n_cut)
        rd.errors.push_back(p + ".k: " + to_string(*k) + " lies outside the truncation n_cut = " +
                            std::to_string(c.equation.n_cut));
      if (amp == 0.0) rd.errors.push_back(p + ".amplitude: must be non-zero");
      for (Parity m : parities) c.noise.entries.push_back({*k, m, amp});
    }
  }

  const json& run = sub(doc, "run");
  rd.keys(run, "run", {"T", "seed", "snapshot_stride", "ensemble_size", "workers", "initial_state"});
  rd.get(run, "T", "run", c.run.T);
  if (run.contains("seed")) {
    std::uint64_t s = 0;
    const std::size_t before = rd.errors.size();
    rd.get(run, "seed", "run", s);
    if (rd.errors.size() == before) c.run.seed = s;
  }
  rd.get(run, "snapshot_stride", "run", c.run.snapshot_stride);
  rd.get(run, "ensemble_size", "run", c.run.ensemble_size);
  rd.get(run, "workers", "run", c.run.workers);
  c.run.initial_state = rd.state(run, "initial_state", "run");
  if (!(c.run.T > 0.0)) rd.errors.push_back("run.T: must be positive");
  if (c.run.snapshot_stride < 1) rd.errors.push_back("run.snapshot_stride: must be >= 1");
  if (c.run.ensemble_size < 1) rd.errors.push_back("run.ensemble_size: must be >= 1");

  const json& an = sub(doc, "analysis");
  rd.keys(an, "analysis", {"output_modes", "observable", "bracket", "reach", "malliavin", "lln", "clt", "mix", "moment"});
  c.output_modes = rd.modes(an, "output_modes", "analysis");

  if (an.contains("observable")) {
    const json& o = an["observable"];
    rd.keys(o, "analysis.observable", {"kind", "mode", "eta", "value"});
    std::optional<Mode> m;
    if (o.contains("mode")) m = rd.mode(o["mode"], "analysis.observable.mode");
    const std::string kind = o.value("kind", std::string("total_energy"));
    double eta = 1.0, value = 0.0;
    rd.get(o, "eta", "analysis.observable", eta);
    rd.get(o, "value", "analysis.observable", value);
    const bool needs_mode = kind == "mode_coefficient" || kind == "mode_square" || kind == "bounded_lipschitz";
    if (needs_mode && !m) rd.errors.push_back("analysis.observable: kind " + kind + " needs a mode");
    if (kind == "total_energy") c.observable = Observable::total_energy();
    else if (kind == "constant") c.observable = Observable::constant(value);
    else if (needs_mode && m) {
      if (kind == "mode_coefficient") c.observable = Observable::mode_coefficient(*m);
      else if (kind == "mode_square") c.observable = Observable::mode_square(*m);
      else c.observable = Observable::bounded_lipschitz(*m, eta);
    } else if (!needs_mode)
      rd.errors.push_back("analysis.observable.kind: unknown kind \"" + kind + "\"");
  }

  const json& br = sub(an, "bracket");
  rd.keys(br, "analysis.bracket", {"kmax"});
  rd.get(br, "kmax", "analysis.bracket", c.bracket.kmax);
  if (c.bracket.kmax < 1) rd.errors.push_back("analysis.bracket.kmax: must be >= 1");

  const json& re = sub(an, "reach");
  rd.keys(re, "analysis.reach", {"radius", "max_depth", "certificates"});
  rd.get(re, "radius", "analysis.reach", c.reach.radius);
  rd.get(re, "max_depth", "analysis.reach", c.reach.max_depth);
  if (re.contains("certificates")) {
    if (!re["certificates"].is_array()) rd.errors.push_back("analysis.reach.certificates: expected a list");
    else
      for (std::size_t i = 0; i < re["certificates"].size(); ++i)
        if (auto k = rd.wave(re["certificates"][i], "analysis.reach.certificates[" + std::to_string(i) + "]"))
          c.reach.certificates.push_back(*k);
  }
  if (c.reach.radius < 1) rd.errors.push_back("analysis.reach.radius: must be >= 1");

  const json& ma = sub(an, "malliavin");
  rd.keys(ma, "analysis.malliavin", {"cone_alpha", "cone_n", "samples", "paths", "profile_modes"});
  rd.get(ma, "cone_alpha", "analysis.malliavin", c.malliavin.cone.alpha);
  rd.get(ma, "cone_n", "analysis.malliavin", c.malliavin.cone.n);
  rd.get(ma, "samples", "analysis.malliavin", c.malliavin.samples);
  rd.get(ma, "paths", "analysis.malliavin", c.malliavin.paths);
  c.malliavin.profile_modes = rd.modes(ma, "profile_modes", "analysis.malliavin");
  if (!(c.malliavin.cone.alpha > 0.0 && c.malliavin.cone.alpha <= 1.0))
    rd.errors.push_back("analysis.malliavin.cone_alpha: must lie in (0, 1]");
  if (c.malliavin.cone.n < 1) rd.errors.push_back("analysis.malliavin.cone_n: must be >= 1");
  if (c.malliavin.paths < 1) rd.errors.push_back("analysis.malliavin.paths: must be >= 1");

  const json& ll = sub(an, "lln");
  rd.keys(ll, "analysis.lln", {"burn_in"});
  rd.get(ll, "burn_in", "analysis.lln", c.lln.burn_in);
  if (c.lln.burn_in < 0.0) rd.errors.push_back("analysis.lln.burn_in: must be nonnegative");

  const json& cl = sub(an, "clt");
  rd.keys(cl, "analysis.clt", {"replicas", "pilot_T", "burn_in"});
  rd.get(cl, "replicas", "analysis.clt", c.clt.replicas);
  rd.get(cl, "pilot_T", "analysis.clt", c.clt.pilot_T);
  rd.get(cl, "burn_in", "analysis.clt", c.clt.burn_in);
  if (c.clt.replicas < 50) rd.errors.push_back("analysis.clt.replicas: at least 50 required");
  if (!(c.clt.pilot_T > 0.0)) rd.errors.push_back("analysis.clt.pilot_T: must be positive");
  if (c.clt.burn_in < 0.0) rd.errors.push_back("analysis.clt.burn_in: must be nonnegative");

  const json& mx = sub(an, "mix");
  rd.keys(mx, "analysis.mix", {"initial_a", "initial_b", "stride"});
  c.mix.initial_a = rd.state(mx, "initial_a", "analysis.mix");
  c.mix.initial_b = rd.state(mx, "initial_b", "analysis.mix");
  rd.get(mx, "stride", "analysis.mix", c.mix.stride);
  if (c.mix.stride < 1) rd.errors.push_back("analysis.mix.stride: must be >= 1");

  const json& mo = sub(an, "moment");
  rd.keys(mo, "analysis.moment", {"eta"});
  rd.get(mo, "eta", "analysis.moment", c.moment.eta);
  if (!(c.moment.eta > 0.0)) rd.errors.push_back("analysis.moment.eta: must be positive");

  // Modes referenced anywhere must sit inside the truncation.
  auto inside = [&](const Mode& m, const std::string& where) {
    if (m.k.norm2() > long(c.equation.n_cut) * c.equation.n_cut)
      rd.errors.push_back(where + ": mode " + to_string(m) + " lies outside the truncation");
  };
  for (const auto& m : c.output_modes) inside(m, "analysis.output_modes");
  for (const auto& m : c.malliavin.profile_modes) inside(m, "analysis.malliavin.profile_modes");
  for (const auto& v : c.run.initial_state) inside(v.mode, "run.initial_state");
  for (const auto& v : c.mix.initial_a) inside(v.mode, "analysis.mix.initial_a");
  for (const auto& v : c.mix.initial_b) inside(v.mode, "analysis.mix.initial_b");
  if (c.observable.needs_mode()) inside(c.observable.mode, "analysis.observable");

  if (!rd.errors.empty()) throw ConfigError(rd.errors);
  return c;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open config file " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError({std::string("syntax error in ") + path + ": " + e.what()});
  }
}

inline ExperimentConfig parse_config_file(const std::string& path) { return parse_config(read_json_file(path)); }

/// Applies "a.b.c=value" overrides; the value is parsed as JSON, else taken as a string.
inline void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError({"override \"" + assignment + "\" is not key=value"});
  const std::string key = assignment.substr(0, eq), raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  json* node = &doc;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->contains(parts[i])) (*node)[parts[i]] = json::object();
    node = &(*node)[parts[i]];
  }
  (*node)[parts.back()] = value;
}

/// Coefficient vector from (mode, value) pairs; non-canonical k are folded.
inline VectorXd assemble_state(const GalerkinModel& model, const std::vector<ModeValue>& entries) {
  VectorXd U = model.zero();
  for (const auto& e : entries) {
    const CanonicalRep cr = canonical_rep(e.mode.k, e.mode.m);
    const auto i = model.truncation().index(Mode{e.mode.slot, cr.k, e.mode.m});
    if (!i) throw DomainError("state mode " + to_string(e.mode) + " outside truncation");
    U[Eigen::Index(*i)] += cr.sign * e.value;
  }
  return U;
}

}  // namespace hypomhd
