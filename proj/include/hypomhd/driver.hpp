#pragma once

// Subcommand dispatch and artifact emission. Every run writes its outputs
// plus one manifest.json (config echo, version, wall times, SHA-256 digests).

#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "hypomhd/bracket.hpp"
#include "hypomhd/config.hpp"
#include "hypomhd/ergodic.hpp"
#include "hypomhd/malliavin.hpp"
#include "hypomhd/parallel.hpp"
#include "hypomhd/reachability.hpp"
#include "hypomhd/version.hpp"

namespace hypomhd {

inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error(ErrorCode::kIo, "SHA-256 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

inline std::string utc_timestamp(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// CSV-safe column label, e.g. sigma0_1_-2.
inline std::string mode_column(const Mode& m) {
  return std::string(m.slot == Slot::kVelocity ? "psi" : "sigma") + (m.m == Parity::kCos ? "0" : "1") + "_" +
         std::to_string(m.k.k1) + "_" + std::to_string(m.k.k2);
}

inline json mode_json(const Mode& m) {
  return {{"slot", to_string(m.slot)}, {"k", {m.k.k1, m.k.k2}}, {"parity", to_string(m.m)}};
}

inline json wave_json(WaveVector k) { return json::array({k.k1, k.k2}); }

inline json wave_set_json(const WaveSet& s) {
  json a = json::array();
  for (WaveVector k : s) a.push_back(wave_json(k));
  return a;
}

class OutputDir {
 public:
  explicit OutputDir(std::string path) : path_(std::move(path)), start_(std::chrono::system_clock::now()) {
    std::error_code ec;
    std::filesystem::create_directories(path_, ec);
    if (ec) throw Error(ErrorCode::kIo, "cannot create output directory " + path_ + ": " + ec.message());
  }

  void write(const std::string& name, const std::string& content) {
    std::ofstream out(std::filesystem::path(path_) / name, std::ios::binary);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + name);
    out << content;
    if (!out) throw Error(ErrorCode::kIo, "write failed for " + name);
    files_.push_back({{"file", name}, {"bytes", content.size()}, {"sha256", sha256_hex(content)}});
  }

  void write_json(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }

  void finish(const std::string& subcommand, const json& config, unsigned workers) {
    const auto end = std::chrono::system_clock::now();
    json m;
    m["tool"] = "hypomhd";
    m["version"] = kVersion;
    m["subcommand"] = subcommand;
    m["config"] = config;
    m["workers"] = workers;
    m["started_at"] = utc_timestamp(start_);
    m["finished_at"] = utc_timestamp(end);
    m["wall_seconds"] = std::chrono::duration<double>(end - start_).count();
    m["outputs"] = files_;
    std::ofstream out(std::filesystem::path(path_) / "manifest.json", std::ios::binary);
    out << m.dump(2) << "\n";
    if (!out) throw Error(ErrorCode::kIo, "cannot write manifest.json");
  }

  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::chrono::system_clock::time_point start_;
  json files_ = json::array();
};

struct DispatchOptions {
  std::string subcommand;  // bracket, reach, simulate, malliavin, lln, clt, mix, moment
  std::string outdir = "hypomhd-out";
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<int> kmax;
  std::vector<WaveVector> z0;
  std::optional<int> radius;
  std::optional<int> max_depth;
  std::vector<WaveVector> certificates;
  std::optional<unsigned> workers;
};

namespace detail {

/// Config echo with scheduling knobs removed, so outputs are worker-independent.
inline json config_echo(const ExperimentConfig& c) {
  json j = c.source;
  if (j.is_object() && j.contains("run") && j["run"].is_object()) j["run"].erase("workers");
  return j;
}

inline std::uint64_t require_seed(const ExperimentConfig& c, const std::string& sub) {
  if (!c.run.seed) throw ConfigError({"run.seed: required for stochastic subcommand " + sub});
  return *c.run.seed;
}

inline std::vector<Mode> output_modes(const ExperimentConfig& c, const GalerkinModel& model) {
  if (!c.output_modes.empty()) {
    std::vector<Mode> out;
    for (const Mode& m : c.output_modes) {
      const CanonicalRep cr = canonical_rep(m.k, m.m);
      out.push_back({m.slot, cr.k, m.m});
    }
    return out;
  }
  std::vector<Mode> all;
  for (std::size_t i = 0; i < model.dim(); ++i) all.push_back(model.truncation().mode(i));
  return all;
}

inline std::string csv_preamble(const json& config, std::uint64_t seed) {
  return "# seed=" + std::to_string(seed) + " config=" + config.dump() + "\n";
}

inline json run_bracket(const DispatchOptions& o, const ExperimentConfig& c, OutputDir& out) {
  const int kmax = o.kmax.value_or(c.bracket.kmax);
  if (kmax < 1) throw DomainError("kmax must be >= 1");
  const BracketSweep sweep = verify_sweep(kmax);
  std::ostringstream csv;
  csv << "k1,k2,l1,l2,slot,combo,flag,selection_ok,max_mismatch,target,symbolic,quadrature,ratio\n";
  for (const auto& r : sweep.reports) {
    csv << r.k.k1 << ',' << r.k.k2 << ',' << r.l.k1 << ',' << r.l.k2 << ',' << to_string(r.slot) << ','
        << to_string(r.combo) << ',' << to_string(r.flag) << ',' << (r.selection_ok ? "true" : "false") << ','
        << format_double(r.max_mismatch) << ',' << (r.target ? mode_column(*r.target) : "") << ','
        << format_double(r.symbolic_coefficient) << ',' << format_double(r.quadrature_coefficient) << ','
        << format_double(r.coefficient_ratio) << '\n';
  }
  out.write("bracket_reports.csv", csv.str());
  std::size_t degenerate = 0;
  for (const auto& r : sweep.reports) degenerate += r.flag != Degeneracy::kNone;
  json lines = json::array();
  for (const auto& [key, sgn] : sweep.line_sign)
    lines.push_back({{"slot", to_string(key.first)}, {"combo", to_string(key.second)}, {"sign", sgn}});
  json j = {{"kmax", kmax},
            {"reports", sweep.reports.size()},
            {"degenerate", degenerate},
            {"all_selection_ok", sweep.all_selection_ok},
            {"normalization_constant", sweep.normalization_constant},
            {"max_relative_spread", sweep.max_relative_spread},
            {"line_signs_consistent", sweep.line_signs_consistent},
            {"line_signs", lines}};
  out.write_json("bracket_report.json", j);
  return {{"bracket", {{"kmax", kmax}}}};
}

inline json run_reach(const DispatchOptions& o, const ExperimentConfig& c, OutputDir& out) {
  std::vector<WaveVector> z0 = o.z0;
  if (z0.empty()) z0 = c.noise.wavevectors();
  if (z0.empty()) throw ConfigError({"reach: no Z_0 given (use --z0 or noise.z0)"});
  const ForcedSet forced = ForcedSet::from(z0);
  const int radius = o.radius.value_or(c.reach.radius);
  const int max_depth = o.max_depth.value_or(c.reach.max_depth);
  const HypothesisReport rep = check_hypothesis(forced, radius, max_depth);
  json j = {{"z0", json::array()},
            {"radius", rep.radius},
            {"max_depth", rep.max_depth},
            {"depth_used", rep.depth_used},
            {"tracking_radius", rep.tracking_radius},
            {"even_covered", rep.even_covered},
            {"odd_covered", rep.odd_covered},
            {"missing_even", wave_set_json(rep.missing_even)},
            {"missing_odd", wave_set_json(rep.missing_odd)}};
  for (WaveVector k : z0) j["z0"].push_back(wave_json(k));
  j["first_generation"] = wave_set_json(next_generation(forced.symmetrized, forced));
  std::vector<WaveVector> targets = o.certificates;
  if (targets.empty()) targets = c.reach.certificates;
  json certs = json::array();
  for (WaveVector t : targets)
    for (ChainParity p : {ChainParity::kEven, ChainParity::kOdd}) {
      json e = {{"target", wave_json(t)}, {"parity", p == ChainParity::kEven ? "even" : "odd"}};
      if (auto cert = generation_certificate(forced, t, p, max_depth)) {
        e["start"] = wave_json(cert->start);
        e["steps"] = json::array();
        for (WaveVector l : cert->steps) e["steps"].push_back(wave_json(l));
        e["length"] = cert->length();
        e["tracking_radius"] = cert->tracking_radius;
        e["sound"] = certificate_sound(forced, *cert);
      } else {
        e["found"] = false;
      }
      certs.push_back(e);
    }
  j["certificates"] = certs;
  out.write_json("reach_report.json", j);
  json echo = {{"reach", {{"radius", radius}, {"max_depth", max_depth}}}, {"z0", j["z0"]}};
  return echo;
}

inline json run_simulate(const ExperimentConfig& c, OutputDir& out) {
  const std::uint64_t seed = require_seed(c, "simulate");
  const GalerkinModel model(c.equation);
  const StochasticForcing forcing(model, c.noise);
  const VectorXd U0 = assemble_state(model, c.run.initial_state);
  const TrajectoryRecord rec = simulate(model, forcing, U0, c.run.T, seed, c.run.snapshot_stride);
  const auto modes = output_modes(c, model);
  std::vector<Eigen::Index> idx;
  for (const Mode& m : modes) idx.push_back(Eigen::Index(*model.truncation().index(m)));
  std::ostringstream csv;
  csv << csv_preamble(config_echo(c), seed) << "time,energy";
  for (const Mode& m : modes) csv << ',' << mode_column(m);
  csv << '\n';
  for (std::size_t n = 0; n < rec.states.size(); ++n) {
    csv << format_double(rec.times[n]) << ',' << format_double(rec.states[n].squaredNorm());
    for (Eigen::Index i : idx) csv << ',' << format_double(rec.states[n][i]);
    csv << '\n';
  }
  out.write("trajectory.csv", csv.str());
  const VectorXd& UT = rec.states.back();
  out.write_json("simulate_summary.json", {{"config", config_echo(c)},
                                           {"seed", seed},
                                           {"steps", rec.steps},
                                           {"snapshots", rec.states.size()},
                                           {"dimension", model.dim()},
                                           {"E0", c.noise.energy_E0()},
                                           {"final_energy", UT.squaredNorm()},
                                           {"final_dissipation", model.dissipation(UT)},
                                           {"all_finite", UT.allFinite()}});
  return json::object();
}

inline json run_malliavin(const ExperimentConfig& c, OutputDir& out, unsigned workers) {
  const std::uint64_t seed = require_seed(c, "malliavin");
  const GalerkinModel model(c.equation);
  const StochasticForcing forcing(model, c.noise);
  if (forcing.dimension() == 0) throw ConfigError({"malliavin: noise.z0 is empty"});
  const VectorXd U0 = assemble_state(model, c.run.initial_state);
  (void)model.tensor();
  struct PathResult {
    json summary;
    VectorXd diagonal;
    std::string profiles;
  };
  auto results = run_indexed(c.malliavin.paths, workers, [&](std::size_t p) {
    const TrajectoryRecord rec = simulate(model, forcing, U0, c.run.T, derive_seed(seed, p), 1, true);
    const FrozenPath path(model, rec);
    const MalliavinMatrix M = assemble_malliavin(path, forcing);
    const SpectrumReport sp = spectrum(M.gram);
    const ConeReport cone = cone_infimum(M, c.malliavin.cone, c.malliavin.samples, derive_seed(seed ^ 0x5bd1e995ull, p));
    PathResult r;
    r.summary = {{"path", p},
                 {"trace", M.gram.trace()},
                 {"min_eigenvalue", sp.min_eigenvalue},
                 {"max_eigenvalue", sp.max_eigenvalue},
                 {"psd", sp.psd},
                 {"eigenvalues", std::vector<double>(sp.eigenvalues.data(), sp.eigenvalues.data() + sp.eigenvalues.size())},
                 {"cone",
                  {{"compressed_min_eig", cone.compressed_min_eig},
                   {"sampled_inf", cone.sampled_inf},
                   {"dual_lower_bound", cone.dual_lower_bound},
                   {"dual_mu", cone.dual_mu},
                   {"samples_evaluated", cone.samples_evaluated}}}};
    r.diagonal = M.gram.diagonal();
    if (p == 0) {
      std::ostringstream csv;
      csv << csv_preamble(config_echo(c), seed) << "phi,noise_mode,time,value\n";
      for (const Mode& m : c.malliavin.profile_modes) {
        const VectorXd phi = assemble_state(model, {{m, 1.0}});
        const MatrixXd prof = adjoint_profile(path, forcing, phi);
        for (Eigen::Index e = 0; e < prof.cols(); ++e) {
          const auto& ne = forcing.spec().entries[std::size_t(e)];
          const std::string nm = mode_column({Slot::kMagnetic, ne.k, ne.m});
          for (Eigen::Index n = 0; n < prof.rows(); ++n)
            csv << mode_column(m) << ',' << nm << ',' << format_double(double(n) * rec.dt) << ','
                << format_double(prof(n, e)) << '\n';
        }
      }
      r.profiles = csv.str();
    }
    return r;
  });
  json paths = json::array();
  std::size_t positive = 0;
  bool dual_ordered = true;
  for (const auto& r : results) {
    paths.push_back(r.summary);
    positive += r.summary["cone"]["sampled_inf"].get<double>() > 1e-10;
    dual_ordered = dual_ordered && r.summary["cone"]["dual_lower_bound"].get<double>() <=
                                       r.summary["cone"]["sampled_inf"].get<double>() +
                                           1e-12 * std::max(1.0, r.summary["max_eigenvalue"].get<double>());
  }
  json diag = json::array();
  for (std::size_t i = 0; i < model.dim(); ++i)
    diag.push_back({{"mode", mode_column(model.truncation().mode(i))}, {"value", results[0].diagonal[Eigen::Index(i)]}});
  out.write_json("malliavin.json", {{"config", config_echo(c)},
                                    {"seed", seed},
                                    {"cone", {{"alpha", c.malliavin.cone.alpha}, {"n", c.malliavin.cone.n}}},
                                    {"positive_fraction", double(positive) / double(results.size())},
                                    {"dual_bound_ordered", dual_ordered},
                                    {"paths", paths},
                                    {"diagonal_path0", diag}});
  if (!c.malliavin.profile_modes.empty()) out.write("adjoint_profiles.csv", results[0].profiles);
  return json::object();
}

inline json run_lln(const ExperimentConfig& c, OutputDir& out) {
  const std::uint64_t seed = require_seed(c, "lln");
  if (!(c.lln.burn_in < c.run.T)) throw ConfigError({"analysis.lln.burn_in: must be smaller than run.T"});
  const GalerkinModel model(c.equation);
  const StochasticForcing forcing(model, c.noise);
  const BoundObservable obs(c.observable, model.truncation());
  const VectorXd U0 = assemble_state(model, c.run.initial_state);
  const TrajectoryRecord rec = simulate(model, forcing, U0, c.run.T, seed, c.run.snapshot_stride);
  const ErgodicReport r = time_average(rec, obs, c.lln.burn_in, seed);
  std::ostringstream csv;
  csv << csv_preamble(config_echo(c), seed) << "time,observable\n";
  for (std::size_t n = 0; n < rec.states.size(); ++n)
    csv << format_double(rec.times[n]) << ',' << format_double(obs(rec.states[n])) << '\n';
  out.write("lln_series.csv", csv.str());
  out.write_json("lln.json", {{"config", config_echo(c)},
                              {"seed", seed},
                              {"observable", c.observable.name()},
                              {"burn_in", c.lln.burn_in},
                              {"estimate", r.estimate},
                              {"standard_error", r.standard_error},
                              {"sample_count", r.sample_count}});
  return json::object();
}

inline json run_clt(const ExperimentConfig& c, OutputDir& out, unsigned workers) {
  const std::uint64_t seed = require_seed(c, "clt");
  const GalerkinModel model(c.equation);
  const StochasticForcing forcing(model, c.noise);
  const BoundObservable obs(c.observable, model.truncation());
  const VectorXd U0 = assemble_state(model, c.run.initial_state);
  const CltResult r =
      clt_sample(model, forcing, obs, U0, c.run.T, c.clt.replicas, seed, c.clt.pilot_T, c.clt.burn_in, workers);
  std::ostringstream csv;
  csv << csv_preamble(config_echo(c), seed) << "replica,deviation\n";
  for (std::size_t i = 0; i < r.deviations.size(); ++i) csv << i << ',' << format_double(r.deviations[i]) << '\n';
  out.write("clt_samples.csv", csv.str());
  out.write_json("clt.json", {{"config", config_echo(c)},
                              {"seed", seed},
                              {"observable", c.observable.name()},
                              {"replicas", r.deviations.size()},
                              {"pilot_mean", r.pilot_mean},
                              {"sample_variance", r.sample_variance},
                              {"ks_statistic", r.ks.statistic},
                              {"ks_p_value", r.ks.p_value}});
  return json::object();
}

inline json run_mix(const ExperimentConfig& c, OutputDir& out, unsigned workers) {
  const std::uint64_t seed = require_seed(c, "mix");
  const GalerkinModel model(c.equation);
  const StochasticForcing forcing(model, c.noise);
  const BoundObservable obs(c.observable, model.truncation());
  const VectorXd a = assemble_state(model, c.mix.initial_a), b = assemble_state(model, c.mix.initial_b);
  const MixingReport r =
      mixing_decay_estimate(model, forcing, obs, a, b, c.run.ensemble_size, c.run.T, c.mix.stride, seed, workers);
  std::ostringstream csv;
  csv << csv_preamble(config_echo(c), seed) << "time,difference,standard_error\n";
  for (std::size_t n = 0; n < r.times.size(); ++n)
    csv << format_double(r.times[n]) << ',' << format_double(r.difference[n]) << ','
        << format_double(r.standard_error[n]) << '\n';
  out.write("mixing.csv", csv.str());
  json j = {{"config", config_echo(c)},
            {"seed", seed},
            {"observable", c.observable.name()},
            {"ensemble", c.run.ensemble_size},
            {"status", r.status},
            {"fit_points", r.fit_points},
            {"r_squared", r.r_squared},
            {"rate_half_width_95", r.rate_half_width},
            {"note", "empirical decay of ensemble observable differences; not a Wasserstein estimate"}};
  j["rate"] = r.rate ? json(*r.rate) : json(nullptr);
  out.write_json("mixing.json", j);
  return json::object();
}

inline json run_moment(const ExperimentConfig& c, OutputDir& out, unsigned workers) {
  const std::uint64_t seed = require_seed(c, "moment");
  const GalerkinModel model(c.equation);
  const StochasticForcing forcing(model, c.noise);
  const VectorXd U0 = assemble_state(model, c.run.initial_state);
  const double eta = c.moment.eta;
  auto series = run_indexed(c.run.ensemble_size, workers, [&](std::size_t i) {
    const TrajectoryRecord rec = simulate(model, forcing, U0, c.run.T, derive_seed(seed, i), c.run.snapshot_stride);
    return std::pair{rec.times, exp_moment_probe(rec, model, eta)};
  });
  const auto& times = series.front().first;
  const double e0 = eta * U0.squaredNorm();
  double log_c = -std::numeric_limits<double>::infinity();
  std::ostringstream csv;
  csv << csv_preamble(config_echo(c), seed) << "time,log_mean_statistic,log_reference\n";
  std::vector<double> lm(times.size());
  for (std::size_t n = 0; n < times.size(); ++n) {
    std::vector<double> x;
    for (const auto& s : series) x.push_back(s.second[n]);
    lm[n] = log_mean_exp(x);
    log_c = std::max(log_c, lm[n] - e0 * std::exp(-times[n]));
  }
  for (std::size_t n = 0; n < times.size(); ++n)
    csv << format_double(times[n]) << ',' << format_double(lm[n]) << ','
        << format_double(log_c + e0 * std::exp(-times[n])) << '\n';
  out.write("moment.csv", csv.str());
  out.write_json("moment.json", {{"config", config_echo(c)},
                                 {"seed", seed},
                                 {"eta", eta},
                                 {"ensemble", c.run.ensemble_size},
                                 {"fitted_log_C", log_c},
                                 {"max_log_mean_statistic", *std::max_element(lm.begin(), lm.end())},
                                 {"bounded", std::isfinite(log_c)}});
  return json::object();
}

}  // namespace detail

/// Runs one subcommand; throws hypomhd::Error subclasses on failure.
inline void dispatch(const DispatchOptions& o) {
  json doc = o.config_path.empty() ? json::object() : read_json_file(o.config_path);
  for (const auto& ov : o.overrides) apply_override(doc, ov);
  const ExperimentConfig c = parse_config(doc);
  const unsigned workers = o.workers.value_or(c.run.workers);
  OutputDir out(o.outdir);
  json echo;
  const std::string& s = o.subcommand;
  if (s == "bracket") echo = detail::run_bracket(o, c, out);
  else if (s == "reach") echo = detail::run_reach(o, c, out);
  else if (s == "simulate") echo = detail::run_simulate(c, out);
  else if (s == "malliavin") echo = detail::run_malliavin(c, out, workers);
  else if (s == "lln") echo = detail::run_lln(c, out);
  else if (s == "clt") echo = detail::run_clt(c, out, workers);
  else if (s == "mix") echo = detail::run_mix(c, out, workers);
  else if (s == "moment") echo = detail::run_moment(c, out, workers);
  else throw PreconditionError("unknown subcommand " + s);
  out.finish(s, {{"config", detail::config_echo(c)}, {"options", echo}}, workers);
}

/// Machine-readable error document for stderr.
inline json error_json(const Error& e) {
  json j = {{"code", error_code_name(e.code())}, {"status", int(e.code())}, {"message", e.what()}};
  if (const auto* ce = dynamic_cast<const ConfigError*>(&e)) j["violations"] = ce->violations();
  if (const auto* ie = dynamic_cast<const IntegrationFailure*>(&e)) j["time"] = ie->time();
  return {{"error", j}};
}

/// dispatch() with errors mapped to exit codes and JSON on `err`.
inline int run_command(const DispatchOptions& o, std::ostream& err = std::cerr) {
  try {
    dispatch(o);
    return 0;
  } catch (const Error& e) {
    err << error_json(e).dump() << "\n";
    return int(e.code());
  } catch (const std::exception& e) {
    err << json{{"error", {{"code", "internal_error"}, {"status", 1}, {"message", e.what()}}}}.dump() << "\n";
    return 1;
  }
}

}  // namespace hypomhd
