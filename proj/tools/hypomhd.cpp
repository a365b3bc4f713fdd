#include <CLI11.hpp>

#include <iostream>
#include <sstream>

#include "hypomhd/driver.hpp"

namespace {

// Accepts "0,1;1,1;1,0" or JSON "[[0,1],[1,1]]".
std::vector<hypomhd::WaveVector> parse_wave_list(const std::string& text) {
  std::vector<hypomhd::WaveVector> out;
  if (!text.empty() && text.front() == '[') {
    const auto j = nlohmann::json::parse(text);
    for (const auto& k : j) out.push_back({k.at(0).get<int>(), k.at(1).get<int>()});
    return out;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ';')) {
    if (item.empty()) continue;
    int a = 0, b = 0;
    char comma = 0;
    std::stringstream is(item);
    if (!(is >> a >> comma >> b) || comma != ',') throw CLI::ValidationError("wavevector", "cannot parse \"" + item + "\"");
    out.push_back({a, b});
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic fractional MHD: bracket, reachability, Galerkin and ergodic diagnostics"};
  app.set_version_flag("--version", hypomhd::kVersion);
  app.require_subcommand(1);

  hypomhd::DispatchOptions opt;
  std::string z0_text, cert_text;
  int kmax = 0, radius = 0, max_depth = 0;
  unsigned workers = 0;

  auto common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", opt.config_path, "JSON experiment config")->check(CLI::ExistingFile);
    sub->add_option("-o,--outdir", opt.outdir, "output directory")->capture_default_str();
    sub->add_option("--set", opt.overrides, "config override key.path=value (repeatable)");
    sub->add_option("--workers", workers, "worker threads (0 = hardware)");
  };

  auto* bracket = app.add_subcommand("bracket", "bracket identity oracle");
  auto* verify = bracket->add_subcommand("verify", "sweep all admissible pairs up to --kmax");
  bracket->require_subcommand(1);
  common(verify);
  verify->add_option("--kmax", kmax, "largest |k|, |l|");

  auto* reach = app.add_subcommand("reach", "window-bounded generation coverage");
  common(reach);
  reach->add_option("--z0", z0_text, "forced wavevectors, e.g. \"0,1;1,1;1,0;1,2\"");
  reach->add_option("--radius", radius, "coverage window radius");
  reach->add_option("--max-depth", max_depth, "generation depth cap (0 = 4 * radius)");
  reach->add_option("--certificate", cert_text, "targets for derivation certificates, same format as --z0");

  std::vector<CLI::App*> stochastic;
  for (const char* name : {"simulate", "malliavin", "lln", "clt", "mix", "moment"}) {
    auto* s = app.add_subcommand(name, std::string(name) + " experiment");
    common(s);
    stochastic.push_back(s);
  }

  CLI11_PARSE(app, argc, argv);

  try {
    if (bracket->parsed()) {
      opt.subcommand = "bracket";
      if (verify->count("--kmax")) opt.kmax = kmax;
    } else if (reach->parsed()) {
      opt.subcommand = "reach";
      if (!z0_text.empty()) opt.z0 = parse_wave_list(z0_text);
      if (!cert_text.empty()) opt.certificates = parse_wave_list(cert_text);
      if (reach->count("--radius")) opt.radius = radius;
      if (reach->count("--max-depth")) opt.max_depth = max_depth;
    }
    for (auto* s : stochastic)
      if (s->parsed()) opt.subcommand = s->get_name();
    std::vector<CLI::App*> leaves = stochastic;
    leaves.push_back(verify);
    leaves.push_back(reach);
    for (auto* leaf : leaves)
      if (leaf->parsed() && leaf->count("--workers")) opt.workers = workers;
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", {{"code", "config_error"}, {"status", 4}, {"message", e.what()}}}}.dump()
              << "\n";
    return int(hypomhd::ErrorCode::kConfig);
  }
  return hypomhd::run_command(opt);
}
