#pragma once

// JSON run configuration for the command-line harness. Parsing is strict:
// unknown fields anywhere in the document are an error, so typos fail loudly
// instead of silently running the default.

#include <cstdint>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "smcvar/models.hpp"
#include "smcvar/serialize.hpp"

namespace smcvar {

inline void check_keys(const nlohmann::json& j,
                       const std::set<std::string>& allowed,
                       const std::string& where) {
  if (!j.is_object()) throw std::runtime_error(where + ": expected an object");
  for (const auto& item : j.items())
    if (!allowed.count(item.key()))
      throw std::runtime_error(where + ": unknown field \"" + item.key() + "\"");
}

inline std::vector<double> read_column_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open observations file: " + path);
  std::vector<double> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(std::stod(line));
  }
  if (out.empty()) throw std::runtime_error("empty observations file: " + path);
  return out;
}

inline std::vector<double> parse_observations(const nlohmann::json& m) {
  const bool inline_obs = m.contains("observations");
  const bool file_obs = m.contains("observations_file");
  if (inline_obs == file_obs)
    throw std::runtime_error(
        "model: provide exactly one of observations / observations_file");
  if (inline_obs) return m.at("observations").get<std::vector<double>>();
  return read_column_file(m.at("observations_file").get<std::string>());
}

struct Config {
  std::uint64_t seed = 1;
  FeynmanKacModel<double> model;
  std::string phi = "identity";
  std::string mode;  // fixed_n | adaptive | two_stage
  // fixed_n
  int base_size = 0;
  std::vector<double> c;
  int replicates = 1;
  // adaptive
  int initial_size = 0;
  double delta = 0;
  bool updated = false;
};

inline FeynmanKacModel<double> parse_model(const nlohmann::json& m) {
  const auto type = m.at("type").get<std::string>();
  if (type == "lgssm") {
    check_keys(m, {"type", "a", "transition_var", "observation_var",
                   "initial_var", "observations", "observations_file",
                   "fully_adapted"},
               "model");
    LgssmParams p;
    p.a = m.value("a", p.a);
    p.transition_var = m.value("transition_var", p.transition_var);
    p.observation_var = m.value("observation_var", p.observation_var);
    p.initial_var = m.value("initial_var", p.initial_var);
    p.observations = parse_observations(m);
    if (m.value("fully_adapted", false)) return make_lgssm_fully_adapted(p);
    return make_lgssm(p);
  }
  if (type == "sv") {
    check_keys(
        m, {"type", "rho", "sigma", "beta", "observations", "observations_file"},
        "model");
    SvParams p;
    p.rho = m.value("rho", p.rho);
    p.sigma = m.value("sigma", p.sigma);
    p.beta = m.value("beta", p.beta);
    p.observations = parse_observations(m);
    return make_sv(p);
  }
  if (type == "tempered-mixture") {
    check_keys(m, {"type", "sweeps"}, "model");
    return make_tempered_sampler(
        bimodal_tempering_params(m.value("sweeps", 10)));
  }
  throw std::runtime_error("model: unknown type \"" + type + "\"");
}

inline Config parse_config(const nlohmann::json& j) {
  check_keys(j, {"schema_version", "seed", "model", "phi", "mode", "replicates"},
             "config");
  if (j.at("schema_version").get<int>() != kReportSchemaVersion)
    throw std::runtime_error("config: unsupported schema_version");

  Config cfg;
  cfg.seed = j.value("seed", std::uint64_t{1});
  cfg.model = parse_model(j.at("model"));
  cfg.phi = j.value("phi", std::string("identity"));
  if (cfg.phi != "one" && cfg.phi != "identity" && cfg.phi != "centered-identity")
    throw std::runtime_error(
        "config: phi must be one of one / identity / centered-identity");
  cfg.replicates = j.value("replicates", 1);
  if (cfg.replicates < 1)
    throw std::runtime_error("config: replicates must be >= 1");

  const nlohmann::json& mode = j.at("mode");
  check_keys(mode, {"fixed_n", "adaptive", "two_stage"}, "mode");
  if (mode.size() != 1)
    throw std::runtime_error(
        "mode: exactly one of fixed_n / adaptive / two_stage");
  if (mode.contains("fixed_n")) {
    cfg.mode = "fixed_n";
    const nlohmann::json& f = mode.at("fixed_n");
    check_keys(f, {"base_size", "c"}, "mode.fixed_n");
    cfg.base_size = f.at("base_size").get<int>();
    if (f.contains("c")) cfg.c = f.at("c").get<std::vector<double>>();
  } else if (mode.contains("adaptive")) {
    cfg.mode = "adaptive";
    const nlohmann::json& f = mode.at("adaptive");
    check_keys(f, {"initial_size", "delta", "updated"}, "mode.adaptive");
    cfg.initial_size = f.at("initial_size").get<int>();
    cfg.delta = f.at("delta").get<double>();
    cfg.updated = f.value("updated", false);
  } else {
    cfg.mode = "two_stage";
    const nlohmann::json& f = mode.at("two_stage");
    check_keys(f, {"base_size"}, "mode.two_stage");
    cfg.base_size = f.at("base_size").get<int>();
  }
  return cfg;
}

inline Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  nlohmann::json j;
  in >> j;
  return parse_config(j);
}

}  // namespace smcvar
