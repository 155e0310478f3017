// Command-line harness around the smcvar library: run replicated particle
// filters with variance reports, two-stage allocation, adaptive sizing, and
// the replicate comparison study. All randomness derives from one master
// seed, so a given config + seed reproduces its outputs byte for byte.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "smcvar/config.hpp"
#include "smcvar/filter.hpp"
#include "smcvar/models.hpp"
#include "smcvar/oracle_gauss.hpp"
#include "smcvar/serialize.hpp"
#include "smcvar/tuning.hpp"
#include "smcvar/varest.hpp"

namespace {

using nlohmann::json;
using smcvar::Config;

double phi_eval(const std::string& phi, double x) {
  return phi == "one" ? 1.0 : x;
}

void require_plain_phi(const Config& cfg, const std::string& verb) {
  if (cfg.phi == "centered-identity")
    throw std::runtime_error(verb + ": centered-identity is only available "
                             "with `run` (see the NV_centered report fields)");
}

smcvar::AllocationPlan make_plan(const Config& cfg) {
  if (cfg.c.empty())
    return smcvar::AllocationPlan::uniform(cfg.model.horizon, cfg.base_size);
  smcvar::AllocationPlan plan{cfg.c, cfg.base_size};
  plan.validate();
  if (static_cast<int>(plan.c.size()) != cfg.model.horizon + 1)
    throw std::runtime_error("config: c length must equal horizon + 1");
  return plan;
}

void write_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << body;
  std::cout << "wrote " << path.string() << "\n";
}

json run_metadata(const Config& cfg, const std::string& verb, int threads) {
  json meta;
  meta["schema_version"] = smcvar::kReportSchemaVersion;
  meta["verb"] = verb;
  meta["seed"] = cfg.seed;
  meta["phi"] = cfg.phi;
  meta["threads"] = threads;  // accepted for compatibility; runs are sequential
  return meta;
}

int cmd_run(const Config& cfg, const std::filesystem::path& out_dir,
            const std::string& format, int threads) {
  if (cfg.mode != "fixed_n")
    throw std::runtime_error("run: config mode must be fixed_n");
  const auto plan = make_plan(cfg);
  auto phi = [&cfg](double x) { return phi_eval(cfg.phi, x); };
  std::vector<smcvar::VarianceReport> reports;
  reports.reserve(static_cast<std::size_t>(cfg.replicates));
  for (int i = 0; i < cfg.replicates; ++i) {
    const auto h = smcvar::run_filter(
        cfg.model, plan, smcvar::split_seed(cfg.seed, static_cast<std::uint64_t>(i)));
    reports.push_back(smcvar::make_report(h, phi));
  }
  if (format == "csv") {
    std::string body = smcvar::report_csv_header(cfg.model.horizon) + "\n";
    for (const auto& r : reports) body += smcvar::report_csv_row(r) + "\n";
    write_file(out_dir / "report.csv", body);
  } else {
    json j = run_metadata(cfg, "run", threads);
    j["reports"] = json::array();
    for (const auto& r : reports) j["reports"].push_back(smcvar::to_json(r));
    write_file(out_dir / "report.json", j.dump(2) + "\n");
  }
  return 0;
}

int cmd_allocate(const Config& cfg, const std::filesystem::path& out_dir,
                 int threads) {
  if (cfg.mode != "two_stage")
    throw std::runtime_error("allocate: config mode must be two_stage");
  require_plain_phi(cfg, "allocate");
  auto phi = [&cfg](double x) { return phi_eval(cfg.phi, x); };
  const auto res =
      smcvar::two_stage_allocation(cfg.model, phi, cfg.base_size, cfg.seed);
  json j = run_metadata(cfg, "allocate", threads);
  j["base_size"] = res.plan.base_size;
  j["c"] = res.plan.c;
  j["particle_counts"] = res.plan.particle_counts();
  j["stage1_vpn"] = res.stage1_vpn;
  j["improvement_ratio"] = res.improvement_ratio;
  write_file(out_dir / "allocation.json", j.dump(2) + "\n");
  return 0;
}

int cmd_adapt(const Config& cfg, const std::filesystem::path& out_dir,
              int threads) {
  if (cfg.mode != "adaptive")
    throw std::runtime_error("adapt: config mode must be adaptive");
  require_plain_phi(cfg, "adapt");
  auto phi = [&cfg](double x) { return phi_eval(cfg.phi, x); };
  const auto res = smcvar::adaptive_filter(cfg.model, phi, cfg.initial_size,
                                           cfg.delta, cfg.seed, cfg.updated);
  json j = run_metadata(cfg, "adapt", threads);
  j["size_trajectory"] = res.size_trajectory;
  j["v_values"] = res.v_values;
  j["delta"] = res.delta;
  j["capped"] = res.capped;
  j["final_size"] = res.size_trajectory.back();
  j["final_report"] = smcvar::to_json(res.final_report);
  write_file(out_dir / "adapt.json", j.dump(2) + "\n");
  return res.capped ? 1 : 0;
}

int cmd_replicate_study(const Config& cfg, const std::filesystem::path& out_dir,
                        int threads) {
  if (cfg.mode != "fixed_n")
    throw std::runtime_error("replicate-study: config mode must be fixed_n");
  if (!cfg.c.empty())
    throw std::runtime_error("replicate-study: custom c is not supported");
  require_plain_phi(cfg, "replicate-study");
  auto phi = [&cfg](double x) { return phi_eval(cfg.phi, x); };
  const auto res = smcvar::replicate_variance_study(
      cfg.model, phi, cfg.base_size, cfg.replicates, cfg.seed, cfg.updated);
  json j = run_metadata(cfg, "replicate-study", threads);
  j["replicates"] = res.replicates;
  j["standard_estimate"] = res.standard_estimate;
  j["v_based_estimate"] = res.v_based_estimate;
  write_file(out_dir / "replicate_study.json", j.dump(2) + "\n");
  return 0;
}

int cmd_self_test() {
  int failures = 0;
  auto check = [&failures](const char* name, bool ok) {
    std::cout << (ok ? "[ ok ] " : "[FAIL] ") << name << "\n";
    if (!ok) ++failures;
  };

  // Worked genealogy with time-varying sizes (4,3,3,4): known root indices
  // and an exactly computable V(1).
  {
    std::vector<std::vector<double>> states = {
        {0, 0, 0, 0}, {0, 0, 0}, {0, 0, 0}, {0, 0, 0, 0}};
    std::vector<std::vector<int>> ancestors = {{0, 1, 3}, {1, 0, 1}, {2, 1, 1, 2}};
    std::vector<std::vector<double>> logg = {
        {0, 0, 0, 0}, {0, 0, 0}, {0, 0, 0}, {0, 0, 0, 0}};
    const auto h = smcvar::history_from_genealogy(states, ancestors, logg);
    const std::vector<int> expect = {1, 0, 0, 1};
    check("worked genealogy root indices", h.eves[3] == expect);
    const double v = smcvar::compute_V(h, [](double) { return 1.0; });
    check("worked genealogy V(1) = -1", v == -1.0);
  }

  // Chan-Lai estimator agrees with the scaled centered estimator when the
  // particle count is constant.
  {
    smcvar::LgssmParams p;
    p.observations = {0.3, -0.8, 1.1, 0.2};
    const auto model = smcvar::make_lgssm(p);
    const auto h = smcvar::run_filter(
        model, smcvar::AllocationPlan::uniform(model.horizon, 64), 7);
    auto phi = [](double x) { return x; };
    const auto r = smcvar::make_report(h, phi);
    double scale = 1.0;
    for (int q = 0; q <= model.horizon; ++q) scale *= 64.0 / 63.0;
    const double lhs = *r.chan_lai;
    const double rhs = r.NV_hat_centered / scale;
    check("Chan-Lai identity", std::abs(lhs - rhs) <= 1e-10 * std::abs(rhs));
  }

  // One-observation linear Gaussian evidence: N(y; 0, initial + observation
  // variance).
  {
    smcvar::LgssmParams p;
    p.observations = {0.0};
    const auto kf = smcvar::kalman_filter(p);
    const double expect = std::log(1.0 / std::sqrt(2.0 * M_PI * 2.0));
    check("single-observation evidence",
          std::abs(kf.log_gamma_hat_one() - expect) <= 1e-12);
  }

  // v_{0,0}(1) is exactly zero.
  {
    smcvar::LgssmParams p;
    p.observations = {0.4};
    const auto v = smcvar::exact_vpn_lgssm(p, smcvar::AffinePhi::one(), false);
    check("v_{0,0}(1) = 0", std::abs(v[0]) <= 1e-12);
  }

  std::cout << (failures == 0 ? "self-test passed\n" : "self-test FAILED\n");
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"particle filter variance estimation harness"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";
  std::string format = "json";
  std::optional<std::uint64_t> seed_override;
  int threads = 1;

  auto add_common = [&](CLI::App* sub, bool with_format) {
    sub->add_option("--config", config_path, "JSON config file")->required();
    sub->add_option("--seed", seed_override, "override the config seed");
    sub->add_option("--out-dir", out_dir, "output directory");
    sub->add_option("--threads", threads, "worker hint (runs are sequential)")
        ->check(CLI::PositiveNumber);
    if (with_format)
      sub->add_option("--format", format, "json or csv")
          ->check(CLI::IsMember({"json", "csv"}));
  };

  auto* run = app.add_subcommand("run", "replicated fixed-size runs with reports");
  add_common(run, true);
  auto* alloc = app.add_subcommand("allocate", "two-stage allocation of particle counts");
  add_common(alloc, false);
  auto* adapt = app.add_subcommand("adapt", "double N until the variance estimate is small");
  add_common(adapt, false);
  auto* repl = app.add_subcommand("replicate-study",
                                  "compare replicate and single-run variance estimates");
  add_common(repl, false);
  app.add_subcommand("self-test", "quick built-in consistency checks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("self-test")) return cmd_self_test();
    Config cfg = smcvar::load_config(config_path);
    if (seed_override) cfg.seed = *seed_override;
    std::filesystem::path dir{out_dir};
    std::filesystem::create_directories(dir);
    if (app.got_subcommand("run")) return cmd_run(cfg, dir, format, threads);
    if (app.got_subcommand("allocate")) return cmd_allocate(cfg, dir, threads);
    if (app.got_subcommand("adapt")) return cmd_adapt(cfg, dir, threads);
    return cmd_replicate_study(cfg, dir, threads);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
