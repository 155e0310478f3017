#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

#include "smcvar/varest.hpp"

namespace smcvar {

inline constexpr int kReportSchemaVersion = 1;

/// %.17g — enough digits to round-trip an IEEE double exactly.
inline std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline nlohmann::json to_json(const VarianceReport& r) {
  nlohmann::json j;
  j["schema_version"] = kReportSchemaVersion;
  j["horizon"] = r.horizon;
  j["base_size"] = r.base_size;
  j["log_gamma_one"] = r.point.log_gamma_one;
  j["log_gamma_hat_one"] = r.point.log_gamma_hat_one;
  j["eta"] = r.point.eta;
  j["eta_hat"] = r.point.eta_hat;
  j["V"] = r.V;
  j["NV"] = r.NV;
  j["NV_centered"] = r.NV_centered;
  j["vpn"] = r.vpn;
  j["vn"] = r.vn;
  j["V_hat"] = r.V_hat;
  j["NV_hat"] = r.NV_hat;
  j["NV_hat_centered"] = r.NV_hat_centered;
  j["vpn_hat"] = r.vpn_hat;
  j["vn_hat"] = r.vn_hat;
  if (r.chan_lai) j["chan_lai"] = *r.chan_lai;
  if (r.bias) j["bias"] = *r.bias;
  if (r.count_statistic) j["count_statistic"] = *r.count_statistic;
  if (r.deviation_statistic) j["deviation_statistic"] = *r.deviation_statistic;
  return j;
}

/// Column order is fixed; vpn/vpn_hat expand to v_0 .. v_n columns.
inline std::string report_csv_header(int horizon) {
  std::string out =
      "schema_version,horizon,base_size,log_gamma_one,log_gamma_hat_one,"
      "eta,eta_hat,V,NV,NV_centered,vn,V_hat,NV_hat,NV_hat_centered,vn_hat,"
      "chan_lai,bias,count_statistic,deviation_statistic";
  for (int p = 0; p <= horizon; ++p) out += ",v_" + std::to_string(p);
  for (int p = 0; p <= horizon; ++p) out += ",v_hat_" + std::to_string(p);
  return out;
}

inline std::string report_csv_row(const VarianceReport& r) {
  auto opt = [](const std::optional<double>& v) {
    return v ? format_double(*v) : std::string();
  };
  std::string out = std::to_string(kReportSchemaVersion) + "," +
                    std::to_string(r.horizon) + "," +
                    std::to_string(r.base_size) + "," +
                    format_double(r.point.log_gamma_one) + "," +
                    format_double(r.point.log_gamma_hat_one) + "," +
                    format_double(r.point.eta) + "," +
                    format_double(r.point.eta_hat) + "," +
                    format_double(r.V) + "," + format_double(r.NV) + "," +
                    format_double(r.NV_centered) + "," + format_double(r.vn) +
                    "," + format_double(r.V_hat) + "," + format_double(r.NV_hat) +
                    "," + format_double(r.NV_hat_centered) + "," +
                    format_double(r.vn_hat) + "," + opt(r.chan_lai) + "," +
                    opt(r.bias) + "," + opt(r.count_statistic) + "," +
                    opt(r.deviation_statistic);
  for (double v : r.vpn) out += "," + format_double(v);
  for (double v : r.vpn_hat) out += "," + format_double(v);
  return out;
}

/// Full genealogy bundle, mostly for debugging and reproducibility checks.
template <class State>
nlohmann::json to_json(const ParticleHistory<State>& h) {
  nlohmann::json j;
  j["schema_version"] = kReportSchemaVersion;
  j["base_size"] = h.base_size;
  j["c"] = h.c;
  j["counts"] = h.counts;
  j["states"] = h.states;
  j["ancestors"] = h.ancestors;
  j["eves"] = h.eves;
  j["log_potentials"] = h.log_potentials;
  j["log_eta_g"] = h.log_eta_g;
  return j;
}

}  // namespace smcvar
