// C binding: opaque handles around the C++ core, exceptions folded into
// status codes, per-thread error text.

#include "lorawan_sim.h"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

#include "core/baseband.hpp"
#include "core/harness.hpp"
#include "core/linkmodel.hpp"

namespace {

thread_local std::string g_last_error = "no error";

lorasim_status fail(lorasim_status code, const std::string& message) {
  g_last_error = message;
  return code;
}

// Runs fn() under the exception-to-status mapping: argument problems from
// invalid_argument/out_of_range, file problems from runtime_error, broken
// internal invariants from logic_error.
template <typename Fn>
lorasim_status guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const std::invalid_argument& e) {
    return fail(LORASIM_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::out_of_range& e) {
    return fail(LORASIM_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::runtime_error& e) {
    return fail(LORASIM_ERR_IO, e.what());
  } catch (const std::exception& e) {
    return fail(LORASIM_ERR_RUNTIME, e.what());
  }
}

lorasim_status copy_out(const std::string& text, char* buf, size_t buf_size) {
  if (!buf) return fail(LORASIM_ERR_INVALID_ARGUMENT, "null output buffer");
  if (text.size() + 1 > buf_size)
    return fail(LORASIM_ERR_BUFFER_TOO_SMALL,
                "need " + std::to_string(text.size() + 1) + " bytes, got " +
                    std::to_string(buf_size));
  std::memcpy(buf, text.c_str(), text.size() + 1);
  return LORASIM_OK;
}

}  // namespace

struct lorasim_config {
  lorawan::ExperimentConfig cfg;
};

struct lorasim_result {
  lorawan::RunResult result;
  std::string summary_row;
  bool full_run = false;  // false for assignment-only results
};

extern "C" {

const char* lorasim_version(void) { return "1.0.0"; }

const char* lorasim_last_error(void) { return g_last_error.c_str(); }

lorasim_config* lorasim_config_create(void) { return new lorasim_config(); }

void lorasim_config_free(lorasim_config* cfg) { delete cfg; }

lorasim_status lorasim_config_set(lorasim_config* cfg, const char* key, const char* value) {
  if (!cfg || !key || !value) return fail(LORASIM_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    cfg->cfg.set(key, value);
    return LORASIM_OK;
  });
}

lorasim_status lorasim_config_validate(const lorasim_config* cfg) {
  if (!cfg) return fail(LORASIM_ERR_INVALID_ARGUMENT, "null config");
  return guarded([&] {
    cfg->cfg.validate();
    return LORASIM_OK;
  });
}

lorasim_status lorasim_config_canonical(const lorasim_config* cfg, char* buf,
                                        size_t buf_size) {
  if (!cfg) return fail(LORASIM_ERR_INVALID_ARGUMENT, "null config");
  return copy_out(cfg->cfg.canonical(), buf, buf_size);
}

size_t lorasim_config_key_count(void) {
  return lorawan::ExperimentConfig::known_keys().size();
}

const char* lorasim_config_key(size_t index) {
  const auto& keys = lorawan::ExperimentConfig::known_keys();
  return index < keys.size() ? keys[index].c_str() : nullptr;
}

lorasim_status lorasim_run(const lorasim_config* cfg, lorasim_result** out) {
  if (!cfg || !out) return fail(LORASIM_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    auto* res = new lorasim_result();
    try {
      res->result = lorawan::run_experiment(cfg->cfg);
    } catch (...) {
      delete res;
      throw;
    }
    res->summary_row = lorawan::summary_csv_row(res->result);
    res->full_run = true;
    *out = res;
    return LORASIM_OK;
  });
}

lorasim_status lorasim_assign(const lorasim_config* cfg, lorasim_result** out) {
  if (!cfg || !out) return fail(LORASIM_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    auto* res = new lorasim_result();
    try {
      res->result = lorawan::run_assignment(cfg->cfg);
    } catch (...) {
      delete res;
      throw;
    }
    res->summary_row = lorawan::summary_csv_row(res->result);
    *out = res;
    return LORASIM_OK;
  });
}

void lorasim_result_free(lorasim_result* res) { delete res; }

lorasim_status lorasim_result_metric(const lorasim_result* res, const char* name,
                                     double* out) {
  if (!res || !name || !out) return fail(LORASIM_ERR_INVALID_ARGUMENT, "null argument");
  const lorawan::MetricsLedger& l = res->result.ledger;
  const std::string key = name;

  auto count = [&](std::uint64_t v) {
    *out = static_cast<double>(v);
    return LORASIM_OK;
  };
  auto ratio = [&](const std::optional<double>& v) {
    if (!v) return fail(LORASIM_ERR_ABSENT, "metric undefined for this run: " + key);
    *out = *v;
    return LORASIM_OK;
  };

  if (key == "us_generated") return count(l.us_generated);
  if (key == "us_delivered") return count(l.us_delivered);
  if (key == "us_queued") return count(l.us_queued);
  if (key == "us_drop_collision") return count(l.us_drop_collision);
  if (key == "us_drop_interference") return count(l.us_drop_interference);
  if (key == "us_drop_below_cutoff") return count(l.us_drop_below_cutoff);
  if (key == "us_drop_aborted") return count(l.us_drop_aborted);
  if (key == "us_drop_expired") return count(l.us_drop_expired);
  if (key == "us_transmissions") return count(l.us_transmissions);
  if (key == "us_pdr") return ratio(l.us_pdr());
  if (key == "conf_concluded") return count(l.conf_concluded);
  if (key == "conf_tx_avg") return ratio(l.conf_tx_avg());
  if (key == "ds_generated") return count(l.ds_generated);
  if (key == "ds_delivered") return count(l.ds_delivered);
  if (key == "ds_queued") return count(l.ds_queued);
  if (key == "ds_drop_collision") return count(l.ds_drop_collision);
  if (key == "ds_drop_interference") return count(l.ds_drop_interference);
  if (key == "ds_drop_below_cutoff") return count(l.ds_drop_below_cutoff);
  if (key == "ds_drop_aborted") return count(l.ds_drop_aborted);
  if (key == "ds_drop_expired") return count(l.ds_drop_expired);
  if (key == "ds_transmissions") return count(l.ds_transmissions);
  if (key == "ds_pdr") return ratio(l.ds_pdr());
  if (key == "ack_rw1") return count(l.ack_rw1);
  if (key == "ack_rw2") return count(l.ack_rw2);
  if (key == "missed_rws") return count(l.missed_rws);
  if (key == "duplicates") return count(l.duplicates);
  if (key == "gw_rx_ok") return count(l.gw_rx_ok);
  if (key == "gw_rx_destroyed") return count(l.gw_rx_destroyed);
  if (key == "gw_arrival_busy") return count(l.gw_arrival_busy);
  if (key == "gw_arrival_below_cutoff") return count(l.gw_arrival_below_cutoff);
  if (key == "gw_arrival_unavailable") return count(l.gw_arrival_unavailable);
  if (key == "gw_rx_aborted") return count(l.gw_rx_aborted);
  if (key == "n_devices") return count(static_cast<std::uint64_t>(res->result.config.n_devices));
  if (key == "sim_end_s") {
    *out = res->result.config.sim_end_s();
    return LORASIM_OK;
  }
  if (key.rfind("sf_count_", 0) == 0) {
    int sf = 0;
    try {
      sf = std::stoi(key.substr(9));
    } catch (const std::exception&) {
      sf = 0;
    }
    if (sf >= 7 && sf <= 12) {
      std::uint64_t n = 0;
      for (int v : res->result.device_sfs)
        if (v == sf) ++n;
      return count(n);
    }
  }
  return fail(LORASIM_ERR_INVALID_ARGUMENT, "unknown metric: " + key);
}

const char* lorasim_summary_header(void) {
  static const std::string header = lorawan::summary_csv_header();
  return header.c_str();
}

const char* lorasim_result_summary_row(const lorasim_result* res) {
  return res ? res->summary_row.c_str() : nullptr;
}

int lorasim_result_device_count(const lorasim_result* res) {
  return res ? static_cast<int>(res->result.device_sfs.size()) : 0;
}

int lorasim_result_device_sf(const lorasim_result* res, int device) {
  if (!res || device < 0 || device >= static_cast<int>(res->result.device_sfs.size()))
    return -1;
  return res->result.device_sfs[static_cast<std::size_t>(device)];
}

lorasim_status lorasim_ber_campaign(int sf, int cr, double snr_lo_db, double snr_hi_db,
                                    double snr_step_db, uint64_t min_bits, uint64_t seed,
                                    const char* out_csv) {
  if (!out_csv) return fail(LORASIM_ERR_INVALID_ARGUMENT, "null output path");
  if (snr_step_db <= 0.0) return fail(LORASIM_ERR_INVALID_ARGUMENT, "non-positive SNR step");
  if (snr_hi_db < snr_lo_db)
    return fail(LORASIM_ERR_INVALID_ARGUMENT, "empty SNR range");
  return guarded([&] {
    lorawan::RngProvider rng(seed, 0);
    std::vector<lorawan::baseband::BerSample> samples;
    int steps = static_cast<int>(std::floor((snr_hi_db - snr_lo_db) / snr_step_db + 1e-9));
    for (int i = 0; i <= steps; ++i) {
      double snr = snr_lo_db + i * snr_step_db;
      char name[64];
      std::snprintf(name, sizeof(name), "campaign/sf%d/cr%d/%.3f", sf, cr, snr);
      samples.push_back(lorawan::baseband::measure_ber(sf, cr, snr, min_bits,
                                                       rng.stream(name)));
    }
    lorawan::baseband::write_campaign_csv(out_csv, samples);
    return LORASIM_OK;
  });
}

lorasim_status lorasim_fit_campaign(const char* campaign_csv, const char* model_csv_out,
                                    char* report, size_t report_size) {
  if (!campaign_csv || !model_csv_out)
    return fail(LORASIM_ERR_INVALID_ARGUMENT, "null path");
  return guarded([&] {
    auto samples = lorawan::baseband::read_campaign_csv(campaign_csv);
    auto fits = lorawan::baseband::fit_all(samples);
    std::vector<lorawan::ErrorModelEntry> entries;
    std::string text;
    char line[160];
    for (const auto& f : fits) {
      entries.push_back(f.entry);
      std::snprintf(line, sizeof(line),
                    "sf %d cr %d: alpha %.6g beta %.6g r2 %.6f cutoff %.4f dB (%d points)\n",
                    f.entry.sf, f.entry.cr, f.entry.alpha, f.entry.beta, f.rsquare,
                    f.entry.snr_cutoff_db, f.points_used);
      text += line;
    }
    lorawan::ErrorModelTable::from_entries(entries).write_csv(model_csv_out);
    if (report) return copy_out(text, report, report_size);
    return LORASIM_OK;
  });
}

lorasim_status lorasim_refit_check(const char* model_csv, double cutoff_tolerance_db,
                                   char* report, size_t report_size, int* all_within) {
  if (!model_csv || !all_within) return fail(LORASIM_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    auto table = lorawan::ErrorModelTable::from_csv(model_csv);
    const auto& reference = lorawan::ErrorModelTable::builtin();
    std::string text;
    bool ok = true;
    char line[200];
    for (const auto& e : table.entries()) {
      if (!reference.has(e.sf, e.cr)) {
        std::snprintf(line, sizeof(line), "sf %d cr %d: no reference row\n", e.sf, e.cr);
        text += line;
        ok = false;
        continue;
      }
      double ref_cutoff = reference.snr_cutoff_db(e.sf, e.cr);
      double delta = e.snr_cutoff_db - ref_cutoff;
      bool within = std::fabs(delta) <= cutoff_tolerance_db;
      std::snprintf(line, sizeof(line),
                    "sf %d cr %d: cutoff %.4f dB, reference %.4f dB, delta %+.4f dB %s\n",
                    e.sf, e.cr, e.snr_cutoff_db, ref_cutoff, delta,
                    within ? "(within tolerance)" : "(OUT OF TOLERANCE)");
      text += line;
      if (!within) ok = false;
    }
    *all_within = ok ? 1 : 0;
    if (report) return copy_out(text, report, report_size);
    return LORASIM_OK;
  });
}

}  // extern "C"
