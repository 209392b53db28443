/*
 * lorawan_sim: C interface to the LoRaWAN network simulator.
 *
 * The library simulates class-A LoRaWAN traffic on a single 868.100 MHz
 * uplink channel (plus the 869.525 MHz RW2 downlink channel) with a
 * chunk-based SINR reception model, and additionally exposes the slow
 * complex-baseband modem used to calibrate the link-level error model.
 *
 * All entry points are thread-safe as long as each config/result handle is
 * used from one thread at a time; error text is per-thread.
 */
#ifndef LORAWAN_SIM_H
#define LORAWAN_SIM_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
    LORASIM_OK = 0,
    LORASIM_ERR_INVALID_ARGUMENT = 1, /* bad key, value, range or handle */
    LORASIM_ERR_RUNTIME = 2,          /* internal invariant violated     */
    LORASIM_ERR_IO = 3,               /* file could not be read/written  */
    LORASIM_ERR_ABSENT = 4,           /* metric undefined for this run   */
    LORASIM_ERR_BUFFER_TOO_SMALL = 5
} lorasim_status;

/* Opaque handles. */
typedef struct lorasim_config lorasim_config;
typedef struct lorasim_result lorasim_result;

const char *lorasim_version(void);

/* Text describing the most recent failure on the calling thread; never NULL. */
const char *lorasim_last_error(void);

/* ------------------------------------------------------------------ */
/* Configuration                                                       */
/* ------------------------------------------------------------------ */

/* A fresh config carries the default experiment: 100 devices, 1 gateway,
 * 6100 m radius, 600 s unconfirmed uplink period, PER-threshold SF
 * assignment, seed 1. */
lorasim_config *lorasim_config_create(void);
void lorasim_config_free(lorasim_config *cfg);

/* Sets one field from its textual form, e.g. ("n_devices", "1000") or
 * ("us_confirmed", "true").  Unknown keys and unparsable values fail. */
lorasim_status lorasim_config_set(lorasim_config *cfg, const char *key,
                                  const char *value);

/* Range-checks the whole config without running anything. */
lorasim_status lorasim_config_validate(const lorasim_config *cfg);

/* Stable textual form of the config (the basis of the config hash). */
lorasim_status lorasim_config_canonical(const lorasim_config *cfg, char *buf,
                                        size_t buf_size);

/* Enumeration of recognised config keys. */
size_t lorasim_config_key_count(void);
const char *lorasim_config_key(size_t index);

/* ------------------------------------------------------------------ */
/* Running experiments                                                 */
/* ------------------------------------------------------------------ */

/* Runs the full simulation to us_period_s * sim_time_multiplier seconds.
 * When the config's output_prefix is set, writes <prefix>_trace.csv,
 * <prefix>_summary.csv and <prefix>_topology.csv. */
lorasim_status lorasim_run(const lorasim_config *cfg, lorasim_result **out);

/* Topology construction and spreading-factor assignment only; no traffic
 * is simulated and only metrics derived from the assignment are defined. */
lorasim_status lorasim_assign(const lorasim_config *cfg, lorasim_result **out);

void lorasim_result_free(lorasim_result *res);

/* Fetches a metric by name: counters (us_generated, us_delivered,
 * us_drop_collision, ..., ds_*, ack_rw1, ack_rw2, missed_rws, duplicates,
 * gw_rx_ok, ...), ratios (us_pdr, ds_pdr, conf_tx_avg) and assignment
 * figures (sf_count_7 .. sf_count_12, n_devices, sim_end_s).  Ratios with
 * an empty denominator report LORASIM_ERR_ABSENT. */
lorasim_status lorasim_result_metric(const lorasim_result *res,
                                     const char *name, double *out);

/* Summary CSV schema: one fixed header, one row per run.  The row string is
 * owned by the result handle. */
const char *lorasim_summary_header(void);
const char *lorasim_result_summary_row(const lorasim_result *res);

int lorasim_result_device_count(const lorasim_result *res);
int lorasim_result_device_sf(const lorasim_result *res, int device);

/* ------------------------------------------------------------------ */
/* Baseband modem campaigns                                            */
/* ------------------------------------------------------------------ */

/* Monte-Carlo BER of the complex-baseband modem for one (sf, cr) pair over
 * snr_lo..snr_hi dB in snr_step increments, at least min_bits payload bits
 * per point.  Appends nothing: out_csv is rewritten with the schema
 * sf,cr,snr_db,bits,errors,ber. */
lorasim_status lorasim_ber_campaign(int sf, int cr, double snr_lo_db,
                                    double snr_hi_db, double snr_step_db,
                                    uint64_t min_bits, uint64_t seed,
                                    const char *out_csv);

/* Fits log10(ber) = alpha * exp(beta * snr) to a campaign CSV and writes the
 * resulting error-model table (sf,cr,alpha,beta,snr_cutoff_db) to
 * model_csv_out.  The human-readable fit report (alpha, beta, r^2, cut-off
 * per pair) lands in report. */
lorasim_status lorasim_fit_campaign(const char *campaign_csv,
                                    const char *model_csv_out, char *report,
                                    size_t report_size);

/* Compares a fitted error-model CSV against the built-in table.  all_within
 * becomes 1 when every pair present in the CSV has its SNR cut-off within
 * cutoff_tolerance_db of the built-in value. */
lorasim_status lorasim_refit_check(const char *model_csv,
                                   double cutoff_tolerance_db, char *report,
                                   size_t report_size, int *all_within);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* LORAWAN_SIM_H */
