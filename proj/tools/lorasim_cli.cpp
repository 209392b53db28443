// Command-line front end.  Talks to the simulator exclusively through the
// C interface in lorawan_sim.h.

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "lorawan_sim.h"

namespace {

struct ConfigDeleter {
  void operator()(lorasim_config* c) const { lorasim_config_free(c); }
};
struct ResultDeleter {
  void operator()(lorasim_result* r) const { lorasim_result_free(r); }
};
using ConfigPtr = std::unique_ptr<lorasim_config, ConfigDeleter>;
using ResultPtr = std::unique_ptr<lorasim_result, ResultDeleter>;

[[noreturn]] void die(const std::string& context) {
  std::cerr << "error: " << context << ": " << lorasim_last_error() << "\n";
  std::exit(1);
}

void set_or_die(lorasim_config* cfg, const std::string& key, const std::string& value) {
  if (lorasim_config_set(cfg, key.c_str(), value.c_str()) != LORASIM_OK)
    die(key + "=" + value);
}

// key=value lines; '#' starts a comment, blank lines ignored.
void apply_config_file(lorasim_config* cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    std::cerr << "error: cannot open config file: " << path << "\n";
    std::exit(1);
  }
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      std::cerr << "error: " << path << ":" << line_no << ": expected key=value\n";
      std::exit(1);
    }
    set_or_die(cfg, line.substr(0, eq), line.substr(eq + 1));
  }
}

// Every config key becomes a --key option; the config file (if any) is
// applied first so explicit flags win.
struct RunOptions {
  std::string config_file;
  std::vector<std::pair<std::string, std::string>> overrides;

  void add_to(CLI::App* app) {
    app->add_option("--config", config_file, "key=value config file");
    for (size_t i = 0; i < lorasim_config_key_count(); ++i) {
      std::string key = lorasim_config_key(i);
      app->add_option_function<std::string>(
          "--" + key,
          [this, key](const std::string& v) { overrides.emplace_back(key, v); },
          "config field " + key);
    }
  }

  ConfigPtr build() const {
    ConfigPtr cfg(lorasim_config_create());
    if (!config_file.empty()) apply_config_file(cfg.get(), config_file);
    for (const auto& [key, value] : overrides) set_or_die(cfg.get(), key, value);
    if (lorasim_config_validate(cfg.get()) != LORASIM_OK) die("invalid config");
    return cfg;
  }
};

int cmd_run(const RunOptions& opts) {
  ConfigPtr cfg = opts.build();
  lorasim_result* raw = nullptr;
  if (lorasim_run(cfg.get(), &raw) != LORASIM_OK) die("run failed");
  ResultPtr res(raw);
  std::cout << lorasim_summary_header() << "\n"
            << lorasim_result_summary_row(res.get()) << "\n";
  return 0;
}

int cmd_topology(const RunOptions& opts) {
  ConfigPtr cfg = opts.build();
  lorasim_result* raw = nullptr;
  if (lorasim_assign(cfg.get(), &raw) != LORASIM_OK) die("assignment failed");
  ResultPtr res(raw);
  int n = lorasim_result_device_count(res.get());
  std::vector<int> counts(13, 0);
  for (int i = 0; i < n; ++i) ++counts[lorasim_result_device_sf(res.get(), i)];
  std::cout << "sf,devices,share\n";
  for (int sf = 7; sf <= 12; ++sf) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%d,%d,%.4f", sf, counts[sf],
                  n ? static_cast<double>(counts[sf]) / n : 0.0);
    std::cout << buf << "\n";
  }
  return 0;
}

struct SweepJob {
  std::vector<std::pair<std::string, std::string>> settings;
  std::string row;
  bool failed = false;
  std::string error;
};

int cmd_sweep(const RunOptions& opts, const std::vector<std::string>& axes, int seeds,
              int workers, const std::string& out_path) {
  // Each axis is key=v1,v2,...; jobs are the cross product, each replicated
  // over run_index 0..seeds-1.
  std::vector<std::pair<std::string, std::vector<std::string>>> grid;
  for (const auto& axis : axes) {
    auto eq = axis.find('=');
    if (eq == std::string::npos) {
      std::cerr << "error: axis must be key=v1,v2,...: " << axis << "\n";
      return 1;
    }
    std::vector<std::string> values;
    std::stringstream ss(axis.substr(eq + 1));
    std::string v;
    while (std::getline(ss, v, ',')) values.push_back(v);
    if (values.empty()) {
      std::cerr << "error: empty axis: " << axis << "\n";
      return 1;
    }
    grid.emplace_back(axis.substr(0, eq), values);
  }

  std::vector<SweepJob> jobs;
  std::vector<size_t> index(grid.size(), 0);
  while (true) {
    for (int seed_idx = 0; seed_idx < seeds; ++seed_idx) {
      SweepJob job;
      for (size_t a = 0; a < grid.size(); ++a)
        job.settings.emplace_back(grid[a].first, grid[a].second[index[a]]);
      job.settings.emplace_back("run_index", std::to_string(seed_idx));
      jobs.push_back(std::move(job));
    }
    size_t a = 0;
    for (; a < grid.size(); ++a) {
      if (++index[a] < grid[a].second.size()) break;
      index[a] = 0;
    }
    if (a == grid.size()) break;
  }

  if (workers < 1) workers = 1;
  std::atomic<size_t> next{0};
  auto worker = [&] {
    while (true) {
      size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      SweepJob& job = jobs[i];
      ConfigPtr cfg = opts.build();
      for (const auto& [key, value] : job.settings) {
        if (lorasim_config_set(cfg.get(), key.c_str(), value.c_str()) != LORASIM_OK) {
          job.failed = true;
          job.error = key + "=" + value + ": " + lorasim_last_error();
          return;
        }
      }
      lorasim_result* raw = nullptr;
      if (lorasim_run(cfg.get(), &raw) != LORASIM_OK) {
        job.failed = true;
        job.error = lorasim_last_error();
        continue;
      }
      ResultPtr res(raw);
      job.row = lorasim_result_summary_row(res.get());
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) {
      std::cerr << "error: cannot write " << out_path << "\n";
      return 1;
    }
    out = &file;
  }
  *out << lorasim_summary_header() << "\n";
  int failures = 0;
  for (const auto& job : jobs) {
    if (job.failed) {
      ++failures;
      std::cerr << "error: sweep job failed: " << job.error << "\n";
      continue;
    }
    *out << job.row << "\n";
  }
  return failures ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LoRaWAN network simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(lorasim_version()));

  RunOptions run_opts;
  auto* run = app.add_subcommand("run", "run one experiment and print its summary row");
  run_opts.add_to(run);

  RunOptions topo_opts;
  auto* topo = app.add_subcommand(
      "topology", "place devices, assign spreading factors, print the SF histogram");
  topo_opts.add_to(topo);

  RunOptions sweep_opts;
  std::vector<std::string> sweep_axes;
  int sweep_seeds = 5;
  int sweep_workers = static_cast<int>(std::thread::hardware_concurrency());
  std::string sweep_out;
  auto* sweep = app.add_subcommand("sweep", "run a grid of experiments across seeds");
  sweep_opts.add_to(sweep);
  sweep->add_option("--axis", sweep_axes, "grid axis as key=v1,v2,... (repeatable)");
  sweep->add_option("--seeds", sweep_seeds, "replications per grid point")
      ->check(CLI::PositiveNumber);
  sweep->add_option("--workers", sweep_workers, "parallel runs");
  sweep->add_option("--out", sweep_out, "summary CSV path (default: stdout)");

  int bc_sf = 7, bc_cr = 1;
  double bc_lo = -12.0, bc_hi = -6.0, bc_step = 0.5;
  std::uint64_t bc_bits = 1000000, bc_seed = 1;
  std::string bc_out = "campaign.csv";
  auto* campaign =
      app.add_subcommand("ber-campaign", "measure modem BER over an SNR range");
  campaign->add_option("--sf", bc_sf, "spreading factor")->check(CLI::Range(7, 12));
  campaign->add_option("--cr", bc_cr, "coding-rate index")->check(CLI::Range(1, 3));
  campaign->add_option("--snr-lo", bc_lo, "lowest SNR in dB");
  campaign->add_option("--snr-hi", bc_hi, "highest SNR in dB");
  campaign->add_option("--snr-step", bc_step, "SNR increment in dB");
  campaign->add_option("--min-bits", bc_bits, "payload bits per point");
  campaign->add_option("--seed", bc_seed, "campaign seed");
  campaign->add_option("--out", bc_out, "campaign CSV path");

  std::string fit_in = "campaign.csv", fit_out = "error_model.csv";
  auto* fit = app.add_subcommand("fit", "fit the error model to a campaign CSV");
  fit->add_option("--campaign", fit_in, "campaign CSV path");
  fit->add_option("--out", fit_out, "fitted error-model CSV path");

  std::string check_model;
  double check_tol = 1.5;
  auto* check = app.add_subcommand("refit-check",
                                   "compare a fitted error model with the built-in table");
  check->add_option("--model", check_model, "fitted error-model CSV")->required();
  check->add_option("--tolerance-db", check_tol, "allowed cut-off deviation in dB");

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) return cmd_run(run_opts);
  if (topo->parsed()) return cmd_topology(topo_opts);
  if (sweep->parsed())
    return cmd_sweep(sweep_opts, sweep_axes, sweep_seeds, sweep_workers, sweep_out);
  if (campaign->parsed()) {
    if (lorasim_ber_campaign(bc_sf, bc_cr, bc_lo, bc_hi, bc_step, bc_bits, bc_seed,
                             bc_out.c_str()) != LORASIM_OK)
      die("ber-campaign failed");
    std::cout << "wrote " << bc_out << "\n";
    return 0;
  }
  if (fit->parsed()) {
    std::vector<char> report(8192);
    if (lorasim_fit_campaign(fit_in.c_str(), fit_out.c_str(), report.data(),
                             report.size()) != LORASIM_OK)
      die("fit failed");
    std::cout << report.data() << "wrote " << fit_out << "\n";
    return 0;
  }
  if (check->parsed()) {
    std::vector<char> report(8192);
    int ok = 0;
    if (lorasim_refit_check(check_model.c_str(), check_tol, report.data(), report.size(),
                            &ok) != LORASIM_OK)
      die("refit-check failed");
    std::cout << report.data();
    return ok ? 0 : 1;
  }
  return 0;
}
