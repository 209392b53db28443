#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "core/harness.hpp"
#include "core/mac.hpp"

using namespace lorawan;
using doctest::Approx;

namespace {

ExperimentConfig tiny_config() {
  ExperimentConfig cfg;
  cfg.n_devices = 20;
  cfg.us_period_s = 600.0;
  cfg.sim_time_multiplier = 5.0;  // 3000 s
  cfg.master_seed = 42;
  return cfg;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int count_columns(const std::string& line) {
  return static_cast<int>(std::count(line.begin(), line.end(), ',')) + 1;
}

}  // namespace

TEST_CASE("string-keyed configuration accepts every known key") {
  ExperimentConfig cfg;
  for (const auto& key : ExperimentConfig::known_keys()) {
    if (key == "sf_strategy")
      cfg.set(key, "fixed");
    else if (key == "output_prefix" || key == "error_model_csv")
      cfg.set(key, "some_path");
    else if (key == "us_confirmed" || key == "ds_confirmed")
      cfg.set(key, "true");
    else
      cfg.set(key, "2");
  }
  CHECK(cfg.n_devices == 2);
  CHECK(cfg.us_confirmed);
  CHECK(cfg.sf_strategy == "fixed");

  CHECK_THROWS_AS(cfg.set("no_such_key", "1"), std::invalid_argument);
  CHECK_THROWS_AS(cfg.set("n_devices", "many"), std::invalid_argument);
  CHECK_THROWS_AS(cfg.set("us_confirmed", "maybe"), std::invalid_argument);

  ExperimentConfig bools;
  bools.set("us_confirmed", "1");
  CHECK(bools.us_confirmed);
  bools.set("us_confirmed", "false");
  CHECK_FALSE(bools.us_confirmed);
  bools.set("us_confirmed", "yes");
  CHECK(bools.us_confirmed);
}

TEST_CASE("validation rejects out-of-range settings") {
  auto expect_invalid = [](const std::string& key, const std::string& value) {
    ExperimentConfig cfg;
    cfg.set(key, value);
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  };
  expect_invalid("n_devices", "0");
  expect_invalid("n_gateways", "3");
  expect_invalid("radius_m", "-5");
  expect_invalid("us_period_s", "0");
  expect_invalid("cr", "4");
  expect_invalid("sf_eval_cr", "0");
  expect_invalid("max_transmissions", "0");
  expect_invalid("max_transmissions", "9");
  expect_invalid("sf_strategy", "nearest");
  expect_invalid("sim_time_multiplier", "0");
  expect_invalid("per_threshold", "0");

  ExperimentConfig swapped;
  swapped.set("ack_timeout_min_s", "3");
  swapped.set("ack_timeout_max_s", "1");
  CHECK_THROWS_AS(swapped.validate(), std::invalid_argument);

  // fixed_sf only matters when the fixed strategy is selected.
  ExperimentConfig fixed;
  fixed.set("fixed_sf", "6");
  CHECK_NOTHROW(fixed.validate());
  fixed.set("sf_strategy", "fixed");
  CHECK_THROWS_AS(fixed.validate(), std::invalid_argument);

  ExperimentConfig ok;
  CHECK_NOTHROW(ok.validate());
}

TEST_CASE("the config hash ignores output paths and the run index") {
  ExperimentConfig a = tiny_config();
  ExperimentConfig b = a;
  b.output_prefix = "/tmp/somewhere/else";
  b.run_index = 17;
  CHECK(a.canonical() == b.canonical());
  CHECK(a.config_hash() == b.config_hash());

  ExperimentConfig c = a;
  c.master_seed = 43;
  CHECK(a.config_hash() != c.config_hash());
  ExperimentConfig d = a;
  d.us_period_s = 601.0;
  CHECK(a.config_hash() != d.config_hash());

  // The canonical form names every hashed knob.
  auto canon = a.canonical();
  CHECK(canon.find("n_devices=") != std::string::npos);
  CHECK(canon.find("master_seed=") != std::string::npos);
  CHECK(canon.find("output_prefix") == std::string::npos);
  CHECK(canon.find("run_index") == std::string::npos);
}

TEST_CASE("a small run conserves messages and reports per-band airtimes") {
  auto result = run_experiment(tiny_config());
  const auto& m = result.ledger;
  CHECK(m.conserved());
  CHECK(m.us_generated == 20 * 5);  // one message per device per period
  CHECK(m.us_delivered > 0);
  CHECK(m.us_transmissions >= m.us_generated - m.us_queued);
  REQUIRE(result.device_sfs.size() == 20);
  REQUIRE(result.airtimes.size() == 21);  // devices + one gateway

  double sim_end = tiny_config().sim_end_s();
  for (const auto& node : result.airtimes) {
    CHECK(node.airtime_868_1 >= 0.0);
    // Duty-cycle budgets with one in-flight packet of slack.
    CHECK(node.airtime_868_1 <=
          0.01 * sim_end + time_on_air_s(LoRaTxParams{12, 1}, 34));
    CHECK(node.airtime_869_525 <=
          0.10 * sim_end + time_on_air_s(LoRaTxParams{12, 1}, 34));
    if (!node.is_gateway) CHECK(node.airtime_869_525 == 0.0);  // devices only listen there
  }
}

TEST_CASE("repeat runs of one configuration are byte-identical") {
  namespace fs = std::filesystem;
  auto dir = fs::temp_directory_path() / "lorasim_harness_repeat";
  fs::remove_all(dir);
  fs::create_directories(dir);

  ExperimentConfig cfg = tiny_config();
  cfg.us_confirmed = true;
  cfg.ds_mean_iat_s = 400.0;
  cfg.output_prefix = (dir / "a").string();
  auto first = run_experiment(cfg);
  cfg.output_prefix = (dir / "b").string();
  auto second = run_experiment(cfg);

  CHECK(summary_csv_row(first) == summary_csv_row(second));
  for (const char* suffix : {"_summary.csv", "_trace.csv", "_topology.csv"})
    CHECK(slurp((dir / ("a" + std::string(suffix))).string()) ==
          slurp((dir / ("b" + std::string(suffix))).string()));

  // A different run index re-seeds every stream.
  cfg.run_index = 1;
  cfg.output_prefix.clear();
  auto third = run_experiment(cfg);
  CHECK(summary_csv_row(third) != summary_csv_row(second));
  fs::remove_all(dir);
}

TEST_CASE("output files carry the documented headers") {
  namespace fs = std::filesystem;
  auto dir = fs::temp_directory_path() / "lorasim_harness_files";
  fs::remove_all(dir);
  fs::create_directories(dir);
  ExperimentConfig cfg = tiny_config();
  cfg.ds_mean_iat_s = 500.0;
  cfg.output_prefix = (dir / "run").string();
  auto result = run_experiment(cfg);

  auto summary = slurp((dir / "run_summary.csv").string());
  auto first_line = summary.substr(0, summary.find('\n'));
  CHECK(first_line == summary_csv_header());
  CHECK(count_columns(first_line) == count_columns(summary_csv_row(result)));

  auto trace = slurp((dir / "run_trace.csv").string());
  CHECK(trace.substr(0, trace.find('\n')) ==
        "time,node,direction,sf,bytes,outcome,drop_cause,gateway");
  // Every generated uplink transmission leaves a trace row.
  auto rows = static_cast<std::uint64_t>(std::count(trace.begin(), trace.end(), '\n')) - 1;
  CHECK(rows >= result.ledger.us_transmissions);

  auto topo = slurp((dir / "run_topology.csv").string());
  CHECK(topo.substr(0, topo.find('\n')) == "node,x,y,sf");
  fs::remove_all(dir);
}

TEST_CASE("an unwritable output prefix fails before the run starts") {
  ExperimentConfig cfg = tiny_config();
  cfg.output_prefix = "/nonexistent_dir_for_sure/run";
  CHECK_THROWS_AS(run_experiment(cfg), std::runtime_error);
}

TEST_CASE("an invalid configuration is rejected up front") {
  ExperimentConfig cfg = tiny_config();
  cfg.n_gateways = 5;
  CHECK_THROWS_AS(run_experiment(cfg), std::invalid_argument);
}

TEST_CASE("assignment-only runs reproduce the experiment's layout") {
  ExperimentConfig cfg = tiny_config();
  cfg.n_devices = 400;
  auto layout = run_assignment(cfg);
  auto full = run_experiment(cfg);
  CHECK(layout.device_sfs == full.device_sfs);
  REQUIRE(layout.device_sfs.size() == 400);
  int lo = *std::min_element(layout.device_sfs.begin(), layout.device_sfs.end());
  int hi = *std::max_element(layout.device_sfs.begin(), layout.device_sfs.end());
  CHECK(lo >= 7);
  CHECK(hi <= 12);
  CHECK(layout.ledger.us_generated == 0);  // no traffic was simulated

  ExperimentConfig other = cfg;
  other.master_seed = 43;
  CHECK(run_assignment(other).device_sfs != layout.device_sfs);
}

TEST_CASE("summary rows follow the header shape") {
  auto result = run_experiment(tiny_config());
  auto header = summary_csv_header();
  auto row = summary_csv_row(result);
  CHECK(count_columns(header) == count_columns(row));
  CHECK(header.substr(0, header.find(',')) == "config_hash");

  // No downstream traffic: the ds_pdr cell is empty, us_pdr is not.
  std::vector<std::string> header_cols, row_cols;
  {
    std::istringstream hs(header), rs(row);
    for (std::string c; std::getline(hs, c, ',');) header_cols.push_back(c);
    for (std::string c; std::getline(rs, c, ',');) row_cols.push_back(c);
  }
  auto cell = [&](const std::string& name) {
    auto it = std::find(header_cols.begin(), header_cols.end(), name);
    REQUIRE(it != header_cols.end());
    return row_cols.at(static_cast<std::size_t>(it - header_cols.begin()));
  };
  CHECK(cell("ds_pdr").empty());
  CHECK_FALSE(cell("us_pdr").empty());
  CHECK(cell("n_devices") == "20");
  CHECK(cell("us_generated") == "100");
}
