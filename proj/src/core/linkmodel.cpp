#include "core/linkmodel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace lorawan {

namespace {

void check_sf(int sf) {
  if (sf < 7 || sf > 12) throw std::invalid_argument("spreading factor out of range [7, 12]");
}

void check_cr(int cr) {
  if (cr < 1 || cr > 4) throw std::invalid_argument("coding-rate index out of range [1, 4]");
}

}  // namespace

double symbol_rate_hz(int sf, double bandwidth_hz) {
  check_sf(sf);
  if (bandwidth_hz <= 0.0) throw std::invalid_argument("non-positive bandwidth");
  return bandwidth_hz / static_cast<double>(1 << sf);
}

double symbol_duration_s(int sf, double bandwidth_hz) {
  return 1.0 / symbol_rate_hz(sf, bandwidth_hz);
}

double raw_bit_rate_bps(int sf, double bandwidth_hz) {
  return sf * symbol_rate_hz(sf, bandwidth_hz);
}

double time_on_air_s(const LoRaTxParams& params, int phy_payload_bytes) {
  check_sf(params.sf);
  check_cr(params.cr);
  if (phy_payload_bytes < kMinPhyPayloadBytes)
    throw std::invalid_argument("PHY payload below 13-byte frame minimum");
  double ts = symbol_duration_s(params.sf, params.bandwidth_hz);
  int de = ts > 16e-3 ? 1 : 0;
  // Explicit header (H = 0), payload CRC on (the +16 term).
  double num = 8.0 * phy_payload_bytes - 4.0 * params.sf + 28.0 + 16.0;
  double den = 4.0 * (params.sf - 2.0 * de);
  double blocks = std::ceil(num / den);
  double payload_symbols = 8.0 + std::max(blocks * (params.cr + 4.0), 0.0);
  double preamble_symbols = kPreambleSymbols + 4.25;
  return (preamble_symbols + payload_symbols) * ts;
}

double default_noise_floor_dbm(double bandwidth_hz) {
  if (bandwidth_hz <= 0.0) throw std::invalid_argument("non-positive bandwidth");
  return -174.0 + 10.0 * std::log10(bandwidth_hz);
}

double LinkBudget::path_loss_db(double distance_m) const {
  double d = std::max(distance_m, 1.0);
  return ref_loss_db + 10.0 * path_exponent * std::log10(d);
}

double LinkBudget::received_power_dbm(double tx_power_dbm, double distance_m) const {
  return tx_power_dbm - path_loss_db(distance_m);
}

double LinkBudget::snr_db(double tx_power_dbm, double distance_m) const {
  return received_power_dbm(tx_power_dbm, distance_m) - noise_floor_dbm;
}

const ErrorModelTable& ErrorModelTable::builtin() {
  static const ErrorModelTable table = from_entries({
      {7, 1, -30.2580, 0.2857, -12.2833},
      {7, 3, -105.1966, 0.3746, -12.6962},
      {8, 1, -77.1002, 0.2993, -14.8485},
      {8, 3, -289.8133, 0.3756, -15.3588},
      {9, 1, -244.6424, 0.3223, -17.3749},
      {9, 3, -1114.3312, 0.3969, -17.9260},
      {10, 1, -725.9556, 0.3340, -20.0254},
      {10, 3, -4285.4440, 0.4116, -20.5581},
      {11, 1, -2109.8064, 0.3407, -22.7568},
      {11, 3, -20771.6945, 0.4332, -23.1791},
      {12, 1, -4452.3653, 0.3317, -25.6243},
      {12, 3, -98658.1166, 0.4485, -25.8602},
  });
  return table;
}

ErrorModelTable ErrorModelTable::from_entries(std::vector<ErrorModelEntry> entries) {
  ErrorModelTable table;
  for (const auto& e : entries) {
    check_sf(e.sf);
    check_cr(e.cr);
    if (e.alpha >= 0.0) throw std::invalid_argument("error-model alpha must be negative");
    if (e.beta <= 0.0) throw std::invalid_argument("error-model beta must be positive");
    if (table.has(e.sf, e.cr))
      throw std::invalid_argument("duplicate (sf, cr) row in error model");
    table.entries_.push_back(e);
  }
  if (table.entries_.empty()) throw std::invalid_argument("empty error model");
  return table;
}

ErrorModelTable ErrorModelTable::from_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open error-model CSV: " + path);

  auto split = [](const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    return out;
  };

  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty error-model CSV: " + path);
  auto header = split(line);
  auto column = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      std::string h = header[i];
      h.erase(std::remove_if(h.begin(), h.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); }), h.end());
      if (h == name) return static_cast<int>(i);
    }
    throw std::runtime_error("error-model CSV missing column '" + name + "': " + path);
  };
  int c_sf = column("sf"), c_cr = column("cr"), c_alpha = column("alpha"),
      c_beta = column("beta"), c_cut = column("snr_cutoff_db");

  std::vector<ErrorModelEntry> entries;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    auto fields = split(line);
    int needed = std::max({c_sf, c_cr, c_alpha, c_beta, c_cut}) + 1;
    if (static_cast<int>(fields.size()) < needed)
      throw std::runtime_error("short row at line " + std::to_string(line_no) + ": " + path);
    try {
      ErrorModelEntry e;
      e.sf = std::stoi(fields[c_sf]);
      e.cr = std::stoi(fields[c_cr]);
      e.alpha = std::stod(fields[c_alpha]);
      e.beta = std::stod(fields[c_beta]);
      e.snr_cutoff_db = std::stod(fields[c_cut]);
      entries.push_back(e);
    } catch (const std::exception&) {
      throw std::runtime_error("unparsable row at line " + std::to_string(line_no) + ": " + path);
    }
  }
  return from_entries(std::move(entries));
}

void ErrorModelTable::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write error-model CSV: " + path);
  out << "sf,cr,alpha,beta,snr_cutoff_db\n";
  out.precision(10);
  for (const auto& e : entries_)
    out << e.sf << ',' << e.cr << ',' << e.alpha << ',' << e.beta << ','
        << e.snr_cutoff_db << '\n';
}

bool ErrorModelTable::has(int sf, int cr) const {
  for (const auto& e : entries_)
    if (e.sf == sf && e.cr == cr) return true;
  return false;
}

const ErrorModelEntry& ErrorModelTable::entry(int sf, int cr) const {
  for (const auto& e : entries_)
    if (e.sf == sf && e.cr == cr) return e;
  throw std::out_of_range("no error-model row for sf " + std::to_string(sf) +
                          ", cr " + std::to_string(cr));
}

double ErrorModelTable::ber(int sf, int cr, double snr_db) const {
  const auto& e = entry(sf, cr);
  double log10_ber = e.alpha * std::exp(e.beta * snr_db);
  double value = std::pow(10.0, log10_ber);
  return std::clamp(value, 0.0, 0.5);
}

double ErrorModelTable::snr_cutoff_db(int sf, int cr) const {
  return entry(sf, cr).snr_cutoff_db;
}

double ErrorModelTable::chunk_success_probability(int sf, int cr, double snr_db,
                                                  double n_bits) const {
  if (n_bits < 0.0) throw std::invalid_argument("negative bit count");
  return std::pow(1.0 - ber(sf, cr, snr_db), n_bits);
}

}  // namespace lorawan
