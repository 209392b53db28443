#include "core/baseband.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace lorawan::baseband {

namespace {

void check_cr(int cr) {
  if (cr < 1 || cr > 3) throw std::invalid_argument("coding-rate index out of range [1, 3]");
}

void check_sf(int sf) {
  if (sf < 7 || sf > 12) throw std::invalid_argument("spreading factor out of range [7, 12]");
}

void check_bits(const std::vector<std::uint8_t>& bits) {
  for (auto b : bits)
    if (b > 1) throw std::invalid_argument("bit vector element not 0/1");
}

}  // namespace

int codeword_length(int cr) {
  check_cr(cr);
  switch (cr) {
    case 1: return 5;
    case 2: return 7;
    default: return 8;
  }
}

std::vector<std::uint8_t> fec_encode(const std::vector<std::uint8_t>& bits, int cr) {
  check_cr(cr);
  check_bits(bits);
  if (bits.size() % 4 != 0)
    throw std::invalid_argument("information bits not a multiple of 4");
  int cw = codeword_length(cr);
  std::vector<std::uint8_t> out;
  out.reserve(bits.size() / 4 * cw);
  for (std::size_t i = 0; i < bits.size(); i += 4) {
    std::uint8_t d0 = bits[i], d1 = bits[i + 1], d2 = bits[i + 2], d3 = bits[i + 3];
    out.insert(out.end(), {d0, d1, d2, d3});
    if (cr == 1) {
      out.push_back(d0 ^ d1 ^ d2 ^ d3);
      continue;
    }
    std::uint8_t p0 = d0 ^ d1 ^ d2;
    std::uint8_t p1 = d1 ^ d2 ^ d3;
    std::uint8_t p2 = d0 ^ d1 ^ d3;
    out.insert(out.end(), {p0, p1, p2});
    if (cr == 3) out.push_back(static_cast<std::uint8_t>(d0 ^ d1 ^ d2 ^ d3 ^ p0 ^ p1 ^ p2));
  }
  return out;
}

FecDecodeResult fec_decode(const std::vector<std::uint8_t>& code_bits, int cr) {
  check_cr(cr);
  check_bits(code_bits);
  int cw = codeword_length(cr);
  if (code_bits.size() % cw != 0)
    throw std::invalid_argument("coded bits not a multiple of the codeword length");

  // Syndrome (s0 | s1<<1 | s2<<2) -> index of the flipped bit in
  // [d0 d1 d2 d3 p0 p1 p2].
  static constexpr int kSyndromeToBit[8] = {-1, 4, 5, 2, 6, 0, 3, 1};

  FecDecodeResult result;
  result.bits.reserve(code_bits.size() / cw * 4);
  for (std::size_t i = 0; i < code_bits.size(); i += cw) {
    std::uint8_t w[8] = {0};
    for (int k = 0; k < cw; ++k) w[k] = code_bits[i + k];
    if (cr == 1) {
      std::uint8_t parity = w[0] ^ w[1] ^ w[2] ^ w[3];
      if (parity != w[4]) ++result.detected_uncorrectable;
    } else {
      int s0 = w[0] ^ w[1] ^ w[2] ^ w[4];
      int s1 = w[1] ^ w[2] ^ w[3] ^ w[5];
      int s2 = w[0] ^ w[1] ^ w[3] ^ w[6];
      int syndrome = s0 | (s1 << 1) | (s2 << 2);
      if (cr == 2) {
        if (syndrome != 0) w[kSyndromeToBit[syndrome]] ^= 1;
      } else {
        int overall = 0;
        for (int k = 0; k < 8; ++k) overall ^= w[k];
        if (syndrome != 0) {
          if (overall == 1) {
            w[kSyndromeToBit[syndrome]] ^= 1;  // single error, correctable
          } else {
            ++result.detected_uncorrectable;   // double error
          }
        }
        // syndrome == 0 with odd overall parity means the extra parity bit
        // itself flipped; the data bits are already right.
      }
    }
    result.bits.insert(result.bits.end(), {w[0], w[1], w[2], w[3]});
  }
  return result;
}

std::vector<std::uint8_t> interleave(const std::vector<std::uint8_t>& code_bits, int ppm) {
  if (ppm < 1) throw std::invalid_argument("ppm must be positive");
  if (code_bits.empty() || code_bits.size() % ppm != 0)
    throw std::invalid_argument("input must span exactly ppm codewords");
  std::size_t cw = code_bits.size() / ppm;
  std::vector<std::uint8_t> out(code_bits.size());
  for (std::size_t k = 0; k < cw; ++k)
    for (int j = 0; j < ppm; ++j) out[k * ppm + j] = code_bits[j * cw + k];
  return out;
}

std::vector<std::uint8_t> deinterleave(const std::vector<std::uint8_t>& words, int ppm) {
  if (ppm < 1) throw std::invalid_argument("ppm must be positive");
  if (words.empty() || words.size() % ppm != 0)
    throw std::invalid_argument("input must span exactly cw words of ppm bits");
  std::size_t cw = words.size() / ppm;
  std::vector<std::uint8_t> out(words.size());
  for (std::size_t k = 0; k < cw; ++k)
    for (int j = 0; j < ppm; ++j) out[j * cw + k] = words[k * ppm + j];
  return out;
}

std::vector<std::uint8_t> whiten(const std::vector<std::uint8_t>& bits) {
  check_bits(bits);
  std::vector<std::uint8_t> out(bits.size());
  std::uint32_t state = 0x1FF;  // PRBS-9, all-ones start
  for (std::size_t i = 0; i < bits.size(); ++i) {
    std::uint8_t prbs = state & 1;
    std::uint32_t fb = (state ^ (state >> 4)) & 1;
    state = (state >> 1) | (fb << 8);
    out[i] = bits[i] ^ prbs;
  }
  return out;
}

std::vector<std::uint8_t> dewhiten(const std::vector<std::uint8_t>& bits) {
  return whiten(bits);  // XOR with the same sequence
}

std::uint32_t gray_map(std::uint32_t symbol_value) {
  return symbol_value ^ (symbol_value >> 1);
}

std::uint32_t gray_demap(std::uint32_t word) {
  std::uint32_t v = word;
  v ^= v >> 1;
  v ^= v >> 2;
  v ^= v >> 4;
  v ^= v >> 8;
  v ^= v >> 16;
  return v;
}

ChirpModem::ChirpModem(int sf) : sf_(sf), n_(1 << sf) {
  check_sf(sf);
  // Base up-chirp with accumulated phase pi*(i+1)*(i/N - 1); the arrays are
  // doubled so cyclic shifts become plain offsets.
  base_.resize(2 * n_);
  base_conj_.resize(2 * n_);
  for (int i = 0; i < n_; ++i) {
    double phase = M_PI * (i + 1.0) * (static_cast<double>(i) / n_ - 1.0);
    std::complex<double> c(std::cos(phase), std::sin(phase));
    base_[i] = base_[i + n_] = c;
    base_conj_[i] = base_conj_[i + n_] = std::conj(c);
  }
}

void ChirpModem::modulate_into(std::uint32_t value,
                               std::span<std::complex<double>> out) const {
  if (value >= static_cast<std::uint32_t>(n_))
    throw std::invalid_argument("symbol value out of range");
  if (out.size() != static_cast<std::size_t>(n_))
    throw std::invalid_argument("output span size mismatch");
  std::copy_n(base_.begin() + value, n_, out.begin());
}

std::vector<std::complex<double>> ChirpModem::modulate(std::uint32_t value) const {
  std::vector<std::complex<double>> out(n_);
  modulate_into(value, out);
  return out;
}

std::uint32_t ChirpModem::demodulate(std::span<const std::complex<double>> samples) const {
  if (samples.size() != static_cast<std::size_t>(n_))
    throw std::invalid_argument("sample span size mismatch");
  std::uint32_t best_value = 0;
  double best_mag2 = -1.0;
  const std::complex<double>* r = samples.data();
  for (int v = 0; v < n_; ++v) {
    const std::complex<double>* ref = base_conj_.data() + v;
    double sre = 0.0, sim = 0.0;
    for (int i = 0; i < n_; ++i) {
      double a = r[i].real(), b = r[i].imag();
      double c = ref[i].real(), d = ref[i].imag();
      sre += a * c - b * d;
      sim += a * d + b * c;
    }
    double mag2 = sre * sre + sim * sim;
    if (mag2 > best_mag2) {  // strict: ties resolve to the lowest value
      best_mag2 = mag2;
      best_value = static_cast<std::uint32_t>(v);
    }
  }
  return best_value;
}

void add_awgn(std::span<std::complex<double>> samples, double snr_db, RngStream& rng) {
  double snr = std::pow(10.0, snr_db / 10.0);
  double sigma = std::sqrt(1.0 / (2.0 * snr));
  for (auto& s : samples)
    s += std::complex<double>(sigma * rng.normal(), sigma * rng.normal());
}

std::vector<std::complex<double>> modulate(std::uint32_t value, int sf) {
  check_sf(sf);
  static const std::array<ChirpModem, 6> modems = {
      ChirpModem(7), ChirpModem(8), ChirpModem(9),
      ChirpModem(10), ChirpModem(11), ChirpModem(12)};
  return modems[sf - 7].modulate(value);
}

std::uint32_t demodulate(std::span<const std::complex<double>> samples, int sf) {
  check_sf(sf);
  static const std::array<ChirpModem, 6> modems = {
      ChirpModem(7), ChirpModem(8), ChirpModem(9),
      ChirpModem(10), ChirpModem(11), ChirpModem(12)};
  return modems[sf - 7].demodulate(samples);
}

BerSample measure_ber(int sf, int cr, double snr_db, std::uint64_t min_bits,
                      RngStream& rng) {
  check_sf(sf);
  check_cr(cr);
  if (min_bits == 0) throw std::invalid_argument("min_bits must be positive");

  const int ppm = sf;
  const int cw = codeword_length(cr);
  const int info_per_block = 4 * ppm;
  ChirpModem modem(sf);
  std::vector<std::complex<double>> symbol(modem.samples_per_symbol());
  std::vector<std::uint8_t> info(info_per_block);
  std::vector<std::uint8_t> rx_words(static_cast<std::size_t>(cw) * ppm);

  BerSample sample{sf, cr, snr_db, 0, 0};
  while (sample.bits_sent < min_bits) {
    for (auto& b : info) b = static_cast<std::uint8_t>(rng.uniform_int(2));
    auto tx_words = whiten(interleave(fec_encode(info, cr), ppm));
    for (int k = 0; k < cw; ++k) {
      std::uint32_t word = 0;
      for (int j = 0; j < ppm; ++j) word |= static_cast<std::uint32_t>(tx_words[k * ppm + j]) << j;
      modem.modulate_into(gray_demap(word), symbol);
      add_awgn(symbol, snr_db, rng);
      std::uint32_t rx_word = gray_map(modem.demodulate(symbol));
      for (int j = 0; j < ppm; ++j)
        rx_words[k * ppm + j] = static_cast<std::uint8_t>((rx_word >> j) & 1);
    }
    auto decoded = fec_decode(deinterleave(dewhiten(rx_words), ppm), cr);
    for (int i = 0; i < info_per_block; ++i)
      if (decoded.bits[i] != info[i]) ++sample.bit_errors;
    sample.bits_sent += info_per_block;
  }
  return sample;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

}  // namespace

void write_campaign_csv(const std::string& path, const std::vector<BerSample>& samples) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write campaign CSV: " + path);
  out << "sf,cr,snr_db,bits,errors,ber\n";
  out.precision(10);
  for (const auto& s : samples)
    out << s.sf << ',' << s.cr << ',' << s.snr_db << ',' << s.bits_sent << ','
        << s.bit_errors << ',' << s.ber() << '\n';
}

std::vector<BerSample> read_campaign_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open campaign CSV: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty campaign CSV: " + path);
  auto header = split_csv(line);
  auto column = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      std::string h = header[i];
      h.erase(std::remove_if(h.begin(), h.end(),
                             [](char c) { return std::isspace(static_cast<unsigned char>(c)); }),
              h.end());
      if (h == name) return static_cast<int>(i);
    }
    throw std::runtime_error("campaign CSV missing column '" + name + "': " + path);
  };
  int c_sf = column("sf"), c_cr = column("cr"), c_snr = column("snr_db"),
      c_bits = column("bits"), c_err = column("errors");

  std::vector<BerSample> samples;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    auto fields = split_csv(line);
    int needed = std::max({c_sf, c_cr, c_snr, c_bits, c_err}) + 1;
    if (static_cast<int>(fields.size()) < needed)
      throw std::runtime_error("short row at line " + std::to_string(line_no) + ": " + path);
    try {
      BerSample s;
      s.sf = std::stoi(fields[c_sf]);
      s.cr = std::stoi(fields[c_cr]);
      s.snr_db = std::stod(fields[c_snr]);
      s.bits_sent = std::stoull(fields[c_bits]);
      s.bit_errors = std::stoull(fields[c_err]);
      samples.push_back(s);
    } catch (const std::exception&) {
      throw std::runtime_error("unparsable row at line " + std::to_string(line_no) + ": " + path);
    }
  }
  return samples;
}

const double kFitBerCeiling = 1.0 - std::pow(10.0, -6.0 / 108.0);

namespace {

double sse_for(const std::vector<double>& s, const std::vector<double>& y,
               double alpha, double beta) {
  double sse = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    double r = y[i] - alpha * std::exp(beta * s[i]);
    sse += r * r;
  }
  return sse;
}

}  // namespace

ErrorModelFit fit_error_model(const std::vector<BerSample>& samples) {
  if (samples.empty()) throw std::invalid_argument("no samples to fit");
  int sf = samples.front().sf, cr = samples.front().cr;
  std::vector<double> s, y;
  for (const auto& p : samples) {
    if (p.sf != sf || p.cr != cr)
      throw std::invalid_argument("fit input mixes (sf, cr) pairs");
    double ber = p.ber();
    if (ber <= 0.0 || ber > kFitBerCeiling) continue;
    s.push_back(p.snr_db);
    y.push_back(std::log10(ber));
  }
  if (s.size() < 4)
    throw std::runtime_error("fewer than 4 usable points after subset selection");
  const std::size_t n = s.size();

  // log10(ber) is negative for every kept point, so ln(-y) is defined and
  // linear in snr; that gives the starting estimate.
  double sum_s = 0, sum_z = 0, sum_ss = 0, sum_sz = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double z = std::log(-y[i]);
    sum_s += s[i];
    sum_z += z;
    sum_ss += s[i] * s[i];
    sum_sz += s[i] * z;
  }
  double beta = (n * sum_sz - sum_s * sum_z) / (n * sum_ss - sum_s * sum_s);
  double alpha = -std::exp(sum_z / n - beta * sum_s / n);

  // Gauss-Newton on y - alpha*exp(beta*s), halving the step while it fails
  // to reduce the squared error.
  double sse = sse_for(s, y, alpha, beta);
  for (int iter = 0; iter < 100; ++iter) {
    double jaa = 0, jab = 0, jbb = 0, ga = 0, gb = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double e = std::exp(beta * s[i]);
      double r = y[i] - alpha * e;
      double da = e;
      double db = alpha * s[i] * e;
      jaa += da * da;
      jab += da * db;
      jbb += db * db;
      ga += da * r;
      gb += db * r;
    }
    double det = jaa * jbb - jab * jab;
    if (std::abs(det) < 1e-300) break;
    double step_a = (jbb * ga - jab * gb) / det;
    double step_b = (jaa * gb - jab * ga) / det;
    double lambda = 1.0;
    double next_sse = sse;
    double next_a = alpha, next_b = beta;
    while (lambda > 1e-8) {
      double ca = alpha + lambda * step_a;
      double cb = beta + lambda * step_b;
      if (ca < 0.0 && cb > 0.0) {
        double c_sse = sse_for(s, y, ca, cb);
        if (c_sse < sse) {
          next_sse = c_sse;
          next_a = ca;
          next_b = cb;
          break;
        }
      }
      lambda *= 0.5;
    }
    if (next_sse >= sse * (1.0 - 1e-14)) {
      alpha = next_a;
      beta = next_b;
      break;
    }
    alpha = next_a;
    beta = next_b;
    sse = next_sse;
  }

  double mean_y = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double ss_tot = 0.0;
  for (double v : y) ss_tot += (v - mean_y) * (v - mean_y);
  double ss_res = sse_for(s, y, alpha, beta);
  double rsquare = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;

  ErrorModelFit fit;
  fit.entry.sf = sf;
  fit.entry.cr = cr;
  fit.entry.alpha = alpha;
  fit.entry.beta = beta;
  // Cut-off: the SNR where the fitted curve crosses the fitting ceiling.
  fit.entry.snr_cutoff_db = std::log(std::log10(kFitBerCeiling) / alpha) / beta;
  fit.rsquare = rsquare;
  fit.points_used = static_cast<int>(n);
  return fit;
}

std::vector<ErrorModelFit> fit_all(const std::vector<BerSample>& samples) {
  std::vector<std::pair<int, int>> groups;
  for (const auto& p : samples) {
    std::pair<int, int> key{p.sf, p.cr};
    if (std::find(groups.begin(), groups.end(), key) == groups.end())
      groups.push_back(key);
  }
  std::vector<ErrorModelFit> fits;
  for (auto [sf, cr] : groups) {
    std::vector<BerSample> group;
    for (const auto& p : samples)
      if (p.sf == sf && p.cr == cr) group.push_back(p);
    fits.push_back(fit_error_model(group));
  }
  return fits;
}

}  // namespace lorawan::baseband
