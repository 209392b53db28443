// Complex-baseband LoRa modem chain: FEC, interleaving, whitening, Gray
// mapping, chirp modulation over AWGN, and Monte-Carlo BER measurement with
// curve fitting.  This is the reference implementation the link-level error
// model is calibrated against; clarity beats speed everywhere except the
// demodulator inner loop.
#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "core/engine.hpp"
#include "core/linkmodel.hpp"

namespace lorawan::baseband {

// Codeword lengths per coding-rate index: 4/5 parity, (7,4) Hamming and
// (8,4) extended Hamming.
int codeword_length(int cr);

// Bits are one value per element, LSB-style ordering within each nibble.
std::vector<std::uint8_t> fec_encode(const std::vector<std::uint8_t>& bits, int cr);

struct FecDecodeResult {
  std::vector<std::uint8_t> bits;
  // Codewords whose error pattern was detected but not correctable
  // (parity failures for cr 1, double errors for cr 3).
  int detected_uncorrectable = 0;
};
FecDecodeResult fec_decode(const std::vector<std::uint8_t>& code_bits, int cr);

// Diagonal interleaver over one block of ppm consecutive codewords.  Output
// word k collects bit position k of each codeword, so a corrupted symbol
// lands as at most one bit error in each codeword.
std::vector<std::uint8_t> interleave(const std::vector<std::uint8_t>& code_bits, int ppm);
std::vector<std::uint8_t> deinterleave(const std::vector<std::uint8_t>& words, int ppm);

// XOR with a PRBS-9 sequence (x^9 + x^5 + 1, all-ones seed), restarted at
// the beginning of every call.
std::vector<std::uint8_t> whiten(const std::vector<std::uint8_t>& bits);
std::vector<std::uint8_t> dewhiten(const std::vector<std::uint8_t>& bits);

std::uint32_t gray_map(std::uint32_t symbol_value);   // binary -> Gray word
std::uint32_t gray_demap(std::uint32_t word);         // Gray word -> binary

// Chirp modulator/demodulator at one sample per chip (2^sf samples per
// symbol).  Symbol value v is a cyclic time shift of the base up-chirp; the
// demodulator correlates against every candidate shift and takes the
// largest magnitude, preferring the lowest value on ties.
class ChirpModem {
 public:
  explicit ChirpModem(int sf);

  int sf() const { return sf_; }
  int samples_per_symbol() const { return n_; }

  void modulate_into(std::uint32_t value, std::span<std::complex<double>> out) const;
  std::vector<std::complex<double>> modulate(std::uint32_t value) const;
  std::uint32_t demodulate(std::span<const std::complex<double>> samples) const;

 private:
  int sf_;
  int n_;
  std::vector<std::complex<double>> base_;       // unit-power up-chirp
  std::vector<std::complex<double>> base_conj_;  // doubled for wrap-free indexing
};

// Adds circular complex Gaussian noise for the requested per-symbol SNR,
// assuming unit signal power.
void add_awgn(std::span<std::complex<double>> samples, double snr_db, RngStream& rng);

std::vector<std::complex<double>> modulate(std::uint32_t value, int sf);
std::uint32_t demodulate(std::span<const std::complex<double>> samples, int sf);

struct BerSample {
  int sf = 0;
  int cr = 0;
  double snr_db = 0.0;
  std::uint64_t bits_sent = 0;
  std::uint64_t bit_errors = 0;
  double ber() const {
    return bits_sent ? static_cast<double>(bit_errors) / static_cast<double>(bits_sent) : 0.0;
  }
};

// Runs the full transmit/receive chain and counts information-bit errors.
// min_bits is rounded up to whole interleaver blocks.
BerSample measure_ber(int sf, int cr, double snr_db, std::uint64_t min_bits, RngStream& rng);

void write_campaign_csv(const std::string& path, const std::vector<BerSample>& samples);
std::vector<BerSample> read_campaign_csv(const std::string& path);

// Points with BER above this are inside the waterfall knee and excluded
// from fitting, as are zero-error points.
extern const double kFitBerCeiling;

struct ErrorModelFit {
  ErrorModelEntry entry;
  double rsquare = 0.0;  // in log10(BER) space
  int points_used = 0;
};

// Fits log10(BER) = alpha * exp(beta * snr) to one (sf, cr) group of
// samples: log-linear initialisation followed by Gauss-Newton refinement.
ErrorModelFit fit_error_model(const std::vector<BerSample>& samples);
std::vector<ErrorModelFit> fit_all(const std::vector<BerSample>& samples);

}  // namespace lorawan::baseband
