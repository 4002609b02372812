// Spectral estimation of transmissibility: Welch auto/cross spectra, the H1
// frequency response with coherence, and RMS summaries.

#pragma once

#include <complex>
#include <cstddef>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace seatsim {

struct AnalysisError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// √(mean of squares) over [begin, end) of the series.
double rms(const std::vector<double>& series, std::size_t begin = 0,
           std::size_t end = static_cast<std::size_t>(-1));

/// One-sided Welch estimates, periodic Hann window, averaged over segments.
struct Spectra {
  std::vector<double> frequencies;  // Hz, strictly increasing from 0
  std::vector<double> sxx, syy;     // auto-spectral densities, unit²/Hz
  std::vector<std::complex<double>> sxy;  // cross density, conj(X)·Y convention
  int window_len = 0;                     // samples
  double overlap = 0.0;                   // fraction of window_len
  int segment_count = 0;
};

Spectra welch_spectra(const std::vector<double>& x, const std::vector<double>& y, double fs,
                      int window_len, double overlap = 0.5);

struct EstimatorConfig {
  double window_seconds = 10.0;
  double overlap = 0.5;
};

struct FrequencyResponse {
  std::string input_channel, output_channel;
  std::vector<double> frequencies;  // Hz, strictly increasing
  std::vector<double> gain;         // |Sxy|/Sxx (H1)
  std::vector<double> phase;        // arg(Sxy), rad
  std::vector<double> coherence;    // |Sxy|²/(Sxx·Syy), in [0, 1]
  int window_len = 0;               // samples
  double overlap = 0.0;
  int segment_count = 0;
};

/// H1 transmissibility of output over input. Bins with exactly zero input
/// power report zero gain and coherence; a dead input channel is an error.
FrequencyResponse frf(const std::vector<double>& input, const std::vector<double>& output,
                      double fs, const EstimatorConfig& config = {},
                      std::string input_channel = "input",
                      std::string output_channel = "output");

/// Indices of the bins with f_lo <= frequency <= f_hi.
std::vector<std::size_t> band_indices(const std::vector<double>& frequencies, double f_lo,
                                      double f_hi);

/// One row per bin: "freq_hz,gain,phase_rad,coherence".
void write_frf_csv(const FrequencyResponse& response, std::ostream& os);

/// JSON array listing the channel pair behind each written FRF table.
struct FrfIndexEntry {
  std::string input, output, file;
};
void write_frf_index(const std::vector<FrfIndexEntry>& entries, std::ostream& os);

}  // namespace seatsim
