#include "seatsim/analysis.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include <json.hpp>
#include <unsupported/Eigen/FFT>

namespace seatsim {

double rms(const std::vector<double>& series, std::size_t begin, std::size_t end) {
  end = std::min(end, series.size());
  if (begin >= end) throw AnalysisError("RMS window is empty");
  double s = 0.0;
  for (std::size_t i = begin; i < end; ++i) s += series[i] * series[i];
  return std::sqrt(s / static_cast<double>(end - begin));
}

Spectra welch_spectra(const std::vector<double>& x, const std::vector<double>& y, double fs,
                      int window_len, double overlap) {
  if (x.size() != y.size()) throw AnalysisError("series lengths differ");
  if (fs <= 0.0) throw AnalysisError("sample rate must be positive");
  if (window_len < 8) throw AnalysisError("estimator window is too short");
  if (static_cast<std::size_t>(window_len) > x.size())
    throw AnalysisError("series shorter than one estimator window");
  if (overlap < 0.0 || overlap >= 1.0) throw AnalysisError("overlap must be in [0, 1)");

  int n = window_len;
  int hop = std::max(1, static_cast<int>(std::llround(n * (1.0 - overlap))));

  std::vector<double> window(n);
  double window_power = 0.0;
  for (int i = 0; i < n; ++i) {
    window[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / n);  // periodic Hann
    window_power += window[i] * window[i];
  }

  int bins = n / 2 + 1;
  Spectra sp;
  sp.window_len = n;
  sp.overlap = overlap;
  sp.frequencies.resize(bins);
  for (int k = 0; k < bins; ++k) sp.frequencies[k] = fs * k / n;
  sp.sxx.assign(bins, 0.0);
  sp.syy.assign(bins, 0.0);
  sp.sxy.assign(bins, 0.0);

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> buf(n);
  std::vector<std::complex<double>> fx, fy;

  for (std::size_t start = 0; start + n <= x.size(); start += hop) {
    for (int i = 0; i < n; ++i) buf[i] = x[start + i] * window[i];
    fft.fwd(fx, buf);
    for (int i = 0; i < n; ++i) buf[i] = y[start + i] * window[i];
    fft.fwd(fy, buf);
    for (int k = 0; k < bins; ++k) {
      sp.sxx[k] += std::norm(fx[k]);
      sp.syy[k] += std::norm(fy[k]);
      sp.sxy[k] += std::conj(fx[k]) * fy[k];
    }
    sp.segment_count += 1;
  }

  // One-sided density: interior bins carry both halves of the spectrum.
  double scale = 1.0 / (fs * window_power * sp.segment_count);
  for (int k = 0; k < bins; ++k) {
    double fold = (k == 0 || (n % 2 == 0 && k == bins - 1)) ? 1.0 : 2.0;
    sp.sxx[k] *= fold * scale;
    sp.syy[k] *= fold * scale;
    sp.sxy[k] *= fold * scale;
  }
  return sp;
}

FrequencyResponse frf(const std::vector<double>& input, const std::vector<double>& output,
                      double fs, const EstimatorConfig& config, std::string input_channel,
                      std::string output_channel) {
  int window_len = static_cast<int>(std::llround(config.window_seconds * fs));
  Spectra sp = welch_spectra(input, output, fs, window_len, config.overlap);

  double total_power = 0.0;
  for (double v : sp.sxx) total_power += v;
  if (total_power <= 0.0)
    throw AnalysisError("input channel '" + input_channel + "' has no power");

  FrequencyResponse fr;
  fr.input_channel = std::move(input_channel);
  fr.output_channel = std::move(output_channel);
  fr.frequencies = sp.frequencies;
  fr.window_len = sp.window_len;
  fr.overlap = sp.overlap;
  fr.segment_count = sp.segment_count;
  std::size_t bins = sp.frequencies.size();
  fr.gain.resize(bins);
  fr.phase.resize(bins);
  fr.coherence.resize(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    if (sp.sxx[k] <= 0.0) {
      fr.gain[k] = 0.0;
      fr.phase[k] = 0.0;
      fr.coherence[k] = 0.0;
      continue;
    }
    fr.gain[k] = std::abs(sp.sxy[k]) / sp.sxx[k];
    fr.phase[k] = std::arg(sp.sxy[k]);
    double denom = sp.sxx[k] * sp.syy[k];
    double coh = denom > 0.0 ? std::norm(sp.sxy[k]) / denom : 0.0;
    fr.coherence[k] = std::clamp(coh, 0.0, 1.0);
  }
  return fr;
}

std::vector<std::size_t> band_indices(const std::vector<double>& frequencies, double f_lo,
                                      double f_hi) {
  std::vector<std::size_t> idx;
  for (std::size_t k = 0; k < frequencies.size(); ++k)
    if (frequencies[k] >= f_lo && frequencies[k] <= f_hi) idx.push_back(k);
  return idx;
}

namespace {

void append_number(std::string& out, double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

}  // namespace

void write_frf_csv(const FrequencyResponse& response, std::ostream& os) {
  std::string line = "freq_hz,gain,phase_rad,coherence\n";
  os.write(line.data(), static_cast<std::streamsize>(line.size()));
  for (std::size_t k = 0; k < response.frequencies.size(); ++k) {
    line.clear();
    append_number(line, response.frequencies[k]);
    line += ',';
    append_number(line, response.gain[k]);
    line += ',';
    append_number(line, response.phase[k]);
    line += ',';
    append_number(line, response.coherence[k]);
    line += '\n';
    os.write(line.data(), static_cast<std::streamsize>(line.size()));
  }
}

void write_frf_index(const std::vector<FrfIndexEntry>& entries, std::ostream& os) {
  nlohmann::json j = nlohmann::json::array();
  for (const FrfIndexEntry& e : entries)
    j.push_back({{"input", e.input}, {"output", e.output}, {"file", e.file}});
  os << j.dump(2) << '\n';
}

}  // namespace seatsim
