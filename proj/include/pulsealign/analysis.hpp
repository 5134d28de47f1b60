#pragma once

#include <vector>

#include "pulsealign/errors.hpp"

namespace pulsealign {

// Summed DFT power over bins whose frequency lies in [f_lo, f_hi]. Bin width
// is fs/n; endpoints inclusive.
double band_power(const std::vector<double>& x, double fs_hz, double f_lo_hz, double f_hi_hz);

// Magnitude of a single DFT bin at the frequency closest to f_hz (Goertzel).
double tone_amplitude(const std::vector<double>& x, double fs_hz, double f_hz);

// Frequency of the largest-amplitude DFT bin within [f_lo, f_hi].
double dominant_frequency(const std::vector<double>& x, double fs_hz, double f_lo_hz, double f_hi_hz);

// Beat onset times (seconds from segment start) found by thresholding a
// smoothed energy envelope. Tuned for sparse spike-like activity: the
// envelope peak must stand well above the median envelope, so broadband
// noise yields no detections.
std::vector<double> detect_beats(const std::vector<double>& x, double fs_hz);

// Median beat-to-beat rate in bpm from detect_beats; 0 when fewer than two
// beats are found.
double estimate_heart_rate_bpm(const std::vector<double>& x, double fs_hz);

// Lag (in samples of `a`) that maximizes the cross-correlation of the two
// signals' energy envelopes; positive when b trails a.
std::int64_t envelope_lag_samples(const std::vector<double>& a, const std::vector<double>& b, double fs_hz,
                                  std::int64_t max_lag);

// Third standardized moment about the median.
double skewness_about_median(const std::vector<double>& x);

double mean(const std::vector<double>& x);
double standard_deviation(const std::vector<double>& x);
double rms(const std::vector<double>& x);

} // namespace pulsealign
