#pragma once

#include <vector>

#include "pulsealign/errors.hpp"

namespace pulsealign {

// Second-order IIR section, normalized so a0 = 1.
struct Biquad {
    double b0 = 0, b1 = 0, b2 = 0;
    double a1 = 0, a2 = 0;
};

// Butterworth band-pass of the given prototype order (2*order poles total),
// designed by pole transformation and the bilinear transform. Unity gain at
// the geometric band center.
std::vector<Biquad> butter_bandpass_sos(int order, double low_hz, double high_hz, double fs_hz);

// Narrow band-reject biquad with quality factor q (bandwidth = freq/q).
Biquad iir_notch(double freq_hz, double q, double fs_hz);

// Single pass through the cascade with steady-state initial conditions.
std::vector<double> sosfilt(const std::vector<Biquad>& sos, const std::vector<double>& x);

// Forward-backward filtering with odd-symmetric edge extension: zero phase,
// squared magnitude response.
std::vector<double> sosfiltfilt(const std::vector<Biquad>& sos, const std::vector<double>& x);

// Band-limited rate conversion by normalized windowed-sinc interpolation.
// Output length = round(n_in * dst_rate / src_rate).
std::vector<double> resample_sinc(const std::vector<double>& x, double src_rate_hz, double dst_rate_hz);

} // namespace pulsealign
