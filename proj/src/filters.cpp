#include "pulsealign/filters.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

namespace pulsealign {

namespace {

using cplx = std::complex<double>;

// Steady-state filter state (direct form II transposed) for a unit step.
struct StepState {
    double z1 = 0, z2 = 0, y = 0;
};

StepState step_state(const Biquad& s) {
    StepState st;
    const double denom = 1.0 + s.a1 + s.a2;
    st.y = denom != 0.0 ? (s.b0 + s.b1 + s.b2) / denom : 0.0;
    st.z1 = st.y - s.b0;
    st.z2 = s.b2 - s.a2 * st.y;
    return st;
}

void run_section(const Biquad& s, std::vector<double>& x, double z1, double z2) {
    for (double& v : x) {
        const double xin = v;
        const double y = s.b0 * xin + z1;
        z1 = s.b1 * xin - s.a1 * y + z2;
        z2 = s.b2 * xin - s.a2 * y;
        v = y;
    }
}

cplx sos_response(const std::vector<Biquad>& sos, double omega) {
    const cplx z = std::polar(1.0, omega);
    const cplx z1 = 1.0 / z;
    const cplx z2 = z1 * z1;
    cplx h = 1.0;
    for (const auto& s : sos) {
        h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
    }
    return h;
}

} // namespace

std::vector<Biquad> butter_bandpass_sos(int order, double low_hz, double high_hz, double fs_hz) {
    require(order >= 1 && order <= 12, ErrorKind::Config, "filter order must be in [1, 12]");
    require(fs_hz > 0.0, ErrorKind::Config, "sample rate must be positive");
    require(low_hz > 0.0 && low_hz < high_hz && high_hz < fs_hz / 2.0, ErrorKind::Config,
            "band (" + std::to_string(low_hz) + ", " + std::to_string(high_hz) + ") Hz must satisfy 0 < low < high < " +
                std::to_string(fs_hz / 2.0) + " Hz");

    // Pre-warped edges, band center and width in the analog domain.
    const double fs2 = 2.0 * fs_hz;
    const double wl = fs2 * std::tan(M_PI * low_hz / fs_hz);
    const double wu = fs2 * std::tan(M_PI * high_hz / fs_hz);
    const double w0sq = wl * wu;
    const double bw = wu - wl;

    // Prototype lowpass poles on the unit circle, transformed to band-pass:
    // each prototype pole p yields the two roots of s^2 - bw*p*s + w0^2.
    std::vector<cplx> analog_poles;
    for (int k = 0; k < order; ++k) {
        const double theta = M_PI * (2.0 * k + order + 1.0) / (2.0 * order);
        const cplx p(std::cos(theta), std::sin(theta));
        const cplx half = 0.5 * bw * p;
        const cplx disc = std::sqrt(half * half - w0sq);
        analog_poles.push_back(half + disc);
        analog_poles.push_back(half - disc);
    }

    // Bilinear transform; zeros land at z = +1 (from s = 0) and z = -1.
    std::vector<cplx> digital_poles;
    digital_poles.reserve(analog_poles.size());
    for (const cplx& s : analog_poles) digital_poles.push_back((fs2 + s) / (fs2 - s));

    // Group poles into conjugate (or real) pairs.
    std::vector<std::pair<cplx, cplx>> pairs;
    std::vector<cplx> pending = digital_poles;
    while (!pending.empty()) {
        auto it = std::max_element(pending.begin(), pending.end(),
                                   [](const cplx& a, const cplx& b) { return std::abs(a.imag()) < std::abs(b.imag()); });
        const cplx p = *it;
        pending.erase(it);
        if (std::abs(p.imag()) > 1e-12) {
            auto conj_it = std::min_element(pending.begin(), pending.end(), [&](const cplx& a, const cplx& b) {
                return std::abs(a - std::conj(p)) < std::abs(b - std::conj(p));
            });
            pairs.emplace_back(p, *conj_it);
            pending.erase(conj_it);
        } else {
            auto real_it = std::min_element(pending.begin(), pending.end(), [&](const cplx& a, const cplx& b) {
                return std::abs(a - p) < std::abs(b - p);
            });
            pairs.emplace_back(p, *real_it);
            pending.erase(real_it);
        }
    }
    // Well-damped sections first.
    std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) {
        return std::abs(a.first) < std::abs(b.first);
    });

    std::vector<Biquad> sos;
    for (const auto& [p1, p2] : pairs) {
        Biquad s;
        s.b0 = 1.0;
        s.b1 = 0.0;
        s.b2 = -1.0; // one zero at +1, one at -1 per section
        s.a1 = -(p1 + p2).real();
        s.a2 = (p1 * p2).real();
        sos.push_back(s);
    }

    // Normalize to unit gain at the geometric center of the band.
    const double center_hz = std::sqrt(low_hz * high_hz);
    const double gain = std::abs(sos_response(sos, 2.0 * M_PI * center_hz / fs_hz));
    require(gain > 0.0 && std::isfinite(gain), ErrorKind::NumericFailure, "filter design produced a degenerate gain");
    sos.front().b0 /= gain;
    sos.front().b1 /= gain;
    sos.front().b2 /= gain;
    return sos;
}

Biquad iir_notch(double freq_hz, double q, double fs_hz) {
    require(fs_hz > 0.0, ErrorKind::Config, "sample rate must be positive");
    require(freq_hz > 0.0 && freq_hz < fs_hz / 2.0, ErrorKind::Config,
            "notch frequency " + std::to_string(freq_hz) + " Hz must be below Nyquist " + std::to_string(fs_hz / 2.0));
    require(q > 0.0, ErrorKind::Config, "notch quality factor must be positive");
    const double w0 = 2.0 * M_PI * freq_hz / fs_hz;
    const double alpha = std::sin(w0) / (2.0 * q);
    const double a0 = 1.0 + alpha;
    Biquad s;
    s.b0 = 1.0 / a0;
    s.b1 = -2.0 * std::cos(w0) / a0;
    s.b2 = 1.0 / a0;
    s.a1 = -2.0 * std::cos(w0) / a0;
    s.a2 = (1.0 - alpha) / a0;
    return s;
}

std::vector<double> sosfilt(const std::vector<Biquad>& sos, const std::vector<double>& x) {
    std::vector<double> y = x;
    double dc_in = y.empty() ? 0.0 : y.front();
    for (const auto& s : sos) {
        const StepState st = step_state(s);
        run_section(s, y, st.z1 * dc_in, st.z2 * dc_in);
        dc_in *= st.y; // DC gain of this section scales the next stage's rest state
    }
    return y;
}

std::vector<double> sosfiltfilt(const std::vector<Biquad>& sos, const std::vector<double>& x) {
    if (x.empty()) return {};
    const std::size_t n = x.size();
    std::size_t pad = 3 * (2 * sos.size() + 1);
    if (pad >= n) pad = n - 1;

    // Odd extension about both endpoints suppresses startup transients.
    std::vector<double> ext;
    ext.reserve(n + 2 * pad);
    for (std::size_t i = 0; i < pad; ++i) ext.push_back(2.0 * x.front() - x[pad - i]);
    ext.insert(ext.end(), x.begin(), x.end());
    for (std::size_t i = 0; i < pad; ++i) ext.push_back(2.0 * x.back() - x[n - 2 - i]);

    ext = sosfilt(sos, ext);
    std::reverse(ext.begin(), ext.end());
    ext = sosfilt(sos, ext);
    std::reverse(ext.begin(), ext.end());

    return std::vector<double>(ext.begin() + static_cast<std::ptrdiff_t>(pad),
                               ext.begin() + static_cast<std::ptrdiff_t>(pad + n));
}

std::vector<double> resample_sinc(const std::vector<double>& x, double src_rate_hz, double dst_rate_hz) {
    require(src_rate_hz > 0.0, ErrorKind::Config, "source rate must be positive");
    require(dst_rate_hz > 0.0, ErrorKind::Config, "target rate must be positive");
    if (x.empty()) return {};
    const double ratio = dst_rate_hz / src_rate_hz;
    const std::size_t n_out = static_cast<std::size_t>(
        std::llround(static_cast<double>(x.size()) * ratio));
    if (std::abs(ratio - 1.0) < 1e-12) return x;

    // Cutoff slightly inside the smaller Nyquist; kernel width grows with the
    // decimation factor so the transition band stays proportional.
    const double fc = 0.5 * std::min(1.0, ratio) * 0.97;
    const double half_width = 24.0 / std::min(1.0, ratio);
    const std::size_t n_in = x.size();

    std::vector<double> out(n_out, 0.0);
    for (std::size_t i = 0; i < n_out; ++i) {
        const double s = static_cast<double>(i) / ratio;
        const std::int64_t m0 = static_cast<std::int64_t>(std::ceil(s - half_width));
        const std::int64_t m1 = static_cast<std::int64_t>(std::floor(s + half_width));
        double acc = 0.0, wsum = 0.0;
        for (std::int64_t m = m0; m <= m1; ++m) {
            const double t = s - static_cast<double>(m);
            const double u = t / half_width;
            const double window = 0.42 + 0.5 * std::cos(M_PI * u) + 0.08 * std::cos(2.0 * M_PI * u);
            const double arg = 2.0 * fc * t;
            const double sinc = arg == 0.0 ? 1.0 : std::sin(M_PI * arg) / (M_PI * arg);
            const double h = 2.0 * fc * sinc * window;
            wsum += h;
            if (m >= 0 && m < static_cast<std::int64_t>(n_in)) {
                acc += x[static_cast<std::size_t>(m)] * h;
            }
        }
        out[i] = wsum != 0.0 ? acc / wsum : 0.0;
    }
    return out;
}

} // namespace pulsealign
