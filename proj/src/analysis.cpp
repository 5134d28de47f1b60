#include "pulsealign/analysis.hpp"

#include <algorithm>
#include <cmath>

namespace pulsealign {

namespace {

// Goertzel power at DFT bin k for an n-point transform.
double bin_power(const std::vector<double>& x, std::size_t k) {
    const std::size_t n = x.size();
    const double w = 2.0 * M_PI * static_cast<double>(k) / static_cast<double>(n);
    const double coeff = 2.0 * std::cos(w);
    double s0 = 0.0, s1 = 0.0, s2 = 0.0;
    for (double v : x) {
        s0 = v + coeff * s1 - s2;
        s2 = s1;
        s1 = s0;
    }
    return s1 * s1 + s2 * s2 - coeff * s1 * s2;
}

double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    double hi = v[mid];
    if (v.size() % 2 == 0) {
        std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid) - 1, v.end());
        return 0.5 * (hi + v[mid - 1]);
    }
    return hi;
}

std::vector<double> moving_average(const std::vector<double>& x, std::size_t window) {
    if (window <= 1) return x;
    std::vector<double> out(x.size(), 0.0);
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        acc += x[i];
        if (i >= window) acc -= x[i - window];
        const std::size_t count = std::min(i + 1, window);
        out[i] = acc / static_cast<double>(count);
    }
    return out;
}

} // namespace

double band_power(const std::vector<double>& x, double fs_hz, double f_lo_hz, double f_hi_hz) {
    require(fs_hz > 0.0 && f_lo_hz <= f_hi_hz, ErrorKind::Usage, "invalid band for band_power");
    const std::size_t n = x.size();
    if (n == 0) return 0.0;
    const double bin_hz = fs_hz / static_cast<double>(n);
    const std::size_t k_lo = static_cast<std::size_t>(std::ceil(f_lo_hz / bin_hz - 1e-9));
    const std::size_t k_hi = std::min<std::size_t>(n / 2, static_cast<std::size_t>(std::floor(f_hi_hz / bin_hz + 1e-9)));
    double total = 0.0;
    for (std::size_t k = k_lo; k <= k_hi && k <= n / 2; ++k) total += bin_power(x, k);
    return total;
}

double tone_amplitude(const std::vector<double>& x, double fs_hz, double f_hz) {
    const std::size_t n = x.size();
    require(n > 0 && fs_hz > 0.0, ErrorKind::Usage, "tone_amplitude on empty signal");
    const std::size_t k = static_cast<std::size_t>(std::llround(f_hz * static_cast<double>(n) / fs_hz));
    const double power = bin_power(x, std::min(k, n / 2));
    // |X_k| * 2/n is the amplitude of a real sinusoid landing on bin k.
    return 2.0 * std::sqrt(std::max(0.0, power)) / static_cast<double>(n);
}

double dominant_frequency(const std::vector<double>& x, double fs_hz, double f_lo_hz, double f_hi_hz) {
    const std::size_t n = x.size();
    require(n > 0, ErrorKind::Usage, "dominant_frequency on empty signal");
    const double bin_hz = fs_hz / static_cast<double>(n);
    const std::size_t k_lo = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(f_lo_hz / bin_hz - 1e-9)));
    const std::size_t k_hi = std::min<std::size_t>(n / 2, static_cast<std::size_t>(std::floor(f_hi_hz / bin_hz + 1e-9)));
    double best = -1.0;
    std::size_t best_k = k_lo;
    for (std::size_t k = k_lo; k <= k_hi; ++k) {
        const double p = bin_power(x, k);
        if (p > best) {
            best = p;
            best_k = k;
        }
    }
    return static_cast<double>(best_k) * bin_hz;
}

std::vector<double> detect_beats(const std::vector<double>& x, double fs_hz) {
    require(fs_hz > 0.0, ErrorKind::Usage, "detect_beats needs a positive rate");
    const std::size_t n = x.size();
    if (n < 8) return {};

    std::vector<double> energy(n);
    for (std::size_t i = 0; i < n; ++i) energy[i] = x[i] * x[i];
    const std::size_t smooth = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(0.10 * fs_hz)));
    std::vector<double> env = moving_average(energy, smooth);

    const double peak = *std::max_element(env.begin(), env.end());
    if (peak <= 0.0) return {};
    const double med = median_of(env);
    // Sparse-activity gate: spikes must dominate the typical envelope level.
    const double threshold = std::max(0.25 * peak, 3.0 * med);

    const std::size_t refractory = static_cast<std::size_t>(std::llround(0.25 * fs_hz));
    std::vector<std::size_t> env_peaks;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (env[i] < threshold || env[i] < env[i - 1] || env[i] < env[i + 1]) continue;
        if (!env_peaks.empty() && i - env_peaks.back() < refractory) {
            if (env[i] > env[env_peaks.back()]) env_peaks.back() = i;
        } else {
            env_peaks.push_back(i);
        }
    }

    // Refine each envelope peak to the strongest raw deflection nearby.
    const std::size_t halo = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(0.05 * fs_hz)));
    std::vector<double> beats;
    for (std::size_t p : env_peaks) {
        const std::size_t lo = p > halo ? p - halo : 0;
        const std::size_t hi = std::min(n - 1, p + halo);
        std::size_t arg = lo;
        for (std::size_t i = lo; i <= hi; ++i) {
            if (std::abs(x[i]) > std::abs(x[arg])) arg = i;
        }
        beats.push_back(static_cast<double>(arg) / fs_hz);
    }
    return beats;
}

double estimate_heart_rate_bpm(const std::vector<double>& x, double fs_hz) {
    const std::vector<double> beats = detect_beats(x, fs_hz);
    if (beats.size() < 2) return 0.0;
    std::vector<double> intervals;
    for (std::size_t i = 1; i < beats.size(); ++i) intervals.push_back(beats[i] - beats[i - 1]);
    const double med = median_of(intervals);
    return med > 0.0 ? 60.0 / med : 0.0;
}

std::int64_t envelope_lag_samples(const std::vector<double>& a, const std::vector<double>& b, double fs_hz,
                                  std::int64_t max_lag) {
    require(a.size() == b.size() && !a.empty(), ErrorKind::Usage, "envelope_lag expects equal non-empty signals");
    const std::size_t n = a.size();
    const std::size_t smooth = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(0.05 * fs_hz)));
    std::vector<double> ea(n), eb(n);
    for (std::size_t i = 0; i < n; ++i) {
        ea[i] = a[i] * a[i];
        eb[i] = b[i] * b[i];
    }
    ea = moving_average(ea, smooth);
    eb = moving_average(eb, smooth);
    const double ma = mean(ea), mb = mean(eb);
    for (auto& v : ea) v -= ma;
    for (auto& v : eb) v -= mb;

    double best = -std::numeric_limits<double>::infinity();
    std::int64_t best_lag = 0;
    for (std::int64_t lag = -max_lag; lag <= max_lag; ++lag) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const std::int64_t j = static_cast<std::int64_t>(i) + lag;
            if (j < 0 || j >= static_cast<std::int64_t>(n)) continue;
            acc += ea[i] * eb[static_cast<std::size_t>(j)];
        }
        if (acc > best) {
            best = acc;
            best_lag = lag;
        }
    }
    return best_lag;
}

double skewness_about_median(const std::vector<double>& x) {
    if (x.size() < 3) return 0.0;
    const double med = median_of(x);
    double m2 = 0.0, m3 = 0.0;
    for (double v : x) {
        const double d = v - med;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= static_cast<double>(x.size());
    m3 /= static_cast<double>(x.size());
    if (m2 <= 0.0) return 0.0;
    return m3 / std::pow(m2, 1.5);
}

double mean(const std::vector<double>& x) {
    if (x.empty()) return 0.0;
    double acc = 0.0;
    for (double v : x) acc += v;
    return acc / static_cast<double>(x.size());
}

double standard_deviation(const std::vector<double>& x) {
    if (x.empty()) return 0.0;
    const double mu = mean(x);
    double acc = 0.0;
    for (double v : x) acc += (v - mu) * (v - mu);
    return std::sqrt(acc / static_cast<double>(x.size()));
}

double rms(const std::vector<double>& x) {
    if (x.empty()) return 0.0;
    double acc = 0.0;
    for (double v : x) acc += v * v;
    return std::sqrt(acc / static_cast<double>(x.size()));
}

} // namespace pulsealign
