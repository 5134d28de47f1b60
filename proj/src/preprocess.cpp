#include "pulsealign/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "pulsealign/analysis.hpp"
#include "pulsealign/filters.hpp"

namespace pulsealign {

const char* to_string(SignalQuality q) {
    switch (q) {
        case SignalQuality::ACCEPT: return "ACCEPT";
        case SignalQuality::MARGINAL: return "MARGINAL";
        case SignalQuality::REJECT: return "REJECT";
    }
    return "?";
}

std::vector<Waveform> segment_recording(const Waveform& rec, const PreprocessConfig& cfg) {
    cfg.validate();
    require(rec.sample_rate_hz > 0.0, ErrorKind::Usage, "recording needs a positive sample rate");
    const std::int64_t per_segment = std::llround(cfg.segment_seconds * rec.sample_rate_hz);
    require(per_segment >= 1, ErrorKind::Config, "segment window shorter than one sample");
    const std::int64_t count = rec.size() / per_segment;
    std::vector<Waveform> out;
    out.reserve(static_cast<std::size_t>(count));
    for (std::int64_t i = 0; i < count; ++i) {
        Waveform seg;
        seg.modality = rec.modality;
        seg.sample_rate_hz = rec.sample_rate_hz;
        seg.start_time_s = rec.start_time_s + static_cast<double>(i * per_segment) / rec.sample_rate_hz;
        seg.source_id = rec.source_id;
        seg.samples.assign(rec.samples.begin() + static_cast<std::ptrdiff_t>(i * per_segment),
                           rec.samples.begin() + static_cast<std::ptrdiff_t>((i + 1) * per_segment));
        out.push_back(std::move(seg));
    }
    return out;
}

double invalid_fraction(const Waveform& seg, const PreprocessConfig& cfg) {
    const std::size_t n = seg.samples.size();
    if (n == 0) return 0.0;

    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (double v : seg.samples) {
        if (!std::isfinite(v)) continue;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double range = hi >= lo ? hi - lo : 0.0;
    const double eps = cfg.flatline_std_epsilon > 0.0 ? cfg.flatline_std_epsilon
                                                      : std::max(1e-4 * range, 1e-12);

    const std::size_t window = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(seg.sample_rate_hz)));
    std::size_t flagged = 0;
    for (std::size_t begin = 0; begin < n; begin += window) {
        const std::size_t end = std::min(n, begin + window);
        const std::size_t len = end - begin;
        bool invalid = false;
        std::size_t at_rail = 0;
        double acc = 0.0, acc2 = 0.0;
        for (std::size_t i = begin; i < end; ++i) {
            const double v = seg.samples[i];
            if (!std::isfinite(v)) {
                invalid = true;
                break;
            }
            if (range > 0.0 && (v == lo || v == hi)) ++at_rail;
            acc += v;
            acc2 += v * v;
        }
        if (!invalid) {
            const double mu = acc / static_cast<double>(len);
            const double var = std::max(0.0, acc2 / static_cast<double>(len) - mu * mu);
            if (std::sqrt(var) < eps) invalid = true;                       // motionless
            if (at_rail >= (len + 3) / 4 && len >= 4) invalid = true;       // clipped at a rail
        }
        if (invalid) flagged += len;
    }
    return static_cast<double>(flagged) / static_cast<double>(n);
}

Waveform bandpass_filter(const Waveform& seg, double low_hz, double high_hz, const PreprocessConfig& cfg) {
    require(high_hz < seg.sample_rate_hz / 2.0, ErrorKind::Config,
            "band edge " + std::to_string(high_hz) + " Hz reaches Nyquist of " + std::to_string(seg.sample_rate_hz) +
                " Hz input");
    const auto sos = butter_bandpass_sos(cfg.filter_order, low_hz, high_hz, seg.sample_rate_hz);
    Waveform out = seg;
    out.samples = sosfiltfilt(sos, seg.samples);
    return out;
}

Waveform notch_filter(const Waveform& seg, double notch_hz, const PreprocessConfig& cfg) {
    const Biquad section = iir_notch(notch_hz, cfg.notch_q, seg.sample_rate_hz);
    Waveform out = seg;
    out.samples = sosfiltfilt({section}, seg.samples);
    return out;
}

std::pair<Waveform, bool> correct_ecg_polarity(const Waveform& seg) {
    const double skew = skewness_about_median(seg.samples);
    const bool invert = skew < -1e-6; // ties keep the original orientation
    Waveform out = seg;
    if (invert) {
        for (double& v : out.samples) v = -v;
    }
    return {std::move(out), invert};
}

SignalQuality ecg_quality_index(const Waveform& seg) {
    int failures = 0;

    // Spectral concentration: the sharp-deflection band 5-15 Hz should hold
    // at least half of the 5-40 Hz power. Broadband noise spreads its power
    // across the full band and fails this ratio.
    const double mid = band_power(seg.samples, seg.sample_rate_hz, 5.0, 15.0);
    const double wide = band_power(seg.samples, seg.sample_rate_hz, 5.0, 40.0);
    if (!(wide > 0.0) || mid / wide < 0.5) ++failures;

    // Beat plausibility: at least two intervals in the physiological range,
    // and at least half of all detected intervals in range.
    const std::vector<double> beats = detect_beats(seg.samples, seg.sample_rate_hz);
    std::size_t plausible = 0, total = 0;
    for (std::size_t i = 1; i < beats.size(); ++i) {
        const double rr = beats[i] - beats[i - 1];
        ++total;
        if (rr >= 0.3 && rr <= 2.0) ++plausible;
    }
    if (plausible < 2 || plausible * 2 < total) ++failures;

    // Finite samples.
    std::size_t finite = 0;
    for (double v : seg.samples) finite += std::isfinite(v) ? 1 : 0;
    if (finite != seg.samples.size()) ++failures;

    if (failures == 0) return SignalQuality::ACCEPT;
    if (failures == 1) return SignalQuality::MARGINAL;
    return SignalQuality::REJECT;
}

Waveform resample(const Waveform& seg, double target_rate_hz) {
    require(target_rate_hz > 0.0, ErrorKind::Config, "target rate must be positive");
    Waveform out = seg;
    out.samples = resample_sinc(seg.samples, seg.sample_rate_hz, target_rate_hz);
    out.sample_rate_hz = target_rate_hz;
    return out;
}

Waveform zscore_normalize(const Waveform& seg) {
    const double mu = mean(seg.samples);
    const double sd = standard_deviation(seg.samples);
    require(sd > 0.0, ErrorKind::DegenerateSegment,
            "zero-variance segment at t=" + std::to_string(seg.start_time_s) + "s (" + seg.source_id + ")");
    Waveform out = seg;
    for (double& v : out.samples) v = (v - mu) / sd;
    return out;
}

PreprocessResult preprocess_pair_pipeline(const Waveform& ppg_rec, const Waveform& ecg_rec,
                                          const PreprocessConfig& cfg) {
    cfg.validate();
    PreprocessResult result;
    if (ppg_rec.samples.empty() || ecg_rec.samples.empty()) return result;
    require(ppg_rec.modality == Modality::PPG && ecg_rec.modality == Modality::ECG, ErrorKind::Usage,
            "pipeline expects (PPG, ECG) recordings in that order");

    const double start_tolerance_s = 1.0 / cfg.target_rate_hz;
    require(std::abs(ppg_rec.start_time_s - ecg_rec.start_time_s) <= start_tolerance_s, ErrorKind::DataError,
            "recordings start " + std::to_string(std::abs(ppg_rec.start_time_s - ecg_rec.start_time_s)) +
                "s apart, more than one sample at the target rate");

    // Truncate to the common duration, then cut both channels into windows.
    const double common_s = std::min(ppg_rec.duration_s(), ecg_rec.duration_s());
    Waveform ppg_cut = ppg_rec;
    ppg_cut.samples.resize(static_cast<std::size_t>(
        std::min<double>(static_cast<double>(ppg_rec.size()), std::floor(common_s * ppg_rec.sample_rate_hz + 1e-9))));
    Waveform ecg_cut = ecg_rec;
    ecg_cut.samples.resize(static_cast<std::size_t>(
        std::min<double>(static_cast<double>(ecg_rec.size()), std::floor(common_s * ecg_rec.sample_rate_hz + 1e-9))));

    const std::vector<Waveform> ppg_segs = segment_recording(ppg_cut, cfg);
    const std::vector<Waveform> ecg_segs = segment_recording(ecg_cut, cfg);
    const std::size_t n = std::min(ppg_segs.size(), ecg_segs.size());

    for (std::size_t i = 0; i < n; ++i) {
        PairRecord record;
        record.index = static_cast<std::int64_t>(i);

        const double ppg_bad = invalid_fraction(ppg_segs[i], cfg);
        const double ecg_bad = invalid_fraction(ecg_segs[i], cfg);
        if (ppg_bad > cfg.invalid_fraction_max) {
            record.reason = "ppg_invalid_fraction=" + std::to_string(ppg_bad);
            result.records.push_back(std::move(record));
            continue;
        }
        if (ecg_bad > cfg.invalid_fraction_max) {
            record.reason = "ecg_invalid_fraction=" + std::to_string(ecg_bad);
            result.records.push_back(std::move(record));
            continue;
        }

        // Filter at the native rate, fix polarity, then resample and gate on
        // the ECG quality index before normalizing.
        Waveform ppg = bandpass_filter(ppg_segs[i], cfg.ppg_band_hz.first, cfg.ppg_band_hz.second, cfg);
        Waveform ecg = bandpass_filter(ecg_segs[i], cfg.ecg_band_hz.first, cfg.ecg_band_hz.second, cfg);
        if (cfg.notch_hz < ecg.sample_rate_hz / 2.0) {
            ecg = notch_filter(ecg, cfg.notch_hz, cfg);
        }
        ecg = correct_ecg_polarity(ecg).first;

        ppg = resample(ppg, cfg.target_rate_hz);
        ecg = resample(ecg, cfg.target_rate_hz);

        if (cfg.sqi_enabled && ecg_quality_index(ecg) == SignalQuality::REJECT) {
            record.reason = "ecg_sqi=REJECT";
            result.records.push_back(std::move(record));
            continue;
        }

        SegmentPair pair;
        pair.pair_id = static_cast<std::int64_t>(i);
        pair.ppg = zscore_normalize(ppg);
        pair.ecg = zscore_normalize(ecg);
        pair.ecg.start_time_s = pair.ppg.start_time_s; // aligned within tolerance by construction
        pair.validate();
        record.kept = true;
        result.records.push_back(std::move(record));
        result.pairs.push_back(std::move(pair));
    }
    return result;
}

} // namespace pulsealign
