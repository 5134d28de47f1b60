#pragma once

#include <utility>
#include <vector>

#include "pulsealign/signal.hpp"

namespace pulsealign {

struct PreprocessConfig {
    double segment_seconds = 10.0;
    double invalid_fraction_max = 0.25;
    std::pair<double, double> ppg_band_hz = {0.5, 8.0};
    std::pair<double, double> ecg_band_hz = {0.5, 40.0};
    double notch_hz = 50.0;
    double notch_q = 30.0;
    double target_rate_hz = 125.0;
    int filter_order = 4;
    // 0 selects the automatic threshold: 1e-4 times the segment's amplitude
    // range (with an absolute floor so exact flatlines are always caught).
    double flatline_std_epsilon = 0.0;
    bool sqi_enabled = true;

    void validate() const {
        require(segment_seconds > 0.0, ErrorKind::Config, "segment_seconds must be positive");
        require(invalid_fraction_max >= 0.0 && invalid_fraction_max <= 1.0, ErrorKind::Config,
                "invalid_fraction_max must be in [0, 1]");
        require(target_rate_hz > 0.0, ErrorKind::Config, "target_rate_hz must be positive");
        require(filter_order >= 1, ErrorKind::Config, "filter_order must be >= 1");
        for (const auto& band : {ppg_band_hz, ecg_band_hz}) {
            require(band.first > 0.0 && band.first < band.second, ErrorKind::Config,
                    "filter band must satisfy 0 < low < high");
            require(band.second < target_rate_hz / 2.0, ErrorKind::Config,
                    "filter band must stay below the target Nyquist frequency");
        }
        require(notch_hz > 0.0, ErrorKind::Config, "notch frequency must be positive");
        require(flatline_std_epsilon >= 0.0, ErrorKind::Config, "flatline_std_epsilon must be >= 0");
    }
};

enum class SignalQuality { ACCEPT, MARGINAL, REJECT };

const char* to_string(SignalQuality q);

// Consecutive non-overlapping windows of segment_seconds; the trailing
// remainder is dropped. A recording shorter than one window yields an empty
// list.
std::vector<Waveform> segment_recording(const Waveform& rec, const PreprocessConfig& cfg);

// Fraction of samples inside 1 s windows flagged invalid: non-finite values,
// rail-saturated runs, or a window standard deviation under the flatline
// threshold.
double invalid_fraction(const Waveform& seg, const PreprocessConfig& cfg);

// Zero-phase Butterworth band-pass at the segment's native rate.
Waveform bandpass_filter(const Waveform& seg, double low_hz, double high_hz, const PreprocessConfig& cfg);

// Zero-phase narrowband rejection at notch_hz.
Waveform notch_filter(const Waveform& seg, double notch_hz, const PreprocessConfig& cfg);

// Flips the segment when the dominant deflection points down, judged by the
// sign of the skewness about the median. Ties (|skew| within tolerance) keep
// the input orientation.
std::pair<Waveform, bool> correct_ecg_polarity(const Waveform& seg);

// Three-criterion composite on a filtered 125 Hz ECG segment: mid-band
// spectral concentration, plausible beat intervals, and finite samples.
// All pass -> ACCEPT; one failure -> MARGINAL; otherwise REJECT.
SignalQuality ecg_quality_index(const Waveform& seg);

// Band-limited rate conversion; output length = round(duration * target).
Waveform resample(const Waveform& seg, double target_rate_hz);

// Per-segment standardization to zero mean, unit variance.
Waveform zscore_normalize(const Waveform& seg);

struct PairRecord {
    std::int64_t index = 0;
    bool kept = false;
    std::string reason; // empty when kept
};

struct PreprocessResult {
    std::vector<SegmentPair> pairs;
    std::vector<PairRecord> records;
};

// Full conditioning pipeline over a time-aligned recording pair. Pairs are
// dropped together when either modality fails its gate.
PreprocessResult preprocess_pair_pipeline(const Waveform& ppg_rec, const Waveform& ecg_rec,
                                          const PreprocessConfig& cfg);

} // namespace pulsealign
