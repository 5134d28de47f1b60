#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pulsealign/errors.hpp"

namespace pulsealign {

enum class Modality : std::uint32_t { PPG = 0, ECG = 1 };

inline const char* to_string(Modality m) { return m == Modality::PPG ? "PPG" : "ECG"; }

// A contiguous run of samples from one channel of one recording. Immutable by
// convention once built; all pipeline stages return fresh copies.
struct Waveform {
    std::vector<double> samples;
    double sample_rate_hz = 0.0;
    Modality modality = Modality::PPG;
    double start_time_s = 0.0;
    std::string source_id;

    std::int64_t size() const { return static_cast<std::int64_t>(samples.size()); }
    double duration_s() const { return static_cast<double>(samples.size()) / sample_rate_hz; }

    void validate() const {
        require(!samples.empty(), ErrorKind::Usage, "waveform has no samples (" + source_id + ")");
        require(sample_rate_hz > 0.0, ErrorKind::Usage, "waveform sample rate must be positive (" + source_id + ")");
    }

    bool all_finite() const;
};

// Synchronized 10 s windows of the two modalities.
struct SegmentPair {
    Waveform ppg;
    Waveform ecg;
    std::int64_t pair_id = 0;

    void validate() const {
        require(ppg.modality == Modality::PPG, ErrorKind::Usage, "pair ppg channel has wrong modality");
        require(ecg.modality == Modality::ECG, ErrorKind::Usage, "pair ecg channel has wrong modality");
    }
};

// Binary segment store ("APSS"): a 24-byte header followed by segment_count *
// segment_length 32-bit little-endian floats. One store per modality; a pair
// dataset is two stores of equal count aligned by index.
struct SegmentStoreInfo {
    Modality modality = Modality::PPG;
    double sample_rate_hz = 0.0;
    std::int64_t segment_length = 0;
    std::int64_t segment_count = 0;
};

inline constexpr char kStoreMagic[4] = {'A', 'P', 'S', 'S'};
inline constexpr std::uint32_t kStoreVersion = 1;

// All segments must share modality, rate and length; the first offending
// index is reported otherwise. An empty list writes a valid zero-count store
// with the fallback metadata.
SegmentStoreInfo write_store(const std::vector<Waveform>& segments, const std::string& path,
                             Modality fallback_modality = Modality::PPG, double fallback_rate_hz = 125.0,
                             std::int64_t fallback_length = 0);

std::vector<Waveform> read_store(const std::string& path);
SegmentStoreInfo read_store_info(const std::string& path);

} // namespace pulsealign
