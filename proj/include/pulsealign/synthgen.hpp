#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pulsealign/signal.hpp"

namespace pulsealign {

enum class Rhythm { REGULAR, IRREGULAR };

// Shared cardiac state behind one PPG/ECG pair. Both channels are rendered
// from the same beat-time sequence, so pairing is recoverable by construction.
struct CardiacLatent {
    double heart_rate_bpm = 70.0;        // [40, 180]
    Rhythm rhythm = Rhythm::REGULAR;
    double hrv_jitter_s = 0.0;           // >= 0
    double pulse_transit_delay_s = 0.25; // [0.1, 0.4]
    double noise_std = 0.0;              // >= 0
    std::uint64_t seed = 0;

    void validate() const {
        require(heart_rate_bpm >= 40.0 && heart_rate_bpm <= 180.0, ErrorKind::Config,
                "heart_rate_bpm must be in [40, 180]");
        require(hrv_jitter_s >= 0.0, ErrorKind::Config, "hrv_jitter_s must be >= 0");
        require(pulse_transit_delay_s >= 0.1 && pulse_transit_delay_s <= 0.4, ErrorKind::Config,
                "pulse_transit_delay_s must be in [0.1, 0.4]");
        require(noise_std >= 0.0, ErrorKind::Config, "noise_std must be >= 0");
    }
};

// Sampling ranges for dataset generation.
struct LatentDistribution {
    std::pair<double, double> heart_rate_bpm = {50.0, 150.0};
    double p_irregular = 0.3;
    std::pair<double, double> hrv_jitter_s = {0.005, 0.02};
    std::pair<double, double> pulse_transit_delay_s = {0.15, 0.35};
    std::pair<double, double> noise_std = {0.01, 0.05};
};

struct PairLabel {
    std::int64_t index = 0;
    double heart_rate_bpm = 0.0;
    bool irregular = false;
    double hrv_jitter_s = 0.0;
    double pulse_transit_delay_s = 0.0;
    double noise_std = 0.0;
};

// Beat times shared by both channels of one pair, seconds from segment start.
// Exposed for oracle-style tests.
std::vector<double> latent_beat_times(const CardiacLatent& latent, double duration_s);

// One raw (pre-normalization) pair: a spike-train ECG and a delayed,
// smoothed, asymmetric-pulse PPG over the same beats, plus white noise.
SegmentPair synth_pair(const CardiacLatent& latent, double duration_s, double rate_hz);

// n pairs with latents drawn from the distribution; entry i of both outputs
// belongs to pair i. Deterministic per (seed, index).
struct SynthDataset {
    std::vector<SegmentPair> pairs;
    std::vector<PairLabel> labels;
};

SynthDataset synth_dataset(std::int64_t n_pairs, const LatentDistribution& dist, double duration_s, double rate_hz,
                           std::uint64_t seed);

// Writes ppg.apss / ecg.apss / labels.csv under out_dir and returns them.
SynthDataset write_synth_dataset(std::int64_t n_pairs, const LatentDistribution& dist, double duration_s,
                                 double rate_hz, std::uint64_t seed, const std::string& out_dir);

void write_labels_csv(const std::vector<PairLabel>& labels, const std::string& path);
std::vector<PairLabel> read_labels_csv(const std::string& path);

} // namespace pulsealign
