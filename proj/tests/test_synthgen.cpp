#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "pulsealign/analysis.hpp"
#include "pulsealign/signal.hpp"
#include "pulsealign/synthgen.hpp"

using namespace pulsealign;

namespace {

CardiacLatent base_latent() {
    CardiacLatent latent;
    latent.heart_rate_bpm = 60.0;
    latent.rhythm = Rhythm::REGULAR;
    latent.hrv_jitter_s = 0.0;
    latent.pulse_transit_delay_s = 0.2;
    latent.noise_std = 0.0;
    latent.seed = 4;
    return latent;
}

// Counts upright spikes above half the global maximum with a refractory gap.
std::size_t count_spikes(const std::vector<double>& x, double fs) {
    const double threshold = 0.5 * *std::max_element(x.begin(), x.end());
    std::size_t count = 0;
    std::int64_t last = -1000000;
    for (std::size_t i = 1; i + 1 < x.size(); ++i) {
        if (x[i] >= threshold && x[i] >= x[i - 1] && x[i] >= x[i + 1] &&
            static_cast<std::int64_t>(i) - last > static_cast<std::int64_t>(0.3 * fs)) {
            ++count;
            last = static_cast<std::int64_t>(i);
        }
    }
    return count;
}

} // namespace

TEST_CASE("a 60 bpm pair has ten beats and a 1 Hz pulse fundamental") {
    const SegmentPair pair = synth_pair(base_latent(), 10.0, 125.0);
    REQUIRE(pair.ppg.size() == 1250);
    REQUIRE(pair.ecg.size() == 1250);
    CHECK(pair.ppg.modality == Modality::PPG);
    CHECK(pair.ecg.modality == Modality::ECG);

    CHECK(count_spikes(pair.ecg.samples, 125.0) == 10);
    CHECK(latent_beat_times(base_latent(), 10.0).size() == 10);

    const double peak_hz = dominant_frequency(pair.ppg.samples, 125.0, 0.5, 8.0);
    CHECK(peak_hz == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("the pulse trails the electrical beat by the transit delay") {
    CardiacLatent latent = base_latent();
    latent.pulse_transit_delay_s = 0.2;
    const SegmentPair pair = synth_pair(latent, 10.0, 125.0);
    const std::int64_t lag = envelope_lag_samples(pair.ecg.samples, pair.ppg.samples, 125.0, 40);
    CHECK(lag >= 24);
    CHECK(lag <= 26);
}

TEST_CASE("generation is deterministic per seed") {
    const SegmentPair a = synth_pair(base_latent(), 10.0, 125.0);
    const SegmentPair b = synth_pair(base_latent(), 10.0, 125.0);
    CHECK(a.ppg.samples == b.ppg.samples);
    CHECK(a.ecg.samples == b.ecg.samples);

    CardiacLatent other = base_latent();
    other.seed = 5;
    const SegmentPair c = synth_pair(other, 10.0, 125.0);
    CHECK(a.ecg.samples != c.ecg.samples);
}

TEST_CASE("both modalities report the same instantaneous rate at zero noise") {
    for (double hr : {55.0, 72.0, 96.0, 120.0}) {
        CardiacLatent latent = base_latent();
        latent.heart_rate_bpm = hr;
        latent.seed = static_cast<std::uint64_t>(hr);
        const SegmentPair pair = synth_pair(latent, 10.0, 125.0);
        const double hr_ecg = estimate_heart_rate_bpm(pair.ecg.samples, 125.0);
        const double hr_ppg = estimate_heart_rate_bpm(pair.ppg.samples, 125.0);
        CHECK(std::abs(hr_ecg - hr_ppg) <= 2.0);
        CHECK(hr_ecg == doctest::Approx(hr).epsilon(0.05));
    }
}

TEST_CASE("irregular rhythm spreads the interval distribution") {
    CardiacLatent regular = base_latent();
    regular.hrv_jitter_s = 0.01;
    CardiacLatent irregular = regular;
    irregular.rhythm = Rhythm::IRREGULAR;

    auto interval_spread = [](const std::vector<double>& beats) {
        std::vector<double> iv;
        for (std::size_t i = 1; i < beats.size(); ++i) iv.push_back(beats[i] - beats[i - 1]);
        return standard_deviation(iv);
    };
    double spread_reg = 0.0, spread_irr = 0.0;
    for (std::uint64_t s = 0; s < 8; ++s) {
        regular.seed = s;
        irregular.seed = s;
        spread_reg += interval_spread(latent_beat_times(regular, 30.0));
        spread_irr += interval_spread(latent_beat_times(irregular, 30.0));
    }
    CHECK(spread_irr > 2.0 * spread_reg);
}

TEST_CASE("latent range violations are rejected") {
    CardiacLatent latent = base_latent();
    latent.heart_rate_bpm = 300.0;
    CHECK_THROWS_AS(synth_pair(latent, 10.0, 125.0), Error);
    latent = base_latent();
    latent.pulse_transit_delay_s = 0.9;
    CHECK_THROWS_AS(synth_pair(latent, 10.0, 125.0), Error);
    latent = base_latent();
    latent.noise_std = -0.5;
    CHECK_THROWS_AS(synth_pair(latent, 10.0, 125.0), Error);
}

TEST_CASE("dataset generation writes aligned stores and labels") {
    const std::string dir = (std::filesystem::temp_directory_path() / "pa_synth_ds").string();
    LatentDistribution dist;
    const SynthDataset data = write_synth_dataset(100, dist, 10.0, 125.0, 777, dir);

    CHECK(data.pairs.size() == 100);
    CHECK(data.labels.size() == 100);
    for (const auto& label : data.labels) {
        CHECK(label.heart_rate_bpm >= dist.heart_rate_bpm.first);
        CHECK(label.heart_rate_bpm <= dist.heart_rate_bpm.second);
    }

    CHECK(read_store_info(dir + "/ppg.apss").segment_count == 100);
    CHECK(read_store_info(dir + "/ecg.apss").segment_count == 100);
    const auto labels = read_labels_csv(dir + "/labels.csv");
    REQUIRE(labels.size() == 100);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        CHECK(labels[i].index == static_cast<std::int64_t>(i));
        CHECK(labels[i].heart_rate_bpm == doctest::Approx(data.labels[i].heart_rate_bpm));
        CHECK(labels[i].irregular == data.labels[i].irregular);
    }

    // regeneration with the same seed is byte-identical
    const std::string dir2 = (std::filesystem::temp_directory_path() / "pa_synth_ds2").string();
    write_synth_dataset(100, dist, 10.0, 125.0, 777, dir2);
    auto read_bytes = [](const std::string& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    };
    CHECK(read_bytes(dir + "/ppg.apss") == read_bytes(dir2 + "/ppg.apss"));
    CHECK(read_bytes(dir + "/ecg.apss") == read_bytes(dir2 + "/ecg.apss"));
}
