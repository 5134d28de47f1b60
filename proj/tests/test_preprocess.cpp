#include <doctest.h>

#include <cmath>

#include "pulsealign/analysis.hpp"
#include "pulsealign/preprocess.hpp"
#include "pulsealign/rng.hpp"
#include "pulsealign/synthgen.hpp"

using namespace pulsealign;

namespace {

Waveform make_waveform(std::vector<double> samples, double fs, Modality m = Modality::PPG) {
    Waveform w;
    w.samples = std::move(samples);
    w.sample_rate_hz = fs;
    w.modality = m;
    w.source_id = "test";
    return w;
}

Waveform sine_wave(double freq_hz, double fs, double seconds, Modality m = Modality::PPG) {
    const std::size_t n = static_cast<std::size_t>(std::llround(seconds * fs));
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = std::sin(2.0 * M_PI * freq_hz * static_cast<double>(i) / fs);
    return make_waveform(std::move(x), fs, m);
}

CardiacLatent clean_latent(double hr = 60.0) {
    CardiacLatent latent;
    latent.heart_rate_bpm = hr;
    latent.rhythm = Rhythm::REGULAR;
    latent.hrv_jitter_s = 0.0;
    latent.pulse_transit_delay_s = 0.2;
    latent.noise_std = 0.0;
    latent.seed = 11;
    return latent;
}

} // namespace

TEST_CASE("segment_recording splits into whole windows, remainder dropped") {
    PreprocessConfig cfg;
    SUBCASE("35 s at 100 Hz gives 3 windows of 1000") {
        const auto segs = segment_recording(sine_wave(1.0, 100.0, 35.0), cfg);
        REQUIRE(segs.size() == 3);
        for (const auto& s : segs) CHECK(s.size() == 1000);
        CHECK(segs[1].start_time_s == doctest::Approx(10.0));
    }
    SUBCASE("exactly one window") {
        CHECK(segment_recording(sine_wave(1.0, 100.0, 10.0), cfg).size() == 1);
    }
    SUBCASE("slightly short gives none") {
        CHECK(segment_recording(sine_wave(1.0, 100.0, 9.99), cfg).empty());
    }
}

TEST_CASE("invalid_fraction flags flatlines, rails and non-finite windows") {
    PreprocessConfig cfg;
    SUBCASE("all-constant segment is fully invalid") {
        CHECK(invalid_fraction(make_waveform(std::vector<double>(1250, 2.5), 125.0), cfg) == doctest::Approx(1.0));
    }
    SUBCASE("clean sinusoid is fully valid") {
        CHECK(invalid_fraction(sine_wave(1.2, 125.0, 10.0), cfg) == doctest::Approx(0.0));
    }
    SUBCASE("leading 30% flatline is measured within one window") {
        Waveform w = sine_wave(1.2, 125.0, 10.0);
        for (std::size_t i = 0; i < 375; ++i) w.samples[i] = 0.1; // 3 s of flatline
        const double frac = invalid_fraction(w, cfg);
        CHECK(frac >= 0.2);
        CHECK(frac <= 0.4);
    }
    SUBCASE("non-finite samples poison their window") {
        Waveform w = sine_wave(1.2, 125.0, 10.0);
        w.samples[200] = std::nan("");
        const double frac = invalid_fraction(w, cfg);
        CHECK(frac == doctest::Approx(0.1));
    }
    SUBCASE("rail-clipped windows count as invalid") {
        Waveform w = sine_wave(1.2, 125.0, 10.0);
        for (std::size_t i = 0; i < 125; ++i) w.samples[i] = i % 2 ? 4.0 : -4.0; // hard-clipped but not flat
        CHECK(invalid_fraction(w, cfg) >= 0.1);
    }
}

TEST_CASE("ecg polarity correction follows the skewness sign") {
    PreprocessConfig cfg;
    SegmentPair pair = synth_pair(clean_latent(), 10.0, 125.0);
    Waveform ecg = bandpass_filter(pair.ecg, 0.5, 40.0, cfg);
    ecg.modality = Modality::ECG;

    SUBCASE("upright beats stay put") {
        const auto [fixed, inverted] = correct_ecg_polarity(ecg);
        CHECK_FALSE(inverted);
        CHECK(fixed.samples == ecg.samples);
    }
    SUBCASE("negated input is flipped back") {
        Waveform flipped = ecg;
        for (auto& v : flipped.samples) v = -v;
        const auto [fixed, inverted] = correct_ecg_polarity(flipped);
        CHECK(inverted);
        for (std::size_t i = 0; i < ecg.samples.size(); ++i) {
            CHECK(fixed.samples[i] == doctest::Approx(ecg.samples[i]));
        }
    }
    SUBCASE("symmetric wave resolves to not-inverted") {
        const auto [fixed, inverted] = correct_ecg_polarity(sine_wave(1.0, 125.0, 10.0, Modality::ECG));
        CHECK_FALSE(inverted);
    }
}

TEST_CASE("ecg quality index separates beats from noise") {
    PreprocessConfig cfg;
    SUBCASE("clean synthetic beats at 60 bpm are accepted") {
        SegmentPair pair = synth_pair(clean_latent(60.0), 10.0, 125.0);
        Waveform ecg = bandpass_filter(pair.ecg, 0.5, 40.0, cfg);
        CHECK(ecg_quality_index(ecg) == SignalQuality::ACCEPT);
    }
    SUBCASE("white noise is rejected") {
        Rng rng(3);
        std::vector<double> x(1250);
        for (auto& v : x) v = rng.normal();
        Waveform noise = bandpass_filter(make_waveform(std::move(x), 125.0, Modality::ECG), 0.5, 40.0, cfg);
        // Spectral-power oracle: the 5-15 Hz share of 5-40 Hz power sits near
        // 10/35 for broadband noise, under the 0.5 gate.
        const double share = band_power(noise.samples, 125.0, 5.0, 15.0) / band_power(noise.samples, 125.0, 5.0, 40.0);
        CHECK(share < 0.5);
        CHECK(ecg_quality_index(noise) == SignalQuality::REJECT);
    }
    SUBCASE("all-zero signal is rejected") {
        CHECK(ecg_quality_index(make_waveform(std::vector<double>(1250, 0.0), 125.0, Modality::ECG)) ==
              SignalQuality::REJECT);
    }
}

TEST_CASE("zscore_normalize standardizes or rejects degenerate segments") {
    SUBCASE("non-constant segment lands on mean 0, std 1") {
        const Waveform z = zscore_normalize(sine_wave(1.3, 125.0, 10.0));
        CHECK(std::abs(mean(z.samples)) < 1e-6);
        CHECK(std::abs(standard_deviation(z.samples) - 1.0) < 1e-6);
    }
    SUBCASE("a positive affine transform normalizes identically") {
        const Waveform base = sine_wave(1.3, 125.0, 10.0);
        Waveform scaled = base;
        for (auto& v : scaled.samples) v = 3.5 * v + 11.0;
        const Waveform za = zscore_normalize(base);
        const Waveform zb = zscore_normalize(scaled);
        for (std::size_t i = 0; i < za.samples.size(); ++i) {
            CHECK(za.samples[i] == doctest::Approx(zb.samples[i]).epsilon(1e-9));
        }
    }
    SUBCASE("constant segment is a degenerate-segment error") {
        try {
            zscore_normalize(make_waveform(std::vector<double>(100, 5.0), 125.0));
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::DegenerateSegment);
        }
    }
}

TEST_CASE("pair pipeline keeps clean segments and drops bad ones as pairs") {
    PreprocessConfig cfg;
    CardiacLatent latent = clean_latent(72.0);
    latent.noise_std = 0.01;
    SegmentPair rec = synth_pair(latent, 60.0, 125.0);

    SUBCASE("60 s clean pair yields 6 conforming pairs") {
        const PreprocessResult result = preprocess_pair_pipeline(rec.ppg, rec.ecg, cfg);
        REQUIRE(result.pairs.size() == 6);
        for (const auto& pair : result.pairs) {
            CHECK(pair.ppg.size() == 1250);
            CHECK(pair.ecg.size() == 1250);
            CHECK(pair.ppg.sample_rate_hz == doctest::Approx(125.0));
            CHECK(pair.ppg.start_time_s == pair.ecg.start_time_s);
            CHECK(std::abs(mean(pair.ppg.samples)) < 1e-6);
            CHECK(std::abs(standard_deviation(pair.ecg.samples) - 1.0) < 1e-6);
            CHECK(pair.ppg.all_finite());
            CHECK(pair.ecg.all_finite());
        }
    }
    SUBCASE("a flat PPG window drops that pair only") {
        Waveform ppg = rec.ppg;
        for (std::size_t i = 2500; i < 3750; ++i) ppg.samples[i] = 0.42; // third window flat
        const PreprocessResult result = preprocess_pair_pipeline(ppg, rec.ecg, cfg);
        CHECK(result.pairs.size() == 5);
        REQUIRE(result.records.size() == 6);
        CHECK_FALSE(result.records[2].kept);
        CHECK(result.records[2].reason.find("ppg_invalid_fraction") != std::string::npos);
    }
    SUBCASE("a noise-only ECG window is dropped by the quality gate") {
        Waveform ecg = rec.ecg;
        Rng rng(9);
        for (std::size_t i = 1250; i < 2500; ++i) ecg.samples[i] = 0.8 * rng.normal();
        const PreprocessResult result = preprocess_pair_pipeline(rec.ppg, ecg, cfg);
        CHECK(result.pairs.size() == 5);
        REQUIRE(result.records.size() == 6);
        CHECK_FALSE(result.records[1].kept);
        CHECK(result.records[1].reason == "ecg_sqi=REJECT");
    }
    SUBCASE("empty recordings give an empty result") {
        Waveform empty_ppg = make_waveform({}, 125.0, Modality::PPG);
        Waveform empty_ecg = make_waveform({}, 125.0, Modality::ECG);
        CHECK(preprocess_pair_pipeline(empty_ppg, empty_ecg, cfg).pairs.empty());
    }
    SUBCASE("misaligned start times are rejected") {
        Waveform shifted = rec.ecg;
        shifted.start_time_s += 0.05; // > one sample at 125 Hz
        try {
            preprocess_pair_pipeline(rec.ppg, shifted, cfg);
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::DataError);
        }
    }
    SUBCASE("pipeline output is bit-identical across runs") {
        const PreprocessResult a = preprocess_pair_pipeline(rec.ppg, rec.ecg, cfg);
        const PreprocessResult b = preprocess_pair_pipeline(rec.ppg, rec.ecg, cfg);
        REQUIRE(a.pairs.size() == b.pairs.size());
        for (std::size_t i = 0; i < a.pairs.size(); ++i) {
            CHECK(a.pairs[i].ppg.samples == b.pairs[i].ppg.samples);
            CHECK(a.pairs[i].ecg.samples == b.pairs[i].ecg.samples);
        }
    }
    SUBCASE("native 500 Hz input resamples to 1250-sample pairs") {
        SegmentPair hi = synth_pair(clean_latent(72.0), 20.0, 500.0);
        const PreprocessResult result = preprocess_pair_pipeline(hi.ppg, hi.ecg, cfg);
        REQUIRE(result.pairs.size() == 2);
        CHECK(result.pairs[0].ppg.size() == 1250);
        CHECK(result.pairs[0].ecg.sample_rate_hz == doctest::Approx(125.0));
    }
}
