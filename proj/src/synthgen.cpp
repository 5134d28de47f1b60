#include "pulsealign/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pulsealign/rng.hpp"

namespace pulsealign {

namespace {

// QRS-like complex: a dominant upright peak with small flanking deflections
// and a broad repolarization wave, all analytic Gaussians.
struct EcgComponent {
    double offset_s;
    double sigma_s;
    double amplitude;
};

constexpr EcgComponent kEcgShape[] = {
    {-0.035, 0.012, -0.12}, // Q
    {0.0, 0.012, 1.0},      // R
    {0.035, 0.014, -0.18},  // S
    {0.22, 0.050, 0.28},    // T
};

void add_gaussian(std::vector<double>& x, double rate, double center_s, double sigma_s, double amplitude) {
    const double half = 5.0 * sigma_s;
    const std::int64_t i0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil((center_s - half) * rate)));
    const std::int64_t i1 =
        std::min<std::int64_t>(static_cast<std::int64_t>(x.size()) - 1,
                               static_cast<std::int64_t>(std::floor((center_s + half) * rate)));
    for (std::int64_t i = i0; i <= i1; ++i) {
        const double dt = static_cast<double>(i) / rate - center_s;
        x[static_cast<std::size_t>(i)] += amplitude * std::exp(-0.5 * dt * dt / (sigma_s * sigma_s));
    }
}

// Log-normal-shaped pulse: steep upstroke, slow decay. Mode near 0.18 s.
void add_pulse(std::vector<double>& x, double rate, double onset_s, double amplitude) {
    constexpr double kMode = 0.18;
    constexpr double kWidth = 0.45;
    constexpr double kSupport = 1.2;
    const std::int64_t i0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(onset_s * rate)) + 1);
    const std::int64_t i1 =
        std::min<std::int64_t>(static_cast<std::int64_t>(x.size()) - 1,
                               static_cast<std::int64_t>(std::floor((onset_s + kSupport) * rate)));
    for (std::int64_t i = i0; i <= i1; ++i) {
        const double u = static_cast<double>(i) / rate - onset_s;
        if (u <= 0.0) continue;
        const double logterm = std::log(u / kMode) / kWidth;
        x[static_cast<std::size_t>(i)] += amplitude * std::exp(-0.5 * logterm * logterm);
    }
}

std::vector<double> beat_times(const CardiacLatent& latent, double duration_s, Rng& rng) {
    const double period = 60.0 / latent.heart_rate_bpm;
    std::vector<double> beats;
    // Start left of the window so edge pulses are complete.
    double t = -2.0 - rng.uniform01() * period;
    while (t < duration_s + 1.0) {
        beats.push_back(t);
        double interval = period + latent.hrv_jitter_s * rng.normal();
        if (latent.rhythm == Rhythm::IRREGULAR) {
            interval += 0.2 * period * rng.student_t(3);
        }
        interval = std::clamp(interval, 0.25, 2.0);
        t += interval;
    }
    return beats;
}

} // namespace

std::vector<double> latent_beat_times(const CardiacLatent& latent, double duration_s) {
    latent.validate();
    Rng rng(latent.seed);
    std::vector<double> beats = beat_times(latent, duration_s, rng);
    std::vector<double> inside;
    for (double b : beats) {
        if (b >= 0.0 && b < duration_s) inside.push_back(b);
    }
    return inside;
}

SegmentPair synth_pair(const CardiacLatent& latent, double duration_s, double rate_hz) {
    latent.validate();
    require(rate_hz > 0.0, ErrorKind::Config, "rate must be positive");
    require(duration_s >= 60.0 / latent.heart_rate_bpm, ErrorKind::Config,
            "duration must cover at least one beat period");

    const std::int64_t n = std::llround(duration_s * rate_hz);
    Rng rng(latent.seed);
    const std::vector<double> beats = beat_times(latent, duration_s, rng);

    std::vector<double> ecg(static_cast<std::size_t>(n), 0.0);
    std::vector<double> ppg(static_cast<std::size_t>(n), 0.0);
    for (double beat : beats) {
        for (const auto& c : kEcgShape) add_gaussian(ecg, rate_hz, beat + c.offset_s, c.sigma_s, c.amplitude);
        add_pulse(ppg, rate_hz, beat + latent.pulse_transit_delay_s, 1.0);
    }
    if (latent.noise_std > 0.0) {
        for (auto& v : ppg) v += latent.noise_std * rng.normal();
        for (auto& v : ecg) v += latent.noise_std * rng.normal();
    }

    SegmentPair pair;
    pair.ppg.samples = std::move(ppg);
    pair.ppg.sample_rate_hz = rate_hz;
    pair.ppg.modality = Modality::PPG;
    pair.ppg.source_id = "synth";
    pair.ecg.samples = std::move(ecg);
    pair.ecg.sample_rate_hz = rate_hz;
    pair.ecg.modality = Modality::ECG;
    pair.ecg.source_id = "synth";
    return pair;
}

SynthDataset synth_dataset(std::int64_t n_pairs, const LatentDistribution& dist, double duration_s, double rate_hz,
                           std::uint64_t seed) {
    require(n_pairs >= 1, ErrorKind::Config, "n_pairs must be >= 1");
    SynthDataset out;
    out.pairs.reserve(static_cast<std::size_t>(n_pairs));
    const Rng master(seed);
    for (std::int64_t i = 0; i < n_pairs; ++i) {
        Rng draw = master.fork(static_cast<std::uint64_t>(i));
        CardiacLatent latent;
        latent.heart_rate_bpm = draw.uniform(dist.heart_rate_bpm.first, dist.heart_rate_bpm.second);
        latent.rhythm = draw.bernoulli(dist.p_irregular) ? Rhythm::IRREGULAR : Rhythm::REGULAR;
        latent.hrv_jitter_s = draw.uniform(dist.hrv_jitter_s.first, dist.hrv_jitter_s.second);
        latent.pulse_transit_delay_s =
            draw.uniform(dist.pulse_transit_delay_s.first, dist.pulse_transit_delay_s.second);
        latent.noise_std = draw.uniform(dist.noise_std.first, dist.noise_std.second);
        latent.seed = draw.next_u64();

        SegmentPair pair = synth_pair(latent, duration_s, rate_hz);
        pair.pair_id = i;
        pair.ppg.source_id = "synth#" + std::to_string(i);
        pair.ecg.source_id = "synth#" + std::to_string(i);
        out.pairs.push_back(std::move(pair));

        PairLabel label;
        label.index = i;
        label.heart_rate_bpm = latent.heart_rate_bpm;
        label.irregular = latent.rhythm == Rhythm::IRREGULAR;
        label.hrv_jitter_s = latent.hrv_jitter_s;
        label.pulse_transit_delay_s = latent.pulse_transit_delay_s;
        label.noise_std = latent.noise_std;
        out.labels.push_back(label);
    }
    return out;
}

SynthDataset write_synth_dataset(std::int64_t n_pairs, const LatentDistribution& dist, double duration_s,
                                 double rate_hz, std::uint64_t seed, const std::string& out_dir) {
    SynthDataset data = synth_dataset(n_pairs, dist, duration_s, rate_hz, seed);
    std::filesystem::create_directories(out_dir);
    std::vector<Waveform> ppg, ecg;
    ppg.reserve(data.pairs.size());
    ecg.reserve(data.pairs.size());
    for (const auto& pair : data.pairs) {
        ppg.push_back(pair.ppg);
        ecg.push_back(pair.ecg);
    }
    write_store(ppg, out_dir + "/ppg.apss", Modality::PPG, rate_hz);
    write_store(ecg, out_dir + "/ecg.apss", Modality::ECG, rate_hz);
    write_labels_csv(data.labels, out_dir + "/labels.csv");
    return data;
}

void write_labels_csv(const std::vector<PairLabel>& labels, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    require(out.good(), ErrorKind::Io, "cannot open for writing: " + path);
    out << "pair_index,heart_rate_bpm,rhythm_irregular,hrv_jitter_s,pulse_transit_delay_s,noise_std\n";
    out.precision(17);
    for (const auto& l : labels) {
        out << l.index << ',' << l.heart_rate_bpm << ',' << (l.irregular ? 1 : 0) << ',' << l.hrv_jitter_s << ','
            << l.pulse_transit_delay_s << ',' << l.noise_std << '\n';
    }
    require(out.good(), ErrorKind::Io, "write failed: " + path);
}

std::vector<PairLabel> read_labels_csv(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), ErrorKind::Io, "cannot open: " + path);
    std::vector<PairLabel> labels;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (header) {
            header = false;
            continue;
        }
        std::istringstream row(line);
        PairLabel l;
        char comma;
        int irregular = 0;
        row >> l.index >> comma >> l.heart_rate_bpm >> comma >> irregular >> comma >> l.hrv_jitter_s >> comma >>
            l.pulse_transit_delay_s >> comma >> l.noise_std;
        require(!row.fail(), ErrorKind::DataError, path + ": malformed label row: " + line);
        l.irregular = irregular != 0;
        labels.push_back(l);
    }
    return labels;
}

} // namespace pulsealign
