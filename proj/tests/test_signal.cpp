#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "pulsealign/rng.hpp"
#include "pulsealign/signal.hpp"

using namespace pulsealign;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

Waveform make_segment(Rng& rng, std::int64_t n, Modality m, double rate) {
    Waveform w;
    w.modality = m;
    w.sample_rate_hz = rate;
    w.samples.resize(static_cast<std::size_t>(n));
    for (auto& v : w.samples) v = static_cast<double>(static_cast<float>(rng.normal()));
    return w;
}

} // namespace

TEST_CASE("store: empty list writes a valid zero-count store") {
    const std::string path = temp_path("pa_empty.apss");
    const SegmentStoreInfo info = write_store({}, path, Modality::ECG, 125.0, 0);
    CHECK(info.segment_count == 0);
    const SegmentStoreInfo read = read_store_info(path);
    CHECK(read.segment_count == 0);
    CHECK(read.modality == Modality::ECG);
    CHECK(read_store(path).empty());
}

TEST_CASE("store: payload size follows the header arithmetic") {
    Rng rng(1);
    std::vector<Waveform> segments;
    for (int i = 0; i < 3; ++i) segments.push_back(make_segment(rng, 1250, Modality::PPG, 125.0));
    const std::string path = temp_path("pa_three.apss");
    write_store(segments, path);
    CHECK(std::filesystem::file_size(path) == 24 + 15000 * 4);
}

TEST_CASE("store: write/read round trip is the identity on float32 data") {
    Rng rng(7);
    std::vector<Waveform> segments;
    for (int i = 0; i < 100; ++i) segments.push_back(make_segment(rng, 64, Modality::ECG, 125.0));
    const std::string path = temp_path("pa_roundtrip.apss");
    write_store(segments, path);
    const std::vector<Waveform> back = read_store(path);
    REQUIRE(back.size() == segments.size());
    for (std::size_t s = 0; s < segments.size(); ++s) {
        CHECK(back[s].modality == Modality::ECG);
        CHECK(back[s].sample_rate_hz == doctest::Approx(125.0));
        REQUIRE(back[s].samples.size() == segments[s].samples.size());
        for (std::size_t i = 0; i < segments[s].samples.size(); ++i) {
            CHECK(back[s].samples[i] == segments[s].samples[i]); // bit-exact
        }
    }
}

TEST_CASE("store: heterogeneous segments are rejected with the offender index") {
    Rng rng(2);
    std::vector<Waveform> segments;
    segments.push_back(make_segment(rng, 32, Modality::PPG, 125.0));
    segments.push_back(make_segment(rng, 32, Modality::PPG, 125.0));
    segments.push_back(make_segment(rng, 33, Modality::PPG, 125.0));
    try {
        write_store(segments, temp_path("pa_hetero.apss"));
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::HeterogeneousData);
        CHECK(std::string(e.what()).find("segment 2") != std::string::npos);
    }
}

TEST_CASE("store: bad magic and truncation are distinct error kinds") {
    Rng rng(3);
    const std::string path = temp_path("pa_corrupt.apss");
    write_store({make_segment(rng, 16, Modality::PPG, 125.0)}, path);

    SUBCASE("bad magic") {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.write("XXXX", 4);
        f.close();
        CHECK_THROWS_WITH_AS(read_store(path), doctest::Contains("magic"), Error);
        try {
            read_store(path);
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::BadMagic);
        }
    }
    SUBCASE("version mismatch") {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(4);
        const char bogus[4] = {9, 0, 0, 0};
        f.write(bogus, 4);
        f.close();
        try {
            read_store(path);
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::VersionMismatch);
        }
    }
    SUBCASE("truncated payload names expected and actual sizes") {
        const auto full = std::filesystem::file_size(path);
        std::filesystem::resize_file(path, full - 4);
        try {
            read_store(path);
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Truncated);
            const std::string msg = e.what();
            CHECK(msg.find(std::to_string(full)) != std::string::npos);
            CHECK(msg.find(std::to_string(full - 4)) != std::string::npos);
        }
    }
}

TEST_CASE("store: missing file surfaces an io error with the path") {
    try {
        read_store("/nonexistent/pa.apss");
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Io);
        CHECK(std::string(e.what()).find("/nonexistent/pa.apss") != std::string::npos);
    }
}
