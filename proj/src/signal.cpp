#include "pulsealign/signal.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace pulsealign {

namespace {

void put_u32_le(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_f32_le(std::string& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    put_u32_le(out, bits);
}

std::uint32_t get_u32_le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

float get_f32_le(const unsigned char* p) {
    const std::uint32_t bits = get_u32_le(p);
    float v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
}

constexpr std::size_t kHeaderBytes = 24;

} // namespace

bool Waveform::all_finite() const {
    for (double v : samples) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

SegmentStoreInfo write_store(const std::vector<Waveform>& segments, const std::string& path,
                             Modality fallback_modality, double fallback_rate_hz, std::int64_t fallback_length) {
    SegmentStoreInfo info;
    if (segments.empty()) {
        info.modality = fallback_modality;
        info.sample_rate_hz = fallback_rate_hz;
        info.segment_length = fallback_length;
        info.segment_count = 0;
    } else {
        const Waveform& first = segments.front();
        first.validate();
        info.modality = first.modality;
        info.sample_rate_hz = first.sample_rate_hz;
        info.segment_length = first.size();
        info.segment_count = static_cast<std::int64_t>(segments.size());
        for (std::size_t i = 1; i < segments.size(); ++i) {
            const Waveform& seg = segments[i];
            const bool ok = seg.modality == info.modality && seg.sample_rate_hz == info.sample_rate_hz &&
                            seg.size() == info.segment_length;
            require(ok, ErrorKind::HeterogeneousData,
                    "segment " + std::to_string(i) + " does not match the first segment (modality/rate/length)");
        }
    }

    std::string buffer;
    buffer.reserve(kHeaderBytes + static_cast<std::size_t>(info.segment_count * info.segment_length) * 4);
    buffer.append(kStoreMagic, 4);
    put_u32_le(buffer, kStoreVersion);
    put_u32_le(buffer, static_cast<std::uint32_t>(info.modality));
    put_f32_le(buffer, static_cast<float>(info.sample_rate_hz));
    put_u32_le(buffer, static_cast<std::uint32_t>(info.segment_length));
    put_u32_le(buffer, static_cast<std::uint32_t>(info.segment_count));
    for (const Waveform& seg : segments) {
        for (double v : seg.samples) put_f32_le(buffer, static_cast<float>(v));
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(out.good(), ErrorKind::Io, "cannot open for writing: " + path);
    out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
    out.flush();
    require(out.good(), ErrorKind::Io, "write failed: " + path);
    return info;
}

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrorKind::Io, "cannot open: " + path);
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    require(!in.bad(), ErrorKind::Io, "read failed: " + path);
    return data;
}

SegmentStoreInfo parse_header(const std::string& data, const std::string& path) {
    require(data.size() >= kHeaderBytes, ErrorKind::Truncated,
            path + ": file holds " + std::to_string(data.size()) + " bytes, header needs " +
                std::to_string(kHeaderBytes));
    require(std::memcmp(data.data(), kStoreMagic, 4) == 0, ErrorKind::BadMagic,
            path + ": expected magic \"APSS\", found \"" + data.substr(0, 4) + "\"");
    const auto* p = reinterpret_cast<const unsigned char*>(data.data());
    const std::uint32_t version = get_u32_le(p + 4);
    require(version == kStoreVersion, ErrorKind::VersionMismatch,
            path + ": store version " + std::to_string(version) + ", supported " + std::to_string(kStoreVersion));
    const std::uint32_t modality_code = get_u32_le(p + 8);
    require(modality_code <= 1, ErrorKind::CorruptCheckpoint,
            path + ": unknown modality code " + std::to_string(modality_code));
    SegmentStoreInfo info;
    info.modality = static_cast<Modality>(modality_code);
    info.sample_rate_hz = static_cast<double>(get_f32_le(p + 12));
    info.segment_length = get_u32_le(p + 16);
    info.segment_count = get_u32_le(p + 20);
    const std::size_t expected = kHeaderBytes + static_cast<std::size_t>(info.segment_count) *
                                                    static_cast<std::size_t>(info.segment_length) * 4;
    require(data.size() >= expected, ErrorKind::Truncated,
            path + ": payload expects " + std::to_string(expected) + " bytes, file holds " +
                std::to_string(data.size()));
    return info;
}

} // namespace

SegmentStoreInfo read_store_info(const std::string& path) {
    const std::string data = read_file(path);
    return parse_header(data, path);
}

std::vector<Waveform> read_store(const std::string& path) {
    const std::string data = read_file(path);
    const SegmentStoreInfo info = parse_header(data, path);
    std::vector<Waveform> segments;
    segments.reserve(static_cast<std::size_t>(info.segment_count));
    const auto* p = reinterpret_cast<const unsigned char*>(data.data()) + kHeaderBytes;
    for (std::int64_t s = 0; s < info.segment_count; ++s) {
        Waveform w;
        w.modality = info.modality;
        w.sample_rate_hz = info.sample_rate_hz;
        w.source_id = path + "#" + std::to_string(s);
        w.samples.resize(static_cast<std::size_t>(info.segment_length));
        for (std::int64_t i = 0; i < info.segment_length; ++i) {
            w.samples[static_cast<std::size_t>(i)] = static_cast<double>(get_f32_le(p + (s * info.segment_length + i) * 4));
        }
        segments.push_back(std::move(w));
    }
    return segments;
}

} // namespace pulsealign
