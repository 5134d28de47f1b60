#include <cstring>
#include <fstream>

#include "pulsealign/trainer.hpp"

namespace pulsealign {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_i64(std::string& out, std::int64_t v) { put_u64(out, static_cast<std::uint64_t>(v)); }

void put_f64(std::string& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    put_u64(out, bits);
}

void put_string(std::string& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.append(s);
}

void put_tensor(std::string& out, const Tensor<float>& t) {
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape) put_i64(out, d);
    const auto* bytes = reinterpret_cast<const unsigned char*>(t.ptr());
    // Floats are written little-endian byte by byte.
    for (std::int64_t i = 0; i < t.size(); ++i) {
        std::uint32_t bits;
        std::memcpy(&bits, t.ptr() + i, sizeof bits);
        put_u32(out, bits);
    }
    (void)bytes;
}

class Reader {
public:
    Reader(std::string data, std::string path) : data_(std::move(data)), path_(std::move(path)) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }

    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        pos_ += 8;
        return v;
    }

    std::int64_t i64() { return static_cast<std::int64_t>(u64()); }

    double f64() {
        const std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, sizeof v);
        return v;
    }

    std::string str() {
        const std::uint32_t len = u32();
        need(len);
        std::string s = data_.substr(pos_, len);
        pos_ += len;
        return s;
    }

    Tensor<float> tensor() {
        const std::uint32_t rank = u32();
        require(rank <= 4, ErrorKind::CorruptCheckpoint, path_ + ": implausible tensor rank");
        std::vector<std::int64_t> shape;
        for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(i64());
        Tensor<float> t(shape);
        for (std::int64_t i = 0; i < t.size(); ++i) {
            const std::uint32_t bits = u32();
            float v;
            std::memcpy(&v, &bits, sizeof v);
            t.at(i) = v;
        }
        return t;
    }

    const std::string& path() const { return path_; }

private:
    void need(std::size_t n) {
        require(pos_ + n <= data_.size(), ErrorKind::CorruptCheckpoint,
                path_ + ": checkpoint truncated at byte " + std::to_string(pos_));
    }

    std::string data_;
    std::string path_;
    std::size_t pos_ = 0;
};

void put_encoder_config(std::string& out, const EncoderConfig& cfg) {
    put_u32(out, static_cast<std::uint32_t>(cfg.stage_specs.size()));
    for (const auto& s : cfg.stage_specs) {
        put_i64(out, s.blocks);
        put_i64(out, s.c_in);
        put_i64(out, s.c_out);
    }
    put_i64(out, cfg.input_length);
    put_i64(out, cfg.se_reduction);
    put_f64(out, cfg.dropout_p);
    put_f64(out, cfg.bottleneck_ratio);
}

EncoderConfig read_encoder_config(Reader& in) {
    EncoderConfig cfg;
    const std::uint32_t n = in.u32();
    require(n <= 64, ErrorKind::CorruptCheckpoint, in.path() + ": implausible stage count");
    cfg.stage_specs.clear();
    for (std::uint32_t i = 0; i < n; ++i) {
        StageSpec s;
        s.blocks = in.i64();
        s.c_in = in.i64();
        s.c_out = in.i64();
        cfg.stage_specs.push_back(s);
    }
    cfg.input_length = in.i64();
    cfg.se_reduction = in.i64();
    cfg.dropout_p = in.f64();
    cfg.bottleneck_ratio = in.f64();
    return cfg;
}

} // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::string out;
    out.append(kCheckpointMagic, 4);
    put_u32(out, kCheckpointVersion);
    put_string(out, ckpt.kind);
    put_u64(out, ckpt.step);
    put_f64(out, ckpt.validation_loss);
    put_encoder_config(out, ckpt.encoder_config);
    put_i64(out, ckpt.projector_config.in_dim);
    put_i64(out, ckpt.projector_config.hidden_dim);
    put_i64(out, ckpt.projector_config.out_dim);
    put_i64(out, ckpt.label_dim);
    put_string(out, ckpt.rng_state);
    put_u32(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
    for (const auto& [name, tensor] : ckpt.tensors) {
        put_string(out, name);
        put_tensor(out, tensor);
    }

    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    require(file.good(), ErrorKind::Io, "cannot open for writing: " + path);
    file.write(out.data(), static_cast<std::streamsize>(out.size()));
    file.flush();
    require(file.good(), ErrorKind::Io, "write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    require(file.good(), ErrorKind::Io, "cannot open: " + path);
    std::string data((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());

    require(data.size() >= 8, ErrorKind::CorruptCheckpoint, path + ": file too small for a checkpoint header");
    require(std::memcmp(data.data(), kCheckpointMagic, 4) == 0, ErrorKind::CorruptCheckpoint,
            path + ": expected magic \"APCK\"");
    Reader in(std::move(data), path);
    in.u32(); // magic, already checked
    const std::uint32_t version = in.u32();
    require(version == kCheckpointVersion, ErrorKind::VersionMismatch,
            path + ": checkpoint version " + std::to_string(version) + ", supported " +
                std::to_string(kCheckpointVersion));

    Checkpoint ckpt;
    ckpt.kind = in.str();
    require(ckpt.kind == "dual" || ckpt.kind == "multilabel", ErrorKind::CorruptCheckpoint,
            path + ": unknown checkpoint kind '" + ckpt.kind + "'");
    ckpt.step = in.u64();
    ckpt.validation_loss = in.f64();
    ckpt.encoder_config = read_encoder_config(in);
    ckpt.projector_config.in_dim = in.i64();
    ckpt.projector_config.hidden_dim = in.i64();
    ckpt.projector_config.out_dim = in.i64();
    ckpt.label_dim = in.i64();
    ckpt.rng_state = in.str();
    const std::uint32_t tensor_count = in.u32();
    for (std::uint32_t i = 0; i < tensor_count; ++i) {
        std::string name = in.str();
        ckpt.tensors.emplace_back(std::move(name), in.tensor());
    }
    return ckpt;
}

void require_encoder_config_match(const EncoderConfig& got, const EncoderConfig& expected) {
    require(got.stage_specs.size() == expected.stage_specs.size(), ErrorKind::ConfigMismatch,
            "stage_specs has " + std::to_string(got.stage_specs.size()) + " entries, expected " +
                std::to_string(expected.stage_specs.size()));
    for (std::size_t i = 0; i < got.stage_specs.size(); ++i) {
        const auto& g = got.stage_specs[i];
        const auto& e = expected.stage_specs[i];
        require(g.blocks == e.blocks, ErrorKind::ConfigMismatch,
                "stage_specs[" + std::to_string(i) + "].blocks differs: " + std::to_string(g.blocks) + " vs " +
                    std::to_string(e.blocks));
        require(g.c_in == e.c_in, ErrorKind::ConfigMismatch,
                "stage_specs[" + std::to_string(i) + "].c_in differs: " + std::to_string(g.c_in) + " vs " +
                    std::to_string(e.c_in));
        require(g.c_out == e.c_out, ErrorKind::ConfigMismatch,
                "stage_specs[" + std::to_string(i) + "].c_out differs: " + std::to_string(g.c_out) + " vs " +
                    std::to_string(e.c_out));
    }
    require(got.input_length == expected.input_length, ErrorKind::ConfigMismatch,
            "input_length differs: " + std::to_string(got.input_length) + " vs " +
                std::to_string(expected.input_length));
    require(got.se_reduction == expected.se_reduction, ErrorKind::ConfigMismatch,
            "se_reduction differs: " + std::to_string(got.se_reduction) + " vs " +
                std::to_string(expected.se_reduction));
    require(got.dropout_p == expected.dropout_p, ErrorKind::ConfigMismatch, "dropout_p differs");
    require(got.bottleneck_ratio == expected.bottleneck_ratio, ErrorKind::ConfigMismatch, "bottleneck_ratio differs");
}

} // namespace pulsealign
