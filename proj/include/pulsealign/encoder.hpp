#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "pulsealign/nn.hpp"

namespace pulsealign {

// One row of the encoder plan. blocks == 0 denotes the stem conv unit;
// blocks == n >= 1 denotes a stage of one pooled unit followed by n-1
// unpooled units.
struct StageSpec {
    std::int64_t blocks = 0;
    std::int64_t c_in = 0;
    std::int64_t c_out = 0;

    bool operator==(const StageSpec&) const = default;
};

struct EncoderConfig {
    std::vector<StageSpec> stage_specs;
    std::int64_t input_length = 1250;
    std::int64_t se_reduction = 2;
    double dropout_p = 0.5;
    // Internal width of each residual unit as a fraction of its output
    // channels. 1.0 keeps the literal block definitions; the published
    // per-stage parameter budget is only consistent with a narrower internal
    // width, so the knob is exposed instead of silently changing either.
    double bottleneck_ratio = 1.0;

    // Full-size reference architecture (1024-dim embeddings).
    static EncoderConfig reference() {
        EncoderConfig cfg;
        cfg.stage_specs = {
            {0, 1, 64}, {2, 64, 64}, {2, 64, 160}, {2, 160, 160},
            {3, 160, 400}, {3, 400, 400}, {1, 400, 1024},
        };
        return cfg;
    }

    // Reduced-width variant with the same topology, sized so that full
    // contrastive runs finish in minutes on a CPU-only desktop.
    static EncoderConfig compact() {
        EncoderConfig cfg;
        cfg.stage_specs = {
            {0, 1, 12}, {2, 12, 12}, {2, 12, 24}, {2, 24, 24},
            {3, 24, 48}, {3, 48, 48}, {1, 48, 96},
        };
        return cfg;
    }

    std::int64_t embedding_dim() const {
        require(!stage_specs.empty(), ErrorKind::Config, "encoder has no stages");
        return stage_specs.back().c_out;
    }

    void validate() const {
        require(!stage_specs.empty(), ErrorKind::Config, "encoder has no stages");
        require(stage_specs.front().blocks == 0, ErrorKind::Config, "first stage spec must be the stem (blocks = 0)");
        require(input_length >= 2, ErrorKind::Config, "input_length too small");
        require(se_reduction >= 1, ErrorKind::Config, "se_reduction must be >= 1");
        require(dropout_p >= 0.0 && dropout_p < 1.0, ErrorKind::Config, "dropout_p must be in [0, 1)");
        require(bottleneck_ratio > 0.0 && bottleneck_ratio <= 1.0, ErrorKind::Config, "bottleneck_ratio must be in (0, 1]");
        for (std::size_t i = 0; i < stage_specs.size(); ++i) {
            const auto& s = stage_specs[i];
            require(s.c_in >= 1 && s.c_out >= 1, ErrorKind::Config, "stage channels must be positive");
            require(i == 0 || s.blocks >= 1, ErrorKind::Config, "only the first spec may be the stem");
            if (i > 0) {
                require(s.c_in == stage_specs[i - 1].c_out, ErrorKind::Config,
                        "channel mismatch between stage " + std::to_string(i - 1) + " and stage " + std::to_string(i));
            }
        }
    }

    bool operator==(const EncoderConfig&) const = default;
};

struct ProjectorConfig {
    std::int64_t in_dim = 1024;
    std::int64_t hidden_dim = 512;
    std::int64_t out_dim = 256;

    static ProjectorConfig for_embedding(std::int64_t embedding_dim) {
        return {embedding_dim, std::max<std::int64_t>(1, embedding_dim / 2), std::max<std::int64_t>(1, embedding_dim / 4)};
    }

    bool operator==(const ProjectorConfig&) const = default;
};

// Published budget for the reference architecture: the total and the
// per-row counts of the sequential summary (stem plus six stages). The
// literal stage arithmetic from the block definitions exceeds these rows;
// both are reported side by side wherever parameter counts are shown.
inline constexpr std::int64_t kPublishedReferenceTotal = 5850864;
inline constexpr std::array<std::int64_t, 7> kPublishedReferenceStageParams = {
    384, 32064, 156768, 172320, 1413720, 1510200, 2565408};

enum class Mode { kTrain, kEval };

enum class EmbeddingSpace { kEncoder, kShared };

template <typename S>
struct EmbeddingBatch {
    Tensor<S> values; // [N, D]
    EmbeddingSpace space = EmbeddingSpace::kEncoder;
};

template <typename S>
struct Net1dEncoder {
    EncoderConfig cfg;
    StemConvBlock<S> stem;
    std::vector<std::vector<ResidualUnit<S>>> stages;

    Net1dEncoder() = default;

    Net1dEncoder(const EncoderConfig& config, Rng& rng) : cfg(config) {
        cfg.validate();
        stem = StemConvBlock<S>(cfg.stage_specs[0].c_in, cfg.stage_specs[0].c_out, rng);
        for (std::size_t i = 1; i < cfg.stage_specs.size(); ++i) {
            const auto& spec = cfg.stage_specs[i];
            const std::int64_t mid = std::max<std::int64_t>(
                1, static_cast<std::int64_t>(std::llround(cfg.bottleneck_ratio * static_cast<double>(spec.c_out))));
            std::vector<ResidualUnit<S>> units;
            for (std::int64_t b = 0; b < spec.blocks; ++b) {
                const std::int64_t c_in = b == 0 ? spec.c_in : spec.c_out;
                units.emplace_back(c_in, spec.c_out, mid, cfg.se_reduction, cfg.dropout_p, /*pooled=*/b == 0, rng);
            }
            stages.push_back(std::move(units));
        }
    }

    // x: [B, 1, input_length] -> trunk output [B, C_last, L_last]. If
    // stage_shapes is given it receives the [C, L] shape after the stem and
    // after every stage.
    VarPtr<S> forward_trunk(Tape<S>& tape, const VarPtr<S>& x, Mode mode, Rng& rng,
                            std::vector<std::array<std::int64_t, 2>>* stage_shapes = nullptr) {
        const bool training = mode == Mode::kTrain;
        auto h = stem.forward(tape, x, training);
        if (stage_shapes) stage_shapes->push_back({h->value.dim(1), h->value.dim(2)});
        for (auto& stage : stages) {
            for (auto& unit : stage) h = unit.forward(tape, h, training, rng);
            if (stage_shapes) stage_shapes->push_back({h->value.dim(1), h->value.dim(2)});
        }
        return h;
    }

    // x: [B, 1, input_length] -> [B, embedding_dim] via temporal mean pooling.
    VarPtr<S> forward(Tape<S>& tape, const VarPtr<S>& x, Mode mode, Rng& rng,
                      std::vector<std::array<std::int64_t, 2>>* stage_shapes = nullptr) {
        require(x->value.rank() == 3 && x->value.dim(1) == cfg.stage_specs[0].c_in &&
                    x->value.dim(2) == cfg.input_length,
                ErrorKind::ShapeMismatch,
                "encoder input must be [B, " + std::to_string(cfg.stage_specs[0].c_in) + ", " +
                    std::to_string(cfg.input_length) + "], got " + x->value.shape_string());
        require(x->value.all_finite(), ErrorKind::Usage, "encoder input contains non-finite samples");
        return mean_over_time(tape, forward_trunk(tape, x, mode, rng, stage_shapes));
    }

    void collect(const std::string& prefix, std::vector<NamedParam<S>>& params, std::vector<NamedBuffer<S>>& buffers) {
        stem.collect(prefix + ".stem", params, buffers);
        for (std::size_t s = 0; s < stages.size(); ++s) {
            for (std::size_t b = 0; b < stages[s].size(); ++b) {
                stages[s][b].collect(prefix + ".stage" + std::to_string(s + 1) + ".unit" + std::to_string(b), params,
                                     buffers);
            }
        }
    }

    // Trainable scalars per stage-spec row (running stats excluded).
    std::vector<std::int64_t> stage_param_counts() {
        std::vector<std::int64_t> counts;
        {
            std::vector<NamedParam<S>> params;
            std::vector<NamedBuffer<S>> buffers;
            stem.collect("stem", params, buffers);
            counts.push_back(count_params(params));
        }
        for (auto& stage : stages) {
            std::vector<NamedParam<S>> params;
            std::vector<NamedBuffer<S>> buffers;
            for (auto& unit : stage) unit.collect("u", params, buffers);
            counts.push_back(count_params(params));
        }
        return counts;
    }

    std::int64_t param_count() {
        std::int64_t total = 0;
        for (auto c : stage_param_counts()) total += c;
        return total;
    }
};

template <typename S>
struct Projector {
    ProjectorConfig cfg;
    DenseLayer<S> narrow;
    DenseLayer<S> squeeze;

    Projector() = default;
    Projector(const ProjectorConfig& config, Rng& rng)
        : cfg(config), narrow(config.in_dim, config.hidden_dim, rng), squeeze(config.hidden_dim, config.out_dim, rng) {}

    // [N, in_dim] -> [N, out_dim] through an intermediate GELU.
    VarPtr<S> forward(Tape<S>& tape, const VarPtr<S>& z) const {
        return squeeze.forward(tape, gelu(tape, narrow.forward(tape, z)));
    }

    void collect(const std::string& prefix, std::vector<NamedParam<S>>& params, std::vector<NamedBuffer<S>>& buffers) {
        narrow.collect(prefix + ".narrow", params, buffers);
        squeeze.collect(prefix + ".squeeze", params, buffers);
    }
};

// Convenience wrappers matching the embedding-space bookkeeping.

template <typename S>
EmbeddingBatch<S> encoder_forward(Net1dEncoder<S>& encoder, const Tensor<S>& batch, Mode mode, Rng& rng) {
    require(batch.rank() == 2, ErrorKind::ShapeMismatch, "expected [N, L] signal batch");
    const std::int64_t n = batch.dim(0);
    require(n >= 1, ErrorKind::Usage, "empty batch");
    Tensor<S> x3 = batch;
    x3.shape = {n, 1, batch.dim(1)};
    Tape<S> tape;
    tape.recording = false;
    Rng local = rng;
    auto z = encoder.forward(tape, make_var(std::move(x3)), mode, local);
    return {std::move(z->value), EmbeddingSpace::kEncoder};
}

template <typename S>
EmbeddingBatch<S> projector_forward(const Projector<S>& projector, const EmbeddingBatch<S>& z) {
    require(z.space == EmbeddingSpace::kEncoder, ErrorKind::Usage,
            "projector expects encoder-space embeddings");
    require(z.values.rank() == 2 && z.values.dim(1) == projector.cfg.in_dim, ErrorKind::ShapeMismatch,
            "projector input dimension mismatch");
    Tape<S> tape;
    tape.recording = false;
    auto h = projector.forward(tape, make_var(Tensor<S>(z.values)));
    require(h->value.all_finite(), ErrorKind::NumericFailure, "projector produced non-finite values");
    return {std::move(h->value), EmbeddingSpace::kShared};
}

} // namespace pulsealign
