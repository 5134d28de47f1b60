#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "pulsealign/ops.hpp"

namespace pulsealign {

// Kaiming-uniform fan-in initialization; biases start at zero.
template <typename S>
void init_kaiming_uniform(Tensor<S>& weight, std::int64_t fan_in, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (auto& w : weight.data) w = static_cast<S>(rng.uniform(-bound, bound));
}

template <typename S>
struct Conv1dLayer {
    VarPtr<S> weight; // [Co, Ci, K]
    VarPtr<S> bias;   // [Co]
    int pad = 0;

    Conv1dLayer() = default;
    Conv1dLayer(std::int64_t c_in, std::int64_t c_out, std::int64_t kernel, int pad_in, Rng& rng) : pad(pad_in) {
        Tensor<S> w({c_out, c_in, kernel});
        init_kaiming_uniform(w, c_in * kernel, rng);
        weight = make_param(std::move(w));
        bias = make_param(Tensor<S>({c_out}));
    }

    VarPtr<S> forward(Tape<S>& tape, const VarPtr<S>& x) const { return conv1d(tape, x, weight, bias, pad); }

    void collect(const std::string& prefix, std::vector<NamedParam<S>>& params, std::vector<NamedBuffer<S>>&) {
        params.push_back({prefix + ".weight", weight, true});
        params.push_back({prefix + ".bias", bias, true});
    }
};

template <typename S>
struct BatchNorm1dLayer {
    VarPtr<S> scale; // gamma
    VarPtr<S> shift; // beta
    Tensor<S> running_mean;
    Tensor<S> running_var;
    double momentum = 0.1;
    double eps = 1e-5;

    BatchNorm1dLayer() = default;
    explicit BatchNorm1dLayer(std::int64_t channels)
        : scale(make_param(Tensor<S>::full({channels}, S(1)))),
          shift(make_param(Tensor<S>({channels}))),
          running_mean(Tensor<S>({channels})),
          running_var(Tensor<S>::full({channels}, S(1))) {}

    VarPtr<S> forward(Tape<S>& tape, const VarPtr<S>& x, bool training) {
        return batchnorm1d(tape, x, scale, shift, running_mean, running_var, training, momentum, eps);
    }

    void collect(const std::string& prefix, std::vector<NamedParam<S>>& params, std::vector<NamedBuffer<S>>& buffers) {
        params.push_back({prefix + ".scale", scale, false});
        params.push_back({prefix + ".shift", shift, false});
        buffers.push_back({prefix + ".running_mean", &running_mean});
        buffers.push_back({prefix + ".running_var", &running_var});
    }
};

template <typename S>
struct DenseLayer {
    VarPtr<S> weight; // [O, D]
    VarPtr<S> bias;   // [O]

    DenseLayer() = default;
    DenseLayer(std::int64_t in_dim, std::int64_t out_dim, Rng& rng) {
        Tensor<S> w({out_dim, in_dim});
        init_kaiming_uniform(w, in_dim, rng);
        weight = make_param(std::move(w));
        bias = make_param(Tensor<S>({out_dim}));
    }

    VarPtr<S> forward(Tape<S>& tape, const VarPtr<S>& x) const { return dense(tape, x, weight, bias); }

    void collect(const std::string& prefix, std::vector<NamedParam<S>>& params, std::vector<NamedBuffer<S>>&) {
        params.push_back({prefix + ".weight", weight, true});
        params.push_back({prefix + ".bias", bias, true});
    }
};

// Channel gating from globally pooled features through a bottleneck.
template <typename S>
struct SqueezeExciteLayer {
    DenseLayer<S> reduce;
    DenseLayer<S> expand;

    SqueezeExciteLayer() = default;
    SqueezeExciteLayer(std::int64_t channels, std::int64_t reduction, Rng& rng)
        : reduce(channels, std::max<std::int64_t>(1, channels / reduction), rng),
          expand(std::max<std::int64_t>(1, channels / reduction), channels, rng) {}

    VarPtr<S> forward(Tape<S>& tape, const VarPtr<S>& x) const {
        auto pooled = mean_over_time(tape, x);
        auto hidden = swish(tape, reduce.forward(tape, pooled));
        auto gate = sigmoid(tape, expand.forward(tape, hidden));
        return channel_scale(tape, x, gate);
    }

    void collect(const std::string& prefix, std::vector<NamedParam<S>>& params, std::vector<NamedBuffer<S>>& buffers) {
        reduce.collect(prefix + ".reduce", params, buffers);
        expand.collect(prefix + ".expand", params, buffers);
    }
};

// Pre-activation unit: BN -> Swish -> Dropout -> Conv. kernel 1 or 3.
template <typename S>
struct PreactConvBlock {
    BatchNorm1dLayer<S> norm;
    Conv1dLayer<S> conv;
    double dropout_p = 0.5;

    PreactConvBlock() = default;
    PreactConvBlock(std::int64_t c_in, std::int64_t c_out, std::int64_t kernel, double dropout, Rng& rng)
        : norm(c_in), conv(c_in, c_out, kernel, kernel == 3 ? 1 : 0, rng), dropout_p(dropout) {}

    VarPtr<S> forward(Tape<S>& tape, const VarPtr<S>& x, bool training, Rng& rng) {
        auto h = norm.forward(tape, x, training);
        h = swish(tape, h);
        h = dropout(tape, h, dropout_p, training, rng);
        return conv.forward(tape, h);
    }

    void collect(const std::string& prefix, std::vector<NamedParam<S>>& params, std::vector<NamedBuffer<S>>& buffers) {
        norm.collect(prefix + ".norm", params, buffers);
        conv.collect(prefix + ".conv", params, buffers);
    }
};

// Stem unit: Conv -> BN -> Swish. BN runs over the conv output channels.
template <typename S>
struct StemConvBlock {
    Conv1dLayer<S> conv;
    BatchNorm1dLayer<S> norm;

    StemConvBlock() = default;
    StemConvBlock(std::int64_t c_in, std::int64_t c_out, Rng& rng) : conv(c_in, c_out, 3, 1, rng), norm(c_out) {}

    VarPtr<S> forward(Tape<S>& tape, const VarPtr<S>& x, bool training) {
        return swish(tape, norm.forward(tape, conv.forward(tape, x), training));
    }

    void collect(const std::string& prefix, std::vector<NamedParam<S>>& params, std::vector<NamedBuffer<S>>& buffers) {
        conv.collect(prefix + ".conv", params, buffers);
        norm.collect(prefix + ".norm", params, buffers);
    }
};

// Three conv units plus SE gating; the pooled variant halves the length.
template <typename S>
struct ResidualUnit {
    PreactConvBlock<S> entry;   // kernel 1, c_in -> mid
    PreactConvBlock<S> middle;  // kernel 3, mid -> mid
    PreactConvBlock<S> exit;    // kernel 1, mid -> c_out
    SqueezeExciteLayer<S> se;
    bool pooled = false;

    ResidualUnit() = default;
    ResidualUnit(std::int64_t c_in, std::int64_t c_out, std::int64_t mid, std::int64_t se_reduction,
                 double dropout, bool pooled_in, Rng& rng)
        : entry(c_in, mid, 1, dropout, rng),
          middle(mid, mid, 3, dropout, rng),
          exit(mid, c_out, 1, dropout, rng),
          se(c_out, se_reduction, rng),
          pooled(pooled_in) {}

    VarPtr<S> forward(Tape<S>& tape, const VarPtr<S>& x, bool training, Rng& rng) {
        auto h = entry.forward(tape, x, training, rng);
        h = middle.forward(tape, h, training, rng);
        h = exit.forward(tape, h, training, rng);
        h = se.forward(tape, h);
        if (pooled) h = maxpool1d_k2(tape, h);
        return h;
    }

    void collect(const std::string& prefix, std::vector<NamedParam<S>>& params, std::vector<NamedBuffer<S>>& buffers) {
        entry.collect(prefix + ".entry", params, buffers);
        middle.collect(prefix + ".middle", params, buffers);
        exit.collect(prefix + ".exit", params, buffers);
        se.collect(prefix + ".se", params, buffers);
    }
};

template <typename S>
std::int64_t count_params(const std::vector<NamedParam<S>>& params) {
    std::int64_t n = 0;
    for (const auto& p : params) n += p.var->value.size();
    return n;
}

} // namespace pulsealign
