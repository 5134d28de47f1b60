#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>

#include "pulsealign/rng.hpp"
#include "pulsealign/tape.hpp"
#include "pulsealign/threading.hpp"

// Differentiable tensor ops. Conventions:
//  - forward writes a fresh output Var; backward steps accumulate (+=) into
//    input .grad buffers, so disconnected parameters keep zero gradients;
//  - every parallel loop splits independent output elements only, and each
//    reduction runs in a fixed order, so results do not depend on the thread
//    count;
//  - reductions accumulate in double regardless of the scalar type.

namespace pulsealign {

template <typename S>
using MatRM = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using MapMat = Eigen::Map<MatRM<S>>;
template <typename S>
using CMapMat = Eigen::Map<const MatRM<S>>;

namespace detail {

template <typename S>
inline S sigmoid_scalar(S x) {
    return x >= S(0) ? S(1) / (S(1) + std::exp(-x)) : std::exp(x) / (S(1) + std::exp(x));
}

template <typename S>
using ArrayMap = Eigen::Map<Eigen::Array<S, Eigen::Dynamic, 1>>;
template <typename S>
using CArrayMap = Eigen::Map<const Eigen::Array<S, Eigen::Dynamic, 1>>;

} // namespace detail

// ---------------------------------------------------------------------------
// Elementwise activations (vectorized via Eigen array expressions)
// ---------------------------------------------------------------------------

template <typename S>
VarPtr<S> swish(Tape<S>& tape, const VarPtr<S>& x) {
    auto y = make_var(Tensor<S>(x->value.shape));
    const std::int64_t n = x->value.size();
    const S* xp = x->value.ptr();
    S* yp = y->value.ptr();
    parallel_chunks(n, [&](std::int64_t b, std::int64_t e) {
        detail::CArrayMap<S> in(xp + b, e - b);
        detail::ArrayMap<S> out(yp + b, e - b);
        out = in / (S(1) + (-in).exp());
    });
    tape.push([x, y, n] {
        const S* xv = x->value.ptr();
        const S* gy = y->grad.ptr();
        S* gx = x->grad.ptr();
        parallel_chunks(n, [&](std::int64_t b, std::int64_t e) {
            detail::CArrayMap<S> in(xv + b, e - b);
            detail::CArrayMap<S> g(gy + b, e - b);
            detail::ArrayMap<S> out(gx + b, e - b);
            const auto s = S(1) / (S(1) + (-in).exp());
            out += g * s * (S(1) + in * (S(1) - s));
        });
    });
    return y;
}

template <typename S>
VarPtr<S> gelu(Tape<S>& tape, const VarPtr<S>& x) {
    auto y = make_var(Tensor<S>(x->value.shape));
    const std::int64_t n = x->value.size();
    const S* xp = x->value.ptr();
    S* yp = y->value.ptr();
    constexpr double kInvSqrt2 = 0.7071067811865475244;
    parallel_chunks(n, [&](std::int64_t b, std::int64_t e) {
        for (std::int64_t i = b; i < e; ++i) {
            const double v = static_cast<double>(xp[i]);
            yp[i] = static_cast<S>(0.5 * v * (1.0 + std::erf(v * kInvSqrt2)));
        }
    });
    tape.push([x, y, n] {
        const S* xv = x->value.ptr();
        const S* gy = y->grad.ptr();
        S* gx = x->grad.ptr();
        constexpr double kInvSqrt2Pi = 0.3989422804014326779;
        parallel_chunks(n, [&](std::int64_t b, std::int64_t e) {
            for (std::int64_t i = b; i < e; ++i) {
                const double v = static_cast<double>(xv[i]);
                const double cdf = 0.5 * (1.0 + std::erf(v * 0.7071067811865475244));
                const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
                gx[i] += gy[i] * static_cast<S>(cdf + v * pdf);
            }
        });
    });
    return y;
}

template <typename S>
VarPtr<S> sigmoid(Tape<S>& tape, const VarPtr<S>& x) {
    auto y = make_var(Tensor<S>(x->value.shape));
    const std::int64_t n = x->value.size();
    const S* xp = x->value.ptr();
    S* yp = y->value.ptr();
    parallel_chunks(n, [&](std::int64_t b, std::int64_t e) {
        detail::CArrayMap<S> in(xp + b, e - b);
        detail::ArrayMap<S> out(yp + b, e - b);
        out = S(1) / (S(1) + (-in).exp());
    });
    tape.push([x, y, n] {
        const S* yv = y->value.ptr();
        const S* gy = y->grad.ptr();
        S* gx = x->grad.ptr();
        parallel_chunks(n, [&](std::int64_t b, std::int64_t e) {
            detail::CArrayMap<S> out_v(yv + b, e - b);
            detail::CArrayMap<S> g(gy + b, e - b);
            detail::ArrayMap<S> out(gx + b, e - b);
            out += g * out_v * (S(1) - out_v);
        });
    });
    return y;
}

namespace detail {

// Stateless per-index hash (splitmix64 finalizer): the mask is a pure
// function of (stream value, element index), so it is identical for any
// thread count and costs no synchronization.
inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

} // namespace detail

// Inverted dropout; identity when p == 0 or training is off. One draw from
// the caller's RNG stream keys the whole mask.
template <typename S>
VarPtr<S> dropout(Tape<S>& tape, const VarPtr<S>& x, double p, bool training, Rng& rng) {
    require(p >= 0.0 && p < 1.0, ErrorKind::Config, "dropout probability must be in [0, 1)");
    if (!training || p == 0.0) return x;
    const std::int64_t n = x->value.size();
    const std::uint64_t key = rng.next_u64();
    const std::uint64_t drop_below = static_cast<std::uint64_t>(p * 9007199254740992.0); // p * 2^53
    const S keep_scale = static_cast<S>(1.0 / (1.0 - p));

    auto mask = std::make_shared<std::vector<S>>(static_cast<std::size_t>(n));
    auto y = make_var(Tensor<S>(x->value.shape));
    const S* xp = x->value.ptr();
    S* yp = y->value.ptr();
    S* mp = mask->data();
    parallel_chunks(n, [&](std::int64_t b, std::int64_t e) {
        for (std::int64_t i = b; i < e; ++i) {
            const std::uint64_t z = detail::mix64(key + 0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(i));
            const S m = (z >> 11) < drop_below ? S(0) : keep_scale;
            mp[i] = m;
            yp[i] = xp[i] * m;
        }
    });
    tape.push([x, y, mask, n] {
        const S* gy = y->grad.ptr();
        const S* mp2 = mask->data();
        S* gx = x->grad.ptr();
        parallel_chunks(n, [&](std::int64_t b, std::int64_t e) {
            for (std::int64_t i = b; i < e; ++i) gx[i] += gy[i] * mp2[i];
        });
    });
    return y;
}

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

// x: [N, D], weight: [O, D], bias: [O] -> [N, O]
template <typename S>
VarPtr<S> dense(Tape<S>& tape, const VarPtr<S>& x, const VarPtr<S>& weight, const VarPtr<S>& bias) {
    require(x->value.rank() == 2 && weight->value.rank() == 2, ErrorKind::ShapeMismatch, "dense expects matrices");
    const std::int64_t n = x->value.dim(0), d = x->value.dim(1), o = weight->value.dim(0);
    require(weight->value.dim(1) == d, ErrorKind::ShapeMismatch, "dense weight/input mismatch");
    require(bias->value.size() == o, ErrorKind::ShapeMismatch, "dense bias mismatch");

    auto y = make_var(Tensor<S>({n, o}));
    CMapMat<S> X(x->value.ptr(), n, d);
    CMapMat<S> W(weight->value.ptr(), o, d);
    MapMat<S> Y(y->value.ptr(), n, o);
    parallel_chunks(n, [&](std::int64_t b, std::int64_t e) {
        Y.middleRows(b, e - b).noalias() = X.middleRows(b, e - b) * W.transpose();
        for (std::int64_t r = b; r < e; ++r) {
            Y.row(r) += Eigen::Map<const Eigen::Matrix<S, 1, Eigen::Dynamic>>(bias->value.ptr(), o);
        }
    });
    tape.push([x, weight, bias, y, n, d, o] {
        CMapMat<S> X2(x->value.ptr(), n, d);
        CMapMat<S> W2(weight->value.ptr(), o, d);
        CMapMat<S> GY(y->grad.ptr(), n, o);
        MapMat<S> GX(x->grad.ptr(), n, d);
        MapMat<S> GW(weight->grad.ptr(), o, d);
        parallel_chunks(n, [&](std::int64_t b, std::int64_t e) {
            GX.middleRows(b, e - b).noalias() += GY.middleRows(b, e - b) * W2;
        });
        parallel_chunks(o, [&](std::int64_t b, std::int64_t e) {
            GW.middleRows(b, e - b).noalias() += GY.middleCols(b, e - b).transpose() * X2;
            S* gb = bias->grad.ptr();
            for (std::int64_t c = b; c < e; ++c) {
                double acc = 0.0;
                for (std::int64_t r = 0; r < n; ++r) acc += static_cast<double>(GY(r, c));
                gb[c] += static_cast<S>(acc);
            }
        });
    });
    return y;
}

// a: [N, D], b: [M, D] -> [N, M] with out(i, j) = dot(a_i, b_j)
template <typename S>
VarPtr<S> matmul_nt(Tape<S>& tape, const VarPtr<S>& a, const VarPtr<S>& b) {
    require(a->value.rank() == 2 && b->value.rank() == 2 && a->value.dim(1) == b->value.dim(1),
            ErrorKind::ShapeMismatch, "matmul_nt dimension mismatch");
    const std::int64_t n = a->value.dim(0), m = b->value.dim(0), d = a->value.dim(1);
    auto y = make_var(Tensor<S>({n, m}));
    CMapMat<S> A(a->value.ptr(), n, d);
    CMapMat<S> B(b->value.ptr(), m, d);
    MapMat<S> Y(y->value.ptr(), n, m);
    parallel_chunks(n, [&](std::int64_t lo, std::int64_t hi) {
        Y.middleRows(lo, hi - lo).noalias() = A.middleRows(lo, hi - lo) * B.transpose();
    });
    tape.push([a, b, y, n, m, d] {
        CMapMat<S> A2(a->value.ptr(), n, d);
        CMapMat<S> B2(b->value.ptr(), m, d);
        CMapMat<S> GY(y->grad.ptr(), n, m);
        MapMat<S> GA(a->grad.ptr(), n, d);
        MapMat<S> GB(b->grad.ptr(), m, d);
        parallel_chunks(n, [&](std::int64_t lo, std::int64_t hi) {
            GA.middleRows(lo, hi - lo).noalias() += GY.middleRows(lo, hi - lo) * B2;
        });
        parallel_chunks(m, [&](std::int64_t lo, std::int64_t hi) {
            GB.middleRows(lo, hi - lo).noalias() += GY.middleCols(lo, hi - lo).transpose() * A2;
        });
    });
    return y;
}

template <typename S>
VarPtr<S> transpose(Tape<S>& tape, const VarPtr<S>& x) {
    require(x->value.rank() == 2, ErrorKind::ShapeMismatch, "transpose expects a matrix");
    const std::int64_t n = x->value.dim(0), m = x->value.dim(1);
    auto y = make_var(Tensor<S>({m, n}));
    CMapMat<S> X(x->value.ptr(), n, m);
    MapMat<S>(y->value.ptr(), m, n) = X.transpose();
    tape.push([x, y, n, m] {
        CMapMat<S> GY(y->grad.ptr(), m, n);
        MapMat<S>(x->grad.ptr(), n, m) += GY.transpose();
    });
    return y;
}

// ---------------------------------------------------------------------------
// 1-D convolution, pooling, channel ops on [B, C, L] tensors
// ---------------------------------------------------------------------------

// x: [B, Ci, L], weight: [Co, Ci, K], bias: [Co], symmetric zero padding.
// Output length is L + 2*pad - K + 1. One GEMM per kernel tap, computed in
// transposed form (a row-major [C, L] block is a column-major [L, C] matrix)
// so the long temporal axis is the GEMM M dimension.
template <typename S>
VarPtr<S> conv1d(Tape<S>& tape, const VarPtr<S>& x, const VarPtr<S>& weight, const VarPtr<S>& bias, int pad) {
    require(x->value.rank() == 3 && weight->value.rank() == 3, ErrorKind::ShapeMismatch, "conv1d expects [B,C,L] input");
    const std::int64_t batch = x->value.dim(0), ci = x->value.dim(1), len = x->value.dim(2);
    const std::int64_t co = weight->value.dim(0), k = weight->value.dim(2);
    require(weight->value.dim(1) == ci, ErrorKind::ShapeMismatch, "conv1d channel mismatch");
    require(bias->value.size() == co, ErrorKind::ShapeMismatch, "conv1d bias mismatch");
    const std::int64_t lout = len + 2 * pad - k + 1;
    require(lout >= 1, ErrorKind::ShapeMismatch, "conv1d output length would be empty");

    using MatCM = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
    using MapCM = Eigen::Map<MatCM>;
    using CMapCM = Eigen::Map<const MatCM>;

    // Per-tap weight matrices: wt[r] = W_r^T ([Ci, Co]) and wc[r] = W_r ([Co, Ci]).
    auto wt = std::make_shared<std::vector<MatCM>>();
    auto wc = std::make_shared<std::vector<MatCM>>();
    for (std::int64_t r = 0; r < k; ++r) {
        MatCM a(ci, co), b(co, ci);
        for (std::int64_t ochan = 0; ochan < co; ++ochan) {
            for (std::int64_t ichan = 0; ichan < ci; ++ichan) {
                const S v = weight->value.at((ochan * ci + ichan) * k + r);
                a(ichan, ochan) = v;
                b(ochan, ichan) = v;
            }
        }
        wt->push_back(std::move(a));
        wc->push_back(std::move(b));
    }

    auto y = make_var(Tensor<S>({batch, co, lout}));
    const S* bias_ptr = bias->value.ptr();
    parallel_chunks(batch, [&](std::int64_t blo, std::int64_t bhi) {
        for (std::int64_t b = blo; b < bhi; ++b) {
            CMapCM Xt(x->value.ptr() + b * ci * len, len, ci);
            MapCM Yt(y->value.ptr() + b * co * lout, lout, co);
            for (std::int64_t ochan = 0; ochan < co; ++ochan) Yt.col(ochan).setConstant(bias_ptr[ochan]);
            for (std::int64_t r = 0; r < k; ++r) {
                const std::int64_t off = r - pad; // input index = output index + off
                const std::int64_t t0 = std::max<std::int64_t>(0, -off);
                const std::int64_t t1 = std::min<std::int64_t>(lout, len - off);
                if (t0 >= t1) continue;
                Yt.middleRows(t0, t1 - t0).noalias() +=
                    Xt.middleRows(t0 + off, t1 - t0) * (*wt)[static_cast<std::size_t>(r)];
            }
        }
    });

    tape.push([x, weight, bias, y, wt, wc, batch, ci, len, co, k, lout, pad] {
        // d/dx: parallel over samples.
        parallel_chunks(batch, [&](std::int64_t blo, std::int64_t bhi) {
            for (std::int64_t b = blo; b < bhi; ++b) {
                CMapCM GYt(y->grad.ptr() + b * co * lout, lout, co);
                MapCM GXt(x->grad.ptr() + b * ci * len, len, ci);
                for (std::int64_t r = 0; r < k; ++r) {
                    const std::int64_t off = r - pad;
                    const std::int64_t t0 = std::max<std::int64_t>(0, -off);
                    const std::int64_t t1 = std::min<std::int64_t>(lout, len - off);
                    if (t0 >= t1) continue;
                    GXt.middleRows(t0 + off, t1 - t0).noalias() +=
                        GYt.middleRows(t0, t1 - t0) * (*wc)[static_cast<std::size_t>(r)];
                }
            }
        });
        // d/dw, d/db: parallel over output channels, sequential over samples,
        // so each weight gradient element has a fixed accumulation order.
        parallel_chunks(co, [&](std::int64_t olo, std::int64_t ohi) {
            const std::int64_t cols = ohi - olo;
            MatCM gwt(ci * k, cols); // tap r occupies rows [r*ci, r*ci+ci)
            gwt.setZero();
            Eigen::Matrix<double, Eigen::Dynamic, 1> gb(cols);
            gb.setZero();
            for (std::int64_t b = 0; b < batch; ++b) {
                CMapCM Xt(x->value.ptr() + b * ci * len, len, ci);
                CMapCM GYt(y->grad.ptr() + b * co * lout, lout, co);
                const auto GYblock = GYt.middleCols(olo, cols);
                for (std::int64_t r = 0; r < k; ++r) {
                    const std::int64_t off = r - pad;
                    const std::int64_t t0 = std::max<std::int64_t>(0, -off);
                    const std::int64_t t1 = std::min<std::int64_t>(lout, len - off);
                    if (t0 >= t1) continue;
                    gwt.middleRows(r * ci, ci).noalias() +=
                        Xt.middleRows(t0 + off, t1 - t0).transpose() * GYblock.middleRows(t0, t1 - t0);
                }
                gb += GYblock.template cast<double>().colwise().sum().transpose();
            }
            S* gw_out = weight->grad.ptr();
            for (std::int64_t ochan = 0; ochan < cols; ++ochan) {
                for (std::int64_t ichan = 0; ichan < ci; ++ichan) {
                    for (std::int64_t r = 0; r < k; ++r) {
                        gw_out[((olo + ochan) * ci + ichan) * k + r] += gwt(r * ci + ichan, ochan);
                    }
                }
                bias->grad.at(olo + ochan) += static_cast<S>(gb(ochan));
            }
        });
    });
    return y;
}

// Max pooling with kernel 2, stride 2, ceil mode: a trailing odd element forms
// its own window. Ties take the earlier index.
template <typename S>
VarPtr<S> maxpool1d_k2(Tape<S>& tape, const VarPtr<S>& x) {
    require(x->value.rank() == 3, ErrorKind::ShapeMismatch, "maxpool expects [B,C,L]");
    const std::int64_t batch = x->value.dim(0), ch = x->value.dim(1), len = x->value.dim(2);
    const std::int64_t lout = (len + 1) / 2;
    auto y = make_var(Tensor<S>({batch, ch, lout}));
    auto argmax = std::make_shared<std::vector<std::int32_t>>(static_cast<std::size_t>(batch * ch * lout));
    const std::int64_t rows = batch * ch;
    const S* xp = x->value.ptr();
    S* yp = y->value.ptr();
    std::int32_t* am = argmax->data();
    parallel_chunks(rows, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t row = lo; row < hi; ++row) {
            const S* in = xp + row * len;
            S* out = yp + row * lout;
            std::int32_t* arg = am + row * lout;
            for (std::int64_t t = 0; t < lout; ++t) {
                const std::int64_t i0 = 2 * t;
                const std::int64_t i1 = i0 + 1;
                if (i1 < len && in[i1] > in[i0]) {
                    out[t] = in[i1];
                    arg[t] = static_cast<std::int32_t>(i1);
                } else {
                    out[t] = in[i0];
                    arg[t] = static_cast<std::int32_t>(i0);
                }
            }
        }
    });
    tape.push([x, y, argmax, rows, len, lout] {
        const S* gy = y->grad.ptr();
        S* gx = x->grad.ptr();
        const std::int32_t* am2 = argmax->data();
        parallel_chunks(rows, [&](std::int64_t lo, std::int64_t hi) {
            for (std::int64_t row = lo; row < hi; ++row) {
                for (std::int64_t t = 0; t < lout; ++t) {
                    gx[row * len + am2[row * lout + t]] += gy[row * lout + t];
                }
            }
        });
    });
    return y;
}

// [B, C, L] -> [B, C] temporal mean.
template <typename S>
VarPtr<S> mean_over_time(Tape<S>& tape, const VarPtr<S>& x) {
    require(x->value.rank() == 3, ErrorKind::ShapeMismatch, "mean_over_time expects [B,C,L]");
    const std::int64_t batch = x->value.dim(0), ch = x->value.dim(1), len = x->value.dim(2);
    auto y = make_var(Tensor<S>({batch, ch}));
    const std::int64_t rows = batch * ch;
    const S* xp = x->value.ptr();
    S* yp = y->value.ptr();
    parallel_chunks(rows, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t row = lo; row < hi; ++row) {
            detail::CArrayMap<S> in(xp + row * len, len);
            yp[row] = static_cast<S>(static_cast<double>(in.sum()) / static_cast<double>(len));
        }
    });
    tape.push([x, y, rows, len] {
        const S* gy = y->grad.ptr();
        S* gx = x->grad.ptr();
        const S inv = S(1) / static_cast<S>(len);
        parallel_chunks(rows, [&](std::int64_t lo, std::int64_t hi) {
            for (std::int64_t row = lo; row < hi; ++row) {
                detail::ArrayMap<S> out(gx + row * len, len);
                out += gy[row] * inv;
            }
        });
    });
    return y;
}

// y[b,c,l] = x[b,c,l] * gate[b,c] (squeeze-and-excitation rescale).
template <typename S>
VarPtr<S> channel_scale(Tape<S>& tape, const VarPtr<S>& x, const VarPtr<S>& gate) {
    require(x->value.rank() == 3 && gate->value.rank() == 2, ErrorKind::ShapeMismatch, "channel_scale shapes");
    const std::int64_t batch = x->value.dim(0), ch = x->value.dim(1), len = x->value.dim(2);
    require(gate->value.dim(0) == batch && gate->value.dim(1) == ch, ErrorKind::ShapeMismatch, "gate shape");
    auto y = make_var(Tensor<S>(x->value.shape));
    const std::int64_t rows = batch * ch;
    const S* xp = x->value.ptr();
    const S* gp = gate->value.ptr();
    S* yp = y->value.ptr();
    parallel_chunks(rows, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t row = lo; row < hi; ++row) {
            detail::CArrayMap<S> in(xp + row * len, len);
            detail::ArrayMap<S> out(yp + row * len, len);
            out = in * gp[row];
        }
    });
    tape.push([x, gate, y, rows, len] {
        const S* xv = x->value.ptr();
        const S* gv = gate->value.ptr();
        const S* gy = y->grad.ptr();
        S* gx = x->grad.ptr();
        S* gg = gate->grad.ptr();
        parallel_chunks(rows, [&](std::int64_t lo, std::int64_t hi) {
            for (std::int64_t row = lo; row < hi; ++row) {
                detail::CArrayMap<S> in(xv + row * len, len);
                detail::CArrayMap<S> gout(gy + row * len, len);
                detail::ArrayMap<S> gin(gx + row * len, len);
                gin += gout * gv[row];
                gg[row] += static_cast<S>(static_cast<double>((gout * in).sum()));
            }
        });
    });
    return y;
}

// ---------------------------------------------------------------------------
// Batch normalization over [B, C, L] (statistics per channel)
// ---------------------------------------------------------------------------

template <typename S>
VarPtr<S> batchnorm1d(Tape<S>& tape, const VarPtr<S>& x, const VarPtr<S>& scale, const VarPtr<S>& shift,
                      Tensor<S>& running_mean, Tensor<S>& running_var, bool training,
                      double momentum = 0.1, double eps = 1e-5) {
    require(x->value.rank() == 3, ErrorKind::ShapeMismatch, "batchnorm expects [B,C,L]");
    const std::int64_t batch = x->value.dim(0), ch = x->value.dim(1), len = x->value.dim(2);
    require(scale->value.size() == ch && shift->value.size() == ch, ErrorKind::ShapeMismatch, "batchnorm affine size");
    require(running_mean.size() == ch && running_var.size() == ch, ErrorKind::ShapeMismatch, "batchnorm stats size");

    auto y = make_var(Tensor<S>(x->value.shape));
    const std::int64_t per_channel = batch * len;
    auto mean = std::make_shared<std::vector<double>>(static_cast<std::size_t>(ch));
    auto inv_std = std::make_shared<std::vector<double>>(static_cast<std::size_t>(ch));
    // Normalized activations are kept for the backward pass.
    auto xhat = std::make_shared<Tensor<S>>(x->value.shape);

    const S* xp = x->value.ptr();
    S* yp = y->value.ptr();
    S* hp = xhat->ptr();
    const S* sc = scale->value.ptr();
    const S* sh = shift->value.ptr();

    parallel_chunks(ch, [&](std::int64_t clo, std::int64_t chi) {
        for (std::int64_t c = clo; c < chi; ++c) {
            double mu, var;
            if (training) {
                // Row sums vectorize; the cross-row accumulation stays in
                // double with a fixed order.
                double acc = 0.0, acc2 = 0.0;
                for (std::int64_t b = 0; b < batch; ++b) {
                    detail::CArrayMap<S> row(xp + (b * ch + c) * len, len);
                    acc += static_cast<double>(row.sum());
                    acc2 += static_cast<double>(row.square().sum());
                }
                mu = acc / static_cast<double>(per_channel);
                var = acc2 / static_cast<double>(per_channel) - mu * mu;
                if (var < 0.0) var = 0.0;
            } else {
                mu = static_cast<double>(running_mean.at(c));
                var = static_cast<double>(running_var.at(c));
            }
            (*mean)[static_cast<std::size_t>(c)] = mu;
            const double istd = 1.0 / std::sqrt(var + eps);
            (*inv_std)[static_cast<std::size_t>(c)] = istd;
            const S mu_s = static_cast<S>(mu);
            const S istd_s = static_cast<S>(istd);
            const S g = sc[c];
            const S o = sh[c];
            for (std::int64_t b = 0; b < batch; ++b) {
                detail::CArrayMap<S> in(xp + (b * ch + c) * len, len);
                detail::ArrayMap<S> h(hp + (b * ch + c) * len, len);
                detail::ArrayMap<S> out(yp + (b * ch + c) * len, len);
                h = (in - mu_s) * istd_s;
                out = g * h + o;
            }
            if (training) {
                // Running variance uses the unbiased estimate.
                const double unbiased = per_channel > 1
                    ? var * static_cast<double>(per_channel) / static_cast<double>(per_channel - 1)
                    : var;
                running_mean.at(c) = static_cast<S>((1.0 - momentum) * static_cast<double>(running_mean.at(c)) + momentum * mu);
                running_var.at(c) = static_cast<S>((1.0 - momentum) * static_cast<double>(running_var.at(c)) + momentum * unbiased);
            }
        }
    });

    tape.push([x, scale, shift, y, xhat, inv_std, training, batch, ch, len] {
        const std::int64_t per_channel = batch * len;
        const S* gy = y->grad.ptr();
        const S* h = xhat->ptr();
        const S* sc2 = scale->value.ptr();
        S* gx = x->grad.ptr();
        S* gscale = scale->grad.ptr();
        S* gshift = shift->grad.ptr();
        parallel_chunks(ch, [&](std::int64_t clo, std::int64_t chi) {
            for (std::int64_t c = clo; c < chi; ++c) {
                double sum_g = 0.0, sum_gh = 0.0;
                for (std::int64_t b = 0; b < batch; ++b) {
                    detail::CArrayMap<S> g_row(gy + (b * ch + c) * len, len);
                    detail::CArrayMap<S> h_row(h + (b * ch + c) * len, len);
                    sum_g += static_cast<double>(g_row.sum());
                    sum_gh += static_cast<double>((g_row * h_row).sum());
                }
                gscale[c] += static_cast<S>(sum_gh);
                gshift[c] += static_cast<S>(sum_g);
                const double istd = (*inv_std)[static_cast<std::size_t>(c)];
                const S gamma_istd = static_cast<S>(static_cast<double>(sc2[c]) * istd);
                if (training) {
                    const S mean_g = static_cast<S>(sum_g / static_cast<double>(per_channel));
                    const S mean_gh = static_cast<S>(sum_gh / static_cast<double>(per_channel));
                    for (std::int64_t b = 0; b < batch; ++b) {
                        detail::CArrayMap<S> g_row(gy + (b * ch + c) * len, len);
                        detail::CArrayMap<S> h_row(h + (b * ch + c) * len, len);
                        detail::ArrayMap<S> gx_row(gx + (b * ch + c) * len, len);
                        gx_row += gamma_istd * (g_row - mean_g - h_row * mean_gh);
                    }
                } else {
                    for (std::int64_t b = 0; b < batch; ++b) {
                        detail::CArrayMap<S> g_row(gy + (b * ch + c) * len, len);
                        detail::ArrayMap<S> gx_row(gx + (b * ch + c) * len, len);
                        gx_row += gamma_istd * g_row;
                    }
                }
            }
        });
    });
    return y;
}

// ---------------------------------------------------------------------------
// Rows, softmax, reductions
// ---------------------------------------------------------------------------

template <typename S>
VarPtr<S> l2_normalize_rows(Tape<S>& tape, const VarPtr<S>& x) {
    require(x->value.rank() == 2, ErrorKind::ShapeMismatch, "l2_normalize expects a matrix");
    const std::int64_t n = x->value.dim(0), d = x->value.dim(1);
    auto y = make_var(Tensor<S>(x->value.shape));
    auto inv_norm = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n));
    const S* xp = x->value.ptr();
    S* yp = y->value.ptr();
    for (std::int64_t r = 0; r < n; ++r) {
        double acc = 0.0;
        const S* in = xp + r * d;
        for (std::int64_t c = 0; c < d; ++c) acc += static_cast<double>(in[c]) * static_cast<double>(in[c]);
        const double norm = std::sqrt(acc);
        require(norm > 0.0, ErrorKind::DegenerateEmbedding,
                "zero-norm embedding row " + std::to_string(r));
        (*inv_norm)[static_cast<std::size_t>(r)] = 1.0 / norm;
        S* out = yp + r * d;
        for (std::int64_t c = 0; c < d; ++c) out[c] = static_cast<S>(static_cast<double>(in[c]) / norm);
    }
    tape.push([x, y, inv_norm, n, d] {
        const S* yv = y->value.ptr();
        const S* gy = y->grad.ptr();
        S* gx = x->grad.ptr();
        parallel_chunks(n, [&](std::int64_t lo, std::int64_t hi) {
            for (std::int64_t r = lo; r < hi; ++r) {
                const S* yrow = yv + r * d;
                const S* grow = gy + r * d;
                S* gxrow = gx + r * d;
                double dot = 0.0;
                for (std::int64_t c = 0; c < d; ++c) dot += static_cast<double>(yrow[c]) * static_cast<double>(grow[c]);
                const double inv = (*inv_norm)[static_cast<std::size_t>(r)];
                for (std::int64_t c = 0; c < d; ++c) {
                    gxrow[c] += static_cast<S>((static_cast<double>(grow[c]) - dot * static_cast<double>(yrow[c])) * inv);
                }
            }
        });
    });
    return y;
}

// y = x / tau with a learnable positive scalar tau (shape [1]).
template <typename S>
VarPtr<S> divide_by_temperature(Tape<S>& tape, const VarPtr<S>& x, const VarPtr<S>& tau) {
    require(tau->value.size() == 1, ErrorKind::ShapeMismatch, "temperature must be a scalar");
    const double t = static_cast<double>(tau->value.at(0));
    require(t > 0.0, ErrorKind::Usage, "temperature must be positive, got " + std::to_string(t));
    const std::int64_t n = x->value.size();
    auto y = make_var(Tensor<S>(x->value.shape));
    const S* xp = x->value.ptr();
    S* yp = y->value.ptr();
    const S inv = static_cast<S>(1.0 / t);
    parallel_chunks(n, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i) yp[i] = xp[i] * inv;
    });
    tape.push([x, tau, y, n, t] {
        const S* gy = y->grad.ptr();
        const S* yv = y->value.ptr();
        S* gx = x->grad.ptr();
        const S inv2 = static_cast<S>(1.0 / t);
        double acc = 0.0;
        for (std::int64_t i = 0; i < n; ++i) acc += static_cast<double>(gy[i]) * static_cast<double>(yv[i]);
        tau->grad.at(0) += static_cast<S>(-acc / t);
        parallel_chunks(n, [&](std::int64_t lo, std::int64_t hi) {
            for (std::int64_t i = lo; i < hi; ++i) gx[i] += gy[i] * inv2;
        });
    });
    return y;
}

template <typename S>
VarPtr<S> log_softmax_rows(Tape<S>& tape, const VarPtr<S>& x) {
    require(x->value.rank() == 2, ErrorKind::ShapeMismatch, "log_softmax expects a matrix");
    const std::int64_t n = x->value.dim(0), m = x->value.dim(1);
    auto y = make_var(Tensor<S>(x->value.shape));
    const S* xp = x->value.ptr();
    S* yp = y->value.ptr();
    parallel_chunks(n, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t r = lo; r < hi; ++r) {
            const S* in = xp + r * m;
            S* out = yp + r * m;
            double mx = -std::numeric_limits<double>::infinity();
            for (std::int64_t c = 0; c < m; ++c) mx = std::max(mx, static_cast<double>(in[c]));
            double lse = 0.0;
            for (std::int64_t c = 0; c < m; ++c) lse += std::exp(static_cast<double>(in[c]) - mx);
            lse = mx + std::log(lse);
            for (std::int64_t c = 0; c < m; ++c) out[c] = static_cast<S>(static_cast<double>(in[c]) - lse);
        }
    });
    tape.push([x, y, n, m] {
        const S* yv = y->value.ptr();
        const S* gy = y->grad.ptr();
        S* gx = x->grad.ptr();
        parallel_chunks(n, [&](std::int64_t lo, std::int64_t hi) {
            for (std::int64_t r = lo; r < hi; ++r) {
                const S* yrow = yv + r * m;
                const S* grow = gy + r * m;
                S* gxrow = gx + r * m;
                double gsum = 0.0;
                for (std::int64_t c = 0; c < m; ++c) gsum += static_cast<double>(grow[c]);
                for (std::int64_t c = 0; c < m; ++c) {
                    gxrow[c] += static_cast<S>(static_cast<double>(grow[c]) - std::exp(static_cast<double>(yrow[c])) * gsum);
                }
            }
        });
    });
    return y;
}

// Mean of the main diagonal of a square matrix -> scalar.
template <typename S>
VarPtr<S> diag_mean(Tape<S>& tape, const VarPtr<S>& x) {
    require(x->value.rank() == 2 && x->value.dim(0) == x->value.dim(1), ErrorKind::ShapeMismatch,
            "diag_mean expects a square matrix");
    const std::int64_t n = x->value.dim(0);
    double acc = 0.0;
    for (std::int64_t i = 0; i < n; ++i) acc += static_cast<double>(x->value.at(i * n + i));
    auto y = make_var(Tensor<S>::scalar(static_cast<S>(acc / static_cast<double>(n))));
    tape.push([x, y, n] {
        const S g = y->grad.at(0) / static_cast<S>(n);
        for (std::int64_t i = 0; i < n; ++i) x->grad.at(i * n + i) += g;
    });
    return y;
}

template <typename S>
VarPtr<S> sum_all(Tape<S>& tape, const VarPtr<S>& x) {
    double acc = 0.0;
    for (std::int64_t i = 0; i < x->value.size(); ++i) acc += static_cast<double>(x->value.at(i));
    auto y = make_var(Tensor<S>::scalar(static_cast<S>(acc)));
    tape.push([x, y] {
        const S g = y->grad.at(0);
        S* gx = x->grad.ptr();
        for (std::int64_t i = 0; i < x->value.size(); ++i) gx[i] += g;
    });
    return y;
}

// y = a*x1 + b*x2 for scalars; used to combine loss terms.
template <typename S>
VarPtr<S> scalar_lincomb(Tape<S>& tape, S a, const VarPtr<S>& x1, S b, const VarPtr<S>& x2) {
    require(x1->value.size() == 1 && x2->value.size() == 1, ErrorKind::ShapeMismatch, "lincomb expects scalars");
    auto y = make_var(Tensor<S>::scalar(a * x1->value.at(0) + b * x2->value.at(0)));
    tape.push([x1, x2, y, a, b] {
        x1->grad.at(0) += a * y->grad.at(0);
        x2->grad.at(0) += b * y->grad.at(0);
    });
    return y;
}

template <typename S>
VarPtr<S> scale(Tape<S>& tape, const VarPtr<S>& x, S factor) {
    auto y = make_var(Tensor<S>(x->value.shape));
    for (std::int64_t i = 0; i < x->value.size(); ++i) y->value.at(i) = x->value.at(i) * factor;
    tape.push([x, y, factor] {
        for (std::int64_t i = 0; i < x->value.size(); ++i) x->grad.at(i) += factor * y->grad.at(i);
    });
    return y;
}

template <typename S>
VarPtr<S> add(Tape<S>& tape, const VarPtr<S>& x, const VarPtr<S>& y) {
    require(x->value.same_shape(y->value), ErrorKind::ShapeMismatch, "add shape mismatch");
    auto z = make_var(Tensor<S>(x->value.shape));
    for (std::int64_t i = 0; i < x->value.size(); ++i) z->value.at(i) = x->value.at(i) + y->value.at(i);
    tape.push([x, y, z] {
        for (std::int64_t i = 0; i < z->value.size(); ++i) {
            x->grad.at(i) += z->grad.at(i);
            y->grad.at(i) += z->grad.at(i);
        }
    });
    return z;
}

template <typename S>
VarPtr<S> mul(Tape<S>& tape, const VarPtr<S>& x, const VarPtr<S>& y) {
    require(x->value.same_shape(y->value), ErrorKind::ShapeMismatch, "mul shape mismatch");
    auto z = make_var(Tensor<S>(x->value.shape));
    for (std::int64_t i = 0; i < x->value.size(); ++i) z->value.at(i) = x->value.at(i) * y->value.at(i);
    tape.push([x, y, z] {
        for (std::int64_t i = 0; i < z->value.size(); ++i) {
            x->grad.at(i) += z->grad.at(i) * y->value.at(i);
            y->grad.at(i) += z->grad.at(i) * x->value.at(i);
        }
    });
    return z;
}

// Mean binary cross-entropy on logits against fixed 0/1 targets.
template <typename S>
VarPtr<S> bce_with_logits(Tape<S>& tape, const VarPtr<S>& logits, const Tensor<S>& targets) {
    require(logits->value.same_shape(targets), ErrorKind::ShapeMismatch, "bce target shape mismatch");
    const std::int64_t n = logits->value.size();
    require(n > 0, ErrorKind::Usage, "bce on empty tensor");
    double acc = 0.0;
    const S* zp = logits->value.ptr();
    const S* tp = targets.ptr();
    for (std::int64_t i = 0; i < n; ++i) {
        const double z = static_cast<double>(zp[i]);
        const double t = static_cast<double>(tp[i]);
        acc += std::max(z, 0.0) - t * z + std::log1p(std::exp(-std::abs(z)));
    }
    auto y = make_var(Tensor<S>::scalar(static_cast<S>(acc / static_cast<double>(n))));
    auto targets_copy = std::make_shared<Tensor<S>>(targets);
    tape.push([logits, y, targets_copy, n] {
        const S g = y->grad.at(0) / static_cast<S>(n);
        const S* zp2 = logits->value.ptr();
        const S* tp2 = targets_copy->ptr();
        S* gz = logits->grad.ptr();
        for (std::int64_t i = 0; i < n; ++i) {
            gz[i] += g * (detail::sigmoid_scalar(zp2[i]) - tp2[i]);
        }
    });
    return y;
}

} // namespace pulsealign
