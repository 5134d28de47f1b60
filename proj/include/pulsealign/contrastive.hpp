#pragma once

#include "pulsealign/encoder.hpp"
#include "pulsealign/ops.hpp"

namespace pulsealign {

// Learnable softmax temperature, kept in a safe range by clamping after every
// optimizer step.
template <typename S>
struct Temperature {
    static constexpr double kMin = 1e-3;
    static constexpr double kMax = 1.0;

    VarPtr<S> var;

    explicit Temperature(double init = 0.07) : var(make_param(Tensor<S>::scalar(static_cast<S>(init)))) {
        require(init > 0.0, ErrorKind::Config, "temperature init must be positive");
    }

    double value() const { return static_cast<double>(var->value.at(0)); }

    void clamp() {
        S& t = var->value.at(0);
        if (t < static_cast<S>(kMin)) t = static_cast<S>(kMin);
        if (t > static_cast<S>(kMax)) t = static_cast<S>(kMax);
    }
};

// Row-normalizes an embedding batch to unit Euclidean norm.
template <typename S>
EmbeddingBatch<S> l2_normalize(const EmbeddingBatch<S>& batch) {
    Tape<S> tape;
    tape.recording = false;
    auto y = l2_normalize_rows(tape, make_var(Tensor<S>(batch.values)));
    return {std::move(y->value), batch.space};
}

// sim(i, j) = dot(a_i, b_j) for unit-norm rows; the result is the cosine
// similarity matrix with queries along rows.
template <typename S>
Tensor<S> cosine_similarity_matrix(const EmbeddingBatch<S>& a, const EmbeddingBatch<S>& b) {
    require(a.values.rank() == 2 && b.values.rank() == 2, ErrorKind::ShapeMismatch, "embedding batches must be matrices");
    require(a.values.dim(0) == b.values.dim(0) && a.values.dim(1) == b.values.dim(1), ErrorKind::ShapeMismatch,
            "similarity requires equal batch shapes, got " + a.values.shape_string() + " vs " + b.values.shape_string());
    Tape<S> tape;
    tape.recording = false;
    auto s = matmul_nt(tape, make_var(Tensor<S>(a.values)), make_var(Tensor<S>(b.values)));
    return std::move(s->value);
}

// Symmetric InfoNCE over in-batch negatives: the mean of the row-wise and
// column-wise cross-entropies of sim/tau against the diagonal match,
//   L = -1/(2N) * sum_i [log softmax_row(S/tau)_ii + log softmax_col(S/tau)_ii].
// Differentiable in both embedding batches and tau.
template <typename S>
VarPtr<S> symmetric_info_nce(Tape<S>& tape, const VarPtr<S>& h_ppg, const VarPtr<S>& h_ecg, const VarPtr<S>& tau) {
    require(h_ppg->value.rank() == 2 && h_ecg->value.rank() == 2 &&
                h_ppg->value.dim(0) == h_ecg->value.dim(0) && h_ppg->value.dim(1) == h_ecg->value.dim(1),
            ErrorKind::ShapeMismatch, "InfoNCE requires two equal-shape embedding batches");
    require(h_ppg->value.dim(0) >= 1, ErrorKind::Usage, "InfoNCE requires N >= 1");
    auto sim = matmul_nt(tape, h_ppg, h_ecg);
    auto scaled = divide_by_temperature(tape, sim, tau);
    auto row_term = diag_mean(tape, log_softmax_rows(tape, scaled));
    auto col_term = diag_mean(tape, log_softmax_rows(tape, transpose(tape, scaled)));
    return scalar_lincomb(tape, S(-0.5), row_term, S(-0.5), col_term);
}

// Loss value only, for validation sweeps: normalized inputs, plain tensors.
template <typename S>
double symmetric_info_nce_value(const Tensor<S>& h_ppg, const Tensor<S>& h_ecg, double tau) {
    Tape<S> tape;
    tape.recording = false;
    auto tau_var = make_var(Tensor<S>::scalar(static_cast<S>(tau)));
    auto loss = symmetric_info_nce(tape, make_var(Tensor<S>(h_ppg)), make_var(Tensor<S>(h_ecg)), tau_var);
    return static_cast<double>(loss->value.at(0));
}

} // namespace pulsealign
