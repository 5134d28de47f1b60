#pragma once

#include <cstdint>
#include <vector>

#include "pulsealign/tensor.hpp"

namespace pulsealign {

struct RetrievalReport {
    double r_at_1 = 0.0;
    double r_at_5 = 0.0;
    double r_at_10 = 0.0;
    double map_at_10 = 0.0;
    double mrr = 0.0;
    std::int64_t n_samples = 0;
    std::int64_t batch_count = 0;
};

enum class AggregateMode { WEIGHTED, MACRO };

// Query-to-gallery ranking over a square similarity matrix where the true
// match of query row i is column i. Ranks are pessimistic under ties: tied
// non-matches count as ranked above the match. With one relevant item per
// query, mAP@10 equals mean(1/rank for rank <= 10) and MRR is untruncated.
template <typename S>
RetrievalReport retrieval_metrics(const Tensor<S>& sim) {
    require(sim.rank() == 2 && sim.dim(0) == sim.dim(1), ErrorKind::ShapeMismatch,
            "retrieval expects a square similarity matrix, got " + sim.shape_string());
    const std::int64_t n = sim.dim(0);
    require(n >= 1, ErrorKind::Usage, "empty similarity matrix");

    double hits1 = 0, hits5 = 0, hits10 = 0, ap10 = 0, rr = 0;
    for (std::int64_t i = 0; i < n; ++i) {
        const S* row = sim.ptr() + i * n;
        const S truth = row[i];
        std::int64_t rank = 1;
        for (std::int64_t j = 0; j < n; ++j) {
            if (j != i && row[j] >= truth) ++rank;
        }
        if (rank <= 1) hits1 += 1;
        if (rank <= 5) hits5 += 1;
        if (rank <= 10) {
            hits10 += 1;
            ap10 += 1.0 / static_cast<double>(rank);
        }
        rr += 1.0 / static_cast<double>(rank);
    }

    RetrievalReport report;
    report.r_at_1 = hits1 / static_cast<double>(n);
    report.r_at_5 = hits5 / static_cast<double>(n);
    report.r_at_10 = hits10 / static_cast<double>(n);
    report.map_at_10 = ap10 / static_cast<double>(n);
    report.mrr = rr / static_cast<double>(n);
    report.n_samples = n;
    report.batch_count = 1;
    return report;
}

// Combines per-batch reports: WEIGHTED averages by sample count, MACRO
// averages uniformly.
RetrievalReport aggregate_metrics(const std::vector<RetrievalReport>& reports, AggregateMode mode);

} // namespace pulsealign
