#include "pulsealign/retrieval.hpp"

namespace pulsealign {

RetrievalReport aggregate_metrics(const std::vector<RetrievalReport>& reports, AggregateMode mode) {
    require(!reports.empty(), ErrorKind::Usage, "aggregate_metrics on an empty report list");
    RetrievalReport out;
    double weight_sum = 0.0;
    for (const auto& r : reports) {
        double w = 1.0;
        if (mode == AggregateMode::WEIGHTED) {
            require(r.n_samples > 0, ErrorKind::Usage, "weighted aggregation needs positive sample counts");
            w = static_cast<double>(r.n_samples);
        }
        out.r_at_1 += w * r.r_at_1;
        out.r_at_5 += w * r.r_at_5;
        out.r_at_10 += w * r.r_at_10;
        out.map_at_10 += w * r.map_at_10;
        out.mrr += w * r.mrr;
        out.n_samples += r.n_samples;
        out.batch_count += r.batch_count;
        weight_sum += w;
    }
    out.r_at_1 /= weight_sum;
    out.r_at_5 /= weight_sum;
    out.r_at_10 /= weight_sum;
    out.map_at_10 /= weight_sum;
    out.mrr /= weight_sum;
    return out;
}

} // namespace pulsealign
