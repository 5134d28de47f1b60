#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pulsealign/tensor.hpp"

namespace pulsealign {

// ---------------------------------------------------------------------------
// Penalized linear models (deterministic solvers, no external state)
// ---------------------------------------------------------------------------

struct RidgeModel {
    std::vector<double> weights;
    double intercept = 0.0;
};

// Minimizes ||Xw + b - y||^2 + alpha ||w||^2 with an unpenalized intercept,
// via the regularized normal equations on centered data.
RidgeModel ridge_fit(const Tensor<double>& x, const std::vector<double>& y, double alpha);
std::vector<double> ridge_predict(const RidgeModel& model, const Tensor<double>& x);

struct LogisticModel {
    Tensor<double> weights;          // [K, D]
    std::vector<double> intercepts;  // [K]
    std::int64_t class_count = 0;
    std::int64_t iterations = 0;     // of the slowest one-vs-rest problem
};

// One-vs-rest logistic regression minimizing
//   mean log-loss + (1 / (2 C N)) ||w||^2
// per binary problem (intercept unpenalized), solved by L-BFGS with a
// deterministic stop: gradient norm < 1e-6 or 1000 iterations.
LogisticModel logistic_fit(const Tensor<double>& x, const std::vector<int>& y, double c, std::int64_t class_count);

// Class probabilities, [N, K].
Tensor<double> logistic_scores(const LogisticModel& model, const Tensor<double>& x);

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct RegressionMetrics {
    double mae = 0.0;
    double r2 = 0.0;
};

struct ClassificationMetrics {
    double auc_macro = 0.0;
    double f1_macro = 0.0;
    double accuracy = 0.0;
};

RegressionMetrics regression_metrics(const std::vector<double>& y_true, const std::vector<double>& y_pred);

// Macro one-vs-rest AUC from scores; macro F1 and accuracy from argmax.
ClassificationMetrics classification_metrics(const std::vector<int>& y_true, const Tensor<double>& scores);

// Rank-based AUC with ties counted one half.
double binary_auc(const std::vector<int>& labels, const std::vector<double>& scores);

// ---------------------------------------------------------------------------
// Nested cross-validation
// ---------------------------------------------------------------------------

enum class TaskKind { REGRESSION, CLASSIFICATION };

struct ProbeTask {
    TaskKind kind = TaskKind::REGRESSION;
    Tensor<double> embeddings;     // [N, D]
    std::vector<double> targets;   // real targets, or class ids cast to double
    std::int64_t class_count = 0;  // classification only

    void validate() const;
};

struct FoldMetrics {
    double mae = 0.0;
    double r2 = 0.0;
    double auc = 0.0;
    double f1 = 0.0;
    double accuracy = 0.0;
    double hyperparameter = 0.0; // selected alpha or C
};

struct ProbeResult {
    std::vector<FoldMetrics> folds;
    FoldMetrics mean;
    FoldMetrics stddev; // sample standard deviation across folds
};

// One record per model fit: which outer fold it served, whether it was an
// inner-search fit or the final refit, and exactly which rows it saw. Lets
// tests assert that no fit ever touched outer-test rows.
struct FitAuditRecord {
    int outer_fold = 0;
    bool inner = false;
    std::vector<std::int64_t> rows;
};

// Outer 5 folds; per outer fold an inner 5-fold grid search over
// alpha/C in {1e-6 .. 1e6} by decades, selected on MAE (regression) or macro
// AUC (classification); ties prefer the stronger regularization. Features are
// standardized on each fit's own training rows. Folds are seeded-shuffled and
// stratified for classification.
ProbeResult nested_cv_evaluate(const ProbeTask& task, std::uint64_t seed,
                               std::vector<FitAuditRecord>* audit = nullptr);

} // namespace pulsealign
