#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "pulsealign/probe.hpp"
#include "pulsealign/rng.hpp"

using namespace pulsealign;

namespace {

Tensor<double> random_matrix(std::int64_t n, std::int64_t d, Rng& rng) {
    Tensor<double> x({n, d});
    for (auto& v : x.data) v = rng.normal();
    return x;
}

// Plain gradient-descent minimizer of the ridge objective, used as an
// independent optimization oracle.
std::vector<double> ridge_gd_predictions(const Tensor<double>& x, const std::vector<double>& y, double alpha) {
    const std::int64_t n = x.dim(0), d = x.dim(1);
    std::vector<double> w(static_cast<std::size_t>(d), 0.0);
    double b = 0.0;
    const double lr = 0.4 / (static_cast<double>(d) + alpha / static_cast<double>(n) + 1.0);
    for (int iter = 0; iter < 60000; ++iter) {
        std::vector<double> grad_w(static_cast<std::size_t>(d), 0.0);
        double grad_b = 0.0;
        for (std::int64_t i = 0; i < n; ++i) {
            double pred = b;
            for (std::int64_t j = 0; j < d; ++j) pred += x.at(i * d + j) * w[static_cast<std::size_t>(j)];
            const double err = pred - y[static_cast<std::size_t>(i)];
            for (std::int64_t j = 0; j < d; ++j) grad_w[static_cast<std::size_t>(j)] += 2.0 * err * x.at(i * d + j);
            grad_b += 2.0 * err;
        }
        for (std::int64_t j = 0; j < d; ++j) grad_w[static_cast<std::size_t>(j)] += 2.0 * alpha * w[static_cast<std::size_t>(j)];
        double gnorm = grad_b * grad_b;
        for (double g : grad_w) gnorm += g * g;
        if (std::sqrt(gnorm) < 1e-10) break;
        for (std::int64_t j = 0; j < d; ++j) w[static_cast<std::size_t>(j)] -= lr * grad_w[static_cast<std::size_t>(j)] / static_cast<double>(n);
        b -= lr * grad_b / static_cast<double>(n);
    }
    std::vector<double> preds(static_cast<std::size_t>(n), b);
    for (std::int64_t i = 0; i < n; ++i) {
        for (std::int64_t j = 0; j < d; ++j) preds[static_cast<std::size_t>(i)] += x.at(i * d + j) * w[static_cast<std::size_t>(j)];
    }
    return preds;
}

// Brute-force pairwise AUC with half-credit ties.
double pairwise_auc(const std::vector<int>& labels, const std::vector<double>& scores) {
    double wins = 0.0;
    std::int64_t pairs = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 1) continue;
        for (std::size_t j = 0; j < labels.size(); ++j) {
            if (labels[j] != 0) continue;
            ++pairs;
            if (scores[i] > scores[j]) wins += 1.0;
            else if (scores[i] == scores[j]) wins += 0.5;
        }
    }
    return wins / static_cast<double>(pairs);
}

double logistic_objective(const Tensor<double>& x, const std::vector<int>& y, const std::vector<double>& w, double b,
                          double c) {
    const std::int64_t n = x.dim(0), d = x.dim(1);
    double loss = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        double m = b;
        for (std::int64_t j = 0; j < d; ++j) m += x.at(i * d + j) * w[static_cast<std::size_t>(j)];
        const double t = y[static_cast<std::size_t>(i)] == 1 ? 1.0 : 0.0;
        loss += std::max(m, 0.0) - t * m + std::log1p(std::exp(-std::abs(m)));
    }
    loss /= static_cast<double>(n);
    double norm = 0.0;
    for (double v : w) norm += v * v;
    return loss + norm / (2.0 * c * static_cast<double>(n));
}

} // namespace

TEST_CASE("ridge: interpolation, penalty limit, and a descent oracle") {
    Rng rng(2);
    const std::int64_t n = 40, d = 5;
    const Tensor<double> x = random_matrix(n, d, rng);

    SUBCASE("exactly linear targets are interpolated at tiny alpha") {
        std::vector<double> y(static_cast<std::size_t>(n));
        for (std::int64_t i = 0; i < n; ++i) {
            y[static_cast<std::size_t>(i)] = 3.0 * x.at(i * d) - 2.0 * x.at(i * d + 3) + 0.7;
        }
        const RidgeModel model = ridge_fit(x, y, 1e-6);
        const auto pred = ridge_predict(model, x);
        const RegressionMetrics m = regression_metrics(y, pred);
        CHECK(m.mae < 1e-6);
    }
    SUBCASE("huge alpha shrinks to the mean predictor") {
        std::vector<double> y(static_cast<std::size_t>(n));
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = rng.normal(5.0, 2.0);
        const RidgeModel model = ridge_fit(x, y, 1e12);
        for (double w : model.weights) CHECK(std::abs(w) < 1e-6);
        double mean_y = 0.0;
        for (double v : y) mean_y += v;
        CHECK(model.intercept == doctest::Approx(mean_y / static_cast<double>(n)).epsilon(1e-6));
    }
    SUBCASE("predictions match an independent gradient-descent minimizer") {
        std::vector<double> y(static_cast<std::size_t>(n));
        for (auto& v : y) v = rng.normal();
        for (double alpha : {0.01, 1.0, 100.0}) {
            const auto direct = ridge_predict(ridge_fit(x, y, alpha), x);
            const auto descent = ridge_gd_predictions(x, y, alpha);
            for (std::size_t i = 0; i < direct.size(); ++i) {
                CHECK(std::abs(direct[i] - descent[i]) < 1e-4);
            }
        }
    }
    SUBCASE("shifting targets shifts predictions by the same constant") {
        std::vector<double> y(static_cast<std::size_t>(n));
        for (auto& v : y) v = rng.normal();
        std::vector<double> shifted = y;
        for (auto& v : shifted) v += 11.5;
        const auto base = ridge_predict(ridge_fit(x, y, 0.5), x);
        const auto moved = ridge_predict(ridge_fit(x, shifted, 0.5), x);
        for (std::size_t i = 0; i < base.size(); ++i) {
            CHECK(moved[i] - base[i] == doctest::Approx(11.5).epsilon(1e-9));
        }
    }
    SUBCASE("degenerate design with alpha=0 is a singularity error") {
        Tensor<double> dup({6, 2});
        for (std::int64_t i = 0; i < 6; ++i) {
            dup.at(i * 2) = static_cast<double>(i);
            dup.at(i * 2 + 1) = 2.0 * static_cast<double>(i); // collinear
        }
        std::vector<double> y = {0, 1, 0, 1, 0, 1};
        CHECK_THROWS_AS(ridge_fit(dup, y, 0.0), Error);
    }
}

TEST_CASE("logistic: separability, prior limit, and a grid oracle") {
    Rng rng(3);
    SUBCASE("separable data reaches perfect training accuracy at large C") {
        const std::int64_t n = 30, d = 2;
        Tensor<double> x({n, d});
        std::vector<int> y(static_cast<std::size_t>(n));
        for (std::int64_t i = 0; i < n; ++i) {
            const int label = i % 2;
            x.at(i * d) = rng.normal(label == 1 ? 3.0 : -3.0, 0.3);
            x.at(i * d + 1) = rng.normal();
            y[static_cast<std::size_t>(i)] = label;
        }
        const LogisticModel model = logistic_fit(x, y, 1e6, 2);
        const Tensor<double> scores = logistic_scores(model, x);
        std::int64_t correct = 0;
        for (std::int64_t i = 0; i < n; ++i) {
            const int pred = scores.at(i * 2 + 1) > scores.at(i * 2) ? 1 : 0;
            correct += pred == y[static_cast<std::size_t>(i)];
        }
        CHECK(correct == n);
    }
    SUBCASE("vanishing C collapses weights and predicts the class prior") {
        const std::int64_t n = 40, d = 3;
        const Tensor<double> x = random_matrix(n, d, rng);
        std::vector<int> y(static_cast<std::size_t>(n));
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = i < 30 ? 1 : 0; // prior 0.75
        const LogisticModel model = logistic_fit(x, y, 1e-12, 2);
        for (std::int64_t j = 0; j < d; ++j) CHECK(std::abs(model.weights.at(d + j)) < 1e-4);
        const Tensor<double> scores = logistic_scores(model, x);
        for (std::int64_t i = 0; i < n; ++i) {
            CHECK(scores.at(i * 2 + 1) == doctest::Approx(0.75).epsilon(0.02));
        }
    }
    SUBCASE("the optimizer beats a brute-force grid over a 2-parameter slice") {
        const std::int64_t n = 25, d = 1;
        Tensor<double> x = random_matrix(n, d, rng);
        std::vector<int> y(static_cast<std::size_t>(n));
        for (std::int64_t i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = x.at(i) + 0.5 * rng.normal() > 0 ? 1 : 0;
        const double c = 1.0;
        const LogisticModel model = logistic_fit(x, y, c, 2);
        const double fitted = logistic_objective(x, y, {model.weights.at(d)}, model.intercepts[1], c);
        double best_grid = 1e300;
        for (double w = -6.0; w <= 6.0; w += 0.02) {
            for (double b = -3.0; b <= 3.0; b += 0.02) {
                best_grid = std::min(best_grid, logistic_objective(x, y, {w}, b, c));
            }
        }
        CHECK(fitted <= best_grid + 1e-3);
    }
    SUBCASE("single-class input is rejected") {
        const Tensor<double> x = random_matrix(8, 2, rng);
        std::vector<int> y(8, 1);
        CHECK_THROWS_AS(logistic_fit(x, y, 1.0, 2), Error);
    }
}

TEST_CASE("metrics: trivial values and the pairwise AUC oracle") {
    SUBCASE("perfect predictions") {
        const std::vector<double> y = {1.0, 2.0, 3.0, 4.0};
        const RegressionMetrics reg = regression_metrics(y, y);
        CHECK(reg.mae == 0.0);
        CHECK(reg.r2 == 1.0);

        Tensor<double> scores({4, 2});
        std::vector<int> labels = {0, 1, 0, 1};
        for (int i = 0; i < 4; ++i) {
            scores.at(i * 2 + labels[static_cast<std::size_t>(i)]) = 0.9;
            scores.at(i * 2 + (1 - labels[static_cast<std::size_t>(i)])) = 0.1;
        }
        const ClassificationMetrics clf = classification_metrics(labels, scores);
        CHECK(clf.auc_macro == 1.0);
        CHECK(clf.f1_macro == 1.0);
        CHECK(clf.accuracy == 1.0);
    }
    SUBCASE("predicting the target mean gives R^2 of zero") {
        const std::vector<double> y = {1.0, 2.0, 3.0};
        const std::vector<double> pred(3, 2.0);
        CHECK(regression_metrics(y, pred).r2 == doctest::Approx(0.0));
    }
    SUBCASE("constant targets make R^2 undefined") {
        CHECK_THROWS_AS(regression_metrics({2.0, 2.0}, {1.0, 2.0}), Error);
    }
    SUBCASE("rank AUC equals brute-force pairwise comparison, ties half") {
        Rng rng(8);
        std::vector<int> labels(50);
        std::vector<double> scores(50);
        for (std::size_t i = 0; i < 50; ++i) {
            labels[i] = rng.bernoulli(0.4) ? 1 : 0;
            scores[i] = std::round(rng.normal() * 4.0) / 4.0; // quantized => ties
        }
        labels[0] = 1;
        labels[1] = 0;
        CHECK(binary_auc(labels, scores) == doctest::Approx(pairwise_auc(labels, scores)).epsilon(1e-12));
    }
    SUBCASE("macro AUC is invariant under strictly monotone score transforms") {
        Rng rng(9);
        std::vector<int> labels(30);
        Tensor<double> scores({30, 2});
        for (std::int64_t i = 0; i < 30; ++i) {
            labels[static_cast<std::size_t>(i)] = rng.bernoulli(0.5) ? 1 : 0;
            const double s = rng.normal();
            scores.at(i * 2) = -s;
            scores.at(i * 2 + 1) = s;
        }
        labels[0] = 0;
        labels[1] = 1;
        Tensor<double> warped = scores;
        for (auto& v : warped.data) v = std::exp(0.7 * v) + 3.0;
        CHECK(classification_metrics(labels, scores).auc_macro ==
              doctest::Approx(classification_metrics(labels, warped).auc_macro).epsilon(1e-12));
    }
}

TEST_CASE("nested cross-validation") {
    Rng rng(12);

    SUBCASE("a realizable linear task is solved almost exactly") {
        const std::int64_t n = 120, d = 6;
        ProbeTask task;
        task.kind = TaskKind::REGRESSION;
        task.embeddings = random_matrix(n, d, rng);
        task.targets.resize(static_cast<std::size_t>(n));
        for (std::int64_t i = 0; i < n; ++i) {
            task.targets[static_cast<std::size_t>(i)] =
                2.0 * task.embeddings.at(i * d) - 1.0 * task.embeddings.at(i * d + 4) + 5.0;
        }
        const ProbeResult result = nested_cv_evaluate(task, 31);
        CHECK(result.folds.size() == 5);
        CHECK(result.mean.mae < 1e-3);
        CHECK(result.mean.r2 > 0.999);

        // the reported mean matches recomputation from the folds
        double mean_mae = 0.0;
        for (const auto& f : result.folds) mean_mae += f.mae;
        CHECK(result.mean.mae == doctest::Approx(mean_mae / 5.0));
    }
    SUBCASE("permuted labels score near chance AUC") {
        const std::int64_t n = 300, d = 8;
        ProbeTask task;
        task.kind = TaskKind::CLASSIFICATION;
        task.class_count = 2;
        task.embeddings = random_matrix(n, d, rng);
        task.targets.resize(static_cast<std::size_t>(n));
        for (std::size_t i = 0; i < task.targets.size(); ++i) task.targets[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
        const ProbeResult result = nested_cv_evaluate(task, 77);
        CHECK(result.mean.auc > 0.4);
        CHECK(result.mean.auc < 0.6);
    }
    SUBCASE("no fit ever touches outer-test rows") {
        const std::int64_t n = 60, d = 4;
        ProbeTask task;
        task.kind = TaskKind::CLASSIFICATION;
        task.class_count = 2;
        task.embeddings = random_matrix(n, d, rng);
        task.targets.resize(static_cast<std::size_t>(n));
        for (std::int64_t i = 0; i < n; ++i) task.targets[static_cast<std::size_t>(i)] = i % 2 ? 1.0 : 0.0;

        std::vector<FitAuditRecord> audit;
        nested_cv_evaluate(task, 5, &audit);
        REQUIRE_FALSE(audit.empty());

        // reconstruct outer-test sets: all rows never used by the refit
        for (int outer = 0; outer < 5; ++outer) {
            std::set<std::int64_t> outer_train;
            std::size_t inner_fits = 0;
            for (const auto& record : audit) {
                if (record.outer_fold != outer) continue;
                if (!record.inner) outer_train.insert(record.rows.begin(), record.rows.end());
                else ++inner_fits;
            }
            CHECK(inner_fits == 5 * 13); // five inner folds for each grid value
            for (const auto& record : audit) {
                if (record.outer_fold != outer || !record.inner) continue;
                for (auto row : record.rows) {
                    CHECK_MESSAGE(outer_train.count(row) == 1, "inner fit touched an outer-test row");
                }
            }
        }
    }
    SUBCASE("stratification failure is a fold-construction error") {
        ProbeTask task;
        task.kind = TaskKind::CLASSIFICATION;
        task.class_count = 2;
        task.embeddings = random_matrix(20, 3, rng);
        task.targets.assign(20, 0.0);
        task.targets[3] = 1.0;
        task.targets[9] = 1.0; // only two positives: cannot stratify five folds
        CHECK_THROWS_AS(nested_cv_evaluate(task, 1), Error);
    }
    SUBCASE("tasks below the five-fold minimum are rejected") {
        ProbeTask task;
        task.kind = TaskKind::REGRESSION;
        task.embeddings = random_matrix(8, 2, rng);
        task.targets.assign(8, 1.0);
        CHECK_THROWS_AS(nested_cv_evaluate(task, 1), Error);
    }
}
