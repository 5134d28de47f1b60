#include "pulsealign/probe.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include "pulsealign/rng.hpp"

namespace pulsealign {

namespace {

Eigen::MatrixXd to_eigen(const Tensor<double>& x) {
    require(x.rank() == 2, ErrorKind::ShapeMismatch, "expected a matrix");
    return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        x.ptr(), x.dim(0), x.dim(1));
}

} // namespace

RidgeModel ridge_fit(const Tensor<double>& x, const std::vector<double>& y, double alpha) {
    require(alpha >= 0.0, ErrorKind::Config, "ridge alpha must be >= 0");
    require(x.rank() == 2 && x.dim(1) >= 1, ErrorKind::ShapeMismatch, "ridge needs at least one feature column");
    const std::int64_t n = x.dim(0), d = x.dim(1);
    require(static_cast<std::int64_t>(y.size()) == n && n >= 1, ErrorKind::ShapeMismatch,
            "ridge target length mismatch");

    Eigen::MatrixXd X = to_eigen(x);
    Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
    const Eigen::RowVectorXd x_mean = X.colwise().mean();
    const double y_mean = yv.mean();
    X.rowwise() -= x_mean;
    yv.array() -= y_mean;

    Eigen::MatrixXd gram = X.transpose() * X;
    gram.diagonal().array() += alpha;
    const Eigen::VectorXd rhs = X.transpose() * yv;
    Eigen::LDLT<Eigen::MatrixXd> solver(gram);
    Eigen::VectorXd w = solver.solve(rhs);

    const double residual = (gram * w - rhs).norm();
    const double scale = rhs.norm() + 1.0;
    require(w.allFinite() && residual <= 1e-6 * scale, ErrorKind::NumericFailure,
            "ridge normal equations are singular (alpha=" + std::to_string(alpha) + ")");

    RidgeModel model;
    model.weights.assign(w.data(), w.data() + d);
    model.intercept = y_mean - x_mean.dot(w);
    return model;
}

std::vector<double> ridge_predict(const RidgeModel& model, const Tensor<double>& x) {
    const std::int64_t n = x.dim(0), d = x.dim(1);
    require(static_cast<std::int64_t>(model.weights.size()) == d, ErrorKind::ShapeMismatch,
            "ridge model dimension mismatch");
    std::vector<double> out(static_cast<std::size_t>(n), model.intercept);
    for (std::int64_t i = 0; i < n; ++i) {
        const double* row = x.ptr() + i * d;
        double acc = model.intercept;
        for (std::int64_t j = 0; j < d; ++j) acc += row[j] * model.weights[static_cast<std::size_t>(j)];
        out[static_cast<std::size_t>(i)] = acc;
    }
    return out;
}

namespace {

// L-BFGS with Armijo backtracking on a smooth convex objective.
struct LbfgsProblem {
    const Eigen::MatrixXd& X;
    const Eigen::VectorXd& y01; // targets in {0, 1}
    double inv_cn;              // 1 / (C * N)

    double eval(const Eigen::VectorXd& theta, Eigen::VectorXd& grad) const {
        const std::int64_t n = X.rows(), d = X.cols();
        const Eigen::VectorXd w = theta.head(d);
        const double b = theta(d);
        Eigen::VectorXd margin = X * w;
        margin.array() += b;

        double loss = 0.0;
        Eigen::VectorXd prob(n);
        for (std::int64_t i = 0; i < n; ++i) {
            const double m = margin(i);
            // log(1 + exp(m)) - y*m, computed stably
            loss += std::max(m, 0.0) - y01(i) * m + std::log1p(std::exp(-std::abs(m)));
            prob(i) = m >= 0 ? 1.0 / (1.0 + std::exp(-m)) : std::exp(m) / (1.0 + std::exp(m));
        }
        loss /= static_cast<double>(n);
        loss += 0.5 * inv_cn * w.squaredNorm();

        const Eigen::VectorXd diff = (prob - y01) / static_cast<double>(n);
        grad.resize(d + 1);
        grad.head(d) = X.transpose() * diff + inv_cn * w;
        grad(d) = diff.sum();
        return loss;
    }
};

std::int64_t lbfgs_minimize(const LbfgsProblem& problem, Eigen::VectorXd& theta, double tol, std::int64_t max_iter) {
    const std::int64_t dim = theta.size();
    Eigen::VectorXd grad(dim);
    double f = problem.eval(theta, grad);

    std::deque<Eigen::VectorXd> s_hist, y_hist;
    std::deque<double> rho_hist;
    const std::size_t memory = 10;

    std::int64_t iter = 0;
    for (; iter < max_iter && grad.norm() >= tol; ++iter) {
        // Two-loop recursion.
        Eigen::VectorXd q = grad;
        std::vector<double> alpha(s_hist.size());
        for (std::size_t k = s_hist.size(); k-- > 0;) {
            alpha[k] = rho_hist[k] * s_hist[k].dot(q);
            q -= alpha[k] * y_hist[k];
        }
        if (!s_hist.empty()) {
            const double gamma = s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
            q *= gamma;
        }
        for (std::size_t k = 0; k < s_hist.size(); ++k) {
            const double beta = rho_hist[k] * y_hist[k].dot(q);
            q += (alpha[k] - beta) * s_hist[k];
        }
        Eigen::VectorXd direction = -q;
        double descent = grad.dot(direction);
        if (descent >= 0.0) { // fall back to steepest descent
            direction = -grad;
            descent = -grad.squaredNorm();
        }

        double step = s_hist.empty() ? std::min(1.0, 1.0 / grad.norm()) : 1.0;
        Eigen::VectorXd theta_new;
        Eigen::VectorXd grad_new(dim);
        double f_new = f;
        bool accepted = false;
        for (int ls = 0; ls < 50; ++ls) {
            theta_new = theta + step * direction;
            f_new = problem.eval(theta_new, grad_new);
            if (f_new <= f + 1e-4 * step * descent) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break; // stalled at numerical precision

        const Eigen::VectorXd s = theta_new - theta;
        const Eigen::VectorXd yv = grad_new - grad;
        const double sy = s.dot(yv);
        if (sy > 1e-12) {
            s_hist.push_back(s);
            y_hist.push_back(yv);
            rho_hist.push_back(1.0 / sy);
            if (s_hist.size() > memory) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
        }
        theta = theta_new;
        grad = grad_new;
        f = f_new;
    }
    return iter;
}

} // namespace

LogisticModel logistic_fit(const Tensor<double>& x, const std::vector<int>& y, double c, std::int64_t class_count) {
    require(c > 0.0, ErrorKind::Config, "logistic C must be positive");
    require(x.rank() == 2, ErrorKind::ShapeMismatch, "logistic expects a matrix");
    const std::int64_t n = x.dim(0), d = x.dim(1);
    require(static_cast<std::int64_t>(y.size()) == n && n >= 1, ErrorKind::ShapeMismatch,
            "logistic target length mismatch");
    require(class_count >= 2, ErrorKind::Config, "logistic needs at least two classes");

    std::vector<std::int64_t> counts(static_cast<std::size_t>(class_count), 0);
    for (int label : y) {
        require(label >= 0 && label < class_count, ErrorKind::DataError,
                "class label " + std::to_string(label) + " outside [0, " + std::to_string(class_count) + ")");
        ++counts[static_cast<std::size_t>(label)];
    }
    std::int64_t present = 0;
    for (auto cnt : counts) present += cnt > 0 ? 1 : 0;
    require(present >= 2, ErrorKind::DataError, "logistic training data contains a single class");

    const Eigen::MatrixXd X = to_eigen(x);
    LogisticModel model;
    model.class_count = class_count;
    model.weights = Tensor<double>({class_count, d});
    model.intercepts.assign(static_cast<std::size_t>(class_count), 0.0);

    for (std::int64_t k = 0; k < class_count; ++k) {
        Eigen::VectorXd y01(n);
        for (std::int64_t i = 0; i < n; ++i) y01(i) = y[static_cast<std::size_t>(i)] == k ? 1.0 : 0.0;
        LbfgsProblem problem{X, y01, 1.0 / (c * static_cast<double>(n))};
        Eigen::VectorXd theta = Eigen::VectorXd::Zero(d + 1);
        const std::int64_t iters = lbfgs_minimize(problem, theta, 1e-6, 1000);
        model.iterations = std::max(model.iterations, iters);
        for (std::int64_t j = 0; j < d; ++j) model.weights.at(k * d + j) = theta(j);
        model.intercepts[static_cast<std::size_t>(k)] = theta(d);
    }
    return model;
}

Tensor<double> logistic_scores(const LogisticModel& model, const Tensor<double>& x) {
    const std::int64_t n = x.dim(0), d = x.dim(1);
    require(model.weights.dim(1) == d, ErrorKind::ShapeMismatch, "logistic model dimension mismatch");
    Tensor<double> scores({n, model.class_count});
    for (std::int64_t i = 0; i < n; ++i) {
        const double* row = x.ptr() + i * d;
        for (std::int64_t k = 0; k < model.class_count; ++k) {
            double m = model.intercepts[static_cast<std::size_t>(k)];
            const double* w = model.weights.ptr() + k * d;
            for (std::int64_t j = 0; j < d; ++j) m += w[j] * row[j];
            scores.at(i * model.class_count + k) =
                m >= 0 ? 1.0 / (1.0 + std::exp(-m)) : std::exp(m) / (1.0 + std::exp(m));
        }
    }
    return scores;
}

RegressionMetrics regression_metrics(const std::vector<double>& y_true, const std::vector<double>& y_pred) {
    require(y_true.size() == y_pred.size() && !y_true.empty(), ErrorKind::ShapeMismatch,
            "regression metrics need matching non-empty vectors");
    const double n = static_cast<double>(y_true.size());
    double mean_y = 0.0;
    for (double v : y_true) mean_y += v;
    mean_y /= n;

    double mae = 0.0, sse = 0.0, sst = 0.0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const double err = y_pred[i] - y_true[i];
        mae += std::abs(err);
        sse += err * err;
        sst += (y_true[i] - mean_y) * (y_true[i] - mean_y);
    }
    require(sst > 0.0, ErrorKind::NumericFailure, "targets have zero variance; R^2 is undefined");
    return {mae / n, 1.0 - sse / sst};
}

double binary_auc(const std::vector<int>& labels, const std::vector<double>& scores) {
    require(labels.size() == scores.size() && !labels.empty(), ErrorKind::ShapeMismatch,
            "auc needs matching non-empty vectors");
    const std::size_t n = labels.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Average ranks over ties, then the Mann-Whitney statistic.
    std::vector<double> rank(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
        i = j + 1;
    }

    double rank_sum = 0.0;
    std::size_t n_pos = 0;
    for (std::size_t k = 0; k < n; ++k) {
        if (labels[k] == 1) {
            rank_sum += rank[k];
            ++n_pos;
        }
    }
    const std::size_t n_neg = n - n_pos;
    require(n_pos > 0 && n_neg > 0, ErrorKind::NumericFailure, "auc needs both classes present");
    return (rank_sum - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1)) /
           (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

ClassificationMetrics classification_metrics(const std::vector<int>& y_true, const Tensor<double>& scores) {
    require(scores.rank() == 2 && scores.dim(0) == static_cast<std::int64_t>(y_true.size()), ErrorKind::ShapeMismatch,
            "scores must be [N, K]");
    const std::int64_t n = scores.dim(0), k_classes = scores.dim(1);
    require(n >= 1 && k_classes >= 2, ErrorKind::Usage, "need N >= 1 and K >= 2");

    // Macro one-vs-rest AUC over classes with both outcomes present.
    double auc_sum = 0.0;
    std::int64_t auc_terms = 0;
    for (std::int64_t k = 0; k < k_classes; ++k) {
        std::vector<int> labels(static_cast<std::size_t>(n));
        std::vector<double> class_scores(static_cast<std::size_t>(n));
        std::int64_t positives = 0;
        for (std::int64_t i = 0; i < n; ++i) {
            labels[static_cast<std::size_t>(i)] = y_true[static_cast<std::size_t>(i)] == k ? 1 : 0;
            positives += labels[static_cast<std::size_t>(i)];
            class_scores[static_cast<std::size_t>(i)] = scores.at(i * k_classes + k);
        }
        if (positives == 0 || positives == n) continue;
        auc_sum += binary_auc(labels, class_scores);
        ++auc_terms;
    }
    require(auc_terms > 0, ErrorKind::NumericFailure, "no class has both outcomes; AUC undefined");

    // Argmax predictions for accuracy and macro F1.
    std::vector<std::int64_t> tp(static_cast<std::size_t>(k_classes), 0);
    std::vector<std::int64_t> fp(static_cast<std::size_t>(k_classes), 0);
    std::vector<std::int64_t> fn(static_cast<std::size_t>(k_classes), 0);
    std::int64_t correct = 0;
    for (std::int64_t i = 0; i < n; ++i) {
        std::int64_t arg = 0;
        for (std::int64_t k = 1; k < k_classes; ++k) {
            if (scores.at(i * k_classes + k) > scores.at(i * k_classes + arg)) arg = k;
        }
        const int truth = y_true[static_cast<std::size_t>(i)];
        if (arg == truth) {
            ++correct;
            ++tp[static_cast<std::size_t>(arg)];
        } else {
            ++fp[static_cast<std::size_t>(arg)];
            ++fn[static_cast<std::size_t>(truth)];
        }
    }
    double f1_sum = 0.0;
    for (std::int64_t k = 0; k < k_classes; ++k) {
        const double denom = 2.0 * static_cast<double>(tp[static_cast<std::size_t>(k)]) +
                             static_cast<double>(fp[static_cast<std::size_t>(k)] + fn[static_cast<std::size_t>(k)]);
        f1_sum += denom > 0.0 ? 2.0 * static_cast<double>(tp[static_cast<std::size_t>(k)]) / denom : 0.0;
    }

    ClassificationMetrics out;
    out.auc_macro = auc_sum / static_cast<double>(auc_terms);
    out.f1_macro = f1_sum / static_cast<double>(k_classes);
    out.accuracy = static_cast<double>(correct) / static_cast<double>(n);
    return out;
}

// ---------------------------------------------------------------------------
// Nested cross-validation
// ---------------------------------------------------------------------------

void ProbeTask::validate() const {
    require(embeddings.rank() == 2, ErrorKind::ShapeMismatch, "embeddings must be [N, D]");
    const std::int64_t n = embeddings.dim(0);
    require(static_cast<std::int64_t>(targets.size()) == n, ErrorKind::ShapeMismatch,
            "one target per embedding row required");
    require(n >= 10, ErrorKind::Usage, "need at least 10 samples for five-fold evaluation");
    if (kind == TaskKind::CLASSIFICATION) {
        require(class_count >= 2, ErrorKind::Config, "classification needs class_count >= 2");
        for (double t : targets) {
            const int label = static_cast<int>(t);
            require(static_cast<double>(label) == t && label >= 0 && label < class_count, ErrorKind::DataError,
                    "class labels must be integers in [0, class_count)");
        }
    }
}

namespace {

constexpr int kFolds = 5;

struct Scaler {
    std::vector<double> mean;
    std::vector<double> scale;

    static Scaler fit(const Tensor<double>& x, const std::vector<std::int64_t>& rows) {
        const std::int64_t d = x.dim(1);
        Scaler s;
        s.mean.assign(static_cast<std::size_t>(d), 0.0);
        s.scale.assign(static_cast<std::size_t>(d), 1.0);
        for (auto r : rows) {
            const double* row = x.ptr() + r * d;
            for (std::int64_t j = 0; j < d; ++j) s.mean[static_cast<std::size_t>(j)] += row[j];
        }
        for (auto& m : s.mean) m /= static_cast<double>(rows.size());
        std::vector<double> var(static_cast<std::size_t>(d), 0.0);
        for (auto r : rows) {
            const double* row = x.ptr() + r * d;
            for (std::int64_t j = 0; j < d; ++j) {
                const double diff = row[j] - s.mean[static_cast<std::size_t>(j)];
                var[static_cast<std::size_t>(j)] += diff * diff;
            }
        }
        for (std::int64_t j = 0; j < d; ++j) {
            const double sd = std::sqrt(var[static_cast<std::size_t>(j)] / static_cast<double>(rows.size()));
            s.scale[static_cast<std::size_t>(j)] = sd > 0.0 ? sd : 1.0;
        }
        return s;
    }

    Tensor<double> gather(const Tensor<double>& x, const std::vector<std::int64_t>& rows) const {
        const std::int64_t d = x.dim(1);
        Tensor<double> out({static_cast<std::int64_t>(rows.size()), d});
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const double* row = x.ptr() + rows[i] * d;
            double* dst = out.ptr() + static_cast<std::int64_t>(i) * d;
            for (std::int64_t j = 0; j < d; ++j) {
                dst[j] = (row[j] - mean[static_cast<std::size_t>(j)]) / scale[static_cast<std::size_t>(j)];
            }
        }
        return out;
    }
};

std::vector<std::vector<std::int64_t>> make_folds(const ProbeTask& task, const std::vector<std::int64_t>& rows,
                                                  Rng& rng) {
    std::vector<std::int64_t> order = rows;
    rng.shuffle(order);
    std::vector<std::vector<std::int64_t>> folds(kFolds);
    if (task.kind == TaskKind::CLASSIFICATION) {
        // Stratified: deal each class round-robin across the folds.
        for (std::int64_t k = 0; k < task.class_count; ++k) {
            std::size_t dealt = 0;
            for (auto r : order) {
                if (static_cast<int>(task.targets[static_cast<std::size_t>(r)]) != k) continue;
                folds[dealt % kFolds].push_back(r);
                ++dealt;
            }
            require(dealt >= kFolds, ErrorKind::DataError,
                    "class " + std::to_string(k) + " has " + std::to_string(dealt) +
                        " samples; stratified five-fold splitting needs at least " + std::to_string(kFolds));
        }
    } else {
        for (std::size_t i = 0; i < order.size(); ++i) folds[i % kFolds].push_back(order[i]);
    }
    return folds;
}

std::vector<double> gather_targets(const std::vector<double>& targets, const std::vector<std::int64_t>& rows) {
    std::vector<double> out;
    out.reserve(rows.size());
    for (auto r : rows) out.push_back(targets[static_cast<std::size_t>(r)]);
    return out;
}

std::vector<int> gather_labels(const std::vector<double>& targets, const std::vector<std::int64_t>& rows) {
    std::vector<int> out;
    out.reserve(rows.size());
    for (auto r : rows) out.push_back(static_cast<int>(targets[static_cast<std::size_t>(r)]));
    return out;
}

struct FitEval {
    double selection_score = 0.0; // lower is better for both kinds (negated AUC)
    FoldMetrics metrics;
};

// Fits on train rows, evaluates on eval rows; standardization is fit on the
// training rows only.
FitEval fit_and_eval(const ProbeTask& task, const std::vector<std::int64_t>& train_rows,
                     const std::vector<std::int64_t>& eval_rows, double hyper, int outer_fold, bool inner,
                     std::vector<FitAuditRecord>* audit) {
    if (audit) audit->push_back({outer_fold, inner, train_rows});
    const Scaler scaler = Scaler::fit(task.embeddings, train_rows);
    const Tensor<double> x_train = scaler.gather(task.embeddings, train_rows);
    const Tensor<double> x_eval = scaler.gather(task.embeddings, eval_rows);

    FitEval out;
    out.metrics.hyperparameter = hyper;
    if (task.kind == TaskKind::REGRESSION) {
        const RidgeModel model = ridge_fit(x_train, gather_targets(task.targets, train_rows), hyper);
        const RegressionMetrics m =
            regression_metrics(gather_targets(task.targets, eval_rows), ridge_predict(model, x_eval));
        out.metrics.mae = m.mae;
        out.metrics.r2 = m.r2;
        out.selection_score = m.mae;
    } else {
        const LogisticModel model =
            logistic_fit(x_train, gather_labels(task.targets, train_rows), hyper, task.class_count);
        const ClassificationMetrics m =
            classification_metrics(gather_labels(task.targets, eval_rows), logistic_scores(model, x_eval));
        out.metrics.auc = m.auc_macro;
        out.metrics.f1 = m.f1_macro;
        out.metrics.accuracy = m.accuracy;
        out.selection_score = -m.auc_macro;
    }
    return out;
}

} // namespace

ProbeResult nested_cv_evaluate(const ProbeTask& task, std::uint64_t seed, std::vector<FitAuditRecord>* audit) {
    task.validate();
    const std::int64_t n = task.embeddings.dim(0);
    std::vector<std::int64_t> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), 0);

    // Grid ordered from the strongest regularization to the weakest, so ties
    // resolve toward the more regularized model.
    std::vector<double> grid;
    if (task.kind == TaskKind::REGRESSION) {
        for (int e = 6; e >= -6; --e) grid.push_back(std::pow(10.0, e)); // alpha descending
    } else {
        for (int e = -6; e <= 6; ++e) grid.push_back(std::pow(10.0, e)); // C ascending
    }

    Rng rng(seed);
    const auto outer_folds = make_folds(task, all, rng);

    ProbeResult result;
    for (int outer = 0; outer < kFolds; ++outer) {
        const std::vector<std::int64_t>& test_rows = outer_folds[static_cast<std::size_t>(outer)];
        std::vector<std::int64_t> train_rows;
        for (int f = 0; f < kFolds; ++f) {
            if (f == outer) continue;
            train_rows.insert(train_rows.end(), outer_folds[static_cast<std::size_t>(f)].begin(),
                              outer_folds[static_cast<std::size_t>(f)].end());
        }

        Rng inner_rng = rng.fork(static_cast<std::uint64_t>(outer) + 100);
        const auto inner_folds = make_folds(task, train_rows, inner_rng);

        double best_hyper = grid.front();
        double best_score = std::numeric_limits<double>::infinity();
        for (double hyper : grid) {
            double score_sum = 0.0;
            for (int inner = 0; inner < kFolds; ++inner) {
                std::vector<std::int64_t> inner_train;
                for (int f = 0; f < kFolds; ++f) {
                    if (f == inner) continue;
                    inner_train.insert(inner_train.end(), inner_folds[static_cast<std::size_t>(f)].begin(),
                                       inner_folds[static_cast<std::size_t>(f)].end());
                }
                score_sum += fit_and_eval(task, inner_train, inner_folds[static_cast<std::size_t>(inner)], hyper,
                                          outer, /*inner=*/true, audit)
                                 .selection_score;
            }
            const double score = score_sum / kFolds;
            if (score < best_score) { // strictly better only: ties keep stronger regularization
                best_score = score;
                best_hyper = hyper;
            }
        }

        result.folds.push_back(
            fit_and_eval(task, train_rows, test_rows, best_hyper, outer, /*inner=*/false, audit).metrics);
    }

    auto accumulate = [&](auto field) {
        double mean_v = 0.0;
        for (const auto& f : result.folds) mean_v += f.*field;
        mean_v /= static_cast<double>(result.folds.size());
        double var = 0.0;
        for (const auto& f : result.folds) var += (f.*field - mean_v) * (f.*field - mean_v);
        var /= static_cast<double>(result.folds.size() - 1);
        return std::make_pair(mean_v, std::sqrt(var));
    };
    std::tie(result.mean.mae, result.stddev.mae) = accumulate(&FoldMetrics::mae);
    std::tie(result.mean.r2, result.stddev.r2) = accumulate(&FoldMetrics::r2);
    std::tie(result.mean.auc, result.stddev.auc) = accumulate(&FoldMetrics::auc);
    std::tie(result.mean.f1, result.stddev.f1) = accumulate(&FoldMetrics::f1);
    std::tie(result.mean.accuracy, result.stddev.accuracy) = accumulate(&FoldMetrics::accuracy);
    return result;
}

} // namespace pulsealign
