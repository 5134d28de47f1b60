// Command-line front end: synth, preprocess, pretrain, eval-retrieval,
// probe, finetune, inspect-checkpoint. Exit codes: 0 success, 1 usage error,
// 2 data/validation error.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "pulsealign/manifest.hpp"
#include "pulsealign/preprocess.hpp"
#include "pulsealign/probe.hpp"
#include "pulsealign/synthgen.hpp"
#include "pulsealign/threading.hpp"
#include "pulsealign/trainer.hpp"

namespace pa = pulsealign;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class WallClock {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

pa::KeyValueConfig load_config_or_empty(const std::string& path) {
    if (path.empty()) return pa::KeyValueConfig::from_string("", "<defaults>");
    return pa::KeyValueConfig::from_file(path);
}

pa::TrainConfig train_config_from(const pa::KeyValueConfig& kv) {
    pa::TrainConfig cfg;
    cfg.base_lr = kv.get_double("base_lr", cfg.base_lr);
    cfg.weight_decay = kv.get_double("weight_decay", cfg.weight_decay);
    cfg.total_steps = kv.get_int("total_steps", cfg.total_steps);
    cfg.warmup_steps = kv.get_int("warmup_steps", cfg.warmup_steps);
    cfg.clip_norm = kv.get_double("clip_norm", cfg.clip_norm);
    cfg.batch_size = kv.get_int("batch_size", cfg.batch_size);
    cfg.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<std::int64_t>(cfg.seed)));
    cfg.eval_every = kv.get_int("eval_every", cfg.eval_every);
    cfg.adam_betas.first = kv.get_double("adam_beta1", cfg.adam_betas.first);
    cfg.adam_betas.second = kv.get_double("adam_beta2", cfg.adam_betas.second);
    cfg.adam_eps = kv.get_double("adam_eps", cfg.adam_eps);
    cfg.final_lr = kv.get_double("final_lr", cfg.final_lr);
    cfg.decay_norm_and_temperature = kv.get_bool("decay_norm_and_temperature", cfg.decay_norm_and_temperature);
    return cfg;
}

pa::EncoderConfig encoder_config_from(const pa::KeyValueConfig& kv) {
    const std::string preset = kv.get_string("encoder_preset", "compact");
    pa::EncoderConfig cfg;
    if (preset == "compact") {
        cfg = pa::EncoderConfig::compact();
    } else if (preset == "reference") {
        cfg = pa::EncoderConfig::reference();
    } else {
        pa::fail(pa::ErrorKind::Config, "unknown encoder_preset '" + preset + "' (compact|reference)");
    }
    if (kv.has("stage_specs")) {
        // "blocks:c_in:c_out,..." with blocks=0 for the stem.
        cfg.stage_specs.clear();
        std::istringstream in(kv.get_string("stage_specs", ""));
        std::string item;
        while (std::getline(in, item, ',')) {
            long blocks = 0, c_in = 0, c_out = 0;
            if (std::sscanf(item.c_str(), "%ld:%ld:%ld", &blocks, &c_in, &c_out) != 3) {
                pa::fail(pa::ErrorKind::Config, "bad stage spec entry: " + item);
            }
            cfg.stage_specs.push_back({blocks, c_in, c_out});
        }
    }
    cfg.input_length = kv.get_int("input_length", cfg.input_length);
    cfg.se_reduction = kv.get_int("se_reduction", cfg.se_reduction);
    cfg.dropout_p = kv.get_double("dropout_p", cfg.dropout_p);
    cfg.bottleneck_ratio = kv.get_double("bottleneck_ratio", cfg.bottleneck_ratio);
    cfg.validate();
    return cfg;
}

pa::ProjectorConfig projector_config_from(const pa::KeyValueConfig& kv, const pa::EncoderConfig& enc) {
    pa::ProjectorConfig cfg = pa::ProjectorConfig::for_embedding(enc.embedding_dim());
    cfg.hidden_dim = kv.get_int("projector_hidden", cfg.hidden_dim);
    cfg.out_dim = kv.get_int("projector_out", cfg.out_dim);
    return cfg;
}

pa::PreprocessConfig preprocess_config_from(const pa::KeyValueConfig& kv) {
    pa::PreprocessConfig cfg;
    cfg.segment_seconds = kv.get_double("segment_seconds", cfg.segment_seconds);
    cfg.invalid_fraction_max = kv.get_double("invalid_fraction_max", cfg.invalid_fraction_max);
    cfg.ppg_band_hz.first = kv.get_double("ppg_band_low", cfg.ppg_band_hz.first);
    cfg.ppg_band_hz.second = kv.get_double("ppg_band_high", cfg.ppg_band_hz.second);
    cfg.ecg_band_hz.first = kv.get_double("ecg_band_low", cfg.ecg_band_hz.first);
    cfg.ecg_band_hz.second = kv.get_double("ecg_band_high", cfg.ecg_band_hz.second);
    cfg.notch_hz = kv.get_double("notch_hz", cfg.notch_hz);
    cfg.notch_q = kv.get_double("notch_q", cfg.notch_q);
    cfg.target_rate_hz = kv.get_double("target_rate_hz", cfg.target_rate_hz);
    cfg.filter_order = static_cast<int>(kv.get_int("filter_order", cfg.filter_order));
    cfg.flatline_std_epsilon = kv.get_double("flatline_std_epsilon", cfg.flatline_std_epsilon);
    cfg.sqi_enabled = kv.get_bool("sqi_enabled", cfg.sqi_enabled);
    cfg.validate();
    return cfg;
}

std::map<std::string, std::string> snapshot(const pa::KeyValueConfig& kv) { return kv.values(); }

pa::Tensor<float> rows_from_store(const std::string& path, std::int64_t expected_length) {
    const std::vector<pa::Waveform> segments = pa::read_store(path);
    const std::int64_t n = static_cast<std::int64_t>(segments.size());
    const std::int64_t len = n > 0 ? segments.front().size() : expected_length;
    if (expected_length > 0 && n > 0) {
        pa::require(len == expected_length, pa::ErrorKind::DataError,
                    path + ": segments are " + std::to_string(len) + " samples, model expects " +
                        std::to_string(expected_length));
    }
    pa::Tensor<float> rows({n, len});
    for (std::int64_t i = 0; i < n; ++i) {
        for (std::int64_t j = 0; j < len; ++j) {
            rows.at(i * len + j) =
                static_cast<float>(segments[static_cast<std::size_t>(i)].samples[static_cast<std::size_t>(j)]);
        }
    }
    return rows;
}

json report_to_json(const pa::RetrievalReport& r) {
    return json{{"r_at_1", r.r_at_1},       {"r_at_5", r.r_at_5}, {"r_at_10", r.r_at_10},
                {"map_at_10", r.map_at_10}, {"mrr", r.mrr},       {"n_samples", r.n_samples},
                {"batch_count", r.batch_count}};
}

void print_report(const std::string& label, const pa::RetrievalReport& r) {
    std::printf("%-24s R@1=%.3f R@5=%.3f R@10=%.3f mAP@10=%.3f MRR=%.3f (n=%lld)\n", label.c_str(), r.r_at_1,
                r.r_at_5, r.r_at_10, r.map_at_10, r.mrr, static_cast<long long>(r.n_samples));
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int run_synth(std::int64_t n, double seconds, double rate, std::uint64_t seed, const std::string& out_dir,
              const std::string& config_path) {
    WallClock clock;
    const pa::KeyValueConfig kv = load_config_or_empty(config_path);
    pa::LatentDistribution dist;
    dist.heart_rate_bpm = {kv.get_double("hr_min", dist.heart_rate_bpm.first),
                           kv.get_double("hr_max", dist.heart_rate_bpm.second)};
    dist.p_irregular = kv.get_double("p_irregular", dist.p_irregular);
    dist.hrv_jitter_s = {kv.get_double("jitter_min", dist.hrv_jitter_s.first),
                         kv.get_double("jitter_max", dist.hrv_jitter_s.second)};
    dist.pulse_transit_delay_s = {kv.get_double("delay_min", dist.pulse_transit_delay_s.first),
                                  kv.get_double("delay_max", dist.pulse_transit_delay_s.second)};
    dist.noise_std = {kv.get_double("noise_min", dist.noise_std.first),
                      kv.get_double("noise_max", dist.noise_std.second)};

    const pa::SynthDataset data = pa::write_synth_dataset(n, dist, seconds, rate, seed, out_dir);

    // Ready-to-probe target files in (segment_index, target) form.
    {
        std::ofstream hr(out_dir + "/targets_hr.csv"), rhythm(out_dir + "/targets_rhythm.csv");
        hr << "segment_index,target\n";
        rhythm << "segment_index,target\n";
        hr.precision(17);
        for (const auto& l : data.labels) {
            hr << l.index << ',' << l.heart_rate_bpm << '\n';
            rhythm << l.index << ',' << (l.irregular ? 1 : 0) << '\n';
        }
    }

    pa::RunManifest manifest;
    manifest.command = "synth";
    manifest.seed = seed;
    manifest.config = snapshot(kv);
    manifest.config["n"] = std::to_string(n);
    manifest.config["seconds"] = std::to_string(seconds);
    manifest.config["rate"] = std::to_string(rate);
    manifest.outputs = {out_dir + "/ppg.apss", out_dir + "/ecg.apss", out_dir + "/labels.csv",
                        out_dir + "/targets_hr.csv", out_dir + "/targets_rhythm.csv"};
    manifest.wall_time_s = clock.seconds();
    manifest.write(out_dir + "/manifest.json");

    std::printf("wrote %lld pairs (%.0f s @ %.0f Hz) under %s\n", static_cast<long long>(n), seconds, rate,
                out_dir.c_str());
    return 0;
}

int run_preprocess(const std::string& ppg_path, const std::string& ecg_path, const std::string& config_path,
                   const std::string& out_dir) {
    WallClock clock;
    const pa::KeyValueConfig kv = load_config_or_empty(config_path);
    const pa::PreprocessConfig cfg = preprocess_config_from(kv);

    const std::vector<pa::Waveform> ppg_recs = pa::read_store(ppg_path);
    const std::vector<pa::Waveform> ecg_recs = pa::read_store(ecg_path);
    pa::require(ppg_recs.size() == ecg_recs.size(), pa::ErrorKind::DataError,
                "stores hold different recording counts: " + std::to_string(ppg_recs.size()) + " vs " +
                    std::to_string(ecg_recs.size()));

    fs::create_directories(out_dir);
    std::ofstream pairs_manifest(out_dir + "/pairs_manifest.txt");
    pairs_manifest << "# recording segment kept reason\n";

    std::vector<pa::Waveform> kept_ppg, kept_ecg;
    for (std::size_t r = 0; r < ppg_recs.size(); ++r) {
        pa::Waveform ppg = ppg_recs[r];
        pa::Waveform ecg = ecg_recs[r];
        ppg.modality = pa::Modality::PPG;
        ecg.modality = pa::Modality::ECG;
        const pa::PreprocessResult result = pa::preprocess_pair_pipeline(ppg, ecg, cfg);
        for (const auto& record : result.records) {
            pairs_manifest << r << ' ' << record.index << ' ' << (record.kept ? 1 : 0) << ' '
                           << (record.kept ? "-" : record.reason) << '\n';
        }
        for (const auto& pair : result.pairs) {
            kept_ppg.push_back(pair.ppg);
            kept_ecg.push_back(pair.ecg);
        }
    }

    const std::int64_t seg_len = std::llround(cfg.segment_seconds * cfg.target_rate_hz);
    pa::write_store(kept_ppg, out_dir + "/ppg.apss", pa::Modality::PPG, cfg.target_rate_hz, seg_len);
    pa::write_store(kept_ecg, out_dir + "/ecg.apss", pa::Modality::ECG, cfg.target_rate_hz, seg_len);

    pa::RunManifest manifest;
    manifest.command = "preprocess";
    manifest.config = snapshot(kv);
    manifest.add_input(ppg_path);
    manifest.add_input(ecg_path);
    manifest.outputs = {out_dir + "/ppg.apss", out_dir + "/ecg.apss", out_dir + "/pairs_manifest.txt"};
    manifest.wall_time_s = clock.seconds();
    manifest.write(out_dir + "/manifest.json");

    std::printf("kept %zu pairs from %zu recordings -> %s\n", kept_ppg.size(), ppg_recs.size(), out_dir.c_str());
    return 0;
}

int run_pretrain(const std::string& ppg_path, const std::string& ecg_path, const std::string& config_path,
                 const std::string& out_dir) {
    WallClock clock;
    const pa::KeyValueConfig kv = load_config_or_empty(config_path);
    const pa::TrainConfig cfg = train_config_from(kv);
    const pa::EncoderConfig enc_cfg = encoder_config_from(kv);
    const pa::ProjectorConfig proj_cfg = projector_config_from(kv, enc_cfg);

    const pa::PairDataset data = pa::load_pair_dataset(ppg_path, ecg_path);
    pa::require(data.segment_length() == enc_cfg.input_length, pa::ErrorKind::DataError,
                "segments are " + std::to_string(data.segment_length()) + " samples, encoder expects " +
                    std::to_string(enc_cfg.input_length));
    const double val_fraction = kv.get_double("val_fraction", 0.1);
    const double test_fraction = kv.get_double("test_fraction", 0.1);
    const pa::DataSplit split = pa::split_dataset(data.size(), cfg.seed, val_fraction, test_fraction);

    const pa::TrainHistory history = pa::pretrain_contrastive(data, split, cfg, enc_cfg, proj_cfg);

    fs::create_directories(out_dir);
    {
        std::ofstream log(out_dir + "/history.jsonl");
        for (std::size_t i = 0; i < history.step_losses.size(); ++i) {
            log << json{{"step", i + 1}, {"loss", history.step_losses[i]}}.dump() << '\n';
        }
        for (const auto& [step, loss] : history.val_losses) {
            log << json{{"step", step}, {"val_loss", loss}}.dump() << '\n';
        }
    }
    const pa::Checkpoint& best = history.checkpoints[history.best_index];
    pa::save_checkpoint(best, out_dir + "/ckpt_best.apck");
    pa::save_checkpoint(history.checkpoints.back(), out_dir + "/ckpt_last.apck");

    pa::RunManifest manifest;
    manifest.command = "pretrain";
    manifest.seed = cfg.seed;
    manifest.config = snapshot(kv);
    manifest.add_input(ppg_path);
    manifest.add_input(ecg_path);
    manifest.outputs = {out_dir + "/ckpt_best.apck", out_dir + "/ckpt_last.apck", out_dir + "/history.jsonl"};
    manifest.wall_time_s = clock.seconds();
    manifest.write(out_dir + "/manifest.json");

    std::printf("trained %lld steps; best validation loss %.4f at step %llu -> %s\n",
                static_cast<long long>(cfg.total_steps), best.validation_loss,
                static_cast<unsigned long long>(best.step), out_dir.c_str());
    return 0;
}

int run_eval_retrieval(const std::string& ppg_path, const std::string& ecg_path, const std::string& ckpt_path,
                       std::int64_t batch, const std::string& out_dir) {
    WallClock clock;
    const pa::Checkpoint ckpt = pa::load_checkpoint(ckpt_path);
    pa::DualEncoderModel model = pa::DualEncoderModel::from_checkpoint(ckpt);

    const pa::Tensor<float> ppg = rows_from_store(ppg_path, ckpt.encoder_config.input_length);
    const pa::Tensor<float> ecg = rows_from_store(ecg_path, ckpt.encoder_config.input_length);
    pa::require(ppg.dim(0) == ecg.dim(0), pa::ErrorKind::DataError, "stores hold different pair counts");

    const pa::RetrievalEvaluation eval = pa::evaluate_retrieval(model, ppg, ecg, batch);

    fs::create_directories(out_dir);
    {
        std::ofstream lines(out_dir + "/retrieval_batches.jsonl");
        for (std::size_t i = 0; i < eval.per_batch.size(); ++i) {
            json j = report_to_json(eval.per_batch[i]);
            j["batch"] = i;
            lines << j.dump() << '\n';
        }
        json summary;
        summary["weighted"] = report_to_json(eval.weighted);
        summary["macro"] = report_to_json(eval.macro);
        std::ofstream out(out_dir + "/retrieval_report.json");
        out << summary.dump(2) << '\n';
    }

    for (std::size_t i = 0; i < eval.per_batch.size(); ++i) {
        print_report("batch " + std::to_string(i), eval.per_batch[i]);
    }
    print_report("aggregate (weighted)", eval.weighted);
    print_report("aggregate (macro)", eval.macro);

    pa::RunManifest manifest;
    manifest.command = "eval-retrieval";
    manifest.config["batch"] = std::to_string(batch);
    manifest.add_input(ppg_path);
    manifest.add_input(ecg_path);
    manifest.add_input(ckpt_path);
    manifest.outputs = {out_dir + "/retrieval_batches.jsonl", out_dir + "/retrieval_report.json"};
    manifest.wall_time_s = clock.seconds();
    manifest.write(out_dir + "/eval-retrieval-manifest.json");
    return 0;
}

std::vector<std::pair<std::int64_t, double>> read_targets_csv(const std::string& path) {
    std::ifstream in(path);
    pa::require(in.good(), pa::ErrorKind::Io, "cannot open: " + path);
    std::vector<std::pair<std::int64_t, double>> rows;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (header) {
            header = false;
            continue;
        }
        std::int64_t index = 0;
        double value = 0.0;
        char comma = 0;
        std::istringstream row(line);
        row >> index >> comma >> value;
        pa::require(!row.fail() && comma == ',', pa::ErrorKind::DataError, path + ": malformed row: " + line);
        rows.emplace_back(index, value);
    }
    return rows;
}

int run_probe(const std::string& ckpt_path, const std::string& store_path, const std::string& targets_path,
              const std::string& task_name, std::uint64_t seed, const std::string& out_dir) {
    WallClock clock;
    const pa::Checkpoint ckpt = pa::load_checkpoint(ckpt_path);
    const pa::Tensor<float> rows = rows_from_store(store_path, ckpt.encoder_config.input_length);
    const pa::Tensor<float> embeddings = pa::extract_embeddings(ckpt, rows);

    const auto targets = read_targets_csv(targets_path);
    pa::require(static_cast<std::int64_t>(targets.size()) == rows.dim(0), pa::ErrorKind::DataError,
                targets_path + ": " + std::to_string(targets.size()) + " targets for " +
                    std::to_string(rows.dim(0)) + " segments");

    pa::ProbeTask task;
    task.kind = task_name == "reg" ? pa::TaskKind::REGRESSION : pa::TaskKind::CLASSIFICATION;
    task.embeddings = embeddings.cast<double>();
    task.targets.resize(targets.size());
    for (const auto& [index, value] : targets) {
        pa::require(index >= 0 && index < rows.dim(0), pa::ErrorKind::DataError,
                    "segment_index " + std::to_string(index) + " out of range");
        task.targets[static_cast<std::size_t>(index)] = value;
    }
    if (task.kind == pa::TaskKind::CLASSIFICATION) {
        std::int64_t max_label = 0;
        for (double t : task.targets) max_label = std::max<std::int64_t>(max_label, static_cast<std::int64_t>(t));
        task.class_count = max_label + 1;
    }

    const pa::ProbeResult result = pa::nested_cv_evaluate(task, seed);

    json folds = json::array();
    for (std::size_t i = 0; i < result.folds.size(); ++i) {
        const auto& f = result.folds[i];
        if (task.kind == pa::TaskKind::REGRESSION) {
            std::printf("fold %zu: mae=%.4f r2=%.4f (alpha=%g)\n", i, f.mae, f.r2, f.hyperparameter);
            folds.push_back(json{{"mae", f.mae}, {"r2", f.r2}, {"alpha", f.hyperparameter}});
        } else {
            std::printf("fold %zu: auc=%.4f f1=%.4f acc=%.4f (C=%g)\n", i, f.auc, f.f1, f.accuracy,
                        f.hyperparameter);
            folds.push_back(json{{"auc", f.auc}, {"f1", f.f1}, {"accuracy", f.accuracy}, {"C", f.hyperparameter}});
        }
    }
    json summary;
    summary["folds"] = folds;
    if (task.kind == pa::TaskKind::REGRESSION) {
        std::printf("mean: mae=%.4f (%.4f) r2=%.4f (%.4f)\n", result.mean.mae, result.stddev.mae, result.mean.r2,
                    result.stddev.r2);
        summary["mean"] = json{{"mae", result.mean.mae}, {"r2", result.mean.r2}};
        summary["stddev"] = json{{"mae", result.stddev.mae}, {"r2", result.stddev.r2}};
    } else {
        std::printf("mean: auc=%.4f (%.4f) f1=%.4f (%.4f) acc=%.4f (%.4f)\n", result.mean.auc, result.stddev.auc,
                    result.mean.f1, result.stddev.f1, result.mean.accuracy, result.stddev.accuracy);
        summary["mean"] = json{{"auc", result.mean.auc}, {"f1", result.mean.f1}, {"accuracy", result.mean.accuracy}};
        summary["stddev"] =
            json{{"auc", result.stddev.auc}, {"f1", result.stddev.f1}, {"accuracy", result.stddev.accuracy}};
    }

    fs::create_directories(out_dir);
    {
        std::ofstream out(out_dir + "/probe_report.json");
        out << summary.dump(2) << '\n';
    }

    pa::RunManifest manifest;
    manifest.command = "probe";
    manifest.seed = seed;
    manifest.config["task"] = task_name;
    manifest.add_input(ckpt_path);
    manifest.add_input(store_path);
    manifest.add_input(targets_path);
    manifest.outputs = {out_dir + "/probe_report.json"};
    manifest.wall_time_s = clock.seconds();
    manifest.write(out_dir + "/probe-manifest.json");
    return 0;
}

pa::Tensor<float> read_multilabel_csv(const std::string& path, std::int64_t n_rows) {
    std::ifstream in(path);
    pa::require(in.good(), pa::ErrorKind::Io, "cannot open: " + path);
    std::string line;
    pa::require(static_cast<bool>(std::getline(in, line)), pa::ErrorKind::DataError, path + ": empty label file");
    std::int64_t label_dim = -1;
    std::vector<std::vector<double>> parsed(static_cast<std::size_t>(n_rows));
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> fields;
        std::istringstream row(line);
        std::string cell;
        while (std::getline(row, cell, ',')) fields.push_back(std::stod(cell));
        pa::require(fields.size() >= 2, pa::ErrorKind::DataError,
                    path + ": need (segment_index, labels...): " + line);
        const std::int64_t index = static_cast<std::int64_t>(fields[0]);
        pa::require(index >= 0 && index < n_rows, pa::ErrorKind::DataError,
                    path + ": segment_index " + std::to_string(index) + " out of range");
        if (label_dim < 0) label_dim = static_cast<std::int64_t>(fields.size()) - 1;
        pa::require(static_cast<std::int64_t>(fields.size()) - 1 == label_dim, pa::ErrorKind::DataError,
                    path + ": inconsistent label count on row: " + line);
        parsed[static_cast<std::size_t>(index)].assign(fields.begin() + 1, fields.end());
    }
    pa::require(label_dim >= 1, pa::ErrorKind::DataError, path + ": no label rows");
    pa::Tensor<float> labels({n_rows, label_dim});
    for (std::int64_t i = 0; i < n_rows; ++i) {
        pa::require(!parsed[static_cast<std::size_t>(i)].empty(), pa::ErrorKind::DataError,
                    path + ": missing labels for segment " + std::to_string(i));
        for (std::int64_t k = 0; k < label_dim; ++k) {
            labels.at(i * label_dim + k) =
                static_cast<float>(parsed[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)]);
        }
    }
    return labels;
}

int run_finetune(const std::string& ckpt_path, const std::string& store_path, const std::string& labels_path,
                 const std::string& config_path, bool freeze_encoder, double holdout_fraction,
                 const std::string& out_dir) {
    WallClock clock;
    const pa::KeyValueConfig kv = load_config_or_empty(config_path);
    pa::TrainConfig cfg = train_config_from(kv);
    if (!kv.has("total_steps")) cfg.total_steps = 500;
    if (!kv.has("warmup_steps")) cfg.warmup_steps = 50;

    const pa::Checkpoint ckpt = pa::load_checkpoint(ckpt_path);
    const pa::Tensor<float> rows = rows_from_store(store_path, ckpt.encoder_config.input_length);
    const pa::Tensor<float> labels = read_multilabel_csv(labels_path, rows.dim(0));

    const pa::DataSplit split = pa::split_dataset(rows.dim(0), cfg.seed, 0.0, holdout_fraction);
    auto gather = [&](const pa::Tensor<float>& source, const std::vector<std::int64_t>& idx) {
        pa::Tensor<float> out({static_cast<std::int64_t>(idx.size()), source.dim(1)});
        for (std::size_t i = 0; i < idx.size(); ++i) {
            std::copy_n(source.ptr() + idx[i] * source.dim(1), source.dim(1),
                        out.ptr() + static_cast<std::int64_t>(i) * source.dim(1));
        }
        return out;
    };
    const pa::Tensor<float> train_rows = gather(rows, split.train);
    const pa::Tensor<float> train_labels = gather(labels, split.train);

    const pa::FinetuneHistory history = pa::finetune_multilabel(ckpt, train_rows, train_labels, cfg, freeze_encoder);

    fs::create_directories(out_dir);
    pa::save_checkpoint(history.final_checkpoint, out_dir + "/ckpt_finetuned.apck");

    json summary;
    summary["final_train_loss"] = history.step_losses.empty() ? 0.0 : history.step_losses.back();
    if (!split.test.empty()) {
        pa::MultilabelModel model = pa::MultilabelModel::from_checkpoint(history.final_checkpoint);
        const pa::Tensor<float> test_rows = gather(rows, split.test);
        const pa::Tensor<float> test_labels = gather(labels, split.test);
        const pa::Tensor<float> logits = model.logits(test_rows);
        json aucs = json::array();
        for (std::int64_t k = 0; k < labels.dim(1); ++k) {
            std::vector<int> truth;
            std::vector<double> score;
            for (std::int64_t i = 0; i < test_rows.dim(0); ++i) {
                truth.push_back(test_labels.at(i * labels.dim(1) + k) > 0.5f ? 1 : 0);
                score.push_back(static_cast<double>(logits.at(i * labels.dim(1) + k)));
            }
            double auc = 0.5; // single-class holdout column reports chance
            try {
                auc = pa::binary_auc(truth, score);
            } catch (const pa::Error&) {
            }
            aucs.push_back(auc);
            std::printf("label %lld held-out auc=%.4f\n", static_cast<long long>(k), auc);
        }
        summary["holdout_auc"] = aucs;
    }
    {
        std::ofstream out(out_dir + "/finetune_report.json");
        out << summary.dump(2) << '\n';
    }

    pa::RunManifest manifest;
    manifest.command = "finetune";
    manifest.seed = cfg.seed;
    manifest.config = snapshot(kv);
    manifest.config["freeze_encoder"] = freeze_encoder ? "true" : "false";
    manifest.add_input(ckpt_path);
    manifest.add_input(store_path);
    manifest.add_input(labels_path);
    manifest.outputs = {out_dir + "/ckpt_finetuned.apck", out_dir + "/finetune_report.json"};
    manifest.wall_time_s = clock.seconds();
    manifest.write(out_dir + "/manifest.json");
    return 0;
}

int run_inspect(const std::string& ckpt_path, const std::string& out_dir) {
    WallClock clock;
    const pa::Checkpoint ckpt = pa::load_checkpoint(ckpt_path);
    std::printf("kind: %s\n", ckpt.kind.c_str());
    std::printf("step: %llu\n", static_cast<unsigned long long>(ckpt.step));
    std::printf("validation_loss: %.6f\n", ckpt.validation_loss);
    std::printf("input_length: %lld\n", static_cast<long long>(ckpt.encoder_config.input_length));
    std::printf("embedding_dim: %lld\n", static_cast<long long>(ckpt.encoder_config.embedding_dim()));

    pa::Rng init(0);
    pa::Net1dEncoder<float> encoder(ckpt.encoder_config, init);
    const std::vector<std::int64_t> stage_counts = encoder.stage_param_counts();
    std::int64_t total = 0;
    const bool is_reference = ckpt.encoder_config == pa::EncoderConfig::reference();
    std::printf("%-8s %12s%s\n", "stage", "params", is_reference ? "    published" : "");
    for (std::size_t i = 0; i < stage_counts.size(); ++i) {
        total += stage_counts[i];
        if (is_reference && i < pa::kPublishedReferenceStageParams.size()) {
            std::printf("%-8zu %12lld %12lld\n", i, static_cast<long long>(stage_counts[i]),
                        static_cast<long long>(pa::kPublishedReferenceStageParams[i]));
        } else {
            std::printf("%-8zu %12lld\n", i, static_cast<long long>(stage_counts[i]));
        }
    }
    if (is_reference) {
        std::printf("encoder total: %lld (published summary: %lld)\n", static_cast<long long>(total),
                    static_cast<long long>(pa::kPublishedReferenceTotal));
    } else {
        std::printf("encoder total: %lld\n", static_cast<long long>(total));
    }
    std::printf("tensors: %zu\n", ckpt.tensors.size());

    pa::RunManifest manifest;
    manifest.command = "inspect-checkpoint";
    manifest.add_input(ckpt_path);
    manifest.wall_time_s = clock.seconds();
    fs::create_directories(out_dir);
    manifest.write(out_dir + "/inspect-manifest.json");
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Contrastive PPG/ECG representation toolkit"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "Worker threads (0 = hardware, 1 = fully serial)");

    auto* synth = app.add_subcommand("synth", "Generate a synthetic paired dataset");
    std::int64_t synth_n = 100;
    double synth_seconds = 10.0, synth_rate = 125.0;
    std::uint64_t synth_seed = 7;
    std::string synth_out, synth_config;
    synth->add_option("--n", synth_n, "Number of pairs")->required();
    synth->add_option("--seconds", synth_seconds, "Segment duration");
    synth->add_option("--rate", synth_rate, "Sample rate in Hz");
    synth->add_option("--seed", synth_seed, "Generator seed");
    synth->add_option("--out", synth_out, "Output directory")->required();
    synth->add_option("--config", synth_config, "Latent distribution config file");

    auto* preprocess = app.add_subcommand("preprocess", "Condition raw recordings into aligned segment pairs");
    std::string pre_ppg, pre_ecg, pre_config, pre_out;
    preprocess->add_option("--ppg", pre_ppg, "PPG recording store")->required();
    preprocess->add_option("--ecg", pre_ecg, "ECG recording store")->required();
    preprocess->add_option("--config", pre_config, "Preprocess config file");
    preprocess->add_option("--out", pre_out, "Output directory")->required();

    auto* pretrain = app.add_subcommand("pretrain", "Contrastive pretraining on aligned stores");
    std::string tr_ppg, tr_ecg, tr_config, tr_out;
    pretrain->add_option("--ppg", tr_ppg, "Preprocessed PPG store")->required();
    pretrain->add_option("--ecg", tr_ecg, "Preprocessed ECG store")->required();
    pretrain->add_option("--config", tr_config, "Training config file");
    pretrain->add_option("--out", tr_out, "Checkpoint directory")->required();

    auto* evalr = app.add_subcommand("eval-retrieval", "PPG-to-ECG retrieval metrics");
    std::string ev_ppg, ev_ecg, ev_ckpt, ev_out = ".";
    std::int64_t ev_batch = 2560;
    evalr->add_option("--ppg", ev_ppg, "Preprocessed PPG store")->required();
    evalr->add_option("--ecg", ev_ecg, "Preprocessed ECG store")->required();
    evalr->add_option("--checkpoint", ev_ckpt, "Dual checkpoint")->required();
    evalr->add_option("--batch", ev_batch, "Evaluation batch size");
    evalr->add_option("--out", ev_out, "Report directory");

    auto* probe = app.add_subcommand("probe", "Linear probing with nested cross-validation");
    std::string pb_ckpt, pb_store, pb_targets, pb_task, pb_out = ".";
    std::uint64_t pb_seed = 7;
    probe->add_option("--checkpoint", pb_ckpt, "Checkpoint")->required();
    probe->add_option("--store", pb_store, "Segment store")->required();
    probe->add_option("--targets", pb_targets, "CSV with (segment_index, target)")->required();
    probe->add_option("--task", pb_task, "reg or clf")->required()->check(CLI::IsMember({"reg", "clf"}));
    probe->add_option("--seed", pb_seed, "Fold shuffling seed");
    probe->add_option("--out", pb_out, "Report directory");

    auto* finetune = app.add_subcommand("finetune", "Multi-label fine-tuning from a pretrained checkpoint");
    std::string ft_ckpt, ft_store, ft_labels, ft_config, ft_out;
    bool ft_freeze = false;
    double ft_holdout = 0.2;
    finetune->add_option("--checkpoint", ft_ckpt, "Pretrained dual checkpoint")->required();
    finetune->add_option("--store", ft_store, "PPG segment store")->required();
    finetune->add_option("--labels", ft_labels, "CSV with (segment_index, label0, label1, ...)")->required();
    finetune->add_option("--config", ft_config, "Training config file");
    finetune->add_flag("--freeze-encoder", ft_freeze, "Train only the head");
    finetune->add_option("--holdout", ft_holdout, "Held-out fraction for reporting AUC");
    finetune->add_option("--out", ft_out, "Output directory")->required();

    auto* inspect = app.add_subcommand("inspect-checkpoint", "Describe a checkpoint file");
    std::string in_ckpt, in_out = ".";
    inspect->add_option("checkpoint", in_ckpt, "Checkpoint file")->required();
    inspect->add_option("--out", in_out, "Manifest directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (threads > 0) pa::set_compute_threads(threads);
        if (synth->parsed()) return run_synth(synth_n, synth_seconds, synth_rate, synth_seed, synth_out, synth_config);
        if (preprocess->parsed()) return run_preprocess(pre_ppg, pre_ecg, pre_config, pre_out);
        if (pretrain->parsed()) return run_pretrain(tr_ppg, tr_ecg, tr_config, tr_out);
        if (evalr->parsed()) return run_eval_retrieval(ev_ppg, ev_ecg, ev_ckpt, ev_batch, ev_out);
        if (probe->parsed()) return run_probe(pb_ckpt, pb_store, pb_targets, pb_task, pb_seed, pb_out);
        if (finetune->parsed())
            return run_finetune(ft_ckpt, ft_store, ft_labels, ft_config, ft_freeze, ft_holdout, ft_out);
        if (inspect->parsed()) return run_inspect(in_ckpt, in_out);
    } catch (const pa::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
