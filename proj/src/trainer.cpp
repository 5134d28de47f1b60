#include "pulsealign/trainer.hpp"

#include <algorithm>
#include <cmath>

namespace pulsealign {

double lr_at_step(std::int64_t step, const TrainConfig& cfg) {
    require(step >= 0 && step <= cfg.total_steps, ErrorKind::Usage,
            "step " + std::to_string(step) + " outside [0, " + std::to_string(cfg.total_steps) + "]");
    if (step < cfg.warmup_steps) {
        return cfg.base_lr * static_cast<double>(step) / static_cast<double>(cfg.warmup_steps);
    }
    const double span = static_cast<double>(std::max<std::int64_t>(1, cfg.total_steps - cfg.warmup_steps));
    const double progress = static_cast<double>(step - cfg.warmup_steps) / span;
    return cfg.final_lr + (cfg.base_lr - cfg.final_lr) * 0.5 * (1.0 + std::cos(M_PI * progress));
}

double clip_gradients(std::vector<NamedParam<float>>& params, double max_norm) {
    double sq = 0.0;
    for (const auto& p : params) {
        for (float g : p.var->grad.data) sq += static_cast<double>(g) * static_cast<double>(g);
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm) {
        const float scale = static_cast<float>(max_norm / norm);
        for (auto& p : params) {
            for (float& g : p.var->grad.data) g *= scale;
        }
    }
    return norm;
}

void AdamW::step(std::vector<NamedParam<float>>& params, double lr) {
    if (m_.empty()) {
        for (const auto& p : params) {
            m_.emplace_back(p.var->value.shape);
            v_.emplace_back(p.var->value.shape);
        }
    }
    require(m_.size() == params.size(), ErrorKind::Usage, "optimizer state does not match the parameter list");
    ++t_;
    const double b1 = cfg_.adam_betas.first;
    const double b2 = cfg_.adam_betas.second;
    const double bias1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double bias2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto& p = params[k];
        require(m_[k].same_shape(p.var->value), ErrorKind::ShapeMismatch,
                "parameter " + p.name + " changed shape under the optimizer");
        const bool decay = cfg_.weight_decay > 0.0 && (p.decay || cfg_.decay_norm_and_temperature);
        float* value = p.var->value.ptr();
        const float* grad = p.var->grad.ptr();
        float* m = m_[k].ptr();
        float* v = v_[k].ptr();
        const std::int64_t n = p.var->value.size();
        for (std::int64_t i = 0; i < n; ++i) {
            if (decay) value[i] -= static_cast<float>(lr * cfg_.weight_decay) * value[i];
            const double g = static_cast<double>(grad[i]);
            const double mi = b1 * static_cast<double>(m[i]) + (1.0 - b1) * g;
            const double vi = b2 * static_cast<double>(v[i]) + (1.0 - b2) * g * g;
            m[i] = static_cast<float>(mi);
            v[i] = static_cast<float>(vi);
            const double update = (mi / bias1) / (std::sqrt(vi / bias2) + cfg_.adam_eps);
            value[i] -= static_cast<float>(lr * update);
        }
    }
}

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

PairDataset dataset_from_pairs(const std::vector<SegmentPair>& pairs) {
    PairDataset data;
    if (pairs.empty()) return data;
    const std::int64_t n = static_cast<std::int64_t>(pairs.size());
    const std::int64_t len = pairs.front().ppg.size();
    data.ppg = Tensor<float>({n, len});
    data.ecg = Tensor<float>({n, len});
    for (std::int64_t i = 0; i < n; ++i) {
        const auto& pair = pairs[static_cast<std::size_t>(i)];
        require(pair.ppg.size() == len && pair.ecg.size() == len, ErrorKind::HeterogeneousData,
                "pair " + std::to_string(i) + " has a different segment length");
        for (std::int64_t j = 0; j < len; ++j) {
            data.ppg.at(i * len + j) = static_cast<float>(pair.ppg.samples[static_cast<std::size_t>(j)]);
            data.ecg.at(i * len + j) = static_cast<float>(pair.ecg.samples[static_cast<std::size_t>(j)]);
        }
    }
    return data;
}

PairDataset load_pair_dataset(const std::string& ppg_store, const std::string& ecg_store) {
    const std::vector<Waveform> ppg = read_store(ppg_store);
    const std::vector<Waveform> ecg = read_store(ecg_store);
    require(ppg.size() == ecg.size(), ErrorKind::DataError,
            "stores disagree on pair count: " + std::to_string(ppg.size()) + " vs " + std::to_string(ecg.size()));
    std::vector<SegmentPair> pairs;
    pairs.reserve(ppg.size());
    for (std::size_t i = 0; i < ppg.size(); ++i) {
        SegmentPair pair;
        pair.pair_id = static_cast<std::int64_t>(i);
        pair.ppg = ppg[i];
        pair.ecg = ecg[i];
        pair.ppg.modality = Modality::PPG;
        pair.ecg.modality = Modality::ECG;
        pairs.push_back(std::move(pair));
    }
    return dataset_from_pairs(pairs);
}

DataSplit split_dataset(std::int64_t n, std::uint64_t seed, double val_fraction, double test_fraction) {
    require(n >= 0, ErrorKind::Usage, "negative dataset size");
    require(val_fraction >= 0.0 && test_fraction >= 0.0 && val_fraction + test_fraction < 1.0, ErrorKind::Config,
            "val/test fractions must leave room for training data");
    std::vector<std::int64_t> order(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    Rng rng(seed);
    rng.shuffle(order);
    const std::int64_t n_val = static_cast<std::int64_t>(std::floor(val_fraction * static_cast<double>(n)));
    const std::int64_t n_test = static_cast<std::int64_t>(std::floor(test_fraction * static_cast<double>(n)));
    DataSplit split;
    split.val.assign(order.begin(), order.begin() + n_val);
    split.test.assign(order.begin() + n_val, order.begin() + n_val + n_test);
    split.train.assign(order.begin() + n_val + n_test, order.end());
    return split;
}

namespace {

Tensor<float> gather_rows(const Tensor<float>& source, const std::vector<std::int64_t>& indices, std::int64_t begin,
                          std::int64_t count) {
    const std::int64_t len = source.dim(1);
    Tensor<float> out({count, len});
    for (std::int64_t r = 0; r < count; ++r) {
        const std::int64_t src = indices[static_cast<std::size_t>(begin + r)];
        std::copy_n(source.ptr() + src * len, len, out.ptr() + r * len);
    }
    return out;
}

Tensor<float> slice_rows(const Tensor<float>& source, std::int64_t begin, std::int64_t count) {
    const std::int64_t len = source.dim(1);
    Tensor<float> out({count, len});
    std::copy_n(source.ptr() + begin * len, count * len, out.ptr());
    return out;
}

// Shuffled-epoch batch sampler; refills and reshuffles when fewer than a full
// batch remains, so every batch is full.
class BatchSampler {
public:
    BatchSampler(std::vector<std::int64_t> indices, std::int64_t batch, Rng* rng)
        : pool_(std::move(indices)), batch_(batch), rng_(rng) {
        require(!pool_.empty(), ErrorKind::Usage, "empty training split");
        rng_->shuffle(pool_);
    }

    std::vector<std::int64_t> next() {
        std::vector<std::int64_t> out;
        out.reserve(static_cast<std::size_t>(batch_));
        for (std::int64_t i = 0; i < batch_; ++i) {
            if (cursor_ >= pool_.size()) {
                rng_->shuffle(pool_);
                cursor_ = 0;
            }
            out.push_back(pool_[cursor_++]);
        }
        return out;
    }

private:
    std::vector<std::int64_t> pool_;
    std::int64_t batch_ = 0;
    Rng* rng_;
    std::size_t cursor_ = 0;
};

} // namespace

// ---------------------------------------------------------------------------
// DualEncoderModel
// ---------------------------------------------------------------------------

DualEncoderModel DualEncoderModel::build(const EncoderConfig& enc_cfg, const ProjectorConfig& proj_cfg,
                                         std::uint64_t seed) {
    enc_cfg.validate();
    require(proj_cfg.in_dim == enc_cfg.embedding_dim(), ErrorKind::Config,
            "projector input dimension must equal the encoder embedding dimension");
    DualEncoderModel model;
    model.encoder_config = enc_cfg;
    model.projector_config = proj_cfg;
    Rng init(seed);
    model.ppg_encoder = Net1dEncoder<float>(enc_cfg, init);
    model.ecg_encoder = Net1dEncoder<float>(enc_cfg, init);
    model.ppg_projector = Projector<float>(proj_cfg, init);
    model.ecg_projector = Projector<float>(proj_cfg, init);
    model.temperature = Temperature<float>(0.07);
    return model;
}

std::vector<NamedParam<float>> DualEncoderModel::parameters() {
    std::vector<NamedParam<float>> params;
    std::vector<NamedBuffer<float>> buffers;
    ppg_encoder.collect("ppg_encoder", params, buffers);
    ecg_encoder.collect("ecg_encoder", params, buffers);
    ppg_projector.collect("ppg_projector", params, buffers);
    ecg_projector.collect("ecg_projector", params, buffers);
    params.push_back({"temperature", temperature.var, false});
    return params;
}

std::vector<NamedBuffer<float>> DualEncoderModel::buffers() {
    std::vector<NamedParam<float>> params;
    std::vector<NamedBuffer<float>> buffers;
    ppg_encoder.collect("ppg_encoder", params, buffers);
    ecg_encoder.collect("ecg_encoder", params, buffers);
    ppg_projector.collect("ppg_projector", params, buffers);
    ecg_projector.collect("ecg_projector", params, buffers);
    return buffers;
}

void DualEncoderModel::zero_grads() {
    for (auto& p : parameters()) p.var->zero_grad();
}

namespace {

Tensor<float> as_conv_input(const Tensor<float>& rows) {
    require(rows.rank() == 2, ErrorKind::ShapeMismatch, "expected [N, L] signal rows");
    Tensor<float> x = rows;
    x.shape = {rows.dim(0), 1, rows.dim(1)};
    return x;
}

} // namespace

VarPtr<float> DualEncoderModel::loss_on_batch(Tape<float>& tape, const Tensor<float>& ppg_rows,
                                              const Tensor<float>& ecg_rows, Mode mode, Rng& dropout_rng) {
    auto xp = make_var(as_conv_input(ppg_rows));
    auto xe = make_var(as_conv_input(ecg_rows));
    auto zp = ppg_encoder.forward(tape, xp, mode, dropout_rng);
    auto ze = ecg_encoder.forward(tape, xe, mode, dropout_rng);
    auto hp = l2_normalize_rows(tape, ppg_projector.forward(tape, zp));
    auto he = l2_normalize_rows(tape, ecg_projector.forward(tape, ze));
    return symmetric_info_nce(tape, hp, he, temperature.var);
}

Tensor<float> DualEncoderModel::embed_encoder(const Tensor<float>& rows, Modality which, std::int64_t chunk) {
    Net1dEncoder<float>& enc = which == Modality::PPG ? ppg_encoder : ecg_encoder;
    const std::int64_t n = rows.dim(0);
    Tensor<float> out({n, encoder_config.embedding_dim()});
    Rng unused(0);
    for (std::int64_t begin = 0; begin < n; begin += chunk) {
        const std::int64_t count = std::min(chunk, n - begin);
        Tape<float> tape;
        tape.recording = false;
        auto z = enc.forward(tape, make_var(as_conv_input(slice_rows(rows, begin, count))), Mode::kEval, unused);
        std::copy_n(z->value.ptr(), z->value.size(), out.ptr() + begin * out.dim(1));
    }
    return out;
}

Tensor<float> DualEncoderModel::embed_shared(const Tensor<float>& rows, Modality which, std::int64_t chunk) {
    const Projector<float>& proj = which == Modality::PPG ? ppg_projector : ecg_projector;
    Tensor<float> z = embed_encoder(rows, which, chunk);
    Tape<float> tape;
    tape.recording = false;
    auto h = l2_normalize_rows(tape, proj.forward(tape, make_var(std::move(z))));
    return std::move(h->value);
}

Checkpoint DualEncoderModel::to_checkpoint(std::uint64_t step, double validation_loss, const std::string& rng_state) {
    Checkpoint ckpt;
    ckpt.kind = "dual";
    ckpt.encoder_config = encoder_config;
    ckpt.projector_config = projector_config;
    ckpt.step = step;
    ckpt.validation_loss = validation_loss;
    ckpt.rng_state = rng_state;
    for (const auto& p : parameters()) ckpt.tensors.emplace_back(p.name, p.var->value);
    for (const auto& b : buffers()) ckpt.tensors.emplace_back(b.name, *b.tensor);
    return ckpt;
}

namespace {

void restore_tensors(const Checkpoint& ckpt, std::vector<NamedParam<float>>& params,
                     std::vector<NamedBuffer<float>>& buffers) {
    for (auto& p : params) {
        const Tensor<float>* stored = ckpt.find(p.name);
        require(stored != nullptr, ErrorKind::CorruptCheckpoint, "checkpoint lacks tensor " + p.name);
        require(stored->shape == p.var->value.shape, ErrorKind::ConfigMismatch,
                "tensor " + p.name + " has shape " + stored->shape_string() + ", expected " +
                    p.var->value.shape_string());
        p.var->value = *stored;
    }
    for (auto& b : buffers) {
        const Tensor<float>* stored = ckpt.find(b.name);
        require(stored != nullptr, ErrorKind::CorruptCheckpoint, "checkpoint lacks tensor " + b.name);
        require(stored->shape == b.tensor->shape, ErrorKind::ConfigMismatch,
                "tensor " + b.name + " has shape " + stored->shape_string());
        *b.tensor = *stored;
    }
}

} // namespace

DualEncoderModel DualEncoderModel::from_checkpoint(const Checkpoint& ckpt) {
    require(ckpt.kind == "dual", ErrorKind::Usage, "checkpoint kind is '" + ckpt.kind + "', expected 'dual'");
    DualEncoderModel model = build(ckpt.encoder_config, ckpt.projector_config, 0);
    auto params = model.parameters();
    auto buffers = model.buffers();
    restore_tensors(ckpt, params, buffers);
    return model;
}

// ---------------------------------------------------------------------------
// MultilabelModel
// ---------------------------------------------------------------------------

MultilabelModel MultilabelModel::from_pretrained(const Checkpoint& dual_ckpt, std::int64_t label_dim,
                                                 std::uint64_t seed) {
    require(dual_ckpt.kind == "dual", ErrorKind::Usage, "fine-tuning expects a dual checkpoint");
    require(label_dim >= 1, ErrorKind::Config, "label_dim must be >= 1");
    MultilabelModel model;
    model.encoder_config = dual_ckpt.encoder_config;
    model.label_dim = label_dim;
    Rng init(seed);
    model.encoder = Net1dEncoder<float>(model.encoder_config, init);
    model.head = DenseLayer<float>(model.encoder_config.embedding_dim(), label_dim, init);

    // Adopt the PPG branch weights; the head stays freshly initialized.
    std::vector<NamedParam<float>> params;
    std::vector<NamedBuffer<float>> buffers;
    model.encoder.collect("ppg_encoder", params, buffers);
    restore_tensors(dual_ckpt, params, buffers);
    return model;
}

MultilabelModel MultilabelModel::from_checkpoint(const Checkpoint& ckpt) {
    require(ckpt.kind == "multilabel", ErrorKind::Usage,
            "checkpoint kind is '" + ckpt.kind + "', expected 'multilabel'");
    MultilabelModel model;
    model.encoder_config = ckpt.encoder_config;
    model.label_dim = ckpt.label_dim;
    Rng init(0);
    model.encoder = Net1dEncoder<float>(model.encoder_config, init);
    model.head = DenseLayer<float>(model.encoder_config.embedding_dim(), model.label_dim, init);
    auto params = model.parameters(false);
    auto buffers = model.buffers();
    restore_tensors(ckpt, params, buffers);
    return model;
}

std::vector<NamedParam<float>> MultilabelModel::parameters(bool freeze_encoder) {
    std::vector<NamedParam<float>> params;
    std::vector<NamedBuffer<float>> buffers;
    if (!freeze_encoder) encoder.collect("encoder", params, buffers);
    head.collect("head", params, buffers);
    return params;
}

std::vector<NamedBuffer<float>> MultilabelModel::buffers() {
    std::vector<NamedParam<float>> params;
    std::vector<NamedBuffer<float>> buffers;
    encoder.collect("encoder", params, buffers);
    return buffers;
}

void MultilabelModel::zero_grads(bool freeze_encoder) {
    for (auto& p : parameters(false)) p.var->zero_grad();
    (void)freeze_encoder;
}

VarPtr<float> MultilabelModel::loss_on_batch(Tape<float>& tape, const Tensor<float>& rows,
                                             const Tensor<float>& labels, Mode mode, Rng& dropout_rng) {
    require(labels.rank() == 2 && labels.dim(0) == rows.dim(0) && labels.dim(1) == label_dim,
            ErrorKind::ShapeMismatch, "labels must be [N, " + std::to_string(label_dim) + "]");
    auto z = encoder.forward(tape, make_var(as_conv_input(rows)), mode, dropout_rng);
    auto logit = head.forward(tape, z);
    return bce_with_logits(tape, logit, labels);
}

Tensor<float> MultilabelModel::logits(const Tensor<float>& rows, std::int64_t chunk) {
    const std::int64_t n = rows.dim(0);
    Tensor<float> out({n, label_dim});
    Rng unused(0);
    for (std::int64_t begin = 0; begin < n; begin += chunk) {
        const std::int64_t count = std::min(chunk, n - begin);
        Tape<float> tape;
        tape.recording = false;
        auto z = encoder.forward(tape, make_var(as_conv_input(slice_rows(rows, begin, count))), Mode::kEval, unused);
        auto logit = head.forward(tape, z);
        std::copy_n(logit->value.ptr(), logit->value.size(), out.ptr() + begin * label_dim);
    }
    return out;
}

Checkpoint MultilabelModel::to_checkpoint(std::uint64_t step, double validation_loss, const std::string& rng_state) {
    Checkpoint ckpt;
    ckpt.kind = "multilabel";
    ckpt.encoder_config = encoder_config;
    ckpt.projector_config = ProjectorConfig{0, 0, 0};
    ckpt.label_dim = label_dim;
    ckpt.step = step;
    ckpt.validation_loss = validation_loss;
    ckpt.rng_state = rng_state;
    for (const auto& p : parameters(false)) ckpt.tensors.emplace_back(p.name, p.var->value);
    for (const auto& b : buffers()) ckpt.tensors.emplace_back(b.name, *b.tensor);
    return ckpt;
}

// ---------------------------------------------------------------------------
// Training loops
// ---------------------------------------------------------------------------

namespace {

double validation_loss_dual(DualEncoderModel& model, const PairDataset& data, const std::vector<std::int64_t>& val,
                            std::int64_t batch_size) {
    require(!val.empty(), ErrorKind::Usage, "validation split is empty");
    Rng unused(0);
    double weighted = 0.0;
    std::int64_t total = 0;
    for (std::size_t begin = 0; begin < val.size(); begin += static_cast<std::size_t>(batch_size)) {
        const std::int64_t count =
            std::min<std::int64_t>(batch_size, static_cast<std::int64_t>(val.size() - begin));
        Tensor<float> xp = gather_rows(data.ppg, val, static_cast<std::int64_t>(begin), count);
        Tensor<float> xe = gather_rows(data.ecg, val, static_cast<std::int64_t>(begin), count);
        Tape<float> tape;
        tape.recording = false;
        auto loss = model.loss_on_batch(tape, xp, xe, Mode::kEval, unused);
        weighted += static_cast<double>(loss->value.at(0)) * static_cast<double>(count);
        total += count;
    }
    return weighted / static_cast<double>(total);
}

} // namespace

TrainHistory pretrain_contrastive(const PairDataset& data, const DataSplit& split, const TrainConfig& cfg,
                                  const EncoderConfig& enc_cfg, const ProjectorConfig& proj_cfg) {
    cfg.validate();
    require(data.size() > 0, ErrorKind::DataError, "empty pair dataset");
    require(!split.train.empty(), ErrorKind::DataError, "empty training split");

    DualEncoderModel model = DualEncoderModel::build(enc_cfg, proj_cfg, cfg.seed);
    AdamW optimizer(cfg);
    auto params = model.parameters();

    Rng base(cfg.seed);
    Rng batch_rng = base.fork(1);
    Rng dropout_rng = base.fork(2);
    BatchSampler sampler(split.train, cfg.batch_size, &batch_rng);

    TrainHistory history;
    const double val0 = validation_loss_dual(model, data, split.val, cfg.batch_size);
    history.val_losses.emplace_back(0, val0);
    history.checkpoints.push_back(model.to_checkpoint(0, val0, batch_rng.serialize()));

    for (std::int64_t step = 1; step <= cfg.total_steps; ++step) {
        const double lr = lr_at_step(step, cfg);
        const std::vector<std::int64_t> batch = sampler.next();
        Tensor<float> xp = gather_rows(data.ppg, batch, 0, cfg.batch_size);
        Tensor<float> xe = gather_rows(data.ecg, batch, 0, cfg.batch_size);

        model.zero_grads();
        Tape<float> tape;
        auto loss = model.loss_on_batch(tape, xp, xe, Mode::kTrain, dropout_rng);
        const double loss_value = static_cast<double>(loss->value.at(0));
        require(std::isfinite(loss_value), ErrorKind::NumericFailure,
                "loss is not finite at step " + std::to_string(step) + ", temperature=" +
                    std::to_string(model.temperature.value()));
        tape.backward(loss);
        clip_gradients(params, cfg.clip_norm);
        optimizer.step(params, lr);
        model.temperature.clamp();
        history.step_losses.push_back(loss_value);

        if (step % cfg.eval_every == 0 || step == cfg.total_steps) {
            const double val = validation_loss_dual(model, data, split.val, cfg.batch_size);
            history.val_losses.emplace_back(step, val);
            history.checkpoints.push_back(
                model.to_checkpoint(static_cast<std::uint64_t>(step), val, batch_rng.serialize()));
        }
    }

    history.best_index = 0;
    for (std::size_t i = 1; i < history.checkpoints.size(); ++i) {
        if (history.checkpoints[i].validation_loss < history.checkpoints[history.best_index].validation_loss) {
            history.best_index = i;
        }
    }
    return history;
}

FinetuneHistory finetune_multilabel(const Checkpoint& pretrained, const Tensor<float>& train_rows,
                                    const Tensor<float>& train_labels, const TrainConfig& cfg, bool freeze_encoder) {
    cfg.validate();
    require(train_rows.rank() == 2 && train_rows.dim(0) >= 1, ErrorKind::DataError, "empty fine-tuning set");
    require(train_labels.rank() == 2 && train_labels.dim(0) == train_rows.dim(0), ErrorKind::ShapeMismatch,
            "labels must have one row per segment");

    MultilabelModel model = MultilabelModel::from_pretrained(pretrained, train_labels.dim(1), cfg.seed);
    AdamW optimizer(cfg);
    auto params = model.parameters(freeze_encoder);

    Rng base(cfg.seed);
    Rng batch_rng = base.fork(1);
    Rng dropout_rng = base.fork(2);
    std::vector<std::int64_t> all(static_cast<std::size_t>(train_rows.dim(0)));
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<std::int64_t>(i);
    BatchSampler sampler(all, std::min<std::int64_t>(cfg.batch_size, train_rows.dim(0)), &batch_rng);

    // A frozen encoder also runs in EVAL mode so its running statistics stay
    // untouched.
    const Mode train_mode = freeze_encoder ? Mode::kEval : Mode::kTrain;

    FinetuneHistory history;
    const std::int64_t label_dim = train_labels.dim(1);
    for (std::int64_t step = 1; step <= cfg.total_steps; ++step) {
        const double lr = lr_at_step(step, cfg);
        const std::vector<std::int64_t> batch = sampler.next();
        const std::int64_t count = static_cast<std::int64_t>(batch.size());
        Tensor<float> rows({count, train_rows.dim(1)});
        Tensor<float> labels({count, label_dim});
        for (std::int64_t r = 0; r < count; ++r) {
            std::copy_n(train_rows.ptr() + batch[static_cast<std::size_t>(r)] * train_rows.dim(1), train_rows.dim(1),
                        rows.ptr() + r * train_rows.dim(1));
            std::copy_n(train_labels.ptr() + batch[static_cast<std::size_t>(r)] * label_dim, label_dim,
                        labels.ptr() + r * label_dim);
        }

        model.zero_grads(freeze_encoder);
        Tape<float> tape;
        auto loss = model.loss_on_batch(tape, rows, labels, train_mode, dropout_rng);
        const double loss_value = static_cast<double>(loss->value.at(0));
        require(std::isfinite(loss_value), ErrorKind::NumericFailure,
                "loss is not finite at fine-tune step " + std::to_string(step));
        tape.backward(loss);
        clip_gradients(params, cfg.clip_norm);
        optimizer.step(params, lr);
        history.step_losses.push_back(loss_value);
    }

    const double last = history.step_losses.empty() ? 0.0 : history.step_losses.back();
    history.final_checkpoint =
        model.to_checkpoint(static_cast<std::uint64_t>(cfg.total_steps), last, batch_rng.serialize());
    return history;
}

Tensor<float> extract_embeddings(const Checkpoint& ckpt, const Tensor<float>& rows, std::int64_t chunk) {
    if (rows.size() == 0) return Tensor<float>({0, ckpt.encoder_config.embedding_dim()});
    if (ckpt.kind == "dual") {
        DualEncoderModel model = DualEncoderModel::from_checkpoint(ckpt);
        return model.embed_encoder(rows, Modality::PPG, chunk);
    }
    MultilabelModel model = MultilabelModel::from_checkpoint(ckpt);
    const std::int64_t n = rows.dim(0);
    Tensor<float> out({n, ckpt.encoder_config.embedding_dim()});
    Rng unused(0);
    for (std::int64_t begin = 0; begin < n; begin += chunk) {
        const std::int64_t count = std::min(chunk, n - begin);
        Tape<float> tape;
        tape.recording = false;
        auto z = model.encoder.forward(tape, make_var(as_conv_input(slice_rows(rows, begin, count))), Mode::kEval,
                                       unused);
        std::copy_n(z->value.ptr(), z->value.size(), out.ptr() + begin * out.dim(1));
    }
    return out;
}

RetrievalEvaluation evaluate_retrieval(DualEncoderModel& model, const Tensor<float>& ppg_rows,
                                       const Tensor<float>& ecg_rows, std::int64_t batch_size, bool drop_partial) {
    require(ppg_rows.rank() == 2 && ppg_rows.shape == ecg_rows.shape, ErrorKind::ShapeMismatch,
            "retrieval needs aligned [N, L] stores");
    require(batch_size >= 1, ErrorKind::Config, "batch size must be >= 1");
    const std::int64_t n = ppg_rows.dim(0);
    require(n >= 1, ErrorKind::DataError, "no pairs to evaluate");

    const Tensor<float> hp = model.embed_shared(ppg_rows, Modality::PPG);
    const Tensor<float> he = model.embed_shared(ecg_rows, Modality::ECG);
    const std::int64_t dim = hp.dim(1);

    RetrievalEvaluation eval;
    for (std::int64_t begin = 0; begin < n; begin += batch_size) {
        const std::int64_t count = std::min(batch_size, n - begin);
        if (count < batch_size && drop_partial) break;
        EmbeddingBatch<float> bp{slice_rows(hp, begin, count), EmbeddingSpace::kShared};
        EmbeddingBatch<float> be{slice_rows(he, begin, count), EmbeddingSpace::kShared};
        (void)dim;
        eval.per_batch.push_back(retrieval_metrics(cosine_similarity_matrix(bp, be)));
    }
    require(!eval.per_batch.empty(), ErrorKind::DataError, "no full batch available for retrieval");
    eval.weighted = aggregate_metrics(eval.per_batch, AggregateMode::WEIGHTED);
    eval.macro = aggregate_metrics(eval.per_batch, AggregateMode::MACRO);
    return eval;
}

} // namespace pulsealign
