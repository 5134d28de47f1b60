#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pulsealign/contrastive.hpp"
#include "pulsealign/encoder.hpp"
#include "pulsealign/retrieval.hpp"
#include "pulsealign/signal.hpp"

namespace pulsealign {

struct TrainConfig {
    double base_lr = 5e-4;
    double weight_decay = 1e-2;
    std::int64_t total_steps = 2000;
    std::int64_t warmup_steps = 400;
    double clip_norm = 1.0;
    std::int64_t batch_size = 64;
    std::uint64_t seed = 42;
    std::int64_t eval_every = 100;
    std::pair<double, double> adam_betas = {0.9, 0.999};
    double adam_eps = 1e-8;
    double final_lr = 0.0;
    // Decoupled weight decay skips batch-norm scale/shift and the temperature
    // unless this is set.
    bool decay_norm_and_temperature = false;

    void validate() const {
        require(base_lr > 0.0, ErrorKind::Config, "base_lr must be positive");
        require(weight_decay >= 0.0, ErrorKind::Config, "weight_decay must be >= 0");
        require(total_steps >= 0, ErrorKind::Config, "total_steps must be >= 0");
        require(warmup_steps >= 0, ErrorKind::Config, "warmup_steps must be >= 0");
        require(total_steps == 0 ? warmup_steps == 0 : warmup_steps < total_steps, ErrorKind::Config,
                "warmup_steps must be smaller than total_steps");
        require(clip_norm > 0.0, ErrorKind::Config, "clip_norm must be positive");
        require(batch_size >= 1, ErrorKind::Config, "batch_size must be >= 1");
        require(eval_every >= 1, ErrorKind::Config, "eval_every must be >= 1");
        require(adam_betas.first > 0.0 && adam_betas.first < 1.0 && adam_betas.second > 0.0 &&
                    adam_betas.second < 1.0,
                ErrorKind::Config, "adam betas must be in (0, 1)");
        require(adam_eps > 0.0, ErrorKind::Config, "adam_eps must be positive");
        require(final_lr >= 0.0, ErrorKind::Config, "final_lr must be >= 0");
    }
};

// Linear warmup to base_lr, then cosine decay to final_lr at total_steps.
double lr_at_step(std::int64_t step, const TrainConfig& cfg);

// Scales every gradient by clip_norm/norm when the global L2 norm exceeds
// clip_norm. Returns the pre-clip norm.
double clip_gradients(std::vector<NamedParam<float>>& params, double max_norm);

// Adaptive-moment optimizer with decoupled weight decay and bias-corrected
// first/second moments. One state slot per registered parameter.
class AdamW {
public:
    explicit AdamW(const TrainConfig& cfg) : cfg_(cfg) {}

    void step(std::vector<NamedParam<float>>& params, double lr);
    std::int64_t step_count() const { return t_; }

private:
    TrainConfig cfg_;
    std::int64_t t_ = 0;
    std::vector<Tensor<float>> m_;
    std::vector<Tensor<float>> v_;
};

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

inline constexpr char kCheckpointMagic[4] = {'A', 'P', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    std::string kind; // "dual" or "multilabel"
    EncoderConfig encoder_config;
    ProjectorConfig projector_config;
    std::int64_t label_dim = 0;
    std::uint64_t step = 0;
    double validation_loss = 0.0;
    std::string rng_state;
    std::vector<std::pair<std::string, Tensor<float>>> tensors;

    const Tensor<float>* find(const std::string& name) const {
        for (const auto& [n, t] : tensors) {
            if (n == name) return &t;
        }
        return nullptr;
    }
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Field-by-field comparison; the first differing field is named in the error.
void require_encoder_config_match(const EncoderConfig& got, const EncoderConfig& expected);

// ---------------------------------------------------------------------------
// Datasets and splits
// ---------------------------------------------------------------------------

// In-memory aligned pair dataset: row i of both matrices is pair i.
struct PairDataset {
    Tensor<float> ppg; // [N, L]
    Tensor<float> ecg; // [N, L]

    std::int64_t size() const { return ppg.rank() == 2 ? ppg.dim(0) : 0; }
    std::int64_t segment_length() const { return ppg.rank() == 2 ? ppg.dim(1) : 0; }
};

PairDataset dataset_from_pairs(const std::vector<SegmentPair>& pairs);
PairDataset load_pair_dataset(const std::string& ppg_store, const std::string& ecg_store);

struct DataSplit {
    std::vector<std::int64_t> train;
    std::vector<std::int64_t> val;
    std::vector<std::int64_t> test;
};

// Seeded shuffle, then contiguous train/val/test cuts.
DataSplit split_dataset(std::int64_t n, std::uint64_t seed, double val_fraction, double test_fraction);

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

// Two structurally identical encoder+projector branches aligned through a
// shared space with a learnable temperature.
struct DualEncoderModel {
    EncoderConfig encoder_config;
    ProjectorConfig projector_config;
    Net1dEncoder<float> ppg_encoder;
    Net1dEncoder<float> ecg_encoder;
    Projector<float> ppg_projector;
    Projector<float> ecg_projector;
    Temperature<float> temperature{0.07};

    static DualEncoderModel build(const EncoderConfig& enc_cfg, const ProjectorConfig& proj_cfg, std::uint64_t seed);
    static DualEncoderModel from_checkpoint(const Checkpoint& ckpt);

    std::vector<NamedParam<float>> parameters();
    std::vector<NamedBuffer<float>> buffers();
    void zero_grads();

    // Symmetric InfoNCE on one batch of raw signal rows.
    VarPtr<float> loss_on_batch(Tape<float>& tape, const Tensor<float>& ppg_rows, const Tensor<float>& ecg_rows,
                                Mode mode, Rng& dropout_rng);

    // Deterministic EVAL embeddings, chunked to bound memory.
    Tensor<float> embed_encoder(const Tensor<float>& rows, Modality which, std::int64_t chunk = 256);
    // Projected and l2-normalized shared-space embeddings.
    Tensor<float> embed_shared(const Tensor<float>& rows, Modality which, std::int64_t chunk = 256);

    Checkpoint to_checkpoint(std::uint64_t step, double validation_loss, const std::string& rng_state);
};

// Encoder with an affine multi-label head on the pooled embedding.
struct MultilabelModel {
    EncoderConfig encoder_config;
    std::int64_t label_dim = 0;
    Net1dEncoder<float> encoder;
    DenseLayer<float> head;

    static MultilabelModel from_pretrained(const Checkpoint& dual_ckpt, std::int64_t label_dim, std::uint64_t seed);
    static MultilabelModel from_checkpoint(const Checkpoint& ckpt);

    std::vector<NamedParam<float>> parameters(bool freeze_encoder);
    std::vector<NamedBuffer<float>> buffers();
    void zero_grads(bool freeze_encoder);

    VarPtr<float> loss_on_batch(Tape<float>& tape, const Tensor<float>& rows, const Tensor<float>& labels, Mode mode,
                                Rng& dropout_rng);
    Tensor<float> logits(const Tensor<float>& rows, std::int64_t chunk = 256);

    Checkpoint to_checkpoint(std::uint64_t step, double validation_loss, const std::string& rng_state);
};

// ---------------------------------------------------------------------------
// Training loops
// ---------------------------------------------------------------------------

struct TrainHistory {
    std::vector<double> step_losses;                      // one entry per optimizer step
    std::vector<std::pair<std::int64_t, double>> val_losses; // (step, loss) at every evaluation
    std::vector<Checkpoint> checkpoints;                  // step 0 plus every evaluation point
    std::size_t best_index = 0;                           // lowest validation loss, earliest on ties
};

// Contrastive pretraining over an aligned pair dataset. Deterministic for a
// fixed (seed, data, config); aborts with a diagnostic if the loss leaves the
// finite range.
TrainHistory pretrain_contrastive(const PairDataset& data, const DataSplit& split, const TrainConfig& cfg,
                                  const EncoderConfig& enc_cfg, const ProjectorConfig& proj_cfg);

struct FinetuneHistory {
    std::vector<double> step_losses;
    Checkpoint final_checkpoint;
};

// Multi-label fine-tuning with per-label binary cross-entropy on logits.
// train_rows/train_labels are the fitting set; freeze_encoder leaves every
// encoder tensor untouched and trains only the head.
FinetuneHistory finetune_multilabel(const Checkpoint& pretrained, const Tensor<float>& train_rows,
                                    const Tensor<float>& train_labels, const TrainConfig& cfg,
                                    bool freeze_encoder = false);

// Frozen-encoder embeddings for a whole store, pre-projector space.
Tensor<float> extract_embeddings(const Checkpoint& ckpt, const Tensor<float>& rows, std::int64_t chunk = 256);

struct RetrievalEvaluation {
    std::vector<RetrievalReport> per_batch;
    RetrievalReport weighted;
    RetrievalReport macro;
};

// PPG-to-ECG retrieval in the shared space over consecutive batches. The
// final partial batch is kept and weighted by its size unless drop_partial.
RetrievalEvaluation evaluate_retrieval(DualEncoderModel& model, const Tensor<float>& ppg_rows,
                                       const Tensor<float>& ecg_rows, std::int64_t batch_size,
                                       bool drop_partial = false);

} // namespace pulsealign
