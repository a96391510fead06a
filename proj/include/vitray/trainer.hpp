#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "vitray/checkpoint.hpp"
#include "vitray/dataset.hpp"
#include "vitray/tensor.hpp"
#include "vitray/vit.hpp"

namespace vitray {

struct TrainConfig {
    double learning_rate = 1e-4;
    std::size_t batch_size = 32;
    std::size_t max_epochs = 50;
    std::size_t patience = 10;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    bool shuffle_each_epoch = true;

    void validate() const;
};

/// Mean over the batch of -log(probability of the true class), with the log
/// clamped at kLogClamp. Differentiable through `probs`.
Tensor cross_entropy(const Tensor& probs, const std::vector<int>& labels);

/// Adam moments, mirroring the canonical parameter list.
struct OptimizerState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    std::uint64_t step = 0;

    static OptimizerState init(const ViTParams& params);
};

/// Gradient views in canonical parameter order; throws if any gradient is
/// missing or mis-shaped.
std::vector<const std::vector<double>*> collect_gradients(const ViTParams& params);

/// One bias-corrected Adam update:
///   m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2
///   theta <- theta - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
void adam_step(ViTParams& params, const std::vector<const std::vector<double>*>& grads,
               OptimizerState& state, const TrainConfig& cfg);

struct EpochStats {
    double loss = 0.0;
    double accuracy = 0.0;
};

/// One pass over `train_indices` in consecutive batches: forward, loss,
/// backward, adam_step. Accuracy comes from the same forward pass as the
/// loss.
EpochStats train_epoch(ViTParams& params, OptimizerState& state,
                       const LabeledDataset& ds,
                       const std::vector<std::size_t>& train_indices,
                       const TrainConfig& cfg);

struct EvalResult {
    double loss = 0.0;
    double accuracy = 0.0;
    std::vector<int> predictions;  ///< argmax; ties resolve to the lowest index
    std::vector<double> scores;    ///< probability of class 1
};

/// Pure evaluation over `indices`; parameters are never touched.
EvalResult evaluate(const ViTParams& params, const LabeledDataset& ds,
                    const std::vector<std::size_t>& indices);

/// Early-stopping counter: strict improvement saves and resets, anything
/// else increments; stop once `patience` consecutive epochs fail to improve.
/// fit() drives this object; tests drive it with injected sequences.
class EarlyStopper {
public:
    explicit EarlyStopper(std::size_t patience);

    /// Feeds one epoch's monitored accuracy; true when it strictly improved.
    bool observe(double accuracy);
    bool should_stop() const { return counter_ >= patience_; }
    double best() const { return best_; }
    std::size_t best_epoch() const { return best_epoch_; }
    std::size_t epochs_seen() const { return epoch_; }

private:
    std::size_t patience_;
    std::size_t counter_ = 0;
    std::size_t epoch_ = 0;
    std::size_t best_epoch_ = 0;
    double best_;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double test_loss = 0.0;
    double test_accuracy = 0.0;
};

/// Appends `epoch,train_loss,train_acc,test_loss,test_acc` with six decimal
/// places; writes the header when the file does not exist yet.
void log_epoch(const EpochRecord& record, const std::filesystem::path& csv_path);

struct FitResult {
    Checkpoint best;
    std::vector<EpochRecord> history;
    std::filesystem::path checkpoint_path;
    std::filesystem::path log_path;
};

/// The full training loop: epochs of train_epoch + evaluate with CSV
/// logging, checkpointing on strict test-accuracy improvement, and
/// patience-based early stopping. Returns the best checkpoint, not the last.
FitResult fit(const LabeledDataset& ds, const SplitIndices& split,
              const ModelConfig& model_cfg, const TrainConfig& train_cfg,
              const std::filesystem::path& out_dir);

} // namespace vitray
