#include "vitray/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "vitray/rng.hpp"

namespace vitray {

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ContractError("learning_rate must be > 0");
    if (batch_size == 0) throw ContractError("batch_size must be >= 1");
    if (max_epochs == 0) throw ContractError("max_epochs must be >= 1");
    if (patience == 0) throw ContractError("patience must be >= 1");
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
        throw ContractError("adam betas must lie in (0, 1)");
    }
    if (!(epsilon > 0.0)) throw ContractError("adam epsilon must be > 0");
}

Tensor cross_entropy(const Tensor& probs, const std::vector<int>& labels) {
    if (probs.rank() != 2) {
        throw ShapeError("cross_entropy: expected (batch x classes), got " +
                         shape_str(probs.shape()));
    }
    const std::size_t batch = probs.rows(), classes = probs.cols();
    if (labels.size() != batch) {
        throw ContractError("cross_entropy: " + std::to_string(labels.size()) +
                            " labels for a batch of " + std::to_string(batch));
    }
    std::vector<double> onehot(batch * classes, 0.0);
    for (std::size_t i = 0; i < batch; ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
            throw ContractError("cross_entropy: label " + std::to_string(labels[i]) +
                                " out of range for " + std::to_string(classes) + " classes");
        }
        onehot[i * classes + static_cast<std::size_t>(labels[i])] = 1.0;
    }
    Tensor mask = Tensor::from_data({batch, classes}, std::move(onehot), false);
    return scale(sum(mul(log(probs), mask)), -1.0 / static_cast<double>(batch));
}

OptimizerState OptimizerState::init(const ViTParams& params) {
    OptimizerState state;
    state.m.reserve(params.named.size());
    state.v.reserve(params.named.size());
    for (const auto& [name, t] : params.named) {
        state.m.emplace_back(t.size(), 0.0);
        state.v.emplace_back(t.size(), 0.0);
    }
    return state;
}

std::vector<const std::vector<double>*> collect_gradients(const ViTParams& params) {
    std::vector<const std::vector<double>*> grads;
    grads.reserve(params.named.size());
    for (const auto& [name, t] : params.named) {
        if (!t.has_grad()) {
            throw ContractError("missing gradient for parameter " + name);
        }
        grads.push_back(&t.grad());
    }
    return grads;
}

void adam_step(ViTParams& params, const std::vector<const std::vector<double>*>& grads,
               OptimizerState& state, const TrainConfig& cfg) {
    if (grads.size() != params.named.size() || state.m.size() != params.named.size()) {
        throw ContractError("adam_step: gradient/state list does not match parameters");
    }
    state.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.named.size(); ++i) {
        Tensor& t = params.named[i].second;
        const std::vector<double>& g = *grads[i];
        if (g.size() != t.size()) {
            throw ContractError("adam_step: gradient shape mismatch for parameter " +
                                params.named[i].first);
        }
        double* theta = t.mutable_data();
        double* m = state.m[i].data();
        double* v = state.v[i].data();
        for (std::size_t j = 0; j < g.size(); ++j) {
            m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
            v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
            double mhat = m[j] / bc1;
            double vhat = v[j] / bc2;
            theta[j] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
        }
    }
}

namespace {

std::size_t argmax_row(const double* row, std::size_t n) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < n; ++j) {
        if (row[j] > row[best]) best = j;
    }
    return best;
}

double clamped_neg_log(double p) {
    return -std::log(p < kLogClamp ? kLogClamp : p);
}

} // namespace

EpochStats train_epoch(ViTParams& params, OptimizerState& state, const LabeledDataset& ds,
                       const std::vector<std::size_t>& train_indices,
                       const TrainConfig& cfg) {
    if (train_indices.empty()) throw ContractError("train_epoch: empty training split");
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (const auto& batch : make_batches(train_indices, cfg.batch_size)) {
        std::vector<const ImageTensor*> images;
        std::vector<int> labels;
        images.reserve(batch.size());
        for (std::size_t idx : batch) {
            images.push_back(&ds.samples[idx].image);
            labels.push_back(ds.samples[idx].label);
        }
        Tensor probs = forward(params, images);
        Tensor loss = cross_entropy(probs, labels);

        const std::size_t classes = probs.cols();
        for (std::size_t i = 0; i < batch.size(); ++i) {
            if (argmax_row(probs.data() + i * classes, classes) ==
                static_cast<std::size_t>(labels[i])) {
                ++correct;
            }
        }
        loss_sum += loss.item() * static_cast<double>(batch.size());

        for (auto& [name, t] : params.named) t.clear_grad();
        backward(loss);
        adam_step(params, collect_gradients(params), state, cfg);
        for (auto& [name, t] : params.named) t.clear_grad();
    }
    const double inv_n = 1.0 / static_cast<double>(train_indices.size());
    return {loss_sum * inv_n, static_cast<double>(correct) * inv_n};
}

EvalResult evaluate(const ViTParams& params, const LabeledDataset& ds,
                    const std::vector<std::size_t>& indices) {
    if (indices.empty()) throw ContractError("evaluate: empty split");
    EvalResult result;
    result.predictions.reserve(indices.size());
    result.scores.reserve(indices.size());
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t idx : indices) {
        const Sample& sample = ds.samples[idx];
        std::vector<double> probs = infer::probabilities(params, sample.image);
        std::size_t pred = argmax_row(probs.data(), probs.size());
        result.predictions.push_back(static_cast<int>(pred));
        result.scores.push_back(probs.size() > 1 ? probs[1] : probs[0]);
        loss_sum += clamped_neg_log(probs[static_cast<std::size_t>(sample.label)]);
        if (pred == static_cast<std::size_t>(sample.label)) ++correct;
    }
    const double inv_n = 1.0 / static_cast<double>(indices.size());
    result.loss = loss_sum * inv_n;
    result.accuracy = static_cast<double>(correct) * inv_n;
    return result;
}

EarlyStopper::EarlyStopper(std::size_t patience)
    : patience_(patience), best_(-std::numeric_limits<double>::infinity()) {
    if (patience == 0) throw ContractError("patience must be >= 1");
}

bool EarlyStopper::observe(double accuracy) {
    ++epoch_;
    if (accuracy > best_) {
        best_ = accuracy;
        best_epoch_ = epoch_;
        counter_ = 0;
        return true;
    }
    ++counter_;
    return false;
}

void log_epoch(const EpochRecord& r, const std::filesystem::path& csv_path) {
    const bool fresh = !std::filesystem::exists(csv_path);
    std::FILE* f = std::fopen(csv_path.string().c_str(), "ab");
    if (!f) throw IoError("cannot open log file " + csv_path.string());
    int rc = 0;
    if (fresh) rc = std::fputs("epoch,train_loss,train_acc,test_loss,test_acc\n", f);
    if (rc >= 0) {
        rc = std::fprintf(f, "%zu,%.6f,%.6f,%.6f,%.6f\n", r.epoch, r.train_loss,
                          r.train_accuracy, r.test_loss, r.test_accuracy);
    }
    if (std::fclose(f) != 0 || rc < 0) {
        throw IoError("write failed on log file " + csv_path.string());
    }
}

FitResult fit(const LabeledDataset& ds, const SplitIndices& split,
              const ModelConfig& model_cfg, const TrainConfig& train_cfg,
              const std::filesystem::path& out_dir) {
    model_cfg.validate();
    train_cfg.validate();
    if (split.train.empty()) throw ContractError("fit: empty training split");
    if (split.test.empty()) throw ContractError("fit: empty test split");

    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    FitResult result;
    result.log_path = out_dir / "train_log.csv";
    result.checkpoint_path = out_dir / "best.ckpt";
    {
        // Fail on an unwritable output directory before any training work.
        std::filesystem::remove(result.log_path, ec);
        std::FILE* f = std::fopen(result.log_path.string().c_str(), "wb");
        if (!f) throw IoError("output directory not writable: " + out_dir.string());
        std::fclose(f);
        std::filesystem::remove(result.log_path, ec);
    }

    ViTParams params = init_params(model_cfg, train_cfg.seed);
    OptimizerState state = OptimizerState::init(params);
    EarlyStopper stopper(train_cfg.patience);

    for (std::size_t epoch = 1; epoch <= train_cfg.max_epochs; ++epoch) {
        std::vector<std::size_t> order = split.train;
        if (train_cfg.shuffle_each_epoch) {
            SplitMix64 rng = seed_stream(train_cfg.seed, "shuffle", epoch);
            shuffle(order, rng);
        }
        EpochStats stats = train_epoch(params, state, ds, order, train_cfg);
        EvalResult eval = evaluate(params, ds, split.test);

        EpochRecord record{epoch, stats.loss, stats.accuracy, eval.loss, eval.accuracy};
        result.history.push_back(record);
        log_epoch(record, result.log_path);

        if (stopper.observe(eval.accuracy)) {
            result.best = Checkpoint::from_params(params, eval.accuracy, epoch);
            result.best.save(result.checkpoint_path);
        }
        if (stopper.should_stop()) break;
    }
    return result;
}

} // namespace vitray
