#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "vitray/image.hpp"
#include "vitray/tensor.hpp"

namespace vitray {

/// LayerNorm epsilon used by every norm in the encoder.
inline constexpr double kLayerNormEps = 1e-6;

struct ModelConfig {
    std::size_t image_size = 32;
    std::size_t patch_size = 8;
    std::size_t embed_dim = 64;
    std::size_t num_layers = 2;
    std::size_t num_heads = 4;
    std::size_t ffn_dim = 128;
    std::size_t num_classes = 2;
    std::size_t in_channels = 3;

    static ModelConfig tiny();  ///< (32, 8, 64, 2, 4, 128, 2)
    static ModelConfig paper(); ///< (224, 16, 768, 12, 12, 3072, 2), ViT-Base shape
    static ModelConfig preset(std::string_view name);

    std::size_t patches_per_side() const { return image_size / patch_size; }
    std::size_t num_patches() const { return patches_per_side() * patches_per_side(); }
    std::size_t seq_len() const { return num_patches() + 1; }
    std::size_t head_dim() const { return embed_dim / num_heads; }
    std::size_t patch_dim() const { return patch_size * patch_size * in_channels; }

    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

/// Named learnable tensors in a fixed canonical order. Copying shares the
/// underlying tensors (they are handles); clone() deep-copies.
struct ViTParams {
    ModelConfig config;
    std::vector<std::pair<std::string, Tensor>> named;

    const Tensor& at(std::string_view name) const;
    Tensor& at(std::string_view name);
    std::size_t total_parameters() const;
    ViTParams clone() const;
    void rebuild_index();

private:
    std::unordered_map<std::string_view, std::size_t> index_;
};

/// Canonical (name, shape) list derived from the config; the layout contract
/// for init, checkpoints, and optimizer state.
std::vector<std::pair<std::string, Shape>> parameter_shapes(const ModelConfig& config);
std::size_t parameter_count(const ModelConfig& config);

/// Projection weights ~ truncated normal (sigma 0.02, cut at 2 sigma) from
/// seed_stream(seed, "init"); norm gains 1; biases, positional table and CLS
/// token 0. Deterministic for a fixed seed.
ViTParams init_params(const ModelConfig& config, std::uint64_t seed);

// --- Tape (training) path --------------------------------------------------

/// Splits a (C, H, W) image into N = (H/P)^2 rows, one flattened P x P patch
/// each, channel-major then row-major within the patch. The result is a leaf
/// tensor; gradients never flow into pixels.
Tensor patchify(const ImageTensor& img, std::size_t patch_size);

/// z0 = [cls; patches * W + b] + positional table.
Tensor embed(const Tensor& patches, const ViTParams& params);

/// Softmax(Q K^T / sqrt(d_k)) V.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v);

/// Pre-norm block: z' = z + MultiHead(LN1(z)); out = z' + FFN(LN2(z')).
Tensor encoder_layer(const Tensor& z, const ViTParams& params, std::size_t layer);

/// Full differentiable forward for one image: probabilities, shape (1, C).
Tensor forward_sample(const ImageTensor& img, const ViTParams& params);

/// Batch forward; row b holds the class distribution of batch[b]. Samples
/// are processed independently, so duplicate inputs yield bitwise-identical
/// rows.
Tensor forward(const ViTParams& params, const std::vector<const ImageTensor*>& batch);

// --- Inference path ----------------------------------------------------------

/// Plain row-major matrix buffer for the tape-free forward below.
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Mat() = default;
    Mat(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
    double* ptr() { return data.data(); }
    const double* ptr() const { return data.data(); }
};

/// Max |row sum - 1| of the attention weights, per encoder layer (max over
/// heads and rows), and of the classification softmax.
struct AttentionTrace {
    std::vector<double> layer_max_err;
    double head_softmax_err = 0.0;
};

// Tape-free forward stages. Same kernels in the same order as the tape path,
// so results match it bitwise; tests pin that equivalence. The staged API
// exists so callers can reuse unchanged activations (evaluation loops,
// finite-difference sweeps).
namespace infer {

Mat patchify(const ImageTensor& img, std::size_t patch_size);
Mat embed(const ViTParams& params, const Mat& patches);
Mat encoder_layer(const ViTParams& params, std::size_t layer, const Mat& z,
                  AttentionTrace* trace = nullptr);
std::vector<double> classify(const ViTParams& params, const Mat& z_final,
                             AttentionTrace* trace = nullptr);
std::vector<double> probabilities(const ViTParams& params, const ImageTensor& img,
                                  AttentionTrace* trace = nullptr);

} // namespace infer

} // namespace vitray
