#include "vitray/vit.hpp"

#include <cmath>
#include <cstring>

#include "vitray/kernels.hpp"
#include "vitray/rng.hpp"

namespace vitray {

ModelConfig ModelConfig::tiny() {
    return ModelConfig{32, 8, 64, 2, 4, 128, 2, 3};
}

ModelConfig ModelConfig::paper() {
    return ModelConfig{224, 16, 768, 12, 12, 3072, 2, 3};
}

ModelConfig ModelConfig::preset(std::string_view name) {
    if (name == "tiny") return tiny();
    if (name == "paper") return paper();
    throw ContractError("unknown preset: " + std::string(name));
}

void ModelConfig::validate() const {
    if (image_size == 0 || patch_size == 0 || embed_dim == 0 || num_layers == 0 ||
        num_heads == 0 || ffn_dim == 0 || num_classes < 2 || in_channels == 0) {
        throw ContractError("model config fields must be positive (>= 2 classes)");
    }
    if (image_size % patch_size != 0) {
        throw ContractError("image_size " + std::to_string(image_size) +
                            " is not divisible by patch_size " + std::to_string(patch_size));
    }
    if (embed_dim % num_heads != 0) {
        throw ContractError("embed_dim " + std::to_string(embed_dim) +
                            " is not divisible by num_heads " + std::to_string(num_heads));
    }
}

std::vector<std::pair<std::string, Shape>> parameter_shapes(const ModelConfig& c) {
    c.validate();
    const std::size_t d = c.embed_dim;
    std::vector<std::pair<std::string, Shape>> shapes;
    shapes.emplace_back("patch_embed.weight", Shape{c.patch_dim(), d});
    shapes.emplace_back("patch_embed.bias", Shape{d});
    shapes.emplace_back("pos_embed", Shape{c.seq_len(), d});
    shapes.emplace_back("cls_token", Shape{d});
    for (std::size_t l = 0; l < c.num_layers; ++l) {
        std::string p = "encoder." + std::to_string(l) + ".";
        shapes.emplace_back(p + "norm1.gamma", Shape{d});
        shapes.emplace_back(p + "norm1.beta", Shape{d});
        for (const char* proj : {"wq", "wk", "wv", "wo"}) {
            shapes.emplace_back(p + "attn." + proj + ".weight", Shape{d, d});
            shapes.emplace_back(p + "attn." + proj + ".bias", Shape{d});
        }
        shapes.emplace_back(p + "norm2.gamma", Shape{d});
        shapes.emplace_back(p + "norm2.beta", Shape{d});
        shapes.emplace_back(p + "ffn.w1.weight", Shape{d, c.ffn_dim});
        shapes.emplace_back(p + "ffn.w1.bias", Shape{c.ffn_dim});
        shapes.emplace_back(p + "ffn.w2.weight", Shape{c.ffn_dim, d});
        shapes.emplace_back(p + "ffn.w2.bias", Shape{d});
    }
    shapes.emplace_back("final_norm.gamma", Shape{d});
    shapes.emplace_back("final_norm.beta", Shape{d});
    shapes.emplace_back("head.weight", Shape{d, c.num_classes});
    shapes.emplace_back("head.bias", Shape{c.num_classes});
    return shapes;
}

std::size_t parameter_count(const ModelConfig& config) {
    std::size_t total = 0;
    for (const auto& [name, shape] : parameter_shapes(config)) total += shape_size(shape);
    return total;
}

void ViTParams::rebuild_index() {
    index_.clear();
    for (std::size_t i = 0; i < named.size(); ++i) index_.emplace(named[i].first, i);
}

const Tensor& ViTParams::at(std::string_view name) const {
    if (index_.size() == named.size()) {
        auto it = index_.find(std::string(name));
        if (it != index_.end()) return named[it->second].second;
    } else {
        for (const auto& [n, t] : named) {
            if (n == name) return t;
        }
    }
    throw ContractError("unknown parameter: " + std::string(name));
}

Tensor& ViTParams::at(std::string_view name) {
    return const_cast<Tensor&>(std::as_const(*this).at(name));
}

std::size_t ViTParams::total_parameters() const {
    std::size_t total = 0;
    for (const auto& [name, t] : named) total += t.size();
    return total;
}

ViTParams ViTParams::clone() const {
    ViTParams copy;
    copy.config = config;
    copy.named.reserve(named.size());
    for (const auto& [name, t] : named) {
        copy.named.emplace_back(name,
                                Tensor::from_data(t.shape(), t.values(), t.requires_grad()));
    }
    copy.rebuild_index();
    return copy;
}

ViTParams init_params(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    SplitMix64 rng = seed_stream(seed, "init");
    ViTParams params;
    params.config = config;
    for (auto& [name, shape] : parameter_shapes(config)) {
        Tensor t;
        if (name.ends_with(".weight")) {
            std::vector<double> data(shape_size(shape));
            for (double& v : data) v = rng.next_truncated_normal(0.02);
            t = Tensor::from_data(shape, std::move(data), true);
        } else if (name.ends_with(".gamma")) {
            t = Tensor::full(shape, 1.0, true);
        } else {
            t = Tensor::zeros(shape, true);
        }
        params.named.emplace_back(std::move(name), std::move(t));
    }
    params.rebuild_index();
    return params;
}

// ---------------------------------------------------------------------------
// Tape path
// ---------------------------------------------------------------------------

namespace {

std::vector<double> patch_rows(const ImageTensor& img, std::size_t patch_size,
                               std::size_t& n_out, std::size_t& dim_out) {
    if (img.height != img.width) {
        throw ContractError("patchify: image must be square, got " +
                            std::to_string(img.height) + "x" + std::to_string(img.width));
    }
    if (img.height % patch_size != 0) {
        throw ContractError("patchify: size " + std::to_string(img.height) +
                            " is not divisible by patch size " + std::to_string(patch_size));
    }
    const std::size_t grid = img.height / patch_size;
    const std::size_t n = grid * grid;
    const std::size_t dim = img.channels * patch_size * patch_size;
    std::vector<double> rows(n * dim);
    // Patches enumerated row-major over the grid; each row is channel-major,
    // then row-major within the patch.
    for (std::size_t gi = 0; gi < grid; ++gi) {
        for (std::size_t gj = 0; gj < grid; ++gj) {
            double* row = rows.data() + (gi * grid + gj) * dim;
            std::size_t at = 0;
            for (std::size_t c = 0; c < img.channels; ++c) {
                for (std::size_t pi = 0; pi < patch_size; ++pi) {
                    for (std::size_t pj = 0; pj < patch_size; ++pj) {
                        row[at++] = img.at(c, gi * patch_size + pi, gj * patch_size + pj);
                    }
                }
            }
        }
    }
    n_out = n;
    dim_out = dim;
    return rows;
}

} // namespace

Tensor patchify(const ImageTensor& img, std::size_t patch_size) {
    std::size_t n = 0, dim = 0;
    std::vector<double> rows = patch_rows(img, patch_size, n, dim);
    return Tensor::from_data({n, dim}, std::move(rows), false);
}

Tensor embed(const Tensor& patches, const ViTParams& params) {
    Tensor e = add_bias_row(matmul(patches, params.at("patch_embed.weight")),
                            params.at("patch_embed.bias"));
    Tensor cls = reshape(params.at("cls_token"), {1, params.config.embed_dim});
    Tensor tokens = concat_rows({cls, e});
    return add(tokens, params.at("pos_embed"));
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v) {
    if (q.cols() != k.cols()) {
        throw ShapeError("attention: Q and K key dims disagree: " + shape_str(q.shape()) +
                         " vs " + shape_str(k.shape()));
    }
    if (k.rows() != v.rows()) {
        throw ShapeError("attention: K and V row counts disagree: " + shape_str(k.shape()) +
                         " vs " + shape_str(v.shape()));
    }
    double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(q.cols()));
    Tensor weights = softmax(scale(matmul(q, transpose(k)), inv_sqrt_dk), 1);
    return matmul(weights, v);
}

Tensor encoder_layer(const Tensor& z, const ViTParams& params, std::size_t layer) {
    const ModelConfig& c = params.config;
    if (layer >= c.num_layers) throw ContractError("encoder layer index out of range");
    const std::string p = "encoder." + std::to_string(layer) + ".";
    const std::size_t dk = c.head_dim();

    Tensor h1 = layer_norm(z, params.at(p + "norm1.gamma"), params.at(p + "norm1.beta"),
                           kLayerNormEps);
    Tensor q = add_bias_row(matmul(h1, params.at(p + "attn.wq.weight")),
                            params.at(p + "attn.wq.bias"));
    Tensor k = add_bias_row(matmul(h1, params.at(p + "attn.wk.weight")),
                            params.at(p + "attn.wk.bias"));
    Tensor v = add_bias_row(matmul(h1, params.at(p + "attn.wv.weight")),
                            params.at(p + "attn.wv.bias"));
    std::vector<Tensor> heads;
    heads.reserve(c.num_heads);
    for (std::size_t h = 0; h < c.num_heads; ++h) {
        Tensor qh = slice_cols(q, h * dk, (h + 1) * dk);
        Tensor kh = slice_cols(k, h * dk, (h + 1) * dk);
        Tensor vh = slice_cols(v, h * dk, (h + 1) * dk);
        heads.push_back(attention(qh, kh, vh));
    }
    Tensor attn = add_bias_row(matmul(concat_cols(heads), params.at(p + "attn.wo.weight")),
                               params.at(p + "attn.wo.bias"));
    Tensor z1 = add(z, attn);

    Tensor h2 = layer_norm(z1, params.at(p + "norm2.gamma"), params.at(p + "norm2.beta"),
                           kLayerNormEps);
    Tensor f = add_bias_row(matmul(h2, params.at(p + "ffn.w1.weight")),
                            params.at(p + "ffn.w1.bias"));
    f = gelu(f);
    f = add_bias_row(matmul(f, params.at(p + "ffn.w2.weight")),
                     params.at(p + "ffn.w2.bias"));
    return add(z1, f);
}

Tensor forward_sample(const ImageTensor& img, const ViTParams& params) {
    const ModelConfig& c = params.config;
    if (img.channels != c.in_channels || img.height != c.image_size ||
        img.width != c.image_size) {
        throw ContractError("forward: image (" + std::to_string(img.channels) + ", " +
                            std::to_string(img.height) + ", " + std::to_string(img.width) +
                            ") does not match model input (" +
                            std::to_string(c.in_channels) + ", " +
                            std::to_string(c.image_size) + ", " +
                            std::to_string(c.image_size) + ")");
    }
    Tensor z = embed(patchify(img, c.patch_size), params);
    for (std::size_t l = 0; l < c.num_layers; ++l) z = encoder_layer(z, params, l);
    Tensor zf = layer_norm(z, params.at("final_norm.gamma"), params.at("final_norm.beta"),
                           kLayerNormEps);
    Tensor cls = slice_rows(zf, 0, 1);
    Tensor logits = add_bias_row(matmul(cls, params.at("head.weight")),
                                 params.at("head.bias"));
    return softmax(logits, 1);
}

Tensor forward(const ViTParams& params, const std::vector<const ImageTensor*>& batch) {
    if (batch.empty()) throw ContractError("forward: empty batch");
    std::vector<Tensor> rows;
    rows.reserve(batch.size());
    for (const ImageTensor* img : batch) rows.push_back(forward_sample(*img, params));
    if (rows.size() == 1) return rows[0];
    return concat_rows(rows);
}

// ---------------------------------------------------------------------------
// Inference path
// ---------------------------------------------------------------------------

namespace infer {

namespace {

/// out[r x slice] = columns [begin, begin+slice) of a[r x cols]
void copy_cols(const Mat& a, std::size_t begin, std::size_t slice, Mat& out) {
    for (std::size_t i = 0; i < a.rows; ++i) {
        std::memcpy(out.ptr() + i * slice, a.ptr() + i * a.cols + begin,
                    slice * sizeof(double));
    }
}

Mat linear(const Mat& x, const Tensor& w, const Tensor& b) {
    Mat out(x.rows, w.cols());
    kernels::matmul(x.ptr(), w.data(), out.ptr(), x.rows, x.cols, w.cols());
    kernels::add_bias_rows(out.ptr(), b.data(), out.ptr(), out.rows, out.cols);
    return out;
}

double max_row_sum_err(const Mat& weights) {
    double worst = 0.0;
    for (std::size_t i = 0; i < weights.rows; ++i) {
        double s = kernels::sum(weights.ptr() + i * weights.cols, weights.cols);
        worst = std::max(worst, std::fabs(s - 1.0));
    }
    return worst;
}

} // namespace

Mat patchify(const ImageTensor& img, std::size_t patch_size) {
    std::size_t n = 0, dim = 0;
    std::vector<double> rows = patch_rows(img, patch_size, n, dim);
    Mat out(n, dim);
    out.data = std::move(rows);
    return out;
}

Mat embed(const ViTParams& params, const Mat& patches) {
    const ModelConfig& c = params.config;
    if (patches.cols != c.patch_dim() || patches.rows != c.num_patches()) {
        throw ContractError("embed: patch matrix does not match config");
    }
    Mat e = linear(patches, params.at("patch_embed.weight"), params.at("patch_embed.bias"));
    Mat z0(c.seq_len(), c.embed_dim);
    std::memcpy(z0.ptr(), params.at("cls_token").data(), c.embed_dim * sizeof(double));
    std::memcpy(z0.ptr() + c.embed_dim, e.ptr(), e.data.size() * sizeof(double));
    kernels::add(z0.ptr(), params.at("pos_embed").data(), z0.ptr(), z0.data.size());
    return z0;
}

Mat encoder_layer(const ViTParams& params, std::size_t layer, const Mat& z,
                  AttentionTrace* trace) {
    const ModelConfig& c = params.config;
    const std::string p = "encoder." + std::to_string(layer) + ".";
    const std::size_t n = z.rows, d = z.cols, dk = c.head_dim();
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));

    Mat h1(n, d);
    kernels::layer_norm_rows(z.ptr(), params.at(p + "norm1.gamma").data(),
                             params.at(p + "norm1.beta").data(), kLayerNormEps, h1.ptr(),
                             nullptr, nullptr, n, d);
    Mat q = linear(h1, params.at(p + "attn.wq.weight"), params.at(p + "attn.wq.bias"));
    Mat k = linear(h1, params.at(p + "attn.wk.weight"), params.at(p + "attn.wk.bias"));
    Mat v = linear(h1, params.at(p + "attn.wv.weight"), params.at(p + "attn.wv.bias"));

    double attn_err = 0.0;
    Mat cat(n, d);
    Mat qh(n, dk), kh(n, dk), vh(n, dk), scores(n, n), out_h(n, dk);
    for (std::size_t h = 0; h < c.num_heads; ++h) {
        copy_cols(q, h * dk, dk, qh);
        copy_cols(k, h * dk, dk, kh);
        copy_cols(v, h * dk, dk, vh);
        // Q K^T via the transposed-B kernel: accumulation order matches
        // matmul(Q, transpose(K)) on the tape exactly.
        kernels::matmul_nt(qh.ptr(), kh.ptr(), scores.ptr(), n, dk, n);
        kernels::scale(scores.ptr(), inv_sqrt_dk, scores.ptr(), scores.data.size());
        kernels::softmax_slices(scores.ptr(), scores.ptr(), n, n, 1);
        if (trace) attn_err = std::max(attn_err, max_row_sum_err(scores));
        kernels::matmul(scores.ptr(), vh.ptr(), out_h.ptr(), n, n, dk);
        for (std::size_t i = 0; i < n; ++i) {
            std::memcpy(cat.ptr() + i * d + h * dk, out_h.ptr() + i * dk,
                        dk * sizeof(double));
        }
    }
    if (trace) trace->layer_max_err.push_back(attn_err);

    Mat attn = linear(cat, params.at(p + "attn.wo.weight"), params.at(p + "attn.wo.bias"));
    Mat z1(n, d);
    kernels::add(z.ptr(), attn.ptr(), z1.ptr(), z1.data.size());

    Mat h2(n, d);
    kernels::layer_norm_rows(z1.ptr(), params.at(p + "norm2.gamma").data(),
                             params.at(p + "norm2.beta").data(), kLayerNormEps, h2.ptr(),
                             nullptr, nullptr, n, d);
    Mat f1 = linear(h2, params.at(p + "ffn.w1.weight"), params.at(p + "ffn.w1.bias"));
    kernels::gelu(f1.ptr(), f1.ptr(), f1.data.size());
    Mat f2 = linear(f1, params.at(p + "ffn.w2.weight"), params.at(p + "ffn.w2.bias"));
    Mat out(n, d);
    kernels::add(z1.ptr(), f2.ptr(), out.ptr(), out.data.size());
    return out;
}

std::vector<double> classify(const ViTParams& params, const Mat& z_final,
                             AttentionTrace* trace) {
    const ModelConfig& c = params.config;
    Mat zf(z_final.rows, z_final.cols);
    kernels::layer_norm_rows(z_final.ptr(), params.at("final_norm.gamma").data(),
                             params.at("final_norm.beta").data(), kLayerNormEps, zf.ptr(),
                             nullptr, nullptr, zf.rows, zf.cols);
    Mat cls(1, c.embed_dim);
    std::memcpy(cls.ptr(), zf.ptr(), c.embed_dim * sizeof(double));
    Mat logits = linear(cls, params.at("head.weight"), params.at("head.bias"));
    std::vector<double> probs(c.num_classes);
    kernels::softmax_slices(logits.ptr(), probs.data(), 1, c.num_classes, 1);
    for (double v : probs) {
        if (!std::isfinite(v)) throw NumericError("non-finite class probability");
    }
    if (trace) {
        double s = kernels::sum(probs.data(), probs.size());
        trace->head_softmax_err = std::max(trace->head_softmax_err, std::fabs(s - 1.0));
    }
    return probs;
}

std::vector<double> probabilities(const ViTParams& params, const ImageTensor& img,
                                  AttentionTrace* trace) {
    const ModelConfig& c = params.config;
    if (img.channels != c.in_channels || img.height != c.image_size ||
        img.width != c.image_size) {
        throw ContractError("probabilities: image does not match model input shape");
    }
    Mat z = embed(params, infer::patchify(img, c.patch_size));
    for (std::size_t l = 0; l < c.num_layers; ++l) {
        z = encoder_layer(params, l, z, trace);
    }
    return classify(params, z, trace);
}

} // namespace infer

} // namespace vitray
