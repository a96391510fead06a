#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vitray/tensor.hpp"
#include "vitray/vit.hpp"

namespace vitray {

/// Model container, format `RVXR`:
///
///   bytes 0..3   magic "RVXR"
///   u32          format version (1)
///   u32          JSON length, then that many UTF-8 bytes: the model config
///                plus best_test_accuracy / best_epoch
///   per tensor   u32 name length, name bytes, u32 rank, u64 dims[rank],
///                float64 payload (row-major)
///
/// All integers and floats little-endian. Tensors appear in canonical
/// parameter order and are validated against the embedded config on load.
/// Writes go to a temp file followed by an atomic rename.
struct Checkpoint {
    struct NamedTensor {
        std::string name;
        Shape shape;
        std::vector<double> data;
    };

    ModelConfig config;
    std::vector<NamedTensor> tensors;
    double best_test_accuracy = 0.0;
    std::size_t best_epoch = 0;

    static Checkpoint from_params(const ViTParams& params, double best_test_accuracy,
                                  std::size_t best_epoch);
    ViTParams to_params() const;

    void save(const std::filesystem::path& path) const;
    static Checkpoint load(const std::filesystem::path& path);
    /// load() plus a shape check against `expected`; the error names the
    /// first offending tensor.
    static Checkpoint load(const std::filesystem::path& path, const ModelConfig& expected);
};

} // namespace vitray
