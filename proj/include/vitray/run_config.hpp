#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "vitray/trainer.hpp"
#include "vitray/vit.hpp"

namespace vitray {

/// Merged run settings for the CLI. Resolution order: preset defaults, then
/// config-file keys, then command-line keys; the VITRAY_SEED environment
/// variable overrides every seed source when set.
struct RunConfig {
    std::string preset = "tiny";
    ModelConfig model = ModelConfig::tiny();
    TrainConfig train;
    double split_ratio = 0.8;
    bool standardize = false;
    std::string data_dir;
    std::string out_dir;

    using KeyValues = std::map<std::string, std::string>;

    static RunConfig resolve(const KeyValues& file_overrides, const KeyValues& flag_overrides);

    /// Sorted `key=value` lines, including the derived num_patches, seq_len
    /// and head_dim. Identical configs produce identical bytes.
    std::string resolved_text() const;

    /// Writes resolved_text() to `<dir>/config.resolved`.
    std::filesystem::path write_resolved(const std::filesystem::path& dir) const;
};

/// Flat `key=value` file, one pair per line, `#` starts a comment.
RunConfig::KeyValues parse_config_file(const std::filesystem::path& path);

} // namespace vitray
