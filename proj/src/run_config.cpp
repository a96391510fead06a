#include "vitray/run_config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace vitray {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::size_t parse_size(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        long long v = std::stoll(value, &pos);
        if (pos != value.size() || v < 0) throw std::invalid_argument(value);
        return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
        throw ContractError("config key '" + key + "': not a non-negative integer: '" +
                            value + "'");
    }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        unsigned long long v = std::stoull(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return static_cast<std::uint64_t>(v);
    } catch (const std::exception&) {
        throw ContractError("config key '" + key + "': not an unsigned integer: '" + value +
                            "'");
    }
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ContractError("config key '" + key + "': not a number: '" + value + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "1" || value == "true") return true;
    if (value == "0" || value == "false") return false;
    throw ContractError("config key '" + key + "': expected 0/1/true/false, got '" + value +
                        "'");
}

void apply_key(RunConfig& rc, const std::string& key, const std::string& value) {
    if (key == "preset") return; // handled up front
    if (key == "image_size") rc.model.image_size = parse_size(key, value);
    else if (key == "patch_size") rc.model.patch_size = parse_size(key, value);
    else if (key == "embed_dim") rc.model.embed_dim = parse_size(key, value);
    else if (key == "num_layers") rc.model.num_layers = parse_size(key, value);
    else if (key == "num_heads") rc.model.num_heads = parse_size(key, value);
    else if (key == "ffn_dim") rc.model.ffn_dim = parse_size(key, value);
    else if (key == "num_classes") rc.model.num_classes = parse_size(key, value);
    else if (key == "learning_rate") rc.train.learning_rate = parse_double(key, value);
    else if (key == "batch_size") rc.train.batch_size = parse_size(key, value);
    else if (key == "max_epochs") rc.train.max_epochs = parse_size(key, value);
    else if (key == "patience") rc.train.patience = parse_size(key, value);
    else if (key == "seed") rc.train.seed = parse_u64(key, value);
    else if (key == "adam_beta1") rc.train.beta1 = parse_double(key, value);
    else if (key == "adam_beta2") rc.train.beta2 = parse_double(key, value);
    else if (key == "adam_eps") rc.train.epsilon = parse_double(key, value);
    else if (key == "shuffle_each_epoch") rc.train.shuffle_each_epoch = parse_bool(key, value);
    else if (key == "split_ratio") rc.split_ratio = parse_double(key, value);
    else if (key == "standardize") rc.standardize = parse_bool(key, value);
    else if (key == "data_dir") rc.data_dir = value;
    else if (key == "out_dir") rc.out_dir = value;
    else throw ContractError("unknown config key: '" + key + "'");
}

std::string fmt_double(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

} // namespace

RunConfig RunConfig::resolve(const KeyValues& file_overrides, const KeyValues& flag_overrides) {
    // The preset picks the baseline; later sources override field by field.
    std::string preset = "tiny";
    if (auto it = file_overrides.find("preset"); it != file_overrides.end()) preset = it->second;
    if (auto it = flag_overrides.find("preset"); it != flag_overrides.end()) preset = it->second;

    RunConfig rc;
    rc.preset = preset;
    rc.model = ModelConfig::preset(preset);
    rc.train = TrainConfig{};

    for (const auto& [k, v] : file_overrides) apply_key(rc, k, v);
    for (const auto& [k, v] : flag_overrides) apply_key(rc, k, v);

    if (const char* env_seed = std::getenv("VITRAY_SEED")) {
        rc.train.seed = parse_u64("VITRAY_SEED", env_seed);
    }

    rc.model.validate();
    rc.train.validate();
    if (!(rc.split_ratio > 0.0 && rc.split_ratio < 1.0)) {
        throw ContractError("split_ratio must lie in (0, 1)");
    }
    return rc;
}

std::string RunConfig::resolved_text() const {
    std::map<std::string, std::string> kv;
    kv["preset"] = preset;
    kv["image_size"] = std::to_string(model.image_size);
    kv["patch_size"] = std::to_string(model.patch_size);
    kv["embed_dim"] = std::to_string(model.embed_dim);
    kv["num_layers"] = std::to_string(model.num_layers);
    kv["num_heads"] = std::to_string(model.num_heads);
    kv["ffn_dim"] = std::to_string(model.ffn_dim);
    kv["num_classes"] = std::to_string(model.num_classes);
    kv["in_channels"] = std::to_string(model.in_channels);
    kv["num_patches"] = std::to_string(model.num_patches());
    kv["seq_len"] = std::to_string(model.seq_len());
    kv["head_dim"] = std::to_string(model.head_dim());
    kv["learning_rate"] = fmt_double(train.learning_rate);
    kv["batch_size"] = std::to_string(train.batch_size);
    kv["max_epochs"] = std::to_string(train.max_epochs);
    kv["patience"] = std::to_string(train.patience);
    kv["seed"] = std::to_string(train.seed);
    kv["adam_beta1"] = fmt_double(train.beta1);
    kv["adam_beta2"] = fmt_double(train.beta2);
    kv["adam_eps"] = fmt_double(train.epsilon);
    kv["shuffle_each_epoch"] = train.shuffle_each_epoch ? "1" : "0";
    kv["split_ratio"] = fmt_double(split_ratio);
    kv["standardize"] = standardize ? "1" : "0";
    kv["data_dir"] = data_dir;
    kv["out_dir"] = out_dir;
    std::string out;
    for (const auto& [k, v] : kv) {
        out += k;
        out += '=';
        out += v;
        out += '\n';
    }
    return out;
}

std::filesystem::path RunConfig::write_resolved(const std::filesystem::path& dir) const {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    std::filesystem::path path = dir / "config.resolved";
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write " + path.string());
    os << resolved_text();
    if (!os) throw IoError("write failed: " + path.string());
    return path;
}

RunConfig::KeyValues parse_config_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config file " + path.string());
    RunConfig::KeyValues kv;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw FormatError(path.string() + ":" + std::to_string(line_no) +
                              ": expected key=value");
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": empty key");
        }
        kv[key] = value;
    }
    return kv;
}

} // namespace vitray
