#include "vitray/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace vitray {

namespace {

constexpr char kMagic[4] = {'R', 'V', 'X', 'R'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

template <typename T>
void write_raw(std::ostream& os, const T& value) {
    os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_raw(std::istream& is, const char* what) {
    T value{};
    if (!is.read(reinterpret_cast<char*>(&value), sizeof(T))) {
        throw FormatError(std::string("truncated checkpoint while reading ") + what);
    }
    return value;
}

nlohmann::json config_to_json(const ModelConfig& c) {
    return nlohmann::json{
        {"image_size", c.image_size},   {"patch_size", c.patch_size},
        {"embed_dim", c.embed_dim},     {"num_layers", c.num_layers},
        {"num_heads", c.num_heads},     {"ffn_dim", c.ffn_dim},
        {"num_classes", c.num_classes}, {"in_channels", c.in_channels},
    };
}

ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.image_size = j.at("image_size").get<std::size_t>();
    c.patch_size = j.at("patch_size").get<std::size_t>();
    c.embed_dim = j.at("embed_dim").get<std::size_t>();
    c.num_layers = j.at("num_layers").get<std::size_t>();
    c.num_heads = j.at("num_heads").get<std::size_t>();
    c.ffn_dim = j.at("ffn_dim").get<std::size_t>();
    c.num_classes = j.at("num_classes").get<std::size_t>();
    c.in_channels = j.at("in_channels").get<std::size_t>();
    return c;
}

void validate_tensor_list(const std::vector<Checkpoint::NamedTensor>& tensors,
                          const ModelConfig& config, const char* context) {
    auto expected = parameter_shapes(config);
    if (tensors.size() != expected.size()) {
        throw FormatError(std::string(context) + ": expected " +
                          std::to_string(expected.size()) + " tensors, found " +
                          std::to_string(tensors.size()));
    }
    for (std::size_t i = 0; i < expected.size(); ++i) {
        if (tensors[i].name != expected[i].first) {
            throw FormatError(std::string(context) + ": tensor " + std::to_string(i) +
                              " is '" + tensors[i].name + "', expected '" +
                              expected[i].first + "'");
        }
        if (tensors[i].shape != expected[i].second) {
            throw FormatError(std::string(context) + ": tensor '" + tensors[i].name +
                              "' has shape " + shape_str(tensors[i].shape) +
                              ", expected " + shape_str(expected[i].second));
        }
    }
}

} // namespace

Checkpoint Checkpoint::from_params(const ViTParams& params, double best_test_accuracy,
                                   std::size_t best_epoch) {
    Checkpoint ckpt;
    ckpt.config = params.config;
    ckpt.best_test_accuracy = best_test_accuracy;
    ckpt.best_epoch = best_epoch;
    ckpt.tensors.reserve(params.named.size());
    for (const auto& [name, t] : params.named) {
        ckpt.tensors.push_back({name, t.shape(), t.values()});
    }
    return ckpt;
}

ViTParams Checkpoint::to_params() const {
    validate_tensor_list(tensors, config, "checkpoint");
    ViTParams params;
    params.config = config;
    params.named.reserve(tensors.size());
    for (const auto& t : tensors) {
        params.named.emplace_back(t.name, Tensor::from_data(t.shape, t.data, true));
    }
    params.rebuild_index();
    return params;
}

void Checkpoint::save(const std::filesystem::path& path) const {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot write " + tmp.string());

        os.write(kMagic, sizeof(kMagic));
        write_raw(os, kVersion);

        nlohmann::json meta;
        meta["model"] = config_to_json(config);
        meta["best_test_accuracy"] = best_test_accuracy;
        meta["best_epoch"] = best_epoch;
        const std::string json = meta.dump();
        write_raw(os, static_cast<std::uint32_t>(json.size()));
        os.write(json.data(), static_cast<std::streamsize>(json.size()));

        for (const auto& t : tensors) {
            write_raw(os, static_cast<std::uint32_t>(t.name.size()));
            os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
            write_raw(os, static_cast<std::uint32_t>(t.shape.size()));
            for (std::size_t d : t.shape) write_raw(os, static_cast<std::uint64_t>(d));
            os.write(reinterpret_cast<const char*>(t.data.data()),
                     static_cast<std::streamsize>(t.data.size() * sizeof(double)));
        }
        if (!os) throw IoError("write failed: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IoError("cannot move checkpoint into place at " + path.string());
    }
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint " + path.string());

    char magic[4] = {};
    if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw FormatError("bad magic in checkpoint " + path.string());
    }
    const auto version = read_raw<std::uint32_t>(is, "version");
    if (version != kVersion) {
        throw FormatError("unsupported checkpoint version " + std::to_string(version));
    }

    const auto json_len = read_raw<std::uint32_t>(is, "config length");
    std::string json(json_len, '\0');
    if (!is.read(json.data(), json_len)) {
        throw FormatError("truncated checkpoint while reading config");
    }
    Checkpoint ckpt;
    try {
        nlohmann::json meta = nlohmann::json::parse(json);
        ckpt.config = config_from_json(meta.at("model"));
        ckpt.best_test_accuracy = meta.at("best_test_accuracy").get<double>();
        ckpt.best_epoch = meta.at("best_epoch").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("bad checkpoint config JSON: " + std::string(e.what()));
    }

    for (;;) {
        std::uint32_t name_len = 0;
        if (!is.read(reinterpret_cast<char*>(&name_len), sizeof(name_len))) {
            break; // clean end of file at a record boundary
        }
        NamedTensor t;
        t.name.resize(name_len);
        if (!is.read(t.name.data(), name_len)) {
            throw FormatError("truncated checkpoint while reading tensor name");
        }
        const auto rank = read_raw<std::uint32_t>(is, "tensor rank");
        t.shape.resize(rank);
        std::size_t count = 1;
        for (std::uint32_t i = 0; i < rank; ++i) {
            t.shape[i] = static_cast<std::size_t>(read_raw<std::uint64_t>(is, "tensor dims"));
            count *= t.shape[i];
        }
        t.data.resize(count);
        if (!is.read(reinterpret_cast<char*>(t.data.data()),
                     static_cast<std::streamsize>(count * sizeof(double)))) {
            throw FormatError("truncated checkpoint while reading tensor '" + t.name + "'");
        }
        ckpt.tensors.push_back(std::move(t));
    }

    validate_tensor_list(ckpt.tensors, ckpt.config, "checkpoint");
    return ckpt;
}

Checkpoint Checkpoint::load(const std::filesystem::path& path, const ModelConfig& expected) {
    Checkpoint ckpt = load(path);
    if (ckpt.config != expected) {
        auto want = parameter_shapes(expected);
        for (std::size_t i = 0; i < want.size() && i < ckpt.tensors.size(); ++i) {
            if (ckpt.tensors[i].name != want[i].first ||
                ckpt.tensors[i].shape != want[i].second) {
                throw FormatError("checkpoint does not match requested config: tensor '" +
                                  want[i].first + "' expected " +
                                  shape_str(want[i].second) + ", found '" +
                                  ckpt.tensors[i].name + "' " +
                                  shape_str(ckpt.tensors[i].shape));
            }
        }
        throw FormatError("checkpoint config does not match requested config");
    }
    return ckpt;
}

} // namespace vitray
