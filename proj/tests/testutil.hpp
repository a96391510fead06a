#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "vitray/rng.hpp"
#include "vitray/tensor.hpp"

namespace testutil {

/// Relative error with the usual floor on the denominator.
inline double rel_err(double analytic, double numeric) {
    double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
    return std::fabs(analytic - numeric) / denom;
}

inline vitray::Tensor random_tensor(vitray::Shape shape, vitray::SplitMix64& rng,
                                    bool requires_grad = false, double lo = -2.0,
                                    double hi = 2.0) {
    std::vector<double> data(vitray::shape_size(shape));
    for (double& v : data) v = lo + (hi - lo) * rng.next_double();
    return vitray::Tensor::from_data(std::move(shape), std::move(data), requires_grad);
}

/// Scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("vitray_" + tag + "_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

inline std::size_t count_substr(const std::string& haystack, const std::string& needle) {
    std::size_t count = 0;
    for (std::size_t at = haystack.find(needle); at != std::string::npos;
         at = haystack.find(needle, at + needle.size())) {
        ++count;
    }
    return count;
}

/// Reference early-stopping trace: feeds a full accuracy sequence through
/// the counter logic and reports (epochs actually run, best epoch).
inline std::pair<std::size_t, std::size_t> reference_early_stop(
    const std::vector<double>& accuracies, std::size_t patience) {
    double best = -1.0;
    std::size_t best_epoch = 0, counter = 0, ran = 0;
    for (std::size_t e = 1; e <= accuracies.size(); ++e) {
        ran = e;
        if (accuracies[e - 1] > best) {
            best = accuracies[e - 1];
            best_epoch = e;
            counter = 0;
        } else {
            ++counter;
        }
        if (counter >= patience) break;
    }
    return {ran, best_epoch};
}

} // namespace testutil
