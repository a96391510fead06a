#pragma once

#include <map>
#include <string>

namespace vitray {

// CLI entry points, callable directly from tests. Exit codes: 0 success,
// 1 runtime failure, 2 usage or input-validation failure.

struct SynthArgs {
    std::string out;
    std::size_t per_class = 32;
    std::size_t size = 32;
    std::uint64_t seed = 42;
};
int cmd_synth(const SynthArgs& args);

struct TrainArgs {
    std::string data;
    std::string out;
    std::string config_file;                        ///< optional key=value file
    std::map<std::string, std::string> overrides;   ///< flag-level keys (incl. preset)
};
int cmd_train(const TrainArgs& args);

struct EvalArgs {
    std::string data;
    std::string ckpt;
    std::string out;
    std::string split = "all"; ///< all | train | test
    std::string expected_preset; ///< optional: validate checkpoint against this preset
    std::map<std::string, std::string> overrides;
};
int cmd_eval(const EvalArgs& args);

struct PlotArgs {
    std::string log;
    std::string roc;
    std::string cm;
    std::string out;
};
int cmd_plot(const PlotArgs& args);

} // namespace vitray
