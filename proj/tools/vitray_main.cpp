#include <map>
#include <string>

#include <CLI11.hpp>

#include "vitray/commands.hpp"

namespace {

/// Records the flags the user actually typed, so preset/config-file values
/// survive when a flag is left at its default.
struct OverrideCapture {
    std::map<std::string, std::string> values;

    void add(CLI::App* cmd, const std::string& flag, const std::string& key,
             const std::string& help) {
        auto holder = std::make_shared<std::string>();
        cmd->add_option_function<std::string>(
               flag, [this, key, holder](const std::string& v) { values[key] = v; }, help)
            ->type_name("VALUE");
    }
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"vitray: grayscale chest-radiograph classification with a ViT encoder"};
    app.require_subcommand(1);

    vitray::SynthArgs synth_args;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic PNG dataset");
    synth->add_option("--out", synth_args.out, "Output dataset directory")->required();
    synth->add_option("--per-class", synth_args.per_class, "Images per class");
    synth->add_option("--size", synth_args.size, "Image height and width in pixels");
    synth->add_option("--seed", synth_args.seed, "Generator seed");

    vitray::TrainArgs train_args;
    OverrideCapture train_flags;
    auto* train = app.add_subcommand("train", "Train on a class-directory dataset");
    train->add_option("--data", train_args.data, "Dataset root (Normal/, Abnormal/)")
        ->required();
    train->add_option("--out", train_args.out, "Output directory")->required();
    train->add_option("--config", train_args.config_file, "key=value config file");
    train_flags.add(train, "--preset", "preset", "Model preset (tiny or paper)");
    train_flags.add(train, "--lr", "learning_rate", "Adam learning rate");
    train_flags.add(train, "--batch-size", "batch_size", "Mini-batch size");
    train_flags.add(train, "--epochs", "max_epochs", "Maximum epochs");
    train_flags.add(train, "--patience", "patience", "Early-stopping patience");
    train_flags.add(train, "--seed", "seed", "Master seed");
    train_flags.add(train, "--split", "split_ratio", "Train fraction, e.g. 0.8");
    train_flags.add(train, "--image-size", "image_size", "Input image size");
    train_flags.add(train, "--standardize", "standardize", "Post-normalize standardization (0/1)");
    std::vector<std::string> set_pairs;
    train->add_option("--set", set_pairs, "Extra key=value override (repeatable)");

    vitray::EvalArgs eval_args;
    OverrideCapture eval_flags;
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
    eval->add_option("--data", eval_args.data, "Dataset root")->required();
    eval->add_option("--ckpt", eval_args.ckpt, "Checkpoint file")->required();
    eval->add_option("--out", eval_args.out, "Output directory")->required();
    eval->add_option("--split", eval_args.split, "all, train or test");
    eval->add_option("--expect-preset", eval_args.expected_preset,
                     "Validate the checkpoint against this preset");
    eval_flags.add(eval, "--split-ratio", "split_ratio", "Train fraction used by --split");
    eval_flags.add(eval, "--seed", "seed", "Split seed");
    eval_flags.add(eval, "--standardize", "standardize", "Post-normalize standardization (0/1)");

    vitray::PlotArgs plot_args;
    auto* plot = app.add_subcommand("plot", "Render a CSV artifact as SVG");
    plot->add_option("--log", plot_args.log, "train_log.csv to plot");
    plot->add_option("--roc", plot_args.roc, "roc.csv to plot");
    plot->add_option("--cm", plot_args.cm, "confusion.csv to plot");
    plot->add_option("--out", plot_args.out, "Output .svg path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    for (const std::string& pair : set_pairs) {
        auto eq = pair.find('=');
        if (eq == std::string::npos || eq == 0) {
            std::fprintf(stderr, "error: --set expects key=value, got '%s'\n", pair.c_str());
            return 2;
        }
        train_flags.values[pair.substr(0, eq)] = pair.substr(eq + 1);
    }
    train_args.overrides = train_flags.values;
    eval_args.overrides = eval_flags.values;

    if (synth->parsed()) return vitray::cmd_synth(synth_args);
    if (train->parsed()) return vitray::cmd_train(train_args);
    if (eval->parsed()) return vitray::cmd_eval(eval_args);
    if (plot->parsed()) return vitray::cmd_plot(plot_args);
    return 2;
}
