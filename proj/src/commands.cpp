#include "vitray/commands.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "vitray/checkpoint.hpp"
#include "vitray/dataset.hpp"
#include "vitray/metrics.hpp"
#include "vitray/run_config.hpp"
#include "vitray/svg.hpp"
#include "vitray/trainer.hpp"

namespace vitray {

namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kRuntimeError = 1;
constexpr int kUsageError = 2;

int fail(int code, const std::string& message) {
    std::cerr << "error: " << message << '\n';
    return code;
}

RunConfig resolve_run_config(const std::string& config_file,
                             const std::map<std::string, std::string>& overrides) {
    RunConfig::KeyValues file_kv;
    if (!config_file.empty()) file_kv = parse_config_file(config_file);
    return RunConfig::resolve(file_kv, overrides);
}

void write_text_atomic(const fs::path& path, const std::string& text) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot write " + tmp.string());
        os << text;
        if (!os) throw IoError("write failed: " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move " + tmp.string() + " into place");
}

struct Csv {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

Csv read_csv(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open " + path.string());
    Csv csv;
    std::string line;
    bool first = true;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_fields(line);
        if (first) {
            csv.header = std::move(fields);
            first = false;
        } else {
            csv.rows.push_back(std::move(fields));
        }
    }
    if (first) throw FormatError(path.string() + ": empty file");
    return csv;
}

/// Schema check; names the first offending column.
void expect_header(const Csv& csv, const std::vector<std::string>& expected,
                   const fs::path& path) {
    for (std::size_t i = 0; i < expected.size(); ++i) {
        if (i >= csv.header.size()) {
            throw FormatError(path.string() + ": missing column '" + expected[i] + "'");
        }
        if (csv.header[i] != expected[i]) {
            throw FormatError(path.string() + ": unexpected column '" + csv.header[i] +
                              "' (expected '" + expected[i] + "')");
        }
    }
    if (csv.header.size() > expected.size()) {
        throw FormatError(path.string() + ": unexpected column '" +
                          csv.header[expected.size()] + "'");
    }
}

double field_as_double(const std::vector<std::string>& row, std::size_t col,
                       const std::string& name, const fs::path& path) {
    if (col >= row.size()) {
        throw FormatError(path.string() + ": row is missing column '" + name + "'");
    }
    try {
        std::size_t pos = 0;
        double v = std::stod(row[col], &pos);
        if (pos != row[col].size()) throw std::invalid_argument(row[col]);
        return v;
    } catch (const std::exception&) {
        throw FormatError(path.string() + ": bad value '" + row[col] + "' in column '" +
                          name + "'");
    }
}

std::vector<std::size_t> all_indices(std::size_t n) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    return idx;
}

} // namespace

int cmd_synth(const SynthArgs& args) {
    if (args.out.empty()) return fail(kUsageError, "synth: --out is required");
    if (args.per_class == 0) return fail(kUsageError, "synth: --per-class must be >= 1");
    if (args.size == 0) return fail(kUsageError, "synth: --size must be >= 1");
    try {
        std::size_t n = write_synthetic_directory(args.out, args.per_class, args.size,
                                                  args.seed);
        std::cout << "wrote " << n << " images under " << args.out << '\n';
        return kOk;
    } catch (const Error& e) {
        return fail(kRuntimeError, e.what());
    }
}

int cmd_train(const TrainArgs& args) {
    if (args.data.empty() || args.out.empty()) {
        return fail(kUsageError, "train: --data and --out are required");
    }
    try {
        RunConfig rc = resolve_run_config(args.config_file, args.overrides);
        rc.data_dir = args.data;
        rc.out_dir = args.out;
        rc.write_resolved(args.out);

        LabeledDataset ds = load_directory_dataset(args.data, rc.model.image_size,
                                                   {"Normal", "Abnormal"}, rc.standardize);
        SplitIndices split = split_dataset(ds.size(), rc.split_ratio, rc.train.seed);
        FitResult result = fit(ds, split, rc.model, rc.train, args.out);
        std::printf("best test accuracy %.6f at epoch %zu (%zu epochs run)\n",
                    result.best.best_test_accuracy, result.best.best_epoch,
                    result.history.size());
        return kOk;
    } catch (const ContractError& e) {
        return fail(kUsageError, e.what());
    } catch (const Error& e) {
        return fail(kRuntimeError, e.what());
    }
}

int cmd_eval(const EvalArgs& args) {
    if (args.data.empty() || args.ckpt.empty() || args.out.empty()) {
        return fail(kUsageError, "eval: --data, --ckpt and --out are required");
    }
    if (args.split != "all" && args.split != "train" && args.split != "test") {
        return fail(kUsageError, "eval: --split must be all, train or test");
    }
    try {
        Checkpoint ckpt = args.expected_preset.empty()
                              ? Checkpoint::load(args.ckpt)
                              : Checkpoint::load(args.ckpt,
                                                 ModelConfig::preset(args.expected_preset));
        ViTParams params = ckpt.to_params();

        // Seed / split ratio / standardize come from the usual resolution
        // chain; the model geometry always comes from the checkpoint.
        std::map<std::string, std::string> overrides = args.overrides;
        overrides.erase("preset");
        RunConfig rc = resolve_run_config("", overrides);
        rc.data_dir = args.data;
        rc.out_dir = args.out;
        rc.model = ckpt.config;
        rc.write_resolved(args.out);

        LabeledDataset ds = load_directory_dataset(args.data, ckpt.config.image_size,
                                                   {"Normal", "Abnormal"}, rc.standardize);
        std::vector<std::size_t> indices;
        if (args.split == "all") {
            indices = all_indices(ds.size());
        } else {
            SplitIndices split = split_dataset(ds.size(), rc.split_ratio, rc.train.seed);
            indices = args.split == "train" ? split.train : split.test;
        }
        EvalResult eval = evaluate(params, ds, indices);

        std::vector<int> labels;
        labels.reserve(indices.size());
        for (std::size_t idx : indices) labels.push_back(ds.samples[idx].label);

        ConfusionMatrix cm = confusion(eval.predictions, labels);
        MetricSummary ms = summary(cm);
        RocCurve curve = roc(eval.scores, labels);

        nlohmann::json j{{"accuracy", ms.accuracy}, {"precision", ms.precision},
                         {"recall", ms.recall},     {"f1", ms.f1},
                         {"auc", curve.auc}};
        write_text_atomic(fs::path(args.out) / "metrics.json", j.dump(2) + "\n");
        write_confusion_csv(cm, fs::path(args.out) / "confusion.csv");
        write_roc_csv(curve, fs::path(args.out) / "roc.csv");

        std::printf("n=%zu accuracy=%.4f precision=%.4f recall=%.4f f1=%.4f auc=%.4f\n",
                    indices.size(), ms.accuracy, ms.precision, ms.recall, ms.f1, curve.auc);
        return kOk;
    } catch (const Error& e) {
        return fail(kRuntimeError, e.what());
    }
}

int cmd_plot(const PlotArgs& args) {
    const int sources = (!args.log.empty()) + (!args.roc.empty()) + (!args.cm.empty());
    if (sources != 1 || args.out.empty()) {
        return fail(kUsageError, "plot: exactly one of --log/--roc/--cm plus --out");
    }
    try {
        std::string svg;
        if (!args.log.empty()) {
            Csv csv = read_csv(args.log);
            expect_header(csv, {"epoch", "train_loss", "train_acc", "test_loss", "test_acc"},
                          args.log);
            if (csv.rows.empty()) throw FormatError(std::string(args.log) + ": no data rows");
            std::vector<EpochRecord> records;
            for (const auto& row : csv.rows) {
                EpochRecord r;
                r.epoch = static_cast<std::size_t>(
                    field_as_double(row, 0, "epoch", args.log));
                r.train_loss = field_as_double(row, 1, "train_loss", args.log);
                r.train_accuracy = field_as_double(row, 2, "train_acc", args.log);
                r.test_loss = field_as_double(row, 3, "test_loss", args.log);
                r.test_accuracy = field_as_double(row, 4, "test_acc", args.log);
                records.push_back(r);
            }
            svg = render_training_curves(records);
        } else if (!args.roc.empty()) {
            Csv csv = read_csv(args.roc);
            expect_header(csv, {"threshold", "fpr", "tpr"}, args.roc);
            if (csv.rows.empty()) throw FormatError(std::string(args.roc) + ": no data rows");
            std::vector<RocPoint> points;
            for (const auto& row : csv.rows) {
                RocPoint p;
                p.threshold = field_as_double(row, 0, "threshold", args.roc);
                p.fpr = field_as_double(row, 1, "fpr", args.roc);
                p.tpr = field_as_double(row, 2, "tpr", args.roc);
                points.push_back(p);
            }
            svg = render_roc_svg(points);
        } else {
            Csv csv = read_csv(args.cm);
            expect_header(csv, {"cell", "count", "fraction"}, args.cm);
            if (csv.rows.size() != 4) {
                throw FormatError(std::string(args.cm) + ": expected 4 data rows");
            }
            ConfusionMatrix cm;
            for (const auto& row : csv.rows) {
                auto count = static_cast<std::size_t>(
                    field_as_double(row, 1, "count", args.cm));
                if (row[0] == "tn") cm.tn = count;
                else if (row[0] == "fp") cm.fp = count;
                else if (row[0] == "fn") cm.fn = count;
                else if (row[0] == "tp") cm.tp = count;
                else throw FormatError(std::string(args.cm) + ": unknown cell '" + row[0] + "'");
            }
            svg = render_confusion_svg(cm);
        }
        write_text_atomic(args.out, svg);
        return kOk;
    } catch (const FormatError& e) {
        return fail(kUsageError, e.what());
    } catch (const ContractError& e) {
        return fail(kUsageError, e.what());
    } catch (const Error& e) {
        return fail(kRuntimeError, e.what());
    }
}

} // namespace vitray
