#include "vitray/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <string>

namespace vitray {

ConfusionMatrix confusion(const std::vector<int>& preds, const std::vector<int>& labels,
                          int positive_class) {
    if (preds.size() != labels.size()) {
        throw ContractError("confusion: " + std::to_string(preds.size()) +
                            " predictions vs " + std::to_string(labels.size()) + " labels");
    }
    if (preds.empty()) throw ContractError("confusion: empty input");
    ConfusionMatrix cm;
    cm.positive_class = positive_class;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const bool pred_pos = preds[i] == positive_class;
        const bool label_pos = labels[i] == positive_class;
        if (pred_pos && label_pos) ++cm.tp;
        else if (pred_pos && !label_pos) ++cm.fp;
        else if (!pred_pos && label_pos) ++cm.fn;
        else ++cm.tn;
    }
    return cm;
}

MetricSummary summary(const ConfusionMatrix& cm) {
    if (cm.total() == 0) throw ContractError("summary: empty confusion matrix");
    MetricSummary s;
    s.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
    if (cm.tp + cm.fp == 0) {
        s.degenerate_precision = true;
    } else {
        s.precision = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp);
    }
    if (cm.tp + cm.fn == 0) {
        s.degenerate_recall = true;
    } else {
        s.recall = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
    }
    if (s.precision + s.recall == 0.0) {
        s.degenerate_f1 = true;
    } else {
        s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
    }
    return s;
}

RocCurve roc(const std::vector<double>& scores, const std::vector<int>& labels,
             int positive_class) {
    if (scores.size() != labels.size()) {
        throw ContractError("roc: " + std::to_string(scores.size()) + " scores vs " +
                            std::to_string(labels.size()) + " labels");
    }
    if (scores.empty()) throw ContractError("roc: empty input");
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!(scores[i] >= 0.0 && scores[i] <= 1.0)) {
            throw ContractError("roc: score " + std::to_string(scores[i]) +
                                " outside [0, 1]");
        }
        if (labels[i] == positive_class) ++n_pos;
    }
    const std::size_t n_neg = scores.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) {
        throw UndefinedMetricError("roc: both classes must be present");
    }

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] > scores[b];
    });

    RocCurve curve;
    const double max_score = scores[order.front()];
    curve.points.push_back({max_score + 1.0, 0.0, 0.0});

    std::size_t tp = 0, fp = 0;
    std::size_t at = 0;
    double auc = 0.0;
    while (at < order.size()) {
        // All samples tied at this score move in a single step.
        const double threshold = scores[order[at]];
        std::size_t end = at;
        while (end < order.size() && scores[order[end]] == threshold) ++end;
        for (std::size_t i = at; i < end; ++i) {
            if (labels[order[i]] == positive_class) ++tp;
            else ++fp;
        }
        at = end;
        double fpr = static_cast<double>(fp) / static_cast<double>(n_neg);
        double tpr = static_cast<double>(tp) / static_cast<double>(n_pos);
        const RocPoint& prev = curve.points.back();
        auc += (fpr - prev.fpr) * (tpr + prev.tpr) * 0.5;
        curve.points.push_back({threshold, fpr, tpr});
    }
    curve.auc = auc;
    return curve;
}

double auc_pairwise_oracle(const std::vector<double>& scores, const std::vector<int>& labels,
                           int positive_class) {
    if (scores.size() != labels.size() || scores.empty()) {
        throw ContractError("auc_pairwise_oracle: bad input lengths");
    }
    std::vector<double> pos;
    std::vector<double> neg;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] == positive_class) pos.push_back(scores[i]);
        else neg.push_back(scores[i]);
    }
    if (pos.empty() || neg.empty()) {
        throw UndefinedMetricError("auc_pairwise_oracle: both classes must be present");
    }
    double wins = 0.0;
    for (double p : pos) {
        for (double q : neg) {
            if (p > q) wins += 1.0;
            else if (p == q) wins += 0.5;
        }
    }
    return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

void write_roc_csv(const RocCurve& curve, const std::filesystem::path& path) {
    std::FILE* f = std::fopen(path.string().c_str(), "wb");
    if (!f) throw IoError("cannot write " + path.string());
    std::fputs("threshold,fpr,tpr\n", f);
    for (const RocPoint& p : curve.points) {
        std::fprintf(f, "%.6f,%.6f,%.6f\n", p.threshold, p.fpr, p.tpr);
    }
    if (std::fclose(f) != 0) throw IoError("write failed: " + path.string());
}

void write_confusion_csv(const ConfusionMatrix& cm, const std::filesystem::path& path) {
    std::FILE* f = std::fopen(path.string().c_str(), "wb");
    if (!f) throw IoError("cannot write " + path.string());
    const double total = static_cast<double>(cm.total());
    std::fputs("cell,count,fraction\n", f);
    std::fprintf(f, "tn,%zu,%.6f\n", cm.tn, static_cast<double>(cm.tn) / total);
    std::fprintf(f, "fp,%zu,%.6f\n", cm.fp, static_cast<double>(cm.fp) / total);
    std::fprintf(f, "fn,%zu,%.6f\n", cm.fn, static_cast<double>(cm.fn) / total);
    std::fprintf(f, "tp,%zu,%.6f\n", cm.tp, static_cast<double>(cm.tp) / total);
    if (std::fclose(f) != 0) throw IoError("write failed: " + path.string());
}

} // namespace vitray
