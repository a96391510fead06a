#pragma once

#include <filesystem>
#include <vector>

#include "vitray/error.hpp"

namespace vitray {

struct ConfusionMatrix {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;
    int positive_class = 1;

    std::size_t total() const { return tp + fp + fn + tn; }
};

ConfusionMatrix confusion(const std::vector<int>& preds, const std::vector<int>& labels,
                          int positive_class = 1);

/// Derived rates. A 0/0 ratio is reported as 0 with the matching degenerate
/// flag set rather than thrown.
struct MetricSummary {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool degenerate_precision = false;
    bool degenerate_recall = false;
    bool degenerate_f1 = false;
};

MetricSummary summary(const ConfusionMatrix& cm);

struct RocPoint {
    double threshold = 0.0;
    double fpr = 0.0;
    double tpr = 0.0;
};

struct RocCurve {
    std::vector<RocPoint> points; ///< starts at (0,0), ends at (1,1), fpr non-decreasing
    double auc = 0.0;
};

/// ROC over positive-class scores. Thresholds are the unique scores in
/// descending order plus a sentinel above the maximum; tied scores move in
/// one step, which makes the trapezoidal AUC equal the Mann-Whitney
/// statistic exactly. Scores must lie in [0, 1]; both classes must appear.
RocCurve roc(const std::vector<double>& scores, const std::vector<int>& labels,
             int positive_class = 1);

/// Independent AUC oracle: over all (positive, negative) pairs, count 1 for
/// a win, 0.5 for a tie, divided by n_pos * n_neg.
double auc_pairwise_oracle(const std::vector<double>& scores, const std::vector<int>& labels,
                           int positive_class = 1);

/// `threshold,fpr,tpr` rows, six decimal places.
void write_roc_csv(const RocCurve& curve, const std::filesystem::path& path);

/// `cell,count,fraction` rows for tn, fp, fn, tp.
void write_confusion_csv(const ConfusionMatrix& cm, const std::filesystem::path& path);

} // namespace vitray
