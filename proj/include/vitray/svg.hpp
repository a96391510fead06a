#pragma once

#include <string>
#include <vector>

#include "vitray/metrics.hpp"
#include "vitray/trainer.hpp"

namespace vitray {

// Static 800 x 600 SVG plots. All coordinates go through fixed two-decimal
// formatting, so identical inputs render byte-identical files.

inline constexpr double kSvgWidth = 800.0;
inline constexpr double kSvgHeight = 600.0;

/// Maps data coordinates into a pixel box (py0 is the box top; y grows
/// downward in SVG).
struct SvgMapper {
    double x_min, x_max, y_min, y_max;
    double px0, py0, pw, ph;

    double map_x(double x) const { return px0 + (x - x_min) / (x_max - x_min) * pw; }
    double map_y(double y) const { return py0 + ph - (y - y_min) / (y_max - y_min) * ph; }
};

/// The fixed mapper render_roc_svg draws with (unit square into the canvas).
SvgMapper roc_mapper();

/// Two panels (accuracy, loss), each with a train and a test polyline.
std::string render_training_curves(const std::vector<EpochRecord>& records);

/// ROC curve polyline over a dashed chance diagonal.
std::string render_roc_svg(const std::vector<RocPoint>& points);

/// 2 x 2 heatmap with counts and row-normalized fractions.
std::string render_confusion_svg(const ConfusionMatrix& cm);

} // namespace vitray
