#include "vitray/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace vitray {

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

void header(std::string& s) {
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"600\" "
         "viewBox=\"0 0 800 600\">\n";
    s += "<rect x=\"0\" y=\"0\" width=\"800\" height=\"600\" fill=\"#ffffff\"/>\n";
}

void frame(std::string& s, const SvgMapper& m) {
    s += "<rect x=\"" + num(m.px0) + "\" y=\"" + num(m.py0) + "\" width=\"" + num(m.pw) +
         "\" height=\"" + num(m.ph) +
         "\" fill=\"none\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
}

void text(std::string& s, double x, double y, const std::string& t,
          const char* anchor = "middle", int size = 14) {
    s += "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-family=\"sans-serif\" " +
         "font-size=\"" + std::to_string(size) + "\" text-anchor=\"" + anchor + "\">" + t +
         "</text>\n";
}

void polyline(std::string& s, const std::vector<std::pair<double, double>>& px,
              const char* color) {
    s += "<polyline fill=\"none\" stroke=\"";
    s += color;
    s += "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < px.size(); ++i) {
        if (i) s += ' ';
        s += num(px[i].first) + "," + num(px[i].second);
    }
    s += "\"/>\n";
}

void axis_ticks(std::string& s, const SvgMapper& m, int n_ticks, const char* x_fmt,
                const char* y_fmt) {
    char buf[32];
    for (int i = 0; i <= n_ticks; ++i) {
        double fx = m.x_min + (m.x_max - m.x_min) * i / n_ticks;
        double fy = m.y_min + (m.y_max - m.y_min) * i / n_ticks;
        std::snprintf(buf, sizeof(buf), x_fmt, fx);
        text(s, m.map_x(fx), m.py0 + m.ph + 18.0, buf, "middle", 11);
        std::snprintf(buf, sizeof(buf), y_fmt, fy);
        text(s, m.px0 - 6.0, m.map_y(fy) + 4.0, buf, "end", 11);
    }
}

void legend(std::string& s, double x, double y, const char* color, const std::string& name) {
    s += "<line x1=\"" + num(x) + "\" y1=\"" + num(y) + "\" x2=\"" + num(x + 24.0) +
         "\" y2=\"" + num(y) + "\" stroke=\"" + color + "\" stroke-width=\"1.5\"/>\n";
    text(s, x + 30.0, y + 4.0, name, "start", 12);
}

constexpr const char* kTrainColor = "#1f77b4";
constexpr const char* kTestColor = "#d62728";

} // namespace

SvgMapper roc_mapper() {
    return SvgMapper{0.0, 1.0, 0.0, 1.0, 90.0, 60.0, 650.0, 460.0};
}

std::string render_training_curves(const std::vector<EpochRecord>& records) {
    if (records.empty()) throw ContractError("render_training_curves: no records");
    const double max_epoch = static_cast<double>(records.back().epoch);
    double max_loss = 0.0;
    for (const auto& r : records) max_loss = std::max({max_loss, r.train_loss, r.test_loss});
    if (max_loss <= 0.0) max_loss = 1.0;

    SvgMapper acc{1.0, std::max(max_epoch, 2.0), 0.0, 1.0, 70.0, 60.0, 300.0, 440.0};
    SvgMapper loss{1.0, std::max(max_epoch, 2.0), 0.0, max_loss, 460.0, 60.0, 300.0, 440.0};

    std::string s;
    header(s);
    for (int panel = 0; panel < 2; ++panel) {
        const SvgMapper& m = panel == 0 ? acc : loss;
        frame(s, m);
        text(s, m.px0 + m.pw / 2.0, 40.0, panel == 0 ? "Accuracy" : "Loss", "middle", 16);
        text(s, m.px0 + m.pw / 2.0, m.py0 + m.ph + 38.0, "epoch", "middle", 12);
        axis_ticks(s, m, 4, "%.0f", panel == 0 ? "%.2f" : "%.3f");
        std::vector<std::pair<double, double>> train_px, test_px;
        for (const auto& r : records) {
            double e = static_cast<double>(r.epoch);
            train_px.emplace_back(m.map_x(e),
                                  m.map_y(panel == 0 ? r.train_accuracy : r.train_loss));
            test_px.emplace_back(m.map_x(e),
                                 m.map_y(panel == 0 ? r.test_accuracy : r.test_loss));
        }
        polyline(s, train_px, kTrainColor);
        polyline(s, test_px, kTestColor);
        legend(s, m.px0 + 10.0, 555.0, kTrainColor, "train");
        legend(s, m.px0 + 110.0, 555.0, kTestColor, "test");
    }
    s += "</svg>\n";
    return s;
}

std::string render_roc_svg(const std::vector<RocPoint>& points) {
    if (points.empty()) throw ContractError("render_roc_svg: no points");
    SvgMapper m = roc_mapper();
    std::string s;
    header(s);
    frame(s, m);
    text(s, m.px0 + m.pw / 2.0, 40.0, "ROC", "middle", 16);
    text(s, m.px0 + m.pw / 2.0, m.py0 + m.ph + 38.0, "false positive rate", "middle", 12);
    text(s, 24.0, m.py0 + m.ph / 2.0, "TPR", "start", 12);
    axis_ticks(s, m, 4, "%.2f", "%.2f");
    // Chance diagonal.
    s += "<line x1=\"" + num(m.map_x(0.0)) + "\" y1=\"" + num(m.map_y(0.0)) + "\" x2=\"" +
         num(m.map_x(1.0)) + "\" y2=\"" + num(m.map_y(1.0)) +
         "\" stroke=\"#999999\" stroke-width=\"1\" stroke-dasharray=\"6,4\"/>\n";
    std::vector<std::pair<double, double>> px;
    for (const RocPoint& p : points) px.emplace_back(m.map_x(p.fpr), m.map_y(p.tpr));
    polyline(s, px, kTestColor);
    s += "</svg>\n";
    return s;
}

std::string render_confusion_svg(const ConfusionMatrix& cm) {
    if (cm.total() == 0) throw ContractError("render_confusion_svg: empty matrix");
    std::string s;
    header(s);
    text(s, 400.0, 40.0, "Confusion matrix", "middle", 16);
    const double total = static_cast<double>(cm.total());
    const double x0 = 220.0, y0 = 120.0, cell = 180.0;
    struct Cell {
        std::size_t count;
        int row, col;
    };
    // rows: actual negative / positive; cols: predicted negative / positive
    const Cell cells[4] = {{cm.tn, 0, 0}, {cm.fp, 0, 1}, {cm.fn, 1, 0}, {cm.tp, 1, 1}};
    for (const Cell& c : cells) {
        double frac = static_cast<double>(c.count) / total;
        int shade = static_cast<int>(255.0 - 155.0 * frac);
        char color[16];
        std::snprintf(color, sizeof(color), "#%02x%02xff", shade, shade);
        double cx = x0 + c.col * cell, cy = y0 + c.row * cell;
        s += "<rect x=\"" + num(cx) + "\" y=\"" + num(cy) + "\" width=\"" + num(cell) +
             "\" height=\"" + num(cell) + "\" fill=\"" + color +
             "\" stroke=\"#333333\"/>\n";
        char label[64];
        std::snprintf(label, sizeof(label), "%zu", c.count);
        text(s, cx + cell / 2.0, cy + cell / 2.0 - 6.0, label, "middle", 20);
        std::snprintf(label, sizeof(label), "%.4f", frac);
        text(s, cx + cell / 2.0, cy + cell / 2.0 + 18.0, label, "middle", 13);
    }
    text(s, x0 + cell, y0 - 16.0, "predicted (neg | pos)", "middle", 12);
    text(s, x0 - 16.0, y0 + cell, "actual (neg / pos)", "end", 12);
    s += "</svg>\n";
    return s;
}

} // namespace vitray
