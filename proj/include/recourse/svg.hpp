#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

namespace recourse::svg {

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

inline std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        case '"': out += "&quot;"; break;
        default: out.push_back(c);
        }
    }
    return out;
}

// Fixed palette so output is reproducible.
inline const char* color(std::size_t i) {
    static constexpr const char* palette[] = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a",
                                              "#66a61e", "#e6ab02", "#a6761d", "#666666"};
    return palette[i % 8];
}

class Canvas {
public:
    Canvas(double width, double height) : w_(width), h_(height) {}

    void rect(double x, double y, double w, double h, const std::string& fill, const std::string& stroke = "none") {
        body_ += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(w) + "\" height=\"" + num(h) +
                 "\" fill=\"" + fill + "\" stroke=\"" + stroke + "\"/>\n";
    }
    void line(double x1, double y1, double x2, double y2, const std::string& stroke, double width = 1.0) {
        body_ += "<line x1=\"" + num(x1) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x2) + "\" y2=\"" + num(y2) +
                 "\" stroke=\"" + stroke + "\" stroke-width=\"" + num(width) + "\"/>\n";
    }
    void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke, double width = 1.0) {
        body_ += "<polyline fill=\"none\" stroke=\"" + stroke + "\" stroke-width=\"" + num(width) + "\" points=\"";
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (i) body_ += ' ';
            body_ += num(pts[i].first) + "," + num(pts[i].second);
        }
        body_ += "\"/>\n";
    }
    void circle(double cx, double cy, double r, const std::string& fill) {
        body_ += "<circle cx=\"" + num(cx) + "\" cy=\"" + num(cy) + "\" r=\"" + num(r) + "\" fill=\"" + fill + "\"/>\n";
    }
    void text(double x, double y, const std::string& s, double size = 11.0, const std::string& anchor = "start") {
        body_ += "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-size=\"" + num(size) +
                 "\" font-family=\"sans-serif\" text-anchor=\"" + anchor + "\">" + escape(s) + "</text>\n";
    }

    [[nodiscard]] std::string str() const {
        return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(w_) + "\" height=\"" + num(h_) +
               "\" viewBox=\"0 0 " + num(w_) + " " + num(h_) + "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n" +
               body_ + "</svg>\n";
    }

private:
    double w_, h_;
    std::string body_;
};

struct Series {
    std::string name;
    std::vector<std::pair<double, double>> points;
};

// Plot area with linear axes; maps data coordinates into the canvas.
class Axes {
public:
    Axes(double x0, double x1, double y0, double y1, double width = 640, double height = 400)
        : canvas_(width, height), x0_(x0), x1_(x1 > x0 ? x1 : x0 + 1), y0_(y0), y1_(y1 > y0 ? y1 : y0 + 1),
          w_(width), h_(height) {
        canvas_.line(left, h_ - bottom, w_ - right, h_ - bottom, "black");
        canvas_.line(left, top, left, h_ - bottom, "black");
        canvas_.text(left - 4, h_ - bottom, num(y0_), 9, "end");
        canvas_.text(left - 4, top + 4, num(y1_), 9, "end");
        canvas_.text(left, h_ - bottom + 14, num(x0_), 9, "middle");
        canvas_.text(w_ - right, h_ - bottom + 14, num(x1_), 9, "middle");
    }

    [[nodiscard]] double px(double x) const { return left + (x - x0_) / (x1_ - x0_) * (w_ - left - right); }
    [[nodiscard]] double py(double y) const { return h_ - bottom - (y - y0_) / (y1_ - y0_) * (h_ - top - bottom); }

    void labels(const std::string& title, const std::string& xlabel, const std::string& ylabel) {
        canvas_.text(w_ / 2, 18, title, 13, "middle");
        canvas_.text(w_ / 2, h_ - 8, xlabel, 11, "middle");
        canvas_.text(12, h_ / 2, ylabel, 11, "start");
    }

    void legend(const std::vector<std::string>& names) {
        for (std::size_t i = 0; i < names.size(); ++i) {
            double y = top + 12.0 * static_cast<double>(i);
            canvas_.rect(w_ - right + 6, y - 8, 8, 8, color(i));
            canvas_.text(w_ - right + 18, y, names[i], 9);
        }
    }

    Canvas& canvas() { return canvas_; }
    [[nodiscard]] std::string str() const { return canvas_.str(); }

    static constexpr double left = 60, right = 120, top = 30, bottom = 40;

private:
    Canvas canvas_;
    double x0_, x1_, y0_, y1_, w_, h_;
};

inline std::pair<double, double> extent(const std::vector<Series>& series, bool use_x) {
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& s : series)
        for (const auto& [x, y] : s.points) {
            double v = use_x ? x : y;
            if (!std::isfinite(v)) continue;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    if (lo > hi) return {0.0, 1.0};
    return {lo, hi};
}

inline std::string line_chart(const std::vector<Series>& series, const std::string& title, const std::string& xlabel,
                              const std::string& ylabel) {
    auto [x0, x1] = extent(series, true);
    auto [y0, y1] = extent(series, false);
    Axes ax(x0, x1, y0, y1);
    ax.labels(title, xlabel, ylabel);
    std::vector<std::string> names;
    for (std::size_t i = 0; i < series.size(); ++i) {
        std::vector<std::pair<double, double>> pts;
        for (const auto& [x, y] : series[i].points)
            if (std::isfinite(x) && std::isfinite(y)) pts.emplace_back(ax.px(x), ax.py(y));
        ax.canvas().polyline(pts, color(i), 1.5);
        names.push_back(series[i].name);
    }
    ax.legend(names);
    return ax.str();
}

inline std::string scatter_chart(const std::vector<Series>& series, const std::string& title,
                                 const std::string& xlabel, const std::string& ylabel) {
    auto [x0, x1] = extent(series, true);
    auto [y0, y1] = extent(series, false);
    Axes ax(x0, x1, y0, y1);
    ax.labels(title, xlabel, ylabel);
    std::vector<std::string> names;
    for (std::size_t i = 0; i < series.size(); ++i) {
        for (const auto& [x, y] : series[i].points)
            if (std::isfinite(x) && std::isfinite(y)) ax.canvas().circle(ax.px(x), ax.py(y), 2.5, color(i));
        names.push_back(series[i].name);
    }
    ax.legend(names);
    return ax.str();
}

// Vertical bars, one per label.
inline std::string bar_chart(const std::vector<std::pair<std::string, double>>& bars, const std::string& title,
                             const std::string& ylabel) {
    double hi = 0.0;
    for (const auto& b : bars) hi = std::max(hi, b.second);
    Axes ax(0.0, static_cast<double>(std::max<std::size_t>(bars.size(), 1)), 0.0, hi > 0 ? hi : 1.0);
    ax.labels(title, "", ylabel);
    for (std::size_t i = 0; i < bars.size(); ++i) {
        double x = ax.px(static_cast<double>(i) + 0.15), x2 = ax.px(static_cast<double>(i) + 0.85);
        double y = ax.py(bars[i].second), y0 = ax.py(0.0);
        ax.canvas().rect(x, y, x2 - x, y0 - y, color(i));
        ax.canvas().text((x + x2) / 2, y0 + 26, bars[i].first, 9, "middle");
    }
    return ax.str();
}

} // namespace recourse::svg
