#include <algorithm>
#include <cmath>

#include "xmodal/error.hpp"
#include "xmodal/eval.hpp"
#include "xmodal/image_io.hpp"

namespace xmodal {

namespace {

void put_pixel(Image& img, int x, int y, uint8_t r, uint8_t g, uint8_t b) {
    if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
    img.at(y, x, 0) = r;
    img.at(y, x, 1) = g;
    img.at(y, x, 2) = b;
}

void draw_line(Image& img, double x0, double y0, double x1, double y1, uint8_t r, uint8_t g, uint8_t b) {
    const double steps = std::max({std::fabs(x1 - x0), std::fabs(y1 - y0), 1.0});
    const int n = static_cast<int>(std::ceil(steps)) * 2;
    for (int i = 0; i <= n; ++i) {
        const double t = static_cast<double>(i) / n;
        const int x = static_cast<int>(std::lround(x0 + t * (x1 - x0)));
        const int y = static_cast<int>(std::lround(y0 + t * (y1 - y0)));
        put_pixel(img, x, y, r, g, b);
        put_pixel(img, x + 1, y, r, g, b);  // thicken for visibility
    }
}

constexpr uint8_t kPalette[4][3] = {{31, 119, 180}, {214, 39, 40}, {44, 160, 44}, {255, 127, 14}};

}  // namespace

void render_line_plot(const std::string& path, const std::vector<double>& xs,
                      const std::vector<std::vector<double>>& series, double y_min, double y_max, int width,
                      int height) {
    if (xs.empty() || series.empty()) throw ValueError("render_line_plot: nothing to draw");
    for (const auto& s : series)
        if (s.size() != xs.size()) throw ValueError("render_line_plot: series length mismatch");
    if (!(y_max > y_min)) throw ValueError("render_line_plot: empty value range");

    Image img;
    img.width = width;
    img.height = height;
    img.rgb.assign(static_cast<size_t>(width) * height * 3, 255);

    const int ml = 45, mr = 15, mt = 15, mb = 35;
    const double x_min = xs.front();
    const double x_max = std::max(xs.back(), x_min + 1e-12);
    auto px = [&](double x) { return ml + (x - x_min) / (x_max - x_min) * (width - ml - mr); };
    auto py = [&](double y) {
        const double c = std::clamp(y, y_min, y_max);
        return (height - mb) - (c - y_min) / (y_max - y_min) * (height - mt - mb);
    };

    // axes and horizontal gridlines at quarter intervals
    draw_line(img, ml, mt, ml, height - mb, 0, 0, 0);
    draw_line(img, ml, height - mb, width - mr, height - mb, 0, 0, 0);
    for (int k = 1; k <= 4; ++k) {
        const double y = py(y_min + k * (y_max - y_min) / 4.0);
        draw_line(img, ml, y, width - mr, y, 220, 220, 220);
    }

    for (size_t si = 0; si < series.size(); ++si) {
        const auto* c = kPalette[si % 4];
        for (size_t i = 0; i + 1 < xs.size(); ++i)
            draw_line(img, px(xs[i]), py(series[si][i]), px(xs[i + 1]), py(series[si][i + 1]), c[0], c[1], c[2]);
        if (xs.size() == 1) put_pixel(img, static_cast<int>(px(xs[0])), static_cast<int>(py(series[si][0])), c[0], c[1], c[2]);
    }
    save_png(path, img);
}

void render_evolution_plot(const std::string& path, const std::vector<EvolutionPoint>& curve) {
    if (curve.empty()) throw ValueError("render_evolution_plot: empty curve");
    std::vector<double> xs;
    std::vector<std::vector<double>> series(2);
    for (const auto& p : curve) {
        xs.push_back(p.epoch);
        series[0].push_back(p.train_report.overall_accuracy);
        series[1].push_back(p.test_report.overall_accuracy);
    }
    render_line_plot(path, xs, series, 0.0, 1.0);
}

}  // namespace xmodal
