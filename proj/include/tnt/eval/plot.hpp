#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "tnt/eval/report.hpp"
#include "tnt/patch/image.hpp"
#include "tnt/patch/io.hpp"

namespace tnt::eval {

namespace plotdetail {

struct Canvas {
  img::Image im;
  std::size_t margin;

  Canvas(std::size_t w, std::size_t h, std::size_t m) : im(h, w, 1.0), margin(m) {}

  void put(std::ptrdiff_t r, std::ptrdiff_t c, double red, double green, double blue) {
    if (r < 0 || c < 0 || r >= static_cast<std::ptrdiff_t>(im.height) ||
        c >= static_cast<std::ptrdiff_t>(im.width))
      return;
    im.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c), 0) = red;
    im.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c), 1) = green;
    im.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c), 2) = blue;
  }

  void line(double r0, double c0, double r1, double c1, double red, double green, double blue) {
    const double len = std::max(std::abs(r1 - r0), std::abs(c1 - c0));
    const int steps = std::max(1, static_cast<int>(std::ceil(len)));
    for (int i = 0; i <= steps; ++i) {
      const double t = static_cast<double>(i) / steps;
      put(static_cast<std::ptrdiff_t>(std::llround(r0 + t * (r1 - r0))),
          static_cast<std::ptrdiff_t>(std::llround(c0 + t * (c1 - c0))), red, green, blue);
    }
  }

  // data coords: x in [0,1] across the plot area, y in [0,1] upward
  double px(double x) const { return margin + x * (im.width - 2.0 * margin); }
  double py(double y) const { return im.height - margin - y * (im.height - 2.0 * margin); }

  void axes() {
    line(py(0), px(0), py(0), px(1), 0, 0, 0);
    line(py(0), px(0), py(1), px(0), 0, 0, 0);
    for (int i = 0; i <= 10; ++i) {  // y ticks at 0.1 steps
      const double y = py(i / 10.0);
      line(y, px(0) - 3, y, px(0), 0, 0, 0);
    }
  }
};

struct Series {
  std::vector<std::pair<double, double>> points;  // (x, asr)
  double r, g, b;
};

}  // namespace plotdetail

/// ASR-vs-size curves as a raster figure; x spans the fraction range, y is
/// ASR in [0,1].
inline void plot_size_curves(const std::string& path,
                             const std::vector<std::pair<std::string, std::vector<SizeRow>>>& curves,
                             std::size_t width = 480, std::size_t height = 320) {
  plotdetail::Canvas canvas(width, height, 28);
  canvas.axes();
  double xmin = 1e9, xmax = -1e9;
  for (const auto& [name, rows] : curves)
    for (const auto& r : rows)
      if (!r.skipped) {
        xmin = std::min(xmin, r.fraction);
        xmax = std::max(xmax, r.fraction);
      }
  if (xmax <= xmin) xmax = xmin + 1.0;
  const double colors[][3] = {{0.8, 0.1, 0.1}, {0.1, 0.3, 0.8}, {0.1, 0.6, 0.2}, {0.7, 0.5, 0.0}};
  for (std::size_t s = 0; s < curves.size(); ++s) {
    const auto& rows = curves[s].second;
    const auto* col = colors[s % 4];
    double prev_x = -1, prev_y = -1;
    for (const auto& r : rows) {
      if (r.skipped) continue;
      const double x = (r.fraction - xmin) / (xmax - xmin);
      const double y = r.cell.asr();
      if (prev_x >= 0)
        canvas.line(canvas.py(prev_y), canvas.px(prev_x), canvas.py(y), canvas.px(x), col[0], col[1], col[2]);
      // point marker
      for (int dr = -2; dr <= 2; ++dr)
        for (int dc = -2; dc <= 2; ++dc)
          canvas.put(static_cast<std::ptrdiff_t>(canvas.py(y)) + dr,
                     static_cast<std::ptrdiff_t>(canvas.px(x)) + dc, col[0], col[1], col[2]);
      prev_x = x;
      prev_y = y;
    }
  }
  img::save_image(path, canvas.im);
}

/// Per-location ASR as a bar chart in sweep order.
inline void plot_location_bars(const std::string& path, const std::vector<LocationRow>& rows,
                               std::size_t width = 480, std::size_t height = 320) {
  plotdetail::Canvas canvas(width, height, 28);
  canvas.axes();
  const std::size_t n = std::max<std::size_t>(1, rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].skipped) continue;
    const double x0 = (i + 0.15) / static_cast<double>(n);
    const double x1 = (i + 0.85) / static_cast<double>(n);
    const double y = rows[i].cell.asr();
    for (double x = x0; x <= x1; x += 1.0 / width)
      canvas.line(canvas.py(0), canvas.px(x), canvas.py(y), canvas.px(x), 0.2, 0.4, 0.75);
  }
  img::save_image(path, canvas.im);
}

}  // namespace tnt::eval
