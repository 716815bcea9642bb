#pragma once

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sufflab {

/// Minimal deterministic SVG line plot with error bars on log-log axes.
/// No timestamps, no external dependencies; byte-identical for equal inputs.
class SvgPlot {
 public:
  struct Series {
    std::string label;
    std::vector<double> x, mean, sd;
  };

  SvgPlot(std::string title, std::string xlabel, std::string ylabel)
      : title_(std::move(title)), xlabel_(std::move(xlabel)), ylabel_(std::move(ylabel)) {}

  void add_series(Series s) { series_.push_back(std::move(s)); }

  void write(const std::string& path) const {
    if (series_.empty()) throw std::runtime_error("SvgPlot: no series");
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& s : series_)
      for (size_t i = 0; i < s.x.size(); ++i) {
        xmin = std::min(xmin, s.x[i]);
        xmax = std::max(xmax, s.x[i]);
        double lo = std::max(s.mean[i] - s.sd[i], 1e-6);
        double hi = std::max(s.mean[i] + s.sd[i], 1e-6);
        ymin = std::min(ymin, lo);
        ymax = std::max(ymax, hi);
      }
    double lx0 = std::log10(xmin), lx1 = std::log10(xmax);
    double ly0 = std::floor(std::log10(ymin)), ly1 = std::ceil(std::log10(ymax));
    if (lx1 - lx0 < 1e-9) lx1 = lx0 + 1.0;
    if (ly1 - ly0 < 1e-9) ly1 = ly0 + 1.0;

    auto px = [&](double x) {
      return margin_ + (std::log10(x) - lx0) / (lx1 - lx0) * plot_w_;
    };
    auto py = [&](double y) {
      double ly = std::log10(std::max(y, 1e-6));
      return margin_ + plot_h_ - (ly - ly0) / (ly1 - ly0) * plot_h_;
    };

    std::string out;
    out += fmt("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" "
               "font-family=\"sans-serif\" font-size=\"12\">\n",
               width_, height_);
    out += fmt("<rect x=\"%d\" y=\"%d\" width=\"%d\" height=\"%d\" fill=\"white\" "
               "stroke=\"black\"/>\n",
               margin_, margin_, plot_w_, plot_h_);
    out += fmt("<text x=\"%d\" y=\"%d\" text-anchor=\"middle\" font-size=\"14\">%s</text>\n",
               margin_ + plot_w_ / 2, margin_ - 8, title_.c_str());
    out += fmt("<text x=\"%d\" y=\"%d\" text-anchor=\"middle\">%s</text>\n",
               margin_ + plot_w_ / 2, height_ - 6, xlabel_.c_str());
    out += fmt("<text x=\"14\" y=\"%d\" text-anchor=\"middle\" "
               "transform=\"rotate(-90 14 %d)\">%s</text>\n",
               margin_ + plot_h_ / 2, margin_ + plot_h_ / 2, ylabel_.c_str());

    // decade ticks
    for (int e = static_cast<int>(std::ceil(lx0)); e <= static_cast<int>(std::floor(lx1)); ++e) {
      double x = std::pow(10.0, e);
      out += fmt("<line x1=\"%.2f\" y1=\"%d\" x2=\"%.2f\" y2=\"%d\" stroke=\"#ccc\"/>\n",
                 px(x), margin_, px(x), margin_ + plot_h_);
      out += fmt("<text x=\"%.2f\" y=\"%d\" text-anchor=\"middle\">1e%d</text>\n",
                 px(x), margin_ + plot_h_ + 16, e);
    }
    for (int e = static_cast<int>(ly0); e <= static_cast<int>(ly1); ++e) {
      double y = std::pow(10.0, e);
      out += fmt("<line x1=\"%d\" y1=\"%.2f\" x2=\"%d\" y2=\"%.2f\" stroke=\"#ccc\"/>\n",
                 margin_, py(y), margin_ + plot_w_, py(y));
      out += fmt("<text x=\"%d\" y=\"%.2f\" text-anchor=\"end\">1e%d</text>\n",
                 margin_ - 4, py(y) + 4, e);
    }

    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                   "#8c564b", "#e377c2"};
    for (size_t si = 0; si < series_.size(); ++si) {
      const auto& s = series_[si];
      const char* color = colors[si % 6];
      std::string pts;
      for (size_t i = 0; i < s.x.size(); ++i) {
        pts += fmt("%.2f,%.2f ", px(s.x[i]), py(s.mean[i]));
        double lo = py(std::max(s.mean[i] - s.sd[i], 1e-6));
        double hi = py(s.mean[i] + s.sd[i]);
        out += fmt("<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" "
                   "stroke=\"%s\"/>\n",
                   px(s.x[i]), lo, px(s.x[i]), hi, color);
        out += fmt("<circle cx=\"%.2f\" cy=\"%.2f\" r=\"3\" fill=\"%s\"/>\n",
                   px(s.x[i]), py(s.mean[i]), color);
      }
      out += fmt("<polyline points=\"%s\" fill=\"none\" stroke=\"%s\" "
                 "stroke-width=\"1.5\"/>\n",
                 pts.c_str(), color);
      out += fmt("<rect x=\"%d\" y=\"%d\" width=\"12\" height=\"3\" fill=\"%s\"/>\n",
                 margin_ + plot_w_ + 10, margin_ + 14 + 18 * static_cast<int>(si), color);
      out += fmt("<text x=\"%d\" y=\"%d\">%s</text>\n", margin_ + plot_w_ + 26,
                 margin_ + 20 + 18 * static_cast<int>(si), s.label.c_str());
    }
    out += "</svg>\n";

    std::ofstream f(path);
    if (!f) throw std::runtime_error("SvgPlot: cannot write " + path);
    f << out;
  }

 private:
  static std::string fmt(const char* format, ...) {
    char buf[1024];
    va_list args;
    va_start(args, format);
    vsnprintf(buf, sizeof(buf), format, args);
    va_end(args);
    return buf;
  }

  std::string title_, xlabel_, ylabel_;
  std::vector<Series> series_;
  static constexpr int width_ = 760, height_ = 480, margin_ = 60;
  static constexpr int plot_w_ = 540, plot_h_ = 360;
};

}  // namespace sufflab
