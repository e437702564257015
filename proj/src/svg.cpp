#include "aglv/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace aglv {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

const char* const kPalette[] = {"#4477aa", "#ee6677", "#228833", "#ccbb44",
                                "#66ccee", "#aa3377", "#bbbbbb", "#222222",
                                "#999933", "#882255"};

std::string position_color(double t) {
  // blue -> red sweep along the curve
  const int r = static_cast<int>(std::lround(40 + 200 * t));
  const int g = static_cast<int>(std::lround(80 + 60 * (1.0 - std::fabs(2 * t - 1))));
  const int b = static_cast<int>(std::lround(240 - 200 * t));
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

struct Range {
  double lo, hi;
};

Range padded_range(const DenseMatrix& x, std::size_t dim) {
  double lo = x(0, dim), hi = x(0, dim);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    lo = std::min(lo, x(i, dim));
    hi = std::max(hi, x(i, dim));
  }
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

}  // namespace

std::string latent_scatter_svg(const DenseMatrix& x, const std::vector<int>* labels) {
  if (x.cols() < 1) throw ShapeMismatch("latent_scatter_svg: empty latents");
  const std::size_t ydim = x.cols() >= 2 ? 1 : 0;
  const double w = 640, h = 640, margin = 40;
  const Range rx = padded_range(x, 0);
  const Range ry = padded_range(x, ydim);

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
     << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
  os << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double px = margin + (x(i, 0) - rx.lo) / (rx.hi - rx.lo) * (w - 2 * margin);
    const double py = h - margin - (x(i, ydim) - ry.lo) / (ry.hi - ry.lo) * (h - 2 * margin);
    std::string color;
    if (labels != nullptr && i < labels->size()) {
      const int li = (*labels)[i] % 10;
      color = kPalette[li < 0 ? li + 10 : li];
    } else {
      color = position_color(x.rows() > 1 ? static_cast<double>(i) / (x.rows() - 1) : 0.0);
    }
    os << "<circle cx=\"" << fmt(px) << "\" cy=\"" << fmt(py)
       << "\" r=\"2.5\" fill=\"" << color << "\" fill-opacity=\"0.8\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string latent_histogram_svg(const DenseMatrix& x, std::size_t dim, std::size_t bins) {
  if (dim >= x.cols()) throw ShapeMismatch("latent_histogram_svg: dimension out of range");
  if (bins == 0) bins = 1;
  const Range r = padded_range(x, dim);
  std::vector<std::size_t> counts(bins, 0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double t = (x(i, dim) - r.lo) / (r.hi - r.lo);
    std::size_t b = static_cast<std::size_t>(t * bins);
    if (b >= bins) b = bins - 1;
    counts[b] += 1;
  }
  const std::size_t peak = std::max<std::size_t>(1, *std::max_element(counts.begin(), counts.end()));

  const double w = 640, h = 320, margin = 30;
  const double bw = (w - 2 * margin) / bins;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
     << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
  os << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
  for (std::size_t b = 0; b < bins; ++b) {
    const double bh = (h - 2 * margin) * static_cast<double>(counts[b]) / peak;
    os << "<rect x=\"" << fmt(margin + b * bw) << "\" y=\"" << fmt(h - margin - bh)
       << "\" width=\"" << fmt(bw * 0.92) << "\" height=\"" << fmt(bh)
       << "\" fill=\"#4477aa\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("write_text_file: cannot open " + path);
  out << content;
  if (!out) throw Error("write_text_file: write failure on " + path);
}

}  // namespace aglv
