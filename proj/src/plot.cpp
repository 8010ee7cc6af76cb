#include "xwalk/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace xwalk::plot {

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 440.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 160.0;  // legend column
constexpr double kTop = 40.0;
constexpr double kBottom = 55.0;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", std::abs(v) < 1e-12 ? 0.0 : v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Range {
  double lo = 0.0;
  double hi = 1.0;
};

double nice_step(double span) {
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double f = raw / mag;
  return (f < 1.5 ? 1.0 : f < 3.5 ? 2.0 : f < 7.5 ? 5.0 : 10.0) * mag;
}

Range padded(double lo, double hi) {
  if (!std::isfinite(lo) || !std::isfinite(hi)) return {0.0, 1.0};
  if (hi - lo < 1e-12) return {lo - 1.0, hi + 1.0};
  const double step = nice_step(hi - lo);
  return {std::floor(lo / step) * step, std::ceil(hi / step) * step};
}

class Frame {
 public:
  Frame(Range x, Range y) : x_(x), y_(y) {}
  double px(double v) const { return kLeft + (v - x_.lo) / (x_.hi - x_.lo) * (kWidth - kLeft - kRight); }
  double py(double v) const { return kHeight - kBottom - (v - y_.lo) / (y_.hi - y_.lo) * (kHeight - kTop - kBottom); }
  const Range& x() const { return x_; }
  const Range& y() const { return y_; }

 private:
  Range x_;
  Range y_;
};

std::string header(const Labels& labels) {
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
                  "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(kWidth / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" + escape(labels.title) +
       "</text>\n";
  s += "<text x=\"" + num(kLeft + (kWidth - kLeft - kRight) / 2) + "\" y=\"" + num(kHeight - 12) +
       "\" text-anchor=\"middle\">" + escape(labels.x) + "</text>\n";
  s += "<text transform=\"translate(18," + num(kTop + (kHeight - kTop - kBottom) / 2) +
       ") rotate(-90)\" text-anchor=\"middle\">" + escape(labels.y) + "</text>\n";
  return s;
}

std::string y_axis(const Frame& f) {
  std::string s;
  const double step = nice_step(f.y().hi - f.y().lo);
  for (double v = f.y().lo; v <= f.y().hi + step * 1e-6; v += step) {
    s += "<line x1=\"" + num(kLeft) + "\" x2=\"" + num(kWidth - kRight) + "\" y1=\"" + num(f.py(v)) + "\" y2=\"" +
         num(f.py(v)) + "\" stroke=\"#e0e0e0\"/>\n";
    s += "<text x=\"" + num(kLeft - 6) + "\" y=\"" + num(f.py(v) + 4) + "\" text-anchor=\"end\">" + tick_label(v) +
         "</text>\n";
  }
  s += "<line x1=\"" + num(kLeft) + "\" x2=\"" + num(kLeft) + "\" y1=\"" + num(kTop) + "\" y2=\"" +
       num(kHeight - kBottom) + "\" stroke=\"black\"/>\n";
  return s;
}

std::string x_axis(const Frame& f) {
  std::string s;
  const double step = nice_step(f.x().hi - f.x().lo);
  for (double v = f.x().lo; v <= f.x().hi + step * 1e-6; v += step) {
    s += "<line x1=\"" + num(f.px(v)) + "\" x2=\"" + num(f.px(v)) + "\" y1=\"" + num(kHeight - kBottom) + "\" y2=\"" +
         num(kHeight - kBottom + 5) + "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + num(f.px(v)) + "\" y=\"" + num(kHeight - kBottom + 18) + "\" text-anchor=\"middle\">" +
         tick_label(v) + "</text>\n";
  }
  s += "<line x1=\"" + num(kLeft) + "\" x2=\"" + num(kWidth - kRight) + "\" y1=\"" + num(kHeight - kBottom) +
       "\" y2=\"" + num(kHeight - kBottom) + "\" stroke=\"black\"/>\n";
  return s;
}

std::string legend(const std::vector<Series>& series) {
  std::string s;
  double y = kTop + 10;
  for (const auto& ser : series) {
    s += "<rect x=\"" + num(kWidth - kRight + 15) + "\" y=\"" + num(y - 9) + "\" width=\"10\" height=\"10\" fill=\"" +
         escape(ser.color) + "\"/>\n";
    s += "<text x=\"" + num(kWidth - kRight + 30) + "\" y=\"" + num(y) + "\">" + escape(ser.name) + "</text>\n";
    y += 18;
  }
  return s;
}

Frame frame_for(const std::vector<Series>& series) {
  double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo, ylo = xlo, yhi = -xlo;
  for (const auto& s : series) {
    for (double v : s.x) {
      xlo = std::min(xlo, v);
      xhi = std::max(xhi, v);
    }
    for (double v : s.y) {
      ylo = std::min(ylo, v);
      yhi = std::max(yhi, v);
    }
  }
  return Frame(padded(xlo, xhi), padded(ylo, yhi));
}

}  // namespace

std::string scatter_svg(const std::vector<Series>& series, const Labels& labels) {
  const Frame f = frame_for(series);
  std::string s = header(labels) + y_axis(f) + x_axis(f);
  for (const auto& ser : series) {
    const std::size_t n = std::min(ser.x.size(), ser.y.size());
    for (std::size_t i = 0; i < n; ++i) {
      s += "<circle cx=\"" + num(f.px(ser.x[i])) + "\" cy=\"" + num(f.py(ser.y[i])) + "\" r=\"3\" fill=\"" +
           escape(ser.color) + "\" fill-opacity=\"0.7\"/>\n";
    }
  }
  return s + legend(series) + "</svg>\n";
}

std::string line_svg(const std::vector<Series>& series, const Labels& labels) {
  const Frame f = frame_for(series);
  std::string s = header(labels) + y_axis(f) + x_axis(f);
  for (const auto& ser : series) {
    const std::size_t n = std::min(ser.x.size(), ser.y.size());
    if (n == 0) continue;
    s += "<polyline fill=\"none\" stroke=\"" + escape(ser.color) + "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < n; ++i) {
      if (i) s += ' ';
      s += num(f.px(ser.x[i])) + ',' + num(f.py(ser.y[i]));
    }
    s += "\"/>\n";
  }
  return s + legend(series) + "</svg>\n";
}

std::string box_svg(const std::vector<std::pair<std::string, BoxStats>>& boxes, const Labels& labels) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& [name, b] : boxes) {
    if (b.n == 0) continue;
    lo = std::min(lo, b.min);
    hi = std::max(hi, b.max);
  }
  const Frame f(Range{0.0, static_cast<double>(std::max<std::size_t>(boxes.size(), 1))}, padded(lo, hi));
  std::string s = header(labels) + y_axis(f);
  s += "<line x1=\"" + num(kLeft) + "\" x2=\"" + num(kWidth - kRight) + "\" y1=\"" + num(kHeight - kBottom) +
       "\" y2=\"" + num(kHeight - kBottom) + "\" stroke=\"black\"/>\n";
  const double slot = f.px(1.0) - f.px(0.0);
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const auto& [name, b] = boxes[i];
    const double cx = f.px(static_cast<double>(i) + 0.5);
    const double half = std::min(30.0, slot * 0.3);
    s += "<text x=\"" + num(cx) + "\" y=\"" + num(kHeight - kBottom + 18) + "\" text-anchor=\"middle\">" + escape(name) +
         "</text>\n";
    if (b.n == 0) continue;
    s += "<line x1=\"" + num(cx) + "\" x2=\"" + num(cx) + "\" y1=\"" + num(f.py(b.whisker_low)) + "\" y2=\"" +
         num(f.py(b.whisker_high)) + "\" stroke=\"black\"/>\n";
    for (double w : {b.whisker_low, b.whisker_high}) {
      s += "<line x1=\"" + num(cx - half / 2) + "\" x2=\"" + num(cx + half / 2) + "\" y1=\"" + num(f.py(w)) +
           "\" y2=\"" + num(f.py(w)) + "\" stroke=\"black\"/>\n";
    }
    s += "<rect x=\"" + num(cx - half) + "\" y=\"" + num(f.py(b.q3)) + "\" width=\"" + num(2 * half) + "\" height=\"" +
         num(std::max(0.5, f.py(b.q1) - f.py(b.q3))) + "\" fill=\"#9ecae1\" stroke=\"black\"/>\n";
    s += "<line x1=\"" + num(cx - half) + "\" x2=\"" + num(cx + half) + "\" y1=\"" + num(f.py(b.median)) + "\" y2=\"" +
         num(f.py(b.median)) + "\" stroke=\"#d62728\" stroke-width=\"2\"/>\n";
    for (double o : b.outliers) {
      s += "<circle cx=\"" + num(cx) + "\" cy=\"" + num(f.py(o)) + "\" r=\"3\" fill=\"none\" stroke=\"black\"/>\n";
    }
  }
  return s + "</svg>\n";
}

}  // namespace xwalk::plot
