#include "shiftcal/svg.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace shiftcal {

namespace {

std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

void rect(std::ostringstream& out, double x, double y, double w, double h,
          const char* fill) {
  out << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(w)
      << "\" height=\"" << num(h) << "\" fill=\"" << fill << "\"/>\n";
}

void line(std::ostringstream& out, double x1, double y1, double x2, double y2,
          const char* stroke, const char* extra = "") {
  out << "<line x1=\"" << num(x1) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(x2)
      << "\" y2=\"" << num(y2) << "\" stroke=\"" << stroke << "\" " << extra << "/>\n";
}

void text(std::ostringstream& out, double x, double y, const std::string& s,
          const char* anchor = "middle") {
  out << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" font-size=\"11\" "
      << "font-family=\"sans-serif\" text-anchor=\"" << anchor << "\">" << s << "</text>\n";
}

struct Panel {
  double x0, y0, w, h;  // plot area in page coordinates; y grows downward
  double px(double u) const { return x0 + u * w; }
  double py(double v) const { return y0 + (1.0 - v) * h; }
};

void axes(std::ostringstream& out, const Panel& p, const std::string& xlabel,
          const std::string& ylabel, const std::string& title) {
  line(out, p.x0, p.y0 + p.h, p.x0 + p.w, p.y0 + p.h, "black");
  line(out, p.x0, p.y0, p.x0, p.y0 + p.h, "black");
  for (int t = 0; t <= 4; ++t) {
    double u = t / 4.0;
    text(out, p.px(u), p.y0 + p.h + 14, num(u));
    text(out, p.x0 - 6, p.py(u) + 4, num(u), "end");
  }
  text(out, p.px(0.5), p.y0 + p.h + 30, xlabel);
  text(out, p.px(0.5), p.y0 - 8, title);
  out << "<text x=\"" << num(p.x0 - 34) << "\" y=\"" << num(p.py(0.5))
      << "\" font-size=\"11\" font-family=\"sans-serif\" text-anchor=\"middle\" "
      << "transform=\"rotate(-90 " << num(p.x0 - 34) << " " << num(p.py(0.5)) << ")\">"
      << ylabel << "</text>\n";
}

}  // namespace

std::string reliability_svg(const EceReport& report) {
  const double width = 720, height = 340;
  Panel acc{55, 40, 280, 240};
  Panel mass{415, 40, 280, 240};

  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  out << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height
      << "\" fill=\"white\"/>\n";

  for (const EceBin& bin : report.bins) {
    if (bin.count == 0) continue;
    double x = acc.px(bin.lo), w = acc.px(bin.hi) - acc.px(bin.lo) - 1.0;
    rect(out, x, acc.py(bin.accuracy), w, acc.py(0) - acc.py(bin.accuracy), "#4477aa");
  }
  line(out, acc.px(0), acc.py(0), acc.px(1), acc.py(1), "#cc3311",
       "stroke-dasharray=\"4 3\" stroke-width=\"1.5\"");
  axes(out, acc, "confidence", "accuracy", "reliability (ECE " + num(report.ece) + ")");

  for (const EceBin& bin : report.bins) {
    if (bin.count == 0) continue;
    double x = mass.px(bin.lo), w = mass.px(bin.hi) - mass.px(bin.lo) - 1.0;
    rect(out, x, mass.py(bin.mass), w, mass.py(0) - mass.py(bin.mass), "#88aa66");
  }
  axes(out, mass, "confidence", "fraction of examples", "bin mass");

  out << "</svg>\n";
  return out.str();
}

std::string iw_box_svg(const std::vector<IwExampleStat>& stats) {
  const double width = 640, height = 360;
  Panel p{60, 40, 540, 260};
  double top = 1.0;
  for (const auto& st : stats) top = std::max(top, st.max);
  top *= 1.05;

  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  out << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height
      << "\" fill=\"white\"/>\n";

  line(out, p.x0, p.y0 + p.h, p.x0 + p.w, p.y0 + p.h, "black");
  line(out, p.x0, p.y0, p.x0, p.y0 + p.h, "black");
  for (int t = 0; t <= 4; ++t) {
    double v = top * t / 4.0;
    text(out, p.x0 - 6, p.py(v / top) + 4, num(v), "end");
  }
  text(out, p.px(0.5), p.y0 + p.h + 32, "source example (ranked by mean weight)");
  text(out, p.px(0.5), p.y0 - 8, "importance-weight spread across runs");

  const int n = static_cast<int>(stats.size());
  for (int i = 0; i < n; ++i) {
    const auto& st = stats[i];
    double cx = p.px((i + 0.5) / n);
    double half = 0.35 * p.w / n;
    line(out, cx, p.py(st.min / top), cx, p.py(st.max / top), "#4477aa", "stroke-width=\"1.5\"");
    line(out, cx - half, p.py(st.min / top), cx + half, p.py(st.min / top), "#4477aa");
    line(out, cx - half, p.py(st.max / top), cx + half, p.py(st.max / top), "#4477aa");
    line(out, cx - half, p.py(st.median / top), cx + half, p.py(st.median / top), "#cc3311",
         "stroke-width=\"2\"");
    text(out, cx, p.y0 + p.h + 14, std::to_string(st.example));
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace shiftcal
