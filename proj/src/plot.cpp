#include "koopman_hjb/plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>

namespace koopman_hjb {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 20.0;
constexpr double kTop = 30.0;
constexpr double kBottom = 50.0;

std::string fmt(const char* pattern, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, a);
  return buf;
}

std::string header() {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt("%.0f", kWidth) + "\" height=\"" +
         fmt("%.0f", kHeight) + "\" viewBox=\"0 0 " + fmt("%.0f", kWidth) + " " + fmt("%.0f", kHeight) +
         "\" font-family=\"sans-serif\" font-size=\"12\">\n"
         "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

std::string frame(const std::string& title, const std::string& xlabel, const std::string& ylabel) {
  std::string s;
  s += "<rect x=\"" + fmt("%.2f", kLeft) + "\" y=\"" + fmt("%.2f", kTop) + "\" width=\"" +
       fmt("%.2f", kWidth - kLeft - kRight) + "\" height=\"" + fmt("%.2f", kHeight - kTop - kBottom) +
       "\" fill=\"none\" stroke=\"black\"/>\n";
  s += "<text x=\"" + fmt("%.2f", kWidth / 2) + "\" y=\"18\" text-anchor=\"middle\">" + title + "</text>\n";
  s += "<text x=\"" + fmt("%.2f", kLeft + (kWidth - kLeft - kRight) / 2) + "\" y=\"" +
       fmt("%.2f", kHeight - 10) + "\" text-anchor=\"middle\">" + xlabel + "</text>\n";
  s += "<text x=\"16\" y=\"" + fmt("%.2f", kTop + (kHeight - kTop - kBottom) / 2) +
       "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
       fmt("%.2f", kTop + (kHeight - kTop - kBottom) / 2) + ")\">" + ylabel + "</text>\n";
  return s;
}

// Five-stop viridis approximation.
std::string color(double t) {
  static constexpr std::array<std::array<double, 3>, 5> stops{{{68, 1, 84},
                                                               {59, 82, 139},
                                                               {33, 145, 140},
                                                               {94, 201, 98},
                                                               {253, 231, 37}}};
  t = std::clamp(t, 0.0, 1.0) * (stops.size() - 1);
  const std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(t), stops.size() - 2);
  const double f = t - i;
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x",
                static_cast<int>(std::lround(stops[i][0] + f * (stops[i + 1][0] - stops[i][0]))),
                static_cast<int>(std::lround(stops[i][1] + f * (stops[i + 1][1] - stops[i][1]))),
                static_cast<int>(std::lround(stops[i][2] + f * (stops[i + 1][2] - stops[i][2]))));
  return buf;
}

}  // namespace

std::string render_decay_svg(const std::vector<double>& sigmas) {
  if (sigmas.empty()) throw std::invalid_argument("render_decay_svg: no singular values");
  double lo = INFINITY;
  double hi = -INFINITY;
  for (double s : sigmas) {
    if (!(s > 0.0)) throw std::invalid_argument("render_decay_svg: singular values must be positive");
    lo = std::min(lo, std::log10(s));
    hi = std::max(hi, std::log10(s));
  }
  const double ymin = std::floor(lo);
  const double ymax = std::max(std::ceil(hi), ymin + 1.0);
  const double n = static_cast<double>(sigmas.size());
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double i) { return kLeft + pw * (n > 1 ? (i - 1.0) / (n - 1.0) : 0.5); };
  auto py = [&](double l) { return kTop + ph * (ymax - l) / (ymax - ymin); };

  std::string s = header() + frame("singular values", "index i", "sigma_i (log10)");
  const int decades = static_cast<int>(ymax - ymin);
  const int stride = std::max(1, decades / 8);
  for (int k = 0; k <= decades; k += stride) {
    const double l = ymin + k;
    s += "<line x1=\"" + fmt("%.2f", kLeft - 4) + "\" x2=\"" + fmt("%.2f", kLeft) + "\" y1=\"" +
         fmt("%.2f", py(l)) + "\" y2=\"" + fmt("%.2f", py(l)) + "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + fmt("%.2f", kLeft - 6) + "\" y=\"" + fmt("%.2f", py(l) + 4) +
         "\" text-anchor=\"end\">1e" + fmt("%.0f", l) + "</text>\n";
  }
  const int xstride = std::max(1, static_cast<int>(sigmas.size()) / 10);
  for (int i = 1; i <= static_cast<int>(sigmas.size()); i += xstride) {
    s += "<text x=\"" + fmt("%.2f", px(i)) + "\" y=\"" + fmt("%.2f", kTop + ph + 16) +
         "\" text-anchor=\"middle\">" + std::to_string(i) + "</text>\n";
  }
  s += "<g fill=\"#1f4e9c\">\n";
  for (std::size_t i = 0; i < sigmas.size(); ++i) {
    s += "<circle cx=\"" + fmt("%.2f", px(double(i + 1))) + "\" cy=\"" +
         fmt("%.2f", py(std::log10(sigmas[i]))) + "\" r=\"3\"/>\n";
  }
  s += "</g>\n</svg>\n";
  return s;
}

std::string render_value_svg(const CsvTable& grid) {
  if (grid.rows.empty()) throw std::invalid_argument("render_value_svg: empty value grid");
  const int d = static_cast<int>(grid.header.size()) - 2;
  if (d != 1 && d != 2) throw std::invalid_argument("render_value_svg: expected columns x1[,x2],v,u");
  const int vcol = d;
  double vmin = INFINITY;
  double vmax = -INFINITY;
  for (const auto& r : grid.rows) {
    vmin = std::min(vmin, r[vcol]);
    vmax = std::max(vmax, r[vcol]);
  }
  const double vspan = vmax > vmin ? vmax - vmin : 1.0;
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;

  std::string s = header();
  if (d == 1) {
    double xmin = grid.rows.front()[0];
    double xmax = grid.rows.back()[0];
    if (xmax <= xmin) xmax = xmin + 1.0;
    s += frame("value function", "x1", "v");
    s += "<polyline fill=\"none\" stroke=\"#1f4e9c\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < grid.rows.size(); ++i) {
      const double x = kLeft + pw * (grid.rows[i][0] - xmin) / (xmax - xmin);
      const double y = kTop + ph * (vmax - grid.rows[i][vcol]) / vspan;
      s += (i ? " " : "") + fmt("%.2f", x) + "," + fmt("%.2f", y);
    }
    s += "\"/>\n</svg>\n";
    return s;
  }

  std::map<double, int> xs;
  std::map<double, int> ys;
  for (const auto& r : grid.rows) {
    xs.emplace(r[0], 0);
    ys.emplace(r[1], 0);
  }
  int k = 0;
  for (auto& [x, idx] : xs) idx = k++;
  k = 0;
  for (auto& [y, idx] : ys) idx = k++;
  const double cw = pw / xs.size();
  const double ch = ph / ys.size();
  s += frame("value function", "x1", "x2");
  for (const auto& r : grid.rows) {
    const double x = kLeft + cw * xs[r[0]];
    const double y = kTop + ph - ch * (ys[r[1]] + 1);
    s += "<rect x=\"" + fmt("%.2f", x) + "\" y=\"" + fmt("%.2f", y) + "\" width=\"" + fmt("%.2f", cw + 0.05) +
         "\" height=\"" + fmt("%.2f", ch + 0.05) + "\" fill=\"" + color((r[vcol] - vmin) / vspan) + "\"/>\n";
  }
  s += "<text x=\"" + fmt("%.2f", kLeft) + "\" y=\"" + fmt("%.2f", kTop + ph + 16) + "\">" +
       fmt("%.3g", xs.begin()->first) + "</text>\n";
  s += "<text x=\"" + fmt("%.2f", kLeft + pw) + "\" y=\"" + fmt("%.2f", kTop + ph + 16) +
       "\" text-anchor=\"end\">" + fmt("%.3g", xs.rbegin()->first) + "</text>\n";
  s += "<text x=\"" + fmt("%.2f", kWidth - kRight) + "\" y=\"" + fmt("%.2f", kTop - 8) +
       "\" text-anchor=\"end\">v in [" + fmt("%.4g", vmin) + ", " + fmt("%.4g", vmax) + "]</text>\n";
  s += "</svg>\n";
  return s;
}

}  // namespace koopman_hjb
