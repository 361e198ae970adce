#include "svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "icl/format.hpp"

namespace lab {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  std::ostringstream ss;
  ss.precision(6);
  ss << v;
  return ss.str();
}

struct Axis {
  bool log;
  double lo, hi;
  double pixel_lo, pixel_hi;

  double map(double v) const {
    const double a = log ? std::log10(v) : v;
    const double b = log ? std::log10(lo) : lo;
    const double c = log ? std::log10(hi) : hi;
    return pixel_lo + (a - b) / (c - b) * (pixel_hi - pixel_lo);
  }

  std::vector<double> ticks() const {
    std::vector<double> out;
    if (log) {
      for (int e = static_cast<int>(std::floor(std::log10(lo))); e <= static_cast<int>(std::ceil(std::log10(hi))); ++e) {
        const double t = std::pow(10.0, e);
        if (t >= lo * (1 - 1e-9) && t <= hi * (1 + 1e-9)) out.push_back(t);
      }
      if (out.size() < 2) out = {lo, hi};
      return out;
    }
    const double span = hi - lo;
    const double step0 = std::pow(10.0, std::floor(std::log10(span / 5.0)));
    double step = step0;
    for (double m : {1.0, 2.0, 5.0, 10.0}) {
      step = step0 * m;
      if (span / step <= 6.0) break;
    }
    for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * span; t += step) out.push_back(t);
    return out;
  }
};

Axis make_axis(std::vector<double> values, bool log, double p0, double p1) {
  if (log) values.erase(std::remove_if(values.begin(), values.end(), [](double v) { return !(v > 0.0); }), values.end());
  if (values.empty()) return {log, 1.0, 10.0, p0, p1};
  auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  double lo = *mn, hi = *mx;
  if (log) {
    if (lo == hi) {
      lo /= 2.0;
      hi *= 2.0;
    } else {
      const double pad = std::pow(hi / lo, 0.04);
      lo /= pad;
      hi *= pad;
    }
  } else {
    const double pad = lo == hi ? std::max(1.0, std::abs(lo)) * 0.5 : (hi - lo) * 0.04;
    lo -= pad;
    hi += pad;
  }
  return {log, lo, hi, p0, p1};
}

}  // namespace

std::string render_svg(const std::vector<Series>& series, const ChartOptions& o) {
  const double left = 80, right = 200, top = 40, bottom = 60;
  std::vector<double> xs, ys;
  for (const auto& s : series) {
    for (const auto& [x, y] : s.points) {
      if (std::isfinite(x) && std::isfinite(y)) {
        xs.push_back(x);
        ys.push_back(y);
      }
    }
  }
  const Axis ax = make_axis(xs, o.log_x, left, o.width - right);
  const Axis ay = make_axis(ys, o.log_y, o.height - bottom, top);

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << o.width << "\" height=\"" << o.height
      << "\" viewBox=\"0 0 " << o.width << ' ' << o.height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!o.title.empty()) {
    svg << "<text x=\"" << (left + (o.width - right)) / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
        << escape(o.title) << "</text>\n";
  }
  svg << "<g stroke=\"#333\" fill=\"none\">\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << o.height - bottom << "\" x2=\"" << o.width - right << "\" y2=\""
      << o.height - bottom << "\"/>\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << o.height - bottom << "\"/>\n";
  svg << "</g>\n";
  for (double t : ax.ticks()) {
    const double px = ax.map(t);
    svg << "<line x1=\"" << num(px) << "\" y1=\"" << o.height - bottom << "\" x2=\"" << num(px) << "\" y2=\""
        << o.height - bottom + 5 << "\" stroke=\"#333\"/>\n";
    svg << "<text x=\"" << num(px) << "\" y=\"" << o.height - bottom + 18 << "\" text-anchor=\"middle\">" << num(t)
        << "</text>\n";
  }
  for (double t : ay.ticks()) {
    const double py = ay.map(t);
    svg << "<line x1=\"" << left - 5 << "\" y1=\"" << num(py) << "\" x2=\"" << left << "\" y2=\"" << num(py)
        << "\" stroke=\"#333\"/>\n";
    svg << "<text x=\"" << left - 8 << "\" y=\"" << num(py + 4) << "\" text-anchor=\"end\">" << num(t) << "</text>\n";
  }
  svg << "<text x=\"" << (left + (o.width - right)) / 2 << "\" y=\"" << o.height - 15
      << "\" text-anchor=\"middle\">" << escape(o.x_label) << (o.log_x ? " (log)" : "") << "</text>\n";
  svg << "<text transform=\"translate(18," << (top + o.height - bottom) / 2
      << ") rotate(-90)\" text-anchor=\"middle\">" << escape(o.y_label) << (o.log_y ? " (log)" : "") << "</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const char* color = kPalette[i % (sizeof kPalette / sizeof *kPalette)];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\""
        << (s.dashed ? " stroke-dasharray=\"6 4\"" : "") << " data-series=\"" << escape(s.name) << "\" points=\"";
    bool first = true;
    for (const auto& [x, y] : s.points) {
      if ((o.log_x && !(x > 0.0)) || (o.log_y && !(y > 0.0)) || !std::isfinite(x) || !std::isfinite(y)) continue;
      svg << (first ? "" : " ") << num(ax.map(x)) << ',' << num(ay.map(y));
      first = false;
    }
    svg << "\"/>\n";
    const double ly = top + 10 + 20.0 * static_cast<double>(i);
    const double lx = o.width - right + 15;
    svg << "<line x1=\"" << lx << "\" y1=\"" << ly << "\" x2=\"" << lx + 25 << "\" y2=\"" << ly << "\" stroke=\""
        << color << "\" stroke-width=\"2\"" << (s.dashed ? " stroke-dasharray=\"6 4\"" : "") << "/>\n";
    svg << "<text x=\"" << lx + 32 << "\" y=\"" << ly + 4 << "\">" << escape(s.name) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

std::vector<Series> series_from_rows(const std::vector<ResultRow>& rows, const std::string& x) {
  const auto x_of = [&](const ResultRow& r) -> std::optional<double> {
    if (x == "N") return r.N ? std::optional<double>(static_cast<double>(*r.N)) : std::nullopt;
    if (x == "n") return r.n ? std::optional<double>(static_cast<double>(*r.n)) : std::nullopt;
    if (x == "T") return r.T ? std::optional<double>(static_cast<double>(*r.T)) : std::nullopt;
    if (x == "epoch") return r.epoch ? std::optional<double>(*r.epoch) : std::nullopt;
    throw std::invalid_argument("plot: x axis must be one of N, n, T, epoch");
  };
  const auto base = [&](const ResultRow& r) {
    std::string s = r.metric;
    if (!r.variant.empty()) s = r.variant + " " + s;
    if (x != "epoch" && r.epoch) s += " epoch=" + std::to_string(*r.epoch);
    return s;
  };
  // A config column goes into the label only if it separates rows that share
  // an x value; columns that move with x (N under the rate rule) do not.
  const std::array<const char*, 3> names = {"N", "n", "T"};
  const auto column = [&](const ResultRow& r, std::size_t c) {
    const std::optional<long long>* cols[] = {&r.N, &r.n, &r.T};
    return *cols[c];
  };
  std::array<bool, 3> split{};
  {
    std::map<std::pair<std::string, double>, std::array<std::set<std::optional<long long>>, 3>> seen;
    for (const auto& r : rows) {
      const auto xv = x_of(r);
      if (!xv) continue;
      auto& sets = seen[{base(r), *xv}];
      for (std::size_t c = 0; c < names.size(); ++c) {
        if (x == names[c]) continue;
        sets[c].insert(column(r, c));
        if (sets[c].size() > 1) split[c] = true;
      }
    }
  }
  const auto label = [&](const ResultRow& r) {
    std::string s = base(r);
    for (std::size_t c = 0; c < names.size(); ++c) {
      const auto v = column(r, c);
      if (split[c] && v) s += std::string(" ") + names[c] + "=" + std::to_string(*v);
    }
    return s;
  };
  std::map<std::string, std::map<double, std::vector<double>>> groups;
  std::vector<std::string> order;
  for (const auto& r : rows) {
    const auto xv = x_of(r);
    if (!xv) continue;
    const std::string name = label(r);
    if (!groups.count(name)) order.push_back(name);
    groups[name][*xv].push_back(r.value);
  }
  std::vector<Series> out;
  for (const auto& name : order) {
    Series s;
    s.name = name;
    const auto sp = name.find(' ');
    const std::string metric = name.substr(sp == std::string::npos ? 0 : sp + 1);
    s.dashed = metric.rfind("bound", 0) == 0 || name.rfind("bound", 0) == 0;
    for (const auto& [xv, vals] : groups[name]) s.points.emplace_back(xv, median(vals));
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace lab
