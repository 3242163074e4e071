#include "rolespace/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace rolespace {

namespace {

constexpr double kWidth = 640, kHeight = 400;
constexpr double kLeft = 70, kRight = 170, kTop = 40, kBottom = 60;
const char* const kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                               "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
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

std::vector<double> linear_ticks(double lo, double hi) {
  const double span = hi - lo;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (raw <= m * mag) {
      step = m * mag;
      break;
    }
  std::vector<double> ticks;
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * span; t += step) ticks.push_back(std::abs(t) < 1e-12 ? 0.0 : t);
  return ticks;
}

}  // namespace

std::string render_plot(const PlotSpec& spec) {
  double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo, y_lo = x_lo, y_hi = -x_lo;
  for (const auto& s : spec.series)
    for (auto [x, y] : s.points) {
      if (spec.log_y && y <= 0.0) continue;
      x_lo = std::min(x_lo, x);
      x_hi = std::max(x_hi, x);
      y_lo = std::min(y_lo, y);
      y_hi = std::max(y_hi, y);
    }
  if (!std::isfinite(x_lo)) x_lo = 0, x_hi = 1, y_lo = spec.log_y ? 1 : 0, y_hi = spec.log_y ? 10 : 1;
  if (spec.bars) x_lo -= 0.5, x_hi += 0.5;
  if (!spec.log_y) y_lo = std::min(0.0, y_lo);
  if (x_hi <= x_lo) x_hi = x_lo + 1;
  if (y_hi <= y_lo) y_hi = y_lo + 1;
  if (spec.log_y) {
    y_lo = std::pow(10.0, std::floor(std::log10(y_lo)));
    y_hi = std::pow(10.0, std::ceil(std::log10(y_hi)));
    if (y_hi <= y_lo) y_hi = y_lo * 10;
  }
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x_lo) / (x_hi - x_lo) * pw; };
  auto py = [&](double y) {
    const double f = spec.log_y ? (std::log10(y) - std::log10(y_lo)) / (std::log10(y_hi) - std::log10(y_lo))
                                : (y - y_lo) / (y_hi - y_lo);
    return kTop + (1.0 - f) * ph;
  };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
    << escape(spec.title) << "</text>\n";
  o << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(kTop) << "\" width=\"" << num(pw) << "\" height=\"" << num(ph)
    << "\" fill=\"none\" stroke=\"black\"/>\n";

  for (double t : linear_ticks(x_lo, x_hi)) {
    o << "<line x1=\"" << num(px(t)) << "\" y1=\"" << num(kTop + ph) << "\" x2=\"" << num(px(t)) << "\" y2=\""
      << num(kTop + ph + 5) << "\" stroke=\"black\"/>";
    o << "<text x=\"" << num(px(t)) << "\" y=\"" << num(kTop + ph + 18) << "\" text-anchor=\"middle\">"
      << tick_label(t) << "</text>\n";
  }
  std::vector<double> y_ticks;
  if (spec.log_y)
    for (double t = y_lo; t <= y_hi * (1 + 1e-9); t *= 10) y_ticks.push_back(t);
  else
    y_ticks = linear_ticks(y_lo, y_hi);
  for (double t : y_ticks) {
    o << "<line x1=\"" << num(kLeft - 5) << "\" y1=\"" << num(py(t)) << "\" x2=\"" << num(kLeft + pw) << "\" y2=\""
      << num(py(t)) << "\" stroke=\"#dddddd\"/>";
    o << "<text x=\"" << num(kLeft - 8) << "\" y=\"" << num(py(t) + 4) << "\" text-anchor=\"end\">" << tick_label(t)
      << "</text>\n";
  }
  o << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"" << num(kHeight - 15) << "\" text-anchor=\"middle\">"
    << escape(spec.x_label) << "</text>\n";
  o << "<text transform=\"translate(18," << num(kTop + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
    << escape(spec.y_label) << "</text>\n";

  const double bar_w = spec.bars ? pw / (x_hi - x_lo) * 0.8 / static_cast<double>(std::max<std::size_t>(1, spec.series.size())) : 0;
  for (std::size_t i = 0; i < spec.series.size(); ++i) {
    const auto& s = spec.series[i];
    const char* color = kColors[i % std::size(kColors)];
    if (spec.bars) {
      for (auto [x, y] : s.points) {
        if (spec.log_y && y <= 0.0) continue;
        const double x0 = px(x) - bar_w * static_cast<double>(spec.series.size()) / 2 + bar_w * static_cast<double>(i);
        o << "<rect x=\"" << num(x0) << "\" y=\"" << num(py(y)) << "\" width=\"" << num(bar_w) << "\" height=\""
          << num(kTop + ph - py(y)) << "\" fill=\"" << color << "\"/>\n";
      }
    } else {
      o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\"";
      if (s.dashed) o << " stroke-dasharray=\"5,4\"";
      o << " points=\"";
      bool first = true;
      for (auto [x, y] : s.points) {
        if (spec.log_y && y <= 0.0) continue;
        o << (first ? "" : " ") << num(px(x)) << ',' << num(py(y));
        first = false;
      }
      o << "\"/>\n";
    }
    const double ly = kTop + 10 + 16 * static_cast<double>(i);
    o << "<rect x=\"" << num(kLeft + pw + 12) << "\" y=\"" << num(ly - 8) << "\" width=\"10\" height=\"10\" fill=\""
      << color << "\"/>";
    o << "<text x=\"" << num(kLeft + pw + 27) << "\" y=\"" << num(ly + 1) << "\">" << escape(s.label) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::string lifespan_svg(const LifespanHistogram& histogram) {
  PlotSpec spec{"Users by active quarters", "active quarters", "users (log scale)", true, true, {}};
  PlotSeries s{"users", {}, false};
  for (auto [q, n] : histogram) s.points.emplace_back(q, static_cast<double>(n));
  spec.series.push_back(std::move(s));
  return render_plot(spec);
}

std::string topic_evolution_svg(const DtmModel& model, int k, std::size_t terms) {
  PlotSpec spec{"Role " + std::to_string(k) + " over time", "quarter", "probability", false, false, {}};
  // rank terms by their mean weight over the slices
  const Eigen::MatrixXd track = topic_track(model, k);
  const Eigen::VectorXd mean = track.colwise().mean();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(mean.size()));
  for (Eigen::Index v = 0; v < mean.size(); ++v) order[static_cast<std::size_t>(v)] = v;
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return mean(a) > mean(b); });
  order.resize(std::min(order.size(), terms));
  for (auto v : order) {
    PlotSeries s{model.vocabulary().name(static_cast<std::size_t>(v)), {}, false};
    for (Eigen::Index t = 0; t < track.rows(); ++t) s.points.emplace_back(static_cast<double>(t), track(t, v));
    spec.series.push_back(std::move(s));
  }
  return render_plot(spec);
}

std::string window_metrics_svg(const std::map<int, EvalReport>& per_window) {
  PlotSpec spec{"Churn prediction per window", "window", "value", false, false, {}};
  const std::pair<const char*, Metric EvalReport::*> metrics[] = {{"TP rate", &EvalReport::tp_rate},
                                                                 {"FP rate", &EvalReport::fp_rate},
                                                                 {"precision", &EvalReport::precision},
                                                                 {"F-measure", &EvalReport::f_measure},
                                                                 {"ROC area", &EvalReport::roc_auc}};
  for (const auto& [name, member] : metrics) {
    PlotSeries s{name, {}, false};
    for (const auto& [w, report] : per_window) {
      const Metric& m = report.*member;
      if (m.defined()) s.points.emplace_back(w, m.value());
    }
    spec.series.push_back(std::move(s));
  }
  return render_plot(spec);
}

std::string lift_svg(const LiftCurve& curve) {
  PlotSpec spec{"Cumulative gains", "share of users targeted", "share of churners captured", false, false, {}};
  PlotSeries model{"model", {{0.0, 0.0}}, false};
  for (const auto& p : curve.points) model.points.emplace_back(p.fraction, p.lift * p.fraction);
  spec.series.push_back(std::move(model));
  spec.series.push_back({"baseline", {{0.0, 0.0}, {1.0, 1.0}}, true});
  return render_plot(spec);
}

}  // namespace rolespace
