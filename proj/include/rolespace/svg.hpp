#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "rolespace/dtm.hpp"
#include "rolespace/evaluate.hpp"
#include "rolespace/ingest.hpp"

namespace rolespace {

struct PlotSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;
  bool dashed = false;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = false;
  /// Draw points as bars from the axis instead of connected lines.
  bool bars = false;
  std::vector<PlotSeries> series;
};

/// Standalone SVG document; output depends only on the spec.
std::string render_plot(const PlotSpec& spec);

/// Users per number of active quarters, log-scaled counts.
std::string lifespan_svg(const LifespanHistogram& histogram);

/// Probability of the top `terms` namespaces of topic k over the slices.
std::string topic_evolution_svg(const DtmModel& model, int k, std::size_t terms);

/// TP rate, FP rate, precision, F-measure and ROC AUC per sliding window.
std::string window_metrics_svg(const std::map<int, EvalReport>& per_window);

/// Cumulative share of churners captured against the share of users targeted,
/// with the diagonal of a random ranking.
std::string lift_svg(const LiftCurve& curve);

}  // namespace rolespace
