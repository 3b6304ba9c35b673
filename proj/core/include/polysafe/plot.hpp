#pragma once

// SVG phase-plane plots: sampled states plus zero-level curves.

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "polysafe/polynomial.hpp"
#include "polysafe/sampling.hpp"

namespace polysafe {

struct PlotCurve {
  /// The curve drawn is {level_set = 0} over the first two variables.
  Polynomial level_set;
  std::string label;
  std::string color;
};

struct PlotOptions {
  int width = 640;
  int height = 640;
  /// Marching-squares grid per axis.
  int resolution = 200;
  /// Scatter points beyond this are thinned by striding.
  std::size_t max_points = 5000;
};

/// Contour segments of p = 0 on a res x res grid over the box, as
/// (x0, y0, x1, y1) in data coordinates.
std::vector<Eigen::Vector4d> zero_contour(const Polynomial& p, const Variables& vars,
                                          const Box& box, int res);

/// `vars` names the two plotted coordinates; points are projected onto them.
std::string render_svg(const Variables& vars, const Box& box,
                       const std::vector<Eigen::VectorXd>& points,
                       const std::vector<PlotCurve>& curves, const PlotOptions& opts = {});

}  // namespace polysafe
