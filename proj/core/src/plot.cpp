#include "polysafe/plot.hpp"

#include <cmath>
#include <sstream>

#include "polysafe/error.hpp"

namespace polysafe {

std::vector<Eigen::Vector4d> zero_contour(const Polynomial& p, const Variables& vars,
                                          const Box& box, int res) {
  if (vars.size() != 2 || box.dim() != 2) throw DimensionError("contours need two variables");
  const CompiledPolynomial cp(p, vars);
  const double dx = (box.hi(0) - box.lo(0)) / res;
  const double dy = (box.hi(1) - box.lo(1)) / res;
  Eigen::MatrixXd f(res + 1, res + 1);
  for (int i = 0; i <= res; ++i) {
    for (int j = 0; j <= res; ++j) {
      const double pt[2] = {box.lo(0) + i * dx, box.lo(1) + j * dy};
      f(i, j) = cp(pt);
    }
  }
  auto cross = [](double a, double b) { return a / (a - b); };
  std::vector<Eigen::Vector4d> out;
  for (int i = 0; i < res; ++i) {
    for (int j = 0; j < res; ++j) {
      const double x0 = box.lo(0) + i * dx, y0 = box.lo(1) + j * dy;
      // Corners counter-clockwise: (0,0) (1,0) (1,1) (0,1).
      const double v[4] = {f(i, j), f(i + 1, j), f(i + 1, j + 1), f(i, j + 1)};
      std::vector<Eigen::Vector2d> hits;
      for (int e = 0; e < 4; ++e) {
        const double a = v[e], b = v[(e + 1) % 4];
        if ((a < 0.0) == (b < 0.0)) continue;
        const double t = cross(a, b);
        switch (e) {
          case 0: hits.emplace_back(x0 + t * dx, y0); break;
          case 1: hits.emplace_back(x0 + dx, y0 + t * dy); break;
          case 2: hits.emplace_back(x0 + (1 - t) * dx, y0 + dy); break;
          default: hits.emplace_back(x0, y0 + (1 - t) * dy); break;
        }
      }
      // Saddle cells give four hits; pair them in order.
      for (std::size_t h = 0; h + 1 < hits.size(); h += 2) {
        out.emplace_back(hits[h](0), hits[h](1), hits[h + 1](0), hits[h + 1](1));
      }
    }
  }
  return out;
}

std::string render_svg(const Variables& vars, const Box& box,
                       const std::vector<Eigen::VectorXd>& points,
                       const std::vector<PlotCurve>& curves, const PlotOptions& opts) {
  const double W = opts.width, H = opts.height;
  auto sx = [&](double x) { return (x - box.lo(0)) / (box.hi(0) - box.lo(0)) * W; };
  auto sy = [&](double y) { return H - (y - box.lo(1)) / (box.hi(1) - box.lo(1)) * H; };
  std::ostringstream os;
  os.precision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H + 40
     << "\" viewBox=\"0 0 " << W << " " << H + 40 << "\">\n";
  os << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\" stroke=\"black\"/>\n";
  if (box.lo(0) < 0 && box.hi(0) > 0) {
    os << "<line x1=\"" << sx(0) << "\" y1=\"0\" x2=\"" << sx(0) << "\" y2=\"" << H
       << "\" stroke=\"#ccc\"/>\n";
  }
  if (box.lo(1) < 0 && box.hi(1) > 0) {
    os << "<line x1=\"0\" y1=\"" << sy(0) << "\" x2=\"" << W << "\" y2=\"" << sy(0)
       << "\" stroke=\"#ccc\"/>\n";
  }
  const std::size_t stride = points.size() > opts.max_points ? points.size() / opts.max_points + 1 : 1;
  os << "<g fill=\"#1f77b4\" fill-opacity=\"0.4\">\n";
  for (std::size_t i = 0; i < points.size(); i += stride) {
    os << "<circle cx=\"" << sx(points[i](0)) << "\" cy=\"" << sy(points[i](1)) << "\" r=\"1.2\"/>\n";
  }
  os << "</g>\n";
  int legend = 0;
  for (const auto& c : curves) {
    os << "<g stroke=\"" << c.color << "\" stroke-width=\"1.5\">\n";
    for (const auto& s : zero_contour(c.level_set, vars, box, opts.resolution)) {
      os << "<line x1=\"" << sx(s(0)) << "\" y1=\"" << sy(s(1)) << "\" x2=\"" << sx(s(2))
         << "\" y2=\"" << sy(s(3)) << "\"/>\n";
    }
    os << "</g>\n";
    os << "<text x=\"" << 10 + 150 * legend << "\" y=\"" << H + 25 << "\" fill=\"" << c.color
       << "\" font-size=\"14\">" << c.label << "</text>\n";
    ++legend;
  }
  os << "<text x=\"" << W - 30 << "\" y=\"" << H - 5 << "\" font-size=\"12\">" << vars[0].name()
     << "</text>\n";
  os << "<text x=\"5\" y=\"15\" font-size=\"12\">" << vars[1].name() << "</text>\n";
  os << "</svg>\n";
  return os.str();
}

}  // namespace polysafe
