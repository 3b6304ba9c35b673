#include "polysafe/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "polysafe/error.hpp"

namespace polysafe {

Box Box::scaled(double factor) const {
  const Eigen::VectorXd c = 0.5 * (lo + hi);
  const Eigen::VectorXd h = 0.5 * (hi - lo) * factor;
  return Box{c - h, c + h};
}

bool Box::contains(const Eigen::VectorXd& x) const {
  return (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
}

namespace {

double eval_at(const CompiledPolynomial& p, const Eigen::VectorXd& x) {
  return p(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
}

}  // namespace

double first_exit(const CompiledPolynomial& p, const Eigen::VectorXd& origin,
                  const Eigen::VectorXd& dir, double max_t) {
  double prev = 0.0;
  double t = 1e-3;
  while (true) {
    const double tt = std::min(t, max_t);
    if (eval_at(p, origin + tt * dir) < 0.0) {
      double a = prev, b = tt;
      for (int k = 0; k < 60; ++k) {
        const double mid = 0.5 * (a + b);
        if (eval_at(p, origin + mid * dir) < 0.0) {
          b = mid;
        } else {
          a = mid;
        }
      }
      return a;
    }
    if (tt >= max_t) return max_t;
    prev = tt;
    t = tt < 1.0 ? tt + 1e-3 * std::max(1.0, tt * 10) : tt * 1.01;
  }
}

std::vector<Eigen::VectorXd> probe_directions(int n, int extra) {
  std::vector<Eigen::VectorXd> dirs;
  for (int i = 0; i < n; ++i) {
    for (double sgn : {1.0, -1.0}) {
      Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
      d(i) = sgn;
      dirs.push_back(d);
    }
  }
  std::mt19937_64 rng(0x5eed);
  std::normal_distribution<double> normal;
  for (int k = 0; k < extra; ++k) {
    Eigen::VectorXd d(n);
    for (int i = 0; i < n; ++i) d(i) = normal(rng);
    const double norm = d.norm();
    if (norm > 0) dirs.push_back(d / norm);
  }
  return dirs;
}

Box bounding_box(const Polynomial& p, const Variables& vars,
                 const Eigen::VectorXd& center, double max_t) {
  const CompiledPolynomial cp(p, vars);
  if (eval_at(cp, center) < 0.0) {
    throw Error("bounding box: the center point is outside the set");
  }
  Box box{center, center};
  for (const auto& d : probe_directions(static_cast<int>(vars.size()))) {
    const Eigen::VectorXd x = center + first_exit(cp, center, d, max_t) * d;
    box.lo = box.lo.cwiseMin(x);
    box.hi = box.hi.cwiseMax(x);
  }
  return box;
}

Box bounding_box(const Polynomial& p, const Variables& vars) {
  return bounding_box(p, vars, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(vars.size())));
}

double inscribed_radius(const Polynomial& p, const Variables& vars) {
  const auto n = static_cast<Eigen::Index>(vars.size());
  const CompiledPolynomial cp(p, vars);
  const Eigen::VectorXd origin = Eigen::VectorXd::Zero(n);
  if (eval_at(cp, origin) < 0.0) return 0.0;
  double r = std::numeric_limits<double>::infinity();
  for (const auto& d : probe_directions(static_cast<int>(n))) {
    r = std::min(r, first_exit(cp, origin, d));
  }
  return r;
}

double sampled_outer_radius(const Polynomial& p, const Variables& vars,
                            const Box& box, int samples, std::uint64_t seed) {
  const CompiledPolynomial cp(p, vars);
  double r = 0.0;
  bool any = eval_at(cp, Eigen::VectorXd::Zero(box.dim())) >= 0.0;
  std::mt19937_64 rng(seed);
  for (const auto& x : sample_box(box, samples, rng)) {
    if (eval_at(cp, x) >= 0.0) {
      r = std::max(r, x.norm());
      any = true;
    }
  }
  return any ? r : 0.0;
}

std::vector<Eigen::VectorXd> sample_box(const Box& box, int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Eigen::VectorXd> out;
  out.reserve(static_cast<std::size_t>(std::max(n, 0)));
  for (int k = 0; k < n; ++k) {
    Eigen::VectorXd x(box.dim());
    for (Eigen::Index i = 0; i < box.dim(); ++i) {
      x(i) = box.lo(i) + unif(rng) * (box.hi(i) - box.lo(i));
    }
    out.push_back(std::move(x));
  }
  return out;
}

}  // namespace polysafe
