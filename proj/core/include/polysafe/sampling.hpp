#pragma once

// Geometry helpers over semialgebraic sets {p >= 0}: ray bracketing,
// bounding boxes and uniform sampling.

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "polysafe/polynomial.hpp"

namespace polysafe {

struct Box {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  Eigen::Index dim() const { return lo.size(); }
  /// Same center, every half-width multiplied by factor.
  Box scaled(double factor) const;
  bool contains(const Eigen::VectorXd& x) const;
};

/// Smallest t in (0, max_t] with p(origin + t * dir) < 0, located by
/// geometric marching and bisection; max_t when none is found.
double first_exit(const CompiledPolynomial& p, const Eigen::VectorXd& origin,
                  const Eigen::VectorXd& dir, double max_t = 1e3);

/// Deterministic direction set: the 2n signed axes plus `extra` random unit
/// vectors from a fixed seed.
std::vector<Eigen::VectorXd> probe_directions(int n, int extra = 256);

/// Bounding box of {p >= 0} seen from `center` (which must satisfy
/// p >= 0): coordinate-axis root bracketing plus a ray sweep.
Box bounding_box(const Polynomial& p, const Variables& vars,
                 const Eigen::VectorXd& center, double max_t = 1e3);
/// Convenience overload centered at the origin.
Box bounding_box(const Polynomial& p, const Variables& vars);

/// Radius of the largest origin-centered ball found inside {p >= 0}
/// (0 when p(0) < 0).
double inscribed_radius(const Polynomial& p, const Variables& vars);

/// Largest |x| over uniform samples of the box that satisfy p >= 0 (the
/// origin is always tried); 0 when none does.
double sampled_outer_radius(const Polynomial& p, const Variables& vars,
                            const Box& box, int samples, std::uint64_t seed);

std::vector<Eigen::VectorXd> sample_box(const Box& box, int n, std::mt19937_64& rng);

}  // namespace polysafe
