#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <vector>

#include "isg/field_net.hpp"
#include "isg/graph.hpp"
#include "isg/rng.hpp"

namespace isg::testing {

// Erdos-Renyi-style random graph; may be disconnected.
inline Graph random_graph(int n, double p, std::uint64_t seed) {
  EdgeList edges;
  std::uint64_t draw = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (rng::uniform(seed, draw++) < p) {
        edges.emplace_back(i, j);
      }
    }
  }
  return build_graph(n, edges);
}

inline Eigen::MatrixXd random_features(int rows, int cols, std::uint64_t seed) {
  Eigen::MatrixXd f(rows, cols);
  std::uint64_t draw = 0;
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) {
      f(r, c) = 2.0 * rng::uniform(seed, draw++) - 1.0;
    }
  }
  return f;
}

inline Eigen::VectorXd random_vector(int n, double scale, std::uint64_t seed) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) {
    v[i] = scale * (2.0 * rng::uniform(seed, static_cast<std::uint64_t>(i)) - 1.0);
  }
  return v;
}

// Central finite differences of a scalar function over a flat parameter
// vector; the independent oracle for every gradient check.
inline Eigen::VectorXd finite_difference_gradient(
    const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& at,
    double step = 1e-5) {
  Eigen::VectorXd grad(at.size());
  Eigen::VectorXd probe = at;
  for (Eigen::Index i = 0; i < at.size(); ++i) {
    probe[i] = at[i] + step;
    const double hi = f(probe);
    probe[i] = at[i] - step;
    const double lo = f(probe);
    probe[i] = at[i];
    grad[i] = (hi - lo) / (2.0 * step);
  }
  return grad;
}

// Max elementwise relative error with a small floor so near-zero entries are
// compared absolutely at the floor scale.
inline double max_relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                                 double floor = 1e-3) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

}  // namespace isg::testing
