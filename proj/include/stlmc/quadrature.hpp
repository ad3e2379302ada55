#pragma once

#include "stlmc/types.hpp"

#include <array>
#include <functional>
#include <vector>

namespace stlmc {

enum class QuadratureRule { trapezoid, gauss_legendre };

/// Tensor-product rule on a box in one or two dimensions. The composite
/// Gauss-Legendre rule uses 8-point panels, so its node count is rounded up
/// to a multiple of 8.
class QuadratureGrid {
 public:
  static constexpr std::size_t min_nodes = 64;

  QuadratureGrid(std::vector<std::array<double, 2>> bounds, std::size_t nodes_per_axis,
                 QuadratureRule rule = QuadratureRule::gauss_legendre);

  /// Box [lo, hi]^dim.
  static QuadratureGrid cube(int dim, double lo, double hi, std::size_t nodes_per_axis,
                             QuadratureRule rule = QuadratureRule::gauss_legendre);

  int dim() const noexcept { return static_cast<int>(bounds_.size()); }
  const std::vector<std::array<double, 2>>& bounds() const noexcept { return bounds_; }
  QuadratureRule rule() const noexcept { return rule_; }
  std::size_t nodes_per_axis() const noexcept { return nodes_[0].size(); }
  /// Total number of tensor nodes.
  std::size_t size() const noexcept;

  const std::vector<double>& axis_nodes(int axis) const;
  const std::vector<double>& axis_weights(int axis) const;

  /// Node k of the tensor grid (row-major, axis 0 slowest).
  Vec node(std::size_t k) const;
  double weight(std::size_t k) const;

  /// fn evaluated at every node, in node order.
  std::vector<double> evaluate(const std::function<double(const Vec&)>& fn) const;
  double integrate(const std::function<double(const Vec&)>& fn) const;
  /// Sum of weight(k) * values[k].
  double sum(const std::vector<double>& values) const;

 private:
  std::vector<std::array<double, 2>> bounds_;
  QuadratureRule rule_;
  std::vector<std::vector<double>> nodes_;
  std::vector<std::vector<double>> weights_;
};

}  // namespace stlmc
