#include "stlmc/quadrature.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <cmath>

namespace stlmc {

namespace {

constexpr std::size_t panel_order = 8;

void axis_rule(double lo, double hi, std::size_t n, QuadratureRule rule, std::vector<double>& x,
               std::vector<double>& w) {
  x.clear();
  w.clear();
  if (rule == QuadratureRule::trapezoid) {
    const double h = (hi - lo) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
      x.push_back(lo + h * static_cast<double>(i));
      w.push_back(i == 0 || i + 1 == n ? h / 2 : h);
    }
    return;
  }
  using gauss = boost::math::quadrature::gauss<double, panel_order>;
  const auto& abscissa = gauss::abscissa();
  const auto& weights = gauss::weights();
  const std::size_t panels = n / panel_order;
  const double width = (hi - lo) / static_cast<double>(panels);
  for (std::size_t p = 0; p < panels; ++p) {
    const double mid = lo + width * (static_cast<double>(p) + 0.5);
    const double half = width / 2;
    // abscissa() holds the positive half of the symmetric rule.
    for (std::size_t i = abscissa.size(); i-- > 0;) {
      x.push_back(mid - half * abscissa[i]);
      w.push_back(half * weights[i]);
    }
    for (std::size_t i = 0; i < abscissa.size(); ++i) {
      x.push_back(mid + half * abscissa[i]);
      w.push_back(half * weights[i]);
    }
  }
}

}  // namespace

QuadratureGrid::QuadratureGrid(std::vector<std::array<double, 2>> bounds, std::size_t nodes_per_axis,
                               QuadratureRule rule)
    : bounds_(std::move(bounds)), rule_(rule) {
  if (bounds_.empty() || bounds_.size() > 2) {
    throw Error(ErrorCode::invalid_argument, "QuadratureGrid: only 1D and 2D grids are supported");
  }
  if (nodes_per_axis < min_nodes) {
    throw Error(ErrorCode::invalid_argument,
                "QuadratureGrid: at least " + std::to_string(min_nodes) + " nodes per axis required");
  }
  for (const auto& b : bounds_) {
    if (!(b[0] < b[1]) || !std::isfinite(b[0]) || !std::isfinite(b[1])) {
      throw Error(ErrorCode::invalid_argument, "QuadratureGrid: bounds must be finite with lo < hi");
    }
  }
  if (rule_ == QuadratureRule::gauss_legendre) {
    nodes_per_axis = (nodes_per_axis + panel_order - 1) / panel_order * panel_order;
  }
  nodes_.resize(bounds_.size());
  weights_.resize(bounds_.size());
  for (std::size_t a = 0; a < bounds_.size(); ++a) {
    axis_rule(bounds_[a][0], bounds_[a][1], nodes_per_axis, rule_, nodes_[a], weights_[a]);
  }
}

QuadratureGrid QuadratureGrid::cube(int dim, double lo, double hi, std::size_t nodes_per_axis,
                                    QuadratureRule rule) {
  if (dim != 1 && dim != 2) {
    throw Error(ErrorCode::invalid_argument, "QuadratureGrid: only 1D and 2D grids are supported");
  }
  return QuadratureGrid(std::vector<std::array<double, 2>>(static_cast<std::size_t>(dim), {lo, hi}),
                        nodes_per_axis, rule);
}

std::size_t QuadratureGrid::size() const noexcept {
  std::size_t n = 1;
  for (const auto& a : nodes_) n *= a.size();
  return n;
}

const std::vector<double>& QuadratureGrid::axis_nodes(int axis) const { return nodes_.at(static_cast<std::size_t>(axis)); }

const std::vector<double>& QuadratureGrid::axis_weights(int axis) const {
  return weights_.at(static_cast<std::size_t>(axis));
}

Vec QuadratureGrid::node(std::size_t k) const {
  const std::size_t n = nodes_[0].size();
  Vec x(dim());
  if (dim() == 1) {
    x[0] = nodes_[0][k];
  } else {
    x[0] = nodes_[0][k / n];
    x[1] = nodes_[1][k % n];
  }
  return x;
}

double QuadratureGrid::weight(std::size_t k) const {
  const std::size_t n = nodes_[0].size();
  return dim() == 1 ? weights_[0][k] : weights_[0][k / n] * weights_[1][k % n];
}

std::vector<double> QuadratureGrid::evaluate(const std::function<double(const Vec&)>& fn) const {
  std::vector<double> out(size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = fn(node(k));
  return out;
}

double QuadratureGrid::integrate(const std::function<double(const Vec&)>& fn) const { return sum(evaluate(fn)); }

double QuadratureGrid::sum(const std::vector<double>& values) const {
  if (values.size() != size()) {
    throw Error(ErrorCode::dimension_mismatch, "QuadratureGrid::sum: value count does not match the grid");
  }
  double s = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) s += weight(k) * values[k];
  return s;
}

}  // namespace stlmc
