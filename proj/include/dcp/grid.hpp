#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "prediction_set.hpp"
#include "rng.hpp"

namespace dcp {

// Finite, strictly increasing set of response values. The grid also owns the
// induced partition of the real line: cell m runs from the midpoint below
// point m to the midpoint above it, half-open as [lo, hi), with the first
// cell reaching down to -inf and the last up to +inf. A boundary value
// therefore belongs to the cell above it.
class Grid {
 public:
  explicit Grid(std::vector<double> points) : points_(std::move(points)) {
    if (points_.empty()) throw std::invalid_argument("grid: needs at least one point");
    for (double v : points_)
      if (!std::isfinite(v)) throw std::invalid_argument("grid: points must be finite");
    for (std::size_t m = 1; m < points_.size(); ++m)
      if (!(points_[m - 1] < points_[m]))
        throw std::invalid_argument("grid: points must be strictly increasing");
    bounds_.reserve(points_.size() - 1);
    for (std::size_t m = 1; m < points_.size(); ++m)
      bounds_.push_back((points_[m - 1] + points_[m]) / 2.0);
  }

  std::size_t size() const { return points_.size(); }
  const std::vector<double>& points() const { return points_; }
  double point(std::size_t m) const { return points_.at(m); }
  const std::vector<double>& inner_boundaries() const { return bounds_; }

  double lower_boundary(std::size_t m) const {
    check_index(m);
    return m == 0 ? -kInf : bounds_[m - 1];
  }

  double upper_boundary(std::size_t m) const {
    check_index(m);
    return m + 1 == points_.size() ? kInf : bounds_[m];
  }

  Interval cell(std::size_t m) const {
    const double lo = lower_boundary(m);
    const double hi = upper_boundary(m);
    return Interval{lo, hi, !std::isfinite(lo), true};
  }

  // Index of the cell containing y: nearest grid point, boundaries rounding
  // to the cell above.
  std::size_t cell_index(double y) const {
    return static_cast<std::size_t>(
        std::upper_bound(bounds_.begin(), bounds_.end(), y) - bounds_.begin());
  }

  bool uniform(double rel_tol = 1e-9) const {
    if (points_.size() < 2) return true;
    const double first = points_[1] - points_[0];
    for (std::size_t m = 2; m < points_.size(); ++m) {
      const double gap = points_[m] - points_[m - 1];
      if (std::abs(gap - first) > rel_tol * std::max(std::abs(first), std::abs(gap)))
        return false;
    }
    return true;
  }

  // Inter-point spacing of a uniform grid with at least two points.
  double spacing() const {
    if (points_.size() < 2) throw std::invalid_argument("grid: spacing needs two points");
    if (!uniform()) throw std::invalid_argument("grid: spacing undefined for uneven grids");
    return points_[1] - points_[0];
  }

  // Finite window used when reporting lengths of sets whose edge cells are
  // unbounded: each edge extends half the adjacent gap beyond its point.
  ClipWindow reporting_window() const {
    if (points_.size() == 1) return {points_[0] - 0.5, points_[0] + 0.5};
    const double lo = points_.front() - (bounds_.front() - points_.front());
    const double hi = points_.back() + (points_.back() - bounds_.back());
    return {lo, hi};
  }

 private:
  void check_index(std::size_t m) const {
    if (m >= points_.size()) throw std::out_of_range("grid: point index out of range");
  }

  std::vector<double> points_;
  std::vector<double> bounds_;
};

// M cell midpoints of [y_min, y_max]: y_min + (k - 0.5) * (y_max - y_min) / M.
inline Grid make_grid(double y_min, double y_max, int m_points) {
  if (!(y_min < y_max)) throw std::invalid_argument("make_grid: need y_min < y_max");
  if (!std::isfinite(y_min) || !std::isfinite(y_max))
    throw std::invalid_argument("make_grid: range must be finite");
  if (m_points < 1) throw std::invalid_argument("make_grid: need at least one point");
  const double step = (y_max - y_min) / m_points;
  std::vector<double> pts(static_cast<std::size_t>(m_points));
  for (int k = 0; k < m_points; ++k)
    pts[static_cast<std::size_t>(k)] = y_min + (k + 0.5) * step;
  return Grid(std::move(pts));
}

enum class RoundingMode { kNearest, kRandomized };

// Maps responses onto grid points. Nearest mode is the grid's own partition.
// Randomized mode rounds an interior y to one of its two bracketing points
// with probabilities proportional to closeness (unbiased for interior y) and
// clamps values outside the range to the nearest end point. Holds RNG state,
// so concurrent use needs one instance per thread.
class Discretizer {
 public:
  explicit Discretizer(Grid grid, RoundingMode mode = RoundingMode::kNearest,
                       std::uint64_t seed = 0)
      : grid_(std::move(grid)), mode_(mode), gen_(mix_keys(seed, hash_tag("discretizer"))) {}

  const Grid& grid() const { return grid_; }
  RoundingMode mode() const { return mode_; }

  double discretize(double y) {
    if (!std::isfinite(y)) throw std::invalid_argument("discretize: value must be finite");
    const std::vector<double>& pts = grid_.points();
    if (mode_ == RoundingMode::kNearest) return pts[grid_.cell_index(y)];
    if (y <= pts.front()) return pts.front();
    if (y >= pts.back()) return pts.back();
    const std::size_t above = static_cast<std::size_t>(
        std::upper_bound(pts.begin(), pts.end(), y) - pts.begin());
    const double lo = pts[above - 1];
    const double hi = pts[above];
    if (y == lo) return lo;
    const double u = (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53;
    return u < (hi - y) / (hi - lo) ? lo : hi;
  }

 private:
  Grid grid_;
  RoundingMode mode_;
  std::mt19937_64 gen_;
};

// Cell of values that round to the given grid point under nearest rounding.
// Only defined for deterministic discretizers; the randomized scheme has no
// single-valued inverse.
inline Interval preimage_cell(const Discretizer& d, double grid_point) {
  if (d.mode() != RoundingMode::kNearest)
    throw std::invalid_argument("preimage_cell: discretizer must use nearest rounding");
  const std::vector<double>& pts = d.grid().points();
  const auto it = std::lower_bound(pts.begin(), pts.end(), grid_point);
  if (it == pts.end() || *it != grid_point)
    throw std::out_of_range("preimage_cell: value is not a grid point");
  return d.grid().cell(static_cast<std::size_t>(it - pts.begin()));
}

}  // namespace dcp
