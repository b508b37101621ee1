#include "phyulstm/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace phyulstm {

std::string Shape::to_string() const {
  return "(" + std::to_string(batch) + ", " + std::to_string(time) + ", " +
         std::to_string(channels) + ")";
}

Grid3::Grid3(Shape shape, double fill) : shape_(shape), data_(shape.size(), fill) {}

Grid3::Grid3(Shape shape, std::vector<double> data) : shape_(shape), data_(data.begin(), data.end()) {
  if (data_.size() != shape_.size()) {
    throw std::invalid_argument("Grid3: data length " + std::to_string(data_.size()) +
                                " does not match shape " + shape_.to_string());
  }
}

Grid3 Grid3::from_series(std::span<const double> series) {
  Grid3 g({1, series.size(), 1});
  std::copy(series.begin(), series.end(), g.data_.begin());
  return g;
}

void Grid3::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Grid3::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::vector<double> Grid3::series(std::size_t b, std::size_t c) const {
  std::vector<double> out(shape_.time);
  for (std::size_t t = 0; t < shape_.time; ++t) out[t] = at(b, t, c);
  return out;
}

}  // namespace phyulstm
