#pragma once

#include <cstddef>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace phyulstm {

/// Extents of a batch x time x channel array. Parameter arrays reuse the
/// same three axes as generic dimensions (e.g. conv weights are K x Cin x Cout).
struct Shape {
  std::size_t batch = 0;
  std::size_t time = 0;
  std::size_t channels = 0;

  constexpr std::size_t size() const { return batch * time * channels; }
  friend constexpr bool operator==(const Shape&, const Shape&) = default;

  std::string to_string() const;
};

/// Cache-line aligned storage. Vectorized kernels peel differently depending
/// on the start address, so a fixed alignment keeps results bitwise
/// reproducible from run to run.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

  template <class U>
  friend bool operator==(const AlignedAllocator&, const AlignedAllocator<U>&) {
    return true;
  }
};

using AlignedBuffer = std::vector<double, AlignedAllocator<double>>;

/// Dense row-major [batch][time][channel] array of doubles.
class Grid3 {
 public:
  Grid3() = default;
  explicit Grid3(Shape shape, double fill = 0.0);
  Grid3(Shape shape, std::vector<double> data);

  /// Wraps a single series as a (1, T, 1) grid.
  static Grid3 from_series(std::span<const double> series);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t batch() const { return shape_.batch; }
  std::size_t time() const { return shape_.time; }
  std::size_t channels() const { return shape_.channels; }

  double& at(std::size_t b, std::size_t t, std::size_t c) {
    return data_[(b * shape_.time + t) * shape_.channels + c];
  }
  double at(std::size_t b, std::size_t t, std::size_t c) const {
    return data_[(b * shape_.time + t) * shape_.channels + c];
  }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double* ptr() { return data_.data(); }
  const double* ptr() const { return data_.data(); }

  void fill(double value);
  bool all_finite() const;

  /// Copies out channel `c` of batch entry `b` as a contiguous series.
  std::vector<double> series(std::size_t b, std::size_t c) const;

  /// Exact (bitwise for non-NaN values) comparison of shape and data.
  friend bool operator==(const Grid3&, const Grid3&) = default;

 private:
  Shape shape_{};
  AlignedBuffer data_;
};

}  // namespace phyulstm
