#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ctpoir/error.hpp"

namespace ctpoir {

struct Dims {
  int nx = 1;
  int ny = 1;
  int nz = 1;

  std::size_t voxels() const { return std::size_t(nx) * ny * nz; }
  std::size_t slice_size() const { return std::size_t(nx) * ny; }
  bool contains(int x, int y, int z) const {
    return x >= 0 && y >= 0 && z >= 0 && x < nx && y < ny && z < nz;
  }
  friend bool operator==(const Dims&, const Dims&) = default;
};

// Millimetres per voxel along each axis; z is the slice step.
struct Spacing {
  double sx = 1.0;
  double sy = 1.0;
  double sz = 1.0;

  double voxel_mm3() const { return sx * sy * sz; }
  friend bool operator==(const Spacing&, const Spacing&) = default;
};

struct Voxel {
  int x = 0;
  int y = 0;
  int z = 0;
  friend bool operator==(const Voxel&, const Voxel&) = default;
};

inline void validate_geometry(const Dims& d, const Spacing& s) {
  if (d.nx < 1 || d.ny < 1 || d.nz < 1)
    throw Error(ErrorKind::InvalidArgument, "dims must be >= 1 on every axis");
  if (!(s.sx > 0) || !(s.sy > 0) || !(s.sz > 0))
    throw Error(ErrorKind::InvalidArgument, "spacing must be > 0 on every axis");
}

// Dense voxel grid stored x-fastest, then y, then z.
template <typename T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  Grid(Dims dims, Spacing spacing, T fill = T{})
      : dims_(dims), spacing_(spacing), data_((validate_geometry(dims, spacing), dims.voxels()), fill) {}
  Grid(Dims dims, Spacing spacing, std::vector<T> data)
      : dims_(dims), spacing_(spacing), data_(std::move(data)) {
    validate_geometry(dims_, spacing_);
    if (data_.size() != dims_.voxels())
      throw Error(ErrorKind::InvalidArgument, "voxel buffer size does not match dims");
  }

  const Dims& dims() const { return dims_; }
  const Spacing& spacing() const { return spacing_; }
  std::size_t size() const { return data_.size(); }

  std::size_t index(int x, int y, int z) const {
    return (std::size_t(z) * dims_.ny + y) * dims_.nx + x;
  }
  Voxel coord(std::size_t i) const {
    const auto plane = dims_.slice_size();
    const int z = int(i / plane);
    const auto rem = i % plane;
    return {int(rem % dims_.nx), int(rem / dims_.nx), z};
  }

  T& operator()(int x, int y, int z) { return data_[index(x, y, z)]; }
  const T& operator()(int x, int y, int z) const { return data_[index(x, y, z)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> slice(int z) {
    return std::span<T>(data_).subspan(std::size_t(z) * dims_.slice_size(), dims_.slice_size());
  }
  std::span<const T> slice(int z) const {
    return std::span<const T>(data_).subspan(std::size_t(z) * dims_.slice_size(), dims_.slice_size());
  }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  template <typename U>
  bool same_geometry(const Grid<U>& other) const {
    return dims_ == other.dims();
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  Dims dims_{};
  Spacing spacing_{};
  std::vector<T> data_;
};

// Signed 16-bit Hounsfield values.
struct CtVolume : Grid<std::int16_t> {
  using Grid<std::int16_t>::Grid;
  CtVolume(Grid<std::int16_t> g, std::string id) : Grid<std::int16_t>(std::move(g)), case_id(std::move(id)) {}

  std::string case_id;
  friend bool operator==(const CtVolume&, const CtVolume&) = default;
};

// 8-bit grayscale rendering of a clipped CT volume.
struct GrayVolume : Grid<std::uint8_t> {
  using Grid<std::uint8_t>::Grid;
};

// One byte per voxel, strictly 0 or 1.
struct BinaryMask3D : Grid<std::uint8_t> {
  using Grid<std::uint8_t>::Grid;

  template <typename U>
  static BinaryMask3D like(const Grid<U>& g) {
    return BinaryMask3D(g.dims(), g.spacing());
  }

  std::size_t count() const {
    std::size_t n = 0;
    for (auto b : data()) n += b;
    return n;
  }
  bool empty() const { return count() == 0; }
};

// Per-voxel foreground probability in [0, 1].
struct ProbabilityMap3D : Grid<float> {
  using Grid<float>::Grid;
};

template <typename A, typename B>
void require_same_dims(const Grid<A>& a, const Grid<B>& b, const char* what = "grids") {
  if (!(a.dims() == b.dims())) throw Error(ErrorKind::DimMismatch, std::string(what) + " have different dims");
}

}  // namespace ctpoir
