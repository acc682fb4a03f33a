#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <vector>

#include "ctpoir/error.hpp"
#include "ctpoir/grid.hpp"

namespace ctpoir {

// Elementwise a AND NOT b.
inline BinaryMask3D subtract(const BinaryMask3D& a, const BinaryMask3D& b) {
  require_same_dims(a, b, "masks");
  BinaryMask3D out = BinaryMask3D::like(a);
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] && !b[i];
  return out;
}

inline BinaryMask3D mask_union(const BinaryMask3D& a, const BinaryMask3D& b) {
  require_same_dims(a, b, "masks");
  BinaryMask3D out = BinaryMask3D::like(a);
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] || b[i];
  return out;
}

inline BinaryMask3D intersect(const BinaryMask3D& a, const BinaryMask3D& b) {
  require_same_dims(a, b, "masks");
  BinaryMask3D out = BinaryMask3D::like(a);
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] && b[i];
  return out;
}

inline bool is_subset(const BinaryMask3D& a, const BinaryMask3D& b) {
  require_same_dims(a, b, "masks");
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] && !b[i]) return false;
  return true;
}

inline double volume_mm3(const BinaryMask3D& mask) {
  return double(mask.count()) * mask.spacing().voxel_mm3();
}

// Axis-aligned square in pixel coordinates: columns [x0, x0 + side), rows
// [y0, y0 + side).
struct SquareBox {
  int x0 = 0;
  int y0 = 0;
  int side = 0;

  double cx() const { return x0 + (side - 1) / 2.0; }
  double cy() const { return y0 + (side - 1) / 2.0; }
  bool contains(int x, int y) const { return x >= x0 && y >= y0 && x < x0 + side && y < y0 + side; }
  friend bool operator==(const SquareBox&, const SquareBox&) = default;
};

// One 26-connected component of a mask.
struct Region {
  int id = 0;
  std::vector<std::size_t> voxels;  // linear indices, ascending
  int z_min = 0;
  int z_max = 0;
  std::optional<double> score;

  std::size_t size() const { return voxels.size(); }
};

struct Labeling {
  std::vector<std::int32_t> labels;  // 0 = background, k = region id k-1
  int count = 0;
};

namespace mask_detail {

class UnionFind {
 public:
  std::int32_t make() {
    parent_.push_back(std::int32_t(parent_.size()));
    return parent_.back();
  }
  std::int32_t find(std::int32_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  // Keeps the smaller root so a component's root is its earliest label.
  void unite(std::int32_t a, std::int32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent_[b] = a;
  }

 private:
  std::vector<std::int32_t> parent_;
};

}  // namespace mask_detail

// Two-pass union-find labeling with 26-connectivity. Component ids follow
// the raster order (z, then y, then x) of each component's first voxel.
inline Labeling label_components(const BinaryMask3D& mask) {
  const auto& d = mask.dims();
  Labeling out;
  out.labels.assign(mask.size(), 0);
  mask_detail::UnionFind uf;
  std::vector<std::int32_t> provisional(mask.size(), -1);

  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) {
        const auto i = mask.index(x, y, z);
        if (!mask[i]) continue;
        std::int32_t label = -1;
        // The 13 neighbours already visited in raster order.
        for (int dz = -1; dz <= 0; ++dz)
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
              if (dz == 0 && (dy > 0 || (dy == 0 && dx >= 0))) continue;
              const int nx = x + dx, ny = y + dy, nz = z + dz;
              if (!d.contains(nx, ny, nz)) continue;
              const auto n = provisional[mask.index(nx, ny, nz)];
              if (n < 0) continue;
              if (label < 0) label = n;
              else uf.unite(label, n);
            }
        provisional[i] = label < 0 ? uf.make() : label;
      }

  // Roots are the smallest provisional label of each component, and
  // provisional labels are issued in raster order, so numbering roots in
  // increasing order yields raster-order ids.
  std::vector<std::int32_t> final_id;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (provisional[i] < 0) continue;
    const auto root = uf.find(provisional[i]);
    if (std::size_t(root) >= final_id.size()) final_id.resize(std::size_t(root) + 1, -1);
    if (final_id[root] < 0) final_id[root] = out.count++;
    out.labels[i] = final_id[root] + 1;
  }
  return out;
}

inline std::vector<Region> regions_from_labels(const BinaryMask3D& mask, const Labeling& lab) {
  std::vector<Region> regions(std::size_t(lab.count));
  for (int k = 0; k < lab.count; ++k) {
    regions[k].id = k;
    regions[k].z_min = mask.dims().nz;
    regions[k].z_max = -1;
  }
  const auto plane = mask.dims().slice_size();
  for (std::size_t i = 0; i < lab.labels.size(); ++i) {
    if (!lab.labels[i]) continue;
    auto& r = regions[lab.labels[i] - 1];
    const int z = int(i / plane);
    r.voxels.push_back(i);
    r.z_min = std::min(r.z_min, z);
    r.z_max = std::max(r.z_max, z);
  }
  return regions;
}

inline std::vector<Region> connected_components(const BinaryMask3D& mask) {
  return regions_from_labels(mask, label_components(mask));
}

inline BinaryMask3D mask_from_regions(const BinaryMask3D& like, const std::vector<const Region*>& regions) {
  BinaryMask3D out = BinaryMask3D::like(like);
  for (const auto* r : regions)
    for (auto i : r->voxels) out[i] = 1;
  return out;
}

// Minimum axis-aligned square around the region's pixels on one slice.
// The square has the tight rectangle's larger extent as its side and shares
// its centre (rounded toward the top-left when the slack is odd). A square
// that overruns the image is shifted back inside, never shrunk; along an
// axis shorter than the side it is anchored at 0.
inline SquareBox min_square_bbox(const Region& region, const Dims& dims, int slice_index) {
  const auto plane = dims.slice_size();
  int x_lo = dims.nx, x_hi = -1, y_lo = dims.ny, y_hi = -1;
  for (auto i : region.voxels) {
    if (int(i / plane) != slice_index) continue;
    const auto rem = i % plane;
    const int x = int(rem % dims.nx), y = int(rem / dims.nx);
    x_lo = std::min(x_lo, x);
    x_hi = std::max(x_hi, x);
    y_lo = std::min(y_lo, y);
    y_hi = std::max(y_hi, y);
  }
  if (x_hi < 0)
    throw Error(ErrorKind::EmptyIntersection,
                "region " + std::to_string(region.id) + " has no pixels on slice " + std::to_string(slice_index));

  const int w = x_hi - x_lo + 1, h = y_hi - y_lo + 1;
  const int side = std::max(w, h);
  auto place = [side](int lo, int extent, int limit) {
    int start = lo - (side - extent) / 2;
    start = std::min(start, limit - side);
    return std::max(start, 0);
  };
  return {place(x_lo, w, dims.nx), place(y_lo, h, dims.ny), side};
}

}  // namespace ctpoir
