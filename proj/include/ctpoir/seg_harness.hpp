#pragma once

// 2.5D inference harness. Every slice z is the centre of one stack
// (z-1, z, z+1) with out-of-range neighbours replaced by the edge slice. A
// segmenter maps a stack to three probability maps, one per stacked slice,
// and each output slice is the mean of every prediction aimed at it.

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <exception>
#include <span>
#include <string>
#include <vector>

#include "ctpoir/error.hpp"
#include "ctpoir/grid.hpp"
#include "ctpoir/parallel.hpp"

namespace ctpoir {

struct SliceStack {
  int center = 0;
  std::array<int, 3> indices{};
  std::array<std::span<const std::uint8_t>, 3> pixels;  // views into the source volume
  int nx = 0;
  int ny = 0;
};

using StackPrediction = std::array<std::vector<float>, 3>;

template <typename S>
concept StackSegmenter = requires(S& s, const SliceStack& stack) {
  { s(stack) } -> std::convertible_to<StackPrediction>;
};

inline std::array<int, 3> stack_indices(int center, int nz) {
  return {std::max(center - 1, 0), center, std::min(center + 1, nz - 1)};
}

inline SliceStack make_stack(const GrayVolume& gray, int center) {
  SliceStack s;
  s.center = center;
  s.indices = stack_indices(center, gray.dims().nz);
  for (int k = 0; k < 3; ++k) s.pixels[k] = gray.slice(s.indices[k]);
  s.nx = gray.dims().nx;
  s.ny = gray.dims().ny;
  return s;
}

// One stack per slice, in slice order. The stacks view `gray`, which must
// outlive them.
inline std::vector<SliceStack> stack_slices(const GrayVolume& gray) {
  std::vector<SliceStack> stacks;
  stacks.reserve(std::size_t(gray.dims().nz));
  for (int z = 0; z < gray.dims().nz; ++z) stacks.push_back(make_stack(gray, z));
  return stacks;
}

// Number of stack slots that target each slice, replicated slots included.
inline std::vector<int> slot_coverage(int nz) {
  std::vector<int> cover(std::size_t(std::max(nz, 0)), 0);
  for (int c = 0; c < nz; ++c)
    for (int z : stack_indices(c, nz)) ++cover[std::size_t(z)];
  return cover;
}

template <StackSegmenter Segmenter>
ProbabilityMap3D run_25d(const GrayVolume& gray, Segmenter&& segmenter, int threads = 1) {
  const auto& d = gray.dims();
  const auto plane = d.slice_size();
  std::vector<double> sum(gray.size(), 0.0);
  std::vector<int> count(std::size_t(d.nz), 0);

  // Stacks are predicted in parallel batches; contributions are then added
  // in (stack, slot) order so the floating-point result is schedule-free.
  const std::size_t batch = std::size_t(std::max(1, threads)) * 4;
  std::vector<StackPrediction> preds(batch);
  for (std::size_t first = 0; first < std::size_t(d.nz); first += batch) {
    const std::size_t n = std::min(batch, std::size_t(d.nz) - first);
    parallel_for(n, threads, [&](std::size_t k) {
      const int center = int(first + k);
      const auto stack = make_stack(gray, center);
      try {
        preds[k] = segmenter(stack);
      } catch (const std::exception& e) {
        throw Error(ErrorKind::SegmenterFailure, "stack " + std::to_string(center) + ": " + e.what());
      }
      for (const auto& p : preds[k]) {
        if (p.size() != plane)
          throw Error(ErrorKind::SegmenterFailure, "stack " + std::to_string(center) + ": wrong map size");
        for (float v : p)
          if (!(v >= 0.0f && v <= 1.0f))
            throw Error(ErrorKind::SegmenterFailure, "stack " + std::to_string(center) + ": value outside [0,1]");
      }
    });
    for (std::size_t k = 0; k < n; ++k) {
      const auto idx = stack_indices(int(first + k), d.nz);
      for (int slot = 0; slot < 3; ++slot) {
        const auto z = std::size_t(idx[slot]);
        double* dst = sum.data() + z * plane;
        const auto& p = preds[k][slot];
        for (std::size_t i = 0; i < plane; ++i) dst[i] += p[i];
        ++count[z];
      }
    }
  }

  ProbabilityMap3D out(d, gray.spacing());
  for (int z = 0; z < d.nz; ++z) {
    const double div = count[std::size_t(z)];
    for (std::size_t i = 0; i < plane; ++i) {
      const auto at = std::size_t(z) * plane + i;
      out[at] = float(std::clamp(sum[at] / div, 0.0, 1.0));
    }
  }
  return out;
}

// {voxel : p >= tau}
inline BinaryMask3D binarize(const ProbabilityMap3D& map, double tau = 0.5) {
  if (std::isnan(tau) || tau < 0.0) throw Error(ErrorKind::InvalidArgument, "tau must be >= 0");
  BinaryMask3D out = BinaryMask3D::like(map);
  for (std::size_t i = 0; i < map.size(); ++i) out[i] = double(map[i]) >= tau;
  return out;
}

inline ProbabilityMap3D mask_to_probabilities(const BinaryMask3D& mask) {
  ProbabilityMap3D out(mask.dims(), mask.spacing());
  for (std::size_t i = 0; i < mask.size(); ++i) out[i] = mask[i] ? 1.0f : 0.0f;
  return out;
}

// Reference segmenter: a precomputed mask (e.g. from the HU threshold)
// served slice by slice as 0/1 probabilities. Its prediction for a slice
// does not depend on the stack position.
class MaskStackSegmenter {
 public:
  explicit MaskStackSegmenter(BinaryMask3D mask) : mask_(std::move(mask)) {}

  StackPrediction operator()(const SliceStack& stack) const {
    StackPrediction out;
    for (int k = 0; k < 3; ++k) {
      const auto src = mask_.slice(stack.indices[k]);
      out[k].assign(src.begin(), src.end());
    }
    return out;
  }

 private:
  BinaryMask3D mask_;
};

}  // namespace ctpoir
