#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "ctpoir/grid.hpp"
#include "ctpoir/mask_ops.hpp"
#include "ctpoir/metrics.hpp"
#include "ctpoir/parallel.hpp"

namespace ctpoir {

inline constexpr int kDefaultLungThreshold = -200;
inline constexpr int kDefaultInfectedThreshold = -750;

// -800, -750, ..., -50, 0
inline constexpr std::array<int, 17> kSweepThresholds = [] {
  std::array<int, 17> t{};
  for (int i = 0; i < 17; ++i) t[i] = -800 + 50 * i;
  return t;
}();

struct ThresholdOptions {
  // Components kept after exterior air removal (the two lungs).
  int keep_components = 2;
  // Fill enclosed in-slice holes so lesions brighter than the threshold
  // still count as lung.
  bool fill_holes = true;
};

// {voxel : HU <= t}, without any component filtering.
inline BinaryMask3D raw_threshold(const CtVolume& volume, int t) {
  BinaryMask3D out = BinaryMask3D::like(volume);
  for (std::size_t i = 0; i < volume.size(); ++i) out[i] = volume[i] <= t;
  return out;
}

// Drops every 26-connected component touching the x/y border of the volume
// (exterior air), then keeps the `keep` largest of the rest. Size ties go to
// the component found first in raster order.
inline BinaryMask3D keep_interior_components(const BinaryMask3D& mask, int keep) {
  const auto& d = mask.dims();
  const auto lab = label_components(mask);
  std::vector<std::uint8_t> touches(std::size_t(lab.count), 0);
  std::vector<std::size_t> sizes(std::size_t(lab.count), 0);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const auto l = lab.labels[i];
    if (!l) continue;
    ++sizes[l - 1];
    const auto v = mask.coord(i);
    if (v.x == 0 || v.y == 0 || v.x == d.nx - 1 || v.y == d.ny - 1) touches[l - 1] = 1;
  }
  std::vector<int> interior;
  for (int k = 0; k < lab.count; ++k)
    if (!touches[k]) interior.push_back(k);
  std::stable_sort(interior.begin(), interior.end(), [&](int a, int b) { return sizes[a] > sizes[b]; });
  if (int(interior.size()) > keep) interior.resize(std::size_t(std::max(keep, 0)));

  std::vector<std::uint8_t> kept(std::size_t(lab.count), 0);
  for (int k : interior) kept[k] = 1;
  BinaryMask3D out = BinaryMask3D::like(mask);
  for (std::size_t i = 0; i < mask.size(); ++i) out[i] = lab.labels[i] && kept[lab.labels[i] - 1];
  return out;
}

// Per slice: background pixels not 4-connected to the slice border become
// foreground.
inline BinaryMask3D fill_holes_per_slice(const BinaryMask3D& mask) {
  const auto& d = mask.dims();
  BinaryMask3D out = mask;
  std::vector<std::uint8_t> outside(d.slice_size());
  std::vector<std::pair<int, int>> stack;
  for (int z = 0; z < d.nz; ++z) {
    auto slice = mask.slice(z);
    std::fill(outside.begin(), outside.end(), 0);
    auto seed = [&](int x, int y) {
      const auto i = std::size_t(y) * d.nx + x;
      if (slice[i] || outside[i]) return;
      outside[i] = 1;
      stack.emplace_back(x, y);
    };
    for (int x = 0; x < d.nx; ++x) {
      seed(x, 0);
      seed(x, d.ny - 1);
    }
    for (int y = 0; y < d.ny; ++y) {
      seed(0, y);
      seed(d.nx - 1, y);
    }
    while (!stack.empty()) {
      const auto [x, y] = stack.back();
      stack.pop_back();
      if (x > 0) seed(x - 1, y);
      if (x + 1 < d.nx) seed(x + 1, y);
      if (y > 0) seed(x, y - 1);
      if (y + 1 < d.ny) seed(x, y + 1);
    }
    auto dst = out.slice(z);
    for (std::size_t i = 0; i < dst.size(); ++i)
      if (!outside[i]) dst[i] = 1;
  }
  return out;
}

// HU-threshold lung segmentation: HU <= t, minus exterior air, largest
// interior components, enclosed holes filled.
inline BinaryMask3D segment_by_threshold(const CtVolume& volume, int t, const ThresholdOptions& opt = {}) {
  auto mask = keep_interior_components(raw_threshold(volume, t), opt.keep_components);
  if (opt.fill_holes) mask = fill_holes_per_slice(mask);
  return mask;
}

struct SweepEntry {
  int threshold_hu;
  double dice;
};

struct SweepResult {
  std::vector<SweepEntry> entries;
  int best_threshold = 0;
  double best_dice = 0.0;
  BinaryMask3D best_mask;
};

namespace threshold_detail {

// Evaluates make_mask at every sweep threshold (in parallel) and keeps the
// first maximum, i.e. the most negative threshold on ties.
template <typename MakeMask>
SweepResult sweep(const BinaryMask3D& truth, int threads, MakeMask&& make_mask) {
  std::vector<BinaryMask3D> masks(kSweepThresholds.size());
  std::vector<double> scores(kSweepThresholds.size());
  parallel_for(kSweepThresholds.size(), threads, [&](std::size_t k) {
    masks[k] = make_mask(kSweepThresholds[k]);
    scores[k] = dice(masks[k], truth);
  });
  SweepResult r;
  std::size_t best = 0;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    r.entries.push_back({kSweepThresholds[k], scores[k]});
    if (scores[k] > scores[best]) best = k;
  }
  r.best_threshold = kSweepThresholds[best];
  r.best_dice = scores[best];
  r.best_mask = std::move(masks[best]);
  return r;
}

}  // namespace threshold_detail

inline SweepResult sweep_lung_threshold(const CtVolume& volume, const BinaryMask3D& gt_lung, int threads = 1,
                                        const ThresholdOptions& opt = {}) {
  require_same_dims(volume, gt_lung, "volume and lung truth");
  return threshold_detail::sweep(gt_lung, threads, [&](int t) { return segment_by_threshold(volume, t, opt); });
}

// Lung voxels brighter than t: lung_mask minus {HU <= t} taken inside the lung.
inline BinaryMask3D infected_candidate(const CtVolume& volume, const BinaryMask3D& lung_mask, int t) {
  require_same_dims(volume, lung_mask, "volume and lung mask");
  BinaryMask3D out = BinaryMask3D::like(lung_mask);
  for (std::size_t i = 0; i < volume.size(); ++i) out[i] = lung_mask[i] && volume[i] > t;
  return out;
}

inline SweepResult infected_by_subtraction(const CtVolume& volume, const BinaryMask3D& lung_mask,
                                           const BinaryMask3D& gt_infected, int threads = 1) {
  require_same_dims(volume, gt_infected, "volume and infected truth");
  return threshold_detail::sweep(gt_infected, threads,
                                 [&](int t) { return infected_candidate(volume, lung_mask, t); });
}

struct BootstrapLabels {
  BinaryMask3D lung;
  BinaryMask3D infected;
};

// Initial "dirty" annotations from fixed HU thresholds, no ground truth needed.
inline BootstrapLabels bootstrap_labels(const CtVolume& volume, int t_lung = kDefaultLungThreshold,
                                        int t_inf = kDefaultInfectedThreshold) {
  BootstrapLabels out;
  out.lung = segment_by_threshold(volume, t_lung);
  out.infected = infected_candidate(volume, out.lung, t_inf);
  return out;
}

}  // namespace ctpoir
