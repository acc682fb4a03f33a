#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "ctpoir/error.hpp"
#include "ctpoir/grid.hpp"

namespace ctpoir {

inline constexpr int kHuFloor = -1200;
inline constexpr int kHuCeiling = 600;

inline std::int16_t clip_hu(std::int16_t hu) {
  return std::int16_t(std::clamp<int>(hu, kHuFloor, kHuCeiling));
}

inline CtVolume clip_hu(const CtVolume& volume) {
  CtVolume out = volume;
  for (auto& v : out.data()) v = clip_hu(v);
  return out;
}

// (hu + 1200) / 1800 * 255 rounded half up, computed in integers so the
// .5 cases (e.g. -300 -> 127.5 -> 128) are exact.
inline std::uint8_t hu_to_gray(int hu) {
  if (hu < kHuFloor || hu > kHuCeiling)
    throw Error(ErrorKind::OutOfRange, "HU " + std::to_string(hu) + " outside [-1200, 600]; clip first");
  const int span = kHuCeiling - kHuFloor;
  return std::uint8_t(((hu - kHuFloor) * 255 * 2 + span) / (2 * span));
}

inline GrayVolume normalize_to_gray(const CtVolume& volume) {
  GrayVolume out(volume.dims(), volume.spacing());
  for (std::size_t i = 0; i < volume.size(); ++i) out[i] = hu_to_gray(volume[i]);
  return out;
}

struct HuHistogram {
  std::vector<int> bin_edges;  // bins.size() + 1 edges
  std::vector<std::uint64_t> counts;
  std::uint64_t total = 0;

  // Fraction of counted voxels whose bin lies entirely inside [lo, hi].
  double fraction_within(int lo, int hi) const {
    if (total == 0) return 0.0;
    std::uint64_t n = 0;
    for (std::size_t b = 0; b < counts.size(); ++b)
      if (bin_edges[b] >= lo && bin_edges[b + 1] <= hi) n += counts[b];
    return double(n) / double(total);
  }

  std::string to_csv() const {
    std::ostringstream os;
    os << "bin_lo,bin_hi,count\n";
    for (std::size_t b = 0; b < counts.size(); ++b)
      os << bin_edges[b] << ',' << bin_edges[b + 1] << ',' << counts[b] << '\n';
    return os.str();
  }
};

// Histogram of masked voxels over [-1200, 600]. Bins are [lo, hi) except
// the last, which is closed; a final partial bin absorbs any remainder when
// bin_width does not divide the range. Values outside the range are counted
// in the edge bins.
inline HuHistogram hu_histogram(const CtVolume& volume, const BinaryMask3D& mask, int bin_width) {
  require_same_dims(volume, mask, "volume and mask");
  if (bin_width <= 0) throw Error(ErrorKind::InvalidArgument, "bin_width must be positive");

  HuHistogram h;
  for (int e = kHuFloor; e < kHuCeiling; e += bin_width) h.bin_edges.push_back(e);
  h.bin_edges.push_back(kHuCeiling);
  h.counts.assign(h.bin_edges.size() - 1, 0);

  const auto last = h.counts.size() - 1;
  for (std::size_t i = 0; i < volume.size(); ++i) {
    if (!mask[i]) continue;
    const int hu = std::clamp<int>(volume[i], kHuFloor, kHuCeiling);
    const auto bin = std::min<std::size_t>(std::size_t((hu - kHuFloor) / bin_width), last);
    ++h.counts[bin];
    ++h.total;
  }
  return h;
}

}  // namespace ctpoir
