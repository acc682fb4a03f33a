#pragma once

// Region-level false-positive removal. Each connected component of an
// infected-region mask becomes a candidate with one square patch per slice
// it touches; a patch scorer rates each patch, the region's score is the
// mean patch score, and regions below the operating threshold are dropped.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ctpoir/error.hpp"
#include "ctpoir/grid.hpp"
#include "ctpoir/mask_ops.hpp"
#include "ctpoir/parallel.hpp"
#include "ctpoir/volume_io.hpp"

namespace ctpoir {

inline constexpr double kDefaultFilterThreshold = 0.45;
inline constexpr int kBuiltinPatchSize = 32;

struct FilterConfig {
  double threshold = kDefaultFilterThreshold;
  std::size_t min_region_voxels = 1;
};

// Square crop of one slice. Pixels of the square that fall outside the
// image read as 0 in both channels.
struct Patch {
  int region_id = 0;
  int slice = 0;
  SquareBox box;
  std::size_t region_voxels = 0;  // size of the whole 3D region
  int side = 0;                   // side of the stored pixel arrays
  std::vector<std::uint8_t> gray;
  std::vector<std::uint8_t> mask;  // 1 where the pixel belongs to this region

  std::size_t mask_pixels() const { return std::size_t(std::count(mask.begin(), mask.end(), 1)); }
};

struct ScoredRegion {
  Region region;
  std::vector<Patch> patches;
  double score = 0.0;
  bool scored = false;
};

inline std::vector<ScoredRegion> extract_candidates(const BinaryMask3D& infected, const GrayVolume& gray) {
  require_same_dims(infected, gray, "mask and gray volume");
  const auto& d = infected.dims();
  const auto lab = label_components(infected);
  auto regions = regions_from_labels(infected, lab);

  std::vector<ScoredRegion> out;
  out.reserve(regions.size());
  for (auto& region : regions) {
    ScoredRegion cand;
    for (int z = region.z_min; z <= region.z_max; ++z) {
      const bool touches = std::any_of(region.voxels.begin(), region.voxels.end(),
                                       [&](auto i) { return int(i / d.slice_size()) == z; });
      if (!touches) continue;
      Patch p;
      p.region_id = region.id;
      p.slice = z;
      p.box = min_square_bbox(region, d, z);
      p.region_voxels = region.size();
      p.side = p.box.side;
      p.gray.assign(std::size_t(p.side) * p.side, 0);
      p.mask.assign(std::size_t(p.side) * p.side, 0);
      for (int py = 0; py < p.side; ++py)
        for (int px = 0; px < p.side; ++px) {
          const int x = p.box.x0 + px, y = p.box.y0 + py;
          if (x >= d.nx || y >= d.ny) continue;
          const auto at = std::size_t(py) * p.side + px;
          const auto i = gray.index(x, y, z);
          p.gray[at] = gray[i];
          p.mask[at] = lab.labels[i] == region.id + 1;
        }
      cand.patches.push_back(std::move(p));
    }
    cand.region = std::move(region);
    out.push_back(std::move(cand));
  }
  return out;
}

// Zero-pads a patch to `size` x `size`, keeping it centred. Patches that
// are already at least that large are returned unchanged.
inline Patch pad_patch(const Patch& p, int size = kBuiltinPatchSize) {
  if (p.side >= size) return p;
  Patch out = p;
  out.side = size;
  out.gray.assign(std::size_t(size) * size, 0);
  out.mask.assign(std::size_t(size) * size, 0);
  const int off = (size - p.side) / 2;
  for (int y = 0; y < p.side; ++y)
    for (int x = 0; x < p.side; ++x) {
      const auto src = std::size_t(y) * p.side + x;
      const auto dst = std::size_t(y + off) * size + (x + off);
      out.gray[dst] = p.gray[src];
      out.mask[dst] = p.mask[src];
    }
  return out;
}

template <typename S>
concept PatchScorer = requires(S& s, const Patch& p) {
  { s(p) } -> std::convertible_to<double>;
};

// Scores every candidate; a region's score is the mean of its patch scores.
template <PatchScorer Scorer>
std::vector<ScoredRegion> score_regions(std::vector<ScoredRegion> candidates, Scorer&& scorer, int threads = 1) {
  parallel_for(candidates.size(), threads, [&](std::size_t k) {
    auto& c = candidates[k];
    const auto fail = [&](const std::string& why) {
      return Error(ErrorKind::ScorerFailure, "region " + std::to_string(c.region.id) + ": " + why);
    };
    if (c.patches.empty()) throw fail("no patches");
    std::vector<double> s;
    s.reserve(c.patches.size());
    for (const auto& p : c.patches) {
      double v;
      try {
        v = double(scorer(p));
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::ScorerFailure) throw;
        throw fail(e.what());
      } catch (const std::exception& e) {
        throw fail(e.what());
      }
      if (!(v >= 0.0 && v <= 1.0)) throw fail("score outside [0,1]");
      s.push_back(v);
    }
    const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
    double mean = *lo;
    if (*lo != *hi) {
      double sum = 0.0;
      for (double v : s) sum += v;
      mean = std::clamp(sum / double(s.size()), 0.0, 1.0);
    }
    c.score = mean;
    c.region.score = mean;
    c.scored = true;
  });
  return candidates;
}

// Union of the regions with score >= threshold and enough voxels.
inline BinaryMask3D filter_regions(const std::vector<ScoredRegion>& scored, const FilterConfig& config,
                                   const BinaryMask3D& like) {
  if (!(config.threshold >= 0.0 && config.threshold <= 1.0))
    throw Error(ErrorKind::InvalidArgument, "filter threshold must lie in [0, 1]");
  BinaryMask3D out = BinaryMask3D::like(like);
  for (const auto& c : scored) {
    if (!c.scored) throw Error(ErrorKind::InvalidArgument, "region " + std::to_string(c.region.id) + " is unscored");
    if (c.score < config.threshold || c.region.size() < config.min_region_voxels) continue;
    for (auto i : c.region.voxels) out[i] = 1;
  }
  return out;
}

// Deterministic stand-in for a trained patch classifier: a logistic model
// over hand-picked patch features,
//
//   z = -12 + 2.0 * mean + 2.5 * min(log10(voxels), 3) + 8.0 * fill - 10.0 * stdev
//
// where mean and stdev are the gray level statistics of the region's pixels
// in the patch (scaled to [0, 1]), voxels is the size of the whole 3D region
// and fill is the share of the (unpadded) square occupied by the region.
// Compact, sizeable blobs score high; thin rings (tubes, pleural rims),
// specks and sparse haze score low.
struct BuiltinScorer {
  static constexpr double kBias = -12.0;
  static constexpr double kMean = 2.0;
  static constexpr double kLogSize = 2.5;
  static constexpr double kLogSizeCap = 3.0;
  static constexpr double kFill = 8.0;
  static constexpr double kStdev = -10.0;

  struct Features {
    double mean = 0, stdev = 0, log_size = 0, fill = 0;
  };

  static Features features(const Patch& raw) {
    const Patch p = pad_patch(raw);
    Features f;
    double sum = 0, sum2 = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < p.mask.size(); ++i) {
      if (!p.mask[i]) continue;
      const double g = p.gray[i] / 255.0;
      sum += g;
      sum2 += g * g;
      ++n;
    }
    if (n == 0) return f;
    f.mean = sum / double(n);
    f.stdev = std::sqrt(std::max(0.0, sum2 / double(n) - f.mean * f.mean));
    f.log_size = std::log10(double(std::max<std::size_t>(raw.region_voxels, 1)));
    f.fill = double(n) / (double(raw.side) * raw.side);
    return f;
  }

  double operator()(const Patch& p) const {
    const auto f = features(p);
    const double z = kBias + kMean * f.mean + kLogSize * std::min(f.log_size, kLogSizeCap) + kFill * f.fill +
                     kStdev * f.stdev;
    return 1.0 / (1.0 + std::exp(-z));
  }
};

// Region scores supplied by an external classifier as CSV `region_id,score`
// (optional header line). Every patch of a region gets the region's score.
class SidecarScorer {
 public:
  explicit SidecarScorer(std::map<int, double> scores) : scores_(std::move(scores)) {}

  static SidecarScorer from_csv(const std::string& text) {
    std::map<int, double> scores;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
      if (line.empty()) continue;
      const auto comma = line.find(',');
      if (comma == std::string::npos) throw Error(ErrorKind::Parse, "scores line " + std::to_string(line_no));
      const std::string id_s = line.substr(0, comma), score_s = line.substr(comma + 1);
      int id = 0;
      double score = 0;
      const bool id_ok = std::from_chars(id_s.data(), id_s.data() + id_s.size(), id).ec == std::errc();
      const auto res = std::from_chars(score_s.data(), score_s.data() + score_s.size(), score);
      if (!id_ok || res.ec != std::errc()) {
        if (line_no == 1) continue;  // header
        throw Error(ErrorKind::Parse, "scores line " + std::to_string(line_no) + ": " + line);
      }
      if (!(score >= 0.0 && score <= 1.0))
        throw Error(ErrorKind::ValueOutOfRange, "score for region " + std::to_string(id) + " outside [0,1]");
      scores[id] = score;
    }
    return SidecarScorer(std::move(scores));
  }

  static SidecarScorer from_file(const fs::path& path) {
    const auto bytes = detail::read_file_bytes(path);
    return from_csv(std::string(bytes.begin(), bytes.end()));
  }

  double operator()(const Patch& p) const {
    const auto it = scores_.find(p.region_id);
    if (it == scores_.end())
      throw Error(ErrorKind::ScorerFailure, "region " + std::to_string(p.region_id) + ": no sidecar score");
    return it->second;
  }

  const std::map<int, double>& scores() const { return scores_; }

 private:
  std::map<int, double> scores_;
};

}  // namespace ctpoir
