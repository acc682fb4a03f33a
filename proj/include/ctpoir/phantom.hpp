#pragma once

// Synthetic chest CT phantoms with exact ground truth. Geometry is given in
// voxel coordinates; HU values are drawn per voxel from a Gaussian whose
// mean/sigma depends on the tissue class at that voxel.
//
// Noise: one standard normal per voxel, drawn in raster order (x fastest,
// then y, then z) from Xoshiro256 seeded with spec.seed, so the stream does
// not depend on which tissues are present. HU = round(mean + sigma * n),
// rounded half away from zero, saturated to int16.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctpoir/error.hpp"
#include "ctpoir/grid.hpp"
#include "ctpoir/mask_ops.hpp"
#include "ctpoir/rng.hpp"

namespace ctpoir {

struct Vec3 {
  double x = 0, y = 0, z = 0;
};

struct Shape {
  enum class Kind { Ellipsoid, Box };
  Kind kind = Kind::Ellipsoid;
  Vec3 center;
  Vec3 radii{1, 1, 1};  // semi-axes, or half-extents for a box

  bool contains(int x, int y, int z) const {
    const double dx = (x - center.x) / radii.x, dy = (y - center.y) / radii.y, dz = (z - center.z) / radii.z;
    if (kind == Kind::Box) return std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0 && std::abs(dz) <= 1.0;
    return dx * dx + dy * dy + dz * dz <= 1.0;
  }
};

struct Tissue {
  double mean = 0;
  double sigma = 0;
};

struct LesionSpec {
  Shape shape;
  Tissue hu{-100, 80};
};

// Air-tube analog running along z: air lumen inside a bright wall.
struct TubeSpec {
  double cx = 0, cy = 0;
  double radius = 3;  // outer radius in pixels; the wall is the outermost pixel ring
  int z0 = 0, z1 = 0;  // inclusive slice range
  Tissue wall{40, 20};
  Tissue lumen{-1000, 20};
};

// Healthy but hazy tissue along the lung boundary: lung voxels inside
// `region` within `depth` voxels of the lung surface.
struct BlurBandSpec {
  Shape region;
  int depth = 2;
  Tissue hu{-300, 40};
};

struct PhantomSpec {
  Dims dims{128, 128, 32};
  Spacing spacing{0.7, 0.7, 5.0};
  std::uint64_t seed = 1;

  // Elliptic cylinder through all slices: centre and radii in x/y.
  double body_cx = 63.5, body_cy = 63.5, body_rx = 57.6, body_ry = 46.0;
  Tissue body{40, 70};
  Tissue air{-1000, 20};

  std::array<Shape, 2> lungs{};
  Tissue lung{-650, 50};
  // Partial-volume rim: lung voxels with a 6-neighbour outside the lungs.
  bool rim = true;
  Tissue rim_hu{-300, 40};

  std::vector<LesionSpec> lesions;
  std::optional<TubeSpec> tube;
  std::vector<BlurBandSpec> blur_bands;
};

struct Phantom {
  CtVolume volume;
  BinaryMask3D gt_lung;
  BinaryMask3D gt_infected;
  // Healthy look-alikes (tube, blur bands); part of the lung, never infected.
  BinaryMask3D decoys;

  // |gt_infected| / |gt_lung|, known exactly from the voxel counts.
  double designed_poir() const { return double(gt_infected.count()) / double(gt_lung.count()); }
};

namespace phantom_detail {

enum Tissue8 : std::uint8_t { kAir, kBody, kLung, kRim, kBand, kTubeWall, kTubeLumen, kLesion };

inline bool in_body(const PhantomSpec& s, int x, int y) {
  const double dx = (x - s.body_cx) / s.body_rx, dy = (y - s.body_cy) / s.body_ry;
  return dx * dx + dy * dy <= 1.0;
}

// 6-connected layer distance of each lung voxel to the nearest non-lung
// voxel (1 = touches outside). Voxels beyond the volume count as outside.
inline std::vector<int> surface_depth(const BinaryMask3D& lung) {
  const auto& d = lung.dims();
  std::vector<int> depth(lung.size(), 0);
  std::deque<std::size_t> queue;
  static constexpr int off[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  for (std::size_t i = 0; i < lung.size(); ++i) {
    if (!lung[i]) continue;
    const auto v = lung.coord(i);
    for (const auto& o : off) {
      const int x = v.x + o[0], y = v.y + o[1], z = v.z + o[2];
      if (!d.contains(x, y, z) || !lung(x, y, z)) {
        depth[i] = 1;
        queue.push_back(i);
        break;
      }
    }
  }
  while (!queue.empty()) {
    const auto i = queue.front();
    queue.pop_front();
    const auto v = lung.coord(i);
    for (const auto& o : off) {
      const int x = v.x + o[0], y = v.y + o[1], z = v.z + o[2];
      if (!d.contains(x, y, z)) continue;
      const auto j = lung.index(x, y, z);
      if (lung[j] && depth[j] == 0) {
        depth[j] = depth[i] + 1;
        queue.push_back(j);
      }
    }
  }
  return depth;
}

}  // namespace phantom_detail

inline Phantom make_phantom(const PhantomSpec& spec) {
  using namespace phantom_detail;
  validate_geometry(spec.dims, spec.spacing);
  for (const auto* t : {&spec.body, &spec.air, &spec.lung, &spec.rim_hu})
    if (t->sigma < 0) throw Error(ErrorKind::SpecViolation, "tissue sigma must be >= 0");

  const auto& d = spec.dims;
  Phantom ph;
  ph.gt_lung = BinaryMask3D(d, spec.spacing);
  ph.gt_infected = BinaryMask3D(d, spec.spacing);
  ph.decoys = BinaryMask3D(d, spec.spacing);
  std::vector<std::uint8_t> tissue(d.voxels(), kAir);
  std::vector<Tissue> lesion_hu(d.voxels());

  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) {
        const auto i = ph.gt_lung.index(x, y, z);
        if (in_body(spec, x, y)) tissue[i] = kBody;
        for (const auto& lung : spec.lungs)
          if (lung.contains(x, y, z)) {
            if (!in_body(spec, x, y) || x == 0 || y == 0 || x == d.nx - 1 || y == d.ny - 1)
              throw Error(ErrorKind::SpecViolation, "lung extends outside the body");
            tissue[i] = kLung;
            ph.gt_lung[i] = 1;
          }
      }

  const auto depth = surface_depth(ph.gt_lung);
  if (spec.rim)
    for (std::size_t i = 0; i < tissue.size(); ++i)
      if (depth[i] == 1) tissue[i] = kRim;

  for (const auto& band : spec.blur_bands) {
    if (band.hu.sigma < 0 || band.depth < 1) throw Error(ErrorKind::SpecViolation, "bad blur band");
    for (std::size_t i = 0; i < tissue.size(); ++i) {
      if (!depth[i] || depth[i] > band.depth) continue;
      const auto v = ph.gt_lung.coord(i);
      if (!band.region.contains(v.x, v.y, v.z)) continue;
      tissue[i] = kBand;
      ph.decoys[i] = 1;
    }
  }

  if (spec.tube) {
    const auto& t = *spec.tube;
    if (t.z0 < 0 || t.z1 >= d.nz || t.z0 > t.z1 || t.radius < 1.5)
      throw Error(ErrorKind::SpecViolation, "bad tube geometry");
    for (int z = t.z0; z <= t.z1; ++z)
      for (int y = 0; y < d.ny; ++y)
        for (int x = 0; x < d.nx; ++x) {
          const double r = std::hypot(x - t.cx, y - t.cy);
          if (r > t.radius) continue;
          const auto i = ph.gt_lung.index(x, y, z);
          if (!ph.gt_lung[i]) throw Error(ErrorKind::SpecViolation, "tube leaves the lungs");
          tissue[i] = r > t.radius - 1.0 ? kTubeWall : kTubeLumen;
          ph.decoys[i] = 1;
        }
  }

  for (const auto& lesion : spec.lesions) {
    if (lesion.hu.sigma < 0) throw Error(ErrorKind::SpecViolation, "lesion sigma must be >= 0");
    for (int z = 0; z < d.nz; ++z)
      for (int y = 0; y < d.ny; ++y)
        for (int x = 0; x < d.nx; ++x) {
          if (!lesion.shape.contains(x, y, z)) continue;
          const auto i = ph.gt_lung.index(x, y, z);
          if (!ph.gt_lung[i]) throw Error(ErrorKind::SpecViolation, "lesion leaves the lungs");
          tissue[i] = kLesion;
          lesion_hu[i] = lesion.hu;
          ph.gt_infected[i] = 1;
          ph.decoys[i] = 0;
        }
  }

  Grid<std::int16_t> grid(d, spec.spacing);
  Xoshiro256 rng(spec.seed);
  const Tissue tube_wall = spec.tube ? spec.tube->wall : Tissue{};
  const Tissue tube_lumen = spec.tube ? spec.tube->lumen : Tissue{};
  // Band parameters: the last band covering a voxel wins, matching the mask loop.
  std::vector<Tissue> band_hu;
  if (!spec.blur_bands.empty()) {
    band_hu.assign(d.voxels(), {});
    for (const auto& band : spec.blur_bands)
      for (std::size_t i = 0; i < tissue.size(); ++i) {
        if (tissue[i] != kBand) continue;
        const auto v = ph.gt_lung.coord(i);
        if (band.region.contains(v.x, v.y, v.z) && depth[i] <= band.depth) band_hu[i] = band.hu;
      }
  }
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double n = rng.normal();
    Tissue t;
    switch (tissue[i]) {
      case kAir: t = spec.air; break;
      case kBody: t = spec.body; break;
      case kLung: t = spec.lung; break;
      case kRim: t = spec.rim_hu; break;
      case kBand: t = band_hu[i]; break;
      case kTubeWall: t = tube_wall; break;
      case kTubeLumen: t = tube_lumen; break;
      default: t = lesion_hu[i]; break;
    }
    grid[i] = std::int16_t(std::clamp(std::round(t.mean + t.sigma * n), -32768.0, 32767.0));
  }
  ph.volume = CtVolume(std::move(grid), "phantom-" + std::to_string(spec.seed));
  return ph;
}

// Two lungs in a body, lesions filling roughly a tenth of the lung volume.
// Geometry scales with dims; defaults target 128 x 128 x 32.
inline PhantomSpec default_phantom_spec(std::uint64_t seed = 1, Dims dims = {128, 128, 32},
                                        Spacing spacing = {0.7, 0.7, 5.0}) {
  PhantomSpec s;
  s.dims = dims;
  s.spacing = spacing;
  s.seed = seed;
  const double cx = (dims.nx - 1) / 2.0, cy = (dims.ny - 1) / 2.0, cz = (dims.nz - 1) / 2.0;
  s.body_cx = cx;
  s.body_cy = cy;
  s.body_rx = 0.45 * dims.nx;
  s.body_ry = 0.36 * dims.ny;

  const Vec3 lung_r{0.15 * dims.nx, 0.25 * dims.ny, 0.42 * dims.nz};
  const double lung_dx = 0.2 * dims.nx;
  s.lungs[0] = {Shape::Kind::Ellipsoid, {cx - lung_dx, cy, cz}, lung_r};
  s.lungs[1] = {Shape::Kind::Ellipsoid, {cx + lung_dx, cy, cz}, lung_r};

  // Offsets as fractions of the lung radii, radii as fractions of dims.
  struct Blob {
    int lung;
    double ox, oy, oz, r;
  };
  static constexpr Blob blobs[] = {
      {0, -0.15, -0.35, 0.10, 0.45},
      {0, 0.10, 0.35, -0.15, 0.41},
      {1, 0.10, -0.25, -0.10, 0.50},
      {1, -0.15, 0.40, 0.20, 0.37},
  };
  for (const auto& b : blobs) {
    const auto& lung = s.lungs[std::size_t(b.lung)];
    LesionSpec l;
    l.shape.center = {lung.center.x + b.ox * lung_r.x, lung.center.y + b.oy * lung_r.y,
                      lung.center.z + b.oz * lung_r.z};
    l.shape.radii = {b.r * lung_r.x, b.r * lung_r.x, b.r * lung_r.z};
    s.lesions.push_back(l);
  }
  return s;
}

// Adds the false-positive look-alikes: an air tube in the left lung and a
// hazy band along the outer wall of the right lung.
inline void add_default_decoys(PhantomSpec& s) {
  const auto& left = s.lungs[0];
  const auto& right = s.lungs[1];
  TubeSpec tube;
  tube.cx = left.center.x + 0.55 * left.radii.x;
  tube.cy = left.center.y;
  tube.radius = std::max(2.5, 0.2 * left.radii.x);
  tube.z0 = int(std::ceil(left.center.z - 0.5 * left.radii.z));
  tube.z1 = int(std::floor(left.center.z + 0.5 * left.radii.z));
  s.tube = tube;

  BlurBandSpec band;
  band.region.kind = Shape::Kind::Box;
  band.region.center = {right.center.x + right.radii.x, right.center.y, right.center.z};
  band.region.radii = {0.5 * right.radii.x, 0.3 * right.radii.y, 0.4 * right.radii.z};
  band.depth = 2;
  s.blur_bands.push_back(band);
}

// Same geometry as the default phantom with darker parenchyma (-850 +- 50
// HU), so that most healthy lung lies below the fixed -750 HU infected
// threshold. No pleural rim: at -300 HU it would sit above -750 and form a
// shell that noise voxels join to peripheral lesions.
inline PhantomSpec paper_like_phantom_spec(std::uint64_t seed = 1, Dims dims = {128, 128, 32},
                                           Spacing spacing = {0.7, 0.7, 5.0}) {
  auto s = default_phantom_spec(seed, dims, spacing);
  s.lung = {-850, 50};
  s.rim = false;
  return s;
}

// JSON (de)serialisation of PhantomSpec; field names mirror the struct.
inline void to_json(nlohmann::json& j, const Vec3& v) { j = {v.x, v.y, v.z}; }
inline void from_json(const nlohmann::json& j, Vec3& v) {
  v = {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}
inline void to_json(nlohmann::json& j, const Tissue& t) { j = {{"mean", t.mean}, {"sigma", t.sigma}}; }
inline void from_json(const nlohmann::json& j, Tissue& t) {
  t.mean = j.at("mean").get<double>();
  t.sigma = j.value("sigma", 0.0);
}
inline void to_json(nlohmann::json& j, const Shape& s) {
  j = {{"kind", s.kind == Shape::Kind::Box ? "box" : "ellipsoid"}, {"center", s.center}, {"radii", s.radii}};
}
inline void from_json(const nlohmann::json& j, Shape& s) {
  const auto kind = j.value("kind", std::string("ellipsoid"));
  if (kind != "box" && kind != "ellipsoid") throw Error(ErrorKind::SpecViolation, "unknown shape kind " + kind);
  s.kind = kind == "box" ? Shape::Kind::Box : Shape::Kind::Ellipsoid;
  s.center = j.at("center").get<Vec3>();
  s.radii = j.at("radii").get<Vec3>();
}

inline nlohmann::json phantom_spec_to_json(const PhantomSpec& s) {
  nlohmann::json j;
  j["dims"] = {s.dims.nx, s.dims.ny, s.dims.nz};
  j["spacing"] = {s.spacing.sx, s.spacing.sy, s.spacing.sz};
  j["seed"] = s.seed;
  j["body"] = {{"center", {s.body_cx, s.body_cy}}, {"radii", {s.body_rx, s.body_ry}}, {"hu", s.body}};
  j["air_hu"] = s.air;
  j["lungs"] = {s.lungs[0], s.lungs[1]};
  j["lung_hu"] = s.lung;
  j["rim"] = s.rim;
  j["rim_hu"] = s.rim_hu;
  j["lesions"] = nlohmann::json::array();
  for (const auto& l : s.lesions) j["lesions"].push_back({{"shape", l.shape}, {"hu", l.hu}});
  if (s.tube) {
    const auto& t = *s.tube;
    j["tube"] = {{"center", {t.cx, t.cy}}, {"radius", t.radius}, {"z_range", {t.z0, t.z1}},
                 {"wall_hu", t.wall}, {"lumen_hu", t.lumen}};
  }
  j["blur_bands"] = nlohmann::json::array();
  for (const auto& b : s.blur_bands) j["blur_bands"].push_back({{"region", b.region}, {"depth", b.depth}, {"hu", b.hu}});
  return j;
}

// Missing keys keep the defaults of default_phantom_spec(seed, dims, spacing).
inline PhantomSpec phantom_spec_from_json(const nlohmann::json& j) {
  try {
    Dims dims{128, 128, 32};
    Spacing spacing{0.7, 0.7, 5.0};
    if (j.contains("dims")) dims = {j["dims"].at(0).get<int>(), j["dims"].at(1).get<int>(), j["dims"].at(2).get<int>()};
    if (j.contains("spacing"))
      spacing = {j["spacing"].at(0).get<double>(), j["spacing"].at(1).get<double>(), j["spacing"].at(2).get<double>()};
    validate_geometry(dims, spacing);
    auto s = default_phantom_spec(j.value("seed", std::uint64_t{1}), dims, spacing);
    if (j.contains("body")) {
      const auto& b = j["body"];
      if (b.contains("center")) {
        s.body_cx = b["center"].at(0).get<double>();
        s.body_cy = b["center"].at(1).get<double>();
      }
      if (b.contains("radii")) {
        s.body_rx = b["radii"].at(0).get<double>();
        s.body_ry = b["radii"].at(1).get<double>();
      }
      if (b.contains("hu")) s.body = b["hu"].get<Tissue>();
    }
    if (j.contains("air_hu")) s.air = j["air_hu"].get<Tissue>();
    if (j.contains("lungs")) {
      if (j["lungs"].size() != 2) throw Error(ErrorKind::SpecViolation, "exactly two lungs are required");
      s.lungs = {j["lungs"][0].get<Shape>(), j["lungs"][1].get<Shape>()};
    }
    if (j.contains("lung_hu")) s.lung = j["lung_hu"].get<Tissue>();
    s.rim = j.value("rim", s.rim);
    if (j.contains("rim_hu")) s.rim_hu = j["rim_hu"].get<Tissue>();
    if (j.contains("lesions")) {
      s.lesions.clear();
      for (const auto& l : j["lesions"]) {
        LesionSpec lesion;
        lesion.shape = l.at("shape").get<Shape>();
        if (l.contains("hu")) lesion.hu = l["hu"].get<Tissue>();
        s.lesions.push_back(lesion);
      }
    }
    if (j.contains("tube") && !j["tube"].is_null()) {
      const auto& t = j["tube"];
      TubeSpec tube;
      tube.cx = t.at("center").at(0).get<double>();
      tube.cy = t.at("center").at(1).get<double>();
      tube.radius = t.value("radius", tube.radius);
      tube.z0 = t.at("z_range").at(0).get<int>();
      tube.z1 = t.at("z_range").at(1).get<int>();
      if (t.contains("wall_hu")) tube.wall = t["wall_hu"].get<Tissue>();
      if (t.contains("lumen_hu")) tube.lumen = t["lumen_hu"].get<Tissue>();
      s.tube = tube;
    }
    if (j.contains("blur_bands")) {
      s.blur_bands.clear();
      for (const auto& b : j["blur_bands"]) {
        BlurBandSpec band;
        band.region = b.at("region").get<Shape>();
        band.depth = b.value("depth", band.depth);
        if (b.contains("hu")) band.hu = b["hu"].get<Tissue>();
        s.blur_bands.push_back(band);
      }
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::SpecViolation, std::string("phantom spec: ") + e.what());
  }
}

}  // namespace ctpoir
