#pragma once

// Binary PGM (P5) / PPM (P6) output and per-slice contour overlays.

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ctpoir/error.hpp"
#include "ctpoir/grid.hpp"
#include "ctpoir/preprocess.hpp"
#include "ctpoir/volume_io.hpp"

namespace ctpoir {

struct Rgb {
  std::uint8_t r, g, b;
};

inline constexpr Rgb kLungColor{0, 0, 255};
inline constexpr Rgb kInfectedColor{255, 0, 0};

struct PnmImage {
  int width = 0;
  int height = 0;
  int channels = 1;  // 1 for P5, 3 for P6
  std::vector<std::uint8_t> pixels;
};

namespace netpbm_detail {

inline void write(const fs::path& path, const char* magic, int w, int h, std::span<const std::uint8_t> px) {
  const std::string head = std::string(magic) + "\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  std::vector<std::uint8_t> bytes(head.begin(), head.end());
  bytes.insert(bytes.end(), px.begin(), px.end());
  detail::write_file_bytes(path, bytes.data(), bytes.size());
}

}  // namespace netpbm_detail

inline void write_pgm(const fs::path& path, int w, int h, std::span<const std::uint8_t> gray) {
  if (gray.size() != std::size_t(w) * std::size_t(h)) throw Error(ErrorKind::InvalidArgument, "PGM size mismatch");
  netpbm_detail::write(path, "P5", w, h, gray);
}

inline void write_ppm(const fs::path& path, int w, int h, std::span<const std::uint8_t> rgb) {
  if (rgb.size() != std::size_t(w) * std::size_t(h) * 3) throw Error(ErrorKind::InvalidArgument, "PPM size mismatch");
  netpbm_detail::write(path, "P6", w, h, rgb);
}

// Reads binary P5/P6 with maxval 255 (comments allowed in the header).
inline PnmImage read_pnm(const fs::path& path) {
  const auto raw = detail::read_file_bytes(path);
  const std::vector<std::uint8_t> bytes(raw.begin(), raw.end());
  std::size_t pos = 0;
  const auto fail = [&](const char* why) { return Error(ErrorKind::Parse, path.string() + ": " + why); };
  auto skip = [&] {
    while (pos < bytes.size()) {
      if (std::isspace(bytes[pos])) {
        ++pos;
      } else if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
  };
  auto number = [&] {
    skip();
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) throw fail("bad header");
    int v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) v = v * 10 + (bytes[pos++] - '0');
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) throw fail("not a P5/P6 file");
  PnmImage img;
  img.channels = bytes[1] == '5' ? 1 : 3;
  pos = 2;
  img.width = number();
  img.height = number();
  if (number() != 255) throw fail("maxval must be 255");
  ++pos;  // single whitespace before the raster
  const auto n = std::size_t(img.width) * img.height * img.channels;
  if (bytes.size() < pos + n) throw fail("truncated raster");
  img.pixels.assign(bytes.begin() + std::ptrdiff_t(pos), bytes.begin() + std::ptrdiff_t(pos + n));
  return img;
}

// Mask pixels with at least one 4-neighbour that is background or outside
// the image.
inline std::vector<std::uint8_t> contour(std::span<const std::uint8_t> mask, int nx, int ny) {
  std::vector<std::uint8_t> out(mask.size(), 0);
  auto at = [&](int x, int y) { return x >= 0 && y >= 0 && x < nx && y < ny && mask[std::size_t(y) * nx + x]; };
  for (int y = 0; y < ny; ++y)
    for (int x = 0; x < nx; ++x)
      if (at(x, y) && (!at(x - 1, y) || !at(x + 1, y) || !at(x, y - 1) || !at(x, y + 1)))
        out[std::size_t(y) * nx + x] = 1;
  return out;
}

// RGB raster of slice z: gray base, lung contour, then infected contour on top.
inline std::vector<std::uint8_t> overlay_slice(const GrayVolume& gray, const BinaryMask3D& lung,
                                               const BinaryMask3D& infected, int z) {
  const auto& d = gray.dims();
  const auto base = gray.slice(z);
  const auto lc = contour(lung.slice(z), d.nx, d.ny);
  const auto ic = contour(infected.slice(z), d.nx, d.ny);
  std::vector<std::uint8_t> rgb(base.size() * 3);
  for (std::size_t i = 0; i < base.size(); ++i) {
    Rgb c{base[i], base[i], base[i]};
    if (lc[i]) c = kLungColor;
    if (ic[i]) c = kInfectedColor;
    rgb[3 * i] = c.r;
    rgb[3 * i + 1] = c.g;
    rgb[3 * i + 2] = c.b;
  }
  return rgb;
}

inline std::string overlay_name(int z) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "slice_%04d.ppm", z);
  return buf;
}

inline void emit_overlays(const GrayVolume& gray, const BinaryMask3D& lung, const BinaryMask3D& infected,
                          const fs::path& out_dir) {
  require_same_dims(gray, lung, "volume and lung mask");
  require_same_dims(gray, infected, "volume and infected mask");
  const auto& d = gray.dims();
  for (int z = 0; z < d.nz; ++z)
    write_ppm(out_dir / overlay_name(z), d.nx, d.ny, overlay_slice(gray, lung, infected, z));
}

inline void emit_overlays(const CtVolume& volume, const BinaryMask3D& lung, const BinaryMask3D& infected,
                          const fs::path& out_dir) {
  emit_overlays(normalize_to_gray(clip_hu(volume)), lung, infected, out_dir);
}

}  // namespace ctpoir
