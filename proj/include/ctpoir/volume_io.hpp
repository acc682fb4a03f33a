#pragma once

// Internal on-disk format: a JSON header plus a sibling .raw payload of
// little-endian samples in x-fastest order. The same scheme carries CT
// volumes (i16), masks (u8) and probability maps (f32).

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <type_traits>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctpoir/error.hpp"
#include "ctpoir/grid.hpp"

namespace ctpoir {

namespace fs = std::filesystem;

namespace detail {

template <typename T>
constexpr const char* dtype_name() {
  if constexpr (std::is_same_v<T, std::int16_t>) return "i16";
  else if constexpr (std::is_same_v<T, std::uint8_t>) return "u8";
  else if constexpr (std::is_same_v<T, float>) return "f32";
}

inline std::vector<char> read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  return std::vector<char>(std::istreambuf_iterator<char>(in), {});
}

inline void write_file_bytes(const fs::path& path, const void* data, std::size_t n) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out.write(static_cast<const char*>(data), std::streamsize(n));
  if (!out) throw Error(ErrorKind::Io, "short write to " + path.string());
}

inline void write_text(const fs::path& path, const std::string& text) {
  write_file_bytes(path, text.data(), text.size());
}

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
void store_le(const T& value, char* out) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  std::memcpy(out, buf, sizeof(T));
}

template <typename T>
T load_le(const char* in) {
  char buf[sizeof(T)];
  std::memcpy(buf, in, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  T value;
  std::memcpy(&value, buf, sizeof(T));
  return value;
}

}  // namespace detail

// The payload file that sits next to a header: "case.json" -> "case.raw".
inline fs::path raw_path_for(const fs::path& header) {
  auto p = header;
  p.replace_extension(".raw");
  return p;
}

struct RawHeader {
  Dims dims;
  Spacing spacing;
  std::string case_id;
  std::string dtype;
};

inline nlohmann::json header_json(const Dims& d, const Spacing& s, const char* dtype,
                                  const std::string* case_id) {
  nlohmann::json j;
  j["dims"] = {d.nx, d.ny, d.nz};
  j["spacing"] = {s.sx, s.sy, s.sz};
  j["byte_order"] = "LE";
  j["dtype"] = dtype;
  if (case_id) j["case_id"] = *case_id;
  return j;
}

inline RawHeader read_header(const fs::path& header) {
  const auto bytes = detail::read_file_bytes(header);
  RawHeader h;
  try {
    const auto j = nlohmann::json::parse(bytes.begin(), bytes.end());
    const auto& d = j.at("dims");
    const auto& s = j.at("spacing");
    if (d.size() != 3 || s.size() != 3) throw Error(ErrorKind::Parse, "dims and spacing need 3 entries");
    h.dims = {d[0].get<int>(), d[1].get<int>(), d[2].get<int>()};
    h.spacing = {s[0].get<double>(), s[1].get<double>(), s[2].get<double>()};
    h.dtype = j.at("dtype").get<std::string>();
    if (j.value("byte_order", std::string("LE")) != "LE")
      throw Error(ErrorKind::Parse, "only byte_order LE is supported");
    h.case_id = j.value("case_id", std::string{});
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, header.string() + ": " + e.what());
  }
  validate_geometry(h.dims, h.spacing);
  return h;
}

template <typename T>
void write_grid(const Grid<T>& grid, const fs::path& header, const std::string* case_id = nullptr) {
  const auto j = header_json(grid.dims(), grid.spacing(), detail::dtype_name<T>(), case_id);
  detail::write_text(header, j.dump(2) + "\n");

  std::vector<char> payload(grid.size() * sizeof(T));
  for (std::size_t i = 0; i < grid.size(); ++i) detail::store_le(grid[i], payload.data() + i * sizeof(T));
  detail::write_file_bytes(raw_path_for(header), payload.data(), payload.size());
}

template <typename T>
Grid<T> read_grid(const fs::path& header, RawHeader* out_header = nullptr) {
  auto h = read_header(header);
  if (h.dtype != detail::dtype_name<T>())
    throw Error(ErrorKind::HeaderMismatch,
                header.string() + ": dtype " + h.dtype + ", expected " + detail::dtype_name<T>());
  const auto payload = detail::read_file_bytes(raw_path_for(header));
  const auto expected = h.dims.voxels() * sizeof(T);
  if (payload.size() != expected)
    throw Error(ErrorKind::HeaderMismatch, raw_path_for(header).string() + ": payload is " +
                                               std::to_string(payload.size()) + " bytes, header implies " +
                                               std::to_string(expected));
  std::vector<T> data(h.dims.voxels());
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = detail::load_le<T>(payload.data() + i * sizeof(T));
  if (out_header) *out_header = h;
  return Grid<T>(h.dims, h.spacing, std::move(data));
}

inline void write_internal(const CtVolume& volume, const fs::path& header) {
  write_grid<std::int16_t>(volume, header, &volume.case_id);
}

inline CtVolume read_internal(const fs::path& header) {
  RawHeader h;
  auto g = read_grid<std::int16_t>(header, &h);
  return CtVolume(std::move(g), h.case_id);
}

inline void write_mask(const BinaryMask3D& mask, const fs::path& header) { write_grid<std::uint8_t>(mask, header); }

inline BinaryMask3D read_mask(const fs::path& header) {
  auto g = read_grid<std::uint8_t>(header);
  for (std::size_t i = 0; i < g.size(); ++i)
    if (g[i] > 1)
      throw Error(ErrorKind::ValueOutOfRange, header.string() + ": mask voxel " + std::to_string(i) +
                                                  " is " + std::to_string(int(g[i])) + ", expected 0 or 1");
  return BinaryMask3D(g.dims(), g.spacing(), std::move(g.data()));
}

inline void write_probmap(const ProbabilityMap3D& map, const fs::path& header) { write_grid<float>(map, header); }

// Loads a probability map produced by an external segmenter; every value
// must lie in [0, 1] (NaN is rejected).
inline ProbabilityMap3D load_probmaps(const fs::path& header) {
  auto g = read_grid<float>(header);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const float v = g[i];
    if (!(v >= 0.0f && v <= 1.0f))
      throw Error(ErrorKind::ValueOutOfRange,
                  header.string() + ": voxel " + std::to_string(i) + " = " + std::to_string(v));
  }
  return ProbabilityMap3D(g.dims(), g.spacing(), std::move(g.data()));
}

}  // namespace ctpoir
