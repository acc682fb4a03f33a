#pragma once

// Minimal DICOM series support: uncompressed little-endian CT slices only
// (explicit or implicit VR). Enough to ingest a typical axial CT series and
// to emit synthetic ones for testing; not a general DICOM toolkit.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ctpoir/error.hpp"
#include "ctpoir/grid.hpp"
#include "ctpoir/parallel.hpp"
#include "ctpoir/rng.hpp"
#include "ctpoir/volume_io.hpp"

namespace ctpoir {

inline constexpr std::string_view kImplicitVrLittleEndian = "1.2.840.10008.1.2";
inline constexpr std::string_view kExplicitVrLittleEndian = "1.2.840.10008.1.2.1";

struct DicomTag {
  std::uint16_t group;
  std::uint16_t element;

  std::uint32_t key() const { return (std::uint32_t(group) << 16) | element; }
  std::string str() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "(%04X,%04X)", group, element);
    return buf;
  }
};

namespace tags {
inline constexpr DicomTag TransferSyntax{0x0002, 0x0010};
inline constexpr DicomTag PatientId{0x0010, 0x0020};
inline constexpr DicomTag SliceThickness{0x0018, 0x0050};
inline constexpr DicomTag InstanceNumber{0x0020, 0x0013};
inline constexpr DicomTag ImagePosition{0x0020, 0x0032};
inline constexpr DicomTag Rows{0x0028, 0x0010};
inline constexpr DicomTag Columns{0x0028, 0x0011};
inline constexpr DicomTag PixelSpacing{0x0028, 0x0030};
inline constexpr DicomTag BitsAllocated{0x0028, 0x0100};
inline constexpr DicomTag PixelRepresentation{0x0028, 0x0103};
inline constexpr DicomTag RescaleIntercept{0x0028, 0x1052};
inline constexpr DicomTag RescaleSlope{0x0028, 0x1053};
inline constexpr DicomTag PixelData{0x7FE0, 0x0010};
}  // namespace tags

// Calibration and position bookkeeping for one slice.
struct SliceMeta {
  int index = 0;  // position of the file in directory listing order
  double z_position_mm = 0.0;
  double rescale_slope = 1.0;
  double rescale_intercept = 0.0;
};

// Stored value -> HU, rounded half away from zero and saturated to int16.
inline std::int16_t rescale_to_hu(double stored, double slope, double intercept) {
  const double hu = std::round(stored * slope + intercept);
  return std::int16_t(std::clamp(hu, -32768.0, 32767.0));
}

namespace dicom_detail {

inline bool is_long_vr(std::string_view vr) {
  static constexpr std::string_view long_vrs[] = {"OB", "OW", "OF", "SQ", "UT", "UN", "UC",
                                                  "UR", "OD", "OL", "OV", "SV", "UV"};
  return std::find(std::begin(long_vrs), std::end(long_vrs), vr) != std::end(long_vrs);
}

inline constexpr std::uint32_t kUndefinedLength = 0xFFFFFFFFu;

// Raw element values of one parsed file, keyed by tag.
struct ParsedFile {
  std::vector<std::pair<std::uint32_t, std::string_view>> elements;

  std::optional<std::string_view> get(DicomTag tag) const {
    for (const auto& [k, v] : elements)
      if (k == tag.key()) return v;
    return std::nullopt;
  }
};

class Reader {
 public:
  Reader(std::string_view buf, std::string name) : buf_(buf), name_(std::move(name)) {}

  ParsedFile parse() {
    ParsedFile out;
    pos_ = 132;
    // File meta information is always explicit VR little endian.
    while (pos_ + 4 <= buf_.size() && u16(pos_) == 0x0002) read_element(true, out, 0);
    const auto ts_raw = out.get(tags::TransferSyntax);
    if (!ts_raw) throw Error(ErrorKind::MissingTag, name_ + ": " + tags::TransferSyntax.str());
    const auto ts = trim(*ts_raw);
    bool explicit_vr;
    if (ts == kExplicitVrLittleEndian) explicit_vr = true;
    else if (ts == kImplicitVrLittleEndian) explicit_vr = false;
    else throw Error(ErrorKind::UnsupportedTransferSyntax, name_ + ": " + std::string(ts));

    while (pos_ < buf_.size()) read_element(explicit_vr, out, 0);
    return out;
  }

  static std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.back() == '\0' || s.back() == ' ')) s.remove_suffix(1);
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    return s;
  }

 private:
  std::uint16_t u16(std::size_t at) const {
    need(at, 2);
    return detail::load_le<std::uint16_t>(buf_.data() + at);
  }
  std::uint32_t u32(std::size_t at) const {
    need(at, 4);
    return detail::load_le<std::uint32_t>(buf_.data() + at);
  }
  void need(std::size_t at, std::size_t n) const {
    if (at + n > buf_.size()) throw Error(ErrorKind::Parse, name_ + ": truncated element");
  }

  void read_element(bool explicit_vr, ParsedFile& out, int depth) {
    const DicomTag tag{u16(pos_), u16(pos_ + 2)};
    pos_ += 4;
    std::string_view vr;
    std::uint32_t len;
    // Item and delimiter tags never carry a VR.
    if (explicit_vr && tag.group != 0xFFFE) {
      need(pos_, 2);
      vr = buf_.substr(pos_, 2);
      pos_ += 2;
      if (is_long_vr(vr)) {
        len = u32(pos_ + 2);
        pos_ += 6;
      } else {
        len = u16(pos_);
        pos_ += 2;
      }
    } else {
      len = u32(pos_);
      pos_ += 4;
    }

    if (len == kUndefinedLength) {
      if (tag.key() == tags::PixelData.key())
        throw Error(ErrorKind::UnsupportedTransferSyntax, name_ + ": encapsulated pixel data");
      skip_undefined(explicit_vr, depth);
      return;
    }
    need(pos_, len);
    if (depth == 0) out.elements.emplace_back(tag.key(), buf_.substr(pos_, len));
    pos_ += len;
  }

  // Skips a sequence or item of undefined length up to its delimiter.
  void skip_undefined(bool explicit_vr, int depth) {
    if (depth > 32) throw Error(ErrorKind::Parse, name_ + ": sequence nesting too deep");
    ParsedFile ignored;
    while (true) {
      const DicomTag tag{u16(pos_), u16(pos_ + 2)};
      if (tag.group == 0xFFFE && (tag.element == 0xE0DD || tag.element == 0xE00D)) {
        pos_ += 8;
        return;
      }
      if (tag.group == 0xFFFE && tag.element == 0xE000) {
        const auto len = u32(pos_ + 4);
        pos_ += 8;
        if (len == kUndefinedLength) skip_undefined(explicit_vr, depth + 1);
        else {
          need(pos_, len);
          pos_ += len;
        }
        continue;
      }
      read_element(explicit_vr, ignored, depth + 1);
    }
  }

  std::string_view buf_;
  std::string name_;
  std::size_t pos_ = 0;
};

inline std::vector<double> parse_decimal_list(std::string_view raw, const std::string& what) {
  std::vector<double> values;
  raw = Reader::trim(raw);
  std::size_t start = 0;
  while (start <= raw.size()) {
    auto end = raw.find('\\', start);
    if (end == std::string_view::npos) end = raw.size();
    auto item = Reader::trim(raw.substr(start, end - start));
    if (item.size() > 1 && item.front() == '+') item.remove_prefix(1);  // from_chars rejects a leading '+'
    double v = 0;
    const auto res = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || res.ec != std::errc() || res.ptr != item.data() + item.size())
      throw Error(ErrorKind::Parse, what + ": bad decimal '" + std::string(item) + "'");
    values.push_back(v);
    start = end + 1;
  }
  return values;
}

struct SliceData {
  int rows = 0, cols = 0;
  double row_spacing = 0, col_spacing = 0, thickness = 0;
  std::optional<double> z;
  std::optional<long> instance;
  double slope = 1, intercept = 0;
  std::string patient_id;
  std::vector<std::int16_t> hu;
};

inline SliceData decode_slice(const std::vector<char>& bytes, const std::string& name) {
  const std::string_view view(bytes.data(), bytes.size());
  const auto parsed = Reader(view, name).parse();

  auto required = [&](DicomTag tag) {
    auto v = parsed.get(tag);
    if (!v) throw Error(ErrorKind::MissingTag, name + ": " + tag.str());
    return *v;
  };
  auto us = [&](DicomTag tag) {
    const auto v = required(tag);
    if (v.size() < 2) throw Error(ErrorKind::Parse, name + ": short US value for " + tag.str());
    return int(detail::load_le<std::uint16_t>(v.data()));
  };
  auto decimals = [&](DicomTag tag) { return parse_decimal_list(required(tag), name + " " + tag.str()); };

  SliceData s;
  s.rows = us(tags::Rows);
  s.cols = us(tags::Columns);
  const auto spacing = decimals(tags::PixelSpacing);
  if (spacing.size() != 2) throw Error(ErrorKind::Parse, name + ": Pixel Spacing needs 2 values");
  s.row_spacing = spacing[0];
  s.col_spacing = spacing[1];
  s.thickness = decimals(tags::SliceThickness).at(0);
  if (auto ipp = parsed.get(tags::ImagePosition)) {
    const auto pos = parse_decimal_list(*ipp, name + " " + tags::ImagePosition.str());
    if (pos.size() != 3) throw Error(ErrorKind::Parse, name + ": Image Position needs 3 values");
    s.z = pos[2];
  }
  if (auto inst = parsed.get(tags::InstanceNumber)) {
    const auto t = Reader::trim(*inst);
    long n = 0;
    if (std::from_chars(t.data(), t.data() + t.size(), n).ec == std::errc()) s.instance = n;
  }
  if (!s.z && !s.instance) throw Error(ErrorKind::MissingTag, name + ": " + tags::ImagePosition.str());
  s.intercept = decimals(tags::RescaleIntercept).at(0);
  s.slope = decimals(tags::RescaleSlope).at(0);
  if (s.slope == 0.0) throw Error(ErrorKind::Parse, name + ": Rescale Slope is zero");
  if (us(tags::BitsAllocated) != 16)
    throw Error(ErrorKind::UnsupportedTransferSyntax, name + ": only 16-bit pixel data is supported");
  const bool is_signed = us(tags::PixelRepresentation) == 1;
  if (auto pid = parsed.get(tags::PatientId)) s.patient_id = std::string(Reader::trim(*pid));

  const auto pixels = required(tags::PixelData);
  const std::size_t n = std::size_t(s.rows) * s.cols;
  if (n == 0 || pixels.size() < n * 2)
    throw Error(ErrorKind::InconsistentSeries, name + ": pixel data shorter than Rows x Columns");
  s.hu.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const char* p = pixels.data() + 2 * i;
    const double sv = is_signed ? double(detail::load_le<std::int16_t>(p)) : double(detail::load_le<std::uint16_t>(p));
    s.hu[i] = rescale_to_hu(sv, s.slope, s.intercept);
  }
  return s;
}

inline bool has_dicm_magic(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  char head[132];
  if (!in.read(head, sizeof head)) return false;
  return std::memcmp(head + 128, "DICM", 4) == 0;
}

}  // namespace dicom_detail

// Reads every DICOM file in `directory` as one axial series. Slices are
// ordered by the z component of Image Position (Patient), falling back to
// Instance Number when any slice lacks a position.
inline CtVolume read_dicom_series(const fs::path& directory, int threads = 1,
                                  std::vector<SliceMeta>* meta_out = nullptr) {
  if (!fs::is_directory(directory)) throw Error(ErrorKind::Io, directory.string() + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(directory))
    if (entry.is_regular_file() && dicom_detail::has_dicm_magic(entry.path())) files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error(ErrorKind::InconsistentSeries, directory.string() + " holds no DICOM files");

  std::vector<dicom_detail::SliceData> slices(files.size());
  parallel_for(files.size(), threads, [&](std::size_t i) {
    slices[i] = dicom_detail::decode_slice(detail::read_file_bytes(files[i]), files[i].filename().string());
  });

  const auto& first = slices.front();
  for (const auto& s : slices) {
    if (s.rows != first.rows || s.cols != first.cols)
      throw Error(ErrorKind::InconsistentSeries, "slices differ in Rows/Columns");
    if (s.row_spacing != first.row_spacing || s.col_spacing != first.col_spacing)
      throw Error(ErrorKind::InconsistentSeries, "slices differ in Pixel Spacing");
  }

  const bool by_position = std::all_of(slices.begin(), slices.end(), [](const auto& s) { return s.z.has_value(); });
  if (!by_position && !std::all_of(slices.begin(), slices.end(), [](const auto& s) { return s.instance.has_value(); }))
    throw Error(ErrorKind::MissingTag, tags::ImagePosition.str() + " and " + tags::InstanceNumber.str());

  std::vector<std::size_t> order(slices.size());
  std::iota(order.begin(), order.end(), 0);
  auto key = [&](std::size_t i) { return by_position ? *slices[i].z : double(*slices[i].instance); };
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return key(a) < key(b); });
  for (std::size_t i = 1; i < order.size(); ++i)
    if (key(order[i]) == key(order[i - 1]))
      throw Error(ErrorKind::InconsistentSeries, "two slices share the same position");

  double sz = first.thickness;
  if (by_position && order.size() >= 2) {
    const double z0 = *slices[order.front()].z;
    sz = (*slices[order.back()].z - z0) / double(order.size() - 1);
    for (std::size_t i = 1; i < order.size(); ++i) {
      const double step = *slices[order[i]].z - *slices[order[i - 1]].z;
      if (std::abs(step - sz) > 0.01 * sz)
        throw Error(ErrorKind::InconsistentSeries, "slice spacing varies by more than 1%");
    }
  }

  const Dims dims{first.cols, first.rows, int(slices.size())};
  const Spacing spacing{first.col_spacing, first.row_spacing, sz};
  Grid<std::int16_t> grid(dims, spacing);
  if (meta_out) meta_out->clear();
  for (std::size_t z = 0; z < order.size(); ++z) {
    const auto& s = slices[order[z]];
    std::copy(s.hu.begin(), s.hu.end(), grid.slice(int(z)).begin());
    if (meta_out) meta_out->push_back({int(order[z]), s.z.value_or(double(z) * sz), s.slope, s.intercept});
  }
  const std::string id = first.patient_id.empty() ? directory.filename().string() : first.patient_id;
  return CtVolume(std::move(grid), id);
}

struct DicomWriteOptions {
  double rescale_slope = 1.0;
  double rescale_intercept = 0.0;
  bool explicit_vr = true;
  // Name files in a seeded random order so readers cannot rely on names.
  bool shuffle_names = false;
  std::uint64_t seed = 0;
  double z_origin_mm = 0.0;
  // For producing deliberately incomplete or unsupported files in tests.
  std::vector<DicomTag> omit_tags;
  std::string transfer_syntax;  // empty: derived from explicit_vr
};

namespace dicom_detail {

inline std::string format_ds(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, res.ptr);
  if (s.size() > 16) {
    std::snprintf(buf, sizeof buf, "%.10g", v);
    s = buf;
  }
  return s;
}

class Writer {
 public:
  explicit Writer(bool explicit_vr, std::vector<DicomTag> omit = {})
      : explicit_vr_(explicit_vr), omit_(std::move(omit)) {}

  void element(DicomTag tag, std::string_view vr, std::string value, char pad = ' ') {
    for (const auto& t : omit_)
      if (t.key() == tag.key()) return;
    if (value.size() % 2) value.push_back(pad);
    put16(tag.group);
    put16(tag.element);
    if (explicit_vr_) {
      out_.append(vr);
      if (is_long_vr(vr)) {
        put16(0);
        put32(std::uint32_t(value.size()));
      } else {
        put16(std::uint16_t(value.size()));
      }
    } else {
      put32(std::uint32_t(value.size()));
    }
    out_ += value;
  }
  void text(DicomTag tag, std::string_view vr, const std::string& v) { element(tag, vr, v, vr == "UI" ? '\0' : ' '); }
  void us(DicomTag tag, std::uint16_t v) {
    std::string raw(2, '\0');
    detail::store_le(v, raw.data());
    element(tag, "US", raw);
  }

  std::string& bytes() { return out_; }

 private:
  void put16(std::uint16_t v) {
    char b[2];
    detail::store_le(v, b);
    out_.append(b, 2);
  }
  void put32(std::uint32_t v) {
    char b[4];
    detail::store_le(v, b);
    out_.append(b, 4);
  }

  bool explicit_vr_;
  std::vector<DicomTag> omit_;
  std::string out_;
};

}  // namespace dicom_detail

// Writes `volume` as one uncompressed CT slice file per z index.
inline void write_dicom_series(const CtVolume& volume, const fs::path& directory,
                               const DicomWriteOptions& opt = {}) {
  using dicom_detail::format_ds;
  if (opt.rescale_slope == 0.0) throw Error(ErrorKind::InvalidArgument, "rescale slope must be non-zero");
  const auto& d = volume.dims();
  const auto& sp = volume.spacing();

  std::vector<double> stored(volume.size());
  bool any_negative = false;
  for (std::size_t i = 0; i < volume.size(); ++i) {
    stored[i] = std::round((double(volume[i]) - opt.rescale_intercept) / opt.rescale_slope);
    any_negative |= stored[i] < 0;
  }
  const double lo = any_negative ? -32768.0 : 0.0;
  const double hi = any_negative ? 32767.0 : 65535.0;
  for (double v : stored)
    if (v < lo || v > hi) throw Error(ErrorKind::OutOfRange, "stored value does not fit 16 bits");

  std::vector<int> names(std::size_t(d.nz));
  std::iota(names.begin(), names.end(), 0);
  if (opt.shuffle_names) {
    Xoshiro256 rng(opt.seed);
    for (std::size_t i = names.size(); i > 1; --i) std::swap(names[i - 1], names[rng.below(i)]);
  }

  fs::create_directories(directory);
  const std::string ts = !opt.transfer_syntax.empty() ? opt.transfer_syntax
                         : std::string(opt.explicit_vr ? kExplicitVrLittleEndian : kImplicitVrLittleEndian);
  const std::string sop_class = "1.2.840.10008.5.1.4.1.1.2";
  for (int z = 0; z < d.nz; ++z) {
    const std::string sop_instance = "2.25.1" + std::to_string(z + 1);

    dicom_detail::Writer meta(true);
    meta.element({0x0002, 0x0001}, "OB", std::string("\0\1", 2));
    meta.text({0x0002, 0x0002}, "UI", sop_class);
    meta.text({0x0002, 0x0003}, "UI", sop_instance);
    meta.text(tags::TransferSyntax, "UI", ts);
    meta.text({0x0002, 0x0012}, "UI", "2.25.424242");
    dicom_detail::Writer group_length(true);
    std::string len(4, '\0');
    detail::store_le(std::uint32_t(meta.bytes().size()), len.data());
    group_length.element({0x0002, 0x0000}, "UL", len);

    dicom_detail::Writer ds(opt.explicit_vr, opt.omit_tags);
    ds.text({0x0008, 0x0016}, "UI", sop_class);
    ds.text({0x0008, 0x0018}, "UI", sop_instance);
    ds.text({0x0008, 0x0060}, "CS", "CT");
    ds.text(tags::PatientId, "LO", volume.case_id);
    ds.text(tags::SliceThickness, "DS", format_ds(sp.sz));
    ds.text(tags::InstanceNumber, "IS", std::to_string(z + 1));
    const double zpos = opt.z_origin_mm + double(z) * sp.sz;
    ds.text(tags::ImagePosition, "DS", "0\\0\\" + format_ds(zpos));
    ds.us({0x0028, 0x0002}, 1);
    ds.text({0x0028, 0x0004}, "CS", "MONOCHROME2");
    ds.us(tags::Rows, std::uint16_t(d.ny));
    ds.us(tags::Columns, std::uint16_t(d.nx));
    ds.text(tags::PixelSpacing, "DS", format_ds(sp.sy) + "\\" + format_ds(sp.sx));
    ds.us(tags::BitsAllocated, 16);
    ds.us({0x0028, 0x0101}, 16);
    ds.us({0x0028, 0x0102}, 15);
    ds.us(tags::PixelRepresentation, any_negative ? 1 : 0);
    ds.text(tags::RescaleIntercept, "DS", format_ds(opt.rescale_intercept));
    ds.text(tags::RescaleSlope, "DS", format_ds(opt.rescale_slope));

    std::string pixels(d.slice_size() * 2, '\0');
    const std::size_t base = std::size_t(z) * d.slice_size();
    for (std::size_t i = 0; i < d.slice_size(); ++i) {
      const double v = stored[base + i];
      if (any_negative) detail::store_le(std::int16_t(v), pixels.data() + 2 * i);
      else detail::store_le(std::uint16_t(v), pixels.data() + 2 * i);
    }
    ds.element(tags::PixelData, "OW", std::move(pixels));

    std::string file(128, '\0');
    file += "DICM";
    file += group_length.bytes();
    file += meta.bytes();
    file += ds.bytes();
    char name[32];
    std::snprintf(name, sizeof name, "IM%05d.dcm", names[std::size_t(z)]);
    detail::write_file_bytes(directory / name, file.data(), file.size());
  }
}

}  // namespace ctpoir
