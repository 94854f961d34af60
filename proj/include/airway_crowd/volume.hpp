#pragma once

// CT volume and expert airway-site loading.
//
// Volumes are MetaImage-style: a `Key = Value` text header plus a raw file of
// little-endian signed 16-bit Hounsfield units, x fastest, then y, then z.

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "airway_crowd/errors.hpp"
#include "airway_crowd/geometry.hpp"
#include "airway_crowd/text.hpp"

namespace airway_crowd {

using Dims = std::array<std::size_t, 3>;

class CtVolume {
 public:
  CtVolume(Dims dims, Vec3 spacing, std::vector<std::int16_t> data)
      : dims_(dims), spacing_(spacing), data_(std::move(data)) {
    for (const auto d : dims_) {
      if (d == 0) throw ValidationError("volume dimensions must be positive");
    }
    if (!(spacing_.x > 0.0 && spacing_.y > 0.0 && spacing_.z > 0.0)) {
      throw ValidationError("volume spacing components must be > 0");
    }
    if (data_.size() != voxel_count()) {
      throw ValidationError("volume data length " + std::to_string(data_.size()) +
                            " does not match dims " + std::to_string(voxel_count()));
    }
  }

  const Dims& dims() const { return dims_; }
  const Vec3& spacing() const { return spacing_; }
  const std::vector<std::int16_t>& data() const { return data_; }
  std::size_t voxel_count() const { return dims_[0] * dims_[1] * dims_[2]; }

  std::int16_t at(std::size_t x, std::size_t y, std::size_t z) const {
    return data_[(z * dims_[1] + y) * dims_[0] + x];
  }

  /// Smallest spacing component; the isotropic resampling unit in mm.
  double min_spacing() const { return std::min({spacing_.x, spacing_.y, spacing_.z}); }

  /// True when a continuous voxel coordinate lies within [0, n-1] on every axis.
  bool contains(const Vec3& p) const {
    for (std::size_t a = 0; a < 3; ++a) {
      if (!(p[a] >= 0.0 && p[a] <= static_cast<double>(dims_[a] - 1))) return false;
    }
    return true;
  }

  bool operator==(const CtVolume&) const = default;

 private:
  Dims dims_;
  Vec3 spacing_;
  std::vector<std::int16_t> data_;
};

/// Continuous voxel coordinates <-> millimetres (origin at voxel 0).
inline Vec3 voxel_to_mm(const Vec3& p, const Vec3& spacing) { return hadamard(p, spacing); }
inline Vec3 mm_to_voxel(const Vec3& p, const Vec3& spacing) { return divide(p, spacing); }

struct AirwaySite {
  std::string site_id;
  Vec3 location;     // continuous voxel coordinates
  Vec3 orientation;  // unit vector along the airway
  double expert_lumen_area{0.0};  // mm^2
  double expert_wall_area{0.0};   // mm^2
};

namespace detail {

inline std::map<std::string, std::string> read_header(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open volume header: " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = text::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected 'Key = Value'");
    }
    kv[std::string(text::trim(t.substr(0, eq)))] = std::string(text::trim(t.substr(eq + 1)));
  }
  return kv;
}

inline const std::string& require(const std::map<std::string, std::string>& kv,
                                  const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw FormatError("volume header missing required key " + key);
  return it->second;
}

}  // namespace detail

inline CtVolume load_volume(const std::filesystem::path& header_path) {
  const auto kv = detail::read_header(header_path);

  if (text::trim(detail::require(kv, "NDims")) != "3") {
    throw FormatError("NDims must be 3");
  }
  const auto dim_tok = text::tokens(detail::require(kv, "DimSize"));
  const auto sp_tok = text::tokens(detail::require(kv, "ElementSpacing"));
  if (dim_tok.size() != 3) throw FormatError("DimSize must have 3 entries");
  if (sp_tok.size() != 3) throw FormatError("ElementSpacing must have 3 entries");

  const auto& type = detail::require(kv, "ElementType");
  if (type != "MET_SHORT") throw FormatError("unsupported ElementType " + type);
  if (const auto it = kv.find("BinaryDataByteOrderMSB");
      it != kv.end() && (it->second == "True" || it->second == "true")) {
    throw FormatError("big-endian raw data is not supported");
  }
  if (const auto it = kv.find("CompressedData");
      it != kv.end() && (it->second == "True" || it->second == "true")) {
    throw FormatError("compressed raw data is not supported");
  }

  Dims dims{};
  for (std::size_t a = 0; a < 3; ++a) {
    const auto v = text::parse_int(dim_tok[a], "DimSize");
    if (v <= 0) throw FormatError("DimSize entries must be positive");
    dims[a] = static_cast<std::size_t>(v);
  }
  const Vec3 spacing{text::parse_double(sp_tok[0], "ElementSpacing"),
                     text::parse_double(sp_tok[1], "ElementSpacing"),
                     text::parse_double(sp_tok[2], "ElementSpacing")};

  const auto& data_file = detail::require(kv, "ElementDataFile");
  if (data_file == "LOCAL") throw FormatError("inline (LOCAL) data is not supported");
  const auto raw_path = header_path.parent_path() / data_file;

  std::ifstream raw(raw_path, std::ios::binary);
  if (!raw) throw NotFoundError("cannot open raw data file: " + raw_path.string());
  const std::vector<char> bytes((std::istreambuf_iterator<char>(raw)),
                                std::istreambuf_iterator<char>());
  const std::size_t count = dims[0] * dims[1] * dims[2];
  if (bytes.size() != count * 2) {
    throw FormatError("raw data size mismatch: expected " + std::to_string(count * 2) +
                      " bytes, found " + std::to_string(bytes.size()));
  }
  std::vector<std::int16_t> data(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto lo = static_cast<std::uint16_t>(static_cast<unsigned char>(bytes[2 * i]));
    const auto hi = static_cast<std::uint16_t>(static_cast<unsigned char>(bytes[2 * i + 1]));
    data[i] = static_cast<std::int16_t>(static_cast<std::uint16_t>(lo | (hi << 8)));
  }
  return CtVolume(dims, spacing, std::move(data));
}

/// Writes `<stem>.mhd` + `<stem>.raw`; the header references the raw file by name.
inline void write_volume(const CtVolume& volume, const std::filesystem::path& header_path) {
  auto raw_path = header_path;
  raw_path.replace_extension(".raw");
  {
    std::ofstream raw(raw_path, std::ios::binary | std::ios::trunc);
    if (!raw) throw Error("cannot write " + raw_path.string());
    std::vector<char> bytes(volume.voxel_count() * 2);
    for (std::size_t i = 0; i < volume.voxel_count(); ++i) {
      const auto u = static_cast<std::uint16_t>(volume.data()[i]);
      bytes[2 * i] = static_cast<char>(u & 0xff);
      bytes[2 * i + 1] = static_cast<char>(u >> 8);
    }
    raw.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  std::ofstream hdr(header_path, std::ios::trunc);
  if (!hdr) throw Error("cannot write " + header_path.string());
  const auto& d = volume.dims();
  const auto& s = volume.spacing();
  hdr << "ObjectType = Image\n"
      << "NDims = 3\n"
      << "DimSize = " << d[0] << ' ' << d[1] << ' ' << d[2] << '\n'
      << "ElementSpacing = " << text::format_double(s.x) << ' ' << text::format_double(s.y)
      << ' ' << text::format_double(s.z) << '\n'
      << "BinaryData = True\n"
      << "BinaryDataByteOrderMSB = False\n"
      << "ElementType = MET_SHORT\n"
      << "ElementDataFile = " << raw_path.filename().string() << '\n';
}

inline constexpr std::string_view kSitesHeader =
    "site_id,x,y,z,nx,ny,nz,expert_lumen_area,expert_wall_area";

namespace detail {

inline std::vector<AirwaySite> load_sites_impl(const std::filesystem::path& path,
                                               const CtVolume* volume) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open sites file: " + path.string());
  std::string line;
  if (!std::getline(in, line) || text::trim(line) != kSitesHeader) {
    throw FormatError(path.string() + ": expected header '" + std::string(kSitesHeader) + "'");
  }
  std::vector<AirwaySite> sites;
  std::set<std::string> seen;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    const auto where = path.string() + ":" + std::to_string(lineno) + ": ";
    const auto f = text::split(text::trim(line), ',');
    if (f.size() != 9) throw FormatError(where + "expected 9 fields");
    AirwaySite s;
    s.site_id = std::string(text::trim(f[0]));
    if (s.site_id.empty()) throw FormatError(where + "empty site_id");
    s.location = {text::parse_double(f[1], "x"), text::parse_double(f[2], "y"),
                  text::parse_double(f[3], "z")};
    const Vec3 dir{text::parse_double(f[4], "nx"), text::parse_double(f[5], "ny"),
                   text::parse_double(f[6], "nz")};
    s.expert_lumen_area = text::parse_double(f[7], "expert_lumen_area");
    s.expert_wall_area = text::parse_double(f[8], "expert_wall_area");

    if (!seen.insert(s.site_id).second) {
      throw ValidationError(where + "duplicate site_id " + s.site_id);
    }
    if (volume != nullptr && !volume->contains(s.location)) {
      throw ValidationError(where + "site " + s.site_id + " lies outside the volume");
    }
    if (!(norm(dir) > 0.0)) throw ValidationError(where + "zero orientation vector");
    s.orientation = normalize(dir);
    if (!(s.expert_lumen_area >= 0.0) || !(s.expert_lumen_area < s.expert_wall_area)) {
      throw ValidationError(where + "areas inverted: lumen must be smaller than wall");
    }
    sites.push_back(std::move(s));
  }
  return sites;
}

}  // namespace detail

/// Reads the expert site CSV. Rows keep file order; orientations are normalized.
inline std::vector<AirwaySite> load_sites(const std::filesystem::path& path,
                                          const CtVolume& volume) {
  return detail::load_sites_impl(path, &volume);
}

/// As above, without the volume bounds check (evaluation only needs expert areas).
inline std::vector<AirwaySite> load_sites(const std::filesystem::path& path) {
  return detail::load_sites_impl(path, nullptr);
}

inline void write_sites(const std::vector<AirwaySite>& sites, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << kSitesHeader << '\n';
  for (const auto& s : sites) {
    out << s.site_id << ',' << text::format_double(s.location.x) << ','
        << text::format_double(s.location.y) << ',' << text::format_double(s.location.z) << ','
        << text::format_double(s.orientation.x) << ',' << text::format_double(s.orientation.y)
        << ',' << text::format_double(s.orientation.z) << ','
        << text::format_double(s.expert_lumen_area) << ','
        << text::format_double(s.expert_wall_area) << '\n';
  }
}

}  // namespace airway_crowd
