#include "topopatch/volume_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace topopatch {

namespace fs = std::filesystem;

std::string to_string(const Shape3& s) {
  return "(" + std::to_string(s.nx) + ", " + std::to_string(s.ny) + ", " + std::to_string(s.nz) +
         ")";
}

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <typename T>
void check_finite(const Grid<T>& g, const fs::path& path) {
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!std::isfinite(static_cast<double>(g[i]))) {
      const auto c = g.coords(i);
      throw LoadError(path.string() + ": non-finite value at flat index " + std::to_string(i) + " (" +
                      std::to_string(c[0]) + ", " + std::to_string(c[1]) + ", " +
                      std::to_string(c[2]) + ")");
    }
  }
}

// ---- raw-f32 -------------------------------------------------------------

Volume3D load_raw(const fs::path& path) {
  const fs::path hdr_path = raw_header_path(path);
  std::ifstream hdr(hdr_path);
  if (!hdr) throw LoadError("missing raw header " + hdr_path.string());
  std::string magic, dtype;
  long long nx = 0, ny = 0, nz = 0;
  if (!(hdr >> magic >> nx >> ny >> nz >> dtype) || magic != kRawMagic) {
    throw LoadError("malformed raw header " + hdr_path.string());
  }
  if (dtype != "f32") throw LoadError("unsupported raw dtype '" + dtype + "' in " + hdr_path.string());
  if (nx < 1 || ny < 1 || nz < 1) throw LoadError("non-positive shape in " + hdr_path.string());
  const Shape3 shape{static_cast<std::size_t>(nx), static_cast<std::size_t>(ny),
                     static_cast<std::size_t>(nz)};

  const std::string bytes = read_file(path);
  if (bytes.size() != shape.size() * 4) {
    throw LoadError(path.string() + ": header shape " + to_string(shape) + " needs " +
                    std::to_string(shape.size()) + " floats, file holds " +
                    std::to_string(bytes.size() / 4) +
                    (bytes.size() % 4 ? " plus a partial value" : ""));
  }
  std::vector<float> data(shape.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 3; b >= 0; --b) bits = (bits << 8) | static_cast<unsigned char>(bytes[i * 4 + b]);
    data[i] = std::bit_cast<float>(bits);
  }
  Volume3D vol(shape, std::move(data));
  check_finite(vol, path);
  return vol;
}

void save_raw(const Volume3D& vol, const fs::path& path) {
  std::string bytes(vol.size() * 4, '\0');
  for (std::size_t i = 0; i < vol.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(vol[i]);
    for (int b = 0; b < 4; ++b) bytes[i * 4 + b] = static_cast<char>((bits >> (8 * b)) & 0xFF);
  }
  const auto& s = vol.shape();
  std::ostringstream hdr;
  hdr << kRawMagic << '\n' << s.nx << '\n' << s.ny << '\n' << s.nz << '\n' << "f32\n";
  write_file_atomic(path, bytes);
  write_file_atomic(raw_header_path(path), hdr.str());
}

// ---- NIfTI-1 -------------------------------------------------------------

constexpr std::size_t kNiftiHeaderSize = 348;

enum NiftiType : std::int16_t {
  kUint8 = 2,
  kInt16 = 4,
  kInt32 = 8,
  kFloat32 = 16,
  kFloat64 = 64,
  kInt8 = 256,
  kUint16 = 512,
  kUint32 = 768,
};

class ByteReader {
 public:
  ByteReader(const std::string& buf, bool swap) : buf_(buf), swap_(swap) {}

  template <typename T>
  T at(std::size_t offset) const {
    if (offset + sizeof(T) > buf_.size()) throw LoadError("NIfTI file truncated");
    std::array<char, sizeof(T)> raw{};
    std::memcpy(raw.data(), buf_.data() + offset, sizeof(T));
    if (swap_ != (std::endian::native == std::endian::big)) std::reverse(raw.begin(), raw.end());
    return std::bit_cast<T>(raw);
  }

 private:
  const std::string& buf_;
  bool swap_;  // true when the file is big-endian
};

std::string gz_read_all(const fs::path& path) {
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (f == nullptr) throw LoadError("cannot open " + path.string());
  std::string out;
  std::array<char, 1 << 16> chunk{};
  for (;;) {
    const int n = gzread(f, chunk.data(), static_cast<unsigned>(chunk.size()));
    if (n < 0) {
      gzclose(f);
      throw LoadError("decompression failed for " + path.string());
    }
    if (n == 0) break;
    out.append(chunk.data(), static_cast<std::size_t>(n));
  }
  gzclose(f);
  return out;
}

struct NiftiFile {
  std::string buf;
  bool big_endian = false;
  Shape3 shape;
  std::int16_t datatype = 0;
  std::size_t vox_offset = 0;
  double slope = 1.0;
  double inter = 0.0;
};

NiftiFile read_nifti(const fs::path& path) {
  if (!fs::exists(path)) throw LoadError("missing file " + path.string());
  NiftiFile nf;
  nf.buf = gz_read_all(path);
  if (nf.buf.size() < kNiftiHeaderSize) throw LoadError(path.string() + ": not a NIfTI-1 file");
  const ByteReader le(nf.buf, false);
  if (le.at<std::int32_t>(0) != 348) {
    const ByteReader be(nf.buf, true);
    if (be.at<std::int32_t>(0) != 348) throw LoadError(path.string() + ": bad NIfTI sizeof_hdr");
    nf.big_endian = true;
  }
  const ByteReader r(nf.buf, nf.big_endian);
  if (std::memcmp(nf.buf.data() + 344, "n+1", 3) != 0) {
    throw LoadError(path.string() + ": only single-file NIfTI-1 (n+1) is supported");
  }
  const auto ndim = r.at<std::int16_t>(40);
  if (ndim < 1 || ndim > 7) throw LoadError(path.string() + ": bad dim[0]");
  std::array<std::size_t, 3> dims{1, 1, 1};
  for (int d = 1; d <= ndim; ++d) {
    const auto v = r.at<std::int16_t>(40 + 2 * d);
    if (v < 1) throw LoadError(path.string() + ": non-positive dimension");
    if (d <= 3) {
      dims[d - 1] = static_cast<std::size_t>(v);
    } else if (v != 1) {
      throw LoadError(path.string() + ": volumes with more than 3 dimensions are not supported");
    }
  }
  nf.shape = {dims[0], dims[1], dims[2]};
  nf.datatype = r.at<std::int16_t>(70);
  nf.vox_offset = static_cast<std::size_t>(r.at<float>(108));
  const double slope = r.at<float>(112);
  if (slope != 0.0 && std::isfinite(slope)) {
    nf.slope = slope;
    nf.inter = r.at<float>(116);
  }
  return nf;
}

std::size_t nifti_type_size(std::int16_t t) {
  switch (t) {
    case kUint8:
    case kInt8:
      return 1;
    case kInt16:
    case kUint16:
      return 2;
    case kInt32:
    case kUint32:
    case kFloat32:
      return 4;
    case kFloat64:
      return 8;
    default:
      return 0;
  }
}

std::vector<double> nifti_values(const NiftiFile& nf, const fs::path& path, bool apply_scaling) {
  const std::size_t width = nifti_type_size(nf.datatype);
  if (width == 0) throw LoadError(path.string() + ": unsupported NIfTI datatype " + std::to_string(nf.datatype));
  const std::size_t n = nf.shape.size();
  if (nf.vox_offset + n * width > nf.buf.size()) {
    throw LoadError(path.string() + ": header shape " + to_string(nf.shape) +
                    " exceeds the stored voxel data");
  }
  const ByteReader r(nf.buf, nf.big_endian);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t off = nf.vox_offset + i * width;
    double v = 0;
    switch (nf.datatype) {
      case kUint8: v = r.at<std::uint8_t>(off); break;
      case kInt8: v = r.at<std::int8_t>(off); break;
      case kInt16: v = r.at<std::int16_t>(off); break;
      case kUint16: v = r.at<std::uint16_t>(off); break;
      case kInt32: v = r.at<std::int32_t>(off); break;
      case kUint32: v = r.at<std::uint32_t>(off); break;
      case kFloat32: v = r.at<float>(off); break;
      case kFloat64: v = r.at<double>(off); break;
      default: break;
    }
    out[i] = apply_scaling ? v * nf.slope + nf.inter : v;
  }
  return out;
}

template <typename T>
void put(std::string& buf, std::size_t offset, T value) {
  static_assert(std::endian::native == std::endian::little, "NIfTI writer assumes little-endian host");
  std::memcpy(buf.data() + offset, &value, sizeof(T));
}

std::string nifti_header(const Shape3& s, std::int16_t datatype, std::int16_t bitpix) {
  std::string hdr(kNiftiHeaderSize + 4, '\0');
  put<std::int32_t>(hdr, 0, 348);
  put<std::int16_t>(hdr, 40, 3);
  put<std::int16_t>(hdr, 42, static_cast<std::int16_t>(s.nx));
  put<std::int16_t>(hdr, 44, static_cast<std::int16_t>(s.ny));
  put<std::int16_t>(hdr, 46, static_cast<std::int16_t>(s.nz));
  for (int d = 4; d <= 7; ++d) put<std::int16_t>(hdr, 40 + 2 * d, 1);
  put<std::int16_t>(hdr, 70, datatype);
  put<std::int16_t>(hdr, 72, bitpix);
  for (int d = 0; d < 4; ++d) put<float>(hdr, 76 + 4 * d, 1.0F);
  put<float>(hdr, 108, 352.0F);
  put<float>(hdr, 112, 1.0F);
  put<float>(hdr, 116, 0.0F);
  put<std::uint8_t>(hdr, 123, 2);  // xyzt_units: mm
  put<std::int16_t>(hdr, 254, 1);  // sform_code: scanner
  put<float>(hdr, 280, 1.0F);
  put<float>(hdr, 300, 1.0F);
  put<float>(hdr, 320, 1.0F);
  std::memcpy(hdr.data() + 344, "n+1\0", 4);
  return hdr;
}

void write_nifti(const fs::path& path, const std::string& payload) {
  if (!ends_with(path.string(), ".gz")) {
    write_file_atomic(path, payload);
    return;
  }
  const fs::path tmp = path.string() + ".tmp";
  gzFile f = gzopen(tmp.string().c_str(), "wb6");
  if (f == nullptr) throw IoError("cannot write " + path.string());
  const bool ok = gzwrite(f, payload.data(), static_cast<unsigned>(payload.size())) ==
                  static_cast<int>(payload.size());
  if (gzclose(f) != Z_OK || !ok) {
    std::error_code ec;
    fs::remove(tmp, ec);
    throw IoError("write failed for " + path.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename into " + path.string() + ": " + ec.message());
}

Volume3D load_nifti_volume(const fs::path& path) {
  const NiftiFile nf = read_nifti(path);
  const auto values = nifti_values(nf, path, true);
  std::vector<float> data(values.size());
  std::transform(values.begin(), values.end(), data.begin(),
                 [](double v) { return static_cast<float>(v); });
  Volume3D vol(nf.shape, std::move(data));
  check_finite(vol, path);
  return vol;
}

void save_nifti_volume(const Volume3D& vol, const fs::path& path) {
  std::string payload = nifti_header(vol.shape(), kFloat32, 32);
  const std::size_t off = payload.size();
  payload.resize(off + vol.size() * 4);
  std::memcpy(payload.data() + off, vol.raw().data(), vol.size() * 4);
  write_nifti(path, payload);
}

}  // namespace

// ---- public API ------------------------------------------------------------

VolumeFormat format_from_path(const fs::path& path) {
  const std::string s = path.string();
  return ends_with(s, ".nii") || ends_with(s, ".nii.gz") ? VolumeFormat::kNifti : VolumeFormat::kRawF32;
}

fs::path raw_header_path(const fs::path& raw_path) { return fs::path(raw_path.string() + ".hdr"); }

void write_file_atomic(const fs::path& path, const std::string& data) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      fs::remove(tmp, ec);
      throw IoError("write failed for " + path.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename into " + path.string() + ": " + ec.message());
}

Volume3D load_volume(const fs::path& path, VolumeFormat format) {
  if (!fs::exists(path)) throw LoadError("missing file " + path.string());
  return format == VolumeFormat::kNifti ? load_nifti_volume(path) : load_raw(path);
}

Volume3D load_volume(const fs::path& path) { return load_volume(path, format_from_path(path)); }

void save_volume(const Volume3D& vol, const fs::path& path, VolumeFormat format) {
  if (format == VolumeFormat::kNifti) {
    save_nifti_volume(vol, path);
  } else {
    save_raw(vol, path);
  }
}

void save_volume(const Volume3D& vol, const fs::path& path) { save_volume(vol, path, format_from_path(path)); }

SegMask3D load_mask(const fs::path& path) {
  std::vector<double> values;
  Shape3 shape;
  if (format_from_path(path) == VolumeFormat::kNifti) {
    const NiftiFile nf = read_nifti(path);
    values = nifti_values(nf, path, true);
    shape = nf.shape;
  } else {
    const Volume3D v = load_raw(path);
    values.assign(v.raw().begin(), v.raw().end());
    shape = v.shape();
  }
  std::vector<std::uint8_t> labels(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i];
    if (v != 0 && v != 1 && v != 2 && v != 4) {
      throw LoadError(path.string() + ": illegal label " + std::to_string(v) + " at flat index " +
                      std::to_string(i));
    }
    labels[i] = static_cast<std::uint8_t>(v);
  }
  return SegMask3D(Grid<std::uint8_t>(shape, std::move(labels)));
}

void save_mask(const SegMask3D& mask, const fs::path& path) {
  if (format_from_path(path) == VolumeFormat::kNifti) {
    std::string payload = nifti_header(mask.shape(), kUint8, 8);
    payload.append(mask.labels().raw().begin(), mask.labels().raw().end());
    write_nifti(path, payload);
  } else {
    save_raw(grid_cast<float>(mask.labels()), path);
  }
}

NiftiGeometry read_nifti_geometry(const fs::path& path) {
  const NiftiFile nf = read_nifti(path);
  const ByteReader r(nf.buf, nf.big_endian);
  NiftiGeometry g;
  for (int d = 0; d < 3; ++d) g.pixdim[d] = r.at<float>(80 + 4 * d);
  g.qform_code = r.at<std::int16_t>(252);
  g.sform_code = r.at<std::int16_t>(254);
  for (int row = 0; row < 3; ++row) {
    for (int c = 0; c < 4; ++c) g.srow[row][c] = r.at<float>(280 + 16 * row + 4 * c);
  }
  return g;
}

// ---- SegMask3D / Case ------------------------------------------------------

const char* region_name(Region r) {
  switch (r) {
    case Region::kWholeTumor: return "WT";
    case Region::kTumorCore: return "TC";
    case Region::kEnhancing: return "ET";
    case Region::kEdema: return "edema";
    case Region::kNecrosis: return "necrosis";
  }
  return "?";
}

bool region_contains(Region r, std::uint8_t label) {
  switch (r) {
    case Region::kWholeTumor: return label == 1 || label == 2 || label == 4;
    case Region::kTumorCore: return label == 1 || label == 4;
    case Region::kEnhancing: return label == 4;
    case Region::kEdema: return label == 2;
    case Region::kNecrosis: return label == 1;
  }
  return false;
}

SegMask3D::SegMask3D(Grid<std::uint8_t> labels) : labels_(std::move(labels)) {
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    const auto v = labels_[i];
    if (v != 0 && v != 1 && v != 2 && v != 4) {
      throw ShapeError("segmentation label " + std::to_string(v) + " at flat index " +
                       std::to_string(i) + " is outside {0, 1, 2, 4}");
    }
  }
}

BinaryMask SegMask3D::region(Region r) const {
  BinaryMask out(labels_.shape());
  for (std::size_t i = 0; i < labels_.size(); ++i) out[i] = region_contains(r, labels_[i]) ? 1 : 0;
  return out;
}

void Case::validate() const {
  std::optional<Shape3> first;
  for (const auto& [name, vol] : modalities) {
    if (!first) {
      first = vol.shape();
    } else if (vol.shape() != *first) {
      throw ShapeError("case " + case_id + ": modality " + name + " has shape " + to_string(vol.shape()) +
                       ", expected " + to_string(*first));
    }
  }
  if (mask && first && mask->shape() != *first) {
    throw ShapeError("case " + case_id + ": mask shape " + to_string(mask->shape()) +
                     " differs from volume shape " + to_string(*first));
  }
}

Shape3 Case::shape() const {
  if (!modalities.empty()) return modalities.begin()->second.shape();
  if (mask) return mask->shape();
  throw ConfigError("case " + case_id + " holds no volumes");
}

const Volume3D& Case::flair() const {
  const auto it = modalities.find("flair");
  if (it == modalities.end()) throw ConfigError("case " + case_id + ": flair modality missing");
  return it->second;
}

Slice2D axial_slice(const Volume3D& vol, std::size_t k) {
  const auto& s = vol.shape();
  if (k >= s.nz) {
    throw RangeError("axial slice " + std::to_string(k) + " out of range [0, " + std::to_string(s.nz) + ")");
  }
  Slice2D out(Shape3{s.nx, s.ny, 1});
  for (std::size_t y = 0; y < s.ny; ++y) {
    for (std::size_t x = 0; x < s.nx; ++x) out(x, y) = vol(x, y, k);
  }
  return out;
}

Case load_case(const fs::path& case_dir) {
  if (!fs::is_directory(case_dir)) throw LoadError("not a case directory: " + case_dir.string());
  Case c;
  c.case_id = case_dir.filename().string();
  if (c.case_id.empty()) c.case_id = case_dir.parent_path().filename().string();

  const auto find = [&](const std::string& key) -> std::optional<fs::path> {
    for (const char* ext : {".nii.gz", ".nii", ".raw"}) {
      const fs::path p = case_dir / (c.case_id + "_" + key + ext);
      if (fs::exists(p)) return p;
    }
    return std::nullopt;
  };

  const std::array<std::pair<const char*, const char*>, 5> keys = {
      {{"t1", "t1"}, {"t1ce", "t1gd"}, {"t1gd", "t1gd"}, {"t2", "t2"}, {"flair", "flair"}}};
  for (const auto& [file_key, name] : keys) {
    if (c.modalities.count(name) != 0) continue;
    if (auto p = find(file_key)) c.modalities.emplace(name, load_volume(*p));
  }
  if (auto p = find("seg")) c.mask = load_mask(*p);
  if (c.modalities.empty() && !c.mask) throw LoadError("no volumes found in " + case_dir.string());
  c.validate();
  return c;
}

}  // namespace topopatch
