#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "topopatch/grid.hpp"

namespace topopatch {

enum class VolumeFormat { kNifti, kRawF32 };

// Picks the format from the file name: .nii / .nii.gz -> NIfTI, anything
// else -> raw-f32.
VolumeFormat format_from_path(const std::filesystem::path& path);

// Tumor sub-regions built from the BraTS label convention
// (1 = necrosis/NET, 2 = edema, 4 = enhancing tumor).
enum class Region { kWholeTumor, kTumorCore, kEnhancing, kEdema, kNecrosis };

inline constexpr std::array<Region, 5> kAllRegions = {
    Region::kWholeTumor, Region::kTumorCore, Region::kEnhancing, Region::kEdema,
    Region::kNecrosis};

const char* region_name(Region r);
bool region_contains(Region r, std::uint8_t label);

// Segmentation labels restricted to {0, 1, 2, 4}.
class SegMask3D {
 public:
  SegMask3D() = default;
  explicit SegMask3D(Grid<std::uint8_t> labels);

  const Grid<std::uint8_t>& labels() const { return labels_; }
  const Shape3& shape() const { return labels_.shape(); }

  BinaryMask region(Region r) const;
  BinaryMask whole_tumor() const { return region(Region::kWholeTumor); }

  friend bool operator==(const SegMask3D&, const SegMask3D&) = default;

 private:
  Grid<std::uint8_t> labels_;
};

// One subject: co-registered modalities plus an optional label mask.
// Modality keys are normalized to {"t1", "t1gd", "t2", "flair"}.
struct Case {
  std::string case_id;
  std::map<std::string, Volume3D> modalities;
  std::optional<SegMask3D> mask;

  // Throws ShapeError when volumes (or the mask) disagree on shape.
  void validate() const;
  Shape3 shape() const;
  bool has_flair() const { return modalities.count("flair") != 0; }
  // Throws ConfigError naming the case when flair is missing.
  const Volume3D& flair() const;
};

inline constexpr const char* kRawMagic = "TOPOPATCH_RAW";

// Header sidecar of a raw-f32 file: `<file>.hdr`, five lines
// (magic, nx, ny, nz, dtype).
std::filesystem::path raw_header_path(const std::filesystem::path& raw_path);

Volume3D load_volume(const std::filesystem::path& path, VolumeFormat format);
Volume3D load_volume(const std::filesystem::path& path);
void save_volume(const Volume3D& vol, const std::filesystem::path& path, VolumeFormat format);
void save_volume(const Volume3D& vol, const std::filesystem::path& path);

SegMask3D load_mask(const std::filesystem::path& path);
void save_mask(const SegMask3D& mask, const std::filesystem::path& path);

// Voxel-to-world fields read from a NIfTI header; carried, never applied.
struct NiftiGeometry {
  std::array<float, 3> pixdim{1.0F, 1.0F, 1.0F};
  int qform_code = 0;
  int sform_code = 0;
  std::array<std::array<float, 4>, 3> srow{};
};
NiftiGeometry read_nifti_geometry(const std::filesystem::path& path);

// Plane z == k as a 2D grid of shape (nx, ny).
Slice2D axial_slice(const Volume3D& vol, std::size_t k);

// Loads `<dir>/<case>_<modality>.{nii.gz,nii,raw}` and `<case>_seg.*`, where
// <case> is the directory name. "t1ce" files are stored under "t1gd".
Case load_case(const std::filesystem::path& case_dir);

// Writes `data` to `path` through a temp file renamed on success.
void write_file_atomic(const std::filesystem::path& path, const std::string& data);

}  // namespace topopatch
