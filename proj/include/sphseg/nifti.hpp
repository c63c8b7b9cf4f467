#pragma once

#include "sphseg/volume.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace sphseg::nifti {

struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct UnsupportedDatatypeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct UnsupportedShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct TruncationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct RangeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class DataType : std::int16_t {
    Uint8 = 2,
    Int16 = 4,
    Float32 = 16,
    Float64 = 64,
};

int bitpix_for(DataType dt);

/// The NIfTI-1 header fields this library reads and writes. Byte offsets in
/// the 348-byte header (all little-endian in files we emit):
///   sizeof_hdr  int32     @0      dim        int16[8]   @40
///   datatype    int16     @70     bitpix     int16      @72
///   pixdim      float32[8]@76     vox_offset float32    @108
///   scl_slope   float32   @112    scl_inter  float32    @116
///   qform_code  int16     @252    sform_code int16      @254
///   srow_x/y/z  float32[4]@280/296/312       magic      char[4]@344
struct NiftiHeader {
    std::int32_t sizeof_hdr = 348;
    std::array<std::int16_t, 8> dim{};
    std::int16_t datatype_code = 0;
    std::int16_t bitpix = 0;
    std::array<float, 8> pixdim{};
    float vox_offset = 352.0f;
    float scl_slope = 1.0f;
    float scl_inter = 0.0f;
    std::int16_t qform_code = 0;
    std::int16_t sform_code = 1;
    std::array<float, 4> srow_x{};
    std::array<float, 4> srow_y{};
    std::array<float, 4> srow_z{};
    std::array<char, 4> magic{'n', '+', '1', '\0'};
};

/// Decoded file: header plus voxel data widened to double (scl_slope/scl_inter
/// already applied; slope 0 means no scaling per the NIfTI-1 convention).
struct NiftiImage {
    NiftiHeader header;
    Dims3 dims;
    Spacing3 spacing;
    std::vector<double> data;
};

/// Parses a .nii byte stream, transparently inflating a gzip wrapper
/// (leading bytes 0x1F 0x8B). Handles byte-swapped (big-endian) headers.
NiftiImage read_nifti(const std::vector<std::uint8_t>& bytes);

Volume3D to_volume(const NiftiImage& img);
LabelVolume to_label_volume(const NiftiImage& img);

std::vector<std::uint8_t> write_nifti(const Volume3D& vol, DataType dt, bool gzip);
/// Label volumes are always written as uint8.
std::vector<std::uint8_t> write_nifti(const LabelVolume& vol, bool gzip);

Volume3D read_volume_file(const std::filesystem::path& path);
LabelVolume read_label_file(const std::filesystem::path& path);
/// Chooses gzip by ".gz" suffix.
void write_volume_file(const std::filesystem::path& path, const Volume3D& vol,
                       DataType dt = DataType::Float32);
void write_label_file(const std::filesystem::path& path, const LabelVolume& vol);

std::vector<std::uint8_t> gzip_compress(const std::vector<std::uint8_t>& raw);
std::vector<std::uint8_t> gzip_decompress(const std::vector<std::uint8_t>& compressed);

} // namespace sphseg::nifti
