#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace sphseg {

struct Dims3 {
    std::size_t nx = 0;
    std::size_t ny = 0;
    std::size_t nz = 0;

    std::size_t count() const { return nx * ny * nz; }
    bool operator==(const Dims3&) const = default;
};

/// Voxel size in mm along each axis; all components strictly positive.
struct Spacing3 {
    double sx = 1.0;
    double sy = 1.0;
    double sz = 1.0;

    bool operator==(const Spacing3&) const = default;
};

/// Continuous coordinate in voxel index space (not mm).
struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
};

struct VoxelIndex {
    std::size_t i = 0;
    std::size_t j = 0;
    std::size_t k = 0;

    bool operator==(const VoxelIndex&) const = default;
};

/// Dense 3D scalar grid, x-fastest memory order (matches NIfTI on disk).
class Volume3D {
public:
    Volume3D() = default;
    Volume3D(Dims3 dims, Spacing3 spacing, std::vector<double> data);
    Volume3D(Dims3 dims, Spacing3 spacing, double fill = 0.0);

    const Dims3& dims() const { return dims_; }
    const Spacing3& spacing() const { return spacing_; }
    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    std::size_t index(std::size_t i, std::size_t j, std::size_t k) const {
        return i + dims_.nx * (j + dims_.ny * k);
    }
    double at(std::size_t i, std::size_t j, std::size_t k) const { return data_[index(i, j, k)]; }
    double& at(std::size_t i, std::size_t j, std::size_t k) { return data_[index(i, j, k)]; }

private:
    Dims3 dims_;
    Spacing3 spacing_;
    std::vector<double> data_;
};

/// BraTS segmentation labels: 0 background, 1 necrosis, 2 edema, 4 enhancing tumor.
class LabelVolume {
public:
    static constexpr std::array<std::uint8_t, 4> kValidLabels = {0, 1, 2, 4};
    static bool is_valid_label(std::uint8_t v) { return v == 0 || v == 1 || v == 2 || v == 4; }

    LabelVolume() = default;
    LabelVolume(Dims3 dims, Spacing3 spacing, std::vector<std::uint8_t> labels);
    LabelVolume(Dims3 dims, Spacing3 spacing);

    const Dims3& dims() const { return dims_; }
    const Spacing3& spacing() const { return spacing_; }
    const std::vector<std::uint8_t>& labels() const { return labels_; }

    std::size_t index(std::size_t i, std::size_t j, std::size_t k) const {
        return i + dims_.nx * (j + dims_.ny * k);
    }
    std::uint8_t at(std::size_t i, std::size_t j, std::size_t k) const { return labels_[index(i, j, k)]; }

    /// Bypasses per-voxel validation; caller must keep labels in {0,1,2,4}.
    void set(std::size_t idx, std::uint8_t v) { labels_[idx] = v; }

private:
    Dims3 dims_;
    Spacing3 spacing_;
    std::vector<std::uint8_t> labels_;
};

/// Boolean grid (stored as 0/1 bytes) with the geometry of its source volume.
class BinaryMask {
public:
    BinaryMask() = default;
    BinaryMask(Dims3 dims, Spacing3 spacing);
    BinaryMask(Dims3 dims, Spacing3 spacing, std::vector<std::uint8_t> values);

    const Dims3& dims() const { return dims_; }
    const Spacing3& spacing() const { return spacing_; }
    const std::vector<std::uint8_t>& values() const { return values_; }
    std::vector<std::uint8_t>& values() { return values_; }

    std::size_t index(std::size_t i, std::size_t j, std::size_t k) const {
        return i + dims_.nx * (j + dims_.ny * k);
    }
    bool at(std::size_t i, std::size_t j, std::size_t k) const { return values_[index(i, j, k)] != 0; }
    void set(std::size_t i, std::size_t j, std::size_t k, bool v) { values_[index(i, j, k)] = v ? 1 : 0; }

    std::size_t count() const;
    bool empty_mask() const { return count() == 0; }

private:
    Dims3 dims_;
    Spacing3 spacing_;
    std::vector<std::uint8_t> values_;
};

enum class Region { ET, TC, WT };

const char* region_name(Region r);

/// Trilinear interpolation of the 8 surrounding voxels. Coordinates outside
/// [0, dim-1] on any axis return 0 (air in skull-stripped MRI).
double sample_trilinear(const Volume3D& vol, const Vec3& p);

/// Nearest-neighbor label lookup; ties round half up. Out of bounds returns 0.
std::uint8_t sample_nearest(const LabelVolume& vol, const Vec3& p);

/// ET = {4}, TC = {1,4}, WT = {1,2,4}; the nesting ET <= TC <= WT holds for
/// every label volume by construction.
BinaryMask region_mask(const LabelVolume& seg, Region region);

} // namespace sphseg
