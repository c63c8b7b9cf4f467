#include "sphseg/volume.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace sphseg {

namespace {

void check_geometry(const Dims3& dims, const Spacing3& spacing) {
    if (dims.nx == 0 || dims.ny == 0 || dims.nz == 0)
        throw std::invalid_argument("volume dims must be positive");
    for (double s : {spacing.sx, spacing.sy, spacing.sz})
        if (!(s > 0.0) || !std::isfinite(s))
            throw std::invalid_argument("voxel spacing must be strictly positive and finite");
}

} // namespace

Volume3D::Volume3D(Dims3 dims, Spacing3 spacing, std::vector<double> data)
    : dims_(dims), spacing_(spacing), data_(std::move(data)) {
    check_geometry(dims_, spacing_);
    if (data_.size() != dims_.count())
        throw std::invalid_argument("volume data length " + std::to_string(data_.size()) +
                                    " does not match dims product " + std::to_string(dims_.count()));
    for (double v : data_)
        if (!std::isfinite(v))
            throw std::invalid_argument("volume contains a non-finite value");
}

Volume3D::Volume3D(Dims3 dims, Spacing3 spacing, double fill)
    : dims_(dims), spacing_(spacing), data_(dims.count(), fill) {
    check_geometry(dims_, spacing_);
    if (!std::isfinite(fill))
        throw std::invalid_argument("volume fill value must be finite");
}

LabelVolume::LabelVolume(Dims3 dims, Spacing3 spacing, std::vector<std::uint8_t> labels)
    : dims_(dims), spacing_(spacing), labels_(std::move(labels)) {
    check_geometry(dims_, spacing_);
    if (labels_.size() != dims_.count())
        throw std::invalid_argument("label data length does not match dims product");
    for (std::uint8_t v : labels_)
        if (!is_valid_label(v))
            throw std::invalid_argument("label value " + std::to_string(int(v)) + " not in {0,1,2,4}");
}

LabelVolume::LabelVolume(Dims3 dims, Spacing3 spacing)
    : dims_(dims), spacing_(spacing), labels_(dims.count(), 0) {
    check_geometry(dims_, spacing_);
}

BinaryMask::BinaryMask(Dims3 dims, Spacing3 spacing)
    : dims_(dims), spacing_(spacing), values_(dims.count(), 0) {
    check_geometry(dims_, spacing_);
}

BinaryMask::BinaryMask(Dims3 dims, Spacing3 spacing, std::vector<std::uint8_t> values)
    : dims_(dims), spacing_(spacing), values_(std::move(values)) {
    check_geometry(dims_, spacing_);
    if (values_.size() != dims_.count())
        throw std::invalid_argument("mask data length does not match dims product");
    for (auto& v : values_)
        v = v ? 1 : 0;
}

std::size_t BinaryMask::count() const {
    return static_cast<std::size_t>(std::count_if(values_.begin(), values_.end(),
                                                  [](std::uint8_t v) { return v != 0; }));
}

const char* region_name(Region r) {
    switch (r) {
        case Region::ET: return "ET";
        case Region::TC: return "TC";
        case Region::WT: return "WT";
    }
    return "?";
}

double sample_trilinear(const Volume3D& vol, const Vec3& p) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
        throw std::invalid_argument("sample coordinate is not finite");

    const auto& d = vol.dims();
    if (p.x < 0.0 || p.y < 0.0 || p.z < 0.0 ||
        p.x > double(d.nx - 1) || p.y > double(d.ny - 1) || p.z > double(d.nz - 1))
        return 0.0;

    const std::size_t i0 = std::min<std::size_t>(std::size_t(p.x), d.nx - 1);
    const std::size_t j0 = std::min<std::size_t>(std::size_t(p.y), d.ny - 1);
    const std::size_t k0 = std::min<std::size_t>(std::size_t(p.z), d.nz - 1);
    const std::size_t i1 = std::min(i0 + 1, d.nx - 1);
    const std::size_t j1 = std::min(j0 + 1, d.ny - 1);
    const std::size_t k1 = std::min(k0 + 1, d.nz - 1);
    const double fx = p.x - double(i0);
    const double fy = p.y - double(j0);
    const double fz = p.z - double(k0);

    const double c000 = vol.at(i0, j0, k0), c100 = vol.at(i1, j0, k0);
    const double c010 = vol.at(i0, j1, k0), c110 = vol.at(i1, j1, k0);
    const double c001 = vol.at(i0, j0, k1), c101 = vol.at(i1, j0, k1);
    const double c011 = vol.at(i0, j1, k1), c111 = vol.at(i1, j1, k1);

    const double c00 = c000 + fx * (c100 - c000);
    const double c10 = c010 + fx * (c110 - c010);
    const double c01 = c001 + fx * (c101 - c001);
    const double c11 = c011 + fx * (c111 - c011);
    const double c0 = c00 + fy * (c10 - c00);
    const double c1 = c01 + fy * (c11 - c01);
    return c0 + fz * (c1 - c0);
}

std::uint8_t sample_nearest(const LabelVolume& vol, const Vec3& p) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
        throw std::invalid_argument("sample coordinate is not finite");

    // Half-up rounding: floor(x + 0.5).
    const double ri = std::floor(p.x + 0.5);
    const double rj = std::floor(p.y + 0.5);
    const double rk = std::floor(p.z + 0.5);
    const auto& d = vol.dims();
    if (ri < 0.0 || rj < 0.0 || rk < 0.0 ||
        ri > double(d.nx - 1) || rj > double(d.ny - 1) || rk > double(d.nz - 1))
        return 0;
    return vol.at(std::size_t(ri), std::size_t(rj), std::size_t(rk));
}

BinaryMask region_mask(const LabelVolume& seg, Region region) {
    BinaryMask mask(seg.dims(), seg.spacing());
    auto& out = mask.values();
    const auto& labels = seg.labels();
    for (std::size_t n = 0; n < labels.size(); ++n) {
        const std::uint8_t v = labels[n];
        bool member = false;
        switch (region) {
            case Region::ET: member = (v == 4); break;
            case Region::TC: member = (v == 1 || v == 4); break;
            case Region::WT: member = (v == 1 || v == 2 || v == 4); break;
        }
        out[n] = member ? 1 : 0;
    }
    return mask;
}

} // namespace sphseg
