#pragma once

#include "sphseg/volume.hpp"

#include <cstddef>
#include <vector>

namespace sphseg {

enum class SampleMode { Trilinear, Nearest };

/// Sampling specification binding a Cartesian volume and its spherical
/// resampling: origin (continuous voxel coordinate), sample counts along
/// rho/theta/phi, and the radial extent in mm.
///
/// Sample placement: rho_a = rho_max * a/(n_rho-1) on [0, rho_max];
/// theta_b = pi * b/(n_theta-1), poles included; phi_c = -pi + c*2pi/n_phi,
/// half-open on [-pi, pi) so wrap-around interpolation is unambiguous.
struct SphericalGrid {
    Vec3 origin;
    std::size_t n_rho = 0;
    std::size_t n_theta = 0;
    std::size_t n_phi = 0;
    double rho_max = 0.0;

    void validate() const;
};

/// rho-fastest storage: index = a + n_rho * (b + n_theta * c).
struct SphericalVolume {
    SphericalGrid grid;
    std::vector<double> data;

    std::size_t index(std::size_t a, std::size_t b, std::size_t c) const {
        return a + grid.n_rho * (b + grid.n_theta * c);
    }
    double at(std::size_t a, std::size_t b, std::size_t c) const { return data[index(a, b, c)]; }

    void validate() const;
};

/// rho_max covers the farthest volume corner from the origin; sample counts
/// default to n_rho = n_theta = max(dims) and n_phi = 2*max(dims) rounded up
/// to a multiple of 4 (divisibility by 4 keeps quarter-turn shifts exact).
SphericalGrid default_grid(Dims3 dims, Spacing3 spacing, const Vec3& origin);

SphericalVolume to_spherical(const Volume3D& vol, const SphericalGrid& grid, SampleMode mode);
SphericalVolume to_spherical(const LabelVolume& vol, const SphericalGrid& grid);

Volume3D to_cartesian(const SphericalVolume& svol, Dims3 target_dims, Spacing3 spacing,
                      SampleMode mode);
LabelVolume to_cartesian_labels(const SphericalVolume& svol, Dims3 target_dims, Spacing3 spacing);

/// Origin for the spherical transform: the WT-mask centroid, snapped to the
/// nearest mask voxel (Euclidean, mm) when the centroid itself falls outside
/// the mask; the geometric volume center for an empty mask.
Vec3 select_origin(const BinaryMask& coarse_wt);

/// Glue between cascade passes: maps a spherical-space label prediction back
/// to Cartesian space with nearest sampling. cartesian_seg supplies the
/// coarse pass's geometry and must match target_dims.
LabelVolume cascade_refine(const LabelVolume& cartesian_seg, const SphericalVolume& spherical_pred,
                           Dims3 target_dims, Spacing3 spacing);

namespace detail {

/// Per-index direction tables. When n_phi is divisible by 4 the phi table is
/// built from one quadrant and extended by exact 90-degree rotations, so
/// axis-aligned directions are exact and shifting c by n_phi/4 rotates the
/// direction bit-exactly. The theta table mirrors the upper half so both
/// poles come out exactly at (0,0,+-1).
struct AngleTables {
    std::vector<double> cos_phi, sin_phi;
    std::vector<double> cos_theta, sin_theta;
};

AngleTables make_angle_tables(std::size_t n_theta, std::size_t n_phi);

} // namespace detail

} // namespace sphseg
