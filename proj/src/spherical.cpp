#include "sphseg/spherical.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace sphseg {

namespace {

constexpr double kPi = std::numbers::pi;

bool inside_bounds(const Vec3& p, Dims3 dims) {
    return p.x >= 0.0 && p.y >= 0.0 && p.z >= 0.0 &&
           p.x <= double(dims.nx - 1) && p.y <= double(dims.ny - 1) && p.z <= double(dims.nz - 1);
}

} // namespace

void SphericalGrid::validate() const {
    if (n_rho < 2 || n_theta < 2 || n_phi < 2)
        throw std::invalid_argument("spherical grid needs at least 2 samples per axis");
    if (!(rho_max > 0.0) || !std::isfinite(rho_max))
        throw std::invalid_argument("rho_max must be strictly positive and finite");
    if (!std::isfinite(origin.x) || !std::isfinite(origin.y) || !std::isfinite(origin.z))
        throw std::invalid_argument("grid origin must be finite");
}

void SphericalVolume::validate() const {
    grid.validate();
    if (data.size() != grid.n_rho * grid.n_theta * grid.n_phi)
        throw std::invalid_argument("spherical data length does not match grid sample counts");
}

SphericalGrid default_grid(Dims3 dims, Spacing3 spacing, const Vec3& origin) {
    if (dims.count() == 0)
        throw std::invalid_argument("empty volume");
    if (!inside_bounds(origin, dims))
        throw std::invalid_argument("origin lies outside the volume bounds");

    double rho_max = 0.0;
    for (int corner = 0; corner < 8; ++corner) {
        const double cx = (corner & 1) ? double(dims.nx - 1) : 0.0;
        const double cy = (corner & 2) ? double(dims.ny - 1) : 0.0;
        const double cz = (corner & 4) ? double(dims.nz - 1) : 0.0;
        const double dx = (cx - origin.x) * spacing.sx;
        const double dy = (cy - origin.y) * spacing.sy;
        const double dz = (cz - origin.z) * spacing.sz;
        rho_max = std::max(rho_max, std::sqrt(dx * dx + dy * dy + dz * dz));
    }

    const std::size_t m = std::max({dims.nx, dims.ny, dims.nz});
    SphericalGrid grid;
    grid.origin = origin;
    grid.n_rho = m;
    grid.n_theta = m;
    grid.n_phi = (2 * m + 3) / 4 * 4;
    grid.rho_max = rho_max;
    grid.validate();
    return grid;
}

namespace detail {

AngleTables make_angle_tables(std::size_t n_theta, std::size_t n_phi) {
    AngleTables t;
    t.cos_phi.resize(n_phi);
    t.sin_phi.resize(n_phi);
    t.cos_theta.resize(n_theta);
    t.sin_theta.resize(n_theta);

    if (n_phi % 4 == 0) {
        const std::size_t quarter = n_phi / 4;
        for (std::size_t c = 0; c < n_phi; ++c) {
            const std::size_t q = c / quarter;
            const double alpha = 2.0 * kPi * (double(c % quarter) / double(n_phi));
            const double ca = std::cos(alpha);
            const double sa = std::sin(alpha);
            // phi_c = alpha - pi + q*pi/2
            switch (q) {
                case 0: t.cos_phi[c] = -ca; t.sin_phi[c] = -sa; break;
                case 1: t.cos_phi[c] = sa;  t.sin_phi[c] = -ca; break;
                case 2: t.cos_phi[c] = ca;  t.sin_phi[c] = sa;  break;
                case 3: t.cos_phi[c] = -sa; t.sin_phi[c] = ca;  break;
            }
        }
    } else {
        for (std::size_t c = 0; c < n_phi; ++c) {
            const double phi = -kPi + 2.0 * kPi * (double(c) / double(n_phi));
            t.cos_phi[c] = std::cos(phi);
            t.sin_phi[c] = std::sin(phi);
        }
    }

    // Upper half via libm, lower half mirrored so sin(theta) is exactly 0 and
    // cos(theta) exactly -1 at the far pole.
    const std::size_t half = (n_theta - 1) / 2;
    for (std::size_t b = 0; b <= half; ++b) {
        const double theta = kPi * (double(b) / double(n_theta - 1));
        t.cos_theta[b] = std::cos(theta);
        t.sin_theta[b] = std::sin(theta);
    }
    for (std::size_t b = half + 1; b < n_theta; ++b) {
        const std::size_t mirror = n_theta - 1 - b;
        t.cos_theta[b] = -t.cos_theta[mirror];
        t.sin_theta[b] = t.sin_theta[mirror];
    }
    return t;
}

} // namespace detail

namespace {

template <typename Sampler>
SphericalVolume resample_forward(const SphericalGrid& grid, Spacing3 spacing, Sampler&& sample) {
    grid.validate();
    SphericalVolume out;
    out.grid = grid;
    out.data.resize(grid.n_rho * grid.n_theta * grid.n_phi);

    const auto tables = detail::make_angle_tables(grid.n_theta, grid.n_phi);
    std::vector<double> rho(grid.n_rho);
    for (std::size_t a = 0; a < grid.n_rho; ++a)
        rho[a] = grid.rho_max * (double(a) / double(grid.n_rho - 1));

    std::size_t n = 0;
    for (std::size_t c = 0; c < grid.n_phi; ++c) {
        for (std::size_t b = 0; b < grid.n_theta; ++b) {
            // mm direction scaled into index space per axis
            const double dx = tables.sin_theta[b] * tables.cos_phi[c] / spacing.sx;
            const double dy = tables.sin_theta[b] * tables.sin_phi[c] / spacing.sy;
            const double dz = tables.cos_theta[b] / spacing.sz;
            for (std::size_t a = 0; a < grid.n_rho; ++a, ++n) {
                out.data[n] = sample(Vec3{grid.origin.x + rho[a] * dx,
                                          grid.origin.y + rho[a] * dy,
                                          grid.origin.z + rho[a] * dz});
            }
        }
    }
    return out;
}

// Sampling in spherical index space. rho and theta are clamped to the grid,
// phi wraps periodically (index n_phi is index 0).
double sample_spherical(const SphericalVolume& svol, double fa, double fb, double fc,
                        SampleMode mode) {
    const auto& g = svol.grid;
    fa = std::clamp(fa, 0.0, double(g.n_rho - 1));
    fb = std::clamp(fb, 0.0, double(g.n_theta - 1));
    if (fc >= double(g.n_phi))
        fc -= double(g.n_phi);
    if (fc < 0.0)
        fc += double(g.n_phi);

    if (mode == SampleMode::Nearest) {
        const std::size_t a = std::size_t(std::floor(fa + 0.5));
        const std::size_t b = std::size_t(std::floor(fb + 0.5));
        std::size_t c = std::size_t(std::floor(fc + 0.5));
        if (c >= g.n_phi)
            c -= g.n_phi;
        return svol.at(std::min(a, g.n_rho - 1), std::min(b, g.n_theta - 1), c);
    }

    const std::size_t a0 = std::min(std::size_t(fa), g.n_rho - 2);
    const std::size_t b0 = std::min(std::size_t(fb), g.n_theta - 2);
    std::size_t c0 = std::size_t(fc);
    if (c0 >= g.n_phi)
        c0 = g.n_phi - 1;
    const std::size_t c1 = (c0 + 1) % g.n_phi;
    const double wa = fa - double(a0);
    const double wb = fb - double(b0);
    const double wc = fc - double(c0);

    double acc = 0.0;
    for (int da = 0; da < 2; ++da)
        for (int db = 0; db < 2; ++db)
            for (int dc = 0; dc < 2; ++dc) {
                const double w = (da ? wa : 1.0 - wa) * (db ? wb : 1.0 - wb) * (dc ? wc : 1.0 - wc);
                acc += w * svol.at(a0 + da, b0 + db, dc ? c1 : c0);
            }
    return acc;
}

template <typename Store>
void resample_inverse(const SphericalVolume& svol, Dims3 target_dims, Spacing3 spacing,
                      SampleMode mode, Store&& store) {
    svol.validate();
    const auto& g = svol.grid;

    std::size_t n = 0;
    for (std::size_t k = 0; k < target_dims.nz; ++k) {
        for (std::size_t j = 0; j < target_dims.ny; ++j) {
            for (std::size_t i = 0; i < target_dims.nx; ++i, ++n) {
                const double dx = (double(i) - g.origin.x) * spacing.sx;
                const double dy = (double(j) - g.origin.y) * spacing.sy;
                const double dz = (double(k) - g.origin.z) * spacing.sz;
                const double rho = std::sqrt(dx * dx + dy * dy + dz * dz);
                if (rho > g.rho_max) {
                    store(n, 0.0);
                    continue;
                }
                if (rho == 0.0) {
                    // Degenerate rho=0 column; angles undefined, any (b,c) works.
                    store(n, svol.at(0, 0, 0));
                    continue;
                }
                const double theta = std::acos(std::clamp(dz / rho, -1.0, 1.0));
                const double phi = std::atan2(dy, dx);
                const double fa = (rho / g.rho_max) * double(g.n_rho - 1);
                const double fb = (theta / kPi) * double(g.n_theta - 1);
                const double fc = ((phi + kPi) / (2.0 * kPi)) * double(g.n_phi);
                store(n, sample_spherical(svol, fa, fb, fc, mode));
            }
        }
    }
}

} // namespace

SphericalVolume to_spherical(const Volume3D& vol, const SphericalGrid& grid, SampleMode mode) {
    if (mode == SampleMode::Nearest) {
        // Nearest on a scalar volume: go through a value-preserving lookup.
        const auto& d = vol.dims();
        return resample_forward(grid, vol.spacing(), [&](const Vec3& p) -> double {
            if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
                throw std::invalid_argument("sample coordinate is not finite");
            const double ri = std::floor(p.x + 0.5);
            const double rj = std::floor(p.y + 0.5);
            const double rk = std::floor(p.z + 0.5);
            if (ri < 0.0 || rj < 0.0 || rk < 0.0 ||
                ri > double(d.nx - 1) || rj > double(d.ny - 1) || rk > double(d.nz - 1))
                return 0.0;
            return vol.at(std::size_t(ri), std::size_t(rj), std::size_t(rk));
        });
    }
    return resample_forward(grid, vol.spacing(),
                            [&](const Vec3& p) { return sample_trilinear(vol, p); });
}

SphericalVolume to_spherical(const LabelVolume& vol, const SphericalGrid& grid) {
    return resample_forward(grid, vol.spacing(),
                            [&](const Vec3& p) { return double(sample_nearest(vol, p)); });
}

Volume3D to_cartesian(const SphericalVolume& svol, Dims3 target_dims, Spacing3 spacing,
                      SampleMode mode) {
    Volume3D out(target_dims, spacing, 0.0);
    resample_inverse(svol, target_dims, spacing, mode,
                     [&](std::size_t n, double v) { out.data()[n] = v; });
    return out;
}

LabelVolume to_cartesian_labels(const SphericalVolume& svol, Dims3 target_dims, Spacing3 spacing) {
    std::vector<std::uint8_t> labels(target_dims.count(), 0);
    resample_inverse(svol, target_dims, spacing, SampleMode::Nearest, [&](std::size_t n, double v) {
        if (!LabelVolume::is_valid_label(std::uint8_t(v)) || double(std::uint8_t(v)) != v)
            throw std::invalid_argument("spherical prediction contains a non-label value");
        labels[n] = std::uint8_t(v);
    });
    return LabelVolume(target_dims, spacing, std::move(labels));
}

Vec3 select_origin(const BinaryMask& coarse_wt) {
    const auto& d = coarse_wt.dims();
    const auto& s = coarse_wt.spacing();

    double sum_i = 0.0, sum_j = 0.0, sum_k = 0.0;
    std::size_t count = 0;
    for (std::size_t k = 0; k < d.nz; ++k)
        for (std::size_t j = 0; j < d.ny; ++j)
            for (std::size_t i = 0; i < d.nx; ++i)
                if (coarse_wt.at(i, j, k)) {
                    sum_i += double(i);
                    sum_j += double(j);
                    sum_k += double(k);
                    ++count;
                }

    if (count == 0)
        return Vec3{double(d.nx - 1) / 2.0, double(d.ny - 1) / 2.0, double(d.nz - 1) / 2.0};

    const Vec3 centroid{sum_i / double(count), sum_j / double(count), sum_k / double(count)};

    const double ri = std::floor(centroid.x + 0.5);
    const double rj = std::floor(centroid.y + 0.5);
    const double rk = std::floor(centroid.z + 0.5);
    if (ri >= 0 && rj >= 0 && rk >= 0 && ri <= double(d.nx - 1) && rj <= double(d.ny - 1) &&
        rk <= double(d.nz - 1) && coarse_wt.at(std::size_t(ri), std::size_t(rj), std::size_t(rk)))
        return centroid;

    // Centroid fell outside the (non-convex) mask; snap to the nearest mask
    // voxel in mm so the origin is guaranteed to lie within the tumor.
    Vec3 best{0, 0, 0};
    double best_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < d.nz; ++k)
        for (std::size_t j = 0; j < d.ny; ++j)
            for (std::size_t i = 0; i < d.nx; ++i)
                if (coarse_wt.at(i, j, k)) {
                    const double dx = (double(i) - centroid.x) * s.sx;
                    const double dy = (double(j) - centroid.y) * s.sy;
                    const double dz = (double(k) - centroid.z) * s.sz;
                    const double d2 = dx * dx + dy * dy + dz * dz;
                    if (d2 < best_d2) {
                        best_d2 = d2;
                        best = Vec3{double(i), double(j), double(k)};
                    }
                }
    return best;
}

LabelVolume cascade_refine(const LabelVolume& cartesian_seg, const SphericalVolume& spherical_pred,
                           Dims3 target_dims, Spacing3 spacing) {
    if (!(cartesian_seg.dims() == target_dims))
        throw std::invalid_argument("coarse segmentation dims do not match the target dims");
    return to_cartesian_labels(spherical_pred, target_dims, spacing);
}

} // namespace sphseg
