#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace oracle {

namespace {

bool mask_at(const BinaryMask& m, std::int64_t i, std::int64_t j, std::int64_t k) {
    const auto& d = m.dims();
    if (i < 0 || j < 0 || k < 0 || i >= std::int64_t(d.nx) || j >= std::int64_t(d.ny) ||
        k >= std::int64_t(d.nz))
        return false;
    return m.at(std::size_t(i), std::size_t(j), std::size_t(k));
}

} // namespace

BinaryMask erode_bruteforce(const BinaryMask& mask, const StructuringElement& se) {
    const auto& d = mask.dims();
    BinaryMask out(d, mask.spacing());
    for (std::size_t k = 0; k < d.nz; ++k)
        for (std::size_t j = 0; j < d.ny; ++j)
            for (std::size_t i = 0; i < d.nx; ++i) {
                bool all = true;
                for (const auto& o : se.offsets)
                    if (!mask_at(mask, std::int64_t(i) + o[0], std::int64_t(j) + o[1],
                                 std::int64_t(k) + o[2])) {
                        all = false;
                        break;
                    }
                out.set(i, j, k, all);
            }
    return out;
}

BinaryMask dilate_bruteforce(const BinaryMask& mask, const StructuringElement& se) {
    const auto& d = mask.dims();
    BinaryMask out(d, mask.spacing());
    for (std::size_t k = 0; k < d.nz; ++k)
        for (std::size_t j = 0; j < d.ny; ++j)
            for (std::size_t i = 0; i < d.nx; ++i) {
                bool any = false;
                for (const auto& o : se.offsets)
                    if (mask_at(mask, std::int64_t(i) + o[0], std::int64_t(j) + o[1],
                                std::int64_t(k) + o[2])) {
                        any = true;
                        break;
                    }
                out.set(i, j, k, any);
            }
    return out;
}

BinaryMask opening_bruteforce(const BinaryMask& mask, const StructuringElement& se,
                              std::size_t iterations) {
    BinaryMask m = mask;
    for (std::size_t it = 0; it < iterations; ++it)
        m = erode_bruteforce(m, se);
    for (std::size_t it = 0; it < iterations; ++it)
        m = dilate_bruteforce(m, se);
    return m;
}

BinaryMask filter_components_bruteforce(const BinaryMask& mask, std::size_t min_voxels,
                                        bool full_26) {
    const auto& d = mask.dims();
    const std::size_t n = d.count();
    std::vector<int> comp(n, -1);
    std::vector<std::size_t> sizes;

    auto neighbors_connected = [&](std::int64_t di, std::int64_t dj, std::int64_t dk) {
        const auto a = std::abs(di) + std::abs(dj) + std::abs(dk);
        if (a == 0)
            return false;
        return full_26 ? true : a == 1;
    };

    for (std::size_t seed = 0; seed < n; ++seed) {
        if (!mask.values()[seed] || comp[seed] >= 0)
            continue;
        const int id = int(sizes.size());
        std::vector<std::size_t> stack{seed};
        comp[seed] = id;
        std::size_t size = 0;
        while (!stack.empty()) {
            const std::size_t cur = stack.back();
            stack.pop_back();
            ++size;
            const std::int64_t i = std::int64_t(cur % d.nx);
            const std::int64_t j = std::int64_t((cur / d.nx) % d.ny);
            const std::int64_t k = std::int64_t(cur / (d.nx * d.ny));
            for (std::int64_t dk = -1; dk <= 1; ++dk)
                for (std::int64_t dj = -1; dj <= 1; ++dj)
                    for (std::int64_t di = -1; di <= 1; ++di) {
                        if (!neighbors_connected(di, dj, dk))
                            continue;
                        if (!mask_at(mask, i + di, j + dj, k + dk))
                            continue;
                        const std::size_t m = std::size_t(i + di) +
                                              d.nx * (std::size_t(j + dj) + d.ny * std::size_t(k + dk));
                        if (comp[m] < 0) {
                            comp[m] = id;
                            stack.push_back(m);
                        }
                    }
        }
        sizes.push_back(size);
    }

    BinaryMask out(d, mask.spacing());
    for (std::size_t idx = 0; idx < n; ++idx)
        out.values()[idx] = (comp[idx] >= 0 && sizes[std::size_t(comp[idx])] >= min_voxels) ? 1 : 0;
    return out;
}

namespace {

std::vector<std::array<double, 3>> surface_mm(const BinaryMask& m) {
    const auto& d = m.dims();
    const auto& s = m.spacing();
    std::vector<std::array<double, 3>> pts;
    for (std::size_t k = 0; k < d.nz; ++k)
        for (std::size_t j = 0; j < d.ny; ++j)
            for (std::size_t i = 0; i < d.nx; ++i) {
                if (!m.at(i, j, k))
                    continue;
                const bool surf = !mask_at(m, std::int64_t(i) - 1, std::int64_t(j), std::int64_t(k)) ||
                                  !mask_at(m, std::int64_t(i) + 1, std::int64_t(j), std::int64_t(k)) ||
                                  !mask_at(m, std::int64_t(i), std::int64_t(j) - 1, std::int64_t(k)) ||
                                  !mask_at(m, std::int64_t(i), std::int64_t(j) + 1, std::int64_t(k)) ||
                                  !mask_at(m, std::int64_t(i), std::int64_t(j), std::int64_t(k) - 1) ||
                                  !mask_at(m, std::int64_t(i), std::int64_t(j), std::int64_t(k) + 1);
                if (surf)
                    pts.push_back({double(i) * s.sx, double(j) * s.sy, double(k) * s.sz});
            }
    return pts;
}

} // namespace

double percentile_bruteforce(std::vector<double> values, double p) {
    std::sort(values.begin(), values.end());
    const double h = p * double(values.size() - 1);
    const std::size_t lo = std::size_t(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - double(lo)) * (values[hi] - values[lo]);
}

double hd95_bruteforce(const BinaryMask& pred, const BinaryMask& truth) {
    const bool pe = pred.empty_mask(), te = truth.empty_mask();
    if (pe && te)
        return 0.0;
    if (pe != te) {
        const auto& d = pred.dims();
        const auto& s = pred.spacing();
        const double ex = double(d.nx) * s.sx, ey = double(d.ny) * s.sy, ez = double(d.nz) * s.sz;
        return std::sqrt(ex * ex + ey * ey + ez * ez);
    }

    const auto sp = surface_mm(pred);
    const auto st = surface_mm(truth);
    auto directed = [](const std::vector<std::array<double, 3>>& from,
                       const std::vector<std::array<double, 3>>& to) {
        std::vector<double> ds;
        ds.reserve(from.size());
        for (const auto& a : from) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& b : to) {
                const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
                best = std::min(best, dx * dx + dy * dy + dz * dz);
            }
            ds.push_back(std::sqrt(best));
        }
        return percentile_bruteforce(ds, 0.95);
    };
    return std::max(directed(sp, st), directed(st, sp));
}

namespace {

double trilinear_ref(const Volume3D& vol, double x, double y, double z) {
    const auto& d = vol.dims();
    if (x < 0 || y < 0 || z < 0 || x > double(d.nx - 1) || y > double(d.ny - 1) ||
        z > double(d.nz - 1))
        return 0.0;
    const std::size_t i0 = std::min(std::size_t(x), d.nx - 1);
    const std::size_t j0 = std::min(std::size_t(y), d.ny - 1);
    const std::size_t k0 = std::min(std::size_t(z), d.nz - 1);
    const std::size_t i1 = std::min(i0 + 1, d.nx - 1);
    const std::size_t j1 = std::min(j0 + 1, d.ny - 1);
    const std::size_t k1 = std::min(k0 + 1, d.nz - 1);
    const double fx = x - double(i0), fy = y - double(j0), fz = z - double(k0);
    double acc = 0.0;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int c = 0; c < 2; ++c) {
                const double w = (a ? fx : 1 - fx) * (b ? fy : 1 - fy) * (c ? fz : 1 - fz);
                acc += w * vol.at(a ? i1 : i0, b ? j1 : j0, c ? k1 : k0);
            }
    return acc;
}

double nearest_ref(const Volume3D& vol, double x, double y, double z) {
    const auto& d = vol.dims();
    const double ri = std::floor(x + 0.5), rj = std::floor(y + 0.5), rk = std::floor(z + 0.5);
    if (ri < 0 || rj < 0 || rk < 0 || ri > double(d.nx - 1) || rj > double(d.ny - 1) ||
        rk > double(d.nz - 1))
        return 0.0;
    return vol.at(std::size_t(ri), std::size_t(rj), std::size_t(rk));
}

} // namespace

SphericalVolume to_spherical_reference(const Volume3D& vol, const SphericalGrid& grid,
                                       bool nearest) {
    constexpr double pi = std::numbers::pi;
    SphericalVolume out;
    out.grid = grid;
    out.data.resize(grid.n_rho * grid.n_theta * grid.n_phi);
    for (std::size_t c = 0; c < grid.n_phi; ++c)
        for (std::size_t b = 0; b < grid.n_theta; ++b)
            for (std::size_t a = 0; a < grid.n_rho; ++a) {
                const double rho = grid.rho_max * double(a) / double(grid.n_rho - 1);
                const double theta = pi * double(b) / double(grid.n_theta - 1);
                const double phi = -pi + 2.0 * pi * double(c) / double(grid.n_phi);
                const double x = grid.origin.x + rho * std::sin(theta) * std::cos(phi) / vol.spacing().sx;
                const double y = grid.origin.y + rho * std::sin(theta) * std::sin(phi) / vol.spacing().sy;
                const double z = grid.origin.z + rho * std::cos(theta) / vol.spacing().sz;
                out.data[a + grid.n_rho * (b + grid.n_theta * c)] =
                    nearest ? nearest_ref(vol, x, y, z) : trilinear_ref(vol, x, y, z);
            }
    return out;
}

Volume3D to_cartesian_reference(const SphericalVolume& svol, Dims3 dims, Spacing3 spacing,
                                bool nearest) {
    constexpr double pi = std::numbers::pi;
    const auto& g = svol.grid;
    Volume3D out(dims, spacing, 0.0);
    for (std::size_t k = 0; k < dims.nz; ++k)
        for (std::size_t j = 0; j < dims.ny; ++j)
            for (std::size_t i = 0; i < dims.nx; ++i) {
                const double dx = (double(i) - g.origin.x) * spacing.sx;
                const double dy = (double(j) - g.origin.y) * spacing.sy;
                const double dz = (double(k) - g.origin.z) * spacing.sz;
                const double rho = std::sqrt(dx * dx + dy * dy + dz * dz);
                if (rho > g.rho_max)
                    continue;
                double v = 0.0;
                if (rho == 0.0) {
                    v = svol.at(0, 0, 0);
                } else {
                    const double theta = std::acos(std::clamp(dz / rho, -1.0, 1.0));
                    const double phi = std::atan2(dy, dx);
                    double fa = rho / g.rho_max * double(g.n_rho - 1);
                    double fb = theta / pi * double(g.n_theta - 1);
                    double fc = (phi + pi) / (2.0 * pi) * double(g.n_phi);
                    fa = std::clamp(fa, 0.0, double(g.n_rho - 1));
                    fb = std::clamp(fb, 0.0, double(g.n_theta - 1));
                    if (fc >= double(g.n_phi))
                        fc -= double(g.n_phi);
                    if (nearest) {
                        const std::size_t a = std::min(std::size_t(std::floor(fa + 0.5)), g.n_rho - 1);
                        const std::size_t b = std::min(std::size_t(std::floor(fb + 0.5)), g.n_theta - 1);
                        std::size_t cc = std::size_t(std::floor(fc + 0.5));
                        if (cc >= g.n_phi)
                            cc -= g.n_phi;
                        v = svol.at(a, b, cc);
                    } else {
                        const std::size_t a0 = std::min(std::size_t(fa), g.n_rho - 2);
                        const std::size_t b0 = std::min(std::size_t(fb), g.n_theta - 2);
                        std::size_t c0 = std::min(std::size_t(fc), g.n_phi - 1);
                        const std::size_t c1 = (c0 + 1) % g.n_phi;
                        const double wa = fa - double(a0), wb = fb - double(b0), wc = fc - double(c0);
                        for (int da = 0; da < 2; ++da)
                            for (int db = 0; db < 2; ++db)
                                for (int dc = 0; dc < 2; ++dc)
                                    v += (da ? wa : 1 - wa) * (db ? wb : 1 - wb) * (dc ? wc : 1 - wc) *
                                         svol.at(a0 + da, b0 + db, dc ? c1 : c0);
                    }
                }
                out.at(i, j, k) = v;
            }
    return out;
}

double kl_univariate_quadrature(double mu, double sigma) {
    // Integrate p(x) ln(p(x)/q(x)) over mu +- 12 sigma-ish support.
    const double lo = std::min(mu - 12.0 * sigma, -12.0);
    const double hi = std::max(mu + 12.0 * sigma, 12.0);
    const std::size_t steps = 400000;
    const double h = (hi - lo) / double(steps);
    auto integrand = [&](double x) {
        const double zp = (x - mu) / sigma;
        const double log_p = -0.5 * zp * zp - std::log(sigma) - 0.5 * std::log(2.0 * std::numbers::pi);
        const double log_q = -0.5 * x * x - 0.5 * std::log(2.0 * std::numbers::pi);
        return std::exp(log_p) * (log_p - log_q);
    };
    double acc = 0.5 * (integrand(lo) + integrand(hi));
    for (std::size_t i = 1; i < steps; ++i)
        acc += integrand(lo + double(i) * h);
    return acc * h;
}

double intercept_only_tweedie_mu(const std::vector<double>& y, double power) {
    auto mean_dev = [&](double mu) {
        double acc = 0.0;
        for (double v : y)
            acc += 2.0 * (std::pow(v, 2.0 - power) / ((1.0 - power) * (2.0 - power)) -
                          v * std::pow(mu, 1.0 - power) / (1.0 - power) +
                          std::pow(mu, 2.0 - power) / (2.0 - power));
        return acc / double(y.size());
    };
    double lo = *std::min_element(y.begin(), y.end()) * 0.5;
    double hi = *std::max_element(y.begin(), y.end()) * 2.0;
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = hi - gr * (hi - lo), b = lo + gr * (hi - lo);
    for (int it = 0; it < 300; ++it) {
        if (mean_dev(a) < mean_dev(b))
            hi = b;
        else
            lo = a;
        a = hi - gr * (hi - lo);
        b = lo + gr * (hi - lo);
    }
    return (lo + hi) / 2.0;
}

BinaryMask random_mask(Dims3 dims, Spacing3 spacing, double fill_prob, std::mt19937_64& rng) {
    BinaryMask m(dims, spacing);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& v : m.values())
        v = u(rng) < fill_prob ? 1 : 0;
    return m;
}

Volume3D random_volume(Dims3 dims, Spacing3 spacing, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 100.0);
    std::vector<double> data(dims.count());
    for (auto& v : data)
        v = u(rng);
    return Volume3D(dims, spacing, std::move(data));
}

LabelVolume random_label_volume(Dims3 dims, Spacing3 spacing, std::mt19937_64& rng) {
    static constexpr std::array<std::uint8_t, 4> choices = {0, 1, 2, 4};
    std::uniform_int_distribution<int> u(0, 3);
    std::vector<std::uint8_t> labels(dims.count());
    for (auto& v : labels)
        v = choices[std::size_t(u(rng))];
    return LabelVolume(dims, spacing, std::move(labels));
}

BinaryMask ball_mask(Dims3 dims, Spacing3 spacing, Vec3 center, double radius_mm) {
    BinaryMask m(dims, spacing);
    for (std::size_t k = 0; k < dims.nz; ++k)
        for (std::size_t j = 0; j < dims.ny; ++j)
            for (std::size_t i = 0; i < dims.nx; ++i) {
                const double dx = (double(i) - center.x) * spacing.sx;
                const double dy = (double(j) - center.y) * spacing.sy;
                const double dz = (double(k) - center.z) * spacing.sz;
                m.set(i, j, k, dx * dx + dy * dy + dz * dz <= radius_mm * radius_mm);
            }
    return m;
}

} // namespace oracle
