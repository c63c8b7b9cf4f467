#include "sphseg/postproc.hpp"

#include <algorithm>
#include <stdexcept>

namespace sphseg {

namespace {

void require_matching_dims(const Dims3& a, const Dims3& b, const char* what) {
    if (!(a == b))
        throw std::invalid_argument(std::string(what) + ": volume dims do not match");
}

LabelVolume recompose(const BinaryMask& et, const BinaryMask& tc, const BinaryMask& wt,
                      Dims3 dims, Spacing3 spacing) {
    std::vector<std::uint8_t> labels(dims.count(), 0);
    const auto& e = et.values();
    const auto& t = tc.values();
    const auto& w = wt.values();
    for (std::size_t n = 0; n < labels.size(); ++n) {
        if (e[n])
            labels[n] = 4;
        else if (t[n])
            labels[n] = 1;
        else if (w[n])
            labels[n] = 2;
    }
    return LabelVolume(dims, spacing, std::move(labels));
}

} // namespace

void StructuringElement::validate() const {
    bool has_center = false;
    for (const auto& o : offsets) {
        if (o == std::array<int, 3>{0, 0, 0})
            has_center = true;
        const std::array<int, 3> neg{-o[0], -o[1], -o[2]};
        if (std::find(offsets.begin(), offsets.end(), neg) == offsets.end())
            throw std::invalid_argument("structuring element is not symmetric under negation");
    }
    if (!has_center)
        throw std::invalid_argument("structuring element must contain (0,0,0)");
}

StructuringElement StructuringElement::cross6() {
    return StructuringElement{{{0, 0, 0},
                               {1, 0, 0},
                               {-1, 0, 0},
                               {0, 1, 0},
                               {0, -1, 0},
                               {0, 0, 1},
                               {0, 0, -1}}};
}

StructuringElement StructuringElement::box26() {
    StructuringElement se;
    for (int dk = -1; dk <= 1; ++dk)
        for (int dj = -1; dj <= 1; ++dj)
            for (int di = -1; di <= 1; ++di)
                se.offsets.push_back({di, dj, dk});
    return se;
}

LabelVolume cartesian_wt_filter(const LabelVolume& spherical_seg, const LabelVolume& cartesian_seg) {
    require_matching_dims(spherical_seg.dims(), cartesian_seg.dims(), "cartesian_wt_filter");
    if (!(spherical_seg.spacing() == cartesian_seg.spacing()))
        throw std::invalid_argument("cartesian_wt_filter: voxel spacing does not match");

    const BinaryMask wt = region_mask(cartesian_seg, Region::WT);
    std::vector<std::uint8_t> labels = spherical_seg.labels();
    const auto& keep = wt.values();
    for (std::size_t n = 0; n < labels.size(); ++n)
        if (!keep[n])
            labels[n] = 0;
    return LabelVolume(spherical_seg.dims(), spherical_seg.spacing(), std::move(labels));
}

LabelVolume intersect_3ch(const LabelVolume& seg_a, const LabelVolume& seg_b) {
    require_matching_dims(seg_a.dims(), seg_b.dims(), "intersect_3ch");

    const Dims3 dims = seg_a.dims();
    BinaryMask et(dims, seg_a.spacing());
    BinaryMask tc(dims, seg_a.spacing());
    BinaryMask wt(dims, seg_a.spacing());
    const auto& la = seg_a.labels();
    const auto& lb = seg_b.labels();
    for (std::size_t n = 0; n < la.size(); ++n) {
        const std::uint8_t a = la[n], b = lb[n];
        et.values()[n] = (a == 4 && b == 4) ? 1 : 0;
        tc.values()[n] = ((a == 1 || a == 4) && (b == 1 || b == 4)) ? 1 : 0;
        wt.values()[n] = (a != 0 && b != 0) ? 1 : 0;
    }
    return recompose(et, tc, wt, dims, seg_a.spacing());
}

namespace {

template <bool Erode>
BinaryMask morph_pass(const BinaryMask& mask, const StructuringElement& se) {
    const auto& d = mask.dims();
    BinaryMask out(d, mask.spacing());
    const std::int64_t nx = std::int64_t(d.nx), ny = std::int64_t(d.ny), nz = std::int64_t(d.nz);
    for (std::int64_t k = 0; k < nz; ++k)
        for (std::int64_t j = 0; j < ny; ++j)
            for (std::int64_t i = 0; i < nx; ++i) {
                bool result = Erode;
                for (const auto& o : se.offsets) {
                    const std::int64_t ii = i + o[0], jj = j + o[1], kk = k + o[2];
                    const bool inside = ii >= 0 && jj >= 0 && kk >= 0 && ii < nx && jj < ny && kk < nz;
                    const bool v = inside && mask.at(std::size_t(ii), std::size_t(jj), std::size_t(kk));
                    if (Erode && !v) {
                        result = false;
                        break;
                    }
                    if (!Erode && v) {
                        result = true;
                        break;
                    }
                }
                out.set(std::size_t(i), std::size_t(j), std::size_t(k), result);
            }
    return out;
}

} // namespace

BinaryMask erode(const BinaryMask& mask, const StructuringElement& se) {
    se.validate();
    return morph_pass<true>(mask, se);
}

BinaryMask dilate(const BinaryMask& mask, const StructuringElement& se) {
    se.validate();
    return morph_pass<false>(mask, se);
}

BinaryMask binary_opening(const BinaryMask& mask, const StructuringElement& se,
                          std::size_t iterations) {
    se.validate();
    if (iterations == 0)
        throw std::invalid_argument("opening needs at least one iteration");
    BinaryMask m = mask;
    for (std::size_t it = 0; it < iterations; ++it)
        m = morph_pass<true>(m, se);
    for (std::size_t it = 0; it < iterations; ++it)
        m = morph_pass<false>(m, se);
    return m;
}

std::pair<std::vector<std::uint32_t>, std::vector<std::size_t>>
label_components(const BinaryMask& mask, Connectivity connectivity) {
    const auto& d = mask.dims();
    std::vector<std::uint32_t> labels(d.count(), 0);
    std::vector<std::size_t> sizes;

    std::vector<std::array<int, 3>> neigh;
    for (int dk = -1; dk <= 1; ++dk)
        for (int dj = -1; dj <= 1; ++dj)
            for (int di = -1; di <= 1; ++di) {
                if (di == 0 && dj == 0 && dk == 0)
                    continue;
                if (connectivity == Connectivity::Faces6 && std::abs(di) + std::abs(dj) + std::abs(dk) != 1)
                    continue;
                neigh.push_back({di, dj, dk});
            }

    const std::int64_t nx = std::int64_t(d.nx), ny = std::int64_t(d.ny), nz = std::int64_t(d.nz);
    std::vector<std::size_t> stack;
    std::uint32_t next = 0;
    for (std::size_t seed = 0; seed < labels.size(); ++seed) {
        if (!mask.values()[seed] || labels[seed] != 0)
            continue;
        ++next;
        std::size_t size = 0;
        labels[seed] = next;
        stack.push_back(seed);
        while (!stack.empty()) {
            const std::size_t n = stack.back();
            stack.pop_back();
            ++size;
            const std::int64_t i = std::int64_t(n % d.nx);
            const std::int64_t j = std::int64_t((n / d.nx) % d.ny);
            const std::int64_t k = std::int64_t(n / (d.nx * d.ny));
            for (const auto& o : neigh) {
                const std::int64_t ii = i + o[0], jj = j + o[1], kk = k + o[2];
                if (ii < 0 || jj < 0 || kk < 0 || ii >= nx || jj >= ny || kk >= nz)
                    continue;
                const std::size_t m =
                    std::size_t(ii) + d.nx * (std::size_t(jj) + d.ny * std::size_t(kk));
                if (mask.values()[m] && labels[m] == 0) {
                    labels[m] = next;
                    stack.push_back(m);
                }
            }
        }
        sizes.push_back(size);
    }
    return {std::move(labels), std::move(sizes)};
}

BinaryMask filter_small_components(const BinaryMask& mask, std::size_t min_voxels,
                                   Connectivity connectivity) {
    if (min_voxels < 1)
        throw std::invalid_argument("min_voxels must be >= 1");
    auto [labels, sizes] = label_components(mask, connectivity);
    BinaryMask out(mask.dims(), mask.spacing());
    for (std::size_t n = 0; n < labels.size(); ++n)
        out.values()[n] = (labels[n] != 0 && sizes[labels[n] - 1] >= min_voxels) ? 1 : 0;
    return out;
}

LabelVolume et_restore_or_erase(const LabelVolume& seg, const EtCleanupParams& params) {
    if (params.min_component_voxels < 1)
        throw std::invalid_argument("min_component_voxels must be >= 1");

    const BinaryMask et = region_mask(seg, Region::ET);
    const BinaryMask opened = binary_opening(et, StructuringElement::cross6(), params.opening_iterations);
    const BinaryMask cleaned =
        filter_small_components(opened, params.min_component_voxels, Connectivity::Full26);

    if (!cleaned.empty_mask())
        return seg;

    // Nothing credible survived: erase ET entirely. Erased voxels become
    // necrosis so the TC and WT extents are untouched.
    std::vector<std::uint8_t> labels = seg.labels();
    for (auto& v : labels)
        if (v == 4)
            v = 1;
    return LabelVolume(seg.dims(), seg.spacing(), std::move(labels));
}

LabelVolume ensemble_merge(const LabelVolume& seg_et_source, const LabelVolume& seg_wt_tc_source) {
    require_matching_dims(seg_et_source.dims(), seg_wt_tc_source.dims(), "ensemble_merge");

    const Dims3 dims = seg_et_source.dims();
    const auto& la = seg_et_source.labels();
    const auto& lb = seg_wt_tc_source.labels();
    std::vector<std::uint8_t> labels(dims.count(), 0);
    for (std::size_t n = 0; n < labels.size(); ++n) {
        const bool et = la[n] == 4;
        const bool tc = et || lb[n] == 1 || lb[n] == 4;
        const bool wt = tc || lb[n] == 2;
        if (et)
            labels[n] = 4;
        else if (tc)
            labels[n] = 1;
        else if (wt)
            labels[n] = 2;
    }
    return LabelVolume(dims, seg_et_source.spacing(), std::move(labels));
}

} // namespace sphseg
