#include "sphseg/metrics.hpp"

#include "sphseg/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace sphseg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_matching(const BinaryMask& a, const BinaryMask& b) {
    if (!(a.dims() == b.dims()))
        throw std::invalid_argument("mask dims do not match");
}

} // namespace

const RegionMetrics& CaseMetrics::region(Region r) const {
    switch (r) {
        case Region::ET: return et;
        case Region::WT: return wt;
        case Region::TC: return tc;
    }
    throw std::invalid_argument("bad region");
}

const std::array<MetricSummary, 4>& CohortSummary::region(Region r) const {
    switch (r) {
        case Region::ET: return et;
        case Region::WT: return wt;
        case Region::TC: return tc;
    }
    throw std::invalid_argument("bad region");
}

ConfusionCounts confusion_counts(const BinaryMask& pred, const BinaryMask& truth) {
    require_matching(pred, truth);
    ConfusionCounts c;
    const auto& p = pred.values();
    const auto& t = truth.values();
    for (std::size_t n = 0; n < p.size(); ++n) {
        if (p[n] && t[n])
            ++c.tp;
        else if (p[n] && !t[n])
            ++c.fp;
        else if (!p[n] && t[n])
            ++c.fn;
        else
            ++c.tn;
    }
    return c;
}

double dice(const BinaryMask& pred, const BinaryMask& truth) {
    const auto c = confusion_counts(pred, truth);
    const std::size_t denom = 2 * c.tp + c.fp + c.fn;
    if (denom == 0)
        return 1.0;
    return 2.0 * double(c.tp) / double(denom);
}

double sensitivity(const BinaryMask& pred, const BinaryMask& truth) {
    const auto c = confusion_counts(pred, truth);
    if (c.tp + c.fn == 0)
        return 1.0;
    return double(c.tp) / double(c.tp + c.fn);
}

double specificity(const BinaryMask& pred, const BinaryMask& truth) {
    const auto c = confusion_counts(pred, truth);
    if (c.tn + c.fp == 0)
        return 1.0;
    return double(c.tn) / double(c.tn + c.fp);
}

BinaryMask surface_voxels(const BinaryMask& mask) {
    const auto& d = mask.dims();
    BinaryMask out(d, mask.spacing());
    const std::int64_t nx = std::int64_t(d.nx), ny = std::int64_t(d.ny), nz = std::int64_t(d.nz);
    static constexpr std::array<std::array<int, 3>, 6> faces = {
        {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}}};
    for (std::int64_t k = 0; k < nz; ++k)
        for (std::int64_t j = 0; j < ny; ++j)
            for (std::int64_t i = 0; i < nx; ++i) {
                if (!mask.at(std::size_t(i), std::size_t(j), std::size_t(k)))
                    continue;
                bool surf = false;
                for (const auto& o : faces) {
                    const std::int64_t ii = i + o[0], jj = j + o[1], kk = k + o[2];
                    if (ii < 0 || jj < 0 || kk < 0 || ii >= nx || jj >= ny || kk >= nz ||
                        !mask.at(std::size_t(ii), std::size_t(jj), std::size_t(kk))) {
                        surf = true;
                        break;
                    }
                }
                out.set(std::size_t(i), std::size_t(j), std::size_t(k), surf);
            }
    return out;
}

namespace {

// 1D lower-envelope pass of the exact squared Euclidean distance transform
// (Felzenszwalb & Huttenlocher), with samples at physical positions i*step.
void edt_1d(std::vector<double>& f, double step, std::vector<double>& scratch_d,
            std::vector<int>& scratch_v, std::vector<double>& scratch_z) {
    const int n = int(f.size());
    auto& d = scratch_d;
    auto& v = scratch_v;
    auto& z = scratch_z;
    d.assign(std::size_t(n), kInf);
    v.assign(std::size_t(n), 0);
    z.assign(std::size_t(n) + 1, 0.0);

    int k = -1;
    for (int q = 0; q < n; ++q) {
        if (f[std::size_t(q)] == kInf)
            continue;
        const double xq = double(q) * step;
        while (k >= 0) {
            const double xv = double(v[std::size_t(k)]) * step;
            const double s = ((f[std::size_t(q)] + xq * xq) -
                              (f[std::size_t(v[std::size_t(k)])] + xv * xv)) /
                             (2.0 * xq - 2.0 * xv);
            if (s <= z[std::size_t(k)])
                --k;
            else
                break;
        }
        if (k < 0) {
            k = 0;
            v[0] = q;
            z[0] = -kInf;
            z[1] = kInf;
        } else {
            const double xv = double(v[std::size_t(k)]) * step;
            const double s = ((f[std::size_t(q)] + xq * xq) -
                              (f[std::size_t(v[std::size_t(k)])] + xv * xv)) /
                             (2.0 * xq - 2.0 * xv);
            ++k;
            v[std::size_t(k)] = q;
            z[std::size_t(k)] = s;
            z[std::size_t(k) + 1] = kInf;
        }
    }

    if (k < 0)
        return; // row entirely unreachable

    int idx = 0;
    for (int q = 0; q < n; ++q) {
        const double xq = double(q) * step;
        while (z[std::size_t(idx) + 1] < xq)
            ++idx;
        const double xv = double(v[std::size_t(idx)]) * step;
        d[std::size_t(q)] = (xq - xv) * (xq - xv) + f[std::size_t(v[std::size_t(idx)])];
    }
    f = d;
}

} // namespace

std::vector<double> distance_field_mm(const BinaryMask& sites) {
    const auto& d = sites.dims();
    const auto& s = sites.spacing();
    std::vector<double> sq(d.count(), kInf);
    for (std::size_t n = 0; n < sq.size(); ++n)
        if (sites.values()[n])
            sq[n] = 0.0;

    const std::size_t max_n = std::max({d.nx, d.ny, d.nz});
    std::vector<double> row(max_n), sd(max_n), sz(max_n + 1);
    std::vector<int> sv(max_n);

    // x pass
    for (std::size_t k = 0; k < d.nz; ++k)
        for (std::size_t j = 0; j < d.ny; ++j) {
            row.assign(d.nx, 0.0);
            const std::size_t base = d.nx * (j + d.ny * k);
            for (std::size_t i = 0; i < d.nx; ++i)
                row[i] = sq[base + i];
            edt_1d(row, s.sx, sd, sv, sz);
            for (std::size_t i = 0; i < d.nx; ++i)
                sq[base + i] = row[i];
        }
    // y pass
    for (std::size_t k = 0; k < d.nz; ++k)
        for (std::size_t i = 0; i < d.nx; ++i) {
            row.assign(d.ny, 0.0);
            for (std::size_t j = 0; j < d.ny; ++j)
                row[j] = sq[i + d.nx * (j + d.ny * k)];
            edt_1d(row, s.sy, sd, sv, sz);
            for (std::size_t j = 0; j < d.ny; ++j)
                sq[i + d.nx * (j + d.ny * k)] = row[j];
        }
    // z pass
    for (std::size_t j = 0; j < d.ny; ++j)
        for (std::size_t i = 0; i < d.nx; ++i) {
            row.assign(d.nz, 0.0);
            for (std::size_t k = 0; k < d.nz; ++k)
                row[k] = sq[i + d.nx * (j + d.ny * k)];
            edt_1d(row, s.sz, sd, sv, sz);
            for (std::size_t k = 0; k < d.nz; ++k)
                sq[i + d.nx * (j + d.ny * k)] = row[k];
        }

    for (auto& v : sq)
        v = std::sqrt(v);
    return sq;
}

double hd95(const BinaryMask& pred, const BinaryMask& truth) {
    require_matching(pred, truth);

    const bool pred_empty = pred.empty_mask();
    const bool truth_empty = truth.empty_mask();
    if (pred_empty && truth_empty)
        return 0.0;
    if (pred_empty != truth_empty) {
        const auto& d = pred.dims();
        const auto& s = pred.spacing();
        const double ex = double(d.nx) * s.sx;
        const double ey = double(d.ny) * s.sy;
        const double ez = double(d.nz) * s.sz;
        return std::sqrt(ex * ex + ey * ey + ez * ez);
    }

    const BinaryMask surf_p = surface_voxels(pred);
    const BinaryMask surf_t = surface_voxels(truth);
    const std::vector<double> dist_to_t = distance_field_mm(surf_t);
    const std::vector<double> dist_to_p = distance_field_mm(surf_p);

    auto directed_p95 = [](const BinaryMask& from, const std::vector<double>& dist) {
        std::vector<double> ds;
        for (std::size_t n = 0; n < dist.size(); ++n)
            if (from.values()[n])
                ds.push_back(dist[n]);
        return stats::percentile(ds, 0.95);
    };

    return std::max(directed_p95(surf_p, dist_to_t), directed_p95(surf_t, dist_to_p));
}

CaseMetrics evaluate_case(const LabelVolume& pred, const LabelVolume& truth, const std::string& id) {
    if (!(pred.dims() == truth.dims()))
        throw std::invalid_argument("evaluate_case: dims do not match");
    if (!(pred.spacing() == truth.spacing()))
        throw std::invalid_argument("evaluate_case: spacing does not match");

    CaseMetrics cm;
    cm.id = id;
    for (Region r : {Region::ET, Region::WT, Region::TC}) {
        const BinaryMask mp = region_mask(pred, r);
        const BinaryMask mt = region_mask(truth, r);
        RegionMetrics m;
        m.dice = dice(mp, mt);
        m.sensitivity = sensitivity(mp, mt);
        m.specificity = specificity(mp, mt);
        m.hd95 = hd95(mp, mt);
        switch (r) {
            case Region::ET: cm.et = m; break;
            case Region::WT: cm.wt = m; break;
            case Region::TC: cm.tc = m; break;
        }
    }
    return cm;
}

CohortSummary summarize_cohort(std::span<const CaseMetrics> cases) {
    if (cases.empty())
        throw std::invalid_argument("summarize_cohort needs at least one case");

    CohortSummary out;
    for (Region r : {Region::ET, Region::WT, Region::TC}) {
        for (int metric = 0; metric < 4; ++metric) {
            std::vector<double> values;
            values.reserve(cases.size());
            for (const auto& c : cases) {
                const RegionMetrics& m = c.region(r);
                switch (metric) {
                    case 0: values.push_back(m.dice); break;
                    case 1: values.push_back(m.sensitivity); break;
                    case 2: values.push_back(m.specificity); break;
                    case 3: values.push_back(m.hd95); break;
                }
            }
            std::sort(values.begin(), values.end());
            MetricSummary s;
            s.mean = stats::mean(values);
            s.std_dev = stats::population_std(values);
            s.median = stats::percentile_sorted(values, 0.5);
            s.quantile_25 = stats::percentile_sorted(values, 0.25);
            s.quantile_75 = stats::percentile_sorted(values, 0.75);
            auto& arr = (r == Region::ET) ? out.et : (r == Region::WT) ? out.wt : out.tc;
            arr[std::size_t(metric)] = s;
        }
    }
    return out;
}

} // namespace sphseg
