#pragma once

#include "sphseg/volume.hpp"

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace sphseg {

struct ConfusionCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;
};

struct RegionMetrics {
    double dice = 0.0;
    double sensitivity = 0.0;
    double specificity = 0.0;
    double hd95 = 0.0;
};

struct CaseMetrics {
    std::string id;
    RegionMetrics et;
    RegionMetrics wt;
    RegionMetrics tc;

    const RegionMetrics& region(Region r) const;
};

struct MetricSummary {
    double mean = 0.0;
    double std_dev = 0.0;
    double median = 0.0;
    double quantile_25 = 0.0;
    double quantile_75 = 0.0;
};

/// Per region: summaries of dice, sensitivity, specificity, hd95 in order.
struct CohortSummary {
    std::array<MetricSummary, 4> et;
    std::array<MetricSummary, 4> wt;
    std::array<MetricSummary, 4> tc;

    const std::array<MetricSummary, 4>& region(Region r) const;
};

constexpr std::array<const char*, 4> kMetricNames = {"dice", "sensitivity", "specificity", "hd95"};

ConfusionCounts confusion_counts(const BinaryMask& pred, const BinaryMask& truth);

/// 2TP / (2TP + FP + FN); 1.0 when both masks are empty.
double dice(const BinaryMask& pred, const BinaryMask& truth);

/// TP / (TP + FN); 1.0 when the truth mask is empty.
double sensitivity(const BinaryMask& pred, const BinaryMask& truth);

/// TN / (TN + FP); 1.0 when there are no negatives.
double specificity(const BinaryMask& pred, const BinaryMask& truth);

/// Symmetric 95th-percentile surface distance in mm. Surfaces are mask voxels
/// with a face neighbor outside the mask or on the volume boundary; the
/// percentile is linear-interpolated. Both masks empty -> 0; exactly one
/// empty -> the volume diagonal in mm as a sentinel.
double hd95(const BinaryMask& pred, const BinaryMask& truth);

/// Surface voxels under 6-connectivity, volume-boundary voxels included.
BinaryMask surface_voxels(const BinaryMask& mask);

/// For every voxel, Euclidean mm distance to the nearest set voxel of `sites`
/// (exact separable distance transform). Infinity everywhere if empty.
std::vector<double> distance_field_mm(const BinaryMask& sites);

CaseMetrics evaluate_case(const LabelVolume& pred, const LabelVolume& truth,
                          const std::string& id = "");

CohortSummary summarize_cohort(std::span<const CaseMetrics> cases);

} // namespace sphseg
