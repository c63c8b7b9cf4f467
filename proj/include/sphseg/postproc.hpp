#pragma once

#include "sphseg/volume.hpp"

#include <array>
#include <cstddef>
#include <vector>

namespace sphseg {

enum class Connectivity { Faces6 = 6, Full26 = 26 };

/// Offsets must include (0,0,0) and be symmetric under negation, which is
/// what makes opening = erosion followed by dilation well defined.
struct StructuringElement {
    std::vector<std::array<int, 3>> offsets;

    void validate() const;

    /// 7-voxel 6-connectivity cross, the smallest element that removes
    /// single-voxel-thin branches.
    static StructuringElement cross6();
    /// Full 3x3x3 box.
    static StructuringElement box26();
};

struct EtCleanupParams {
    std::size_t min_component_voxels = 30;
    std::size_t opening_iterations = 1;
};

/// Erases every voxel of the spherical segmentation that falls outside the
/// Cartesian model's WT mask; voxels inside keep their spherical label.
LabelVolume cartesian_wt_filter(const LabelVolume& spherical_seg, const LabelVolume& cartesian_seg);

/// Per-region intersection of two segmentations, recomposed hierarchically:
/// ET -> 4, else TC -> 1, else WT -> 2, else 0.
LabelVolume intersect_3ch(const LabelVolume& seg_a, const LabelVolume& seg_b);

BinaryMask erode(const BinaryMask& mask, const StructuringElement& se);
BinaryMask dilate(const BinaryMask& mask, const StructuringElement& se);

/// `iterations` erosions followed by `iterations` dilations. Erosion treats
/// everything outside the volume as background.
BinaryMask binary_opening(const BinaryMask& mask, const StructuringElement& se,
                          std::size_t iterations = 1);

/// Removes connected components with fewer than min_voxels voxels; components
/// with exactly min_voxels survive.
BinaryMask filter_small_components(const BinaryMask& mask, std::size_t min_voxels,
                                   Connectivity connectivity = Connectivity::Full26);

/// Deterministic component labels in scan order; 0 is background.
/// Returns the label grid and per-component voxel counts (index label-1).
std::pair<std::vector<std::uint32_t>, std::vector<std::size_t>>
label_components(const BinaryMask& mask, Connectivity connectivity);

/// ET cleanup: open the ET mask and drop small spots; if anything survives
/// the original segmentation is restored untouched, otherwise every ET voxel
/// is rewritten to necrosis so TC and WT extents are preserved.
LabelVolume et_restore_or_erase(const LabelVolume& seg, const EtCleanupParams& params = {});

/// Ensemble merge: ET from seg_et_source, WT and TC from seg_wt_tc_source,
/// with nesting forced by union where the two models disagree.
LabelVolume ensemble_merge(const LabelVolume& seg_et_source, const LabelVolume& seg_wt_tc_source);

} // namespace sphseg
