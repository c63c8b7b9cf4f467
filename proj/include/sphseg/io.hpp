#pragma once

#include "sphseg/metrics.hpp"
#include "sphseg/spherical.hpp"
#include "sphseg/survival.hpp"

#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sphseg::io {

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct FileError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Shortest round-trip decimal representation.
std::string format_double(double v);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);

// ---- spherical transform sidecar ------------------------------------------

/// {origin: [x,y,z], rho_max, source_dims: [nx,ny,nz], source_spacing: [sx,sy,sz]}
/// so the inverse transform is self-describing.
struct TransformMeta {
    Vec3 origin;
    double rho_max = 0.0;
    Dims3 source_dims;
    Spacing3 source_spacing;
};

std::string transform_meta_to_json(const TransformMeta& meta);
TransformMeta transform_meta_from_json(const std::string& json_text);

// ---- metrics reports -------------------------------------------------------

std::string case_report_json(std::span<const CaseMetrics> cases);
std::string cohort_report_json(std::span<const CaseMetrics> cases, const CohortSummary& summary);
std::vector<CaseMetrics> cases_from_report_json(const std::string& json_text);
std::string cases_csv(std::span<const CaseMetrics> cases);

// ---- survival feature table ------------------------------------------------

/// Header: case_id,age,resection,os_days,f0,...,f{d-1}. os_days is blank for
/// unlabeled cases; resection is GTR, STR or NA.
struct FeatureTable {
    survival::FeatureMatrix features;
    std::vector<survival::ClinicalRecord> clinical; // aligned with feature rows
};

FeatureTable read_feature_csv(const std::string& text);
FeatureTable read_feature_csv_file(const std::filesystem::path& path);
std::string write_feature_csv(const FeatureTable& table);

// ---- model persistence -----------------------------------------------------

std::string models_to_json(std::span<const survival::SurvivalModel> models);
std::vector<survival::SurvivalModel> models_from_json(const std::string& json_text);

// ---- survival reports ------------------------------------------------------

std::string cv_report_json(const survival::CrossValidationResult& result,
                           std::size_t n_components, double power);
std::string grid_report_json(const survival::GridSearchResult& result, std::uint64_t seed,
                             std::size_t n_folds);
std::string predictions_csv(std::span<const std::string> case_ids, std::span<const double> os_days);

} // namespace sphseg::io
