#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sphseg::survival {

enum class Resection { GTR, STR, NA };

Resection resection_from_string(const std::string& s);
const char* resection_to_string(Resection r);

struct ClinicalRecord {
    std::string case_id;
    double age = 0.0;
    Resection resection = Resection::NA;
    std::optional<double> os_days;

    void validate() const;
};

/// Case-aligned feature table (LesionEncoder latents are d = 256, but any
/// width works).
struct FeatureMatrix {
    std::vector<std::string> case_ids;
    Eigen::MatrixXd values; // n_cases x d

    void validate() const;
    std::optional<std::size_t> row_of(const std::string& case_id) const;
};

struct PcaModel {
    Eigen::VectorXd mean;                // d
    Eigen::MatrixXd components;          // n_components x d, orthonormal rows
    Eigen::VectorXd explained_variance;  // n_components, non-increasing

    std::size_t n_components() const { return std::size_t(components.rows()); }
    std::size_t input_dim() const { return std::size_t(components.cols()); }
};

struct TweedieModel {
    double power = 1.5;
    double intercept = 0.0;
    Eigen::VectorXd coefficients;
    Eigen::VectorXd feature_means;
    Eigen::VectorXd feature_stds;
};

struct TweedieFit {
    TweedieModel model;
    std::vector<double> deviance_trace; // mean deviance after each IRLS step
    std::size_t iterations = 0;
};

struct ConvergenceError : std::runtime_error {
    std::size_t iterations;
    explicit ConvergenceError(std::size_t iters)
        : std::runtime_error("IRLS did not converge after " + std::to_string(iters) + " iterations"),
          iterations(iters) {}
};

struct MissingCaseError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct SurvivalClassThresholds {
    double short_below = 300.0;
    double long_above = 450.0;
};

enum class SurvivalClass { Short, Mid, Long };

const char* survival_class_name(SurvivalClass c);

struct OsEvaluation {
    double accuracy = 0.0;
    double mse = 0.0;
    double median_se = 0.0;
    double std_se = 0.0;
    double spearman_r = 0.0;
};

/// One PCA + GLM pair; a fitted fold or a standalone model.
struct SurvivalModel {
    PcaModel pca;
    TweedieModel glm;
};

struct CrossValidationResult {
    std::vector<SurvivalModel> fold_models;
    std::vector<std::size_t> fold_of_case;  // aligned with the clinical list
    std::vector<double> predictions;        // aggregated holdout predictions
    std::vector<double> actual;
    std::vector<std::string> case_ids;
    OsEvaluation evaluation;
    std::size_t n_folds = 0;
    std::uint64_t seed = 0;
};

struct GridPoint {
    std::size_t n_components = 0;
    double power = 0.0;
    OsEvaluation evaluation;
};

struct GridSearchResult {
    std::vector<GridPoint> table; // in grid order: components ascending, power ascending
    GridPoint best;
};

/// Columns centered, then the top right singular directions of the centered
/// matrix become the component rows (variance order, sample normalization
/// 1/(n-1)). Sign convention: each row's largest-magnitude entry is positive.
PcaModel fit_pca(const FeatureMatrix& X, std::size_t n_components);

Eigen::MatrixXd project(const PcaModel& pca, const Eigen::MatrixXd& X);
FeatureMatrix project(const PcaModel& pca, const FeatureMatrix& X);

/// Design columns: [n_components PCA features, age, resection_GTR, resection_STR];
/// NA resection encodes as (0, 0). Rows follow the clinical list order.
Eigen::MatrixXd assemble_features(const FeatureMatrix& reduced,
                                  std::span<const ClinicalRecord> clinical);

double tweedie_deviance(double y, double mu, double power);
double mean_tweedie_deviance(std::span<const double> y, std::span<const double> mu, double power);

/// Gradient of the mean deviance with respect to [intercept, coefficients]
/// under the log link, evaluated on an unstandardized design matrix.
Eigen::VectorXd tweedie_deviance_gradient(const Eigen::MatrixXd& design,
                                          std::span<const double> y, double intercept,
                                          const Eigen::VectorXd& coefficients, double power);

/// Tweedie GLM with log link fit by IRLS on standardized columns; working
/// weights mu^(2-power), ridge jitter 1e-10 on the normal equations, step
/// halving so the mean deviance never increases.
TweedieFit fit_tweedie(const Eigen::MatrixXd& design, std::span<const double> y, double power,
                       std::size_t max_iter = 100, double tol = 1e-8);

double predict_os(const TweedieModel& model, const Eigen::VectorXd& design_row);
std::vector<double> predict_os(const TweedieModel& model, const Eigen::MatrixXd& design);

SurvivalClass classify_os(double os_days, const SurvivalClassThresholds& thresholds = {});

OsEvaluation evaluate_os(std::span<const double> pred, std::span<const double> actual,
                         const SurvivalClassThresholds& thresholds = {});

/// Seeded Fisher-Yates shuffle (mt19937_64), identical across platforms.
std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed);

/// 5-fold scheme of the OS pipeline: per fold, PCA and GLM are fit on the
/// training 80% only and the held-out 20% is predicted; holdout predictions
/// are aggregated over folds and evaluated together. Every clinical record
/// must carry os_days.
CrossValidationResult cross_validate(const FeatureMatrix& X,
                                     std::span<const ClinicalRecord> clinical,
                                     std::size_t n_components, double power,
                                     std::size_t n_folds = 5, std::uint64_t seed = 0);

/// Mean predicted OS over all sub-models (covers both the per-fold
/// aggregation and combinations of model families).
std::vector<double> ensemble_predict(std::span<const SurvivalModel> models, const FeatureMatrix& X,
                                     std::span<const ClinicalRecord> clinical);

struct GridSearchSpec {
    std::size_t d_min = 2;
    std::size_t d_max = 60;
    double r_min = 1.1;
    double r_max = 1.9;
    double r_step = 0.1;
    std::size_t n_folds = 5;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
};

/// Linear search over (n_components, power) by cross-validated accuracy;
/// ties break toward smaller n_components, then smaller power.
GridSearchResult grid_search(const FeatureMatrix& X, std::span<const ClinicalRecord> clinical,
                             const GridSearchSpec& spec);

} // namespace sphseg::survival
