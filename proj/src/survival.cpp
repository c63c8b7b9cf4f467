#include "sphseg/survival.hpp"

#include "sphseg/stats.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <random>
#include <thread>
#include <unordered_map>

namespace sphseg::survival {

Resection resection_from_string(const std::string& s) {
    if (s == "GTR")
        return Resection::GTR;
    if (s == "STR")
        return Resection::STR;
    if (s == "NA")
        return Resection::NA;
    throw std::invalid_argument("resection status must be GTR, STR or NA, got \"" + s + "\"");
}

const char* resection_to_string(Resection r) {
    switch (r) {
        case Resection::GTR: return "GTR";
        case Resection::STR: return "STR";
        case Resection::NA: return "NA";
    }
    return "?";
}

void ClinicalRecord::validate() const {
    if (case_id.empty())
        throw std::invalid_argument("clinical record needs a case_id");
    if (!std::isfinite(age) || age <= 0.0 || age >= 120.0)
        throw std::invalid_argument("age for " + case_id + " must lie in (0, 120)");
    if (os_days && !(*os_days > 0.0))
        throw std::invalid_argument("os_days for " + case_id + " must be positive");
}

void FeatureMatrix::validate() const {
    if (std::size_t(values.rows()) != case_ids.size())
        throw std::invalid_argument("feature rows and case ids differ in count");
    for (Eigen::Index i = 0; i < values.size(); ++i)
        if (!std::isfinite(values.data()[i]))
            throw std::invalid_argument("feature matrix contains a non-finite value");
    std::unordered_map<std::string, std::size_t> seen;
    for (std::size_t i = 0; i < case_ids.size(); ++i)
        if (!seen.emplace(case_ids[i], i).second)
            throw std::invalid_argument("duplicate case_id \"" + case_ids[i] + "\"");
}

std::optional<std::size_t> FeatureMatrix::row_of(const std::string& case_id) const {
    for (std::size_t i = 0; i < case_ids.size(); ++i)
        if (case_ids[i] == case_id)
            return i;
    return std::nullopt;
}

const char* survival_class_name(SurvivalClass c) {
    switch (c) {
        case SurvivalClass::Short: return "short";
        case SurvivalClass::Mid: return "mid";
        case SurvivalClass::Long: return "long";
    }
    return "?";
}

PcaModel fit_pca(const FeatureMatrix& X, std::size_t n_components) {
    X.validate();
    const std::size_t n = std::size_t(X.values.rows());
    const std::size_t d = std::size_t(X.values.cols());
    if (n < 2)
        throw std::invalid_argument("PCA needs at least 2 cases");
    if (n_components < 1 || n_components > std::min(n - 1, d))
        throw std::invalid_argument("n_components must lie in [1, min(n_cases-1, d)]");

    PcaModel model;
    model.mean = X.values.colwise().mean();
    Eigen::MatrixXd centered = X.values.rowwise() - model.mean.transpose();

    if (centered.cwiseAbs().maxCoeff() == 0.0)
        throw std::invalid_argument("PCA input has zero variance in every direction");

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();

    model.components.resize(Eigen::Index(n_components), Eigen::Index(d));
    model.explained_variance.resize(Eigen::Index(n_components));
    for (std::size_t c = 0; c < n_components; ++c) {
        Eigen::VectorXd dir = svd.matrixV().col(Eigen::Index(c));
        // Deterministic sign: largest-magnitude entry positive.
        Eigen::Index arg = 0;
        dir.cwiseAbs().maxCoeff(&arg);
        if (dir(arg) < 0.0)
            dir = -dir;
        model.components.row(Eigen::Index(c)) = dir.transpose();
        model.explained_variance(Eigen::Index(c)) =
            sv(Eigen::Index(c)) * sv(Eigen::Index(c)) / double(n - 1);
    }
    return model;
}

Eigen::MatrixXd project(const PcaModel& pca, const Eigen::MatrixXd& X) {
    if (std::size_t(X.cols()) != pca.input_dim())
        throw std::invalid_argument("projection input width does not match the PCA model");
    return (X.rowwise() - pca.mean.transpose()) * pca.components.transpose();
}

FeatureMatrix project(const PcaModel& pca, const FeatureMatrix& X) {
    FeatureMatrix out;
    out.case_ids = X.case_ids;
    out.values = project(pca, X.values);
    return out;
}

Eigen::MatrixXd assemble_features(const FeatureMatrix& reduced,
                                  std::span<const ClinicalRecord> clinical) {
    const std::size_t dhat = std::size_t(reduced.values.cols());
    Eigen::MatrixXd design(Eigen::Index(clinical.size()), Eigen::Index(dhat + 3));
    for (std::size_t r = 0; r < clinical.size(); ++r) {
        const auto& rec = clinical[r];
        rec.validate();
        const auto row = reduced.row_of(rec.case_id);
        if (!row)
            throw MissingCaseError("case \"" + rec.case_id + "\" has no feature row");
        design.block(Eigen::Index(r), 0, 1, Eigen::Index(dhat)) =
            reduced.values.row(Eigen::Index(*row));
        design(Eigen::Index(r), Eigen::Index(dhat)) = rec.age;
        design(Eigen::Index(r), Eigen::Index(dhat + 1)) = rec.resection == Resection::GTR ? 1.0 : 0.0;
        design(Eigen::Index(r), Eigen::Index(dhat + 2)) = rec.resection == Resection::STR ? 1.0 : 0.0;
    }
    return design;
}

double tweedie_deviance(double y, double mu, double power) {
    const double r = power;
    return 2.0 * (std::pow(y, 2.0 - r) / ((1.0 - r) * (2.0 - r)) -
                  y * std::pow(mu, 1.0 - r) / (1.0 - r) + std::pow(mu, 2.0 - r) / (2.0 - r));
}

double mean_tweedie_deviance(std::span<const double> y, std::span<const double> mu, double power) {
    if (y.size() != mu.size() || y.empty())
        throw std::invalid_argument("deviance needs matching non-empty vectors");
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i)
        acc += tweedie_deviance(y[i], mu[i], power);
    return acc / double(y.size());
}

Eigen::VectorXd tweedie_deviance_gradient(const Eigen::MatrixXd& design,
                                          std::span<const double> y, double intercept,
                                          const Eigen::VectorXd& coefficients, double power) {
    const std::size_t n = std::size_t(design.rows());
    if (y.size() != n || design.cols() != coefficients.size())
        throw std::invalid_argument("deviance gradient: shape mismatch");

    // d deviance / d eta = 2 mu^(1-r) (mu - y); chain through eta = b0 + x.b.
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(coefficients.size() + 1);
    for (std::size_t i = 0; i < n; ++i) {
        const double eta = intercept + design.row(Eigen::Index(i)).dot(coefficients);
        const double mu = std::exp(eta);
        const double deta = 2.0 * std::pow(mu, 1.0 - power) * (mu - y[i]);
        grad(0) += deta;
        grad.tail(coefficients.size()) += deta * design.row(Eigen::Index(i)).transpose();
    }
    return grad / double(n);
}

TweedieFit fit_tweedie(const Eigen::MatrixXd& design, std::span<const double> y, double power,
                       std::size_t max_iter, double tol) {
    const std::size_t n = std::size_t(design.rows());
    const std::size_t k = std::size_t(design.cols());
    if (y.size() != n)
        throw std::invalid_argument("design rows and response length differ");
    if (n < k + 1)
        throw std::invalid_argument("need at least k+1 observations for k features");
    if (!(power >= 1.1 && power <= 1.9))
        throw std::invalid_argument("tweedie power must lie in [1.1, 1.9]");
    for (double v : y)
        if (!(v > 0.0) || !std::isfinite(v))
            throw std::invalid_argument("all response values must be positive and finite");

    TweedieModel model;
    model.power = power;
    model.feature_means.resize(Eigen::Index(k));
    model.feature_stds.resize(Eigen::Index(k));
    Eigen::MatrixXd Z(design.rows(), design.cols());
    for (std::size_t c = 0; c < k; ++c) {
        const double m = design.col(Eigen::Index(c)).mean();
        const double var =
            (design.col(Eigen::Index(c)).array() - m).square().sum() / double(n);
        const double sd = std::sqrt(var);
        model.feature_means(Eigen::Index(c)) = m;
        model.feature_stds(Eigen::Index(c)) = sd > 0.0 ? sd : 1.0;
        Z.col(Eigen::Index(c)) =
            (design.col(Eigen::Index(c)).array() - m) / model.feature_stds(Eigen::Index(c));
    }

    // Augmented system [1 Z]; beta(0) is the intercept.
    Eigen::MatrixXd A(Eigen::Index(n), Eigen::Index(k + 1));
    A.col(0).setOnes();
    if (k > 0)
        A.rightCols(Eigen::Index(k)) = Z;

    auto deviance_of = [&](const Eigen::VectorXd& m) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            acc += tweedie_deviance(y[i], m(Eigen::Index(i)), power);
        return acc / double(n);
    };

    // Warm start: the first weighted solve is linearized at mu = y (clamped
    // away from 0), the standard GLM initialization. The intercept-only
    // coefficient vector is only the retreat target should that first solve
    // blow up; the recorded trace starts at the first accepted iterate and
    // step halving keeps it monotone from there.
    double y_mean = 0.0;
    for (double v : y)
        y_mean += v;
    y_mean /= double(n);
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(Eigen::Index(k + 1));
    beta(0) = std::log(y_mean);
    double dev = std::numeric_limits<double>::infinity();

    Eigen::VectorXd lin_eta = Eigen::VectorXd::Zero(Eigen::Index(n));
    for (std::size_t i = 0; i < n; ++i)
        lin_eta(Eigen::Index(i)) = std::log(std::max(y[i], 1e-10));
    Eigen::VectorXd lin_mu = lin_eta.array().exp();

    TweedieFit fit;

    const Eigen::Map<const Eigen::ArrayXd> ya(y.data(), Eigen::Index(n));
    bool converged = false;
    std::size_t iter = 0;
    while (iter < max_iter) {
        ++iter;
        const Eigen::ArrayXd w = lin_mu.array().pow(2.0 - power);
        const Eigen::VectorXd z = lin_eta.array() + (ya - lin_mu.array()) / lin_mu.array();

        Eigen::MatrixXd AtWA = A.transpose() * w.matrix().asDiagonal() * A;
        AtWA.diagonal().array() += 1e-10;
        const Eigen::VectorXd AtWz = A.transpose() * (w * z.array()).matrix();
        const Eigen::VectorXd beta_full = AtWA.ldlt().solve(AtWz);

        // Step halving toward the previous iterate keeps the deviance
        // monotone even when the quadratic model overshoots. Only strict
        // decreases are adopted; otherwise the previous iterate stands and
        // the fit is stationary.
        Eigen::VectorXd candidate = beta_full;
        Eigen::VectorXd eta_new, mu_new;
        double dev_new = std::numeric_limits<double>::infinity();
        double step = 1.0;
        for (int h = 0; h < 40; ++h) {
            eta_new = A * candidate;
            mu_new = eta_new.array().exp();
            dev_new = deviance_of(mu_new);
            if (std::isfinite(dev_new) && dev_new < dev)
                break;
            step *= 0.5;
            candidate = beta + step * (beta_full - beta);
        }
        if (!std::isfinite(dev_new) || dev_new >= dev) {
            converged = true;
            break;
        }

        beta = candidate;
        lin_eta = eta_new;
        lin_mu = mu_new;
        fit.deviance_trace.push_back(dev_new);

        const double change = std::abs(dev - dev_new);
        dev = dev_new;
        if (change / std::max(dev, tol) < tol) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw ConvergenceError(iter);

    model.intercept = beta(0);
    model.coefficients = beta.tail(Eigen::Index(k));
    fit.model = std::move(model);
    fit.iterations = iter;
    return fit;
}

double predict_os(const TweedieModel& model, const Eigen::VectorXd& design_row) {
    if (design_row.size() != model.coefficients.size())
        throw std::invalid_argument("design row width does not match the model");
    double eta = model.intercept;
    for (Eigen::Index c = 0; c < design_row.size(); ++c)
        eta += model.coefficients(c) * (design_row(c) - model.feature_means(c)) / model.feature_stds(c);
    return std::exp(eta);
}

std::vector<double> predict_os(const TweedieModel& model, const Eigen::MatrixXd& design) {
    std::vector<double> out(std::size_t(design.rows()));
    for (Eigen::Index i = 0; i < design.rows(); ++i) {
        const Eigen::VectorXd row = design.row(i).transpose();
        out[std::size_t(i)] = predict_os(model, row);
    }
    return out;
}

SurvivalClass classify_os(double os_days, const SurvivalClassThresholds& thresholds) {
    if (!(os_days > 0.0) || !std::isfinite(os_days))
        throw std::invalid_argument("os_days must be positive and finite");
    if (!(thresholds.short_below < thresholds.long_above))
        throw std::invalid_argument("class thresholds out of order");
    if (os_days < thresholds.short_below)
        return SurvivalClass::Short;
    if (os_days > thresholds.long_above)
        return SurvivalClass::Long;
    return SurvivalClass::Mid;
}

OsEvaluation evaluate_os(std::span<const double> pred, std::span<const double> actual,
                         const SurvivalClassThresholds& thresholds) {
    if (pred.size() != actual.size())
        throw std::invalid_argument("evaluate_os: length mismatch");
    if (pred.size() < 2)
        throw std::invalid_argument("evaluate_os needs at least 2 cases");

    std::size_t correct = 0;
    std::vector<double> se(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (classify_os(pred[i], thresholds) == classify_os(actual[i], thresholds))
            ++correct;
        const double e = pred[i] - actual[i];
        se[i] = e * e;
    }

    OsEvaluation ev;
    ev.accuracy = double(correct) / double(pred.size());
    ev.mse = stats::mean(se);
    ev.median_se = stats::median(se);
    ev.std_se = stats::population_std(se);
    ev.spearman_r = stats::spearman(pred, actual);
    return ev;
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i)
        idx[i] = i;
    // Hand-rolled Fisher-Yates: std::shuffle is not bit-stable across
    // standard libraries.
    std::mt19937_64 gen(seed);
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = std::size_t(gen() % i);
        std::swap(idx[i - 1], idx[j]);
    }
    return idx;
}

CrossValidationResult cross_validate(const FeatureMatrix& X,
                                     std::span<const ClinicalRecord> clinical,
                                     std::size_t n_components, double power, std::size_t n_folds,
                                     std::uint64_t seed) {
    X.validate();
    const std::size_t n = clinical.size();
    if (n_folds < 2)
        throw std::invalid_argument("need at least 2 folds");
    if (n < n_folds)
        throw std::invalid_argument("fewer cases than folds");
    for (const auto& rec : clinical) {
        rec.validate();
        if (!rec.os_days)
            throw std::invalid_argument("cross-validation requires os_days for every case (missing for \"" +
                                        rec.case_id + "\")");
    }

    CrossValidationResult result;
    result.n_folds = n_folds;
    result.seed = seed;
    result.fold_of_case.resize(n);
    result.predictions.assign(n, 0.0);
    result.actual.resize(n);
    result.case_ids.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        result.actual[i] = *clinical[i].os_days;
        result.case_ids[i] = clinical[i].case_id;
    }

    const std::vector<std::size_t> order = shuffled_indices(n, seed);
    for (std::size_t pos = 0; pos < n; ++pos)
        result.fold_of_case[order[pos]] = pos * n_folds / n;

    for (std::size_t fold = 0; fold < n_folds; ++fold) {
        std::vector<std::size_t> train_rows, test_rows;
        for (std::size_t i = 0; i < n; ++i)
            (result.fold_of_case[i] == fold ? test_rows : train_rows).push_back(i);

        FeatureMatrix train_X;
        std::vector<ClinicalRecord> train_clin;
        train_X.values.resize(Eigen::Index(train_rows.size()), X.values.cols());
        for (std::size_t t = 0; t < train_rows.size(); ++t) {
            const auto& rec = clinical[train_rows[t]];
            const auto row = X.row_of(rec.case_id);
            if (!row)
                throw MissingCaseError("case \"" + rec.case_id + "\" has no feature row");
            train_X.case_ids.push_back(rec.case_id);
            train_X.values.row(Eigen::Index(t)) = X.values.row(Eigen::Index(*row));
            train_clin.push_back(rec);
        }

        SurvivalModel sm;
        sm.pca = fit_pca(train_X, n_components);
        const FeatureMatrix train_reduced = project(sm.pca, train_X);
        const Eigen::MatrixXd train_design = assemble_features(train_reduced, train_clin);
        std::vector<double> train_y(train_rows.size());
        for (std::size_t t = 0; t < train_rows.size(); ++t)
            train_y[t] = *train_clin[t].os_days;
        sm.glm = fit_tweedie(train_design, train_y, power).model;

        FeatureMatrix test_X;
        std::vector<ClinicalRecord> test_clin;
        test_X.values.resize(Eigen::Index(test_rows.size()), X.values.cols());
        for (std::size_t t = 0; t < test_rows.size(); ++t) {
            const auto& rec = clinical[test_rows[t]];
            const auto row = X.row_of(rec.case_id);
            if (!row)
                throw MissingCaseError("case \"" + rec.case_id + "\" has no feature row");
            test_X.case_ids.push_back(rec.case_id);
            test_X.values.row(Eigen::Index(t)) = X.values.row(Eigen::Index(*row));
            test_clin.push_back(rec);
        }
        const FeatureMatrix test_reduced = project(sm.pca, test_X);
        const Eigen::MatrixXd test_design = assemble_features(test_reduced, test_clin);
        const std::vector<double> preds = predict_os(sm.glm, test_design);
        for (std::size_t t = 0; t < test_rows.size(); ++t)
            result.predictions[test_rows[t]] = preds[t];

        result.fold_models.push_back(std::move(sm));
    }

    result.evaluation = evaluate_os(result.predictions, result.actual);
    return result;
}

std::vector<double> ensemble_predict(std::span<const SurvivalModel> models, const FeatureMatrix& X,
                                     std::span<const ClinicalRecord> clinical) {
    if (models.empty())
        throw std::invalid_argument("ensemble needs at least one model");
    std::vector<double> acc(clinical.size(), 0.0);
    for (const auto& m : models) {
        const FeatureMatrix reduced = project(m.pca, X);
        const Eigen::MatrixXd design = assemble_features(reduced, clinical);
        const std::vector<double> preds = predict_os(m.glm, design);
        for (std::size_t i = 0; i < acc.size(); ++i)
            acc[i] += preds[i];
    }
    for (auto& v : acc)
        v /= double(models.size());
    return acc;
}

GridSearchResult grid_search(const FeatureMatrix& X, std::span<const ClinicalRecord> clinical,
                             const GridSearchSpec& spec) {
    if (spec.d_min < 1 || spec.d_min > spec.d_max)
        throw std::invalid_argument("component range is empty");
    if (!(spec.r_step > 0.0) || spec.r_min > spec.r_max)
        throw std::invalid_argument("power grid is empty");

    // Components are capped by the smallest per-fold training split.
    const std::size_t n = clinical.size();
    const std::size_t min_train = n - (n + spec.n_folds - 1) / spec.n_folds;
    const std::size_t d_cap = std::min(std::size_t(X.values.cols()),
                                       min_train > 1 ? min_train - 1 : 1);
    const std::size_t d_hi = std::min(spec.d_max, d_cap);
    if (spec.d_min > d_hi)
        throw std::invalid_argument("component range exceeds what the data can support");

    std::vector<double> powers;
    const auto steps = std::size_t(std::floor((spec.r_max - spec.r_min) / spec.r_step + 1e-9));
    for (std::size_t i = 0; i <= steps; ++i) {
        // Snap to the grid to avoid step accumulation drift.
        const double r = spec.r_min + double(i) * spec.r_step;
        powers.push_back(std::round(r * 1e9) / 1e9);
    }

    std::vector<GridPoint> table;
    for (std::size_t d = spec.d_min; d <= d_hi; ++d)
        for (double r : powers)
            table.push_back(GridPoint{d, r, {}});

    const std::size_t workers = std::max<std::size_t>(1, spec.threads);
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    auto run = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= table.size())
                return;
            table[i].evaluation =
                cross_validate(X, clinical, table[i].n_components, table[i].power, spec.n_folds,
                               spec.seed)
                    .evaluation;
        }
    };
    if (workers == 1) {
        run();
    } else {
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back(run);
        for (auto& t : pool)
            t.join();
    }

    GridSearchResult result;
    result.table = std::move(table);
    // Grid order is (components asc, power asc); strict improvement keeps the
    // smallest d then smallest r on ties.
    result.best = result.table.front();
    for (const auto& p : result.table)
        if (p.evaluation.accuracy > result.best.evaluation.accuracy)
            result.best = p;
    return result;
}

} // namespace sphseg::survival
