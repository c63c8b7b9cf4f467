// sphseg: spherical-coordinate segmentation pipeline and survival prediction.
// One stage per invocation; shell pipelines compose the full cascade.

#include "sphseg/io.hpp"
#include "sphseg/metrics.hpp"
#include "sphseg/nifti.hpp"
#include "sphseg/postproc.hpp"
#include "sphseg/spherical.hpp"
#include "sphseg/survival.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <filesystem>
#include <iostream>
#include <thread>

namespace fs = std::filesystem;
using namespace sphseg;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;

struct CommandPaths {
    std::vector<fs::path> inputs;
    std::vector<fs::path> outputs;
};

// Outputs may never clobber inputs.
void check_no_overwrite(const CommandPaths& paths) {
    for (const auto& out : paths.outputs) {
        const fs::path out_canon = fs::weakly_canonical(out);
        for (const auto& in : paths.inputs) {
            if (out_canon == fs::weakly_canonical(in))
                throw std::invalid_argument("output path " + out.string() +
                                            " would overwrite input " + in.string());
        }
    }
}

SampleMode parse_mode(const std::string& mode) {
    if (mode == "trilinear")
        return SampleMode::Trilinear;
    if (mode == "nearest")
        return SampleMode::Nearest;
    throw std::invalid_argument("mode must be trilinear or nearest");
}

SphericalVolume load_spherical(const fs::path& volume_path, const io::TransformMeta& meta) {
    const auto img = nifti::read_nifti([&] {
        std::ifstream in(volume_path, std::ios::binary);
        if (!in)
            throw nifti::IoError("cannot open " + volume_path.string() + " for reading");
        return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());
    }());
    SphericalVolume sv;
    sv.grid.origin = meta.origin;
    sv.grid.rho_max = meta.rho_max;
    sv.grid.n_rho = img.dims.nx;
    sv.grid.n_theta = img.dims.ny;
    sv.grid.n_phi = img.dims.nz;
    sv.data = img.data;
    sv.validate();
    return sv;
}

void save_spherical(const fs::path& path, const SphericalVolume& sv, bool labels) {
    const Dims3 dims{sv.grid.n_rho, sv.grid.n_theta, sv.grid.n_phi};
    // The spherical grid has no physical spacing; the sidecar carries geometry.
    if (labels) {
        std::vector<std::uint8_t> lv(sv.data.size());
        for (std::size_t i = 0; i < sv.data.size(); ++i)
            lv[i] = std::uint8_t(sv.data[i]);
        nifti::write_label_file(path, LabelVolume(dims, Spacing3{1, 1, 1}, std::move(lv)));
    } else {
        nifti::write_volume_file(path, Volume3D(dims, Spacing3{1, 1, 1}, sv.data),
                                 nifti::DataType::Float32);
    }
}

int run_to_spherical(const fs::path& in, const fs::path& mask, const fs::path& out,
                     const fs::path& meta_path, const std::string& mode_str, bool labels) {
    CommandPaths paths{{in}, {out, meta_path}};
    if (!mask.empty())
        paths.inputs.push_back(mask);
    check_no_overwrite(paths);

    Dims3 dims;
    Spacing3 spacing;
    Vec3 origin;
    SphericalVolume sv;

    if (labels) {
        const LabelVolume seg = nifti::read_label_file(in);
        dims = seg.dims();
        spacing = seg.spacing();
        origin = mask.empty()
                     ? Vec3{double(dims.nx - 1) / 2.0, double(dims.ny - 1) / 2.0,
                            double(dims.nz - 1) / 2.0}
                     : select_origin(region_mask(nifti::read_label_file(mask), Region::WT));
        sv = to_spherical(seg, default_grid(dims, spacing, origin));
    } else {
        const Volume3D vol = nifti::read_volume_file(in);
        dims = vol.dims();
        spacing = vol.spacing();
        origin = mask.empty()
                     ? Vec3{double(dims.nx - 1) / 2.0, double(dims.ny - 1) / 2.0,
                            double(dims.nz - 1) / 2.0}
                     : select_origin(region_mask(nifti::read_label_file(mask), Region::WT));
        sv = to_spherical(vol, default_grid(dims, spacing, origin), parse_mode(mode_str));
    }

    save_spherical(out, sv, labels);
    io::TransformMeta meta;
    meta.origin = sv.grid.origin;
    meta.rho_max = sv.grid.rho_max;
    meta.source_dims = dims;
    meta.source_spacing = spacing;
    io::write_text_file(meta_path, io::transform_meta_to_json(meta));
    return kExitOk;
}

int run_to_cartesian(const fs::path& in, const fs::path& meta_path, const fs::path& out,
                     const std::string& mode_str, bool labels) {
    check_no_overwrite({{in, meta_path}, {out}});
    const io::TransformMeta meta = io::transform_meta_from_json(io::read_text_file(meta_path));
    const SphericalVolume sv = load_spherical(in, meta);
    if (labels) {
        nifti::write_label_file(out,
                                to_cartesian_labels(sv, meta.source_dims, meta.source_spacing));
    } else {
        nifti::write_volume_file(out, to_cartesian(sv, meta.source_dims, meta.source_spacing,
                                                   parse_mode(mode_str)),
                                 nifti::DataType::Float32);
    }
    return kExitOk;
}

int run_wt_filter(const fs::path& spherical, const fs::path& cartesian, const fs::path& out) {
    check_no_overwrite({{spherical, cartesian}, {out}});
    nifti::write_label_file(out, cartesian_wt_filter(nifti::read_label_file(spherical),
                                                     nifti::read_label_file(cartesian)));
    return kExitOk;
}

int run_intersect(const fs::path& a, const fs::path& b, const fs::path& out) {
    check_no_overwrite({{a, b}, {out}});
    nifti::write_label_file(out, intersect_3ch(nifti::read_label_file(a), nifti::read_label_file(b)));
    return kExitOk;
}

int run_et_clean(const fs::path& in, const fs::path& out, std::size_t min_voxels,
                 std::size_t iterations) {
    check_no_overwrite({{in}, {out}});
    EtCleanupParams params;
    params.min_component_voxels = min_voxels;
    params.opening_iterations = iterations;
    nifti::write_label_file(out, et_restore_or_erase(nifti::read_label_file(in), params));
    return kExitOk;
}

int run_ensemble_merge(const fs::path& et_source, const fs::path& wt_tc_source, const fs::path& out) {
    check_no_overwrite({{et_source, wt_tc_source}, {out}});
    nifti::write_label_file(out, ensemble_merge(nifti::read_label_file(et_source),
                                                nifti::read_label_file(wt_tc_source)));
    return kExitOk;
}

int run_metrics_evaluate(const fs::path& pred, const fs::path& truth, const fs::path& report,
                         const std::string& id) {
    check_no_overwrite({{pred, truth}, {report}});
    const CaseMetrics m =
        evaluate_case(nifti::read_label_file(pred), nifti::read_label_file(truth), id);
    io::write_text_file(report, io::case_report_json(std::vector<CaseMetrics>{m}));
    return kExitOk;
}

int run_metrics_summarize(const std::vector<fs::path>& reports, const fs::path& report_out,
                          const fs::path& csv_out, std::size_t threads) {
    CommandPaths paths{reports, {report_out}};
    if (!csv_out.empty())
        paths.outputs.push_back(csv_out);
    check_no_overwrite(paths);

    // Reports are parsed in parallel but merged in input order.
    std::vector<std::vector<CaseMetrics>> parsed(reports.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= reports.size())
                return;
            parsed[i] = io::cases_from_report_json(io::read_text_file(reports[i]));
        }
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t)
            pool.emplace_back(worker);
        for (auto& t : pool)
            t.join();
    }

    std::vector<CaseMetrics> cases;
    for (auto& chunk : parsed)
        for (auto& c : chunk)
            cases.push_back(std::move(c));
    if (cases.empty())
        throw std::invalid_argument("no cases found in the given reports");

    const CohortSummary summary = summarize_cohort(cases);
    io::write_text_file(report_out, io::cohort_report_json(cases, summary));
    if (!csv_out.empty())
        io::write_text_file(csv_out, io::cases_csv(cases));
    return kExitOk;
}

std::vector<survival::ClinicalRecord> labeled_subset(const io::FeatureTable& table) {
    std::vector<survival::ClinicalRecord> labeled;
    for (const auto& rec : table.clinical)
        if (rec.os_days)
            labeled.push_back(rec);
    if (labeled.size() < table.clinical.size())
        std::cerr << "note: " << (table.clinical.size() - labeled.size())
                  << " unlabeled case(s) excluded from fitting\n";
    return labeled;
}

int run_survival_fit(const fs::path& features, std::size_t components, double power,
                     const fs::path& model_out) {
    check_no_overwrite({{features}, {model_out}});
    const io::FeatureTable table = io::read_feature_csv_file(features);
    const auto labeled = labeled_subset(table);
    if (labeled.size() < 2)
        throw std::invalid_argument("need at least 2 labeled cases to fit");

    survival::FeatureMatrix X;
    X.values.resize(Eigen::Index(labeled.size()), table.features.values.cols());
    for (std::size_t i = 0; i < labeled.size(); ++i) {
        const auto row = table.features.row_of(labeled[i].case_id);
        X.case_ids.push_back(labeled[i].case_id);
        X.values.row(Eigen::Index(i)) = table.features.values.row(Eigen::Index(*row));
    }

    survival::SurvivalModel sm;
    sm.pca = survival::fit_pca(X, components);
    const auto reduced = survival::project(sm.pca, X);
    const Eigen::MatrixXd design = survival::assemble_features(reduced, labeled);
    std::vector<double> y;
    for (const auto& rec : labeled)
        y.push_back(*rec.os_days);
    sm.glm = survival::fit_tweedie(design, y, power).model;

    io::write_text_file(model_out, io::models_to_json(std::vector<survival::SurvivalModel>{sm}));
    return kExitOk;
}

int run_survival_predict(const fs::path& features, const fs::path& model_path,
                         const fs::path& out) {
    check_no_overwrite({{features, model_path}, {out}});
    const io::FeatureTable table = io::read_feature_csv_file(features);
    const auto models = io::models_from_json(io::read_text_file(model_path));
    const std::vector<double> preds =
        survival::ensemble_predict(models, table.features, table.clinical);
    std::vector<std::string> ids;
    for (const auto& rec : table.clinical)
        ids.push_back(rec.case_id);
    io::write_text_file(out, io::predictions_csv(ids, preds));
    return kExitOk;
}

int run_survival_cv(const fs::path& features, std::size_t components, double power,
                    std::uint64_t seed, std::size_t folds, const fs::path& report,
                    const fs::path& model_out) {
    CommandPaths paths{{features}, {report}};
    if (!model_out.empty())
        paths.outputs.push_back(model_out);
    check_no_overwrite(paths);

    const io::FeatureTable table = io::read_feature_csv_file(features);
    const auto labeled = labeled_subset(table);
    const auto result =
        survival::cross_validate(table.features, labeled, components, power, folds, seed);
    io::write_text_file(report, io::cv_report_json(result, components, power));
    if (!model_out.empty())
        io::write_text_file(model_out, io::models_to_json(result.fold_models));
    return kExitOk;
}

int run_survival_grid(const fs::path& features, const survival::GridSearchSpec& spec,
                      const fs::path& report) {
    check_no_overwrite({{features}, {report}});
    const io::FeatureTable table = io::read_feature_csv_file(features);
    const auto labeled = labeled_subset(table);
    const auto result = survival::grid_search(table.features, labeled, spec);
    io::write_text_file(report, io::grid_report_json(result, spec.seed, spec.n_folds));
    std::cerr << "best: components=" << result.best.n_components << " power=" << result.best.power
              << " accuracy=" << result.best.evaluation.accuracy << "\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spherical-coordinate brain tumor segmentation tooling: spherical resampling,\n"
                 "label fusion and cleanup, segmentation metrics, and survival prediction."};
    app.require_subcommand(1);

    // transform
    auto* transform = app.add_subcommand("transform", "Spherical <-> Cartesian resampling");
    transform->require_subcommand(1);

    fs::path ts_in, ts_mask, ts_out, ts_meta;
    std::string ts_mode = "trilinear";
    bool ts_labels = false;
    auto* to_sph = transform->add_subcommand("to-spherical", "Resample a volume onto a spherical grid");
    to_sph->add_option("--in", ts_in, "input volume (.nii/.nii.gz)")->required();
    to_sph->add_option("--mask", ts_mask, "coarse WT mask for origin selection (volume center if omitted)");
    to_sph->add_option("--out", ts_out, "output spherical volume")->required();
    to_sph->add_option("--meta", ts_meta, "output sidecar JSON")->required();
    to_sph->add_option("--mode", ts_mode, "trilinear|nearest (intensity volumes)")
        ->check(CLI::IsMember({"trilinear", "nearest"}));
    to_sph->add_flag("--labels", ts_labels, "treat the input as a label volume (nearest sampling)");

    fs::path tc_in, tc_meta, tc_out;
    std::string tc_mode = "trilinear";
    bool tc_labels = false;
    auto* to_cart = transform->add_subcommand("to-cartesian", "Map a spherical volume back to Cartesian space");
    to_cart->add_option("--in", tc_in, "input spherical volume")->required();
    to_cart->add_option("--meta", tc_meta, "sidecar JSON written by to-spherical")->required();
    to_cart->add_option("--out", tc_out, "output Cartesian volume")->required();
    to_cart->add_option("--mode", tc_mode, "trilinear|nearest (intensity volumes)")
        ->check(CLI::IsMember({"trilinear", "nearest"}));
    to_cart->add_flag("--labels", tc_labels, "treat the input as a label volume (nearest sampling)");

    // postproc
    auto* postproc = app.add_subcommand("postproc", "Label-space fusion and cleanup");
    postproc->require_subcommand(1);

    fs::path wf_sph, wf_cart, wf_out;
    auto* wt_filter = postproc->add_subcommand("wt-filter", "Erase spherical labels outside the Cartesian WT");
    wt_filter->add_option("--spherical", wf_sph, "spherical model segmentation")->required();
    wt_filter->add_option("--cartesian", wf_cart, "Cartesian model segmentation")->required();
    wt_filter->add_option("--out", wf_out, "output segmentation")->required();

    fs::path i3_a, i3_b, i3_out;
    auto* intersect = postproc->add_subcommand("intersect3ch", "Per-region intersection of two segmentations");
    intersect->add_option("--a", i3_a, "first segmentation")->required();
    intersect->add_option("--b", i3_b, "second segmentation")->required();
    intersect->add_option("--out", i3_out, "output segmentation")->required();

    fs::path ec_in, ec_out;
    std::size_t ec_min_voxels = 30;
    std::size_t ec_iterations = 1;
    auto* et_clean = postproc->add_subcommand("et-clean", "ET opening/size filter with restore-or-erase");
    et_clean->add_option("--in", ec_in, "input segmentation")->required();
    et_clean->add_option("--out", ec_out, "output segmentation")->required();
    et_clean->add_option("--min-voxels", ec_min_voxels, "minimum surviving ET component size");
    et_clean->add_option("--iterations", ec_iterations, "opening iterations");

    // ensemble
    auto* ensemble = app.add_subcommand("ensemble", "Model ensembling");
    ensemble->require_subcommand(1);
    fs::path em_et, em_wt_tc, em_out;
    auto* merge = ensemble->add_subcommand("merge", "ET from one model, WT/TC from another");
    merge->add_option("--et-source", em_et, "segmentation supplying the ET label")->required();
    merge->add_option("--wt-tc-source", em_wt_tc, "segmentation supplying WT and TC labels")->required();
    merge->add_option("--out", em_out, "output segmentation")->required();

    // metrics
    auto* metrics = app.add_subcommand("metrics", "Segmentation evaluation");
    metrics->require_subcommand(1);

    fs::path me_pred, me_truth, me_report;
    std::string me_id = "case";
    auto* evaluate = metrics->add_subcommand("evaluate", "Dice/sensitivity/specificity/HD95 per region");
    evaluate->add_option("--pred", me_pred, "predicted segmentation")->required();
    evaluate->add_option("--truth", me_truth, "ground-truth segmentation")->required();
    evaluate->add_option("--report", me_report, "output JSON report")->required();
    evaluate->add_option("--id", me_id, "case identifier recorded in the report");

    std::vector<fs::path> ms_reports;
    fs::path ms_report, ms_csv;
    std::size_t ms_threads = 1;
    auto* summarize = metrics->add_subcommand("summarize", "Merge case reports into a cohort summary");
    summarize->add_option("--reports", ms_reports, "input case reports")->required()->expected(-1);
    summarize->add_option("--report", ms_report, "output cohort JSON")->required();
    summarize->add_option("--csv", ms_csv, "optional per-case CSV export");
    summarize->add_option("--threads", ms_threads, "parser thread count");

    // survival
    auto* surv = app.add_subcommand("survival", "PCA + Tweedie GLM survival prediction");
    surv->require_subcommand(1);

    fs::path sf_features, sf_model;
    std::size_t sf_components = 10;
    double sf_power = 1.6;
    auto* fit = surv->add_subcommand("fit", "Fit one PCA+GLM model on all labeled cases");
    fit->add_option("--features", sf_features, "feature CSV")->required();
    fit->add_option("--components", sf_components, "PCA components");
    fit->add_option("--power", sf_power, "Tweedie power in [1.1, 1.9]");
    fit->add_option("--model", sf_model, "output model JSON")->required();

    fs::path sp_features, sp_model, sp_out;
    auto* predict = surv->add_subcommand("predict", "Predict OS for every case in a feature CSV");
    predict->add_option("--features", sp_features, "feature CSV")->required();
    predict->add_option("--model", sp_model, "model JSON (one or more sub-models)")->required();
    predict->add_option("--out", sp_out, "output prediction CSV")->required();

    fs::path cv_features, cv_report, cv_model;
    std::size_t cv_components = 10;
    double cv_power = 1.6;
    std::uint64_t cv_seed = 0;
    std::size_t cv_folds = 5;
    auto* cv = surv->add_subcommand("cv", "Seeded k-fold cross-validation");
    cv->add_option("--features", cv_features, "feature CSV")->required();
    cv->add_option("--components", cv_components, "PCA components");
    cv->add_option("--power", cv_power, "Tweedie power in [1.1, 1.9]");
    cv->add_option("--seed", cv_seed, "shuffle seed");
    cv->add_option("--folds", cv_folds, "fold count");
    cv->add_option("--report", cv_report, "output CV report JSON")->required();
    cv->add_option("--model", cv_model, "optional output: the per-fold sub-models");

    fs::path gs_features, gs_report;
    survival::GridSearchSpec gs_spec;
    auto* grid = surv->add_subcommand("grid-search", "Linear search over (components, power)");
    grid->add_option("--features", gs_features, "feature CSV")->required();
    grid->add_option("--dmin", gs_spec.d_min, "smallest component count");
    grid->add_option("--dmax", gs_spec.d_max, "largest component count");
    grid->add_option("--rmin", gs_spec.r_min, "smallest Tweedie power");
    grid->add_option("--rmax", gs_spec.r_max, "largest Tweedie power");
    grid->add_option("--rstep", gs_spec.r_step, "power grid step");
    grid->add_option("--folds", gs_spec.n_folds, "fold count per grid point");
    grid->add_option("--seed", gs_spec.seed, "shuffle seed");
    grid->add_option("--threads", gs_spec.threads, "worker thread count");
    grid->add_option("--report", gs_report, "output grid report JSON")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // --help and friends exit 0; every argv problem is a validation error.
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (to_sph->parsed())
            return run_to_spherical(ts_in, ts_mask, ts_out, ts_meta, ts_mode, ts_labels);
        if (to_cart->parsed())
            return run_to_cartesian(tc_in, tc_meta, tc_out, tc_mode, tc_labels);
        if (wt_filter->parsed())
            return run_wt_filter(wf_sph, wf_cart, wf_out);
        if (intersect->parsed())
            return run_intersect(i3_a, i3_b, i3_out);
        if (et_clean->parsed())
            return run_et_clean(ec_in, ec_out, ec_min_voxels, ec_iterations);
        if (merge->parsed())
            return run_ensemble_merge(em_et, em_wt_tc, em_out);
        if (evaluate->parsed())
            return run_metrics_evaluate(me_pred, me_truth, me_report, me_id);
        if (summarize->parsed())
            return run_metrics_summarize(ms_reports, ms_report, ms_csv, ms_threads);
        if (fit->parsed())
            return run_survival_fit(sf_features, sf_components, sf_power, sf_model);
        if (predict->parsed())
            return run_survival_predict(sp_features, sp_model, sp_out);
        if (cv->parsed())
            return run_survival_cv(cv_features, cv_components, cv_power, cv_seed, cv_folds,
                                   cv_report, cv_model);
        if (grid->parsed())
            return run_survival_grid(gs_features, gs_spec, gs_report);
        std::cerr << "no subcommand selected\n";
        return kExitValidation;
    } catch (const nifti::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const nifti::FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const nifti::UnsupportedDatatypeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const nifti::UnsupportedShapeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const nifti::TruncationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const nifti::RangeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const io::FileError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const io::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
}
