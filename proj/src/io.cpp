#include "sphseg/io.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace sphseg::io {

using nlohmann::json;

std::string format_double(double v) {
    std::array<char, 32> buf;
    const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc{})
        throw std::runtime_error("format_double failed");
    return std::string(buf.data(), ptr);
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw FileError("cannot open " + path.string() + " for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad())
        throw FileError("error while reading " + path.string());
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw FileError("cannot open " + path.string() + " for writing");
    out << content;
    if (!out)
        throw FileError("error while writing " + path.string());
}

// ---- spherical transform sidecar ------------------------------------------

std::string transform_meta_to_json(const TransformMeta& meta) {
    json j;
    j["origin"] = {meta.origin.x, meta.origin.y, meta.origin.z};
    j["rho_max"] = meta.rho_max;
    j["source_dims"] = {meta.source_dims.nx, meta.source_dims.ny, meta.source_dims.nz};
    j["source_spacing"] = {meta.source_spacing.sx, meta.source_spacing.sy, meta.source_spacing.sz};
    return j.dump(2) + "\n";
}

TransformMeta transform_meta_from_json(const std::string& json_text) {
    try {
        const json j = json::parse(json_text);
        TransformMeta meta;
        meta.origin = Vec3{j.at("origin").at(0), j.at("origin").at(1), j.at("origin").at(2)};
        meta.rho_max = j.at("rho_max");
        meta.source_dims = Dims3{j.at("source_dims").at(0), j.at("source_dims").at(1),
                                 j.at("source_dims").at(2)};
        meta.source_spacing = Spacing3{j.at("source_spacing").at(0), j.at("source_spacing").at(1),
                                       j.at("source_spacing").at(2)};
        return meta;
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad transform metadata: ") + e.what());
    }
}

// ---- metrics reports -------------------------------------------------------

namespace {

json region_to_json(const RegionMetrics& m) {
    return json{{"dice", m.dice},
                {"sensitivity", m.sensitivity},
                {"specificity", m.specificity},
                {"hd95", m.hd95}};
}

RegionMetrics region_from_json(const json& j) {
    RegionMetrics m;
    m.dice = j.at("dice");
    m.sensitivity = j.at("sensitivity");
    m.specificity = j.at("specificity");
    m.hd95 = j.at("hd95");
    return m;
}

json cases_to_json(std::span<const CaseMetrics> cases) {
    json arr = json::array();
    for (const auto& c : cases) {
        arr.push_back(json{{"id", c.id},
                           {"ET", region_to_json(c.et)},
                           {"WT", region_to_json(c.wt)},
                           {"TC", region_to_json(c.tc)}});
    }
    return arr;
}

json summary_region_to_json(const std::array<MetricSummary, 4>& region) {
    json out;
    for (std::size_t m = 0; m < 4; ++m) {
        out[kMetricNames[m]] = json{{"mean", region[m].mean},
                                    {"std_dev", region[m].std_dev},
                                    {"median", region[m].median},
                                    {"quantile_25", region[m].quantile_25},
                                    {"quantile_75", region[m].quantile_75}};
    }
    return out;
}

} // namespace

std::string case_report_json(std::span<const CaseMetrics> cases) {
    json j;
    j["cases"] = cases_to_json(cases);
    return j.dump(2) + "\n";
}

std::string cohort_report_json(std::span<const CaseMetrics> cases, const CohortSummary& summary) {
    json j;
    j["cases"] = cases_to_json(cases);
    j["summary"] = json{{"ET", summary_region_to_json(summary.et)},
                        {"WT", summary_region_to_json(summary.wt)},
                        {"TC", summary_region_to_json(summary.tc)}};
    return j.dump(2) + "\n";
}

std::vector<CaseMetrics> cases_from_report_json(const std::string& json_text) {
    try {
        const json j = json::parse(json_text);
        std::vector<CaseMetrics> cases;
        for (const auto& c : j.at("cases")) {
            CaseMetrics cm;
            cm.id = c.at("id");
            cm.et = region_from_json(c.at("ET"));
            cm.wt = region_from_json(c.at("WT"));
            cm.tc = region_from_json(c.at("TC"));
            cases.push_back(std::move(cm));
        }
        return cases;
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad metrics report: ") + e.what());
    }
}

std::string cases_csv(std::span<const CaseMetrics> cases) {
    std::string out = "case_id";
    for (const char* region : {"ET", "WT", "TC"})
        for (const char* metric : kMetricNames)
            out += std::string(",") + region + "_" + metric;
    out += "\n";
    for (const auto& c : cases) {
        out += c.id;
        for (const RegionMetrics* m : {&c.et, &c.wt, &c.tc}) {
            out += "," + format_double(m->dice);
            out += "," + format_double(m->sensitivity);
            out += "," + format_double(m->specificity);
            out += "," + format_double(m->hd95);
        }
        out += "\n";
    }
    return out;
}

// ---- survival feature table ------------------------------------------------

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    fields.push_back(cur);
    return fields;
}

double parse_double_field(const std::string& s, const char* what, std::size_t line_no) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw ParseError("line " + std::to_string(line_no) + ": bad " + what + " value \"" + s + "\"");
    return v;
}

} // namespace

FeatureTable read_feature_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line))
        throw ParseError("empty feature file");

    const auto header = split_csv_line(line);
    if (header.size() < 5 || header[0] != "case_id" || header[1] != "age" ||
        header[2] != "resection" || header[3] != "os_days")
        throw ParseError("feature header must start with case_id,age,resection,os_days,f0,...");
    const std::size_t d = header.size() - 4;
    for (std::size_t c = 0; c < d; ++c)
        if (header[4 + c] != "f" + std::to_string(c))
            throw ParseError("feature column " + std::to_string(c) + " must be named f" +
                             std::to_string(c));

    FeatureTable table;
    std::vector<std::vector<double>> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r")
            continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != header.size())
            throw ParseError("line " + std::to_string(line_no) + ": expected " +
                             std::to_string(header.size()) + " fields, got " +
                             std::to_string(fields.size()));

        survival::ClinicalRecord rec;
        rec.case_id = fields[0];
        rec.age = parse_double_field(fields[1], "age", line_no);
        rec.resection = survival::resection_from_string(fields[2]);
        if (!fields[3].empty())
            rec.os_days = parse_double_field(fields[3], "os_days", line_no);
        rec.validate();

        std::vector<double> feats(d);
        for (std::size_t c = 0; c < d; ++c)
            feats[c] = parse_double_field(fields[4 + c], "feature", line_no);

        table.clinical.push_back(std::move(rec));
        table.features.case_ids.push_back(fields[0]);
        rows.push_back(std::move(feats));
    }

    table.features.values.resize(Eigen::Index(rows.size()), Eigen::Index(d));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < d; ++c)
            table.features.values(Eigen::Index(r), Eigen::Index(c)) = rows[r][c];
    table.features.validate();
    return table;
}

FeatureTable read_feature_csv_file(const std::filesystem::path& path) {
    return read_feature_csv(read_text_file(path));
}

std::string write_feature_csv(const FeatureTable& table) {
    const std::size_t d = std::size_t(table.features.values.cols());
    std::string out = "case_id,age,resection,os_days";
    for (std::size_t c = 0; c < d; ++c)
        out += ",f" + std::to_string(c);
    out += "\n";
    for (std::size_t r = 0; r < table.clinical.size(); ++r) {
        const auto& rec = table.clinical[r];
        out += rec.case_id + "," + format_double(rec.age) + "," +
               survival::resection_to_string(rec.resection) + ",";
        if (rec.os_days)
            out += format_double(*rec.os_days);
        for (std::size_t c = 0; c < d; ++c)
            out += "," + format_double(table.features.values(Eigen::Index(r), Eigen::Index(c)));
        out += "\n";
    }
    return out;
}

// ---- model persistence -----------------------------------------------------

namespace {

json vector_to_json(const Eigen::VectorXd& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i)
        arr.push_back(v(i));
    return arr;
}

Eigen::VectorXd vector_from_json(const json& j) {
    Eigen::VectorXd v(Eigen::Index(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i)
        v(Eigen::Index(i)) = j.at(i);
    return v;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        rows.push_back(vector_to_json(m.row(r).transpose()));
    return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
    if (j.empty())
        return Eigen::MatrixXd(0, 0);
    Eigen::MatrixXd m(Eigen::Index(j.size()), Eigen::Index(j.at(0).size()));
    for (std::size_t r = 0; r < j.size(); ++r)
        m.row(Eigen::Index(r)) = vector_from_json(j.at(r)).transpose();
    return m;
}

json evaluation_to_json(const survival::OsEvaluation& ev) {
    return json{{"accuracy", ev.accuracy},
                {"mse", ev.mse},
                {"median_se", ev.median_se},
                {"std_se", ev.std_se},
                {"spearman_r", ev.spearman_r}};
}

} // namespace

std::string models_to_json(std::span<const survival::SurvivalModel> models) {
    json j;
    j["format"] = "sphseg-survival-model";
    j["version"] = 1;
    json arr = json::array();
    for (const auto& m : models) {
        arr.push_back(json{{"pca",
                            json{{"mean", vector_to_json(m.pca.mean)},
                                 {"components", matrix_to_json(m.pca.components)},
                                 {"explained_variance", vector_to_json(m.pca.explained_variance)}}},
                           {"glm",
                            json{{"power", m.glm.power},
                                 {"intercept", m.glm.intercept},
                                 {"coefficients", vector_to_json(m.glm.coefficients)},
                                 {"feature_means", vector_to_json(m.glm.feature_means)},
                                 {"feature_stds", vector_to_json(m.glm.feature_stds)}}}});
    }
    j["submodels"] = std::move(arr);
    return j.dump(2) + "\n";
}

std::vector<survival::SurvivalModel> models_from_json(const std::string& json_text) {
    try {
        const json j = json::parse(json_text);
        if (j.at("format") != "sphseg-survival-model")
            throw ParseError("not a survival model file");
        std::vector<survival::SurvivalModel> models;
        for (const auto& sj : j.at("submodels")) {
            survival::SurvivalModel m;
            m.pca.mean = vector_from_json(sj.at("pca").at("mean"));
            m.pca.components = matrix_from_json(sj.at("pca").at("components"));
            m.pca.explained_variance = vector_from_json(sj.at("pca").at("explained_variance"));
            m.glm.power = sj.at("glm").at("power");
            m.glm.intercept = sj.at("glm").at("intercept");
            m.glm.coefficients = vector_from_json(sj.at("glm").at("coefficients"));
            m.glm.feature_means = vector_from_json(sj.at("glm").at("feature_means"));
            m.glm.feature_stds = vector_from_json(sj.at("glm").at("feature_stds"));
            models.push_back(std::move(m));
        }
        return models;
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad model file: ") + e.what());
    }
}

// ---- survival reports ------------------------------------------------------

std::string cv_report_json(const survival::CrossValidationResult& result,
                           std::size_t n_components, double power) {
    json j;
    j["n_folds"] = result.n_folds;
    j["seed"] = result.seed;
    j["components"] = n_components;
    j["power"] = power;
    json preds = json::array();
    for (std::size_t i = 0; i < result.case_ids.size(); ++i) {
        preds.push_back(json{{"case_id", result.case_ids[i]},
                             {"fold", result.fold_of_case[i]},
                             {"actual_os_days", result.actual[i]},
                             {"predicted_os_days", result.predictions[i]},
                             {"predicted_class",
                              survival::survival_class_name(survival::classify_os(result.predictions[i]))}});
    }
    j["predictions"] = std::move(preds);
    j["evaluation"] = evaluation_to_json(result.evaluation);
    return j.dump(2) + "\n";
}

std::string grid_report_json(const survival::GridSearchResult& result, std::uint64_t seed,
                             std::size_t n_folds) {
    json j;
    j["seed"] = seed;
    j["n_folds"] = n_folds;
    json table = json::array();
    for (const auto& p : result.table) {
        table.push_back(json{{"components", p.n_components},
                             {"power", p.power},
                             {"evaluation", evaluation_to_json(p.evaluation)}});
    }
    j["grid"] = std::move(table);
    j["best"] = json{{"components", result.best.n_components},
                     {"power", result.best.power},
                     {"evaluation", evaluation_to_json(result.best.evaluation)}};
    return j.dump(2) + "\n";
}

std::string predictions_csv(std::span<const std::string> case_ids, std::span<const double> os_days) {
    if (case_ids.size() != os_days.size())
        throw std::invalid_argument("predictions_csv: length mismatch");
    std::string out = "case_id,predicted_os_days,predicted_class\n";
    for (std::size_t i = 0; i < case_ids.size(); ++i) {
        out += case_ids[i] + "," + format_double(os_days[i]) + "," +
               survival::survival_class_name(survival::classify_os(os_days[i])) + "\n";
    }
    return out;
}

} // namespace sphseg::io
