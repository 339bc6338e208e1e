#include "fgray/cli.hpp"
#include "fgray/analysis.hpp"
#include "fgray/error.hpp"
#include "fgray/parallel.hpp"
#include "fgray/study.hpp"

#include "CLI11.hpp"

#include <Eigen/Core>

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#ifndef FGRAY_VERSION
#define FGRAY_VERSION "unknown"
#endif

namespace fgray {

using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Verbosity { kQuiet, kNormal, kVerbose };

struct Options {
    std::string input;
    std::string time_col = "time";
    std::string status_col = "status";
    std::string id_col;
    std::optional<double> horizon;
    bool drop_constant = false;
    bool no_standardize = false;
    std::uint64_t seed = 1;
    int threads = default_threads();
    int folds = 10;
    int n_lambdas = 100;
    double lambda_ratio = 0.01;
    std::string lambda = "cv";
    std::string lambda_j = "cv";
    bool lambda_j_shared = false;
    std::string out;
    std::string csv_out;
    std::string dump_weights;
    bool dry_run = false;
    bool quiet = false;
    bool verbose = false;

    // infer
    std::vector<std::string> contrasts;
    std::string contrast_file;
    double alpha = 0.05;
    double null_value = 0.0;
    bool original_scale = false;

    // simulate
    int setup = 1;
    int n = 200;
    int p = 300;
    double mixture_p = 0.6;
    std::string censoring = "calibrated";
    double censoring_rate = 0.3;

    // study
    std::string design;
    std::string power_sweep;

    [[nodiscard]] Verbosity verbosity() const
    {
        return quiet ? Verbosity::kQuiet : (verbose ? Verbosity::kVerbose : Verbosity::kNormal);
    }
};

class Log {
public:
    explicit Log(Verbosity v) : level_(v) {}
    void info(const std::string& msg) const
    {
        if (level_ != Verbosity::kQuiet) std::cerr << msg << '\n';
    }
    void detail(const std::string& msg) const
    {
        if (level_ == Verbosity::kVerbose) std::cerr << msg << '\n';
    }

private:
    Verbosity level_;
};

std::string utc_now()
{
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string hex64(std::uint64_t v)
{
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << v;
    return os.str();
}

void write_text(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << text;
    if (!out) throw DataError("error while writing " + path);
}

void write_json(const std::string& path, const json& j)
{
    write_text(path, j.dump(2) + "\n");
}

std::optional<double> parse_lambda(const std::string& text, const char* flag)
{
    if (text == "cv") return std::nullopt;
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size() || !(v >= 0.0)) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw UsageError(std::string(flag) + " expects 'cv' or a nonnegative number, got '" + text + "'");
    }
}

CsvSchema schema_of(const Options& o)
{
    CsvSchema s;
    s.time_col = o.time_col;
    s.status_col = o.status_col;
    s.id_col = o.id_col;
    s.horizon = o.horizon;
    return s;
}

AnalysisOptions analysis_options(const Options& o)
{
    AnalysisOptions a;
    a.standardize = !o.no_standardize;
    a.constant_columns = o.drop_constant ? ConstantColumns::kDrop : ConstantColumns::kReject;
    a.lambda = parse_lambda(o.lambda, "--lambda");
    a.n_lambdas = o.n_lambdas;
    a.lambda_ratio = o.lambda_ratio;
    a.folds = o.folds;
    a.seed = o.seed;
    a.threads = std::max(1, o.threads);
    const auto lj = parse_lambda(o.lambda_j, "--lambda-j");
    if (lj) {
        a.nodewise = NodewiseTuning::kFixed;
        a.lambda_j = *lj;
    } else {
        a.nodewise = o.lambda_j_shared ? NodewiseTuning::kShared : NodewiseTuning::kCv;
    }
    if (o.folds < 2) throw UsageError("--folds must be at least 2");
    if (o.n_lambdas < 1) throw UsageError("--n-lambdas must be positive");
    if (!(o.lambda_ratio > 0.0 && o.lambda_ratio < 1.0)) throw UsageError("--lambda-min-ratio must lie in (0, 1)");
    return a;
}

json config_of(const Options& o, const std::string& command)
{
    json c;
    if (!o.input.empty()) {
        c["input"] = o.input;
        c["time_col"] = o.time_col;
        c["status_col"] = o.status_col;
        if (!o.id_col.empty()) c["id_col"] = o.id_col;
        c["horizon"] = o.horizon ? json(*o.horizon) : json("max observed time");
        c["standardize"] = !o.no_standardize;
        c["drop_constant"] = o.drop_constant;
        c["lambda"] = o.lambda;
        c["folds"] = o.folds;
        c["n_lambdas"] = o.n_lambdas;
        c["lambda_min_ratio"] = o.lambda_ratio;
    }
    if (command == "debias" || command == "infer") {
        c["lambda_j"] = o.lambda_j;
        c["lambda_j_shared"] = o.lambda_j_shared;
    }
    if (command == "infer") {
        c["contrasts"] = o.contrasts;
        if (!o.contrast_file.empty()) c["contrast_file"] = o.contrast_file;
        c["alpha"] = o.alpha;
        c["null"] = o.null_value;
        c["original_scale"] = o.original_scale;
    }
    if (command == "simulate") {
        c["setup"] = o.setup;
        c["n"] = o.n;
        c["p"] = o.p;
        c["mixture_p"] = o.mixture_p;
        c["censoring"] = o.censoring;
        c["censoring_rate"] = o.censoring_rate;
    }
    if (command == "study") {
        c["design"] = o.design;
        if (!o.power_sweep.empty()) c["power_sweep"] = o.power_sweep;
    }
    c["seed"] = o.seed;
    c["threads"] = o.threads;
    return c;
}

RunManifest start_manifest(const Options& o, const std::string& command)
{
    RunManifest m;
    m.command = command;
    m.config = config_of(o, command);
    m.seed = o.seed;
    m.version = FGRAY_VERSION;
    m.started_at = utc_now();
    if (!o.input.empty()) m.inputs.push_back(o.input);
    if (!o.contrast_file.empty()) m.inputs.push_back(o.contrast_file);
    if (!o.design.empty()) m.inputs.push_back(o.design);
    return m;
}

json covariate_table(const AnalysisResult& res, const Vector& working)
{
    const auto& names = res.data.covariate_names;
    const Vector original = res.transform.to_original_scale(working);
    json rows = json::array();
    for (Eigen::Index r = 0; r < working.size(); ++r) {
        const int col = res.transform.kept_columns[r];
        rows.push_back({{"column", col + 1},
                        {"name", names.empty() ? "z" + std::to_string(col + 1) : names[r]},
                        {"value", working[r]},
                        {"value_original_scale", original[r]}});
    }
    return rows;
}

json cv_json(const CvResult& cv)
{
    return {{"lambda_grid", cv.lambda_grid}, {"cv_mean", cv.cv_mean},     {"cv_se", cv.cv_se},
            {"lambda_min", cv.lambda_min},   {"lambda_1se", cv.lambda_1se}, {"index_min", cv.index_min},
            {"index_1se", cv.index_1se},     {"folds", cv.folds},          {"interior_min", cv.interior_min()}};
}

json fit_json(const AnalysisResult& res)
{
    json j;
    j["lambda"] = res.fit.lambda;
    j["objective"] = res.fit.objective;
    j["iterations"] = res.fit.iterations;
    j["converged"] = res.fit.converged;
    j["kkt_residual"] = res.fit.kkt_residual;
    j["nonzeros"] = (res.fit.beta.array() != 0.0).count();
    if (!res.fit.message.empty()) j["message"] = res.fit.message;
    j["beta"] = covariate_table(res, res.fit.beta);
    j["standardized"] = res.transform.applied;
    json dropped = json::array();
    for (int c : res.transform.dropped_columns) dropped.push_back(c + 1);
    j["dropped_columns"] = dropped;
    j["n"] = res.data.n();
    j["p"] = res.data.p();
    j["horizon"] = res.data.horizon;
    j["cause1_events"] = res.grid.total_events();
    if (res.cv) j["cv"] = cv_json(*res.cv);
    return j;
}

json debias_json(const AnalysisResult& res)
{
    json j;
    j["b"] = covariate_table(res, res.one_step.b);
    json rows = json::array();
    double worst_diag = 0.0;
    double worst_kkt = 0.0;
    for (const auto& d : res.theta.diagnostics) {
        worst_diag = std::max(worst_diag, std::abs(d.diag - 1.0));
        worst_kkt = std::max(worst_kkt, d.max_offdiag * d.tau_sq - d.lambda);
        rows.push_back({{"row", d.row + 1},
                        {"lambda_j", d.lambda},
                        {"tau_sq", d.tau_sq},
                        {"nonzeros", d.nonzeros},
                        {"diag", d.diag},
                        {"max_offdiag", d.max_offdiag},
                        {"kkt_residual", d.kkt_residual}});
    }
    j["theta_rows"] = rows;
    j["max_abs_diag_error"] = worst_diag;
    j["max_kkt_excess"] = worst_kkt;
    return j;
}

Vector parse_basis_contrast(const std::string& spec, int p)
{
    if (spec.rfind("e:", 0) != 0) throw UsageError("--contrast expects e:<j>, got '" + spec + "'");
    int j = 0;
    try {
        std::size_t used = 0;
        j = std::stoi(spec.substr(2), &used);
        if (used != spec.size() - 2) throw std::invalid_argument(spec);
    } catch (const std::exception&) {
        throw UsageError("--contrast expects e:<j>, got '" + spec + "'");
    }
    if (j < 1 || j > p) throw DataError("contrast " + spec + " is outside 1.." + std::to_string(p));
    Vector c = Vector::Zero(p);
    c[j - 1] = 1.0;
    return c;
}

std::vector<std::pair<std::string, Vector>> read_contrast_file(const std::string& path, int p)
{
    std::ifstream in(path);
    if (!in) throw DataError("cannot open contrast file " + path);
    std::vector<std::pair<std::string, Vector>> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        std::string id = "c" + std::to_string(out.size() + 1);
        std::size_t offset = 0;
        if (static_cast<int>(fields.size()) == p + 1) {
            id = fields[0];
            offset = 1;
        } else if (static_cast<int>(fields.size()) != p) {
            throw DataError(path + " line " + std::to_string(line_no) + ": expected " + std::to_string(p) +
                            " values (optionally preceded by an id)");
        }
        Vector c(p);
        for (int j = 0; j < p; ++j) {
            try {
                std::size_t used = 0;
                c[j] = std::stod(fields[offset + j], &used);
                if (used != fields[offset + j].size()) throw std::invalid_argument(fields[offset + j]);
            } catch (const std::exception&) {
                throw DataError(path + " line " + std::to_string(line_no) + " column " +
                                std::to_string(offset + j + 1) + ": not a number");
            }
        }
        out.emplace_back(id, c);
    }
    if (out.empty()) throw DataError("contrast file " + path + " has no contrasts");
    return out;
}

CompetingRisksData load_input(const Options& o)
{
    if (o.input.empty()) throw UsageError("--input is required");
    return load_csv(o.input, schema_of(o));
}

void finish_json(json& j, RunManifest& m, const std::string& path, std::chrono::steady_clock::time_point t0)
{
    m.outputs.push_back(path);
    m.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    j["manifest"] = m.to_json();
    write_json(path, j);
}

void write_sidecar(RunManifest& m, const std::string& path, std::chrono::steady_clock::time_point t0)
{
    m.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_json(path + ".manifest.json", m.to_json());
}

int dry_run(const Options& o, const std::string& command)
{
    if (!o.input.empty()) {
        const auto data = load_input(o);
        std::cerr << "input ok: n=" << data.n() << " p=" << data.p() << " cause-1 events=" << data.count(kCause1)
                  << '\n';
    }
    if (command != "simulate" && command != "study") (void)analysis_options(o);
    std::cout << config_of(o, command).dump(2) << '\n';
    return kExitOk;
}

int run_simulate(const Options& o)
{
    const auto t0 = std::chrono::steady_clock::now();
    if (o.out.empty()) throw UsageError("--out is required");
    CensoringSpec cens;
    const std::string& c = o.censoring;
    if (c == "none") {
        cens.kind = CensoringKind::kNone;
    } else if (c == "calibrated") {
        cens.kind = CensoringKind::kCalibratedUniform;
        cens.target_rate = o.censoring_rate;
    } else if (c.rfind("uniform:", 0) == 0 || c.rfind("exponential:", 0) == 0) {
        const auto colon = c.find(':');
        cens.kind = c[0] == 'u' ? CensoringKind::kUniform : CensoringKind::kExponential;
        try {
            cens.parameter = std::stod(c.substr(colon + 1));
        } catch (const std::exception&) {
            throw UsageError("--censoring value must be a number: '" + c + "'");
        }
    } else {
        throw UsageError("--censoring expects none, calibrated, uniform:<c> or exponential:<rate>");
    }

    CompetingRisksData data;
    if (o.setup == 1) {
        Setup1Config cfg;
        cfg.n = o.n;
        cfg.p = o.p;
        cfg.mixture_p = o.mixture_p;
        cfg.censoring = cens;
        cfg.seed = o.seed;
        data = gen_setup1(cfg);
    } else if (o.setup == 2) {
        Setup2Config cfg;
        cfg.n = o.n;
        cfg.p = o.p;
        cfg.mixture_p = o.mixture_p;
        cfg.censoring = cens;
        cfg.seed = o.seed;
        data = gen_setup2(cfg);
    } else {
        throw UsageError("--setup must be 1 or 2");
    }
    save_csv(data, o.out);
    auto m = start_manifest(o, "simulate");
    m.outputs.push_back(o.out);
    write_sidecar(m, o.out, t0);
    Log(o.verbosity()).info("wrote " + o.out + " (n=" + std::to_string(data.n()) + ", p=" + std::to_string(data.p()) +
                            ", censored=" + std::to_string(data.count(kCensored)) + ")");
    return kExitOk;
}

int run_fit(const Options& o, bool cv_only)
{
    const auto t0 = std::chrono::steady_clock::now();
    const Log log(o.verbosity());
    if (o.out.empty()) throw UsageError("--out is required");
    auto opts = analysis_options(o);
    if (cv_only) opts.lambda.reset();
    const auto data = load_input(o);
    log.detail("loaded " + o.input + ": n=" + std::to_string(data.n()) + " p=" + std::to_string(data.p()));
    const auto res = analyze(data, opts, Stage::kFit);
    if (res.cv) {
        for (std::size_t l = 0; l < res.cv->lambda_grid.size(); ++l) {
            log.detail("lambda " + format_double(res.cv->lambda_grid[l]) + "  cv " + format_double(res.cv->cv_mean[l]) +
                       " +- " + format_double(res.cv->cv_se[l]));
        }
    }
    log.detail("fit: lambda " + format_double(res.fit.lambda) + ", kkt " + format_double(res.fit.kkt_residual) +
               ", iterations " + std::to_string(res.fit.iterations));
    if (!res.fit.converged) log.info("warning: solver did not converge: " + res.fit.message);
    if (!o.dump_weights.empty()) dump_weights_csv(res.grid, o.dump_weights);

    auto m = start_manifest(o, cv_only ? "cv" : "fit");
    json j;
    if (cv_only) {
        j = cv_json(*res.cv);
        if (!o.csv_out.empty()) {
            std::ostringstream os;
            os << "lambda,cv_mean,cv_se\n";
            for (std::size_t l = 0; l < res.cv->lambda_grid.size(); ++l) {
                os << format_double(res.cv->lambda_grid[l]) << ',' << format_double(res.cv->cv_mean[l]) << ','
                   << format_double(res.cv->cv_se[l]) << '\n';
            }
            write_text(o.csv_out, os.str());
            m.outputs.push_back(o.csv_out);
            write_sidecar(m, o.csv_out, t0);
        }
    } else {
        j = fit_json(res);
        if (!o.dump_weights.empty()) {
            m.outputs.push_back(o.dump_weights);
            write_sidecar(m, o.dump_weights, t0);
        }
    }
    finish_json(j, m, o.out, t0);
    log.info("wrote " + o.out + " (lambda " + format_double(res.fit.lambda) + ", " +
             std::to_string((res.fit.beta.array() != 0.0).count()) + " nonzero)");
    return res.fit.converged ? kExitOk : kExitNumeric;
}

int run_debias(const Options& o)
{
    const auto t0 = std::chrono::steady_clock::now();
    const Log log(o.verbosity());
    if (o.out.empty()) throw UsageError("--out is required");
    const auto opts = analysis_options(o);
    const auto res = analyze(load_input(o), opts, Stage::kDebias);
    json j = fit_json(res);
    j.update(debias_json(res));
    auto m = start_manifest(o, "debias");
    finish_json(j, m, o.out, t0);
    log.info("wrote " + o.out);
    return kExitOk;
}

int run_infer(const Options& o)
{
    const auto t0 = std::chrono::steady_clock::now();
    const Log log(o.verbosity());
    if (o.out.empty()) throw UsageError("--out is required");
    if (!(o.alpha > 0.0 && o.alpha < 1.0)) throw UsageError("--alpha must lie in (0, 1)");
    const auto opts = analysis_options(o);
    const auto data = load_input(o);
    const int p = data.p();

    std::vector<std::pair<std::string, Vector>> contrasts;
    for (const auto& spec : o.contrasts) contrasts.emplace_back(spec, parse_basis_contrast(spec, p));
    if (!o.contrast_file.empty()) {
        for (auto& c : read_contrast_file(o.contrast_file, p)) contrasts.push_back(std::move(c));
    }
    const auto res = analyze(data, opts, Stage::kInfer);
    if (contrasts.empty()) {
        for (int kept : res.transform.kept_columns) {
            const std::string spec = "e:" + std::to_string(kept + 1);
            contrasts.emplace_back(spec, parse_basis_contrast(spec, p));
        }
    }

    std::ostringstream os;
    os << "contrast_id,estimate,se,se_corrected,ci_lo,ci_hi,z,p_value\n";
    for (const auto& [id, c] : contrasts) {
        const auto ci = res.contrast(c, o.alpha, o.null_value, o.original_scale);
        os << id << ',' << format_double(ci.estimate) << ',' << format_double(ci.se) << ','
           << format_double(ci.se_corrected) << ',' << format_double(ci.ci_lo) << ',' << format_double(ci.ci_hi)
           << ',' << format_double(ci.z) << ',' << format_double(ci.p_value) << '\n';
    }
    write_text(o.out, os.str());
    auto m = start_manifest(o, "infer");
    m.outputs.push_back(o.out);
    write_sidecar(m, o.out, t0);
    log.info("wrote " + o.out + " (" + std::to_string(contrasts.size()) + " contrasts)");
    return kExitOk;
}

int run_study_command(const Options& o, const CLI::App& sub)
{
    const auto t0 = std::chrono::steady_clock::now();
    const Log log(o.verbosity());
    if (o.design.empty()) throw UsageError("--design is required");
    if (o.out.empty()) throw UsageError("--out is required");
    std::ifstream in(o.design);
    if (!in) throw DataError("cannot open design file " + o.design);
    json spec;
    try {
        spec = json::parse(in);
    } catch (const json::parse_error& e) {
        throw DataError(o.design + ": " + e.what());
    }
    StudyDesign design = design_from_json(spec);
    if (sub.count("--threads") > 0) design.threads = std::max(1, o.threads);
    if (sub.count("--seed") > 0) design.seed = o.seed;
    auto m = start_manifest(o, "study");
    m.seed = design.seed;
    m.config["resolved_design"] = design_to_json(design);

    if (!o.power_sweep.empty()) {
        const auto values = parse_sweep(o.power_sweep);
        const auto points = power_sweep(design, values);
        write_power_csv(points, o.out);
        m.outputs.push_back(o.out);
        write_sidecar(m, o.out, t0);
        log.info("wrote " + o.out + " (" + std::to_string(points.size()) + " points)");
        return kExitOk;
    }

    const auto result = run_study(design);
    for (const auto& rec : result.replicates) {
        if (!rec.ok) log.info("replicate " + std::to_string(rec.rep + 1) + " failed: " + rec.error);
    }
    json j = to_json(result);
    if (!o.csv_out.empty()) {
        write_study_csv(result, o.csv_out);
        m.outputs.push_back(o.csv_out);
        write_sidecar(m, o.csv_out, t0);
    }
    finish_json(j, m, o.out, t0);
    log.info("wrote " + o.out + " (" + std::to_string(result.n_ok) + "/" + std::to_string(design.n_reps) +
             " replicates ok)");
    return kExitOk;
}

void add_verbosity(CLI::App* sub, Options& o)
{
    auto* q = sub->add_flag("--quiet,-q", o.quiet, "Only print errors");
    sub->add_flag("--verbose,-v", o.verbose, "Print per-lambda progress and KKT residuals")->excludes(q);
    sub->add_flag("--dry-run", o.dry_run, "Validate inputs and print the resolved config");
}

void add_data_options(CLI::App* sub, Options& o)
{
    sub->add_option("--input,-i", o.input, "Dataset CSV")->required();
    sub->add_option("--time-col", o.time_col, "Name of the time column")->capture_default_str();
    sub->add_option("--status-col", o.status_col, "Name of the status column (0/1/2)")->capture_default_str();
    sub->add_option("--id-col", o.id_col, "Name of an optional subject id column");
    sub->add_option("--horizon", o.horizon, "Study horizon t*; later observations are censored at t*");
    sub->add_flag("--drop-constant", o.drop_constant, "Drop constant covariates instead of failing");
    sub->add_flag("--no-standardize", o.no_standardize, "Fit on the raw covariate scale");
}

void add_fit_options(CLI::App* sub, Options& o)
{
    sub->add_option("--lambda", o.lambda, "Penalty: 'cv' or a value")->capture_default_str();
    sub->add_option("--folds", o.folds, "Cross-validation folds")->capture_default_str();
    sub->add_option("--n-lambdas", o.n_lambdas, "Length of the lambda path")->capture_default_str();
    sub->add_option("--lambda-min-ratio", o.lambda_ratio, "Smallest lambda as a fraction of lambda_max")
        ->capture_default_str();
    sub->add_option("--seed", o.seed, "Seed for fold assignment")->capture_default_str();
    sub->add_option("--threads", o.threads, "Worker threads")->capture_default_str();
}

void add_nodewise_options(CLI::App* sub, Options& o)
{
    sub->add_option("--lambda-j", o.lambda_j, "Nodewise penalty: 'cv' (per row) or a value")->capture_default_str();
    sub->add_flag("--lambda-j-shared", o.lambda_j_shared, "One cross-validated nodewise penalty for all rows");
}

} // namespace

std::uint64_t file_checksum(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        for (std::streamsize k = 0; k < in.gcount(); ++k) {
            h ^= static_cast<unsigned char>(buf[k]);
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

json RunManifest::to_json() const
{
    json j;
    j["command"] = command;
    j["config"] = config;
    j["seed"] = seed;
    j["version"] = version;
    json in = json::array();
    for (const auto& path : inputs) in.push_back({{"path", path}, {"fnv1a64", hex64(file_checksum(path))}});
    j["inputs"] = in;
    j["outputs"] = outputs;
    j["timing"] = {{"started_at", started_at}, {"wall_clock_seconds", wall_clock_seconds}};
    return j;
}

int dispatch(int argc, char** argv)
{
    CLI::App app{"Fine-Gray LASSO fitting and debiased inference for high-dimensional competing risks", "fgray"};
    app.require_subcommand(0, 1);
    bool show_version = false;
    app.add_flag("--version", show_version, "Print version and build information");
    Options o;

    auto* simulate = app.add_subcommand("simulate", "Draw a dataset from simulation setup 1 or 2");
    simulate->add_option("--setup", o.setup, "Design: 1 (independent) or 2 (block correlated)")->capture_default_str();
    simulate->add_option("--n", o.n, "Subjects")->capture_default_str();
    simulate->add_option("--p", o.p, "Covariates")->capture_default_str();
    simulate->add_option("--mixture-p", o.mixture_p, "Cause-1 mixture parameter")->capture_default_str();
    simulate->add_option("--censoring", o.censoring, "none | calibrated | uniform:<c> | exponential:<rate>")
        ->capture_default_str();
    simulate->add_option("--censoring-rate", o.censoring_rate, "Target rate of calibrated censoring")
        ->capture_default_str();
    simulate->add_option("--seed", o.seed, "Random seed")->capture_default_str();
    simulate->add_option("--out,-o", o.out, "Output CSV")->required();
    add_verbosity(simulate, o);

    auto* fit = app.add_subcommand("fit", "Fit the L1-penalized Fine-Gray model");
    add_data_options(fit, o);
    add_fit_options(fit, o);
    fit->add_option("--out,-o", o.out, "Output JSON")->required();
    fit->add_option("--dump-weights", o.dump_weights, "Write the IPCW weight matrix as CSV");
    add_verbosity(fit, o);

    auto* cv = app.add_subcommand("cv", "Cross-validate the penalty");
    add_data_options(cv, o);
    add_fit_options(cv, o);
    cv->add_option("--out,-o", o.out, "Output JSON")->required();
    cv->add_option("--csv", o.csv_out, "Also write the CV curve as CSV");
    add_verbosity(cv, o);

    auto* debias = app.add_subcommand("debias", "One-step bias-corrected estimator");
    add_data_options(debias, o);
    add_fit_options(debias, o);
    add_nodewise_options(debias, o);
    debias->add_option("--out,-o", o.out, "Output JSON")->required();
    add_verbosity(debias, o);

    auto* infer = app.add_subcommand("infer", "Confidence intervals and Wald tests for linear contrasts");
    add_data_options(infer, o);
    add_fit_options(infer, o);
    add_nodewise_options(infer, o);
    infer->add_option("--contrast", o.contrasts, "Basis contrast e:<j> (1-based); repeatable");
    infer->add_option("--contrast-file", o.contrast_file, "CSV with one contrast vector per line");
    infer->add_option("--alpha", o.alpha, "Significance level")->capture_default_str();
    infer->add_option("--null", o.null_value, "Null value of the contrast")->capture_default_str();
    infer->add_flag("--original-scale", o.original_scale, "Report on the unstandardized covariate scale");
    infer->add_option("--out,-o", o.out, "Output CSV")->required();
    add_verbosity(infer, o);

    auto* study = app.add_subcommand("study", "Monte Carlo coverage and power study");
    study->add_option("--design", o.design, "JSON design file")->required();
    study->add_option("--out,-o", o.out, "Output JSON (CSV with --power-sweep)")->required();
    study->add_option("--csv", o.csv_out, "Also write the coefficient table as CSV");
    study->add_option("--power-sweep", o.power_sweep, "Sweep beta_{1,1} over lo:hi:step");
    study->add_option("--threads", o.threads, "Replicates in flight");
    study->add_option("--seed", o.seed, "Override the design seed");
    add_verbosity(study, o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error[usage]: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }

    if (show_version) {
        std::cout << "fgray " << FGRAY_VERSION << " (Eigen " << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION
                  << '.' << EIGEN_MINOR_VERSION << ", C++" << __cplusplus / 100 << ")\n";
        return kExitOk;
    }
    if (app.get_subcommands().empty()) {
        std::cerr << app.help();
        return kExitUsage;
    }
    CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();

    try {
        if (o.dry_run) return dry_run(o, name);
        if (name == "simulate") return run_simulate(o);
        if (name == "fit") return run_fit(o, false);
        if (name == "cv") return run_fit(o, true);
        if (name == "debias") return run_debias(o);
        if (name == "infer") return run_infer(o);
        return run_study_command(o, *sub);
    } catch (const UsageError& e) {
        std::cerr << "error[usage]: " << e.what() << "\n\n" << sub->help();
        return kExitUsage;
    } catch (const DataError& e) {
        std::cerr << "error[data]: " << e.what() << '\n';
        return kExitData;
    } catch (const NumericError& e) {
        std::cerr << "error[numeric]: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error[numeric]: " << e.what() << '\n';
        return kExitNumeric;
    }
}

} // namespace fgray
