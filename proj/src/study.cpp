#include "fgray/study.hpp"
#include "fgray/error.hpp"
#include "fgray/normal.hpp"
#include "fgray/parallel.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

namespace fgray {

using nlohmann::json;

namespace {

double seconds_since(std::chrono::steady_clock::time_point start)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

Setup1Config setup1_config(const StudyDesign& d)
{
    Setup1Config cfg;
    cfg.n = d.n;
    cfg.p = d.p;
    cfg.beta1 = design_beta1(d);
    cfg.mixture_p = d.mixture_p;
    cfg.censoring = d.censoring;
    cfg.seed = d.seed;
    return cfg;
}

Setup2Config setup2_config(const StudyDesign& d)
{
    Setup2Config cfg;
    cfg.n = d.n;
    cfg.p = d.p;
    cfg.beta1 = design_beta1(d);
    cfg.mixture_p = d.mixture_p;
    cfg.censoring = d.censoring;
    cfg.seed = d.seed;
    return cfg;
}

void check_design(const StudyDesign& d)
{
    if (d.setup != 1 && d.setup != 2) throw DataError("study setup must be 1 or 2");
    if (d.n_reps < 1) throw DataError("n_reps must be at least 1");
    if (!(d.alpha > 0.0 && d.alpha < 1.0)) throw DataError("alpha must lie in (0, 1)");
    if (d.cv_patience < 0) throw DataError("cv_patience must be nonnegative");
    for (int j : d.tracked) {
        if (j < 0 || j >= d.p) throw DataError("tracked coefficient " + std::to_string(j + 1) + " is out of range");
    }
    for (const auto& [j, v] : d.beta_overrides) {
        if (j < 0 || j >= d.p) throw DataError("beta override " + std::to_string(j + 1) + " is out of range");
        if (!std::isfinite(v)) throw DataError("beta override values must be finite");
    }
}

double mean_of(const std::vector<double>& v)
{
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v)
{
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double binomial_se(double rate, int count)
{
    return count > 0 ? std::sqrt(rate * (1.0 - rate) / count) : 0.0;
}

json censoring_to_json(const CensoringSpec& c)
{
    switch (c.kind) {
    case CensoringKind::kNone:
        return {{"type", "none"}};
    case CensoringKind::kUniform:
        return {{"type", "uniform"}, {"max", c.parameter}};
    case CensoringKind::kExponential:
        return {{"type", "exponential"}, {"rate", c.parameter}};
    case CensoringKind::kCalibratedUniform:
        break;
    }
    return {{"type", "calibrated"}, {"target", c.target_rate}};
}

CensoringSpec censoring_from_json(const json& j)
{
    CensoringSpec c;
    const std::string type = j.is_string() ? j.get<std::string>() : j.at("type").get<std::string>();
    if (type == "none") {
        c.kind = CensoringKind::kNone;
    } else if (type == "uniform") {
        c.kind = CensoringKind::kUniform;
        c.parameter = j.at("max").get<double>();
    } else if (type == "exponential") {
        c.kind = CensoringKind::kExponential;
        c.parameter = j.at("rate").get<double>();
    } else if (type == "calibrated") {
        c.kind = CensoringKind::kCalibratedUniform;
        if (j.is_object() && j.contains("target")) c.target_rate = j.at("target").get<double>();
    } else {
        throw DataError("unknown censoring type '" + type + "'");
    }
    return c;
}

} // namespace

std::vector<int> default_tracked(int setup)
{
    if (setup == 2) {
        std::vector<int> t(16);
        std::iota(t.begin(), t.end(), 0);
        t.push_back(29);
        return t;
    }
    return {0, 1, 9};
}

Vector design_beta1(const StudyDesign& design)
{
    Vector b = design.setup == 2 ? setup2_beta1(design.p) : setup1_beta1(design.p);
    for (const auto& [j, v] : design.beta_overrides) {
        if (j < 0 || j >= design.p) throw DataError("beta override " + std::to_string(j + 1) + " is out of range");
        b[j] = v;
    }
    return b;
}

CensoringSpec resolve_censoring(const StudyDesign& design)
{
    return design.setup == 2 ? resolve_censoring(setup2_config(design)) : resolve_censoring(setup1_config(design));
}

CompetingRisksData generate_replicate(const StudyDesign& design, const CensoringSpec& censoring, int rep)
{
    Rng rng = replicate_rng(design.seed, static_cast<std::uint64_t>(rep));
    if (design.setup == 2) {
        const auto cfg = setup2_config(design);
        const Matrix z = setup2_covariates(cfg.n, cfg.p, cfg.block_sizes, cfg.block_rho, rng);
        return simulate(z, setup2_model(cfg), censoring, rng);
    }
    const auto cfg = setup1_config(design);
    const Matrix z = setup1_covariates(cfg.n, cfg.p, rng);
    return simulate(z, setup1_model(cfg), censoring, rng);
}

AnalysisOptions replicate_options(const StudyDesign& design, int rep)
{
    AnalysisOptions opt;
    opt.standardize = false;  // simulated covariates are already on the unit scale
    opt.rule = LambdaRule::kMin;
    opt.n_lambdas = design.n_lambdas;
    opt.lambda_ratio = design.lambda_ratio;
    opt.folds = design.folds;
    opt.seed = design.seed * 1000003ULL + static_cast<std::uint64_t>(rep);
    opt.threads = 1;
    opt.nodewise = design.nodewise;
    opt.lambda_j = design.lambda_j;
    opt.nodewise_n_lambdas = design.nodewise_n_lambdas;
    opt.cv_patience = design.cv_patience;
    opt.two_step = true;
    return opt;
}

StudyResult run_study(const StudyDesign& input)
{
    const auto start = std::chrono::steady_clock::now();
    StudyDesign design = input;
    if (design.tracked.empty()) design.tracked = default_tracked(design.setup);
    check_design(design);

    StudyResult result;
    result.design = design;
    result.censoring = resolve_censoring(design);
    const Vector beta1 = design_beta1(design);
    const double q = normal_quantile(1.0 - design.alpha / 2.0);
    const auto T = design.tracked.size();

    result.replicates.resize(design.n_reps);
    parallel_for(design.n_reps, design.threads, [&](int rep) {
        const auto t0 = std::chrono::steady_clock::now();
        ReplicateRecord& rec = result.replicates[rep];
        rec.rep = rep;
        try {
            const auto data = generate_replicate(design, result.censoring, rep);
            rec.censored_fraction = static_cast<double>(data.count(kCensored)) / data.n();
            const auto res = analyze(data, replicate_options(design, rep));
            rec.lambda = res.fit.lambda;
            rec.lambda_interior = res.cv && res.cv->interior_min();
            rec.support_size = static_cast<int>((res.fit.beta.array() != 0.0).count());
            rec.support_hit = true;
            for (int j = 0; j < design.p; ++j) {
                if (beta1[j] != 0.0 && res.fit.beta[j] == 0.0) rec.support_hit = false;
            }
            rec.all_nonzero_rejected = true;
            for (std::size_t t = 0; t < T; ++t) {
                const int j = design.tracked[t];
                rec.beta_init.push_back(res.fit.beta[j]);
                rec.b.push_back(res.one_step.b[j]);
                rec.se.push_back(res.se[j]);
                rec.se_corrected.push_back(res.se_corrected[j]);
                if (beta1[j] != 0.0 && !(std::abs(res.one_step.b[j]) > q * res.se[j])) rec.all_nonzero_rejected = false;
            }
            rec.ok = true;
        } catch (const std::exception& e) {
            rec.ok = false;
            rec.error = e.what();
        }
        rec.seconds = seconds_since(t0);
    });

    std::vector<const ReplicateRecord*> ok;
    for (const auto& rec : result.replicates) {
        if (rec.ok) ok.push_back(&rec);
    }
    result.n_ok = static_cast<int>(ok.size());
    result.n_failed = design.n_reps - result.n_ok;

    int capture = 0;
    int support = 0;
    int interior = 0;
    double censored = 0.0;
    for (const auto* rec : ok) {
        capture += rec->all_nonzero_rejected ? 1 : 0;
        support += rec->support_hit ? 1 : 0;
        interior += rec->lambda_interior ? 1 : 0;
        censored += rec->censored_fraction;
    }
    if (result.n_ok > 0) {
        result.capture_rate = static_cast<double>(capture) / result.n_ok;
        result.support_rate = static_cast<double>(support) / result.n_ok;
        result.interior_rate = static_cast<double>(interior) / result.n_ok;
        result.mean_censored_fraction = censored / result.n_ok;
    }

    for (std::size_t t = 0; t < T; ++t) {
        CoefficientSummary s;
        s.index = design.tracked[t];
        s.true_value = beta1[s.index];
        std::vector<double> b, init, se, sec;
        int covered = 0;
        int rejected = 0;
        for (const auto* rec : ok) {
            b.push_back(rec->b[t]);
            init.push_back(rec->beta_init[t]);
            se.push_back(rec->se[t]);
            sec.push_back(rec->se_corrected[t]);
            if (std::abs(rec->b[t] - s.true_value) <= q * rec->se_corrected[t]) ++covered;
            if (std::abs(rec->b[t]) > q * rec->se[t]) ++rejected;
        }
        s.mean_estimate = mean_of(b);
        s.sd_estimate = sd_of(b);
        s.mean_initial = mean_of(init);
        s.mean_se = mean_of(se);
        s.mean_se_corrected = mean_of(sec);
        if (result.n_ok > 0) {
            s.coverage = static_cast<double>(covered) / result.n_ok;
            s.rejection_rate = static_cast<double>(rejected) / result.n_ok;
        }
        s.coverage_mc_se = binomial_se(s.coverage, result.n_ok);
        s.rejection_mc_se = binomial_se(s.rejection_rate, result.n_ok);
        result.coefficients.push_back(s);
    }
    result.runtime_seconds = seconds_since(start);
    return result;
}

std::vector<PowerPoint> power_sweep(const StudyDesign& base, const std::vector<double>& values)
{
    std::vector<PowerPoint> out;
    for (double v : values) {
        StudyDesign d = base;
        d.beta_overrides[0] = v;
        d.tracked = {0};
        const auto res = run_study(d);
        PowerPoint pt;
        pt.beta_value = v;
        pt.n_ok = res.n_ok;
        pt.rejection_rate = res.coefficients.front().rejection_rate;
        pt.mc_se = res.coefficients.front().rejection_mc_se;
        out.push_back(pt);
    }
    return out;
}

std::vector<double> parse_sweep(const std::string& spec)
{
    const auto first = spec.find(':');
    const auto second = first == std::string::npos ? first : spec.find(':', first + 1);
    if (second == std::string::npos) throw DataError("power sweep must look like lo:hi:step");
    double lo = 0.0;
    double hi = 0.0;
    double step = 0.0;
    try {
        lo = std::stod(spec.substr(0, first));
        hi = std::stod(spec.substr(first + 1, second - first - 1));
        step = std::stod(spec.substr(second + 1));
    } catch (const std::exception&) {
        throw DataError("power sweep must look like lo:hi:step");
    }
    if (!(step > 0.0) || !(hi >= lo)) throw DataError("power sweep needs step > 0 and hi >= lo");
    std::vector<double> values;
    for (int k = 0;; ++k) {
        const double v = lo + k * step;
        if (v > hi + 1e-9 * step) break;
        values.push_back(v);
    }
    return values;
}

StudyDesign design_from_json(const json& j)
{
    static const std::set<std::string> known{"setup",  "n",         "p",        "n_reps",  "alpha",
                                             "seed",   "censoring", "tracked_coefficients", "beta_overrides",
                                             "mixture_p", "threads", "folds",   "n_lambdas", "lambda_min_ratio",
                                             "nodewise", "nodewise_n_lambdas", "cv_patience"};
    if (!j.is_object()) throw DataError("study design must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (!known.contains(key)) throw DataError("unknown study design key '" + key + "'");
    }
    StudyDesign d;
    try {
        d.setup = j.value("setup", 1);
        d.n = j.value("n", d.setup == 2 ? 500 : 200);
        d.p = j.value("p", d.setup == 2 ? 1000 : 300);
        d.n_reps = j.value("n_reps", d.n_reps);
        d.alpha = j.value("alpha", d.alpha);
        d.seed = j.value("seed", d.seed);
        d.mixture_p = j.value("mixture_p", d.mixture_p);
        d.threads = j.value("threads", d.threads);
        d.folds = j.value("folds", d.folds);
        d.n_lambdas = j.value("n_lambdas", d.n_lambdas);
        d.lambda_ratio = j.value("lambda_min_ratio", d.lambda_ratio);
        d.nodewise_n_lambdas = j.value("nodewise_n_lambdas", d.nodewise_n_lambdas);
        d.cv_patience = j.value("cv_patience", d.cv_patience);
        if (j.contains("censoring")) d.censoring = censoring_from_json(j.at("censoring"));
        if (j.contains("tracked_coefficients")) {
            for (int idx : j.at("tracked_coefficients").get<std::vector<int>>()) d.tracked.push_back(idx - 1);
        }
        if (j.contains("beta_overrides")) {
            for (const auto& [key, value] : j.at("beta_overrides").items()) {
                d.beta_overrides[std::stoi(key) - 1] = value.get<double>();
            }
        }
        if (j.contains("nodewise")) {
            const auto& nw = j.at("nodewise");
            if (nw.is_number()) {
                d.nodewise = NodewiseTuning::kFixed;
                d.lambda_j = nw.get<double>();
            } else if (nw == "cv") {
                d.nodewise = NodewiseTuning::kCv;
            } else if (nw == "shared") {
                d.nodewise = NodewiseTuning::kShared;
            } else {
                throw DataError("nodewise must be \"cv\", \"shared\" or a number");
            }
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("study design: ") + e.what());
    } catch (const std::invalid_argument&) {
        throw DataError("study design: beta_overrides keys must be 1-based coefficient indices");
    }
    return d;
}

json design_to_json(const StudyDesign& d)
{
    json j;
    j["setup"] = d.setup;
    j["n"] = d.n;
    j["p"] = d.p;
    j["n_reps"] = d.n_reps;
    j["alpha"] = d.alpha;
    j["seed"] = d.seed;
    j["censoring"] = censoring_to_json(d.censoring);
    j["mixture_p"] = d.mixture_p;
    j["threads"] = d.threads;
    j["folds"] = d.folds;
    j["n_lambdas"] = d.n_lambdas;
    j["lambda_min_ratio"] = d.lambda_ratio;
    j["nodewise_n_lambdas"] = d.nodewise_n_lambdas;
    j["cv_patience"] = d.cv_patience;
    switch (d.nodewise) {
    case NodewiseTuning::kCv: j["nodewise"] = "cv"; break;
    case NodewiseTuning::kShared: j["nodewise"] = "shared"; break;
    case NodewiseTuning::kFixed: j["nodewise"] = d.lambda_j; break;
    }
    json tracked = json::array();
    for (int t : d.tracked) tracked.push_back(t + 1);
    j["tracked_coefficients"] = tracked;
    json overrides = json::object();
    for (const auto& [k, v] : d.beta_overrides) overrides[std::to_string(k + 1)] = v;
    j["beta_overrides"] = overrides;
    return j;
}

json to_json(const StudyResult& r)
{
    json j;
    j["design"] = design_to_json(r.design);
    j["censoring_law"] = censoring_to_json(r.censoring);
    j["n_ok"] = r.n_ok;
    j["n_failed"] = r.n_failed;
    j["capture_rate"] = r.capture_rate;
    j["support_rate"] = r.support_rate;
    j["interior_rate"] = r.interior_rate;
    j["mean_censored_fraction"] = r.mean_censored_fraction;

    json coefs = json::array();
    for (const auto& s : r.coefficients) {
        coefs.push_back({{"coefficient", s.index + 1},
                         {"true", s.true_value},
                         {"mean_estimate", s.mean_estimate},
                         {"sd", s.sd_estimate},
                         {"mean_initial", s.mean_initial},
                         {"mean_se", s.mean_se},
                         {"mean_se_corrected", s.mean_se_corrected},
                         {"coverage", s.coverage},
                         {"coverage_mc_se", s.coverage_mc_se},
                         {"rejection_rate", s.rejection_rate},
                         {"rejection_mc_se", s.rejection_mc_se}});
    }
    j["coefficients"] = coefs;

    json reps = json::array();
    json rep_seconds = json::array();
    for (const auto& rec : r.replicates) {
        json x{{"rep", rec.rep + 1}, {"ok", rec.ok}};
        if (rec.ok) {
            x["lambda"] = rec.lambda;
            x["lambda_interior"] = rec.lambda_interior;
            x["support_size"] = rec.support_size;
            x["support_hit"] = rec.support_hit;
            x["all_nonzero_rejected"] = rec.all_nonzero_rejected;
            x["censored_fraction"] = rec.censored_fraction;
            x["beta_init"] = rec.beta_init;
            x["b"] = rec.b;
            x["se"] = rec.se;
            x["se_corrected"] = rec.se_corrected;
        } else {
            x["error"] = rec.error;
        }
        reps.push_back(x);
        rep_seconds.push_back(rec.seconds);
    }
    j["replicates"] = reps;
    j["timing"] = {{"runtime_seconds", r.runtime_seconds}, {"replicate_seconds", rep_seconds}};
    return j;
}

void write_study_csv(const StudyResult& r, const std::string& path)
{
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << "coefficient,true,mean_estimate,sd,mean_initial,mean_se,mean_se_corrected,coverage,coverage_mc_se,"
           "rejection_rate,rejection_mc_se,n_ok\n";
    for (const auto& s : r.coefficients) {
        out << s.index + 1 << ',' << format_double(s.true_value) << ',' << format_double(s.mean_estimate) << ','
            << format_double(s.sd_estimate) << ',' << format_double(s.mean_initial) << ','
            << format_double(s.mean_se) << ',' << format_double(s.mean_se_corrected) << ','
            << format_double(s.coverage) << ',' << format_double(s.coverage_mc_se) << ','
            << format_double(s.rejection_rate) << ',' << format_double(s.rejection_mc_se) << ',' << r.n_ok << '\n';
    }
}

void write_power_csv(const std::vector<PowerPoint>& points, const std::string& path)
{
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << "beta_value,rejection_rate,mc_se\n";
    for (const auto& pt : points) {
        out << format_double(pt.beta_value) << ',' << format_double(pt.rejection_rate) << ','
            << format_double(pt.mc_se) << '\n';
    }
}

} // namespace fgray
