#pragma once

#include "fgray/analysis.hpp"
#include "fgray/simgen.hpp"

#include "json.hpp"

#include <map>
#include <string>
#include <vector>

namespace fgray {

/// Monte Carlo design; coefficient indices are 0-based here and 1-based in JSON.
struct StudyDesign {
    int setup = 1;
    int n = 200;
    int p = 300;
    int n_reps = 100;
    double alpha = 0.05;
    std::uint64_t seed = 1;
    CensoringSpec censoring;
    double mixture_p = 0.6;
    std::vector<int> tracked;            // empty: the design default
    std::map<int, double> beta_overrides; // cause-1 coefficients replacing the defaults
    int threads = 1;                      // replicates in flight

    int folds = 10;
    int n_lambdas = 100;
    double lambda_ratio = 0.01;
    NodewiseTuning nodewise = NodewiseTuning::kCv;
    double lambda_j = 0.0;
    int nodewise_n_lambdas = 20;
    int cv_patience = 10;  // lambda grid stops after this many values without a lower CV loss; 0 = full grid
};

std::vector<int> default_tracked(int setup);

/// True cause-1 coefficient vector of the design.
Vector design_beta1(const StudyDesign& design);

struct ReplicateRecord {
    int rep = 0;
    bool ok = false;
    std::string error;
    double lambda = 0.0;
    bool lambda_interior = false;
    int support_size = 0;
    bool support_hit = false;       // every nonzero true coefficient selected by the initial fit
    bool all_nonzero_rejected = false;
    double censored_fraction = 0.0;
    std::vector<double> beta_init;  // tracked coordinates
    std::vector<double> b;
    std::vector<double> se;
    std::vector<double> se_corrected;
    double seconds = 0.0;
};

struct CoefficientSummary {
    int index = 0;
    double true_value = 0.0;
    double mean_estimate = 0.0;
    double sd_estimate = 0.0;
    double mean_initial = 0.0;
    double mean_se = 0.0;
    double mean_se_corrected = 0.0;
    double coverage = 0.0;        // corrected-SE interval covers the true value
    double rejection_rate = 0.0;  // Wald test of beta_j = 0 with the uncorrected SE
    double coverage_mc_se = 0.0;
    double rejection_mc_se = 0.0;
};

struct StudyResult {
    StudyDesign design;
    CensoringSpec censoring;  // resolved law
    std::vector<CoefficientSummary> coefficients;
    std::vector<ReplicateRecord> replicates;
    int n_ok = 0;
    int n_failed = 0;
    double capture_rate = 0.0;  // replicates rejecting every nonzero tracked coefficient
    double support_rate = 0.0;
    double interior_rate = 0.0;
    double mean_censored_fraction = 0.0;
    double runtime_seconds = 0.0;
};

/// Generates replicate `rep` of the design with the resolved censoring law.
CompetingRisksData generate_replicate(const StudyDesign& design, const CensoringSpec& censoring, int rep);

CensoringSpec resolve_censoring(const StudyDesign& design);

AnalysisOptions replicate_options(const StudyDesign& design, int rep);

StudyResult run_study(const StudyDesign& design);

struct PowerPoint {
    double beta_value = 0.0;
    double rejection_rate = 0.0;
    double mc_se = 0.0;
    int n_ok = 0;
};

/// Rejection rate of beta_{1,1} = 0 as the true beta_{1,1} runs over `values`.
std::vector<PowerPoint> power_sweep(const StudyDesign& design, const std::vector<double>& values);

/// lo:hi:step, inclusive of hi up to rounding.
std::vector<double> parse_sweep(const std::string& spec);

StudyDesign design_from_json(const nlohmann::json& j);
nlohmann::json design_to_json(const StudyDesign& design);
nlohmann::json to_json(const StudyResult& result);

void write_study_csv(const StudyResult& result, const std::string& path);
void write_power_csv(const std::vector<PowerPoint>& points, const std::string& path);

} // namespace fgray
