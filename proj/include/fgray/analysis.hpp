#pragma once

#include "fgray/debias.hpp"
#include "fgray/inference.hpp"
#include "fgray/solver.hpp"

#include <optional>
#include <vector>

namespace fgray {

enum class LambdaRule { kMin, kOneSe };
enum class NodewiseTuning { kCv, kShared, kFixed };
enum class Stage { kFit, kDebias, kInfer };

struct AnalysisOptions {
    bool standardize = true;
    ConstantColumns constant_columns = ConstantColumns::kReject;

    std::optional<double> lambda;  // unset: chosen by cross-validation
    LambdaRule rule = LambdaRule::kMin;
    int n_lambdas = 100;
    double lambda_ratio = 0.01;
    int folds = 10;
    int cv_patience = 0;  // see CvOptions::patience
    std::uint64_t seed = 1;
    int threads = 1;
    SolverOptions solver;

    NodewiseTuning nodewise = NodewiseTuning::kCv;
    double lambda_j = 0.0;  // used with NodewiseTuning::kFixed
    int nodewise_n_lambdas = 20;
    double nodewise_ratio = 0.01;

    bool two_step = true;  // meat recomputed at the one-step estimate

    /// Covariates that get a debiased estimate (0-based); empty means all of them.
    std::vector<int> rows;
};

/// Everything produced by one pass of fit -> debias -> sandwich variance.
struct AnalysisResult {
    CompetingRisksData data;  // working (standardized) scale, horizon applied
    Standardization transform;
    RiskGrid grid;

    std::optional<CvResult> cv;
    PenalizedFit fit;

    std::vector<double> lambda_j;  // per covariate, NaN where no row was fitted
    ThetaHat theta;
    OneStepEstimate one_step;

    std::optional<InfluenceSet> influence_init;
    std::optional<InfluenceSet> influence_corrected;
    Vector se;            // per covariate, meat at the initial estimate; NaN where no row was fitted
    Vector se_corrected;  // per covariate, meat at the one-step estimate (the initial one off the rows)

    Stage stage = Stage::kFit;

    /**
     * Inference on c'beta. With `original_scale`, c and theta0 refer to the
     * unstandardized covariates (length = original p).
     */
    [[nodiscard]] ContrastInference contrast(const Vector& c, double alpha = 0.05, double theta0 = 0.0,
                                             bool original_scale = false) const;

    /// A contrast on the original columns mapped onto the retained working columns.
    [[nodiscard]] Vector working_contrast(const Vector& c) const;
};

AnalysisResult analyze(const CompetingRisksData& data, const AnalysisOptions& options = {},
                       Stage stop = Stage::kInfer);

/// Penalty for each requested nodewise row according to the tuning mode.
std::vector<double> nodewise_penalties(const XiMatrix& xi, const std::vector<int>& rows,
                                       const AnalysisOptions& options);

} // namespace fgray
