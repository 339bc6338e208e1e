#include "fgray/analysis.hpp"
#include "fgray/error.hpp"

#include <cmath>
#include <limits>
#include <numeric>

namespace fgray {

std::vector<double> nodewise_penalties(const XiMatrix& xi, const std::vector<int>& rows,
                                       const AnalysisOptions& options)
{
    const auto r = rows.size();
    NodewiseCvOptions cv;
    cv.folds = options.folds;
    cv.n_lambdas = options.nodewise_n_lambdas;
    cv.ratio = options.nodewise_ratio;
    cv.seed = options.seed;
    cv.threads = options.threads;

    switch (options.nodewise) {
    case NodewiseTuning::kFixed:
        if (!(options.lambda_j >= 0.0)) throw NumericError("lambda_j must be nonnegative");
        return std::vector<double>(r, options.lambda_j);
    case NodewiseTuning::kShared:
        return std::vector<double>(r, cv_shared_nodewise_lambda(xi, cv));
    case NodewiseTuning::kCv:
        break;
    }
    const auto fits = cv_nodewise_lambdas(xi, rows, cv);
    std::vector<double> out(r);
    for (std::size_t k = 0; k < r; ++k) out[k] = fits[k].lambda_min;
    return out;
}

AnalysisResult analyze(const CompetingRisksData& input, const AnalysisOptions& options, Stage stop)
{
    require_valid(input);
    AnalysisResult res;
    if (options.standardize) {
        std::tie(res.data, res.transform) = standardize(input, options.constant_columns);
    } else {
        res.data = input;
        res.transform = identity_standardization(input.p());
    }
    res.grid = make_risk_grid(res.data);

    double lambda = 0.0;
    if (options.lambda) {
        lambda = *options.lambda;
        if (!(lambda >= 0.0)) throw NumericError("lambda must be nonnegative");
    } else {
        CvOptions cv_opts;
        cv_opts.folds = options.folds;
        cv_opts.seed = options.seed;
        cv_opts.threads = options.threads;
        cv_opts.solver = options.solver;
        cv_opts.patience = options.cv_patience;
        const auto grid = lambda_path(res.data, res.grid, options.n_lambdas, options.lambda_ratio);
        res.cv = cross_validate(res.data, grid, cv_opts);
        lambda = options.rule == LambdaRule::kMin ? res.cv->lambda_min : res.cv->lambda_1se;
    }

    const FineGrayLoss loss(res.data, res.grid);
    if (res.cv) {
        // refit along the grid down to the chosen value for a warm start
        Vector start = Vector::Zero(res.data.p());
        const int target = options.rule == LambdaRule::kMin ? res.cv->index_min : res.cv->index_1se;
        for (int l = 0; l <= target; ++l) {
            res.fit = fit_fine_gray_lasso(loss, res.cv->lambda_grid[l], start, options.solver);
            start = res.fit.beta;
        }
    } else {
        res.fit = fit_fine_gray_lasso(loss, lambda, Vector::Zero(res.data.p()), options.solver);
    }
    res.stage = Stage::kFit;
    if (stop == Stage::kFit) return res;

    const auto agg = aggregates(res.data, res.grid, res.fit.beta);
    const XiMatrix xi = xi_matrix(res.data, res.grid, agg);
    const int p = res.data.p();
    std::vector<int> rows = options.rows;
    if (rows.empty()) {
        rows.resize(p);
        std::iota(rows.begin(), rows.end(), 0);
    }
    for (int j : rows) {
        if (j < 0 || j >= p) throw DataError("requested row " + std::to_string(j + 1) + " is out of range");
    }
    const auto penalties = nodewise_penalties(xi, rows, options);
    res.lambda_j.assign(p, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t r = 0; r < rows.size(); ++r) res.lambda_j[rows[r]] = penalties[r];
    res.theta = theta_hat(xi, penalties, rows, options.threads);
    res.one_step = one_step(res.fit.beta, res.theta, score(res.data, res.grid, agg));
    res.stage = Stage::kDebias;
    if (stop == Stage::kDebias) return res;

    const auto spread = [&](const Vector& per_row) {
        Vector out = Vector::Constant(p, std::numeric_limits<double>::quiet_NaN());
        for (std::size_t r = 0; r < rows.size(); ++r) out[rows[r]] = per_row[static_cast<Eigen::Index>(r)];
        return out;
    };
    res.influence_init = influence(res.data, res.grid, res.fit.beta);
    res.se = spread(row_standard_errors(*res.influence_init, res.theta));
    if (options.two_step) {
        Vector at = res.fit.beta;
        for (int j : rows) at[j] = res.one_step.b[j];
        res.influence_corrected = influence(res.data, res.grid, at);
        res.se_corrected = spread(row_standard_errors(*res.influence_corrected, res.theta));
    } else {
        res.se_corrected = res.se;
    }
    res.stage = Stage::kInfer;
    return res;
}

Vector AnalysisResult::working_contrast(const Vector& c) const
{
    const auto& kept = transform.kept_columns;
    const auto original_p = static_cast<Eigen::Index>(kept.size() + transform.dropped_columns.size());
    if (c.size() != original_p) {
        throw DataError("contrast has length " + std::to_string(c.size()) + ", expected " +
                        std::to_string(original_p));
    }
    for (int j : transform.dropped_columns) {
        if (c[j] != 0.0) throw DataError("contrast uses dropped constant column " + std::to_string(j + 1));
    }
    Vector out(static_cast<Eigen::Index>(kept.size()));
    for (std::size_t r = 0; r < kept.size(); ++r) out[static_cast<Eigen::Index>(r)] = c[kept[r]];
    return out;
}

ContrastInference AnalysisResult::contrast(const Vector& c, double alpha, double theta0, bool original_scale) const
{
    if (stage != Stage::kInfer || !influence_init) throw NumericError("analysis has not reached the inference stage");
    const Vector cw = working_contrast(c);
    const InfluenceSet* corrected = influence_corrected ? &*influence_corrected : nullptr;
    if (!original_scale) return contrast_inference(cw, one_step, theta, *influence_init, alpha, theta0, corrected);

    // beta_orig_j = beta_std_j / scale_j, so c'beta_orig = (c ./ scale)'beta_std
    const Vector scaled = cw.cwiseQuotient(transform.scales);
    const double norm_c = cw.lpNorm<1>();
    const double norm_s = scaled.lpNorm<1>();
    if (!(norm_c > 0.0)) throw NumericError("contrast must be a finite nonzero vector");
    const double factor = norm_s / norm_c;
    auto out = contrast_inference(scaled, one_step, theta, *influence_init, alpha, theta0 / factor, corrected);
    out.contrast = c / c.lpNorm<1>();
    out.estimate *= factor;
    out.se *= factor;
    out.se_corrected *= factor;
    out.ci_lo *= factor;
    out.ci_hi *= factor;
    out.null_value = theta0;
    return out;
}

} // namespace fgray
