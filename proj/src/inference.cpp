#include "fgray/inference.hpp"
#include "fgray/error.hpp"
#include "fgray/normal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fgray {

Matrix InfluenceSet::meat() const
{
    const Matrix total = eta + psi;
    Matrix s = Matrix::Zero(p(), p());
    s.selfadjointView<Eigen::Lower>().rankUpdate(total.transpose());
    Matrix full = s.selfadjointView<Eigen::Lower>();
    return full / n();
}

double InfluenceSet::quadratic_form(const Vector& v) const
{
    const Vector proj = eta * v + psi * v;
    return proj.squaredNorm() / n();
}

Vector InfluenceSet::row_quadratic_forms(const ThetaHat& theta) const
{
    const Matrix proj = (eta + psi) * theta.rows.transpose();
    return proj.colwise().squaredNorm().transpose() / n();
}

InfluenceSet influence(const CompetingRisksData& data, const RiskGrid& grid, const Vector& beta)
{
    const auto agg = aggregates(data, grid, beta);
    const XiMatrix xi = xi_matrix(data, grid, agg);
    const int n = data.n();
    const int K = grid.size();
    const int C = static_cast<int>(grid.censor_times.size());
    const Matrix& z = data.covariates;

    // compensator mass u_ik = w_ik exp(eta_i) D_k / (n S0(t_k))
    Matrix u = agg.prob;
    for (int k = 0; k < K; ++k) u.col(k) *= grid.event_counts[k];
    const Vector u_total = u.rowwise().sum();

    InfluenceSet out;
    out.beta = beta;
    out.eta = xi.rows - u_total.asDiagonal() * z + u * agg.zbar;
    out.censor_times = grid.censor_times;
    out.pi_hat = grid.pi_hat;
    out.q_hat = Matrix::Zero(C, data.p());
    out.psi = Matrix::Zero(n, data.p());
    if (C == 0) return out;

    // suffix[i, k] = sum_{k' >= k} u_ik'
    Matrix suffix = Matrix::Zero(n, K + 1);
    for (int k = K - 1; k >= 0; --k) suffix.col(k) = suffix.col(k + 1) + u.col(k);

    // q(c) = -n^{-1} sum_{k: t_k > c} sum_{i: X_i < c} u_ik (Z_i - Zbar(t_k))
    Matrix a = Matrix::Zero(C, n);
    Matrix before = Matrix::Zero(C, n);
    std::vector<int> first_after(C);
    for (int m = 0; m < C; ++m) {
        const double c = grid.censor_times[m];
        first_after[m] = static_cast<int>(std::upper_bound(grid.event_times.begin(), grid.event_times.end(), c) -
                                          grid.event_times.begin());
        for (int i = 0; i < n; ++i) {
            if (data.times[i] < c) {
                before(m, i) = 1.0;
                a(m, i) = suffix(i, first_after[m]);
            }
        }
    }
    Matrix b = before * u;
    for (int m = 0; m < C; ++m) b.row(m).head(first_after[m]).setZero();
    out.q_hat = -(a * z - b * agg.zbar) / n;

    // dMc_i(c_m) = dNc_i(c_m) - I(X_i >= c_m) C_m / (n pi(c_m)), scaled by 1/pi(c_m)
    Matrix dmc = Matrix::Zero(n, C);
    for (int m = 0; m < C; ++m) {
        const double c = grid.censor_times[m];
        const double pi = grid.pi_hat[m];
        if (!(pi > 0.0)) {
            throw NumericError("censoring risk set is empty at t=" + format_double(c));
        }
        const double hazard = grid.censor_counts[m] / (n * pi);
        for (int i = 0; i < n; ++i) {
            double v = 0.0;
            if (data.status[i] == kCensored && data.times[i] == c) v += 1.0;
            if (data.times[i] >= c) v -= hazard;
            dmc(i, m) = v / pi;
        }
    }
    out.psi = dmc * out.q_hat;
    return out;
}

Vector row_standard_errors(const InfluenceSet& infl, const ThetaHat& theta)
{
    const Vector forms = infl.row_quadratic_forms(theta);
    Vector se(forms.size());
    for (Eigen::Index r = 0; r < forms.size(); ++r) {
        if (!(forms[r] > 0.0) || !std::isfinite(forms[r])) {
            throw NumericError("sandwich variance for covariate " + std::to_string(theta.row_index[r] + 1) +
                               " is not positive; the meat matrix is not PSD or Theta has a zero row");
        }
        se[r] = std::sqrt(forms[r] / infl.n());
    }
    return se;
}

Vector two_step_se(const CompetingRisksData& data, const RiskGrid& grid, const OneStepEstimate& est,
                   const ThetaHat& theta)
{
    if (!est.complete() || !est.b.allFinite()) {
        throw NumericError("two-step SE needs the one-step estimate for every coordinate");
    }
    return row_standard_errors(influence(data, grid, est.b), theta);
}

ContrastInference contrast_inference(const Vector& c, const OneStepEstimate& est, const ThetaHat& theta,
                                     const InfluenceSet& at_init, double alpha, double theta0,
                                     const InfluenceSet* corrected)
{
    if (!(alpha > 0.0 && alpha < 1.0)) throw NumericError("alpha must lie in (0, 1)");
    const double norm = c.lpNorm<1>();
    if (!(norm > 0.0) || !c.allFinite()) throw NumericError("contrast must be a finite nonzero vector");

    ContrastInference out;
    out.contrast = c / norm;
    out.alpha = alpha;
    out.null_value = theta0;

    double estimate = 0.0;
    for (Eigen::Index j = 0; j < out.contrast.size(); ++j) {
        if (out.contrast[j] != 0.0) estimate += out.contrast[j] * est.b[j];
    }
    if (!std::isfinite(estimate)) throw NumericError("one-step estimate is missing for a contrast coordinate");
    out.estimate = estimate;

    const Vector v = theta.transpose_times(out.contrast);
    const auto se_of = [&](const InfluenceSet& infl) {
        const double var = infl.quadratic_form(v);
        if (!(var > 0.0) || !std::isfinite(var)) {
            throw NumericError("sandwich variance of the contrast is not positive; the meat matrix is not PSD");
        }
        return std::sqrt(var / infl.n());
    };
    out.se = se_of(at_init);
    out.se_corrected = corrected ? se_of(*corrected) : out.se;

    const double q = normal_quantile(1.0 - alpha / 2.0);
    out.ci_lo = estimate - q * out.se_corrected;
    out.ci_hi = estimate + q * out.se_corrected;
    out.z = (estimate - theta0) / out.se;
    out.p_value = two_sided_p(out.z);
    return out;
}

} // namespace fgray
