#include "fgray/pseudolik.hpp"
#include "fgray/error.hpp"

#include <cmath>
#include <limits>

namespace fgray {

namespace {

void check_beta(const CompetingRisksData& data, const Vector& beta)
{
    if (beta.size() != data.p()) {
        throw NumericError("beta has length " + std::to_string(beta.size()) + ", expected " +
                           std::to_string(data.p()));
    }
    if (!beta.allFinite()) throw NumericError("beta contains non-finite entries");
}

} // namespace

RiskAggregates aggregates(const CompetingRisksData& data, const RiskGrid& grid, const Vector& beta)
{
    check_beta(data, beta);
    const int n = data.n();
    const int K = grid.size();
    const Vector eta = data.covariates * beta;

    RiskAggregates agg;
    agg.s0.resize(K);
    agg.log_s0.resize(K);
    agg.prob = Matrix::Zero(n, K);
    const double log_n = std::log(static_cast<double>(n));

    for (int k = 0; k < K; ++k) {
        const auto w = grid.weights.col(k);
        double shift = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i) {
            if (w[i] > 0.0 && eta[i] > shift) shift = eta[i];
        }
        double sum = 0.0;
        auto col = agg.prob.col(k);
        for (int i = 0; i < n; ++i) {
            if (w[i] > 0.0) {
                col[i] = w[i] * std::exp(eta[i] - shift);
                sum += col[i];
            }
        }
        if (!(sum > 0.0) || !std::isfinite(sum) || !std::isfinite(shift)) {
            throw NumericError("risk set sum at grid index " + std::to_string(k) + " (t=" +
                               format_double(grid.event_times[k]) + ") is not positive and finite");
        }
        col /= sum;
        agg.log_s0[k] = shift + std::log(sum) - log_n;
        agg.s0[k] = std::exp(agg.log_s0[k]);
    }

    agg.zbar = agg.prob.transpose() * data.covariates;
    agg.s1 = agg.s0.asDiagonal() * agg.zbar;
    return agg;
}

Vector log_risk_sums(const RiskGrid& grid, const Vector& eta)
{
    const int n = grid.n();
    const int K = grid.size();
    Vector out(K);
    for (int k = 0; k < K; ++k) {
        const auto w = grid.weights.col(k);
        double shift = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i) {
            if (w[i] > 0.0 && eta[i] > shift) shift = eta[i];
        }
        double sum = 0.0;
        for (int i = 0; i < n; ++i) {
            if (w[i] > 0.0) sum += w[i] * std::exp(eta[i] - shift);
        }
        if (!(sum > 0.0) || !std::isfinite(sum) || !std::isfinite(shift)) {
            throw NumericError("risk set sum at grid index " + std::to_string(k) + " is not positive and finite");
        }
        out[k] = shift + std::log(sum);
    }
    return out;
}

double loglik(const CompetingRisksData& data, const RiskGrid& grid, const Vector& beta)
{
    check_beta(data, beta);
    const Vector eta = data.covariates * beta;
    const Vector log_r = log_risk_sums(grid, eta);
    double total = 0.0;
    for (int k = 0; k < grid.size(); ++k) {
        double events = 0.0;
        for (int i = 0; i < data.n(); ++i) {
            if (grid.event_index[i] == k) events += eta[i];
        }
        total += events - grid.event_counts[k] * log_r[k];
    }
    return total / data.n();
}

Vector score(const CompetingRisksData& data, const RiskGrid& grid, const RiskAggregates& agg)
{
    Vector out = Vector::Zero(data.p());
    for (int i = 0; i < data.n(); ++i) {
        const int k = grid.event_index[i];
        if (k >= 0) out += (data.covariates.row(i) - agg.zbar.row(k)).transpose();
    }
    return out / data.n();
}

Vector score(const CompetingRisksData& data, const RiskGrid& grid, const Vector& beta)
{
    return score(data, grid, aggregates(data, grid, beta));
}

Matrix neg_hessian(const CompetingRisksData& data, const RiskGrid& grid, const Vector& beta, int max_p)
{
    if (data.p() > max_p) {
        throw NumericError("neg_hessian: p = " + std::to_string(data.p()) + " exceeds the cap of " +
                           std::to_string(max_p));
    }
    const auto agg = aggregates(data, grid, beta);
    const int p = data.p();

    // sum_k D_k S2(t_k)/S0(t_k) = Z' diag(sum_k D_k prob_ik) Z
    Vector mass = Vector::Zero(data.n());
    for (int k = 0; k < grid.size(); ++k) mass += grid.event_counts[k] * agg.prob.col(k);

    Matrix h = Matrix::Zero(p, p);
    h.selfadjointView<Eigen::Lower>().rankUpdate(data.covariates.transpose() * mass.cwiseSqrt().asDiagonal());
    for (int k = 0; k < grid.size(); ++k) {
        h.selfadjointView<Eigen::Lower>().rankUpdate(agg.zbar.row(k).transpose(),
                                                     -static_cast<double>(grid.event_counts[k]));
    }
    Matrix full = h.selfadjointView<Eigen::Lower>();
    return full / data.n();
}

Matrix XiMatrix::sigma_hat() const
{
    Matrix s = Matrix::Zero(p(), p());
    s.selfadjointView<Eigen::Lower>().rankUpdate(rows.transpose());
    Matrix full = s.selfadjointView<Eigen::Lower>();
    return full / n();
}

XiMatrix xi_matrix(const CompetingRisksData& data, const RiskGrid& grid, const RiskAggregates& agg)
{
    XiMatrix xi;
    xi.rows = Matrix::Zero(data.n(), data.p());
    for (int i = 0; i < data.n(); ++i) {
        const int k = grid.event_index[i];
        if (k >= 0) xi.rows.row(i) = data.covariates.row(i) - agg.zbar.row(k);
    }
    return xi;
}

XiMatrix xi_matrix(const CompetingRisksData& data, const RiskGrid& grid, const Vector& beta)
{
    return xi_matrix(data, grid, aggregates(data, grid, beta));
}

} // namespace fgray
