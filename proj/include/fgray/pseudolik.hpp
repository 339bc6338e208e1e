#pragma once

#include "fgray/censoring.hpp"
#include "fgray/data.hpp"

namespace fgray {

/**
 * Weighted risk-set moments on the cause-1 grid:
 *
 *   S0(t_k) = n^{-1} sum_i w_ik exp(beta'Z_i)
 *   S1(t_k) = n^{-1} sum_i w_ik exp(beta'Z_i) Z_i
 *   Zbar(t_k) = S1(t_k) / S0(t_k)
 *
 * `prob` holds the normalized risk-set probabilities w_ik exp(beta'Z_i) / (n S0(t_k)),
 * which is all the downstream kernels need.
 */
struct RiskAggregates {
    Vector s0;      // K
    Vector log_s0;  // K, finite even when s0 over/underflows
    Matrix s1;      // K x p
    Matrix zbar;    // K x p
    Matrix prob;    // n x K
};

/// Throws NumericError when a risk set sum is not finite after max-subtraction.
RiskAggregates aggregates(const CompetingRisksData& data, const RiskGrid& grid, const Vector& beta);

/// log(n S0(t_k, beta)) for every grid point; O(nK), no covariate moments.
Vector log_risk_sums(const RiskGrid& grid, const Vector& eta);

/// Log pseudo-likelihood m(beta), including the literal n S0 inside the log.
double loglik(const CompetingRisksData& data, const RiskGrid& grid, const Vector& beta);

/// Score: n^{-1} sum over cause-1 events of (Z_i - Zbar(t_k)).
Vector score(const CompetingRisksData& data, const RiskGrid& grid, const Vector& beta);
Vector score(const CompetingRisksData& data, const RiskGrid& grid, const RiskAggregates& agg);

inline constexpr int kDefaultHessianCap = 2000;

/// -Hessian of m: n^{-1} sum_events [S2/S0 - Zbar Zbar'](t_k). Refuses p > cap.
Matrix neg_hessian(const CompetingRisksData& data, const RiskGrid& grid, const Vector& beta,
                   int max_p = kDefaultHessianCap);

/// Per-subject score contributions Xi_i = sum_k dN_i(t_k) (Z_i - Zbar(t_k)).
struct XiMatrix {
    Matrix rows;  // n x p; zero rows for subjects without a cause-1 event

    [[nodiscard]] int n() const { return static_cast<int>(rows.rows()); }
    [[nodiscard]] int p() const { return static_cast<int>(rows.cols()); }
    /// Sample information n^{-1} sum_i Xi_i Xi_i'.
    [[nodiscard]] Matrix sigma_hat() const;
};

XiMatrix xi_matrix(const CompetingRisksData& data, const RiskGrid& grid, const Vector& beta);
XiMatrix xi_matrix(const CompetingRisksData& data, const RiskGrid& grid, const RiskAggregates& agg);

} // namespace fgray
