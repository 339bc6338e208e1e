#pragma once

#include "fgray/debias.hpp"
#include "fgray/pseudolik.hpp"

#include <vector>

namespace fgray {

/**
 * Influence decomposition of the score at a given beta.
 *
 *   eta_i = sum_k (Z_i - Zbar(t_k)) dM1_i(t_k)
 *   psi_i = sum_m q(c_m) / pi(c_m) dMc_i(c_m)
 *
 * with dM1 the cause-1 martingale residuals on the event grid and dMc the
 * censoring martingale residuals at the distinct censoring times c_m.
 */
struct InfluenceSet {
    Matrix eta;                        // n x p
    Matrix psi;                        // n x p
    Matrix q_hat;                      // C x p
    std::vector<double> pi_hat;        // C
    std::vector<double> censor_times;  // C
    Vector beta;                       // evaluation point

    [[nodiscard]] int n() const { return static_cast<int>(eta.rows()); }
    [[nodiscard]] int p() const { return static_cast<int>(eta.cols()); }
    /// n^{-1} sum_i (eta_i + psi_i)^{(x)2}, p x p.
    [[nodiscard]] Matrix meat() const;
    /// v' meat v without forming the p x p matrix.
    [[nodiscard]] double quadratic_form(const Vector& v) const;
    /// theta_r' meat theta_r for every stored row of theta.
    [[nodiscard]] Vector row_quadratic_forms(const ThetaHat& theta) const;
};

InfluenceSet influence(const CompetingRisksData& data, const RiskGrid& grid, const Vector& beta);

struct ContrastInference {
    Vector contrast;  // normalized to unit L1 norm
    double estimate = 0.0;
    double se = 0.0;            // meat evaluated at the initial estimate
    double se_corrected = 0.0;  // meat evaluated at the one-step estimate
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    double z = 0.0;  // Wald statistic with the uncorrected SE
    double p_value = 1.0;
    double alpha = 0.05;
    double null_value = 0.0;
};

/**
 * Inference on c'beta. The interval uses `corrected` when given (otherwise
 * `at_init`), the Wald statistic always uses `at_init`.
 */
ContrastInference contrast_inference(const Vector& c, const OneStepEstimate& est, const ThetaHat& theta,
                                     const InfluenceSet& at_init, double alpha = 0.05, double theta0 = 0.0,
                                     const InfluenceSet* corrected = nullptr);

/// SE of every stored row of theta with the meat recomputed at the one-step estimate.
Vector two_step_se(const CompetingRisksData& data, const RiskGrid& grid, const OneStepEstimate& est,
                   const ThetaHat& theta);

/// sqrt(theta_r' meat theta_r / n) per stored row.
Vector row_standard_errors(const InfluenceSet& infl, const ThetaHat& theta);

} // namespace fgray
