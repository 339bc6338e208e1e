#pragma once

#include "fgray/data.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace fgray {

/// Right-continuous, non-increasing step function starting at 1.
struct StepSurvival {
    std::vector<double> jump_times;  // strictly increasing
    std::vector<double> values;      // value from jump_times[k] up to the next jump

    /// Value at the last jump time <= t (1 before the first jump).
    [[nodiscard]] double operator()(double t) const;
};

/**
 * Kaplan-Meier estimate of the censoring survival G(t) = P(C >= t).
 *
 * Censorings (status 0) are the events of this curve. The risk set at u is
 * {i : X_i >= u}, so subjects failing at u stay in it (events before censorings).
 */
StepSurvival km_censoring(const CompetingRisksData& data);

using FlagMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

/**
 * Cause-1 event-time grid with the IPCW at-risk weights.
 *
 * weights(i, k) = omega_i(t_k) Y_i(t_k):
 *   1                      if t_k <= X_i
 *   G(t_k) / G(X_i)        if t_k >  X_i and subject i failed from cause 2
 *   0                      otherwise
 */
struct RiskGrid {
    std::vector<double> event_times;  // distinct cause-1 times <= horizon
    std::vector<int> event_counts;    // number of cause-1 events at each grid time
    std::vector<int> event_index;     // per subject: grid index of its cause-1 event, or -1
    Matrix weights;                   // n x K
    FlagMatrix at_risk;               // n x K, r_i Y_i before weighting
    std::vector<double> censor_times; // distinct observed censoring times
    std::vector<int> censor_counts;
    std::vector<double> pi_hat;       // n^{-1} #{X_i >= c} at each censoring time

    [[nodiscard]] int n() const { return static_cast<int>(weights.rows()); }
    [[nodiscard]] int size() const { return static_cast<int>(event_times.size()); }
    [[nodiscard]] int total_events() const;
};

/// Throws DataError when a cause-2 subject needs a weight but G(X_i) = 0.
RiskGrid build_risk_grid(const CompetingRisksData& data, const StepSurvival& g_hat);

/// km_censoring followed by build_risk_grid.
RiskGrid make_risk_grid(const CompetingRisksData& data);

/// Weight matrix as CSV (one row per subject, one column per grid time).
void dump_weights_csv(const RiskGrid& grid, const std::string& path);

} // namespace fgray
