#pragma once

#include <Eigen/Core>

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace fgray {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Event codes. Every cause other than the one of interest is folded into Cause2.
enum StatusCode : int { kCensored = 0, kCause1 = 1, kCause2 = 2 };

/**
 * Right-censored competing-risks sample with time-fixed covariates.
 *
 * Row i of `covariates` belongs to subject i. `horizon` is the study end t*;
 * nothing past it is used for estimation.
 */
struct CompetingRisksData {
    std::vector<double> times;
    std::vector<int> status;
    Matrix covariates;
    double horizon = 0.0;
    std::vector<std::string> ids;              // optional, empty or size n
    std::vector<std::string> covariate_names;  // optional, empty or size p

    [[nodiscard]] int n() const { return static_cast<int>(times.size()); }
    [[nodiscard]] int p() const { return static_cast<int>(covariates.cols()); }
    [[nodiscard]] int count(int code) const;
};

struct ValidationReport {
    std::vector<std::string> violations;
    [[nodiscard]] bool ok() const { return violations.empty(); }
    [[nodiscard]] std::string summary() const;
};

/// Checks codes, times, covariate finiteness and the presence of cause-1 events.
ValidationReport validate(const CompetingRisksData& data);

/// Throws DataError with the full report when validation fails.
void require_valid(const CompetingRisksData& data);

/// Administratively censors everything observed after t* and records t* as the horizon.
CompetingRisksData apply_horizon(CompetingRisksData data, double horizon);

/// Horizon defaults to the largest observed time.
double default_horizon(const CompetingRisksData& data);

/// Rows `rows` of `data`, horizon kept.
CompetingRisksData subset(const CompetingRisksData& data, std::span<const int> rows);

enum class ConstantColumns { kReject, kDrop };

struct Standardization {
    Vector means;                  // per retained column
    Vector scales;                 // sample SD, denominator n - 1
    std::vector<int> kept_columns; // original column index of each retained column
    std::vector<int> dropped_columns;
    bool applied = false;

    /// Standardized-scale coefficients to the original covariate scale.
    [[nodiscard]] Vector to_original_scale(const Vector& beta_std) const;
    /// Inverse of to_original_scale.
    [[nodiscard]] Vector to_standardized_scale(const Vector& beta_orig) const;
};

/// Centers every column and scales it to unit sample SD.
std::pair<CompetingRisksData, Standardization>
standardize(const CompetingRisksData& data, ConstantColumns policy = ConstantColumns::kReject);

/// Identity transform (used when standardization is switched off).
Standardization identity_standardization(int p);

struct CsvSchema {
    std::string time_col = "time";
    std::string status_col = "status";
    std::string id_col;             // empty: no id column
    std::optional<double> horizon;  // unset: max observed time
};

/// Parses a dataset; all non time/status/id columns are covariates, in file order.
CompetingRisksData load_csv(const std::string& path, const CsvSchema& schema = {});

/// Writes `time,status[,id],<covariates>` with shortest round-trip number formatting.
void save_csv(const CompetingRisksData& data, const std::string& path);

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double value);

} // namespace fgray
