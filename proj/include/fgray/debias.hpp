#pragma once

#include "fgray/pseudolik.hpp"
#include "fgray/solver.hpp"

#include <cstdint>
#include <vector>

namespace fgray {

/// One nodewise regression of column j of Xi on the remaining columns.
struct NodewiseFit {
    int row = 0;
    Vector gamma;          // length p - 1, columns of Xi with j removed
    double tau_sq = 0.0;   // Gamma_j(gamma) + lambda_j ||gamma||_1
    double lambda = 0.0;
    double kkt_residual = 0.0;
    bool converged = false;
};

/**
 * gamma_j = argmin n^{-1} sum_i (Xi_ij - Xi_{i,-j}' gamma)^2 + 2 lambda_j ||gamma||_1.
 *
 * Throws NumericError when tau_j^2 < 1e-12 (column j is explained exactly).
 */
NodewiseFit nodewise(const XiMatrix& xi, int j, double lambda_j);

/// Same regression given the precomputed sample information matrix.
NodewiseFit nodewise(const Matrix& sigma_hat, int j, double lambda_j);

struct ThetaRowDiagnostics {
    int row = 0;
    double lambda = 0.0;
    double tau_sq = 0.0;
    double kkt_residual = 0.0;
    double diag = 0.0;         // (Theta Sigma)_jj
    double max_offdiag = 0.0;  // max_{k != j} |(Theta Sigma)_jk|
    int nonzeros = 0;          // nonzero entries of gamma_j
};

/**
 * Approximate inverse of the sample information matrix, one row per nodewise fit.
 *
 * Only the rows listed in `row_index` are present; the full matrix has every row.
 */
struct ThetaHat {
    Matrix rows;                 // r x p
    std::vector<int> row_index;  // covariate index of each stored row
    std::vector<ThetaRowDiagnostics> diagnostics;

    [[nodiscard]] int p() const { return static_cast<int>(rows.cols()); }
    [[nodiscard]] bool full() const { return static_cast<int>(row_index.size()) == p(); }
    /// Position of covariate j among the stored rows, or -1.
    [[nodiscard]] int position(int j) const;
    /// Theta' c; throws if c has support outside the stored rows.
    [[nodiscard]] Vector transpose_times(const Vector& c) const;

    static ThetaHat from_matrix(const Matrix& theta);
};

/// Row j of Theta from a nodewise fit: (-gamma_{<j}, 1, -gamma_{>=j}) / tau_j^2.
Vector theta_row(const NodewiseFit& fit, int p);

/**
 * Assembles the requested rows (all rows when `rows` is empty) with per-row
 * penalties `lambdas` (same length as the row list). Verifies diag(Theta Sigma) = 1
 * and the nodewise KKT certificate, throwing NumericError on a violation above 1e-6.
 */
ThetaHat theta_hat(const XiMatrix& xi, const std::vector<double>& lambdas, std::vector<int> rows = {},
                   int threads = 1);

struct NodewiseCvOptions {
    int folds = 10;
    int n_lambdas = 20;
    double ratio = 0.01;
    std::uint64_t seed = 1;
    int threads = 1;
    int patience = 5;  // per-row paths stop after this many grid values without improvement; 0 runs the whole grid
};

struct NodewiseCvRow {
    int row = 0;
    std::vector<double> lambda_grid;  // the grid values actually fitted
    std::vector<double> cv_mean;      // held-out squared error / n
    int index_min = 0;
    double lambda_min = 0.0;
};

/// Per-row K-fold CV of the nodewise penalty for each row in `rows`.
std::vector<NodewiseCvRow> cv_nodewise_lambdas(const XiMatrix& xi, const std::vector<int>& rows,
                                               const NodewiseCvOptions& options = {});

/// One shared penalty chosen by pooled CV over a deterministic sample of at most `sample_rows` rows.
double cv_shared_nodewise_lambda(const XiMatrix& xi, const NodewiseCvOptions& options = {}, int sample_rows = 25);

/// b = beta_init + Theta score(beta_init), for the rows Theta has.
struct OneStepEstimate {
    Vector b;  // length p; NaN for rows Theta does not have
    Vector beta_init;
    Vector score_at_init;
    std::vector<int> rows;

    [[nodiscard]] bool complete() const { return static_cast<int>(rows.size()) == b.size(); }
};

OneStepEstimate one_step(const Vector& beta_init, const ThetaHat& theta, const Vector& score_vec);

} // namespace fgray
