#pragma once

#include "fgray/censoring.hpp"
#include "fgray/data.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace fgray {

struct SolverOptions {
    int max_outer = 100;
    int max_inner = 100000;  // coordinate-descent passes per outer iteration
    double rel_tol = 1e-7;   // relative objective change between outer iterations
    double inner_tol = 1e-9; // largest coordinate change ending an inner solve
    double kkt_tol = 1e-7;   // stationarity target of the outer loop
};

/// Result of an L1-penalized fit (Fine-Gray LASSO or a least-squares LASSO).
struct PenalizedFit {
    Vector beta;
    double lambda = 0.0;
    double objective = 0.0;
    int iterations = 0;
    bool converged = false;
    double kkt_residual = 0.0;
    bool monotone = true;  // objective never increased between outer iterations
    std::string message;
};

/// Largest violation of the L1 stationarity conditions given the smooth-part gradient.
double kkt_residual(const Vector& gradient, const Vector& beta, double lambda);

/**
 * -m(beta) as a function of the linear predictor eta = Z beta.
 *
 * Holds the IPCW weights (and their squares) so that value, gradient and
 * diagonal Hessian cost O(nK) each.
 */
class FineGrayLoss {
public:
    FineGrayLoss(const CompetingRisksData& data, const RiskGrid& grid);

    [[nodiscard]] double value(const Vector& eta) const;
    /// Gradient and diagonal of the Hessian of -m with respect to eta.
    void derivatives(const Vector& eta, Vector& grad, Vector& hess_diag) const;
    /**
     * Gradient with respect to eta and the normalized risk-set probabilities
     * P (n x K) defining the eta-Hessian H = n^{-1} sum_k D_k (diag(P_k) - P_k P_k').
     */
    void newton_terms(const Vector& eta, Vector& grad, Matrix& prob) const;
    /// H x for probabilities from newton_terms.
    [[nodiscard]] Vector hessian_times(const Matrix& prob, const Vector& x) const;
    /// Infimum of the loss over eta (every event dominating its risk set).
    [[nodiscard]] double saturated_value() const;

    [[nodiscard]] const Matrix& covariates() const { return *z_; }
    [[nodiscard]] int n() const { return static_cast<int>(z_->rows()); }
    [[nodiscard]] int p() const { return static_cast<int>(z_->cols()); }

private:
    /// exp(eta - shift) and the per-grid risk sums; false if they are unusable.
    bool shifted_sums(const Vector& eta, Vector& rel, Vector& sums, double& shift) const;

    const Matrix* z_;
    const RiskGrid* grid_;
    Matrix w2_;
    Vector is_event_;     // 1 for subjects with a cause-1 event on the grid
    Vector grid_events_;  // D_k
};

/// Minimizes -m(beta) + lambda ||beta||_1 by proximal Newton with coordinate descent on the exact quadratic model.
PenalizedFit fit_fine_gray_lasso(const CompetingRisksData& data, const RiskGrid& grid, double lambda,
                                 const Vector* warm_start = nullptr, const SolverOptions& options = {});

PenalizedFit fit_fine_gray_lasso(const FineGrayLoss& loss, double lambda, const Vector& start,
                                 const SolverOptions& options = {});

/// Share of the null deviance explained: (m(beta) - m(0)) / (m_sat - m(0)).
double deviance_ratio(const FineGrayLoss& loss, const Vector& eta);

struct PathStop {
    bool enabled = false;
    double max_ratio = 0.999;     // stop once the deviance ratio exceeds this
    double min_gain = 1e-5;       // or once it improves by less than this fraction
};

/**
 * Warm-started fits along a descending lambda grid. With `stop.enabled` the
 * path ends early when the model saturates; the returned vector is then shorter.
 */
std::vector<PenalizedFit> fit_fine_gray_path(const FineGrayLoss& loss, const std::vector<double>& lambdas,
                                             const SolverOptions& options = {}, const PathStop& stop = {});

/// ||score(0)||_inf: the smallest lambda with an all-zero solution.
double lambda_max(const CompetingRisksData& data, const RiskGrid& grid);

/// Log-spaced descending grid from `max_value` down to ratio * max_value.
std::vector<double> log_spaced_grid(double max_value, int count, double ratio);

std::vector<double> lambda_path(const CompetingRisksData& data, const RiskGrid& grid, int n_lambdas = 100,
                                double ratio = 0.01);

struct LinearLassoOptions {
    int max_passes = 100000;
    double tol = 1e-11;  // KKT residual target
};

/**
 * Covariance-update coordinate descent for
 *
 *     gamma' A gamma - 2 b' gamma + c + 2 lambda ||gamma||_1,
 *
 * i.e. n^{-1} ||y - X gamma||^2 + 2 lambda ||gamma||_1 with A = X'X/n, b = X'y/n, c = y'y/n.
 * Coordinate `excluded` (if >= 0) is held at zero. `gamma` is the warm start on entry.
 */
PenalizedFit lasso_gram(const Matrix& A, const Eigen::Ref<const Vector>& b, double c, double lambda, Vector gamma,
                        int excluded = -1, const LinearLassoOptions& options = {});

/// n^{-1} ||y - X gamma||^2 + 2 lambda ||gamma||_1.
PenalizedFit fit_linear_lasso(const Matrix& X, const Vector& y, double lambda,
                              const LinearLassoOptions& options = {});

/// Seeded shuffle of 0..n-1 dealt round-robin into `folds` folds.
std::vector<int> assign_folds(int n, int folds, std::uint64_t seed);

struct CvOptions {
    int folds = 10;
    std::uint64_t seed = 1;
    int threads = 1;
    SolverOptions solver;
    int patience = 0;  // > 0: stop the grid after this many values without a lower CV loss
};

struct CvResult {
    std::vector<double> lambda_grid;  // descending; only the values fitted before an early stop
    std::vector<double> cv_mean;      // per-event partial-likelihood deviance
    std::vector<double> cv_se;
    double lambda_min = 0.0;
    double lambda_1se = 0.0;
    int index_min = 0;
    int index_1se = 0;
    int folds = 0;
    std::vector<int> fold_of;  // fold of each subject

    /// True when lambda_min is neither the first nor the last grid value.
    [[nodiscard]] bool interior_min() const;
};

/**
 * K-fold cross-validated pseudo-likelihood deviance.
 *
 * IPCW weights are rebuilt from the training part only. Fold f contributes
 * -2 [L_full(beta_f) - L_train(beta_f)] with L the unscaled log pseudo-likelihood.
 */
CvResult cross_validate(const CompetingRisksData& data, const std::vector<double>& lambda_grid,
                        const CvOptions& options = {});

/// Smallest mean loss; ties go to the earlier (larger) lambda.
int argmin_prefer_first(const std::vector<double>& values);

} // namespace fgray
