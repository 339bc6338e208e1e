#include "fgray/debias.hpp"
#include "fgray/error.hpp"
#include "fgray/parallel.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace fgray {

namespace {

constexpr double kTauFloor = 1e-12;
constexpr double kKktBound = 1e-6;

NodewiseFit finish_nodewise(const PenalizedFit& fit, int j, double lambda)
{
    const int p = static_cast<int>(fit.beta.size());
    NodewiseFit out;
    out.row = j;
    out.lambda = lambda;
    out.kkt_residual = fit.kkt_residual;
    out.converged = fit.converged;
    out.gamma.resize(p - 1);
    for (int k = 0, m = 0; k < p; ++k) {
        if (k != j) out.gamma[m++] = fit.beta[k];
    }
    // objective = Gamma_j + 2 lambda |gamma|_1
    out.tau_sq = fit.objective - lambda * out.gamma.lpNorm<1>();
    if (!(out.tau_sq >= kTauFloor)) {
        throw NumericError("nodewise regression for covariate " + std::to_string(j + 1) +
                           " is degenerate (tau^2 = " + std::to_string(out.tau_sq) + ")");
    }
    return out;
}

Matrix event_rows(const XiMatrix& xi)
{
    std::vector<int> keep;
    for (int i = 0; i < xi.n(); ++i) {
        if (xi.rows.row(i).squaredNorm() > 0.0) keep.push_back(i);
    }
    Matrix out(static_cast<Eigen::Index>(keep.size()), xi.p());
    for (std::size_t r = 0; r < keep.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = xi.rows.row(keep[r]);
    return out;
}

struct FoldGrams {
    std::vector<Matrix> gram;  // training second moment per fold
    std::vector<Matrix> test;  // held-out event rows per fold
};

FoldGrams fold_grams(const XiMatrix& xi, int folds, std::uint64_t seed)
{
    const int n = xi.n();
    const int p = xi.p();
    const auto fold_of = assign_folds(n, folds, seed);
    FoldGrams out;
    for (int f = 0; f < folds; ++f) {
        std::vector<int> train_idx;
        std::vector<int> test_idx;
        int n_train = 0;
        for (int i = 0; i < n; ++i) {
            const bool nonzero = xi.rows.row(i).squaredNorm() > 0.0;
            if (fold_of[i] == f) {
                if (nonzero) test_idx.push_back(i);
            } else {
                ++n_train;
                if (nonzero) train_idx.push_back(i);
            }
        }
        Matrix train(static_cast<Eigen::Index>(train_idx.size()), p);
        for (std::size_t r = 0; r < train_idx.size(); ++r) train.row(static_cast<Eigen::Index>(r)) = xi.rows.row(train_idx[r]);
        Matrix test(static_cast<Eigen::Index>(test_idx.size()), p);
        for (std::size_t r = 0; r < test_idx.size(); ++r) test.row(static_cast<Eigen::Index>(r)) = xi.rows.row(test_idx[r]);

        Matrix gram = Matrix::Zero(p, p);
        gram.selfadjointView<Eigen::Lower>().rankUpdate(train.transpose(), 1.0 / n_train);
        gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();
        out.gram.push_back(std::move(gram));
        out.test.push_back(std::move(test));
    }
    return out;
}

/**
 * Held-out squared error of row j summed over folds, one entry per grid value.
 * With patience > 0 the path stops once the error has not improved for that many
 * consecutive grid values; the result is then shorter than the grid.
 */
std::vector<double> nodewise_cv_sse(const FoldGrams& folds, int j, const std::vector<double>& grid, int patience)
{
    const auto p = folds.gram.front().cols();
    std::vector<Vector> gamma(folds.gram.size(), Vector::Zero(p));
    std::vector<double> sse;
    std::size_t best = 0;
    for (std::size_t l = 0; l < grid.size(); ++l) {
        double total = 0.0;
        for (std::size_t f = 0; f < folds.gram.size(); ++f) {
            const Matrix& gram = folds.gram[f];
            const Matrix& test = folds.test[f];
            gamma[f] = lasso_gram(gram, gram.col(j), gram(j, j), grid[l], gamma[f], j).beta;
            Vector resid = test.col(j);
            for (Eigen::Index k = 0; k < p; ++k) {
                if (gamma[f][k] != 0.0) resid.noalias() -= gamma[f][k] * test.col(k);
            }
            total += resid.squaredNorm();
        }
        sse.push_back(total);
        if (total < sse[best]) best = l;
        if (patience > 0 && l - best >= static_cast<std::size_t>(patience)) break;
    }
    return sse;
}

} // namespace

NodewiseFit nodewise(const Matrix& sigma_hat, int j, double lambda_j)
{
    const int p = static_cast<int>(sigma_hat.cols());
    if (j < 0 || j >= p) throw NumericError("nodewise: row index out of range");
    if (!(lambda_j >= 0.0)) throw NumericError("nodewise: lambda_j must be nonnegative");
    const auto fit = lasso_gram(sigma_hat, sigma_hat.col(j), sigma_hat(j, j), lambda_j, Vector::Zero(p), j);
    return finish_nodewise(fit, j, lambda_j);
}

NodewiseFit nodewise(const XiMatrix& xi, int j, double lambda_j)
{
    return nodewise(xi.sigma_hat(), j, lambda_j);
}

Vector theta_row(const NodewiseFit& fit, int p)
{
    Vector row(p);
    const double inv_tau = 1.0 / fit.tau_sq;
    const int j = fit.row;
    for (int k = 0; k < p; ++k) {
        if (k < j) {
            row[k] = -fit.gamma[k] * inv_tau;
        } else if (k == j) {
            row[k] = inv_tau;
        } else {
            row[k] = -fit.gamma[k - 1] * inv_tau;
        }
    }
    return row;
}

int ThetaHat::position(int j) const
{
    for (std::size_t r = 0; r < row_index.size(); ++r) {
        if (row_index[r] == j) return static_cast<int>(r);
    }
    return -1;
}

Vector ThetaHat::transpose_times(const Vector& c) const
{
    if (c.size() != p()) throw NumericError("contrast length does not match p");
    Vector out = Vector::Zero(p());
    for (int j = 0; j < p(); ++j) {
        if (c[j] == 0.0) continue;
        const int r = position(j);
        if (r < 0) throw NumericError("Theta row " + std::to_string(j + 1) + " was not computed");
        out += c[j] * rows.row(r).transpose();
    }
    return out;
}

ThetaHat ThetaHat::from_matrix(const Matrix& theta)
{
    ThetaHat out;
    out.rows = theta;
    out.row_index.resize(theta.rows());
    std::iota(out.row_index.begin(), out.row_index.end(), 0);
    return out;
}

ThetaHat theta_hat(const XiMatrix& xi, const std::vector<double>& lambdas, std::vector<int> rows, int threads)
{
    const int p = xi.p();
    if (rows.empty()) {
        rows.resize(p);
        std::iota(rows.begin(), rows.end(), 0);
    }
    if (lambdas.size() != rows.size()) throw NumericError("theta_hat: one lambda per row is required");

    const Matrix sigma = xi.sigma_hat();
    ThetaHat theta;
    theta.row_index = rows;
    theta.rows = Matrix::Zero(static_cast<Eigen::Index>(rows.size()), p);
    theta.diagnostics.resize(rows.size());

    parallel_for(static_cast<int>(rows.size()), threads, [&](int r) {
        const int j = rows[r];
        const auto fit = nodewise(sigma, j, lambdas[r]);
        const Vector row = theta_row(fit, p);
        theta.rows.row(r) = row.transpose();

        auto& d = theta.diagnostics[r];
        d.row = j;
        d.lambda = fit.lambda;
        d.tau_sq = fit.tau_sq;
        d.kkt_residual = fit.kkt_residual;
        d.nonzeros = static_cast<int>((fit.gamma.array() != 0.0).count());
        const Vector prod = sigma * row;  // (Theta Sigma)_{j.}, Sigma symmetric
        d.diag = prod[j];
        for (int k = 0; k < p; ++k) {
            if (k != j) d.max_offdiag = std::max(d.max_offdiag, std::abs(prod[k]));
        }
        if (std::abs(d.diag - 1.0) > kKktBound) {
            throw NumericError("theta_hat: (Theta Sigma)_jj = " + std::to_string(d.diag) + " for row " +
                               std::to_string(j + 1));
        }
        // (Theta Sigma)_jk tau_j^2 is the nodewise gradient, bounded by lambda_j
        if (d.max_offdiag * d.tau_sq > d.lambda + kKktBound) {
            throw NumericError("theta_hat: nodewise KKT bound violated for row " + std::to_string(j + 1));
        }
    });
    return theta;
}

std::vector<NodewiseCvRow> cv_nodewise_lambdas(const XiMatrix& xi, const std::vector<int>& rows,
                                               const NodewiseCvOptions& options)
{
    const Matrix events = event_rows(xi);
    Matrix sigma = Matrix::Zero(xi.p(), xi.p());
    sigma.selfadjointView<Eigen::Lower>().rankUpdate(events.transpose(), 1.0 / xi.n());
    sigma.triangularView<Eigen::StrictlyUpper>() = sigma.transpose();

    std::vector<NodewiseCvRow> out(rows.size());
    std::vector<std::vector<double>> grids(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const int j = rows[r];
        double lmax = 0.0;
        for (int k = 0; k < xi.p(); ++k) {
            if (k != j) lmax = std::max(lmax, std::abs(sigma(k, j)));
        }
        grids[r] = lmax > 0.0 ? log_spaced_grid(lmax, options.n_lambdas, options.ratio) : std::vector<double>{0.0};
    }
    const auto folds = fold_grams(xi, options.folds, options.seed);
    parallel_for(static_cast<int>(rows.size()), options.threads, [&](int r) {
        auto& row = out[r];
        row.row = rows[r];
        const auto sse = nodewise_cv_sse(folds, rows[r], grids[r], options.patience);
        row.lambda_grid.assign(grids[r].begin(), grids[r].begin() + static_cast<std::ptrdiff_t>(sse.size()));
        row.cv_mean.resize(sse.size());
        for (std::size_t l = 0; l < sse.size(); ++l) row.cv_mean[l] = sse[l] / xi.n();
        row.index_min = argmin_prefer_first(row.cv_mean);
        row.lambda_min = row.lambda_grid[row.index_min];
    });
    return out;
}

double cv_shared_nodewise_lambda(const XiMatrix& xi, const NodewiseCvOptions& options, int sample_rows)
{
    const int p = xi.p();
    std::vector<int> rows(p);
    std::iota(rows.begin(), rows.end(), 0);
    if (p > sample_rows) {
        std::mt19937_64 rng(options.seed ^ 0x9e3779b97f4a7c15ULL);
        std::shuffle(rows.begin(), rows.end(), rng);
        rows.resize(sample_rows);
        std::sort(rows.begin(), rows.end());
    }
    const Matrix sigma = xi.sigma_hat();
    double lmax = 0.0;
    for (int j : rows) {
        for (int k = 0; k < p; ++k) {
            if (k != j) lmax = std::max(lmax, std::abs(sigma(k, j)));
        }
    }
    if (!(lmax > 0.0)) return 0.0;
    const auto grid = log_spaced_grid(lmax, options.n_lambdas, options.ratio);
    const auto folds = fold_grams(xi, options.folds, options.seed);
    std::vector<std::vector<double>> sse(rows.size());
    parallel_for(static_cast<int>(rows.size()), options.threads,
                 [&](int r) { sse[r] = nodewise_cv_sse(folds, rows[r], grid, 0); });
    std::vector<double> pooled(grid.size(), 0.0);
    for (const auto& s : sse) {
        for (std::size_t l = 0; l < grid.size(); ++l) pooled[l] += s[l];
    }
    return grid[argmin_prefer_first(pooled)];
}

OneStepEstimate one_step(const Vector& beta_init, const ThetaHat& theta, const Vector& score_vec)
{
    const auto p = beta_init.size();
    if (score_vec.size() != p || theta.p() != p) throw NumericError("one_step: dimension mismatch");
    OneStepEstimate est;
    est.beta_init = beta_init;
    est.score_at_init = score_vec;
    est.rows = theta.row_index;
    est.b = Vector::Constant(p, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t r = 0; r < theta.row_index.size(); ++r) {
        const int j = theta.row_index[r];
        est.b[j] = beta_init[j] + theta.rows.row(static_cast<Eigen::Index>(r)).dot(score_vec);
    }
    return est;
}

} // namespace fgray
