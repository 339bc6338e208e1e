#include "fgray/solver.hpp"
#include "fgray/error.hpp"
#include "fgray/parallel.hpp"
#include "fgray/pseudolik.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace fgray {

namespace {

constexpr double kKktAccept = 1e-6;
constexpr double kTinySum = 1e-250;
constexpr int kSweepsBeforeSolve = 50;
constexpr int kGramSweepsBeforeSolve = 20;

double soft_threshold(double z, double lambda)
{
    if (z > lambda) return z - lambda;
    if (z < -lambda) return z + lambda;
    return 0.0;
}

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

} // namespace

double kkt_residual(const Vector& gradient, const Vector& beta, double lambda)
{
    double worst = 0.0;
    for (Eigen::Index j = 0; j < beta.size(); ++j) {
        const double v = beta[j] != 0.0 ? std::abs(gradient[j] + lambda * sign(beta[j]))
                                        : std::max(0.0, std::abs(gradient[j]) - lambda);
        worst = std::max(worst, v);
    }
    return worst;
}

// ---------------------------------------------------------------------------
// FineGrayLoss

FineGrayLoss::FineGrayLoss(const CompetingRisksData& data, const RiskGrid& grid)
    : z_(&data.covariates), grid_(&grid)
{
    if (grid.n() != data.n()) throw DataError("risk grid and data disagree on n");
    w2_ = grid.weights.cwiseProduct(grid.weights);
    is_event_ = Vector::Zero(data.n());
    for (int i = 0; i < data.n(); ++i) {
        if (grid.event_index[i] >= 0) is_event_[i] = 1.0;
    }
    grid_events_.resize(grid.size());
    for (int k = 0; k < grid.size(); ++k) grid_events_[k] = grid.event_counts[k];
}

bool FineGrayLoss::shifted_sums(const Vector& eta, Vector& rel, Vector& sums, double& shift) const
{
    shift = eta.maxCoeff();
    rel = (eta.array() - shift).exp().matrix();
    sums = grid_->weights.transpose() * rel;
    for (Eigen::Index k = 0; k < sums.size(); ++k) {
        if (!(sums[k] > kTinySum) || !std::isfinite(sums[k])) return false;
    }
    return std::isfinite(shift);
}

double FineGrayLoss::value(const Vector& eta) const
{
    Vector rel;
    Vector sums;
    double shift = 0.0;
    Vector log_r;
    if (shifted_sums(eta, rel, sums, shift)) {
        log_r = sums.array().log() + shift;
    } else {
        log_r = log_risk_sums(*grid_, eta);  // per-grid-point max subtraction
    }
    const double events = is_event_.dot(eta);
    return -(events - grid_events_.dot(log_r)) / n();
}

void FineGrayLoss::derivatives(const Vector& eta, Vector& grad, Vector& hess_diag) const
{
    const double inv_n = 1.0 / n();
    Vector rel;
    Vector sums;
    double shift = 0.0;
    if (shifted_sums(eta, rel, sums, shift)) {
        const Vector a = grid_events_.cwiseQuotient(sums);
        const Vector b = a.cwiseQuotient(sums);
        const Vector s1 = grid_->weights * a;
        const Vector s2 = w2_ * b;
        const Vector first = rel.cwiseProduct(s1);
        grad = (first - is_event_) * inv_n;
        hess_diag = (first - rel.cwiseProduct(rel).cwiseProduct(s2)) * inv_n;
        return;
    }
    // Slow path: stabilize each grid point separately.
    const int nn = n();
    grad = -is_event_;
    hess_diag = Vector::Zero(nn);
    Vector prob(nn);
    for (int k = 0; k < grid_->size(); ++k) {
        const auto w = grid_->weights.col(k);
        double mx = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < nn; ++i) {
            if (w[i] > 0.0) mx = std::max(mx, eta[i]);
        }
        double total = 0.0;
        for (int i = 0; i < nn; ++i) {
            prob[i] = w[i] > 0.0 ? w[i] * std::exp(eta[i] - mx) : 0.0;
            total += prob[i];
        }
        if (!(total > 0.0) || !std::isfinite(total)) {
            throw NumericError("risk set sum at grid index " + std::to_string(k) + " is not positive and finite");
        }
        prob /= total;
        grad += grid_events_[k] * prob;
        hess_diag += grid_events_[k] * (prob - prob.cwiseProduct(prob));
    }
    grad *= inv_n;
    hess_diag *= inv_n;
}

void FineGrayLoss::newton_terms(const Vector& eta, Vector& grad, Matrix& prob) const
{
    const int nn = n();
    const int K = grid_->size();
    Vector rel;
    Vector sums;
    double shift = 0.0;
    if (shifted_sums(eta, rel, sums, shift)) {
        prob = grid_->weights;
        for (int k = 0; k < K; ++k) prob.col(k) = prob.col(k).cwiseProduct(rel) / sums[k];
    } else {
        prob.resize(nn, K);
        for (int k = 0; k < K; ++k) {
            const auto w = grid_->weights.col(k);
            double mx = -std::numeric_limits<double>::infinity();
            for (int i = 0; i < nn; ++i) {
                if (w[i] > 0.0) mx = std::max(mx, eta[i]);
            }
            double total = 0.0;
            for (int i = 0; i < nn; ++i) {
                prob(i, k) = w[i] > 0.0 ? w[i] * std::exp(eta[i] - mx) : 0.0;
                total += prob(i, k);
            }
            if (!(total > 0.0) || !std::isfinite(total)) {
                throw NumericError("risk set sum at grid index " + std::to_string(k) + " is not positive and finite");
            }
            prob.col(k) /= total;
        }
    }
    grad = (prob * grid_events_ - is_event_) / nn;
}

double FineGrayLoss::saturated_value() const
{
    // each grid point contributes at most -D_k log D_k
    double total = 0.0;
    for (Eigen::Index k = 0; k < grid_events_.size(); ++k) total += grid_events_[k] * std::log(grid_events_[k]);
    return total / n();
}

Vector FineGrayLoss::hessian_times(const Matrix& prob, const Vector& x) const
{
    const Vector mass = prob * grid_events_;
    const Vector proj = (prob.transpose() * x).cwiseProduct(grid_events_);
    return (mass.cwiseProduct(x) - prob * proj) / n();
}

// ---------------------------------------------------------------------------
// Fine-Gray LASSO

PenalizedFit fit_fine_gray_lasso(const FineGrayLoss& loss, double lambda, const Vector& start,
                                 const SolverOptions& options)
{
    if (!(lambda >= 0.0)) throw NumericError("lambda must be nonnegative");
    const Matrix& Z = loss.covariates();
    const int n = loss.n();
    const int p = loss.p();
    if (start.size() != p) throw NumericError("warm start has the wrong length");

    PenalizedFit fit;
    fit.lambda = lambda;
    Vector beta = start;
    Vector eta = Z * beta;
    double obj = loss.value(eta) + lambda * beta.lpNorm<1>();
    if (!std::isfinite(obj)) throw NumericError("objective is not finite at the starting point");

    Vector g(n);
    Matrix prob;
    Vector grad(p);
    Vector hv(n);
    Vector curv(p);
    std::vector<char> have_col(p, 0);
    std::vector<Vector> hz(p);  // H Z_j, built on first use in each outer iteration
    std::vector<char> in_active(p, 0);
    std::vector<int> active;

    double kkt = std::numeric_limits<double>::infinity();
    bool stop_converged = false;
    for (int it = 0; it < options.max_outer; ++it) {
        loss.newton_terms(eta, g, prob);
        grad.noalias() = Z.transpose() * g;
        kkt = kkt_residual(grad, beta, lambda);
        if (kkt <= options.kkt_tol) {
            stop_converged = true;
            break;
        }
        std::fill(have_col.begin(), have_col.end(), 0);
        auto column = [&](int j) -> const Vector& {
            if (!have_col[j]) {
                hz[j] = loss.hessian_times(prob, Z.col(j));
                curv[j] = Z.col(j).dot(hz[j]);
                have_col[j] = 1;
            }
            return hz[j];
        };

        // Inner problem: exact quadratic model of -m around beta plus the L1 term.
        Vector trial = beta;
        hv.setZero();
        active.clear();
        std::fill(in_active.begin(), in_active.end(), 0);
        for (int j = 0; j < p; ++j) {
            if (trial[j] != 0.0) {
                active.push_back(j);
                in_active[j] = 1;
            }
        }
        auto update = [&](int j) -> double {
            const double gj = grad[j] + Z.col(j).dot(hv);
            const double old = trial[j];
            if (old == 0.0 && std::abs(gj) <= lambda) return 0.0;
            const Vector& col = column(j);
            const double a = curv[j];
            if (!(a > 0.0)) return 0.0;
            const double next = soft_threshold(a * old - gj, lambda) / a;
            const double diff = next - old;
            if (diff == 0.0) return 0.0;
            hv.noalias() += diff * col;
            trial[j] = next;
            if (next != 0.0 && !in_active[j]) {
                in_active[j] = 1;
                active.push_back(j);
            }
            return std::abs(diff) * std::sqrt(a);
        };
        // Exact minimizer of the model on the current active set with signs held
        // fixed, truncated at the first sign change.
        auto active_solve = [&]() {
            std::vector<int> set;
            for (int j : active) {
                if (trial[j] != 0.0) set.push_back(j);
            }
            const int m = static_cast<int>(set.size());
            if (m == 0) return;
            Matrix hza(n, m);
            Vector rhs(m);
            for (int r = 0; r < m; ++r) {
                const int j = set[r];
                hza.col(r) = column(j);
                rhs[r] = -(grad[j] + Z.col(j).dot(hv) + lambda * sign(trial[j]));
            }
            const Matrix za = Z(Eigen::all, set);
            const Matrix q = za.transpose() * hza;
            const Eigen::LDLT<Matrix> ldlt(q);
            if (ldlt.info() != Eigen::Success) return;
            const Vector step_a = ldlt.solve(rhs);
            if (!step_a.allFinite()) return;
            double t = 1.0;
            for (int r = 0; r < m; ++r) {
                const double next = trial[set[r]] + step_a[r];
                if (next * trial[set[r]] < 0.0) t = std::min(t, -trial[set[r]] / step_a[r]);
            }
            for (int r = 0; r < m; ++r) {
                const int j = set[r];
                const double next = trial[j] + t * step_a[r];
                const double diff = (next * trial[j] <= 0.0 ? 0.0 : next) - trial[j];
                hv.noalias() += diff * hza.col(r);
                trial[j] += diff;
            }
        };

        int passes = 0;
        while (passes < options.max_inner) {
            double change = 0.0;
            for (int j = 0; j < p; ++j) change = std::max(change, update(j));
            ++passes;
            if (change < options.inner_tol) break;
            int sweeps = 0;
            while (passes < options.max_inner) {
                double active_change = 0.0;
                for (int j : active) active_change = std::max(active_change, update(j));
                ++passes;
                if (active_change < options.inner_tol) break;
                if (++sweeps == kSweepsBeforeSolve) {
                    active_solve();
                    sweeps = 0;
                }
            }
        }

        const Vector dir = trial - beta;
        if (dir.lpNorm<Eigen::Infinity>() == 0.0) {
            fit.message = "no progress from the quadratic model";
            break;
        }
        const Vector zdir = Z * dir;
        const double l1_now = beta.lpNorm<1>();
        const double delta = grad.dot(dir) + lambda * (trial.lpNorm<1>() - l1_now);
        if (!(delta < 0.0)) {
            fit.message = "model step is not a descent direction";
            break;
        }

        double step = 1.0;
        double new_obj = obj;
        bool accepted = false;
        Vector eta_try(n);
        for (int ls = 0; ls < 50; ++ls) {
            eta_try = eta + step * zdir;
            new_obj = loss.value(eta_try) + lambda * (beta + step * dir).lpNorm<1>();
            if (new_obj <= obj + 1e-4 * step * delta) {
                accepted = true;
                break;
            }
            // change at roundoff level: take it, the objective is flat here
            if (std::abs(new_obj - obj) <= 1e-13 * std::max(1.0, std::abs(obj))) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            fit.message = "line search failed";
            break;
        }
        if (new_obj > obj + 1e-12) fit.monotone = false;

        const double rel = (obj - new_obj) / std::max(1.0, std::abs(obj));
        beta += step * dir;
        for (int j = 0; j < p; ++j) {
            if (std::abs(beta[j]) < 1e-300) beta[j] = 0.0;
        }
        eta.noalias() = Z * beta;
        obj = loss.value(eta) + lambda * beta.lpNorm<1>();
        ++fit.iterations;
        if (rel < options.rel_tol) {
            loss.newton_terms(eta, g, prob);
            grad.noalias() = Z.transpose() * g;
            kkt = kkt_residual(grad, beta, lambda);
            if (kkt <= kKktAccept) {
                stop_converged = true;
                break;
            }
        }
    }

    if (!stop_converged) {
        loss.newton_terms(eta, g, prob);
        grad.noalias() = Z.transpose() * g;
        kkt = kkt_residual(grad, beta, lambda);
    }
    fit.beta = std::move(beta);
    fit.objective = obj;
    fit.kkt_residual = kkt;
    fit.converged = kkt <= kKktAccept;
    if (!fit.converged && fit.message.empty()) fit.message = "iteration limit reached";
    return fit;
}

PenalizedFit fit_fine_gray_lasso(const CompetingRisksData& data, const RiskGrid& grid, double lambda,
                                 const Vector* warm_start, const SolverOptions& options)
{
    const FineGrayLoss loss(data, grid);
    const Vector start = warm_start ? *warm_start : Vector::Zero(data.p());
    return fit_fine_gray_lasso(loss, lambda, start, options);
}

double deviance_ratio(const FineGrayLoss& loss, const Vector& eta)
{
    const double null_value = loss.value(Vector::Zero(loss.n()));
    const double sat_value = loss.saturated_value();
    const double denom = null_value - sat_value;
    if (!(denom > 0.0)) return 1.0;
    return (null_value - loss.value(eta)) / denom;
}

std::vector<PenalizedFit> fit_fine_gray_path(const FineGrayLoss& loss, const std::vector<double>& lambdas,
                                             const SolverOptions& options, const PathStop& stop)
{
    std::vector<PenalizedFit> fits;
    fits.reserve(lambdas.size());
    Vector start = Vector::Zero(loss.p());
    double previous = 0.0;
    for (double lambda : lambdas) {
        fits.push_back(fit_fine_gray_lasso(loss, lambda, start, options));
        start = fits.back().beta;
        if (!stop.enabled) continue;
        const double ratio = deviance_ratio(loss, loss.covariates() * start);
        if (ratio > stop.max_ratio) break;
        if (fits.size() > 1 && ratio - previous < stop.min_gain * ratio) break;
        previous = ratio;
    }
    return fits;
}

double lambda_max(const CompetingRisksData& data, const RiskGrid& grid)
{
    const FineGrayLoss loss(data, grid);
    Vector g;
    Vector h;
    loss.derivatives(Vector::Zero(data.n()), g, h);
    const Vector grad = data.covariates.transpose() * g;
    return grad.lpNorm<Eigen::Infinity>();
}

std::vector<double> log_spaced_grid(double max_value, int count, double ratio)
{
    if (count < 1) throw NumericError("lambda grid needs at least one value");
    if (!(ratio > 0.0 && ratio < 1.0)) throw NumericError("lambda ratio must lie in (0, 1)");
    if (!(max_value > 0.0)) throw NumericError("lambda_max is not positive; the score at zero vanishes");
    std::vector<double> grid(count);
    grid[0] = max_value;
    for (int l = 1; l < count; ++l) {
        const double frac = static_cast<double>(l) / static_cast<double>(count - 1);
        grid[l] = max_value * std::exp(frac * std::log(ratio));
    }
    return grid;
}

std::vector<double> lambda_path(const CompetingRisksData& data, const RiskGrid& grid, int n_lambdas, double ratio)
{
    return log_spaced_grid(lambda_max(data, grid), n_lambdas, ratio);
}

// ---------------------------------------------------------------------------
// Least-squares LASSO on a Gram matrix

PenalizedFit lasso_gram(const Matrix& A, const Eigen::Ref<const Vector>& b, double c, double lambda, Vector gamma,
                        int excluded, const LinearLassoOptions& options)
{
    if (!(lambda >= 0.0)) throw NumericError("lambda must be nonnegative");
    const int q = static_cast<int>(A.rows());
    if (gamma.size() != q) gamma = Vector::Zero(q);
    if (excluded >= 0) gamma[excluded] = 0.0;

    std::vector<int> active;
    std::vector<char> in_active(q, 0);
    Vector grad = b;
    for (int k = 0; k < q; ++k) {
        if (gamma[k] != 0.0) {
            grad.noalias() -= gamma[k] * A.col(k);
            active.push_back(k);
            in_active[k] = 1;
        }
    }

    auto coord_kkt = [&](int k) {
        return gamma[k] != 0.0 ? std::abs(grad[k] - lambda * sign(gamma[k]))
                               : std::max(0.0, std::abs(grad[k]) - lambda);
    };
    auto new_value = [&](int k) {
        return soft_threshold(grad[k] + A(k, k) * gamma[k], lambda) / A(k, k);
    };

    PenalizedFit fit;
    fit.lambda = lambda;
    int passes = 0;
    bool done = false;
    while (passes < options.max_passes) {
        // full sweep with full-gradient updates
        for (int k = 0; k < q; ++k) {
            if (k == excluded || !(A(k, k) > 0.0)) continue;
            const double next = new_value(k);
            const double diff = next - gamma[k];
            if (diff == 0.0) continue;
            grad.noalias() -= diff * A.col(k);
            gamma[k] = next;
            if (!in_active[k]) {
                in_active[k] = 1;
                active.push_back(k);
            }
        }
        ++passes;
        double worst = 0.0;
        for (int k = 0; k < q; ++k) {
            if (k != excluded && A(k, k) > 0.0) worst = std::max(worst, coord_kkt(k));
        }
        if (worst <= options.tol) {
            done = true;
            break;
        }
        // active-set sweeps; gradient kept current on the active set only
        int sweeps = 0;
        while (passes < options.max_passes) {
            double active_worst = 0.0;
            for (int k : active) {
                const double next = new_value(k);
                const double diff = next - gamma[k];
                if (diff == 0.0) continue;
                for (int m : active) grad[m] -= diff * A(m, k);
                gamma[k] = next;
            }
            for (int k : active) active_worst = std::max(active_worst, coord_kkt(k));
            ++passes;
            if (active_worst <= 0.5 * options.tol) break;
            if (++sweeps == kGramSweepsBeforeSolve) {
                sweeps = 0;
                // sign-fixed exact solve on the nonzero coordinates, stopped at the first sign change
                std::vector<int> set;
                for (int k : active) {
                    if (gamma[k] != 0.0) set.push_back(k);
                }
                if (set.empty()) continue;
                const auto m = static_cast<Eigen::Index>(set.size());
                Matrix sub(m, m);
                Vector rhs(m);
                for (Eigen::Index r = 0; r < m; ++r) {
                    rhs[r] = grad[set[r]] - lambda * sign(gamma[set[r]]);
                    for (Eigen::Index t = 0; t < m; ++t) sub(r, t) = A(set[r], set[t]);
                }
                const Eigen::LDLT<Matrix> ldlt(sub);
                if (ldlt.info() != Eigen::Success) continue;
                const Vector step = ldlt.solve(rhs);
                if (!step.allFinite()) continue;
                // exact minimizer along the direction; A_SS may be singular
                const double curv = step.dot(sub * step);
                const double slope = step.dot(rhs);
                if (!(curv > 0.0) || !(slope > 0.0)) continue;
                double t = slope / curv;
                for (Eigen::Index r = 0; r < m; ++r) {
                    const double g = gamma[set[r]];
                    if ((g + step[r]) * g < 0.0) t = std::min(t, -g / step[r]);
                }
                for (Eigen::Index r = 0; r < m; ++r) {
                    const int k = set[r];
                    const double next = gamma[k] + t * step[r];
                    const double diff = (next * gamma[k] <= 0.0 ? 0.0 : next) - gamma[k];
                    if (diff == 0.0) continue;
                    for (int a : active) grad[a] -= diff * A(a, k);
                    gamma[k] += diff;
                }
            }
        }
        grad = b;
        for (int k : active) {
            if (gamma[k] != 0.0) grad.noalias() -= gamma[k] * A.col(k);
        }
    }

    // exact gradient for the certificate
    grad = b;
    for (int k : active) {
        if (gamma[k] != 0.0) grad.noalias() -= gamma[k] * A.col(k);
    }
    double kkt = 0.0;
    for (int k = 0; k < q; ++k) {
        if (k != excluded && A(k, k) > 0.0) kkt = std::max(kkt, coord_kkt(k));
    }
    // objective: gamma'A gamma - 2 b'gamma + c + 2 lambda |gamma|_1, with A gamma = b - grad
    const double quad = gamma.dot(b - grad);
    fit.objective = quad - 2.0 * b.dot(gamma) + c + 2.0 * lambda * gamma.lpNorm<1>();
    fit.beta = std::move(gamma);
    fit.iterations = passes;
    fit.kkt_residual = kkt;
    fit.converged = done || kkt <= options.tol;
    if (!fit.converged) fit.message = "pass limit reached";
    return fit;
}

PenalizedFit fit_linear_lasso(const Matrix& X, const Vector& y, double lambda, const LinearLassoOptions& options)
{
    if (X.rows() != y.size()) throw NumericError("fit_linear_lasso: X and y disagree on n");
    const double n = static_cast<double>(X.rows());
    const Matrix A = X.transpose() * X / n;
    const Vector b = X.transpose() * y / n;
    return lasso_gram(A, b, y.squaredNorm() / n, lambda, Vector::Zero(X.cols()), -1, options);
}

// ---------------------------------------------------------------------------
// Cross-validation

std::vector<int> assign_folds(int n, int folds, std::uint64_t seed)
{
    if (folds < 2) throw DataError("cross-validation needs at least 2 folds");
    if (folds > n) throw DataError("more folds than subjects");
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<int> fold_of(n);
    for (int r = 0; r < n; ++r) fold_of[order[r]] = r % folds;
    return fold_of;
}

int argmin_prefer_first(const std::vector<double>& values)
{
    int best = 0;
    for (int l = 1; l < static_cast<int>(values.size()); ++l) {
        if (values[l] < values[best]) best = l;
    }
    return best;
}

bool CvResult::interior_min() const
{
    return index_min > 0 && index_min + 1 < static_cast<int>(lambda_grid.size());
}

CvResult cross_validate(const CompetingRisksData& data, const std::vector<double>& lambda_grid,
                        const CvOptions& options)
{
    if (lambda_grid.empty()) throw DataError("empty lambda grid");
    for (std::size_t l = 1; l < lambda_grid.size(); ++l) {
        if (!(lambda_grid[l] < lambda_grid[l - 1])) throw DataError("lambda grid must be strictly descending");
    }
    const int n = data.n();
    const int F = options.folds;
    const int L = static_cast<int>(lambda_grid.size());

    CvResult cv;
    cv.lambda_grid = lambda_grid;
    cv.folds = F;
    cv.fold_of = assign_folds(n, F, options.seed);

    std::vector<std::vector<int>> train(F);
    std::vector<int> held_events(F, 0);
    for (int i = 0; i < n; ++i) {
        for (int f = 0; f < F; ++f) {
            if (cv.fold_of[i] != f) train[f].push_back(i);
        }
        if (data.status[i] == kCause1 && data.times[i] <= data.horizon) ++held_events[cv.fold_of[i]];
    }
    for (int f = 0; f < F; ++f) {
        int ev = 0;
        for (int i : train[f]) {
            if (data.status[i] == kCause1) ++ev;
        }
        if (ev == 0) {
            throw DataError("cross-validation fold " + std::to_string(f + 1) +
                            " has no cause-1 events in its training part; use fewer folds");
        }
    }

    const RiskGrid full_grid = make_risk_grid(data);
    const FineGrayLoss full_loss(data, full_grid);

    std::vector<CompetingRisksData> parts;
    std::vector<RiskGrid> grids;
    for (int f = 0; f < F; ++f) {
        parts.push_back(subset(data, train[f]));
        grids.push_back(make_risk_grid(parts.back()));
    }
    std::vector<FineGrayLoss> losses;
    for (int f = 0; f < F; ++f) losses.emplace_back(parts[f], grids[f]);
    std::vector<Vector> beta(F, Vector::Zero(data.p()));

    // deviance[f][l] = -2 [L_full(beta_fl) - L_train(beta_fl)], L unscaled
    std::vector<std::vector<double>> deviance(F);
    int best = 0;
    double best_sum = std::numeric_limits<double>::infinity();
    int fitted = 0;
    for (int l = 0; l < L; ++l) {
        parallel_for(F, options.threads, [&](int f) {
            beta[f] = fit_fine_gray_lasso(losses[f], lambda_grid[l], beta[f], options.solver).beta;
            const double l_full = -full_loss.value(data.covariates * beta[f]) * n;
            const double l_train = -losses[f].value(parts[f].covariates * beta[f]) * parts[f].n();
            deviance[f].push_back(-2.0 * (l_full - l_train));
        });
        fitted = l + 1;
        double sum = 0.0;
        for (int f = 0; f < F; ++f) sum += deviance[f][l];
        if (sum < best_sum) {
            best_sum = sum;
            best = l;
        }
        if (options.patience > 0 && l - best >= options.patience) break;
    }
    cv.lambda_grid.resize(fitted);
    const int fitted_l = fitted;

    const double total_events = std::accumulate(held_events.begin(), held_events.end(), 0.0);
    if (!(total_events > 0.0)) throw DataError("no cause-1 events to cross-validate on");
    int used_folds = 0;
    for (int f = 0; f < F; ++f) used_folds += held_events[f] > 0 ? 1 : 0;

    cv.cv_mean.assign(fitted_l, 0.0);
    cv.cv_se.assign(fitted_l, 0.0);
    for (int l = 0; l < fitted_l; ++l) {
        double sum = 0.0;
        for (int f = 0; f < F; ++f) sum += deviance[f][l];
        const double mean = sum / total_events;
        double var = 0.0;
        for (int f = 0; f < F; ++f) {
            if (held_events[f] == 0) continue;
            const double raw = deviance[f][l] / held_events[f];
            var += held_events[f] * (raw - mean) * (raw - mean);
        }
        var /= total_events;
        cv.cv_mean[l] = mean;
        cv.cv_se[l] = used_folds > 1 ? std::sqrt(var / (used_folds - 1)) : 0.0;
        if (!std::isfinite(mean)) throw NumericError("cross-validated loss is not finite");
    }

    cv.index_min = argmin_prefer_first(cv.cv_mean);
    cv.lambda_min = lambda_grid[cv.index_min];
    const double bound = cv.cv_mean[cv.index_min] + cv.cv_se[cv.index_min];
    cv.index_1se = cv.index_min;
    for (int l = 0; l <= cv.index_min; ++l) {
        if (cv.cv_mean[l] <= bound) {
            cv.index_1se = l;
            break;
        }
    }
    cv.lambda_1se = lambda_grid[cv.index_1se];
    return cv;
}

} // namespace fgray
