#include "doctest.h"
#include "oracles.hpp"

#include "fgray/error.hpp"
#include "fgray/pseudolik.hpp"
#include "fgray/solver.hpp"

#include <numeric>
#include <set>

using namespace fgray;

namespace {

double penalized_objective(const CompetingRisksData& d, const RiskGrid& grid, const Vector& beta, double lambda)
{
    return -loglik(d, grid, beta) + lambda * beta.lpNorm<1>();
}

} // namespace

TEST_SUITE("solver")
{
    TEST_CASE("kkt_residual on hand cases")
    {
        Vector g(3);
        g << 0.5, -0.2, 0.1;
        Vector b(3);
        b << 0.0, 1.0, 0.0;
        // coordinate 0 inactive exceeds lambda by 0.2; coordinate 1 active needs g = -lambda sign(b)
        CHECK(kkt_residual(g, b, 0.3) == doctest::Approx(0.2));
        g[0] = 0.1;
        g[1] = -0.3;
        CHECK(kkt_residual(g, b, 0.3) == doctest::Approx(0.0));
    }

    TEST_CASE("lambda above lambda_max gives the zero fit")
    {
        std::mt19937_64 rng(1);
        const auto d = oracle::random_instance(rng, {.n = 40, .p = 6});
        const auto grid = make_risk_grid(d);
        const double lmax = lambda_max(d, grid);
        CHECK(lmax == doctest::Approx(score(d, grid, Vector::Zero(6)).lpNorm<Eigen::Infinity>()));
        const auto fit = fit_fine_gray_lasso(d, grid, lmax * 1.0001);
        CHECK(fit.converged);
        CHECK(fit.beta.lpNorm<Eigen::Infinity>() == 0.0);
        const auto below = fit_fine_gray_lasso(d, grid, lmax * 0.9);
        CHECK(below.beta.lpNorm<Eigen::Infinity>() > 0.0);
    }

    TEST_CASE("lambda = 0 matches the Newton maximizer")
    {
        std::mt19937_64 rng(2);
        for (int rep = 0; rep < 3; ++rep) {
            const auto d = oracle::random_instance(rng, {.n = 200, .p = 2});
            const auto grid = make_risk_grid(d);
            const auto fit = fit_fine_gray_lasso(d, grid, 0.0);
            const Vector mple = oracle::newton_mple(d, Vector::Zero(2));
            CHECK(fit.converged);
            CHECK((fit.beta - mple).lpNorm<Eigen::Infinity>() < 1e-6);
        }
    }

    TEST_CASE("converged fits certify KKT and never increase the objective")
    {
        std::mt19937_64 rng(3);
        for (int rep = 0; rep < 10; ++rep) {
            const auto d = oracle::random_instance(rng, {.n = 50, .p = 30, .ties = rep % 2 == 0});
            const auto grid = make_risk_grid(d);
            const double lam = lambda_max(d, grid) * (0.05 + 0.1 * rep);
            const auto fit = fit_fine_gray_lasso(d, grid, lam);
            CHECK(fit.converged);
            CHECK(fit.monotone);
            CHECK(fit.kkt_residual <= 1e-6);
            // independent certificate from the score
            CHECK(kkt_residual(-score(d, grid, fit.beta), fit.beta, lam) <= 1e-6);
            CHECK(fit.objective == doctest::Approx(penalized_objective(d, grid, fit.beta, lam)).epsilon(1e-12));
        }
    }

    TEST_CASE("lambda path: descending, log-spaced, zero first fit, warm equals cold")
    {
        std::mt19937_64 rng(4);
        const auto d = oracle::random_instance(rng, {.n = 60, .p = 20});
        const auto grid = make_risk_grid(d);
        const auto path = lambda_path(d, grid, 15, 0.05);
        REQUIRE(path.size() == 15);
        for (std::size_t l = 1; l < path.size(); ++l) {
            CHECK(path[l] < path[l - 1]);
            CHECK(path[l] / path[l - 1] == doctest::Approx(path[1] / path[0]));
        }
        CHECK(path.back() == doctest::Approx(0.05 * path.front()));
        const FineGrayLoss loss(d, grid);
        const auto fits = fit_fine_gray_path(loss, path);
        CHECK(fits.front().beta.lpNorm<Eigen::Infinity>() == 0.0);
        for (std::size_t l = 0; l < path.size(); ++l) {
            const auto cold = fit_fine_gray_lasso(d, grid, path[l]);
            CHECK(std::abs(cold.objective - fits[l].objective) <= 1e-8);
        }
    }

    TEST_CASE("fit_linear_lasso: zero above threshold and closed form for orthogonal designs")
    {
        std::mt19937_64 rng(5);
        std::normal_distribution<double> norm(0.0, 1.0);
        const int n = 40;
        Matrix x(n, 5);
        Vector y(n);
        for (int i = 0; i < n; ++i) {
            y[i] = norm(rng);
            for (int j = 0; j < 5; ++j) x(i, j) = norm(rng);
        }
        const double thr = (x.transpose() * y / n).lpNorm<Eigen::Infinity>();
        CHECK(fit_linear_lasso(x, y, 2.0 * thr).beta.lpNorm<Eigen::Infinity>() == 0.0);
        CHECK(fit_linear_lasso(x, y, thr * (1 + 1e-12)).beta.lpNorm<Eigen::Infinity>() == 0.0);

        // X'X = n I
        const Eigen::HouseholderQR<Matrix> qr(x);
        const Matrix q = Matrix(qr.householderQ()).leftCols(5) * std::sqrt(static_cast<double>(n));
        const double lam = 0.15;
        const auto fit = fit_linear_lasso(q, y, lam);
        for (int j = 0; j < 5; ++j) {
            const double z = q.col(j).dot(y) / n;
            const double expect = z > lam ? z - lam : (z < -lam ? z + lam : 0.0);
            CHECK(fit.beta[j] == doctest::Approx(expect).epsilon(1e-10));
        }
    }

    TEST_CASE("fit_linear_lasso matches a slow reference to 1e-8 in objective")
    {
        std::mt19937_64 rng(6);
        std::normal_distribution<double> norm(0.0, 1.0);
        for (int rep = 0; rep < 5; ++rep) {
            Matrix x(50, 20);
            Vector y(50);
            for (int i = 0; i < 50; ++i) {
                for (int j = 0; j < 20; ++j) x(i, j) = norm(rng) + (j > 0 ? 0.5 * x(i, j - 1) : 0.0);
                y[i] = x(i, 0) - 0.5 * x(i, 3) + norm(rng);
            }
            const double lam = 0.02 + 0.05 * rep;
            const auto fit = fit_linear_lasso(x, y, lam);
            const Vector ref = oracle::slow_lasso(x, y, lam);
            CHECK(fit.converged);
            CHECK(std::abs(oracle::lasso_objective(x, y, fit.beta, lam) - oracle::lasso_objective(x, y, ref, lam)) <
                  1e-8);
            CHECK(fit.objective == doctest::Approx(oracle::lasso_objective(x, y, fit.beta, lam)).epsilon(1e-12));
        }
    }

    TEST_CASE("lasso_gram holds the excluded coordinate at zero")
    {
        std::mt19937_64 rng(7);
        std::normal_distribution<double> norm(0.0, 1.0);
        Matrix x(30, 6);
        for (int i = 0; i < 30; ++i) {
            for (int j = 0; j < 6; ++j) x(i, j) = norm(rng);
        }
        const Matrix a = x.transpose() * x / 30.0;
        const auto fit = lasso_gram(a, a.col(2), a(2, 2), 0.01, Vector::Zero(6), 2);
        CHECK(fit.beta[2] == 0.0);
        CHECK(fit.converged);
    }

    TEST_CASE("Fine-Gray solution is a fixed point of the linear solver on its quadratic model")
    {
        // at the optimum, 0.5 b'Hb - (g + H beta)'b + lambda |b|_1 is minimized by b = beta;
        // in Gram form (A = H, rhs = g + H beta, same lambda) the linear solver must return beta
        std::mt19937_64 rng(8);
        for (int rep = 0; rep < 5; ++rep) {
            const auto d = oracle::random_instance(rng, {.n = 80, .p = 6});
            const auto grid = make_risk_grid(d);
            const double lam = 0.2 * lambda_max(d, grid);
            const auto fg = fit_fine_gray_lasso(d, grid, lam);
            const Matrix H = neg_hessian(d, grid, fg.beta);
            const Vector rhs = score(d, grid, fg.beta) + H * fg.beta;
            const auto lin = lasso_gram(H, rhs, 0.0, lam, Vector::Zero(6));
            CHECK((lin.beta - fg.beta).lpNorm<Eigen::Infinity>() < 1e-5);
            for (int j = 0; j < 6; ++j) CHECK((lin.beta[j] == 0.0) == (fg.beta[j] == 0.0));
        }
    }

    TEST_CASE("folds are a deterministic balanced partition")
    {
        const auto a = assign_folds(103, 10, 42);
        const auto b = assign_folds(103, 10, 42);
        CHECK(a == b);
        CHECK(a != assign_folds(103, 10, 43));
        std::vector<int> sizes(10, 0);
        for (int f : a) ++sizes[f];
        CHECK(*std::max_element(sizes.begin(), sizes.end()) - *std::min_element(sizes.begin(), sizes.end()) <= 1);
        CHECK_THROWS_AS(assign_folds(5, 1, 1), DataError);
    }

    TEST_CASE("cross-validation: null deviance at a huge penalty and determinism")
    {
        std::mt19937_64 rng(9);
        const auto d = oracle::random_instance(rng, {.n = 80, .p = 10});
        const auto grid = make_risk_grid(d);
        auto path = lambda_path(d, grid, 12, 0.05);
        // far above every training fold's own lambda_max, so each fold fit is zero
        path.insert(path.begin(), 100.0 * path.front());
        CvOptions opt;
        opt.folds = 5;
        opt.seed = 3;
        const auto cv = cross_validate(d, path, opt);
        REQUIRE(cv.cv_mean.size() == path.size());

        // null deviance recomputed from scratch at beta = 0
        double dev = 0.0;
        int events = 0;
        for (int f = 0; f < 5; ++f) {
            std::vector<int> train;
            for (int i = 0; i < d.n(); ++i) {
                if (cv.fold_of[i] != f) train.push_back(i);
                else if (d.status[i] == 1) ++events;
            }
            const auto part = subset(d, train);
            const double full = oracle::loglik(d, Vector::Zero(10)) * d.n();
            const double tr = oracle::loglik(part, Vector::Zero(10)) * part.n();
            dev += -2.0 * (full - tr);
        }
        CHECK(cv.cv_mean[0] == doctest::Approx(dev / events).epsilon(1e-10));
        for (double v : cv.cv_mean) CHECK(std::isfinite(v));

        const auto again = cross_validate(d, path, opt);
        CHECK(again.cv_mean == cv.cv_mean);
        CHECK(again.index_min == cv.index_min);
        CHECK(cv.index_1se <= cv.index_min);
    }

    TEST_CASE("cross-validation early stop returns a prefix of the full curve")
    {
        std::mt19937_64 rng(10);
        const auto d = oracle::random_instance(rng, {.n = 80, .p = 10});
        const auto grid = make_risk_grid(d);
        const auto path = lambda_path(d, grid, 30, 0.01);
        CvOptions full;
        full.folds = 5;
        CvOptions early = full;
        early.patience = 3;
        const auto a = cross_validate(d, path, full);
        const auto b = cross_validate(d, path, early);
        REQUIRE(b.cv_mean.size() <= a.cv_mean.size());
        for (std::size_t l = 0; l < b.cv_mean.size(); ++l) CHECK(b.cv_mean[l] == a.cv_mean[l]);
    }

    TEST_CASE("cross-validation refuses folds without training events")
    {
        CompetingRisksData d;
        d.times = {1, 2, 3, 4, 5, 6};
        d.status = {1, 0, 0, 0, 0, 0};
        d.covariates = Matrix::Random(6, 2);
        d.horizon = 6;
        CvOptions opt;
        opt.folds = 6;
        CHECK_THROWS_AS(cross_validate(d, {0.5, 0.1}, opt), DataError);
        CHECK_THROWS_AS(cross_validate(d, {0.1, 0.5}, opt), DataError);
    }

    TEST_CASE("argmin ties go to the larger lambda")
    {
        CHECK(argmin_prefer_first({3.0, 1.0, 1.0, 2.0}) == 1);
    }
}
