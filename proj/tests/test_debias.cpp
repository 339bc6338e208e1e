#include "doctest.h"
#include "oracles.hpp"

#include "fgray/debias.hpp"
#include "fgray/error.hpp"
#include "fgray/pseudolik.hpp"
#include "fgray/solver.hpp"

#include <Eigen/Dense>

using namespace fgray;

namespace {

XiMatrix random_xi(std::mt19937_64& rng, int n, int p, double corr = 0.3)
{
    std::normal_distribution<double> norm(0.0, 1.0);
    XiMatrix xi;
    xi.rows.resize(n, p);
    for (int i = 0; i < n; ++i) {
        double prev = 0.0;
        for (int j = 0; j < p; ++j) {
            prev = corr * prev + norm(rng);
            xi.rows(i, j) = prev;
        }
    }
    return xi;
}

double gamma_loss(const XiMatrix& xi, int j, const Vector& gamma)
{
    // n^{-1} sum_i (Xi_ij - Xi_{i,-j}' gamma)^2, written out
    double sum = 0.0;
    for (int i = 0; i < xi.n(); ++i) {
        double fit = 0.0;
        for (int k = 0, m = 0; k < xi.p(); ++k) {
            if (k == j) continue;
            fit += xi.rows(i, k) * gamma[m++];
        }
        const double r = xi.rows(i, j) - fit;
        sum += r * r;
    }
    return sum / xi.n();
}

} // namespace

TEST_SUITE("debias")
{
    TEST_CASE("orthogonal columns above the threshold give gamma = 0")
    {
        XiMatrix xi;
        xi.rows = Matrix::Zero(4, 3);
        xi.rows(0, 0) = 1.0;
        xi.rows(1, 1) = 2.0;
        xi.rows(2, 2) = -1.5;
        xi.rows(3, 0) = 0.5;
        const auto fit = nodewise(xi, 0, 0.1);
        CHECK(fit.gamma.lpNorm<Eigen::Infinity>() == 0.0);
        CHECK(fit.tau_sq == doctest::Approx((1.0 + 0.25) / 4.0));
    }

    TEST_CASE("p = 2: soft-thresholded slope")
    {
        std::mt19937_64 rng(1);
        const auto xi = random_xi(rng, 50, 2, 0.8);
        const Matrix s = xi.sigma_hat();
        for (double lam : {0.0, 0.05, 0.2, 5.0}) {
            const auto fit = nodewise(xi, 1, lam);
            const double z = s(0, 1);
            const double expect = (z > lam ? z - lam : (z < -lam ? z + lam : 0.0)) / s(0, 0);
            CHECK(fit.gamma[0] == doctest::Approx(expect).epsilon(1e-10));
        }
    }

    TEST_CASE("tau^2 equals the recomputed loss plus lambda |gamma|_1")
    {
        std::mt19937_64 rng(2);
        const auto xi = random_xi(rng, 40, 12);
        for (int j : {0, 5, 11}) {
            const double lam = 0.05;
            const auto fit = nodewise(xi, j, lam);
            CHECK(fit.tau_sq == doctest::Approx(gamma_loss(xi, j, fit.gamma) + lam * fit.gamma.lpNorm<1>()).epsilon(1e-12));
            CHECK(fit.tau_sq >= gamma_loss(xi, j, fit.gamma));
        }
    }

    TEST_CASE("theta_row follows the (-gamma_<j, 1, -gamma_>=j) / tau^2 layout")
    {
        for (int p = 1; p <= 6; ++p) {
            for (int j = 0; j < p; ++j) {
                NodewiseFit fit;
                fit.row = j;
                fit.tau_sq = 4.0;
                fit.gamma.resize(p - 1);
                for (int m = 0; m < p - 1; ++m) fit.gamma[m] = m + 1.0;
                const Vector row = theta_row(fit, p);
                for (int k = 0; k < p; ++k) {
                    if (k < j) CHECK(row[k] == -(k + 1.0) / 4.0);
                    if (k == j) CHECK(row[k] == 0.25);
                    if (k > j) CHECK(row[k] == -static_cast<double>(k) / 4.0);
                }
            }
        }
    }

    TEST_CASE("p = 1: Theta is the scalar inverse")
    {
        std::mt19937_64 rng(3);
        const auto xi = random_xi(rng, 30, 1);
        const auto theta = theta_hat(xi, {0.1});
        CHECK(theta.rows(0, 0) == doctest::Approx(1.0 / xi.sigma_hat()(0, 0)).epsilon(1e-14));
    }

    TEST_CASE("diag(Theta Sigma) = 1 and the off-diagonals respect lambda_j / tau_j^2")
    {
        std::mt19937_64 rng(4);
        for (int rep = 0; rep < 10; ++rep) {
            const auto xi = random_xi(rng, 40, 25, 0.5);
            std::vector<double> lams(25);
            for (int j = 0; j < 25; ++j) lams[j] = 0.02 + 0.01 * (j % 5);
            const auto theta = theta_hat(xi, lams);
            const Matrix prod = theta.rows * xi.sigma_hat();
            for (int j = 0; j < 25; ++j) {
                CHECK(std::abs(prod(j, j) - 1.0) <= 1e-8);
                const double tau_sq = 1.0 / theta.rows(j, j);
                CHECK(theta.diagnostics[j].tau_sq == doctest::Approx(tau_sq).epsilon(1e-14));
                for (int k = 0; k < 25; ++k) {
                    if (k != j) CHECK(std::abs(prod(j, k)) <= lams[j] / tau_sq + 1e-8);
                }
            }
        }
    }

    TEST_CASE("lambda_j = 0 with n > p recovers the dense inverse")
    {
        std::mt19937_64 rng(5);
        const auto xi = random_xi(rng, 200, 6, 0.4);
        const auto theta = theta_hat(xi, std::vector<double>(6, 0.0));
        const Matrix inv = xi.sigma_hat().inverse();
        CHECK((theta.rows - inv).lpNorm<Eigen::Infinity>() < 1e-6);
    }

    TEST_CASE("a column explained exactly is refused")
    {
        std::mt19937_64 rng(6);
        auto xi = random_xi(rng, 30, 4);
        xi.rows.col(3) = 2.0 * xi.rows.col(1);
        CHECK_THROWS_AS(nodewise(xi, 3, 0.0), NumericError);
    }

    TEST_CASE("partial Theta keeps the requested rows")
    {
        std::mt19937_64 rng(7);
        const auto xi = random_xi(rng, 40, 8);
        const auto full = theta_hat(xi, std::vector<double>(8, 0.05));
        const auto part = theta_hat(xi, {0.05, 0.05}, {2, 6});
        CHECK(!part.full());
        CHECK(part.position(6) == 1);
        CHECK(part.position(3) == -1);
        CHECK((part.rows.row(0) - full.rows.row(2)).norm() == 0.0);
        Vector c = Vector::Zero(8);
        c[6] = 1.0;
        CHECK((part.transpose_times(c) - full.rows.row(6).transpose()).norm() == 0.0);
        c[3] = 1.0;
        CHECK_THROWS_AS(static_cast<void>(part.transpose_times(c)), NumericError);
    }

    TEST_CASE("one_step: zero score leaves beta unchanged; otherwise b = beta + Theta score")
    {
        std::mt19937_64 rng(8);
        const auto xi = random_xi(rng, 40, 5);
        const auto theta = theta_hat(xi, std::vector<double>(5, 0.05));
        Vector beta(5);
        beta << 0.1, 0.0, -0.3, 0.0, 2.0;
        const auto same = one_step(beta, theta, Vector::Zero(5));
        CHECK(same.b == beta);
        Vector s(5);
        s << 0.01, -0.02, 0.0, 0.03, -0.01;
        const auto est = one_step(beta, theta, s);
        CHECK((est.b - (beta + theta.rows * s)).lpNorm<Eigen::Infinity>() == 0.0);
        CHECK(est.complete());
    }

    TEST_CASE("low dimension: one step with the inverse Hessian is a Newton step")
    {
        std::mt19937_64 rng(9);
        const auto d = oracle::random_instance(rng, {.n = 200, .p = 2});
        const auto grid = make_risk_grid(d);
        Vector beta(2);
        beta << 0.2, -0.1;
        for (int it = 0; it < 30; ++it) {
            const Matrix h = neg_hessian(d, grid, beta);
            const Vector g = score(d, grid, beta);
            const auto est = one_step(beta, ThetaHat::from_matrix(h.inverse()), g);
            const Vector newton = beta + h.ldlt().solve(g);
            CHECK((est.b - newton).lpNorm<Eigen::Infinity>() < 1e-10);
            beta = est.b;
        }
        CHECK((beta - oracle::newton_mple(d, Vector::Zero(2))).lpNorm<Eigen::Infinity>() < 1e-6);
    }

    TEST_CASE("nodewise cross-validation is deterministic and its early stop is a prefix")
    {
        std::mt19937_64 rng(10);
        const auto d = oracle::random_instance(rng, {.n = 120, .p = 15});
        const auto grid = make_risk_grid(d);
        const auto xi = xi_matrix(d, grid, Vector::Zero(15));
        NodewiseCvOptions opt;
        opt.folds = 5;
        const std::vector<int> rows{0, 7, 14};
        const auto a = cv_nodewise_lambdas(xi, rows, opt);
        const auto b = cv_nodewise_lambdas(xi, rows, opt);
        NodewiseCvOptions full = opt;
        full.patience = 0;
        const auto c = cv_nodewise_lambdas(xi, rows, full);
        REQUIRE(a.size() == 3);
        for (std::size_t r = 0; r < 3; ++r) {
            CHECK(a[r].row == rows[r]);
            CHECK(a[r].cv_mean == b[r].cv_mean);
            CHECK(c[r].lambda_grid.size() == 20);
            REQUIRE(a[r].cv_mean.size() <= c[r].cv_mean.size());
            for (std::size_t l = 0; l < a[r].cv_mean.size(); ++l) CHECK(a[r].cv_mean[l] == c[r].cv_mean[l]);
            CHECK(a[r].lambda_min == a[r].lambda_grid[a[r].index_min]);
        }
        const double shared = cv_shared_nodewise_lambda(xi, opt, 5);
        CHECK(shared > 0.0);
        CHECK(shared == cv_shared_nodewise_lambda(xi, opt, 5));
    }
}
