#include "doctest.h"

#include "fgray/error.hpp"
#include "fgray/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

using namespace fgray;

namespace {

// two-sided one-sample Kolmogorov-Smirnov statistic
double ks_statistic(std::vector<double> x, const std::function<double(double)>& cdf)
{
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double f = cdf(x[i]);
        d = std::max({d, (i + 1) / n - f, f - i / n});
    }
    return d;
}

// 1% critical value of the KS statistic for large samples
double ks_critical(std::size_t n)
{
    return 1.628 / std::sqrt(static_cast<double>(n));
}

double normal_cdf_ref(double x)
{
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

} // namespace

TEST_SUITE("simgen")
{
    TEST_CASE("cause-1 probability and conditional time law")
    {
        EventModel model;
        model.mixture_p = 0.6;
        for (double lin : {-1.0, 0.0, 0.7}) {
            const double e = std::exp(lin);
            CHECK(model.cause1_probability(lin) == doctest::Approx(1.0 - std::pow(0.4, e)).epsilon(1e-14));

            // time solves F1(t) = u P1 by bisection on the subdistribution function
            const auto f1 = [&](double t) { return 1.0 - std::pow(1.0 - 0.6 * (1.0 - std::exp(-t)), e); };
            for (double u : {0.01, 0.3, 0.5, 0.99}) {
                const double target = u * model.cause1_probability(lin);
                double lo = 0.0;
                double hi = 100.0;
                for (int it = 0; it < 200; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    (f1(mid) < target ? lo : hi) = mid;
                }
                CHECK(model.cause1_time(lin, u) == doctest::Approx(0.5 * (lo + hi)).epsilon(1e-10));
            }
        }
    }

    TEST_CASE("drawn causes and cause-1 times follow the model")
    {
        Vector b1(1);
        b1 << 0.5;
        Vector b2(1);
        b2 << -0.5;
        EventModel model{b1, b2, 0.6};
        Rng rng = replicate_rng(11, 0);
        Vector z(1);
        z << 0.8;
        const double lin = 0.4;
        const int draws = 100000;
        int ones = 0;
        std::vector<double> t1;
        std::vector<double> t2;
        for (int r = 0; r < draws; ++r) {
            const auto [t, cause] = model.draw(z, rng);
            CHECK(t > 0.0);
            if (cause == kCause1) {
                ++ones;
                t1.push_back(t);
            } else {
                REQUIRE(cause == kCause2);
                t2.push_back(t);
            }
        }
        const double p1 = model.cause1_probability(lin);
        CHECK(std::abs(ones / static_cast<double>(draws) - p1) < 3.0 * std::sqrt(p1 * (1 - p1) / draws));

        const double e = std::exp(lin);
        const auto cond1 = [&](double t) { return (1.0 - std::pow(1.0 - 0.6 * (1.0 - std::exp(-t)), e)) / p1; };
        CHECK(ks_statistic(t1, cond1) < ks_critical(t1.size()));
        const double rate2 = std::exp(-0.5 * 0.8);
        const auto cond2 = [&](double t) { return 1.0 - std::exp(-rate2 * t); };
        CHECK(ks_statistic(t2, cond2) < ks_critical(t2.size()));
    }

    TEST_CASE("null covariate effect: cause-1 share equals the mixture parameter")
    {
        EventModel model{Vector::Zero(1), Vector::Zero(1), 0.5};
        Rng rng = replicate_rng(12, 0);
        const Vector z = Vector::Zero(1);
        const int draws = 100000;
        int ones = 0;
        std::vector<double> t1;
        for (int r = 0; r < draws; ++r) {
            const auto [t, cause] = model.draw(z, rng);
            if (cause == kCause1) {
                ++ones;
                t1.push_back(t);
            }
        }
        CHECK(std::abs(ones / static_cast<double>(draws) - 0.5) < 3.0 * std::sqrt(0.25 / draws));
        // F1(t) = p (1 - e^{-t}), so the conditional law is standard exponential
        CHECK(ks_statistic(t1, [](double t) { return 1.0 - std::exp(-t); }) < ks_critical(t1.size()));
    }

    TEST_CASE("design coefficient vectors")
    {
        const Vector b1 = setup1_beta1(6);
        CHECK(b1[0] == 0.5);
        CHECK(b1[1] == 0.5);
        CHECK(b1.tail(4).lpNorm<Eigen::Infinity>() == 0.0);
        const Vector b2 = setup1_beta2(6);
        for (int j = 0; j < 6; ++j) CHECK(std::abs(b2[j]) == 0.5);
        CHECK_THROWS_AS(setup1_beta2(5), DataError);
        const Vector s2 = setup2_beta1(20);
        CHECK(s2.head(8).minCoeff() == 0.5);
        CHECK(s2.segment(8, 4).maxCoeff() == -0.5);
        CHECK(s2.tail(8).lpNorm<Eigen::Infinity>() == 0.0);
        CHECK_THROWS_AS(setup2_beta1(10), DataError);
    }

    TEST_CASE("setup 2 covariates: block correlations and normal marginals")
    {
        Rng rng = replicate_rng(3, 0);
        const int n = 100000;
        const Matrix z = setup2_covariates(n, 20, {4, 4, 8}, {0.5, 0.35, 0.05}, rng);
        const Matrix c = (z.transpose() * z) / n;
        // z_a z_b has mean rho and variance 1 + rho^2 for unit normals; 3 MC SEs
        const auto tol = [&](double rho) { return 3.0 * std::sqrt((1.0 + rho * rho) / n); };
        CHECK(std::abs(c(0, 1) - 0.5) < tol(0.5));
        CHECK(std::abs(c(4, 7) - 0.35) < tol(0.35));
        CHECK(std::abs(c(8, 15) - 0.05) < tol(0.05));
        CHECK(std::abs(c(3, 4)) < tol(0.0));
        CHECK(std::abs(c(16, 17)) < tol(0.0));
        CHECK(std::abs(c(18, 18) - 1.0) < tol(1.0));
        for (int j : {0, 5, 12, 19}) {
            std::vector<double> col(z.col(j).data(), z.col(j).data() + n);
            CHECK(ks_statistic(col, normal_cdf_ref) < ks_critical(col.size()));
        }
        CHECK_THROWS_AS(setup2_covariates(5, 10, {8, 8}, {0.1, 0.1}, rng), DataError);
    }

    TEST_CASE("calibrated uniform censoring hits the target rate")
    {
        std::vector<double> pilot(1000, 2.0);
        const double c = calibrate_uniform_censoring(pilot, 0.25);
        // P(C < 2) for C ~ U(0, c) is 2 / c
        CHECK(c == doctest::Approx(8.0).epsilon(1e-9));

        Setup1Config cfg;
        cfg.n = 4000;
        cfg.p = 4;
        cfg.seed = 5;
        const auto d = gen_setup1(cfg);
        const double frac = d.count(kCensored) / static_cast<double>(d.n());
        CHECK(std::abs(frac - 0.3) < 0.03);
        for (double t : d.times) CHECK(t > 0.0);
        CHECK(d.horizon == *std::max_element(d.times.begin(), d.times.end()));
    }

    TEST_CASE("no censoring and exponential censoring")
    {
        Setup1Config cfg;
        cfg.n = 500;
        cfg.p = 4;
        cfg.censoring.kind = CensoringKind::kNone;
        CHECK(gen_setup1(cfg).count(kCensored) == 0);
        cfg.censoring = {CensoringKind::kExponential, 1e6, 0.3};
        CHECK(gen_setup1(cfg).count(kCensored) > 450);
    }

    TEST_CASE("generation is reproducible and streams differ")
    {
        Setup2Config cfg;
        cfg.n = 50;
        cfg.p = 20;
        cfg.seed = 9;
        const auto a = gen_setup2(cfg);
        const auto b = gen_setup2(cfg);
        CHECK(a.times == b.times);
        CHECK(a.status == b.status);
        CHECK(a.covariates == b.covariates);
        cfg.seed = 10;
        CHECK(gen_setup2(cfg).times != a.times);

        Rng r0 = replicate_rng(1, 0);
        Rng r1 = replicate_rng(1, 1);
        Rng r0b = replicate_rng(1, 0, 1);
        const auto x0 = r0();
        CHECK(x0 != r1());
        CHECK(x0 != r0b());
        for (int i = 0; i < 1000; ++i) {
            const double u = uniform_open(r0);
            CHECK((u > 0.0 && u < 1.0));
        }
    }
}
