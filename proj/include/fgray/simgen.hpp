#pragma once

#include "fgray/data.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace fgray {

using Rng = std::mt19937_64;

/// Independent stream for replicate `rep` of a study seeded with `seed`.
Rng replicate_rng(std::uint64_t seed, std::uint64_t rep, std::uint64_t stream = 0);

/// Uniform draw on the open interval (0, 1).
double uniform_open(Rng& rng);

enum class CensoringKind { kNone, kUniform, kExponential, kCalibratedUniform };

struct CensoringSpec {
    CensoringKind kind = CensoringKind::kCalibratedUniform;
    double parameter = 0.0;    // upper bound c of uniform(0, c), or the exponential rate
    double target_rate = 0.3;  // for kCalibratedUniform
};

/**
 * Subdistribution model of both simulation designs:
 *
 *   P(T <= t, cause 1 | Z) = 1 - [1 - p (1 - exp(-t))]^{exp(beta1'Z)}
 *   T | cause 2, Z ~ Exp(rate exp(beta2'Z))
 */
struct EventModel {
    Vector beta1;
    Vector beta2;
    double mixture_p = 0.6;

    /// P(cause 1 | Z).
    [[nodiscard]] double cause1_probability(double lin1) const;
    /// Cause-1 time solving F1(t | Z) = u P(cause 1 | Z).
    [[nodiscard]] double cause1_time(double lin1, double u) const;
    /// (time, cause) for one subject with covariates z.
    [[nodiscard]] std::pair<double, int> draw(const Eigen::Ref<const Vector>& z, Rng& rng) const;
};

struct Setup1Config {
    int n = 200;
    int p = 300;
    Vector beta1;  // empty: 0.5 on the first two coordinates
    Vector beta2;  // empty: alternating -0.5, +0.5 (p must be even)
    double mixture_p = 0.6;
    CensoringSpec censoring;
    std::uint64_t seed = 1;
};

struct Setup2Config {
    int n = 500;
    int p = 1000;
    std::vector<int> block_sizes{4, 4, 8};  // the remaining covariates form an independent block
    std::vector<double> block_rho{0.5, 0.35, 0.05};
    Vector beta1;  // empty: 0.5 on 1-8, -0.5 on 9-12
    Vector beta2;  // empty: 0.5 on 1-4 and 13-16, -0.5 on 5-8
    double mixture_p = 0.6;
    CensoringSpec censoring;
    std::uint64_t seed = 1;
};

Vector setup1_beta1(int p);
Vector setup1_beta2(int p);
Vector setup2_beta1(int p);
Vector setup2_beta2(int p);

/// Draws the covariate matrix of each design.
Matrix setup1_covariates(int n, int p, Rng& rng);
Matrix setup2_covariates(int n, int p, const std::vector<int>& block_sizes, const std::vector<double>& block_rho,
                         Rng& rng);

EventModel setup1_model(const Setup1Config& cfg);
EventModel setup2_model(const Setup2Config& cfg);

/**
 * Upper bound c of uniform(0, c) censoring giving censoring probability
 * `target`, found by bisection on a fixed-seed pilot sample of event times.
 */
double calibrate_uniform_censoring(const std::vector<double>& pilot_times, double target);

/// Pilot event times for calibration (deterministic for a given design).
std::vector<double> pilot_event_times_setup1(const Setup1Config& cfg, int size = 20000);
std::vector<double> pilot_event_times_setup2(const Setup2Config& cfg, int size = 20000);

/// A concrete censoring law: kind is kNone, kUniform or kExponential.
CensoringSpec resolve_censoring(const Setup1Config& cfg);
CensoringSpec resolve_censoring(const Setup2Config& cfg);

/// Combines covariates, event draws and a resolved censoring law into a dataset.
CompetingRisksData simulate(const Matrix& z, const EventModel& model, const CensoringSpec& censoring, Rng& rng);

CompetingRisksData gen_setup1(const Setup1Config& cfg);
CompetingRisksData gen_setup2(const Setup2Config& cfg);

} // namespace fgray
