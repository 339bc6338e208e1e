#include "fgray/simgen.hpp"
#include "fgray/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fgray {

namespace {

constexpr std::uint64_t kPilotSeed = 0x70696c6f74ULL;

void check_common(int n, int p, double mixture_p)
{
    if (n < 1 || p < 1) throw DataError("simulation needs n >= 1 and p >= 1");
    if (!(mixture_p > 0.0 && mixture_p < 1.0)) throw DataError("mixture_p must lie in (0, 1)");
}

Vector or_default(const Vector& given, int p, Vector (*fallback)(int), const char* name)
{
    if (given.size() == 0) return fallback(p);
    if (given.size() != p) {
        throw DataError(std::string(name) + " has length " + std::to_string(given.size()) + ", expected " +
                        std::to_string(p));
    }
    return given;
}

double draw_censoring(const CensoringSpec& spec, Rng& rng)
{
    switch (spec.kind) {
    case CensoringKind::kNone:
        return std::numeric_limits<double>::infinity();
    case CensoringKind::kUniform:
        return spec.parameter * uniform_open(rng);
    case CensoringKind::kExponential:
        return -std::log(uniform_open(rng)) / spec.parameter;
    case CensoringKind::kCalibratedUniform:
        break;
    }
    throw DataError("censoring law must be resolved before simulating");
}

void check_resolved(const CensoringSpec& spec)
{
    if (spec.kind == CensoringKind::kUniform && !(spec.parameter > 0.0)) {
        throw DataError("uniform censoring bound must be positive");
    }
    if (spec.kind == CensoringKind::kExponential && !(spec.parameter > 0.0)) {
        throw DataError("exponential censoring rate must be positive");
    }
}

CensoringSpec resolve_with(const CensoringSpec& spec, const std::vector<double>& pilot)
{
    if (spec.kind != CensoringKind::kCalibratedUniform) {
        check_resolved(spec);
        return spec;
    }
    CensoringSpec out;
    out.kind = CensoringKind::kUniform;
    out.parameter = calibrate_uniform_censoring(pilot, spec.target_rate);
    out.target_rate = spec.target_rate;
    return out;
}

} // namespace

Rng replicate_rng(std::uint64_t seed, std::uint64_t rep, std::uint64_t stream)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(rep), static_cast<std::uint32_t>(rep >> 32),
                      static_cast<std::uint32_t>(stream)};
    return Rng(seq);
}

double uniform_open(Rng& rng)
{
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

double EventModel::cause1_probability(double lin1) const
{
    return -std::expm1(std::exp(lin1) * std::log1p(-mixture_p));
}

double EventModel::cause1_time(double lin1, double u) const
{
    // 1 - [1 - p(1 - e^{-t})]^e = u P1  =>  1 - e^{-t} = (1 - (1 - u P1)^{1/e}) / p
    const double e = std::exp(lin1);
    const double target = u * cause1_probability(lin1);
    const double x = -std::expm1(std::log1p(-target) / e);
    return -std::log1p(-x / mixture_p);
}

std::pair<double, int> EventModel::draw(const Eigen::Ref<const Vector>& z, Rng& rng) const
{
    const double lin1 = beta1.dot(z);
    const double u_cause = uniform_open(rng);
    const double u_time = uniform_open(rng);
    if (u_cause < cause1_probability(lin1)) return {cause1_time(lin1, u_time), kCause1};
    const double rate = std::exp(beta2.dot(z));
    return {-std::log(u_time) / rate, kCause2};
}

Vector setup1_beta1(int p)
{
    if (p < 2) throw DataError("setup 1 needs p >= 2");
    Vector b = Vector::Zero(p);
    b[0] = b[1] = 0.5;
    return b;
}

Vector setup1_beta2(int p)
{
    if (p % 2 != 0) throw DataError("setup 1 with odd p needs an explicit beta2");
    Vector b(p);
    for (int j = 0; j < p; ++j) b[j] = j % 2 == 0 ? -0.5 : 0.5;
    return b;
}

Vector setup2_beta1(int p)
{
    if (p < 12) throw DataError("setup 2 needs p >= 12");
    Vector b = Vector::Zero(p);
    b.head(8).setConstant(0.5);
    b.segment(8, 4).setConstant(-0.5);
    return b;
}

Vector setup2_beta2(int p)
{
    if (p < 16) throw DataError("setup 2 needs p >= 16 for the default beta2");
    Vector b = Vector::Zero(p);
    b.head(4).setConstant(0.5);
    b.segment(4, 4).setConstant(-0.5);
    b.segment(12, 4).setConstant(0.5);
    return b;
}

Matrix setup1_covariates(int n, int p, Rng& rng)
{
    std::normal_distribution<double> normal;
    Matrix z(n, p);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < p; ++j) z(i, j) = normal(rng);
    }
    return z;
}

Matrix setup2_covariates(int n, int p, const std::vector<int>& block_sizes, const std::vector<double>& block_rho,
                         Rng& rng)
{
    if (block_sizes.size() != block_rho.size()) throw DataError("one correlation per block is required");
    int used = 0;
    for (std::size_t b = 0; b < block_sizes.size(); ++b) {
        if (block_sizes[b] < 1) throw DataError("block sizes must be positive");
        if (!(block_rho[b] >= 0.0 && block_rho[b] < 1.0)) throw DataError("block correlations must lie in [0, 1)");
        used += block_sizes[b];
    }
    if (used > p) throw DataError("block sizes exceed p");

    std::normal_distribution<double> normal;
    Matrix z(n, p);
    for (int i = 0; i < n; ++i) {
        int j = 0;
        for (std::size_t b = 0; b < block_sizes.size(); ++b) {
            const double shared = normal(rng);
            const double a = std::sqrt(block_rho[b]);
            const double e = std::sqrt(1.0 - block_rho[b]);
            for (int m = 0; m < block_sizes[b]; ++m, ++j) z(i, j) = a * shared + e * normal(rng);
        }
        for (; j < p; ++j) z(i, j) = normal(rng);
    }
    return z;
}

EventModel setup1_model(const Setup1Config& cfg)
{
    check_common(cfg.n, cfg.p, cfg.mixture_p);
    return {or_default(cfg.beta1, cfg.p, setup1_beta1, "beta1"), or_default(cfg.beta2, cfg.p, setup1_beta2, "beta2"),
            cfg.mixture_p};
}

EventModel setup2_model(const Setup2Config& cfg)
{
    check_common(cfg.n, cfg.p, cfg.mixture_p);
    return {or_default(cfg.beta1, cfg.p, setup2_beta1, "beta1"), or_default(cfg.beta2, cfg.p, setup2_beta2, "beta2"),
            cfg.mixture_p};
}

double calibrate_uniform_censoring(const std::vector<double>& pilot_times, double target)
{
    if (!(target > 0.0 && target < 1.0)) throw DataError("target censoring rate must lie in (0, 1)");
    if (pilot_times.empty()) throw DataError("empty pilot sample");

    // P(C < T) for C ~ U(0, c) is E[min(T, c)] / c, decreasing in c
    const auto rate = [&](double c) {
        double sum = 0.0;
        for (double t : pilot_times) sum += std::min(t, c);
        return sum / (c * static_cast<double>(pilot_times.size()));
    };
    double lo = 1e-8;
    double hi = 1.0;
    while (rate(hi) > target) {
        hi *= 2.0;
        if (hi > 1e12) throw DataError("censoring calibration failed: target rate too low for this design");
    }
    for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (rate(mid) > target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

std::vector<double> pilot_event_times_setup1(const Setup1Config& cfg, int size)
{
    const auto model = setup1_model(cfg);
    Rng rng = replicate_rng(kPilotSeed, 0);
    const Matrix z = setup1_covariates(size, cfg.p, rng);
    std::vector<double> times(size);
    for (int i = 0; i < size; ++i) times[i] = model.draw(z.row(i).transpose(), rng).first;
    return times;
}

std::vector<double> pilot_event_times_setup2(const Setup2Config& cfg, int size)
{
    const auto model = setup2_model(cfg);
    Rng rng = replicate_rng(kPilotSeed, 0);
    const Matrix z = setup2_covariates(size, cfg.p, cfg.block_sizes, cfg.block_rho, rng);
    std::vector<double> times(size);
    for (int i = 0; i < size; ++i) times[i] = model.draw(z.row(i).transpose(), rng).first;
    return times;
}

CensoringSpec resolve_censoring(const Setup1Config& cfg)
{
    if (cfg.censoring.kind != CensoringKind::kCalibratedUniform) return resolve_with(cfg.censoring, {});
    return resolve_with(cfg.censoring, pilot_event_times_setup1(cfg));
}

CensoringSpec resolve_censoring(const Setup2Config& cfg)
{
    if (cfg.censoring.kind != CensoringKind::kCalibratedUniform) return resolve_with(cfg.censoring, {});
    return resolve_with(cfg.censoring, pilot_event_times_setup2(cfg));
}

CompetingRisksData simulate(const Matrix& z, const EventModel& model, const CensoringSpec& censoring, Rng& rng)
{
    check_resolved(censoring);
    const auto n = static_cast<int>(z.rows());
    CompetingRisksData data;
    data.covariates = z;
    data.times.resize(n);
    data.status.resize(n);
    for (int i = 0; i < n; ++i) {
        const auto [t, cause] = model.draw(z.row(i).transpose(), rng);
        const double c = draw_censoring(censoring, rng);
        if (c < t) {
            data.times[i] = c;
            data.status[i] = kCensored;
        } else {
            data.times[i] = t;
            data.status[i] = cause;
        }
    }
    data.horizon = default_horizon(data);
    return data;
}

CompetingRisksData gen_setup1(const Setup1Config& cfg)
{
    const auto model = setup1_model(cfg);
    const auto censoring = resolve_censoring(cfg);
    Rng rng = replicate_rng(cfg.seed, 0);
    const Matrix z = setup1_covariates(cfg.n, cfg.p, rng);
    return simulate(z, model, censoring, rng);
}

CompetingRisksData gen_setup2(const Setup2Config& cfg)
{
    const auto model = setup2_model(cfg);
    const auto censoring = resolve_censoring(cfg);
    Rng rng = replicate_rng(cfg.seed, 0);
    const Matrix z = setup2_covariates(cfg.n, cfg.p, cfg.block_sizes, cfg.block_rho, rng);
    return simulate(z, model, censoring, rng);
}

} // namespace fgray
