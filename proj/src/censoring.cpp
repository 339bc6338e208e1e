#include "fgray/censoring.hpp"
#include "fgray/error.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

namespace fgray {

double StepSurvival::operator()(double t) const
{
    const auto it = std::upper_bound(jump_times.begin(), jump_times.end(), t);
    if (it == jump_times.begin()) return 1.0;
    return values[static_cast<std::size_t>(it - jump_times.begin()) - 1];
}

StepSurvival km_censoring(const CompetingRisksData& data)
{
    const int n = data.n();
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return data.times[a] < data.times[b]; });

    StepSurvival g;
    double surv = 1.0;
    int pos = 0;
    while (pos < n) {
        const double u = data.times[order[pos]];
        const int at_risk = n - pos;
        int censored = 0;
        int end = pos;
        while (end < n && data.times[order[end]] == u) {
            if (data.status[order[end]] == kCensored) ++censored;
            ++end;
        }
        if (censored > 0) {
            surv *= 1.0 - static_cast<double>(censored) / static_cast<double>(at_risk);
            g.jump_times.push_back(u);
            g.values.push_back(surv);
        }
        pos = end;
    }
    return g;
}

int RiskGrid::total_events() const
{
    return std::accumulate(event_counts.begin(), event_counts.end(), 0);
}

RiskGrid build_risk_grid(const CompetingRisksData& data, const StepSurvival& g_hat)
{
    const int n = data.n();
    RiskGrid grid;

    std::vector<double> ev;
    std::vector<double> cens;
    for (int i = 0; i < n; ++i) {
        if (data.times[i] > data.horizon) continue;
        if (data.status[i] == kCause1) ev.push_back(data.times[i]);
        if (data.status[i] == kCensored) cens.push_back(data.times[i]);
    }
    std::sort(ev.begin(), ev.end());
    std::sort(cens.begin(), cens.end());
    for (double t : ev) {
        if (grid.event_times.empty() || grid.event_times.back() != t) {
            grid.event_times.push_back(t);
            grid.event_counts.push_back(0);
        }
        ++grid.event_counts.back();
    }
    for (double t : cens) {
        if (grid.censor_times.empty() || grid.censor_times.back() != t) {
            grid.censor_times.push_back(t);
            grid.censor_counts.push_back(0);
        }
        ++grid.censor_counts.back();
    }

    const int K = grid.size();
    grid.weights = Matrix::Zero(n, K);
    grid.at_risk = FlagMatrix::Zero(n, K);
    grid.event_index.assign(n, -1);

    std::vector<double> g_grid(K);
    for (int k = 0; k < K; ++k) g_grid[k] = g_hat(grid.event_times[k]);

    for (int i = 0; i < n; ++i) {
        const double x = data.times[i];
        if (data.status[i] == kCause1 && x <= data.horizon) {
            const auto it = std::lower_bound(grid.event_times.begin(), grid.event_times.end(), x);
            grid.event_index[i] = static_cast<int>(it - grid.event_times.begin());
        }
        // grid times are sorted: the first block has t_k <= X_i
        int k = 0;
        for (; k < K && grid.event_times[k] <= x; ++k) {
            grid.weights(i, k) = 1.0;
            grid.at_risk(i, k) = 1;
        }
        if (data.status[i] != kCause2 || k == K) continue;
        const double g_x = g_hat(x);
        if (!(g_x > 0.0)) {
            throw DataError("degenerate IPCW weight: censoring survival is 0 at the cause-2 time " +
                            format_double(x) + " of subject " + std::to_string(i + 1) +
                            "; lower the horizon t*");
        }
        for (; k < K; ++k) {
            grid.weights(i, k) = g_grid[k] / g_x;
            grid.at_risk(i, k) = 1;
        }
    }

    std::vector<double> sorted_times = data.times;
    std::sort(sorted_times.begin(), sorted_times.end());
    grid.pi_hat.resize(grid.censor_times.size());
    for (std::size_t m = 0; m < grid.censor_times.size(); ++m) {
        const auto first = std::lower_bound(sorted_times.begin(), sorted_times.end(), grid.censor_times[m]);
        grid.pi_hat[m] = static_cast<double>(sorted_times.end() - first) / static_cast<double>(n);
    }
    return grid;
}

RiskGrid make_risk_grid(const CompetingRisksData& data)
{
    return build_risk_grid(data, km_censoring(data));
}

void dump_weights_csv(const RiskGrid& grid, const std::string& path)
{
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << "subject";
    for (double t : grid.event_times) out << ",t=" << format_double(t);
    out << '\n';
    for (int i = 0; i < grid.n(); ++i) {
        out << (i + 1);
        for (int k = 0; k < grid.size(); ++k) out << ',' << format_double(grid.weights(i, k));
        out << '\n';
    }
}

} // namespace fgray
