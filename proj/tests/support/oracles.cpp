#include "support/oracles.hpp"

#include <algorithm>
#include <stdexcept>
#include <cmath>
#include <numeric>

namespace epimob::testing {

std::vector<SeirPoint> seir_euler_daily(SeirPoint x, double beta, double sigma, double gamma, int days, int per_day) {
    const double h = 1.0 / per_day;
    const double n = x.s + x.e + x.i + x.r;
    std::vector<SeirPoint> out{x};
    for (int d = 0; d < days; ++d) {
        for (int k = 0; k < per_day; ++k) {
            const double inf = beta * h * x.s * x.i / n;
            const double inc = sigma * h * x.e;
            const double rec = gamma * h * x.i;
            x = SeirPoint{x.s - inf, x.e + inf - inc, x.i + inc - rec, x.r + rec};
        }
        out.push_back(x);
    }
    return out;
}

double percentile(std::vector<double> xs, double q) {
    std::sort(xs.begin(), xs.end());
    const double pos = q * static_cast<double>(xs.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, xs.size() - 1);
    return xs[lo] + (pos - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

double mann_whitney_less_p(const std::vector<double>& lo, const std::vector<double>& hi) {
    struct Item {
        double v;
        bool from_lo;
    };
    std::vector<Item> all;
    for (double v : lo) all.push_back({v, true});
    for (double v : hi) all.push_back({v, false});
    std::sort(all.begin(), all.end(), [](const Item& a, const Item& b) { return a.v < b.v; });
    const double n1 = static_cast<double>(lo.size());
    const double n2 = static_cast<double>(hi.size());
    const double n = n1 + n2;
    double rank_sum_lo = 0.0;
    double tie_term = 0.0;
    for (std::size_t i = 0; i < all.size();) {
        std::size_t j = i;
        while (j < all.size() && all[j].v == all[i].v) ++j;
        const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        const double t = static_cast<double>(j - i);
        tie_term += t * t * t - t;
        for (std::size_t k = i; k < j; ++k)
            if (all[k].from_lo) rank_sum_lo += avg_rank;
        i = j;
    }
    const double u = rank_sum_lo - n1 * (n1 + 1) / 2.0;
    const double mean = n1 * n2 / 2.0;
    const double var = n1 * n2 / 12.0 * ((n + 1) - tie_term / (n * (n - 1)));
    if (var <= 0) return 1.0;
    const double z = (u - mean + 0.5) / std::sqrt(var); // continuity correction toward H0
    return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

double wilcoxon_signed_rank_less_p(const std::vector<double>& lo, const std::vector<double>& hi) {
    if (lo.size() != hi.size()) throw std::invalid_argument("paired samples differ in size");
    struct Diff {
        double abs;
        bool positive;
    };
    std::vector<Diff> d;
    for (std::size_t i = 0; i < lo.size(); ++i) {
        const double x = hi[i] - lo[i];
        if (x != 0.0) d.push_back({std::abs(x), x > 0.0});
    }
    std::sort(d.begin(), d.end(), [](const Diff& a, const Diff& b) { return a.abs < b.abs; });
    const double n = static_cast<double>(d.size());
    if (d.empty()) return 1.0;
    double w_plus = 0.0;
    double tie_term = 0.0;
    for (std::size_t i = 0; i < d.size();) {
        std::size_t j = i;
        while (j < d.size() && d[j].abs == d[i].abs) ++j;
        const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        const double t = static_cast<double>(j - i);
        tie_term += t * t * t - t;
        for (std::size_t k = i; k < j; ++k)
            if (d[k].positive) w_plus += avg_rank;
        i = j;
    }
    const double mean = n * (n + 1) / 4.0;
    const double var = n * (n + 1) * (2 * n + 1) / 24.0 - tie_term / 48.0;
    if (var <= 0) return 1.0;
    const double z = (w_plus - mean - 0.5) / std::sqrt(var);
    return 0.5 * std::erfc(z / std::sqrt(2.0));
}

} // namespace epimob::testing
