#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdlib>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "rcm/error.hpp"

namespace rcm::stats {

inline double mean(std::span<const double> x) {
    if (x.empty()) throw ArgumentError("stats", "mean of empty sample");
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

inline double variance(std::span<const double> x) {
    if (x.size() < 2) throw ArgumentError("stats", "variance needs two samples");
    const double m = mean(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return s / static_cast<double>(x.size() - 1);
}

/// Linear-interpolation quantile (the usual "type 7" definition).
inline double quantile(std::span<const double> x, double p) {
    if (x.empty()) throw ArgumentError("stats", "quantile of empty sample");
    if (!(p >= 0.0 && p <= 1.0)) throw ArgumentError("stats", "quantile level must be in [0, 1]");
    std::vector<double> s(x.begin(), x.end());
    std::sort(s.begin(), s.end());
    const double h = p * static_cast<double>(s.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, s.size() - 1);
    return s[lo] + (h - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

inline double median(std::span<const double> x) { return quantile(x, 0.5); }

/// Summary statistic selector: mean, median, or a quantile.
struct Statistic {
    enum class Kind { mean, median, quantile } kind = Kind::median;
    double level = 0.5;

    double operator()(std::span<const double> x) const {
        switch (kind) {
            case Kind::mean: return mean(x);
            case Kind::median: return median(x);
            case Kind::quantile: return quantile(x, level);
        }
        return 0.0;
    }

    std::string name() const {
        switch (kind) {
            case Kind::mean: return "mean";
            case Kind::median: return "median";
            case Kind::quantile: {
                std::string s = std::to_string(level);
                s.erase(s.find_last_not_of('0') + 1);
                if (!s.empty() && s.back() == '.') s.pop_back();
                return "q:" + s;
            }
        }
        return "";
    }

    /// Parses "mean", "median" or "q:P" with P in [0, 1].
    static Statistic parse(const std::string& text) {
        if (text == "mean") return {Kind::mean, 0.0};
        if (text == "median") return {Kind::median, 0.5};
        if (text.rfind("q:", 0) == 0) {
            char* end = nullptr;
            const double p = std::strtod(text.c_str() + 2, &end);
            if (end && *end == '\0' && p >= 0.0 && p <= 1.0 && text.size() > 2) return {Kind::quantile, p};
        }
        throw ArgumentError("stats", "unknown statistic '" + text + "' (use mean, median or q:P)");
    }
};

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
};

inline LineFit least_squares(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw ArgumentError("stats", "line fit needs two or more paired points");
    const double mx = mean(x);
    const double my = mean(y);
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0.0)) throw ArgumentError("stats", "degenerate fit: all abscissae equal");
    const double slope = sxy / sxx;
    if (!std::isfinite(slope)) throw ArgumentError("stats", "degenerate fit");
    return {slope, my - slope * mx};
}

/// Two-sample Kolmogorov-Smirnov distance sup |F_a - F_b|. The gap is kept
/// as an integer multiple of 1/(n_a n_b) so equal distances compare equal.
inline double ks_distance(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw ArgumentError("stats", "KS distance of an empty sample");
    std::vector<double> x(a.begin(), a.end());
    std::vector<double> y(b.begin(), b.end());
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    const auto na = static_cast<long long>(x.size());
    const auto nb = static_cast<long long>(y.size());
    std::size_t i = 0;
    std::size_t j = 0;
    long long gap = 0;
    while (i < x.size() && j < y.size()) {
        const double t = std::min(x[i], y[j]);
        while (i < x.size() && x[i] <= t) ++i;
        while (j < y.size() && y[j] <= t) ++j;
        gap = std::max(gap, std::llabs(static_cast<long long>(i) * nb - static_cast<long long>(j) * na));
    }
    return static_cast<double>(gap) / (static_cast<double>(na) * static_cast<double>(nb));
}

/// One-sample KS distance against a continuous CDF.
template <std::invocable<double> Cdf>
double ks_distance(std::span<const double> a, Cdf cdf) {
    if (a.empty()) throw ArgumentError("stats", "KS distance of an empty sample");
    std::vector<double> x(a.begin(), a.end());
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double f = cdf(x[i]);
        d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    }
    return d;
}

/// Asymptotic p-value of the KS statistic for effective sample size n.
inline double ks_p_value(double d, double n) {
    const double sn = std::sqrt(n);
    const double lambda = (sn + 0.12 + 0.11 / sn) * d;
    if (lambda < 1e-3) return 1.0;
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += (k % 2 ? 1.0 : -1.0) * term;
        if (term < 1e-16) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

inline bool strictly_decreasing(std::span<const double> x) {
    for (std::size_t i = 1; i < x.size(); ++i)
        if (!(x[i] < x[i - 1])) return false;
    return true;
}

inline bool weakly_decreasing(std::span<const double> x) {
    for (std::size_t i = 1; i < x.size(); ++i)
        if (x[i] > x[i - 1]) return false;
    return true;
}

inline bool strictly_increasing(std::span<const double> x) {
    for (std::size_t i = 1; i < x.size(); ++i)
        if (!(x[i] > x[i - 1])) return false;
    return true;
}

}  // namespace rcm::stats
