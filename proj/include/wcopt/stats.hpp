#pragma once

#include "core.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace wcopt {

// Inverse standard normal CDF (Acklam's rational approximation, ~1e-9 relative).
inline double normal_quantile(double q) {
    require_arg(q > 0.0 && q < 1.0, "normal_quantile: q must lie in (0,1)");
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                               1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                               6.680131188771972e+01,  -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                               -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                               3.754408661907416e+00};
    const double lo = 0.02425, hi = 1.0 - lo;
    if (q < lo) {
        double t = std::sqrt(-2.0 * std::log(q));
        return (((((c[0] * t + c[1]) * t + c[2]) * t + c[3]) * t + c[4]) * t + c[5]) /
               ((((d[0] * t + d[1]) * t + d[2]) * t + d[3]) * t + 1.0);
    }
    if (q > hi) return -normal_quantile(1.0 - q);
    double t = q - 0.5, r = t * t;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * t /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

// Two-sided z for a given confidence level, e.g. 0.99 -> 2.5758.
inline double two_sided_z(double confidence) { return normal_quantile(0.5 + 0.5 * confidence); }

inline double median(std::vector<double> v) {
    require_arg(!v.empty(), "median of empty sample");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Order statistic at 1-based rank ceil(level * n); no interpolation.
inline double order_quantile(std::vector<double> v, double level) {
    require_arg(!v.empty(), "quantile of empty sample");
    require_arg(level > 0.0 && level <= 1.0, "quantile level must lie in (0,1]");
    std::sort(v.begin(), v.end());
    auto k = static_cast<std::size_t>(std::ceil(level * static_cast<double>(v.size()) - 1e-12));
    k = std::clamp<std::size_t>(k, 1, v.size());
    return v[k - 1];
}

struct Estimate {
    double value = 0.0;
    double half_width = 0.0;
};

// Plain sample mean with normal-approximation half width.
inline Estimate mean_estimate(const std::vector<double>& x, double confidence) {
    require_arg(x.size() >= 2, "mean_estimate needs at least two samples");
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(x.size() - 1));
    return {mean, two_sided_z(confidence) * sd / std::sqrt(static_cast<double>(x.size()))};
}

// Median of block means. Half width uses the MAD of the block means scaled to a
// normal sd (1.4826), inflated by the asymptotic median/mean efficiency (1.2533).
inline Estimate median_of_block_means(const std::vector<double>& means, double confidence) {
    require_arg(means.size() >= 2, "median_of_means needs at least two blocks");
    const std::size_t k = means.size();
    const double med = median(means);
    std::vector<double> dev(k);
    for (std::size_t b = 0; b < k; ++b) dev[b] = std::abs(means[b] - med);
    const double mad = median(dev);
    const double hw = two_sided_z(confidence) * 1.2533 * 1.4826 * mad / std::sqrt(static_cast<double>(k));
    return {med, hw};
}

// Block b holds samples [b n / k, (b+1) n / k).
inline std::size_t block_of(std::size_t i, std::size_t n, std::size_t k) { return ((i + 1) * k - 1) / n; }

inline Estimate median_of_means(const std::vector<double>& x, int blocks, double confidence) {
    require_arg(blocks >= 2, "median_of_means needs at least two blocks");
    require_arg(x.size() >= static_cast<std::size_t>(blocks), "fewer samples than blocks");
    const std::size_t n = x.size(), k = static_cast<std::size_t>(blocks);
    std::vector<double> means(k, 0.0);
    for (std::size_t b = 0; b < k; ++b) {
        const std::size_t lo = b * n / k, hi = (b + 1) * n / k;
        double s = 0.0;
        for (std::size_t i = lo; i < hi; ++i) s += x[i];
        means[b] = s / static_cast<double>(hi - lo);
    }
    return median_of_block_means(means, confidence);
}

}  // namespace wcopt
