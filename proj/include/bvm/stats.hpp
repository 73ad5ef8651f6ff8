#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace bvm {

/// Welford accumulator for mean and sample variance.
class RunningStats {
public:
    void add(double x) noexcept {
        ++n_;
        const double delta = x - mean_;
        mean_ += delta / static_cast<double>(n_);
        m2_ += delta * (x - mean_);
    }

    void merge(const RunningStats& other) noexcept;

    std::size_t count() const noexcept { return n_; }
    double mean() const noexcept { return mean_; }
    /// Sample variance; zero below two observations.
    double variance() const noexcept { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
    /// Standard error of the mean; empty below two observations.
    std::optional<double> se() const noexcept;
    double se_or_zero() const noexcept { return se().value_or(0.0); }

private:
    std::size_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

struct Estimate {
    double mean = 0.0;
    double se = 0.0;
    std::size_t n = 0;
};

Estimate estimate(std::span<const double> xs);

/// sqrt(a.se^2 + b.se^2) for independent estimates.
double combined_se(const Estimate& a, const Estimate& b);

/// True when |a - b| <= k * combined_se(a, b).
bool agree_within(const Estimate& a, const Estimate& b, double k = 3.0);

/// Two-sample Kolmogorov-Smirnov statistic sup_t |F_a(t) - F_b(t)|.
/// Infinite entries are allowed and act as right-censored values.
double ks_statistic(std::vector<double> a, std::vector<double> b);

/// Kolmogorov-Smirnov statistic of a sample against a continuous CDF.
template <class Cdf>
double ks_statistic_cdf(std::vector<double> a, Cdf cdf);

struct ChiSquareResult {
    double statistic = 0.0;
    int dof = 0;
    double p_value = 1.0;
};

/// Two-sample chi-square homogeneity test on paired category counts.
/// Categories empty in both samples are dropped.
ChiSquareResult chi_square_two_sample(std::span<const std::uint64_t> a,
                                      std::span<const std::uint64_t> b);

}  // namespace bvm

#include <algorithm>
#include <cmath>

namespace bvm {

template <class Cdf>
double ks_statistic_cdf(std::vector<double> a, Cdf cdf) {
    std::sort(a.begin(), a.end());
    const double n = static_cast<double>(a.size());
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double f = cdf(a[i]);
        d = std::max({d, std::abs(static_cast<double>(i + 1) / n - f),
                      std::abs(f - static_cast<double>(i) / n)});
    }
    return d;
}

}  // namespace bvm
