#include "bvm/stats.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace bvm {

void RunningStats::merge(const RunningStats& other) noexcept {
    if (other.n_ == 0) return;
    if (n_ == 0) {
        *this = other;
        return;
    }
    const double na = static_cast<double>(n_);
    const double nb = static_cast<double>(other.n_);
    const double delta = other.mean_ - mean_;
    const double n = na + nb;
    mean_ += delta * nb / n;
    m2_ += other.m2_ + delta * delta * na * nb / n;
    n_ += other.n_;
}

std::optional<double> RunningStats::se() const noexcept {
    if (n_ < 2) return std::nullopt;
    return std::sqrt(variance() / static_cast<double>(n_));
}

Estimate estimate(std::span<const double> xs) {
    RunningStats s;
    for (double x : xs) s.add(x);
    return {s.mean(), s.se_or_zero(), s.count()};
}

double combined_se(const Estimate& a, const Estimate& b) {
    return std::sqrt(a.se * a.se + b.se * b.se);
}

bool agree_within(const Estimate& a, const Estimate& b, double k) {
    return std::abs(a.mean - b.mean) <= k * combined_se(a, b);
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("ks_statistic: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double t = std::min(a[i], b[j]);
        if (std::isinf(t)) break;  // censored tails agree at +inf
        while (i < a.size() && a[i] == t) ++i;
        while (j < b.size() && b[j] == t) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    // One sample may be exhausted before the other reaches its censored tail.
    while (i < a.size() && !std::isinf(a[i])) {
        ++i;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    while (j < b.size() && !std::isinf(b[j])) {
        ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

ChiSquareResult chi_square_two_sample(std::span<const std::uint64_t> a,
                                      std::span<const std::uint64_t> b) {
    if (a.size() != b.size()) throw std::invalid_argument("chi_square_two_sample: size mismatch");
    double na = 0.0, nb = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        na += static_cast<double>(a[k]);
        nb += static_cast<double>(b[k]);
    }
    if (na == 0.0 || nb == 0.0) throw std::invalid_argument("chi_square_two_sample: empty sample");
    const double ka = std::sqrt(nb / na);
    const double kb = std::sqrt(na / nb);
    ChiSquareResult r;
    int used = 0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double x = static_cast<double>(a[k]);
        const double y = static_cast<double>(b[k]);
        if (x + y == 0.0) continue;
        const double diff = ka * x - kb * y;
        r.statistic += diff * diff / (x + y);
        ++used;
    }
    r.dof = std::max(used - 1, 1);
    boost::math::chi_squared dist(r.dof);
    r.p_value = boost::math::cdf(boost::math::complement(dist, r.statistic));
    return r;
}

}  // namespace bvm
