#include "dlev/stats.hpp"

#include "dlev/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

namespace dlev {

double mean(std::span<const double> xs) {
    if (xs.empty()) throw ValidationError("mean of an empty series");
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double variance(std::span<const double> xs) {
    const double m = mean(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return ss / static_cast<double>(xs.size());
}

double student_t_two_tailed_p(double t, double dof) {
    if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
    if (std::isinf(t)) return 0.0;
    if (!(dof > 0.0)) throw NumericalError("t-test needs positive degrees of freedom");
    const boost::math::students_t dist(dof);
    const double p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
    return std::clamp(p, 0.0, 1.0);
}

CorrelationResult pearson(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw ValidationError("correlation series differ in length");
    const std::size_t n = xs.size();
    if (n < 3) throw ValidationError("correlation needs at least 3 points");

    const double mx = mean(xs);
    const double my = mean(ys);
    double sxx = 0.0;
    double syy = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = xs[i] - mx;
        const double dy = ys[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    // sums of squares of a constant series can round to tiny nonzero values
    auto constant = [](std::span<const double> v) {
        const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
        return *lo == *hi;
    };
    if (sxx == 0.0 || syy == 0.0 || constant(xs) || constant(ys)) {
        throw NumericalError("correlation undefined for a constant series");
    }

    CorrelationResult r;
    r.n = n;
    r.coefficient = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    const double denom = 1.0 - r.coefficient * r.coefficient;
    if (denom <= 0.0) {
        r.p_value = 0.0;
    } else {
        const double t = r.coefficient * std::sqrt(static_cast<double>(n - 2) / denom);
        r.p_value = student_t_two_tailed_p(t, static_cast<double>(n - 2));
    }
    return r;
}

std::vector<double> average_ranks(std::span<const double> xs) {
    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    std::vector<double> ranks(xs.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

CorrelationResult spearman(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw ValidationError("correlation series differ in length");
    const auto rx = average_ranks(xs);
    const auto ry = average_ranks(ys);
    return pearson(rx, ry);
}

WelchResult welch_t_test(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw ValidationError("t-test group is empty");
    WelchResult r;
    r.n_a = a.size();
    r.n_b = b.size();
    r.mean_a = mean(a);
    r.mean_b = mean(b);

    auto sample_var = [](std::span<const double> xs, double m) {
        if (xs.size() < 2) return 0.0;
        double ss = 0.0;
        for (double x : xs) ss += (x - m) * (x - m);
        return ss / static_cast<double>(xs.size() - 1);
    };
    const double va = sample_var(a, r.mean_a) / static_cast<double>(r.n_a);
    const double vb = sample_var(b, r.mean_b) / static_cast<double>(r.n_b);
    const double se2 = va + vb;
    const double diff = r.mean_a - r.mean_b;

    if (se2 == 0.0) {
        r.t = diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
        r.dof = static_cast<double>(r.n_a + r.n_b - 2);
        r.p_value = diff == 0.0 ? 1.0 : 0.0;
        return r;
    }
    r.t = diff / std::sqrt(se2);
    double dof_den = 0.0;
    if (r.n_a > 1) dof_den += va * va / static_cast<double>(r.n_a - 1);
    if (r.n_b > 1) dof_den += vb * vb / static_cast<double>(r.n_b - 1);
    r.dof = dof_den > 0.0 ? se2 * se2 / dof_den : 1.0;
    r.p_value = student_t_two_tailed_p(r.t, r.dof);
    return r;
}

} // namespace dlev
