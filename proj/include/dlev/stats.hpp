#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace dlev {

struct CorrelationResult {
    double coefficient = 0.0;
    double p_value = 1.0; // two-tailed
    std::size_t n = 0;
};

// Sample Pearson r with p-value from t = r sqrt((n-2)/(1-r^2)) on n-2 degrees of freedom.
// Throws NumericalError when either series is constant; needs n >= 3.
CorrelationResult pearson(std::span<const double> xs, std::span<const double> ys);

// Pearson on average ranks (ties share the mean of their positions, 1-based).
CorrelationResult spearman(std::span<const double> xs, std::span<const double> ys);

std::vector<double> average_ranks(std::span<const double> xs);

// Two-tailed p-value of a Student-t statistic.
double student_t_two_tailed_p(double t, double dof);

struct WelchResult {
    double mean_a = 0.0;
    double mean_b = 0.0;
    std::size_t n_a = 0;
    std::size_t n_b = 0;
    double t = 0.0;
    double dof = 0.0;
    double p_value = 1.0;
};

// Unequal-variance two-sample t-test.
WelchResult welch_t_test(std::span<const double> a, std::span<const double> b);

double mean(std::span<const double> xs);
// Population variance.
double variance(std::span<const double> xs);

} // namespace dlev
