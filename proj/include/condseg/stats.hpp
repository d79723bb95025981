#pragma once

#include <utility>
#include <vector>

namespace condseg {

// Regularized incomplete beta function I_x(a, b), continued-fraction
// evaluation (modified Lentz). Absolute accuracy well below 1e-10 over the
// parameter ranges used here.
double regularized_incomplete_beta(double a, double b, double x);

// Two-sided tail probability of Student's t with df degrees of freedom:
// p = I_{df/(df+t^2)}(df/2, 1/2).
double student_t_two_sided_p(double t, double df);

struct TTestResult {
    double t = 0.0;
    double p = 1.0;
    long df = 0;
};

// Paired two-sided t-test on equal-length samples. Degenerate cases with
// zero-variance differences: p = 1 when the mean difference is also zero,
// p = 0 otherwise.
TTestResult paired_ttest(const std::vector<double>& a, const std::vector<double>& b);

struct ComparisonDecision {
    double p_value = 1.0;
    int family_size = 8;
    double alpha = 0.05;
    double corrected_alpha = 0.00625;
    bool significant = false;
};

ComparisonDecision bonferroni_decide(double p_value, int family_size = 8, double alpha = 0.05);

// Mean and sample (n-1) standard deviation; std is 0 for n < 2.
std::pair<double, double> mean_and_sample_std(const std::vector<double>& values);

}  // namespace condseg
