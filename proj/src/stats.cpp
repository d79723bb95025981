#include "condseg/stats.hpp"

#include <cmath>
#include <limits>

#include "condseg/error.hpp"

namespace condseg {

namespace {

// Continued fraction for the incomplete beta function, modified Lentz.
double beta_cont_frac(double a, double b, double x) {
    constexpr int kMaxIter = 500;
    constexpr double kEps = 1e-16;
    constexpr double kTiny = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;

    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;

    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        // even step
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        // odd step
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) throw InputError("incomplete beta requires a, b > 0");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;

    const double ln_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);

    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * beta_cont_frac(a, b, x) / a;
    }
    return 1.0 - front * beta_cont_frac(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double df) {
    if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
    if (std::isinf(t)) return 0.0;
    if (t == 0.0) return 1.0;
    const double x = df / (df + t * t);
    return regularized_incomplete_beta(0.5 * df, 0.5, x);
}

TTestResult paired_ttest(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw InputError("paired_ttest: sample length mismatch");
    const size_t n = a.size();
    if (n < 2) throw InputError("paired_ttest: need at least 2 pairs");

    double mean_d = 0.0;
    for (size_t i = 0; i < n; ++i) mean_d += a[i] - b[i];
    mean_d /= static_cast<double>(n);

    double ss = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double r = (a[i] - b[i]) - mean_d;
        ss += r * r;
    }
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));

    TTestResult res;
    res.df = static_cast<long>(n) - 1;
    if (sd == 0.0) {
        if (mean_d == 0.0) {
            res.t = 0.0;
            res.p = 1.0;
        } else {
            res.t = mean_d > 0 ? std::numeric_limits<double>::infinity()
                               : -std::numeric_limits<double>::infinity();
            res.p = 0.0;
        }
        return res;
    }
    res.t = mean_d / (sd / std::sqrt(static_cast<double>(n)));
    res.p = student_t_two_sided_p(res.t, static_cast<double>(res.df));
    return res;
}

ComparisonDecision bonferroni_decide(double p_value, int family_size, double alpha) {
    if (family_size < 1) throw InputError("bonferroni_decide: family_size must be >= 1");
    if (p_value < 0.0 || p_value > 1.0) throw InputError("bonferroni_decide: p outside [0,1]");
    ComparisonDecision d;
    d.p_value = p_value;
    d.family_size = family_size;
    d.alpha = alpha;
    d.corrected_alpha = alpha / family_size;
    d.significant = p_value < d.corrected_alpha;
    return d;
}

std::pair<double, double> mean_and_sample_std(const std::vector<double>& values) {
    if (values.empty()) throw InputError("mean_and_sample_std: empty input");
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    if (values.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

}  // namespace condseg
