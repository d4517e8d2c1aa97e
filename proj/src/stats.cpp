#include "mergemeter/stats.hpp"

#include "mergemeter/error.hpp"
#include "mergemeter/numeric.hpp"

#include <cmath>
#include <limits>

namespace mergemeter {

namespace {

constexpr double kPi = 3.14159265358979323846;

// lgamma(n) - [(n - 0.5) ln n - n + 0.5 ln(2 pi)]
double stirlerr(double n) {
    if (n < 16.0) {
        return std::lgamma(n) - ((n - 0.5) * std::log(n) - n + 0.5 * std::log(2.0 * kPi));
    }
    const double nn = n * n;
    // 1/12n - 1/360n^3 + 1/1260n^5 - 1/1680n^7 + 1/1188n^9
    return (1.0 / 12.0 -
            (1.0 / 360.0 - (1.0 / 1260.0 - (1.0 / 1680.0 - 1.0 / 1188.0 / nn) / nn) / nn) / nn) /
           n;
}

// x ln(x/m) + m - x without cancellation when x is close to m (Loader's
// binomial-deviance evaluation).
double bd0(double x, double m) {
    if (std::fabs(x - m) < 0.1 * (x + m)) {
        const double v = (x - m) / (x + m);
        double s = (x - m) * v;
        double term = 2.0 * x * v;
        const double v2 = v * v;
        for (int j = 1; j < 1000; ++j) {
            term *= v2;
            const double s1 = s + term / (2 * j + 1);
            if (s1 == s) {
                return s1;
            }
            s = s1;
        }
    }
    return x * std::log(x / m) + m - x;
}

// log( x^a (1-x)^b / B(a, b) ); the cancellation-prone lgamma differences
// are folded into stirlerr and bd0 so the absolute error stays far below
// 1e-12 wherever the value is not already negligible.
double log_beta_kernel(double a, double b, double x) {
    const double n = a + b;
    return 0.5 * std::log(a * b / (2.0 * kPi * n)) + stirlerr(n) - stirlerr(a) - stirlerr(b) -
           bd0(a, n * x) - bd0(b, n * (1.0 - x));
}

// Modified Lentz evaluation of the standard continued fraction for
// I_x(a, b), valid for x below the (a+1)/(a+b+2) crossover.
double beta_continued_fraction(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kFloor = 1e-30;
    constexpr double kEps = 1e-15;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kFloor) {
        d = kFloor;
    }
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFloor) {
            d = kFloor;
        }
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFloor) {
            c = kFloor;
        }
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFloor) {
            d = kFloor;
        }
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFloor) {
            c = kFloor;
        }
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) <= kEps) {
            return h;
        }
    }
    fail_numeric("incomplete beta continued fraction did not converge within 300 iterations");
}

} // namespace

double regularized_incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) {
        fail_validation("regularized_incomplete_beta needs a > 0 and b > 0");
    }
    if (!(x >= 0.0) || !(x <= 1.0)) {
        fail_validation("regularized_incomplete_beta needs x in [0, 1]");
    }
    if (x == 0.0) {
        return 0.0;
    }
    if (x == 1.0) {
        return 1.0;
    }
    if (x > (a + 1.0) / (a + b + 2.0)) {
        return 1.0 - regularized_incomplete_beta(b, a, 1.0 - x);
    }
    const double log_kernel = log_beta_kernel(a, b, x);
    return std::exp(log_kernel) * beta_continued_fraction(a, b, x) / a;
}

CorrelationResult pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        fail_validation("pearson needs equally long inputs");
    }
    const size_t n = x.size();
    if (n < 3) {
        fail_validation("pearson needs at least 3 observations");
    }
    for (size_t i = 0; i < n; ++i) {
        if (!std::isfinite(x[i]) || !std::isfinite(y[i])) {
            fail_validation("pearson inputs must be finite");
        }
    }
    const double mx = pairwise_sum(x) / static_cast<double>(n);
    const double my = pairwise_sum(y) / static_cast<double>(n);
    const double sxx = pairwise_sum(n, [&](size_t i) { return (x[i] - mx) * (x[i] - mx); });
    const double syy = pairwise_sum(n, [&](size_t i) { return (y[i] - my) * (y[i] - my); });
    if (sxx == 0.0 || syy == 0.0) {
        fail_validation("pearson is undefined for constant input");
    }
    const double sxy = pairwise_sum(n, [&](size_t i) { return (x[i] - mx) * (y[i] - my); });

    CorrelationResult res;
    res.n = n;
    res.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    const double df = static_cast<double>(n - 2);
    if (std::fabs(res.r) >= 1.0) {
        res.t_stat = res.r > 0 ? std::numeric_limits<double>::infinity()
                               : -std::numeric_limits<double>::infinity();
        res.p_two_sided = 0.0;
        return res;
    }
    const double t2 = res.r * res.r * df / (1.0 - res.r * res.r);
    res.t_stat = std::copysign(std::sqrt(t2), res.r);
    res.p_two_sided = regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t2));
    return res;
}

AnovaResult anova_oneway(const std::vector<std::vector<double>> & groups) {
    if (groups.size() < 2) {
        fail_validation("anova_oneway needs at least 2 groups");
    }
    size_t n = 0;
    for (const auto & g : groups) {
        if (g.empty()) {
            fail_validation("anova_oneway groups must be non-empty");
        }
        for (double v : g) {
            if (!std::isfinite(v)) {
                fail_validation("anova_oneway values must be finite");
            }
        }
        n += g.size();
    }
    const size_t k = groups.size();
    if (n <= k) {
        fail_validation("anova_oneway needs more observations than groups");
    }

    const double grand =
        pairwise_sum(k, [&](size_t g) { return pairwise_sum(std::span<const double>(groups[g])); }) /
        static_cast<double>(n);
    std::vector<double> means(k);
    for (size_t g = 0; g < k; ++g) {
        means[g] = pairwise_sum(std::span<const double>(groups[g])) / static_cast<double>(groups[g].size());
    }
    const double ss_between = pairwise_sum(k, [&](size_t g) {
        const double d = means[g] - grand;
        return static_cast<double>(groups[g].size()) * d * d;
    });
    const double ss_within = pairwise_sum(k, [&](size_t g) {
        return pairwise_sum(groups[g].size(), [&](size_t i) {
            const double d = groups[g][i] - means[g];
            return d * d;
        });
    });

    AnovaResult res;
    res.df_between = k - 1;
    res.df_within = n - k;
    if (ss_within == 0.0) {
        res.degenerate = true;
        if (ss_between == 0.0) {
            // every observation identical: F fixed at 0 by convention
            res.f_stat = 0.0;
            res.p = 1.0;
        } else {
            res.f_stat = std::numeric_limits<double>::infinity();
            res.p = 0.0;
        }
        return res;
    }
    const double dfb = static_cast<double>(res.df_between);
    const double dfw = static_cast<double>(res.df_within);
    res.f_stat = (ss_between / dfb) / (ss_within / dfw);
    res.p = regularized_incomplete_beta(dfw / 2.0, dfb / 2.0, dfw / (dfw + dfb * res.f_stat));
    return res;
}

} // namespace mergemeter
