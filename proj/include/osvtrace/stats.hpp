#pragma once

// Hypothesis testing: Pearson correlation for the delay-vs-length question,
// per-ecosystem Welch t-tests with Bonferroni correction for the
// presence/absence question, and the CVE-severity correlation check.
// The Student-t survival function is computed from the regularized
// incomplete beta function, so there is no dependency on an external
// statistics library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "osvtrace/errors.hpp"
#include "osvtrace/mining.hpp"

namespace osvtrace {

namespace detail {

// Continued-fraction kernel for the incomplete beta function, evaluated
// with the modified Lentz algorithm.
inline double beta_cont_fraction(double a, double b, double x) {
    constexpr double eps = std::numeric_limits<double>::epsilon();
    constexpr double tiny = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 500; ++m) {
        const double m2 = 2.0 * m;
        double coeff = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + coeff * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + coeff / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        coeff = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + coeff * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + coeff / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) break;
    }
    return h;
}

} // namespace detail

/// Regularized incomplete beta function I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
    if (a <= 0.0 || b <= 0.0) throw ArgumentError("incomplete_beta: a, b must be > 0");
    if (x < 0.0 || x > 1.0) throw ArgumentError("incomplete_beta: x must be in [0, 1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double front = std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                                  a * std::log(x) + b * std::log1p(-x));
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * detail::beta_cont_fraction(a, b, x) / a;
    }
    return 1.0 - front * detail::beta_cont_fraction(b, a, 1.0 - x) / b;
}

/// Upper-tail probability P(T >= t) of the Student-t distribution.
inline double student_t_sf(double t, double df) {
    if (df <= 0.0) throw ArgumentError("student_t_sf: df must be > 0");
    if (t == 0.0) return 0.5;
    const double x = df / (df + t * t);
    const double tail = 0.5 * incomplete_beta(df / 2.0, 0.5, x);
    return t > 0.0 ? tail : 1.0 - tail;
}

struct CorrelationResult {
    double r = 0.0;
    std::size_t n = 0;
};

/// Pearson product-moment correlation. Two-pass, left-to-right summation,
/// so the result is deterministic for a given input order.
inline CorrelationResult pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw ArgumentError("pearson: length mismatch");
    const std::size_t n = x.size();
    if (n < 2) throw ArgumentError("pearson: need at least 2 samples");
    double mean_x = 0.0, mean_y = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mean_x += x[i];
        mean_y += y[i];
    }
    mean_x /= static_cast<double>(n);
    mean_y /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mean_x;
        const double dy = y[i] - mean_y;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw ArgumentError("pearson: constant vector");
    return {sxy / std::sqrt(sxx * syy), n};
}

struct WelchResult {
    double t = 0.0;
    double df = 0.0;
    double p = 1.0;
};

namespace detail {

struct GroupMoments {
    std::size_t n = 0;
    double mean = 0.0;
    double variance = 0.0; // sample variance (n - 1 denominator)
};

inline GroupMoments moments(std::span<const double> values) {
    GroupMoments g;
    g.n = values.size();
    for (double v : values) g.mean += v;
    g.mean /= static_cast<double>(g.n);
    if (g.n > 1) {
        double ss = 0.0;
        for (double v : values) {
            const double d = v - g.mean;
            ss += d * d;
        }
        g.variance = ss / static_cast<double>(g.n - 1);
    }
    return g;
}

} // namespace detail

/// Two-sample t-test with the unequal-variance correction and
/// Welch-Satterthwaite degrees of freedom; the p-value is two-sided.
inline WelchResult welch_t_test(std::span<const double> group_a, std::span<const double> group_b) {
    if (group_a.size() < 2 || group_b.size() < 2) {
        throw InsufficientDataError("welch_t_test: each group needs >= 2 samples");
    }
    const auto a = detail::moments(group_a);
    const auto b = detail::moments(group_b);
    if (a.variance == 0.0 && b.variance == 0.0) {
        throw InsufficientDataError("welch_t_test: both group variances are zero");
    }
    const double va = a.variance / static_cast<double>(a.n);
    const double vb = b.variance / static_cast<double>(b.n);
    WelchResult res;
    res.t = (a.mean - b.mean) / std::sqrt(va + vb);
    res.df = (va + vb) * (va + vb) /
             (va * va / static_cast<double>(a.n - 1) + vb * vb / static_cast<double>(b.n - 1));
    res.p = 2.0 * student_t_sf(std::fabs(res.t), res.df);
    return res;
}

struct H1Result {
    double r = 0.0;
    std::size_t n = 0;
    std::string verdict; // "supported" iff r > 0, else "rejected"
};

/// Correlation of traceability delay against trace length over the
/// multi-ecosystem records.
inline H1Result h1_correlate(const std::vector<DelayRecord>& records) {
    std::vector<double> delay, length;
    delay.reserve(records.size());
    length.reserve(records.size());
    for (const DelayRecord& r : records) {
        delay.push_back(static_cast<double>(r.delay_days));
        length.push_back(static_cast<double>(r.m));
    }
    const CorrelationResult c = pearson(delay, length);
    return {c.r, c.n, c.r > 0.0 ? "supported" : "rejected"};
}

enum class Direction { none, longer, shorter };
enum class TestStatus { tested, insufficient_data };

inline const char* to_string(Direction d) {
    switch (d) {
        case Direction::longer: return "longer";
        case Direction::shorter: return "shorter";
        default: return "none";
    }
}

inline const char* to_string(TestStatus s) {
    return s == TestStatus::tested ? "tested" : "insufficient_data";
}

struct EcosystemTestResult {
    std::string ecosystem;
    std::size_t n_present = 0;
    std::size_t n_absent = 0;
    std::optional<double> mean_present;
    std::optional<double> mean_absent;
    std::optional<double> t_stat;
    std::optional<double> df;
    std::optional<double> p_value;
    bool significant = false;
    Direction direction = Direction::none;
    TestStatus status = TestStatus::insufficient_data;
};

struct H2Outcome {
    double alpha = 0.05;
    double alpha_corrected = 0.0;
    std::size_t ecosystem_count = 0;             // |A| of the log, Bonferroni divisor
    std::vector<EcosystemTestResult> results;    // sorted by ecosystem name
};

/// For every ecosystem of the log, test whether its presence in a trace
/// shifts the traceability delays, Bonferroni-corrected over |A| tests.
/// Ecosystems whose presence/absence split is too small to test degrade to
/// insufficient_data instead of failing the whole run.
inline H2Outcome h2_presence_tests(const TraceMap& traces,
                                   const std::vector<DelayRecord>& delay_records,
                                   double alpha = 0.05) {
    if (delay_records.empty()) throw ArgumentError("h2_presence_tests: no delay records");

    std::set<std::string> ecosystems;
    for (const auto& [_, trace] : traces) {
        for (const TraceStep& s : trace.steps) ecosystems.insert(s.ecosystem);
    }

    H2Outcome outcome;
    outcome.alpha = alpha;
    outcome.ecosystem_count = ecosystems.size();
    outcome.alpha_corrected = alpha / static_cast<double>(ecosystems.size());

    for (const std::string& eco : ecosystems) {
        EcosystemTestResult res;
        res.ecosystem = eco;
        std::vector<double> present, absent;
        for (const DelayRecord& r : delay_records) {
            const Trace& trace = traces.at(r.cve);
            const bool has = std::any_of(trace.steps.begin(), trace.steps.end(),
                                         [&](const TraceStep& s) { return s.ecosystem == eco; });
            (has ? present : absent).push_back(static_cast<double>(r.delay_days));
        }
        res.n_present = present.size();
        res.n_absent = absent.size();
        if (!present.empty()) res.mean_present = detail::moments(present).mean;
        if (!absent.empty()) res.mean_absent = detail::moments(absent).mean;
        try {
            const WelchResult w = welch_t_test(present, absent);
            res.t_stat = w.t;
            res.df = w.df;
            res.p_value = w.p;
            res.status = TestStatus::tested;
            res.significant = w.p < outcome.alpha_corrected;
            if (res.significant) {
                res.direction = *res.mean_present > *res.mean_absent ? Direction::longer
                                                                     : Direction::shorter;
            }
        } catch (const InsufficientDataError&) {
            res.status = TestStatus::insufficient_data;
        }
        outcome.results.push_back(std::move(res));
    }
    return outcome;
}

struct SeverityRecord {
    std::string cve;
    double base_score = 0.0; // CVSS v3.x base score, one decimal
};

struct SeverityCheck {
    std::size_t n = 0;          // joined (score, delay) pairs
    std::size_t unmatched = 0;  // records without a partner, dropped
    std::optional<double> r;
    std::string verdict;        // "tested" or "not_testable"
};

/// Correlate CVSS base scores with traceability delays, joining on CVE.
inline SeverityCheck severity_delay_check(const std::vector<SeverityRecord>& severity,
                                          const std::vector<DelayRecord>& delay_records) {
    std::map<std::string, double> delay_by_cve;
    for (const DelayRecord& r : delay_records) {
        delay_by_cve.emplace(r.cve, static_cast<double>(r.delay_days));
    }
    std::map<std::string, double> score_by_cve;
    for (const SeverityRecord& s : severity) {
        auto [it, inserted] = score_by_cve.try_emplace(s.cve, s.base_score);
        if (!inserted) it->second = std::max(it->second, s.base_score);
    }

    SeverityCheck check;
    std::vector<double> scores, joined_delays;
    for (const auto& [cve, score] : score_by_cve) {
        const auto it = delay_by_cve.find(cve);
        if (it == delay_by_cve.end()) {
            ++check.unmatched;
            continue;
        }
        scores.push_back(score);
        joined_delays.push_back(it->second);
    }
    check.unmatched += delay_by_cve.size() - scores.size();
    check.n = scores.size();
    try {
        check.r = pearson(scores, joined_delays).r;
        check.verdict = "tested";
    } catch (const ArgumentError&) {
        check.verdict = "not_testable";
    }
    return check;
}

} // namespace osvtrace
