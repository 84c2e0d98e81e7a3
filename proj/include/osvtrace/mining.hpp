#pragma once

// Sequence mining over traces: symbolic propagation sequences, their
// frequency ranking, trace-length statistics, and traceability delays
// (last minus first appearance day) with boxplot-ready summaries.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "osvtrace/errors.hpp"
#include "osvtrace/event_log.hpp"

namespace osvtrace {

/// Ordered chain of ecosystem names a CVE propagated through.
using SequenceKey = std::vector<std::string>;

struct RankingRow {
    SequenceKey key;
    std::uint64_t count = 0;
    double share = 0.0;
};

struct SequenceRanking {
    std::vector<RankingRow> rows;
    std::uint64_t total_cves = 0;
};

struct DelayRecord {
    std::string cve;
    std::size_t m = 0;        // trace length, always > 1
    DayNumber delay_days = 0; // t_last - t_first
};

inline SequenceKey sequence_key(const Trace& trace) {
    SequenceKey key;
    key.reserve(trace.steps.size());
    for (const TraceStep& s : trace.steps) key.push_back(s.ecosystem);
    return key;
}

/// Group CVEs by sequence key and rank by frequency. Shares are fractions
/// of all CVEs, singleton sequences included. Rows are ordered by count
/// descending, ties broken lexicographically on the key.
inline SequenceRanking frequency_ranking(const TraceMap& traces) {
    if (traces.empty()) throw ArgumentError("frequency_ranking: no traces");
    std::map<SequenceKey, std::uint64_t> counts;
    for (const auto& [_, trace] : traces) ++counts[sequence_key(trace)];

    SequenceRanking ranking;
    ranking.total_cves = traces.size();
    ranking.rows.reserve(counts.size());
    for (const auto& [key, count] : counts) {
        ranking.rows.push_back(
            {key, count, static_cast<double>(count) / static_cast<double>(traces.size())});
    }
    std::stable_sort(ranking.rows.begin(), ranking.rows.end(),
                     [](const RankingRow& a, const RankingRow& b) {
                         return a.count != b.count ? a.count > b.count : a.key < b.key;
                     });
    return ranking;
}

inline SequenceRanking top_k(const SequenceRanking& ranking, std::size_t k) {
    if (k == 0) throw ArgumentError("top_k: k must be >= 1");
    SequenceRanking out;
    out.total_cves = ranking.total_cves;
    const std::size_t n = std::min(k, ranking.rows.size());
    out.rows.assign(ranking.rows.begin(), ranking.rows.begin() + static_cast<long>(n));
    return out;
}

struct LengthDistribution {
    std::map<std::size_t, std::uint64_t> histogram; // trace length -> CVE count
    double mean = 0.0;
    double median = 0.0;
    std::uint64_t multi_count = 0; // CVEs with length > 1
    double multi_mean = 0.0;
    double multi_median = 0.0;
};

namespace detail {

// Quartiles use linear interpolation between order statistics
// (the numpy/R type-7 convention); `values` must be sorted.
inline double quantile_sorted(const std::vector<double>& values, double q) {
    const std::size_t n = values.size();
    if (n == 1) return values[0];
    const double pos = q * static_cast<double>(n - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(lo);
    if (lo + 1 >= n) return values[n - 1];
    return values[lo] + frac * (values[lo + 1] - values[lo]);
}

inline double mean_of(const std::vector<double>& values) {
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

} // namespace detail

inline LengthDistribution length_distribution(const TraceMap& traces) {
    if (traces.empty()) throw ArgumentError("length_distribution: no traces");
    LengthDistribution dist;
    std::vector<double> all, multi;
    all.reserve(traces.size());
    for (const auto& [_, trace] : traces) {
        const std::size_t m = trace.length();
        ++dist.histogram[m];
        all.push_back(static_cast<double>(m));
        if (m > 1) multi.push_back(static_cast<double>(m));
    }
    std::sort(all.begin(), all.end());
    dist.mean = detail::mean_of(all);
    dist.median = detail::quantile_sorted(all, 0.5);
    dist.multi_count = multi.size();
    if (!multi.empty()) {
        std::sort(multi.begin(), multi.end());
        dist.multi_mean = detail::mean_of(multi);
        dist.multi_median = detail::quantile_sorted(multi, 0.5);
    }
    return dist;
}

/// Fraction of CVEs observed in exactly the one given ecosystem.
inline double single_ecosystem_share(const TraceMap& traces, const std::string& ecosystem) {
    if (traces.empty()) throw ArgumentError("single_ecosystem_share: no traces");
    std::uint64_t hits = 0;
    for (const auto& [_, trace] : traces) {
        if (trace.length() == 1 && trace.steps.front().ecosystem == ecosystem) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(traces.size());
}

/// One delay record per multi-ecosystem trace; singletons carry no delay.
inline std::vector<DelayRecord> delays(const TraceMap& traces) {
    std::vector<DelayRecord> out;
    for (const auto& [cve, trace] : traces) {
        if (trace.length() > 1) {
            out.push_back({cve, trace.length(), trace.last_day() - trace.first_day()});
        }
    }
    return out;
}

/// Five-number summary plus Tukey fences (1.5 IQR beyond the quartiles).
/// Whiskers are the outermost data points inside the fences.
struct BoxStats {
    std::uint64_t n = 0;
    double mean = 0.0;
    double min = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double max = 0.0;
    double lo_whisker = 0.0;
    double hi_whisker = 0.0;
    std::vector<double> outliers; // sorted values outside the fences
};

struct DelaySummary {
    bool empty = true;
    BoxStats overall;
    std::map<std::size_t, BoxStats> by_length; // keyed by trace length m
};

namespace detail {

inline BoxStats box_stats(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    BoxStats box;
    box.n = values.size();
    box.mean = mean_of(values);
    box.min = values.front();
    box.max = values.back();
    box.q1 = quantile_sorted(values, 0.25);
    box.median = quantile_sorted(values, 0.5);
    box.q3 = quantile_sorted(values, 0.75);
    const double iqr = box.q3 - box.q1;
    const double lo_fence = box.q1 - 1.5 * iqr;
    const double hi_fence = box.q3 + 1.5 * iqr;
    box.lo_whisker = box.max;
    box.hi_whisker = box.min;
    for (double v : values) {
        if (v < lo_fence || v > hi_fence) {
            box.outliers.push_back(v);
        } else {
            box.lo_whisker = std::min(box.lo_whisker, v);
            box.hi_whisker = std::max(box.hi_whisker, v);
        }
    }
    return box;
}

} // namespace detail

inline DelaySummary delay_summary(const std::vector<DelayRecord>& records, bool group_by_m) {
    DelaySummary summary;
    if (records.empty()) return summary; // explicit empty marker
    summary.empty = false;

    std::vector<double> all;
    std::map<std::size_t, std::vector<double>> grouped;
    all.reserve(records.size());
    for (const DelayRecord& r : records) {
        all.push_back(static_cast<double>(r.delay_days));
        if (group_by_m) grouped[r.m].push_back(static_cast<double>(r.delay_days));
    }
    summary.overall = detail::box_stats(std::move(all));
    for (auto& [m, values] : grouped) {
        summary.by_length.emplace(m, detail::box_stats(std::move(values)));
    }
    return summary;
}

} // namespace osvtrace
