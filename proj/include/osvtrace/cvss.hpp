#pragma once

// CVSS v3.1 base-score arithmetic (also applied to v3.0 vectors, which use
// the same base formula). Implements the one-decimal roundup rule from the
// published specification, so scores match the reference calculators exactly.

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>

#include "osvtrace/errors.hpp"

namespace osvtrace {

namespace detail {

inline double cvss_roundup(double value) {
    const auto scaled = static_cast<std::int64_t>(std::floor(value * 100000.0 + 0.5));
    if (scaled % 10000 == 0) return static_cast<double>(scaled) / 100000.0;
    return static_cast<double>(scaled / 10000 + 1) / 10.0;
}

inline double cvss_metric(const std::map<std::string, char>& metrics, const char* key,
                          std::string_view allowed, const double* weights) {
    const auto it = metrics.find(key);
    if (it == metrics.end()) {
        throw ParseError(std::string("cvss: missing base metric ") + key);
    }
    const auto pos = allowed.find(it->second);
    if (pos == std::string_view::npos) {
        throw ParseError(std::string("cvss: bad value for ") + key + ": " + it->second);
    }
    return weights[pos];
}

} // namespace detail

/// Base score of a `CVSS:3.1/...` (or `CVSS:3.0/...`) vector string.
/// Non-base metrics (temporal, environmental) are accepted and ignored.
/// Throws ParseError for malformed or incomplete vectors.
inline double cvss31_base_score(std::string_view vector) {
    std::string_view rest = vector;
    if (rest.starts_with("CVSS:3.1/")) {
        rest.remove_prefix(9);
    } else if (rest.starts_with("CVSS:3.0/")) {
        rest.remove_prefix(9);
    } else {
        throw ParseError("cvss: vector must start with CVSS:3.1/ or CVSS:3.0/");
    }

    static const std::map<std::string, std::string, std::less<>> known = {
        {"AV", "NALP"}, {"AC", "LH"},  {"PR", "NLH"}, {"UI", "NR"},  {"S", "UC"},
        {"C", "HLN"},   {"I", "HLN"},  {"A", "HLN"},
        // temporal / environmental metrics: validated lightly, not scored
        {"E", ""},  {"RL", ""},  {"RC", ""},  {"CR", ""},  {"IR", ""},  {"AR", ""},
        {"MAV", ""}, {"MAC", ""}, {"MPR", ""}, {"MUI", ""}, {"MS", ""},  {"MC", ""},
        {"MI", ""},  {"MA", ""},
    };

    std::map<std::string, char> metrics;
    while (!rest.empty()) {
        const auto slash = rest.find('/');
        const std::string_view part = rest.substr(0, slash);
        rest = slash == std::string_view::npos ? std::string_view{} : rest.substr(slash + 1);
        const auto colon = part.find(':');
        if (colon == std::string_view::npos || colon == 0 || colon + 2 != part.size()) {
            throw ParseError("cvss: malformed metric '" + std::string(part) + "'");
        }
        const std::string key(part.substr(0, colon));
        const auto it = known.find(key);
        if (it == known.end()) {
            throw ParseError("cvss: unknown metric '" + key + "'");
        }
        if (!metrics.emplace(key, part[colon + 1]).second) {
            throw ParseError("cvss: duplicate metric '" + key + "'");
        }
        if (!it->second.empty() && it->second.find(part[colon + 1]) == std::string::npos) {
            throw ParseError("cvss: bad value for " + key + ": " + part[colon + 1]);
        }
    }

    static constexpr double kAv[] = {0.85, 0.62, 0.55, 0.2}; // N A L P
    static constexpr double kAc[] = {0.77, 0.44};            // L H
    static constexpr double kPrU[] = {0.85, 0.62, 0.27};     // N L H, scope unchanged
    static constexpr double kPrC[] = {0.85, 0.68, 0.5};      // N L H, scope changed
    static constexpr double kUi[] = {0.85, 0.62};            // N R
    static constexpr double kCia[] = {0.56, 0.22, 0.0};      // H L N

    const auto scope_it = metrics.find("S");
    if (scope_it == metrics.end()) throw ParseError("cvss: missing base metric S");
    const bool scope_changed = scope_it->second == 'C';
    const double av = detail::cvss_metric(metrics, "AV", "NALP", kAv);
    const double ac = detail::cvss_metric(metrics, "AC", "LH", kAc);
    const double pr = detail::cvss_metric(metrics, "PR", "NLH", scope_changed ? kPrC : kPrU);
    const double ui = detail::cvss_metric(metrics, "UI", "NR", kUi);
    const double c = detail::cvss_metric(metrics, "C", "HLN", kCia);
    const double i = detail::cvss_metric(metrics, "I", "HLN", kCia);
    const double a = detail::cvss_metric(metrics, "A", "HLN", kCia);

    const double iss = 1.0 - (1.0 - c) * (1.0 - i) * (1.0 - a);
    const double impact = scope_changed
                              ? 7.52 * (iss - 0.029) - 3.25 * std::pow(iss - 0.02, 15.0)
                              : 6.42 * iss;
    const double exploitability = 8.22 * av * ac * pr * ui;
    if (impact <= 0.0) return 0.0;
    if (!scope_changed) return detail::cvss_roundup(std::min(impact + exploitability, 10.0));
    return detail::cvss_roundup(std::min(1.08 * (impact + exploitability), 10.0));
}

} // namespace osvtrace
