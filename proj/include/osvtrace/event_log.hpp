#pragma once

// The formal model: events (cve, ecosystem, day), the deduplicated event
// log, and per-CVE traces. The log keeps at most one event per
// (cve, ecosystem) key, always the earliest in-window one, so merging
// partial logs built in parallel is a commutative min-merge.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "osvtrace/dates.hpp"
#include "osvtrace/errors.hpp"

namespace osvtrace {

struct Event {
    std::string cve;
    std::string ecosystem;
    DayNumber day = 0;

    friend bool operator==(const Event&, const Event&) = default;
};

struct DayWindow {
    DayNumber start = kDayY2K;
    DayNumber end = 0; // inclusive cutoff

    bool contains(DayNumber day) const { return day >= start && day <= end; }
};

struct TraceStep {
    std::string ecosystem;
    DayNumber day = 0;

    friend bool operator==(const TraceStep&, const TraceStep&) = default;
};

/// The time-ordered ecosystem sequence of one CVE. Days are nondecreasing;
/// equal-day steps are ordered by ecosystem name so the sequence is unique.
struct Trace {
    std::string cve;
    std::vector<TraceStep> steps;

    std::size_t length() const { return steps.size(); }
    DayNumber first_day() const { return steps.front().day; }
    DayNumber last_day() const { return steps.back().day; }
};

using TraceMap = std::map<std::string, Trace>;

struct BuildDelta {
    std::uint64_t duplicate_events_collapsed = 0;
    std::uint64_t events_out_of_window = 0;
};

class EventLog {
  public:
    using Key = std::pair<std::string, std::string>; // (cve, ecosystem)

    explicit EventLog(DayWindow window) : window_(window) {}

    const DayWindow& window() const { return window_; }
    const std::map<Key, DayNumber>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    /// Min-merge one event into the log; out-of-window events are dropped.
    /// Commutative and associative, so insertion order never matters.
    void add(const Event& e, BuildDelta& delta) {
        if (!window_.contains(e.day)) {
            ++delta.events_out_of_window;
            return;
        }
        auto [it, inserted] = entries_.try_emplace({e.cve, e.ecosystem}, e.day);
        if (!inserted) {
            ++delta.duplicate_events_collapsed;
            it->second = std::min(it->second, e.day);
        }
    }

    /// Merge another log built over the same window.
    void merge(const EventLog& other, BuildDelta& delta) {
        for (const auto& [key, day] : other.entries_) {
            auto [it, inserted] = entries_.try_emplace(key, day);
            if (!inserted) {
                ++delta.duplicate_events_collapsed;
                it->second = std::min(it->second, day);
            }
        }
    }

    std::set<std::string> cve_set() const {
        std::set<std::string> out;
        for (const auto& [key, _] : entries_) out.insert(key.first);
        return out;
    }

    std::set<std::string> ecosystem_set() const {
        std::set<std::string> out;
        for (const auto& [key, _] : entries_) out.insert(key.second);
        return out;
    }

    /// Distinct CVE count per ecosystem.
    std::map<std::string, std::uint64_t> cves_per_ecosystem() const {
        std::map<std::string, std::uint64_t> out;
        for (const auto& [key, _] : entries_) ++out[key.second];
        return out;
    }

    /// Remove every entry of the given ecosystems; returns the entry count
    /// that went away.
    std::uint64_t drop_ecosystems(const std::set<std::string>& ecosystems) {
        std::uint64_t removed = 0;
        for (auto it = entries_.begin(); it != entries_.end();) {
            if (ecosystems.contains(it->first.second)) {
                it = entries_.erase(it);
                ++removed;
            } else {
                ++it;
            }
        }
        return removed;
    }

  private:
    std::map<Key, DayNumber> entries_;
    DayWindow window_;
};

template <typename EventRange>
EventLog build_event_log(const EventRange& events, DayWindow window, BuildDelta& delta) {
    EventLog log(window);
    for (const Event& e : events) log.add(e, delta);
    return log;
}

namespace detail {

inline Trace make_trace(std::string cve, std::vector<TraceStep> steps) {
    std::sort(steps.begin(), steps.end(), [](const TraceStep& a, const TraceStep& b) {
        return a.day != b.day ? a.day < b.day : a.ecosystem < b.ecosystem;
    });
    return Trace{std::move(cve), std::move(steps)};
}

} // namespace detail

/// Trace of one CVE: its log entries sorted by (day, ecosystem name).
inline Trace trace_of(const EventLog& log, const std::string& cve) {
    std::vector<TraceStep> steps;
    const auto& entries = log.entries();
    for (auto it = entries.lower_bound({cve, ""}); it != entries.end() && it->first.first == cve;
         ++it) {
        steps.push_back({it->first.second, it->second});
    }
    if (steps.empty()) throw NotFoundError("no events for " + cve);
    return detail::make_trace(cve, std::move(steps));
}

inline TraceMap all_traces(const EventLog& log) {
    TraceMap out;
    std::vector<TraceStep> steps;
    std::string current;
    const auto flush = [&]() {
        if (!steps.empty()) {
            out.emplace(current, detail::make_trace(current, std::move(steps)));
            steps.clear();
        }
    };
    for (const auto& [key, day] : log.entries()) {
        if (key.first != current) {
            flush();
            current = key.first;
        }
        steps.push_back({key.second, day});
    }
    flush();
    return out;
}

/// Day gaps between consecutive steps; empty for singleton traces.
inline std::vector<DayNumber> inter_event_times(const Trace& trace) {
    std::vector<DayNumber> gaps;
    for (std::size_t i = 1; i < trace.steps.size(); ++i) {
        gaps.push_back(trace.steps[i].day - trace.steps[i - 1].day);
    }
    return gaps;
}

// events.csv is the canonical interchange format of a built log:
// header `cve,ecosystem,day`, LF line endings, rows sorted by (cve, ecosystem).

inline void save_events_csv(const EventLog& log, std::ostream& os) {
    os << "cve,ecosystem,day\n";
    for (const auto& [key, day] : log.entries()) {
        os << key.first << ',' << key.second << ',' << day << '\n';
    }
}

inline EventLog load_events_csv(std::istream& is, DayWindow window, BuildDelta& delta) {
    std::string line;
    if (!std::getline(is, line) || line != "cve,ecosystem,day") {
        throw ParseError("events csv: missing header row");
    }
    EventLog log(window);
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos) {
            throw ParseError("events csv: bad row at line " + std::to_string(lineno));
        }
        Event e;
        e.cve = line.substr(0, c1);
        e.ecosystem = line.substr(c1 + 1, c2 - c1 - 1);
        try {
            e.day = static_cast<DayNumber>(std::stol(line.substr(c2 + 1)));
        } catch (const std::exception&) {
            throw ParseError("events csv: bad day at line " + std::to_string(lineno));
        }
        log.add(e, delta);
    }
    return log;
}

} // namespace osvtrace
