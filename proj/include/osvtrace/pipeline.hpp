#pragma once

// Corpus walking and parallel ingestion. Inputs are JSON files, directory
// trees, or zip archives of OSV records; ingestion fans out across worker
// threads and reduces into one event log with a commutative min-merge, so
// results never depend on scheduling or enumeration order.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "osvtrace/cvss.hpp"
#include "osvtrace/dates.hpp"
#include "osvtrace/errors.hpp"
#include "osvtrace/event_log.hpp"
#include "osvtrace/ingest.hpp"
#include "osvtrace/stats.hpp"
#include "osvtrace/zip.hpp"

namespace osvtrace {

struct PipelineConfig {
    std::vector<std::string> input_paths;
    DayNumber cutoff_day = 0; // mandatory, inclusive
    DayNumber window_start_day = kDayY2K;
    std::size_t top_k = 30;
    bool related_generates_events = true;
    std::uint64_t min_cves_per_ecosystem = 1;
    std::string output_dir;
    std::vector<std::string> fetch_ecosystems;
    unsigned threads = 0; // 0 = hardware concurrency

    DayWindow window() const { return {window_start_day, cutoff_day}; }
};

inline void validate(const PipelineConfig& config) {
    if (config.cutoff_day == 0) throw ArgumentError("config: cutoff date is mandatory");
    if (config.window_start_day >= config.cutoff_day) {
        throw ArgumentError("config: window start must precede the cutoff");
    }
    if (config.top_k < 1) throw ArgumentError("config: top_k must be at least 1");
    if (config.min_cves_per_ecosystem < 1) {
        throw ArgumentError("config: min_cves_per_ecosystem must be at least 1");
    }
}

struct Diagnostic {
    std::string source; // file path, or "archive.zip!entry.json"
    std::string message;

    friend bool operator<(const Diagnostic& a, const Diagnostic& b) {
        return std::tie(a.source, a.message) < std::tie(b.source, b.message);
    }
    friend bool operator==(const Diagnostic&, const Diagnostic&) = default;
};

struct WorkUnit {
    enum class Kind { json_file, zip_archive };
    Kind kind = Kind::json_file;
    std::string path;
};

namespace detail {

inline bool has_extension(const std::filesystem::path& p, const char* ext) {
    std::string e = p.extension().string();
    std::transform(e.begin(), e.end(), e.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return e == ext;
}

} // namespace detail

/// Expand the input paths into a sorted, deduplicated list of work units.
/// Directories are walked recursively for .json files and .zip archives;
/// explicit file arguments must be one of the two.
inline std::vector<WorkUnit> enumerate_corpus(const std::vector<std::string>& inputs) {
    namespace fs = std::filesystem;
    std::map<std::string, WorkUnit::Kind> found;
    for (const std::string& input : inputs) {
        const fs::path path(input);
        std::error_code ec;
        if (fs::is_directory(path, ec)) {
            for (auto it = fs::recursive_directory_iterator(path); it != fs::recursive_directory_iterator(); ++it) {
                if (!it->is_regular_file()) continue;
                if (detail::has_extension(it->path(), ".json")) {
                    found.emplace(it->path().string(), WorkUnit::Kind::json_file);
                } else if (detail::has_extension(it->path(), ".zip")) {
                    found.emplace(it->path().string(), WorkUnit::Kind::zip_archive);
                }
            }
        } else if (fs::is_regular_file(path, ec)) {
            if (detail::has_extension(path, ".json")) {
                found.emplace(input, WorkUnit::Kind::json_file);
            } else if (detail::has_extension(path, ".zip")) {
                found.emplace(input, WorkUnit::Kind::zip_archive);
            } else {
                throw IoError("input is neither a .json file nor a .zip archive: " + input);
            }
        } else {
            throw IoError("input path does not exist: " + input);
        }
    }
    std::vector<WorkUnit> units;
    units.reserve(found.size());
    for (const auto& [path, kind] : found) units.push_back({kind, path});
    return units;
}

/// Per-CVE maximum CVSS v3.x base score, with vector bookkeeping.
struct SeverityPool {
    std::map<std::string, double> max_score;
    std::uint64_t vectors_seen = 0;
    std::uint64_t vectors_skipped = 0; // non-3.x or malformed

    void note(const VulnRecord& rec) {
        for (const std::string& vector : rec.severity_vectors) {
            ++vectors_seen;
            double score = 0.0;
            try {
                score = cvss31_base_score(vector);
            } catch (const ParseError&) {
                ++vectors_skipped;
                continue;
            }
            for (const std::string& cve : rec.cve_refs) {
                auto [it, inserted] = max_score.try_emplace(cve, score);
                if (!inserted) it->second = std::max(it->second, score);
            }
        }
    }

    void merge(const SeverityPool& other) {
        vectors_seen += other.vectors_seen;
        vectors_skipped += other.vectors_skipped;
        for (const auto& [cve, score] : other.max_score) {
            auto [it, inserted] = max_score.try_emplace(cve, score);
            if (!inserted) it->second = std::max(it->second, score);
        }
    }

    std::vector<SeverityRecord> records() const {
        std::vector<SeverityRecord> out;
        out.reserve(max_score.size());
        for (const auto& [cve, score] : max_score) out.push_back({cve, score});
        return out;
    }
};

struct IngestOutcome {
    EventLog log;
    IngestStats stats;
    SeverityPool severity;
    std::vector<Diagnostic> diagnostics; // sorted
};

namespace detail {

struct Shard {
    explicit Shard(DayWindow window) : log(window) {}
    EventLog log;
    IngestStats stats;
    SeverityPool severity;
    std::vector<Diagnostic> diagnostics;
};

inline void ingest_one(const std::string& source, const std::string& raw,
                       const ParseOptions& options, Shard& shard) {
    VulnRecord rec;
    try {
        rec = parse_record(raw, options);
    } catch (const std::exception& e) {
        shard.diagnostics.push_back({source, e.what()});
        return;
    }
    const bool contributes = !classify(rec).has_value();
    BuildDelta delta;
    for (const Event& e : ingest_record(rec, shard.stats)) shard.log.add(e, delta);
    shard.stats.duplicate_events_collapsed += delta.duplicate_events_collapsed;
    shard.stats.events_out_of_window += delta.events_out_of_window;
    // severity vectors count only when the record is part of the dataset
    if (contributes) shard.severity.note(rec);
}

inline void ingest_unit(const WorkUnit& unit, const ParseOptions& options, Shard& shard) {
    if (unit.kind == WorkUnit::Kind::json_file) {
        std::ifstream in(unit.path, std::ios::binary);
        if (!in) throw IoError("cannot open " + unit.path);
        std::ostringstream buf;
        buf << in.rdbuf();
        ingest_one(unit.path, buf.str(), options, shard);
        return;
    }
    ZipReader reader(unit.path);
    for (const ZipEntry& entry : reader.entries()) {
        if (entry.is_directory() || !entry.name.ends_with(".json")) continue;
        ingest_one(unit.path + "!" + entry.name, reader.read(entry), options, shard);
    }
}

} // namespace detail

/// Ingest every work unit, fanning out across `threads` workers. The merge
/// is commutative, so the outcome is identical for any thread count.
inline IngestOutcome ingest_corpus(const std::vector<WorkUnit>& units, DayWindow window,
                                   const ParseOptions& options, unsigned threads = 0) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(units.size(), 1)));

    std::vector<detail::Shard> shards(threads, detail::Shard(window));
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    workers.reserve(threads);
    for (unsigned w = 0; w < threads; ++w) {
        workers.emplace_back([&, w] {
            for (std::size_t i = next.fetch_add(1); i < units.size(); i = next.fetch_add(1)) {
                detail::ingest_unit(units[i], options, shards[w]);
            }
        });
    }
    for (std::thread& t : workers) t.join();

    IngestOutcome outcome{EventLog(window), {}, {}, {}};
    for (detail::Shard& shard : shards) {
        BuildDelta delta;
        outcome.log.merge(shard.log, delta);
        shard.stats.duplicate_events_collapsed += delta.duplicate_events_collapsed;
        outcome.stats.merge(shard.stats);
        outcome.severity.merge(shard.severity);
        outcome.diagnostics.insert(outcome.diagnostics.end(), shard.diagnostics.begin(),
                                   shard.diagnostics.end());
    }
    std::sort(outcome.diagnostics.begin(), outcome.diagnostics.end());
    return outcome;
}

struct MinCvesFilter {
    std::uint64_t threshold = 1;
    std::vector<std::string> dropped_ecosystems; // sorted
    std::uint64_t events_dropped = 0;
};

/// Evict every ecosystem referenced by fewer than `threshold` distinct CVEs.
/// This is how a CRAN-style exclusion is expressed as configuration.
inline MinCvesFilter apply_min_cves_filter(EventLog& log, std::uint64_t threshold) {
    MinCvesFilter filter;
    filter.threshold = threshold;
    if (threshold <= 1) return filter;
    std::set<std::string> doomed;
    for (const auto& [eco, cves] : log.cves_per_ecosystem()) {
        if (cves < threshold) doomed.insert(eco);
    }
    filter.events_dropped = log.drop_ecosystems(doomed);
    filter.dropped_ecosystems.assign(doomed.begin(), doomed.end());
    return filter;
}

} // namespace osvtrace
