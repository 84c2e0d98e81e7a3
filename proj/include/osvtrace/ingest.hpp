#pragma once

// OSV record ingestion: parse one OSV JSON document into a VulnRecord,
// pull CVE identifiers out of the id/aliases/upstream/related fields,
// normalize ecosystem names, and expand a record into candidate events.
// Parsing is pure per record, so files can be ingested in parallel and
// merged downstream.

#include <cctype>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "osvtrace/dates.hpp"
#include "osvtrace/errors.hpp"
#include "osvtrace/event_log.hpp"

namespace osvtrace {

struct VulnRecord {
    std::string record_id;
    std::set<std::string> cve_refs;   // uppercase CVE ids
    std::set<std::string> ecosystems; // canonical names
    std::optional<DayNumber> published_day;
    std::optional<DayNumber> modified_day;
    std::vector<std::string> severity_vectors;
    bool is_withdrawn = false;
    bool is_malware = false;
};

enum class SkipReason { malware, withdrawn, no_cve, no_ecosystem, no_timestamp };

inline const char* to_string(SkipReason r) {
    switch (r) {
        case SkipReason::malware: return "malware";
        case SkipReason::withdrawn: return "withdrawn";
        case SkipReason::no_cve: return "no_cve";
        case SkipReason::no_ecosystem: return "no_ecosystem";
        default: return "no_timestamp";
    }
}

struct IngestStats {
    std::uint64_t records_seen = 0;
    std::uint64_t records_skipped_malware = 0;
    std::uint64_t records_skipped_withdrawn = 0;
    std::uint64_t records_skipped_no_cve = 0;
    std::uint64_t records_skipped_no_ecosystem = 0;
    std::uint64_t records_skipped_no_timestamp = 0;
    std::uint64_t records_contributing = 0;
    std::uint64_t events_emitted = 0;
    std::uint64_t duplicate_events_collapsed = 0;
    std::uint64_t events_out_of_window = 0;

    void merge(const IngestStats& o) {
        records_seen += o.records_seen;
        records_skipped_malware += o.records_skipped_malware;
        records_skipped_withdrawn += o.records_skipped_withdrawn;
        records_skipped_no_cve += o.records_skipped_no_cve;
        records_skipped_no_ecosystem += o.records_skipped_no_ecosystem;
        records_skipped_no_timestamp += o.records_skipped_no_timestamp;
        records_contributing += o.records_contributing;
        events_emitted += o.events_emitted;
        duplicate_events_collapsed += o.duplicate_events_collapsed;
        events_out_of_window += o.events_out_of_window;
    }

    /// Every parsed record lands in exactly one skip bucket or contributes.
    bool bookkeeping_holds() const {
        return records_seen == records_skipped_malware + records_skipped_withdrawn +
                                   records_skipped_no_cve + records_skipped_no_ecosystem +
                                   records_skipped_no_timestamp + records_contributing;
    }
};

/// `CVE-` + 4 digits + `-` + 4 or more digits, matched case-insensitively.
inline bool is_cve_id(std::string_view s) {
    static constexpr std::string_view prefix = "CVE-";
    if (s.size() < 13) return false; // "CVE-YYYY-NNNN"
    for (std::size_t i = 0; i < 4; ++i) {
        if (std::toupper(static_cast<unsigned char>(s[i])) != prefix[i]) return false;
    }
    for (std::size_t i = 4; i < 8; ++i) {
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    }
    if (s[8] != '-') return false;
    for (std::size_t i = 9; i < s.size(); ++i) {
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    }
    return true;
}

/// Union of all CVE identifiers across the inputs, uppercased, deduplicated.
/// Non-CVE identifiers are dropped silently.
inline std::set<std::string> extract_cves(std::string_view record_id,
                                          const std::vector<std::string>& aliases,
                                          const std::vector<std::string>& upstream,
                                          const std::vector<std::string>& related) {
    std::set<std::string> out;
    const auto consider = [&](std::string_view id) {
        if (!is_cve_id(id)) return;
        std::string cve(id);
        for (char& c : cve) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        out.insert(std::move(cve));
    };
    consider(record_id);
    for (const auto& id : aliases) consider(id);
    for (const auto& id : upstream) consider(id);
    for (const auto& id : related) consider(id);
    return out;
}

/// Canonical ecosystem name: strips the colon-delimited release suffix
/// ("Debian:11" -> "Debian") and folds GitHub Actions and Git into GitHub.
/// Idempotent. Throws RecordError on an empty name.
inline std::string normalize_ecosystem(std::string_view raw_name) {
    std::string_view name = raw_name.substr(0, raw_name.find(':'));
    while (!name.empty() && name.front() == ' ') name.remove_prefix(1);
    while (!name.empty() && name.back() == ' ') name.remove_suffix(1);
    if (name.empty()) {
        throw RecordError("empty ecosystem name: '" + std::string(raw_name) + "'");
    }
    if (name == "GitHub Actions" || name == "Git") return "GitHub";
    return std::string(name);
}

struct ParseOptions {
    bool include_related = true; // let `related` CVEs generate events
};

namespace detail {

inline std::vector<std::string> string_array(const nlohmann::json& doc, const char* field) {
    std::vector<std::string> out;
    const auto it = doc.find(field);
    if (it == doc.end() || it->is_null()) return out;
    if (!it->is_array()) {
        throw RecordError(std::string("field '") + field + "' is not an array");
    }
    for (const auto& item : *it) {
        if (item.is_string()) out.push_back(item.get<std::string>());
    }
    return out;
}

inline std::optional<DayNumber> day_field(const nlohmann::json& doc, const char* field) {
    const auto it = doc.find(field);
    if (it == doc.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) {
        throw RecordError(std::string("field '") + field + "' is not a string");
    }
    try {
        return rfc3339_to_day(it->get<std::string>());
    } catch (const DateError& e) {
        throw RecordError(std::string("field '") + field + "': " + e.what());
    }
}

} // namespace detail

/// Parse one OSV JSON document. Malformed JSON raises ParseError naming the
/// byte offset; schema violations (missing id, bad timestamps) raise
/// RecordError. Unknown fields are ignored.
inline VulnRecord parse_record(std::string_view raw_json, const ParseOptions& options = {}) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(raw_json);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("malformed JSON at byte " + std::to_string(e.byte) + ": " + e.what());
    }
    if (!doc.is_object()) throw RecordError("record is not a JSON object");
    const auto id_it = doc.find("id");
    if (id_it == doc.end() || !id_it->is_string()) {
        throw RecordError("record has no 'id'");
    }

    VulnRecord rec;
    rec.record_id = id_it->get<std::string>();
    rec.is_malware = rec.record_id.starts_with("MAL-");

    const auto aliases = detail::string_array(doc, "aliases");
    const auto upstream = detail::string_array(doc, "upstream");
    auto related = detail::string_array(doc, "related");
    if (!options.include_related) related.clear();
    rec.cve_refs = extract_cves(rec.record_id, aliases, upstream, related);

    const auto withdrawn_it = doc.find("withdrawn");
    rec.is_withdrawn = withdrawn_it != doc.end() && withdrawn_it->is_string() &&
                       !withdrawn_it->get<std::string>().empty();

    rec.published_day = detail::day_field(doc, "published");
    rec.modified_day = detail::day_field(doc, "modified");

    const auto affected_it = doc.find("affected");
    if (affected_it != doc.end() && affected_it->is_array()) {
        for (const auto& entry : *affected_it) {
            if (!entry.is_object()) continue;
            const auto pkg = entry.find("package");
            if (pkg == entry.end() || !pkg->is_object()) continue;
            const auto eco = pkg->find("ecosystem");
            if (eco == pkg->end() || !eco->is_string()) continue;
            const std::string raw = eco->get<std::string>();
            if (raw.empty()) continue;
            rec.ecosystems.insert(normalize_ecosystem(raw));
        }
    }

    const auto severity_it = doc.find("severity");
    if (severity_it != doc.end() && severity_it->is_array()) {
        for (const auto& entry : *severity_it) {
            if (!entry.is_object()) continue;
            const auto score = entry.find("score");
            if (score != entry.end() && score->is_string()) {
                rec.severity_vectors.push_back(score->get<std::string>());
            }
        }
    }
    return rec;
}

/// Skip classification, applied in fixed priority order so each record is
/// counted in at most one bucket.
inline std::optional<SkipReason> classify(const VulnRecord& rec) {
    if (rec.is_malware) return SkipReason::malware;
    if (rec.is_withdrawn) return SkipReason::withdrawn;
    if (rec.cve_refs.empty()) return SkipReason::no_cve;
    if (rec.ecosystems.empty()) return SkipReason::no_ecosystem;
    if (!rec.published_day && !rec.modified_day) return SkipReason::no_timestamp;
    return std::nullopt;
}

/// Cross product of the record's CVEs and ecosystems, stamped with the
/// published day (modified day as fallback). Empty when the record lacks
/// CVEs, ecosystems, or both timestamps.
inline std::vector<Event> record_to_events(const VulnRecord& rec) {
    std::vector<Event> events;
    if (!rec.published_day && !rec.modified_day) return events;
    const DayNumber day = rec.published_day ? *rec.published_day : *rec.modified_day;
    events.reserve(rec.cve_refs.size() * rec.ecosystems.size());
    for (const auto& cve : rec.cve_refs) {
        for (const auto& eco : rec.ecosystems) {
            events.push_back({cve, eco, day});
        }
    }
    return events;
}

/// Classify + expand one parsed record, updating the counters. Returns the
/// record's events, or nothing when it was skipped.
inline std::vector<Event> ingest_record(const VulnRecord& rec, IngestStats& stats) {
    ++stats.records_seen;
    if (const auto reason = classify(rec)) {
        switch (*reason) {
            case SkipReason::malware: ++stats.records_skipped_malware; break;
            case SkipReason::withdrawn: ++stats.records_skipped_withdrawn; break;
            case SkipReason::no_cve: ++stats.records_skipped_no_cve; break;
            case SkipReason::no_ecosystem: ++stats.records_skipped_no_ecosystem; break;
            case SkipReason::no_timestamp: ++stats.records_skipped_no_timestamp; break;
        }
        return {};
    }
    std::vector<Event> events = record_to_events(rec);
    ++stats.records_contributing;
    stats.events_emitted += events.size();
    return events;
}

} // namespace osvtrace
