#pragma once

// Report assembly and the analyze pipeline: ingest -> event log -> mining ->
// hypothesis tests, then a reproducible report bundle (report.json plus the
// plot-data CSVs). Identical inputs and config yield byte-identical bundles.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "osvtrace/dates.hpp"
#include "osvtrace/errors.hpp"
#include "osvtrace/event_log.hpp"
#include "osvtrace/mining.hpp"
#include "osvtrace/pipeline.hpp"
#include "osvtrace/stats.hpp"
#include "osvtrace/version.hpp"

namespace osvtrace {

struct Report {
    PipelineConfig config;
    std::string version = kVersion;
    IngestStats ingest;
    std::vector<Diagnostic> diagnostics;
    MinCvesFilter min_cves;
    EventLog log{DayWindow{}};
    TraceMap traces;
    SequenceRanking ranking; // full, descending count
    LengthDistribution lengths;
    std::map<std::string, double> single_shares; // ecosystem -> singleton share
    std::vector<DelayRecord> delay_records;
    DelaySummary delay_stats;
    std::optional<H1Result> h1;
    std::optional<H2Outcome> h2;
    SeverityCheck severity;
    std::uint64_t severity_vectors_seen = 0;
    std::uint64_t severity_vectors_skipped = 0;
    std::uint64_t severity_cves_scored = 0;
    bool snapshot_checks_applicable = false;
    std::vector<std::string> warnings;
    std::uint64_t cve_count = 0;
};

namespace detail {

inline std::string format_double(double v) {
    char buf[32];
    const auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, p);
}

inline std::string joined_key(const SequenceKey& key) {
    std::string out;
    for (std::size_t i = 0; i < key.size(); ++i) {
        if (i) out.push_back('>');
        out += key[i];
    }
    return out;
}

} // namespace detail

/// Informational sanity checks for full-snapshot runs; never failures. The
/// thresholds are order-of-magnitude expectations for a current database
/// snapshot and are skipped entirely for small corpora.
inline std::vector<std::string> snapshot_soft_checks(const Report& report) {
    std::vector<std::string> warnings;
    const std::uint64_t n = report.cve_count;
    if (n < 10000) return warnings; // not a snapshot-scale corpus

    if (n < 8452 || n > 845200) {
        warnings.push_back("snapshot check: CVE count " + std::to_string(n) +
                           " is outside the expected order of magnitude (~84520)");
    }
    const auto github = report.single_shares.find("GitHub");
    const double share = github == report.single_shares.end() ? 0.0 : github->second;
    if (share < 0.05 || share > 0.30) {
        warnings.push_back("snapshot check: GitHub-only share " + detail::format_double(share) +
                           " is outside the expected range [0.05, 0.30]");
    }
    if (!report.delay_stats.empty) {
        const double median = report.delay_stats.overall.median;
        if (median < 365.0 || median > 1461.0) {
            warnings.push_back("snapshot check: median multi-ecosystem delay " +
                               detail::format_double(median) +
                               " days is outside the expected range [365, 1461]");
        }
    }
    return warnings;
}

/// Run the analysis over the configured corpus without touching the output
/// directory. Throws EmptyCorpusError when nothing survives the filters.
inline Report analyze_corpus(const PipelineConfig& config) {
    validate(config);
    const std::vector<WorkUnit> units = enumerate_corpus(config.input_paths);

    ParseOptions options;
    options.include_related = config.related_generates_events;
    IngestOutcome outcome = ingest_corpus(units, config.window(), options, config.threads);

    Report report;
    report.config = config;
    report.ingest = outcome.stats;
    report.diagnostics = std::move(outcome.diagnostics);
    report.min_cves = apply_min_cves_filter(outcome.log, config.min_cves_per_ecosystem);
    report.log = std::move(outcome.log);
    if (report.log.empty()) {
        throw EmptyCorpusError("no records survived parsing and filtering");
    }

    report.traces = all_traces(report.log);
    report.ranking = frequency_ranking(report.traces);
    report.lengths = length_distribution(report.traces);
    report.cve_count = report.traces.size();
    for (const std::string& eco : report.log.ecosystem_set()) {
        report.single_shares.emplace(eco, single_ecosystem_share(report.traces, eco));
    }
    report.delay_records = delays(report.traces);
    report.delay_stats = delay_summary(report.delay_records, /*group_by_m=*/true);

    if (report.delay_records.size() >= 2) {
        try {
            report.h1 = h1_correlate(report.delay_records);
        } catch (const ArgumentError&) {
            // constant delays or lengths: correlation undefined
        }
    }
    if (!report.delay_records.empty()) {
        report.h2 = h2_presence_tests(report.traces, report.delay_records);
    }

    const std::vector<SeverityRecord> severity_records = outcome.severity.records();
    report.severity = severity_delay_check(severity_records, report.delay_records);
    report.severity_vectors_seen = outcome.severity.vectors_seen;
    report.severity_vectors_skipped = outcome.severity.vectors_skipped;
    report.severity_cves_scored = severity_records.size();

    report.snapshot_checks_applicable = report.cve_count >= 10000;
    report.warnings = snapshot_soft_checks(report);
    return report;
}

namespace detail {

inline nlohmann::json opt_json(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline nlohmann::json box_stats_json(const BoxStats& box) {
    nlohmann::json j;
    j["n"] = box.n;
    j["mean"] = box.mean;
    j["min"] = box.min;
    j["q1"] = box.q1;
    j["median"] = box.median;
    j["q3"] = box.q3;
    j["max"] = box.max;
    j["lo_whisker"] = box.lo_whisker;
    j["hi_whisker"] = box.hi_whisker;
    j["outliers"] = box.outliers;
    return j;
}

} // namespace detail

inline nlohmann::json report_to_json(const Report& report) {
    nlohmann::json j;

    j["version"] = report.version;
    j["artifacts"] = {"delay_boxplot.csv", "delays.csv",   "events.csv",
                      "h1.json",           "sequences.csv", "tests.csv"};

    nlohmann::json config;
    config["input_paths"] = report.config.input_paths;
    config["cutoff"] = format_iso_date(report.config.cutoff_day);
    config["window_start"] = format_iso_date(report.config.window_start_day);
    config["top_k"] = report.config.top_k;
    config["related_generates_events"] = report.config.related_generates_events;
    config["min_cves_per_ecosystem"] = report.config.min_cves_per_ecosystem;
    config["output_dir"] = report.config.output_dir;
    j["config"] = config;

    nlohmann::json corpus;
    corpus["cve_count"] = report.cve_count;
    corpus["ecosystem_count"] = report.log.ecosystem_set().size();
    corpus["event_count"] = report.log.size();
    corpus["unique_sequence_count"] = report.ranking.rows.size();
    std::uint64_t multi_sequences = 0;
    for (const RankingRow& row : report.ranking.rows) {
        if (row.key.size() > 1) ++multi_sequences;
    }
    corpus["multi_sequence_count"] = multi_sequences;
    corpus["multi_trace_cve_count"] = report.delay_records.size();
    corpus["single_ecosystem_shares"] = report.single_shares;
    j["corpus"] = corpus;

    nlohmann::json ingest;
    ingest["records_seen"] = report.ingest.records_seen;
    ingest["records_skipped_malware"] = report.ingest.records_skipped_malware;
    ingest["records_skipped_withdrawn"] = report.ingest.records_skipped_withdrawn;
    ingest["records_skipped_no_cve"] = report.ingest.records_skipped_no_cve;
    ingest["records_skipped_no_ecosystem"] = report.ingest.records_skipped_no_ecosystem;
    ingest["records_skipped_no_timestamp"] = report.ingest.records_skipped_no_timestamp;
    ingest["records_contributing"] = report.ingest.records_contributing;
    ingest["events_emitted"] = report.ingest.events_emitted;
    ingest["duplicate_events_collapsed"] = report.ingest.duplicate_events_collapsed;
    ingest["events_out_of_window"] = report.ingest.events_out_of_window;
    j["ingest"] = ingest;

    nlohmann::json diagnostics = nlohmann::json::array();
    for (const Diagnostic& d : report.diagnostics) {
        diagnostics.push_back({{"source", d.source}, {"message", d.message}});
    }
    j["diagnostics"] = diagnostics;

    nlohmann::json min_cves;
    min_cves["threshold"] = report.min_cves.threshold;
    min_cves["dropped_ecosystems"] = report.min_cves.dropped_ecosystems;
    min_cves["events_dropped"] = report.min_cves.events_dropped;
    j["min_cves_filter"] = min_cves;

    nlohmann::json ranking = nlohmann::json::array();
    const std::size_t shown = std::min(report.config.top_k, report.ranking.rows.size());
    for (std::size_t i = 0; i < shown; ++i) {
        const RankingRow& row = report.ranking.rows[i];
        nlohmann::json r;
        r["rank"] = i + 1;
        r["key"] = detail::joined_key(row.key);
        r["m"] = row.key.size();
        r["count"] = row.count;
        r["share"] = row.share;
        ranking.push_back(std::move(r));
    }
    j["ranking_top"] = ranking;

    nlohmann::json lengths;
    nlohmann::json histogram;
    for (const auto& [m, count] : report.lengths.histogram) {
        histogram[std::to_string(m)] = count;
    }
    lengths["histogram"] = histogram;
    lengths["mean"] = report.lengths.mean;
    lengths["median"] = report.lengths.median;
    lengths["multi_count"] = report.lengths.multi_count;
    lengths["multi_mean"] = report.lengths.multi_mean;
    lengths["multi_median"] = report.lengths.multi_median;
    j["lengths"] = lengths;

    nlohmann::json delays_json;
    delays_json["empty"] = report.delay_stats.empty;
    if (!report.delay_stats.empty) {
        delays_json["overall"] = detail::box_stats_json(report.delay_stats.overall);
        nlohmann::json by_length;
        for (const auto& [m, box] : report.delay_stats.by_length) {
            by_length[std::to_string(m)] = detail::box_stats_json(box);
        }
        delays_json["by_length"] = by_length;
    }
    j["delays"] = delays_json;

    nlohmann::json h1;
    if (report.h1) {
        h1["r"] = report.h1->r;
        h1["n"] = report.h1->n;
        h1["verdict"] = report.h1->verdict;
    } else {
        h1["r"] = nullptr;
        h1["n"] = report.delay_records.size();
        h1["verdict"] = "not_testable";
    }
    j["h1"] = h1;

    nlohmann::json h2;
    if (report.h2) {
        h2["status"] = "tested";
        h2["alpha"] = report.h2->alpha;
        h2["alpha_corrected"] = report.h2->alpha_corrected;
        h2["ecosystem_count"] = report.h2->ecosystem_count;
        nlohmann::json results = nlohmann::json::array();
        for (const EcosystemTestResult& res : report.h2->results) {
            nlohmann::json r;
            r["ecosystem"] = res.ecosystem;
            r["n_present"] = res.n_present;
            r["n_absent"] = res.n_absent;
            r["mean_present"] = detail::opt_json(res.mean_present);
            r["mean_absent"] = detail::opt_json(res.mean_absent);
            r["t"] = detail::opt_json(res.t_stat);
            r["df"] = detail::opt_json(res.df);
            r["p"] = detail::opt_json(res.p_value);
            r["significant"] = res.significant;
            r["direction"] = to_string(res.direction);
            r["status"] = to_string(res.status);
            results.push_back(std::move(r));
        }
        h2["results"] = results;
    } else {
        h2["status"] = "no_multi_traces";
        h2["alpha"] = 0.05;
        const std::size_t eco_count = report.log.ecosystem_set().size();
        h2["ecosystem_count"] = eco_count;
        h2["alpha_corrected"] =
            detail::opt_json(eco_count ? std::optional(0.05 / static_cast<double>(eco_count))
                                       : std::nullopt);
        h2["results"] = nlohmann::json::array();
    }
    j["h2"] = h2;

    nlohmann::json severity;
    severity["verdict"] = report.severity.verdict;
    severity["n"] = report.severity.n;
    severity["unmatched"] = report.severity.unmatched;
    severity["r"] = detail::opt_json(report.severity.r);
    severity["vectors_seen"] = report.severity_vectors_seen;
    severity["vectors_skipped"] = report.severity_vectors_skipped;
    severity["cves_scored"] = report.severity_cves_scored;
    j["severity"] = severity;

    nlohmann::json snapshot;
    snapshot["applicable"] = report.snapshot_checks_applicable;
    snapshot["warnings"] = report.warnings;
    j["snapshot_checks"] = snapshot;

    return j;
}

namespace detail {

inline std::ofstream open_artifact(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

} // namespace detail

/// Write the plot-data artifacts next to report.json. Returns the files
/// written, in emission order.
inline std::vector<std::filesystem::path> emit_plot_data(const Report& report,
                                                         const std::filesystem::path& out_dir) {
    namespace fs = std::filesystem;
    std::vector<fs::path> written;

    {
        auto out = detail::open_artifact(out_dir / "sequences.csv");
        out << "rank,key,count,share\n";
        for (std::size_t i = 0; i < report.ranking.rows.size(); ++i) {
            const RankingRow& row = report.ranking.rows[i];
            out << (i + 1) << ',' << detail::joined_key(row.key) << ',' << row.count << ','
                << detail::format_double(row.share) << '\n';
        }
        written.push_back(out_dir / "sequences.csv");
    }
    {
        auto out = detail::open_artifact(out_dir / "delays.csv");
        out << "cve,m,delay_days\n";
        for (const DelayRecord& r : report.delay_records) {
            out << r.cve << ',' << r.m << ',' << r.delay_days << '\n';
        }
        written.push_back(out_dir / "delays.csv");
    }
    {
        auto out = detail::open_artifact(out_dir / "delay_boxplot.csv");
        out << "m,q1,median,q3,lo_whisker,hi_whisker,n_outliers\n";
        if (!report.delay_stats.empty) {
            for (const auto& [m, box] : report.delay_stats.by_length) {
                out << m << ',' << detail::format_double(box.q1) << ','
                    << detail::format_double(box.median) << ',' << detail::format_double(box.q3)
                    << ',' << detail::format_double(box.lo_whisker) << ','
                    << detail::format_double(box.hi_whisker) << ',' << box.outliers.size() << '\n';
            }
        }
        written.push_back(out_dir / "delay_boxplot.csv");
    }
    {
        auto out = detail::open_artifact(out_dir / "tests.csv");
        out << "ecosystem,n_present,n_absent,mean_present,mean_absent,t,df,p,significant,"
               "direction,status\n";
        if (report.h2) {
            const auto cell = [](const std::optional<double>& v) {
                return v ? detail::format_double(*v) : std::string();
            };
            for (const EcosystemTestResult& res : report.h2->results) {
                out << res.ecosystem << ',' << res.n_present << ',' << res.n_absent << ','
                    << cell(res.mean_present) << ',' << cell(res.mean_absent) << ','
                    << cell(res.t_stat) << ',' << cell(res.df) << ',' << cell(res.p_value) << ','
                    << (res.significant ? "true" : "false") << ',' << to_string(res.direction)
                    << ',' << to_string(res.status) << '\n';
            }
        }
        written.push_back(out_dir / "tests.csv");
    }
    {
        auto out = detail::open_artifact(out_dir / "h1.json");
        nlohmann::json h1 = report_to_json(report)["h1"];
        out << h1.dump(2) << '\n';
        written.push_back(out_dir / "h1.json");
    }
    return written;
}

/// Write the full bundle: report.json, events.csv, and the plot data.
inline std::vector<std::filesystem::path> write_report_bundle(
    const Report& report, const std::filesystem::path& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    std::vector<fs::path> written;
    {
        auto out = detail::open_artifact(out_dir / "events.csv");
        save_events_csv(report.log, out);
        written.push_back(out_dir / "events.csv");
    }
    for (fs::path& path : emit_plot_data(report, out_dir)) written.push_back(std::move(path));
    {
        auto out = detail::open_artifact(out_dir / "report.json");
        out << report_to_json(report).dump(2) << '\n';
        written.push_back(out_dir / "report.json");
    }
    return written;
}

/// The analyze pipeline end-to-end: analysis plus the report bundle.
inline Report run_pipeline(const PipelineConfig& config) {
    Report report = analyze_corpus(config);
    write_report_bundle(report, config.output_dir);
    return report;
}

} // namespace osvtrace
