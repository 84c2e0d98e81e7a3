// osvtrace: reconstruct cross-ecosystem vulnerability propagation from OSV
// dumps. `analyze` builds the event log and report bundle; `fetch` downloads
// ecosystem dumps with a provenance manifest.

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include "osvtrace/dates.hpp"
#include "osvtrace/errors.hpp"
#include "osvtrace/fetch.hpp"
#include "osvtrace/report.hpp"
#include "osvtrace/version.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitEmptyCorpus = 2;

void apply_config_file(const std::string& path, osvtrace::PipelineConfig& config) {
    std::ifstream in(path);
    if (!in) throw osvtrace::IoError("cannot open config file " + path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw osvtrace::ParseError("config file " + path + ": " + e.what());
    }
    if (!doc.is_object()) throw osvtrace::ParseError("config file " + path + ": not an object");

    if (doc.contains("input_paths")) {
        config.input_paths = doc.at("input_paths").get<std::vector<std::string>>();
    }
    if (doc.contains("cutoff")) {
        config.cutoff_day = osvtrace::parse_iso_date(doc.at("cutoff").get<std::string>());
    }
    if (doc.contains("window_start")) {
        config.window_start_day =
            osvtrace::parse_iso_date(doc.at("window_start").get<std::string>());
    }
    if (doc.contains("top_k")) config.top_k = doc.at("top_k").get<std::size_t>();
    if (doc.contains("related_generates_events")) {
        config.related_generates_events = doc.at("related_generates_events").get<bool>();
    }
    if (doc.contains("min_cves_per_ecosystem")) {
        config.min_cves_per_ecosystem = doc.at("min_cves_per_ecosystem").get<std::uint64_t>();
    }
    if (doc.contains("output_dir")) config.output_dir = doc.at("output_dir").get<std::string>();
    if (doc.contains("fetch_ecosystems")) {
        config.fetch_ecosystems = doc.at("fetch_ecosystems").get<std::vector<std::string>>();
    }
    if (doc.contains("threads")) config.threads = doc.at("threads").get<unsigned>();
}

void print_summary(const osvtrace::Report& report) {
    std::cout << "corpus: " << report.cve_count << " CVEs, "
              << report.log.ecosystem_set().size() << " ecosystems, " << report.log.size()
              << " events\n";
    std::cout << "sequences: " << report.ranking.rows.size() << " unique, "
              << report.delay_records.size() << " CVEs span multiple ecosystems\n";
    if (!report.delay_stats.empty) {
        std::cout << "delays: median " << report.delay_stats.overall.median << " days, mean "
                  << report.delay_stats.overall.mean << " days\n";
    }
    if (report.h1) {
        std::cout << "H1: r=" << report.h1->r << " (n=" << report.h1->n << ") -> "
                  << report.h1->verdict << "\n";
    } else {
        std::cout << "H1: not testable on this corpus\n";
    }
    if (report.h2) {
        std::size_t significant = 0;
        for (const auto& res : report.h2->results) significant += res.significant ? 1 : 0;
        std::cout << "H2: " << significant << "/" << report.h2->results.size()
                  << " ecosystems significant at corrected alpha=" << report.h2->alpha_corrected
                  << "\n";
    }
    std::cout << "severity: " << report.severity.verdict;
    if (report.severity.r) std::cout << ", r=" << *report.severity.r << " (n=" << report.severity.n << ")";
    std::cout << "\n";
    if (!report.diagnostics.empty()) {
        std::cerr << report.diagnostics.size() << " input diagnostics (see report.json)\n";
    }
    for (const std::string& warning : report.warnings) std::cerr << "warning: " << warning << "\n";
}

int run_analyze(osvtrace::PipelineConfig& config) {
    if (config.input_paths.empty()) throw osvtrace::ArgumentError("analyze: no --input given");
    if (config.output_dir.empty()) throw osvtrace::ArgumentError("analyze: no --out given");
    const osvtrace::Report report = osvtrace::run_pipeline(config);
    print_summary(report);
    std::cout << "report: " << (std::filesystem::path(config.output_dir) / "report.json").string()
              << "\n";
    return kExitOk;
}

int run_fetch(const osvtrace::PipelineConfig& config, const std::string& base_url) {
    if (config.output_dir.empty()) throw osvtrace::ArgumentError("fetch: no --out given");
    const osvtrace::FetchManifest manifest =
        osvtrace::fetch_dumps(config.fetch_ecosystems, config.output_dir, base_url);
    for (const osvtrace::FetchEntry& e : manifest.entries) {
        if (e.ok) {
            std::cout << e.ecosystem << ": " << e.bytes << " bytes, sha256 " << e.sha256 << "\n";
        } else {
            std::cerr << e.ecosystem << ": failed (" << e.error << ")\n";
        }
    }
    std::cout << "manifest: "
              << (std::filesystem::path(config.output_dir) / "manifest.json").string() << "\n";
    if (manifest.all_failed()) {
        std::cerr << "all downloads failed\n";
        return kExitFailure;
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Trace CVE propagation across open-source ecosystems from OSV dumps"};
    app.set_version_flag("--version", std::string(osvtrace::kVersion));
    app.require_subcommand(0, 1);

    std::string config_file;

    CLI::App* analyze = app.add_subcommand("analyze", "Build the event log and report bundle");
    std::vector<std::string> inputs;
    std::string cutoff, window_start, out_dir;
    std::size_t top_k = 0;
    std::uint64_t min_cves = 0;
    unsigned threads = 0;
    bool no_related = false;
    analyze->add_option("--config", config_file, "JSON config file; flags override it");
    analyze->add_option("--input", inputs, "OSV JSON files, directories, or zip archives");
    analyze->add_option("--cutoff", cutoff, "Inclusive snapshot cutoff date (YYYY-MM-DD)");
    analyze->add_option("--window-start", window_start, "Earliest event date (default 2000-01-01)");
    analyze->add_option("--top-k", top_k, "Ranking rows embedded in the report (default 30)");
    analyze->add_flag("--no-related-events", no_related,
                      "Ignore the 'related' field when collecting CVE ids");
    analyze->add_option("--min-cves", min_cves,
                        "Drop ecosystems referenced by fewer distinct CVEs (default 1)");
    analyze->add_option("--threads", threads, "Ingestion worker threads (default: all cores)");
    analyze->add_option("--out", out_dir, "Output directory for the report bundle");

    CLI::App* fetch = app.add_subcommand("fetch", "Download ecosystem dumps from the OSV bucket");
    std::vector<std::string> ecosystems;
    std::string fetch_out;
    std::string base_url = osvtrace::kOsvBucketUrl;
    fetch->add_option("--config", config_file, "JSON config file; flags override it");
    fetch->add_option("--ecosystem", ecosystems, "Ecosystem names, e.g. npm PyPI");
    fetch->add_option("--out", fetch_out, "Destination directory");
    fetch->add_option("--base-url", base_url, "Alternate dump server (mirrors, testing)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        osvtrace::PipelineConfig config;
        if (analyze->parsed()) {
            if (analyze->count("--config")) apply_config_file(config_file, config);
            if (analyze->count("--input")) config.input_paths = inputs;
            if (analyze->count("--cutoff")) config.cutoff_day = osvtrace::parse_iso_date(cutoff);
            if (analyze->count("--window-start")) {
                config.window_start_day = osvtrace::parse_iso_date(window_start);
            }
            if (analyze->count("--top-k")) config.top_k = top_k;
            if (no_related) config.related_generates_events = false;
            if (analyze->count("--min-cves")) config.min_cves_per_ecosystem = min_cves;
            if (analyze->count("--threads")) config.threads = threads;
            if (analyze->count("--out")) config.output_dir = out_dir;
            return run_analyze(config);
        }
        if (fetch->parsed()) {
            if (fetch->count("--config")) apply_config_file(config_file, config);
            if (fetch->count("--ecosystem")) config.fetch_ecosystems = ecosystems;
            if (fetch->count("--out")) config.output_dir = fetch_out;
            return run_fetch(config, base_url);
        }
        std::cerr << app.help();
        return kExitFailure;
    } catch (const osvtrace::EmptyCorpusError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitEmptyCorpus;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
}
