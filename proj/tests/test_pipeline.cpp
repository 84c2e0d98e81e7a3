#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <sys/wait.h>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "osvtrace/report.hpp"

using namespace osvtrace;
namespace fs = std::filesystem;

namespace {

fs::path data_dir() { return fs::path(OSVTRACE_TEST_DATA_DIR); }

PipelineConfig fixture_config() {
    PipelineConfig config;
    config.input_paths = {(data_dir() / "corpus").string()};
    config.cutoff_day = parse_iso_date("2025-04-19");
    return config;
}

nlohmann::json load_json(const fs::path& path) {
    std::ifstream in(path);
    REQUIRE(in);
    return nlohmann::json::parse(in);
}

std::string basename_of(const std::string& source) {
    const auto slash = source.find_last_of('/');
    return slash == std::string::npos ? source : source.substr(slash + 1);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void check_optional(const std::optional<double>& got, const nlohmann::json& want, double tol) {
    if (want.is_null()) {
        CHECK_FALSE(got.has_value());
    } else {
        REQUIRE(got.has_value());
        CHECK_THAT(*got, Catch::Matchers::WithinAbs(want.get<double>(), tol));
    }
}

void check_box(const BoxStats& got, const nlohmann::json& want) {
    constexpr double tol = 1e-9;
    CHECK(got.n == want.at("n").get<std::uint64_t>());
    CHECK_THAT(got.mean, Catch::Matchers::WithinAbs(want.at("mean").get<double>(), tol));
    CHECK_THAT(got.min, Catch::Matchers::WithinAbs(want.at("min").get<double>(), tol));
    CHECK_THAT(got.q1, Catch::Matchers::WithinAbs(want.at("q1").get<double>(), tol));
    CHECK_THAT(got.median, Catch::Matchers::WithinAbs(want.at("median").get<double>(), tol));
    CHECK_THAT(got.q3, Catch::Matchers::WithinAbs(want.at("q3").get<double>(), tol));
    CHECK_THAT(got.max, Catch::Matchers::WithinAbs(want.at("max").get<double>(), tol));
    CHECK_THAT(got.lo_whisker,
               Catch::Matchers::WithinAbs(want.at("lo_whisker").get<double>(), tol));
    CHECK_THAT(got.hi_whisker,
               Catch::Matchers::WithinAbs(want.at("hi_whisker").get<double>(), tol));
    const auto outliers = want.at("outliers").get<std::vector<double>>();
    REQUIRE(got.outliers.size() == outliers.size());
    for (std::size_t i = 0; i < outliers.size(); ++i) {
        CHECK_THAT(got.outliers[i], Catch::Matchers::WithinAbs(outliers[i], tol));
    }
}

int run_cli(const std::string& args, const fs::path& cwd) {
    const std::string cmd = "cd " + cwd.string() + " && " + OSVTRACE_CLI_PATH + " " + args +
                            " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WEXITSTATUS(status);
}

} // namespace

TEST_CASE("fixture corpus matches the brute-force oracle") {
    const nlohmann::json expected = load_json(data_dir() / "oracle_expected.json");
    const Report report = analyze_corpus(fixture_config());

    SECTION("ingest counters") {
        const auto& e = expected.at("ingest");
        CHECK(report.ingest.records_seen == e.at("records_seen").get<std::uint64_t>());
        CHECK(report.ingest.records_skipped_malware ==
              e.at("records_skipped_malware").get<std::uint64_t>());
        CHECK(report.ingest.records_skipped_withdrawn ==
              e.at("records_skipped_withdrawn").get<std::uint64_t>());
        CHECK(report.ingest.records_skipped_no_cve ==
              e.at("records_skipped_no_cve").get<std::uint64_t>());
        CHECK(report.ingest.records_skipped_no_ecosystem ==
              e.at("records_skipped_no_ecosystem").get<std::uint64_t>());
        CHECK(report.ingest.records_skipped_no_timestamp ==
              e.at("records_skipped_no_timestamp").get<std::uint64_t>());
        CHECK(report.ingest.records_contributing ==
              e.at("records_contributing").get<std::uint64_t>());
        CHECK(report.ingest.events_emitted == e.at("events_emitted").get<std::uint64_t>());
        CHECK(report.ingest.duplicate_events_collapsed ==
              e.at("duplicate_events_collapsed").get<std::uint64_t>());
        CHECK(report.ingest.events_out_of_window ==
              e.at("events_out_of_window").get<std::uint64_t>());
        CHECK(report.ingest.bookkeeping_holds());
    }

    SECTION("diagnostics") {
        const auto sources = expected.at("diagnostic_sources").get<std::vector<std::string>>();
        REQUIRE(report.diagnostics.size() == sources.size());
        for (std::size_t i = 0; i < sources.size(); ++i) {
            CHECK(basename_of(report.diagnostics[i].source) == sources[i]);
        }
    }

    SECTION("event log, event for event") {
        const auto& events = expected.at("events");
        REQUIRE(report.log.size() == events.size());
        std::size_t i = 0;
        for (const auto& [key, day] : report.log.entries()) {
            CHECK(key.first == events[i][0].get<std::string>());
            CHECK(key.second == events[i][1].get<std::string>());
            CHECK(day == events[i][2].get<DayNumber>());
            ++i;
        }
    }

    SECTION("corpus summary") {
        const auto& c = expected.at("corpus");
        CHECK(report.cve_count == c.at("cve_count").get<std::uint64_t>());
        CHECK(report.log.ecosystem_set().size() == c.at("ecosystem_count").get<std::size_t>());
        CHECK(report.log.size() == c.at("event_count").get<std::size_t>());
        CHECK(report.ranking.rows.size() == c.at("unique_sequence_count").get<std::size_t>());
        CHECK(report.delay_records.size() == c.at("multi_trace_cve_count").get<std::size_t>());
        const auto shares = c.at("single_ecosystem_shares");
        REQUIRE(report.single_shares.size() == shares.size());
        for (const auto& [eco, share] : report.single_shares) {
            CHECK_THAT(share, Catch::Matchers::WithinAbs(shares.at(eco).get<double>(), 1e-12));
        }
    }

    SECTION("sequence ranking") {
        const auto& rows = expected.at("ranking");
        REQUIRE(report.ranking.rows.size() == rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const RankingRow& row = report.ranking.rows[i];
            CHECK(detail::joined_key(row.key) == rows[i].at("key").get<std::string>());
            CHECK(row.key.size() == rows[i].at("m").get<std::size_t>());
            CHECK(row.count == rows[i].at("count").get<std::uint64_t>());
            CHECK_THAT(row.share,
                       Catch::Matchers::WithinAbs(rows[i].at("share").get<double>(), 1e-12));
        }
    }

    SECTION("length distribution") {
        const auto& l = expected.at("lengths");
        const auto histogram = l.at("histogram");
        REQUIRE(report.lengths.histogram.size() == histogram.size());
        for (const auto& [m, count] : report.lengths.histogram) {
            CHECK(count == histogram.at(std::to_string(m)).get<std::uint64_t>());
        }
        CHECK_THAT(report.lengths.mean,
                   Catch::Matchers::WithinAbs(l.at("mean").get<double>(), 1e-12));
        CHECK_THAT(report.lengths.median,
                   Catch::Matchers::WithinAbs(l.at("median").get<double>(), 1e-12));
        CHECK(report.lengths.multi_count == l.at("multi_count").get<std::uint64_t>());
        CHECK_THAT(report.lengths.multi_mean,
                   Catch::Matchers::WithinAbs(l.at("multi_mean").get<double>(), 1e-12));
        CHECK_THAT(report.lengths.multi_median,
                   Catch::Matchers::WithinAbs(l.at("multi_median").get<double>(), 1e-12));
    }

    SECTION("delay records") {
        const auto& rows = expected.at("delays");
        REQUIRE(report.delay_records.size() == rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            CHECK(report.delay_records[i].cve == rows[i].at("cve").get<std::string>());
            CHECK(report.delay_records[i].m == rows[i].at("m").get<std::size_t>());
            CHECK(report.delay_records[i].delay_days ==
                  rows[i].at("delay_days").get<DayNumber>());
        }
    }

    SECTION("delay summary") {
        REQUIRE_FALSE(report.delay_stats.empty);
        check_box(report.delay_stats.overall, expected.at("delay_stats").at("overall"));
        const auto& by_length = expected.at("delay_stats").at("by_length");
        REQUIRE(report.delay_stats.by_length.size() == by_length.size());
        for (const auto& [m, box] : report.delay_stats.by_length) {
            check_box(box, by_length.at(std::to_string(m)));
        }
    }

    SECTION("H1") {
        const auto& h1 = expected.at("h1");
        REQUIRE(report.h1.has_value());
        CHECK_THAT(report.h1->r, Catch::Matchers::WithinAbs(h1.at("r").get<double>(), 1e-9));
        CHECK(report.h1->n == h1.at("n").get<std::size_t>());
        CHECK(report.h1->verdict == h1.at("verdict").get<std::string>());
    }

    SECTION("H2") {
        const auto& h2 = expected.at("h2");
        REQUIRE(report.h2.has_value());
        CHECK_THAT(report.h2->alpha_corrected,
                   Catch::Matchers::WithinAbs(h2.at("alpha_corrected").get<double>(), 1e-15));
        CHECK(report.h2->ecosystem_count == h2.at("ecosystem_count").get<std::size_t>());
        const auto& rows = h2.at("results");
        REQUIRE(report.h2->results.size() == rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const EcosystemTestResult& res = report.h2->results[i];
            const auto& want = rows[i];
            INFO("ecosystem " << res.ecosystem);
            CHECK(res.ecosystem == want.at("ecosystem").get<std::string>());
            CHECK(res.n_present == want.at("n_present").get<std::size_t>());
            CHECK(res.n_absent == want.at("n_absent").get<std::size_t>());
            check_optional(res.mean_present, want.at("mean_present"), 1e-9);
            check_optional(res.mean_absent, want.at("mean_absent"), 1e-9);
            check_optional(res.t_stat, want.at("t"), 1e-9);
            check_optional(res.df, want.at("df"), 1e-9);
            check_optional(res.p_value, want.at("p"), 1e-9);
            CHECK(res.significant == want.at("significant").get<bool>());
            CHECK(to_string(res.direction) == want.at("direction").get<std::string>());
            CHECK(to_string(res.status) == want.at("status").get<std::string>());
        }
    }

    SECTION("severity check") {
        const auto& s = expected.at("severity");
        CHECK(report.severity.n == s.at("n").get<std::size_t>());
        CHECK(report.severity.unmatched == s.at("unmatched").get<std::size_t>());
        CHECK(report.severity.verdict == s.at("verdict").get<std::string>());
        check_optional(report.severity.r, s.at("r"), 1e-9);
        CHECK(report.severity_vectors_seen == s.at("vectors_seen").get<std::uint64_t>());
        CHECK(report.severity_vectors_skipped == s.at("vectors_skipped").get<std::uint64_t>());
        CHECK(report.severity_cves_scored == s.at("cves_scored").get<std::uint64_t>());
    }

    SECTION("no snapshot warnings on a small corpus") {
        CHECK_FALSE(report.snapshot_checks_applicable);
        CHECK(report.warnings.empty());
    }
}

TEST_CASE("analysis is invariant to thread count and repeated runs") {
    PipelineConfig config = fixture_config();
    config.threads = 1;
    const std::string first = report_to_json(analyze_corpus(config)).dump(2);
    config.threads = 8;
    const std::string second = report_to_json(analyze_corpus(config)).dump(2);
    config.threads = 3;
    const std::string third = report_to_json(analyze_corpus(config)).dump(2);
    CHECK(first == second);
    CHECK(first == third);
}

TEST_CASE("report bundles are byte-identical across runs") {
    const fs::path out_a = fs::temp_directory_path() / "osvtrace_bundle_a";
    const fs::path out_b = fs::temp_directory_path() / "osvtrace_bundle_b";
    fs::remove_all(out_a);
    fs::remove_all(out_b);

    PipelineConfig config = fixture_config();
    config.threads = 2;
    config.output_dir = out_a.string();
    run_pipeline(config);
    config.threads = 7;
    config.output_dir = out_b.string();
    run_pipeline(config);

    std::size_t compared = 0;
    for (const auto& entry : fs::directory_iterator(out_a)) {
        const fs::path other = out_b / entry.path().filename();
        REQUIRE(fs::exists(other));
        // the config echo differs (output_dir), everything else must not
        if (entry.path().filename() == "report.json") continue;
        CHECK(read_file(entry.path()) == read_file(other));
        ++compared;
    }
    CHECK(compared == 6);
    fs::remove_all(out_a);
    fs::remove_all(out_b);
}

TEST_CASE("no-related-events drops related-only references") {
    PipelineConfig config = fixture_config();
    config.related_generates_events = false;
    const Report report = analyze_corpus(config);

    // CVE-2023-8888's npm advisory references it only via `related`
    CHECK(report.cve_count == 18);
    CHECK(report.traces.at("CVE-2023-8888").length() == 1);
    CHECK(report.delay_records.size() == 9);
}

TEST_CASE("min-cves filter evicts rare ecosystems") {
    PipelineConfig config = fixture_config();
    config.min_cves_per_ecosystem = 2;
    const Report report = analyze_corpus(config);

    CHECK(report.min_cves.dropped_ecosystems ==
          std::vector<std::string>{"Go", "RubyGems", "crates.io"});
    CHECK(report.min_cves.events_dropped == 3);
    CHECK(report.log.ecosystem_set().size() == 5);
    // CVE-2022-5555 loses its crates.io step and becomes a GitHub singleton
    CHECK(report.traces.at("CVE-2022-5555").length() == 1);
    REQUIRE(report.h2.has_value());
    CHECK(report.h2->ecosystem_count == 5);
}

TEST_CASE("golden report bundle") {
    const fs::path golden = data_dir() / "golden";
    const fs::path work = fs::temp_directory_path() / "osvtrace_golden_run";
    fs::remove_all(work);
    fs::create_directories(work);
    fs::create_directory_symlink(data_dir() / "corpus", work / "corpus");

    const int rc =
        run_cli("analyze --input corpus --cutoff 2025-04-19 --out out --threads 4", work);
    REQUIRE(rc == 0);

    const char* files[] = {"report.json",       "events.csv", "sequences.csv", "delays.csv",
                           "delay_boxplot.csv", "tests.csv",  "h1.json"};
    for (const char* name : files) {
        INFO("artifact " << name);
        CHECK(read_file(work / "out" / name) == read_file(golden / name));
    }
    fs::remove_all(work);
}

TEST_CASE("cli contract: exit codes and config file") {
    const fs::path work = fs::temp_directory_path() / "osvtrace_cli_work";
    fs::remove_all(work);
    fs::create_directories(work / "empty");
    fs::create_directory_symlink(data_dir() / "corpus", work / "corpus");

    SECTION("empty corpus exits 2") {
        CHECK(run_cli("analyze --input empty --cutoff 2025-04-19 --out out_e", work) == 2);
    }
    SECTION("missing input exits 1") {
        CHECK(run_cli("analyze --input no_such_dir --cutoff 2025-04-19 --out out_m", work) == 1);
    }
    SECTION("missing cutoff exits 1") {
        CHECK(run_cli("analyze --input corpus --out out_c", work) == 1);
    }
    SECTION("version flag exits 0") { CHECK(run_cli("--version", work) == 0); }
    SECTION("config file with flag override") {
        std::ofstream config(work / "config.json");
        config << R"({"input_paths": ["corpus"], "cutoff": "2020-01-01", "output_dir": "out_f"})";
        config.close();
        // config alone: cutoff 2020-01-01 keeps some events, run succeeds
        CHECK(run_cli("analyze --config config.json", work) == 0);
        CHECK(fs::exists(work / "out_f" / "report.json"));
        // flag overrides the config's cutoff; result must match the plain run
        CHECK(run_cli("analyze --config config.json --cutoff 2025-04-19 --out out_g", work) == 0);
        const nlohmann::json doc = load_json(work / "out_g" / "report.json");
        CHECK(doc.at("config").at("cutoff").get<std::string>() == "2025-04-19");
        CHECK(doc.at("corpus").at("cve_count").get<int>() == 18);
    }
    fs::remove_all(work);
}

TEST_CASE("window start narrows the log") {
    PipelineConfig config = fixture_config();
    config.window_start_day = parse_iso_date("2021-01-01");
    const Report report = analyze_corpus(config);
    // every 2019/2020 event is now out of window
    CHECK(report.ingest.events_out_of_window >
          analyze_corpus(fixture_config()).ingest.events_out_of_window);
    for (const auto& [key, day] : report.log.entries()) {
        CHECK(day >= config.window_start_day);
    }
}
