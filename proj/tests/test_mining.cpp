#include <catch2/catch_amalgamated.hpp>

#include <map>

#include "osvtrace/mining.hpp"

using namespace osvtrace;

namespace {

// fixture from the ranking examples: A propagates, B and C stay in Debian
TraceMap fixture_traces() {
    TraceMap traces;
    traces.emplace("CVE-2020-000A",
                   Trace{"CVE-2020-000A", {{"GitHub", 100}, {"Debian", 130}, {"Ubuntu", 160}}});
    traces.emplace("CVE-2020-000B", Trace{"CVE-2020-000B", {{"Debian", 50}}});
    traces.emplace("CVE-2020-000C", Trace{"CVE-2020-000C", {{"Debian", 70}}});
    return traces;
}

} // namespace

TEST_CASE("sequence_key projects ecosystems in trace order") {
    const Trace chain{"c", {{"GitHub", 100}, {"Debian", 130}, {"Ubuntu", 160}}};
    CHECK(sequence_key(chain) == SequenceKey{"GitHub", "Debian", "Ubuntu"});

    const Trace single{"c", {{"Debian", 50}}};
    CHECK(sequence_key(single) == SequenceKey{"Debian"});

    const Trace tie{"c", {{"Debian", 10}, {"Ubuntu", 10}}};
    CHECK(sequence_key(tie) == SequenceKey{"Debian", "Ubuntu"});
}

TEST_CASE("frequency_ranking groups, counts and sorts") {
    const SequenceRanking ranking = frequency_ranking(fixture_traces());
    CHECK(ranking.total_cves == 3);
    REQUIRE(ranking.rows.size() == 2);
    CHECK(ranking.rows[0].key == SequenceKey{"Debian"});
    CHECK(ranking.rows[0].count == 2);
    CHECK_THAT(ranking.rows[0].share, Catch::Matchers::WithinAbs(2.0 / 3.0, 1e-15));
    CHECK(ranking.rows[1].key == SequenceKey{"GitHub", "Debian", "Ubuntu"});
    CHECK(ranking.rows[1].count == 1);

    std::uint64_t total = 0;
    double share_sum = 0.0;
    for (const auto& row : ranking.rows) {
        total += row.count;
        share_sum += row.share;
        CHECK(row.share > 0.0);
        CHECK(row.share <= 1.0);
    }
    CHECK(total == ranking.total_cves);
    CHECK_THAT(share_sum, Catch::Matchers::WithinAbs(1.0, 1e-9));

    CHECK_THROWS_AS(frequency_ranking(TraceMap{}), ArgumentError);
}

TEST_CASE("frequency_ranking breaks count ties lexicographically") {
    TraceMap traces;
    traces.emplace("CVE-2020-0001", Trace{"CVE-2020-0001", {{"npm", 10}}});
    traces.emplace("CVE-2020-0002", Trace{"CVE-2020-0002", {{"Debian", 10}}});
    traces.emplace("CVE-2020-0003", Trace{"CVE-2020-0003", {{"Debian", 10}, {"npm", 20}}});
    const SequenceRanking ranking = frequency_ranking(traces);
    REQUIRE(ranking.rows.size() == 3);
    CHECK(ranking.rows[0].key == SequenceKey{"Debian"});
    CHECK(ranking.rows[1].key == SequenceKey{"Debian", "npm"});
    CHECK(ranking.rows[2].key == SequenceKey{"npm"});
}

TEST_CASE("single trace gives a full-share ranking") {
    TraceMap traces;
    traces.emplace("CVE-2020-000A", Trace{"CVE-2020-000A", {{"npm", 10}}});
    const SequenceRanking ranking = frequency_ranking(traces);
    REQUIRE(ranking.rows.size() == 1);
    CHECK(ranking.rows[0].share == 1.0);
}

TEST_CASE("top_k takes a prefix") {
    const SequenceRanking ranking = frequency_ranking(fixture_traces());
    const SequenceRanking one = top_k(ranking, 1);
    REQUIRE(one.rows.size() == 1);
    CHECK(one.rows[0].key == SequenceKey{"Debian"});
    CHECK(one.rows[0].count == 2);
    CHECK(one.total_cves == 3);

    CHECK(top_k(ranking, 30).rows.size() == ranking.rows.size());
    CHECK_THROWS_AS(top_k(ranking, 0), ArgumentError);
}

TEST_CASE("length_distribution over the fixture") {
    const LengthDistribution dist = length_distribution(fixture_traces());
    CHECK(dist.histogram == std::map<std::size_t, std::uint64_t>{{1, 2}, {3, 1}});
    CHECK_THAT(dist.mean, Catch::Matchers::WithinAbs(5.0 / 3.0, 1e-15));
    CHECK(dist.median == 1.0);
    CHECK(dist.multi_count == 1);
    CHECK(dist.multi_mean == 3.0);
    CHECK(dist.multi_median == 3.0);
}

TEST_CASE("length_distribution of all singletons") {
    TraceMap traces;
    traces.emplace("CVE-2020-0001", Trace{"CVE-2020-0001", {{"npm", 10}}});
    traces.emplace("CVE-2020-0002", Trace{"CVE-2020-0002", {{"PyPI", 20}}});
    const LengthDistribution dist = length_distribution(traces);
    CHECK(dist.mean == 1.0);
    CHECK(dist.median == 1.0);
    CHECK(dist.multi_count == 0);
}

TEST_CASE("single_ecosystem_share") {
    const TraceMap traces = fixture_traces();
    CHECK_THAT(single_ecosystem_share(traces, "Debian"),
               Catch::Matchers::WithinAbs(2.0 / 3.0, 1e-15));
    // GitHub only appears inside a longer trace, so its singleton share is 0
    CHECK(single_ecosystem_share(traces, "GitHub") == 0.0);
    CHECK(single_ecosystem_share(traces, "CRAN") == 0.0);
}

TEST_CASE("delays cover exactly the multi-ecosystem traces") {
    TraceMap traces = fixture_traces();
    traces.emplace("CVE-2020-000D", Trace{"CVE-2020-000D", {{"GitHub", 100}, {"Ubuntu", 160}}});
    traces.emplace("CVE-2020-000E", Trace{"CVE-2020-000E", {{"Debian", 10}, {"Ubuntu", 10}}});

    const std::vector<DelayRecord> records = delays(traces);
    REQUIRE(records.size() == 3);
    CHECK(records[0].cve == "CVE-2020-000A");
    CHECK(records[0].delay_days == 60);
    CHECK(records[0].m == 3);
    CHECK(records[1].cve == "CVE-2020-000D");
    CHECK(records[1].delay_days == 60);
    CHECK(records[2].cve == "CVE-2020-000E");
    CHECK(records[2].delay_days == 0); // simultaneous steps
    for (const auto& r : records) {
        CHECK(r.m > 1);
        CHECK(r.delay_days >= 0);
    }
}

TEST_CASE("delays of an all-singleton corpus are empty") {
    TraceMap traces;
    traces.emplace("CVE-2020-0001", Trace{"CVE-2020-0001", {{"npm", 10}}});
    CHECK(delays(traces).empty());
}

TEST_CASE("delay_summary basics") {
    const std::vector<DelayRecord> records{{"CVE-2020-000A", 2, 60}, {"CVE-2020-000B", 2, 0}};
    const DelaySummary summary = delay_summary(records, true);
    REQUIRE_FALSE(summary.empty);
    CHECK(summary.overall.n == 2);
    CHECK(summary.overall.mean == 30.0);
    CHECK(summary.overall.median == 30.0);
    CHECK(summary.overall.min == 0.0);
    CHECK(summary.overall.max == 60.0);
    REQUIRE(summary.by_length.count(2) == 1);
    CHECK(summary.by_length.at(2).n == 2);
}

TEST_CASE("delay_summary flags tukey outliers") {
    // Q1 = Q3 = 0, IQR = 0: anything nonzero is outside the fences
    const std::vector<DelayRecord> records{
        {"CVE-2020-0001", 2, 0}, {"CVE-2020-0002", 2, 0}, {"CVE-2020-0003", 2, 0},
        {"CVE-2020-0004", 2, 0}, {"CVE-2020-0005", 2, 3650},
    };
    const DelaySummary summary = delay_summary(records, false);
    CHECK(summary.overall.q1 == 0.0);
    CHECK(summary.overall.q3 == 0.0);
    REQUIRE(summary.overall.outliers.size() == 1);
    CHECK(summary.overall.outliers[0] == 3650.0);
    CHECK(summary.overall.lo_whisker == 0.0);
    CHECK(summary.overall.hi_whisker == 0.0);
    CHECK(summary.by_length.empty());
}

TEST_CASE("delay_summary of empty input is an explicit marker") {
    const DelaySummary summary = delay_summary({}, true);
    CHECK(summary.empty);
    CHECK(summary.overall.n == 0);
}

TEST_CASE("delay_summary quartiles are ordered") {
    const std::vector<DelayRecord> records{
        {"CVE-2020-0001", 2, 5},   {"CVE-2020-0002", 2, 1},  {"CVE-2020-0003", 3, 700},
        {"CVE-2020-0004", 3, 80},  {"CVE-2020-0005", 4, 42}, {"CVE-2020-0006", 2, 9000},
        {"CVE-2020-0007", 2, 300},
    };
    const DelaySummary summary = delay_summary(records, true);
    const auto check_box = [](const BoxStats& b) {
        CHECK(b.min <= b.q1);
        CHECK(b.q1 <= b.median);
        CHECK(b.median <= b.q3);
        CHECK(b.q3 <= b.max);
        CHECK(b.lo_whisker >= b.min);
        CHECK(b.hi_whisker <= b.max);
    };
    check_box(summary.overall);
    for (const auto& [_, box] : summary.by_length) check_box(box);

    // linear-interpolation quartiles, checked against the sorted values
    // {1, 5, 42, 80, 300, 700, 9000}: positions 1.5 and 4.5
    CHECK(summary.overall.q1 == (5.0 + 42.0) / 2.0);
    CHECK(summary.overall.median == 80.0);
    CHECK(summary.overall.q3 == (300.0 + 700.0) / 2.0);
}
