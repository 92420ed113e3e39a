#include <catch2/catch_amalgamated.hpp>

#include <sstream>
#include <string>

#include "proxest/edgelist.hpp"

using namespace proxest;

namespace {

EdgeListDataset parse_string(const std::string& text, int segments = 49) {
    std::istringstream in(text);
    return parse_edge_list(in, segments, "test");
}

}  // namespace

TEST_CASE("empty and comment-only inputs are rejected") {
    CHECK_THROWS_WITH(parse_string(""), Catch::Matchers::ContainsSubstring("no events"));
    CHECK_THROWS_WITH(parse_string("# header\n   \n# more\n"),
                      Catch::Matchers::ContainsSubstring("no events"));
}

TEST_CASE("malformed lines report their line number") {
    CHECK_THROWS_WITH(parse_string("0 1 5\n0 two 7\n"),
                      Catch::Matchers::ContainsSubstring("test:2"));
    CHECK_THROWS_WITH(parse_string("0 1\n"), Catch::Matchers::ContainsSubstring("test:1"));
    CHECK_THROWS_WITH(parse_string("0 1 5 9\n"),
                      Catch::Matchers::ContainsSubstring("3 integer fields"));
    CHECK_THROWS_WITH(parse_string("-1 1 5\n"),
                      Catch::Matchers::ContainsSubstring("negative node id"));
    CHECK_THROWS_WITH(parse_string("0 1 -5\n"),
                      Catch::Matchers::ContainsSubstring("negative timestamp"));
    CHECK_THROWS_AS(parse_string("0 1 5\n", 0), ParseError);
}

TEST_CASE("node count is one plus the largest id") {
    EdgeListDataset ds = parse_string("# comment\n0 7 10\n3 2 20\n");
    CHECK(ds.events.size() == 2);
    CHECK(ds.node_count == 8);
    CHECK(ds.events[0].source == 0);
    CHECK(ds.events[0].target == 7);
    CHECK(ds.events[0].timestamp == 10);
}

TEST_CASE("binning records at most one hit per cell and segment") {
    // two events on the same edge at the ends of the time range: first and
    // last segment each active once, Xbar = 2/49
    EdgeListDataset ds = parse_string("0 1 0\n0 1 100\n");
    LogisticMatrixModel model = build_frequency_matrix(ds);
    CHECK(model.dimension == 2);
    CHECK(model.freq_matrix(0, 1) == Catch::Approx(2.0 / 49.0));
    CHECK(model.freq_matrix(1, 0) == 0.0);
    CHECK(model.freq_matrix(0, 0) == 0.0);

    // duplicate events in one segment still count once
    EdgeListDataset dup = parse_string("0 1 0\n0 1 1\n0 1 100\n");
    CHECK(build_frequency_matrix(dup).freq_matrix(0, 1) == Catch::Approx(2.0 / 49.0));
}

TEST_CASE("an edge active in every segment reaches frequency one") {
    std::string text;
    const int S = 7;
    for (int t = 0; t <= 60; ++t) text += "0 1 " + std::to_string(t) + "\n";
    EdgeListDataset ds = parse_string(text, S);
    LogisticMatrixModel model = build_frequency_matrix(ds);
    CHECK(model.freq_matrix(0, 1) == Catch::Approx(1.0));
    CHECK(model.trials_per_cell == S);
}

TEST_CASE("frequencies are multiples of 1/segments") {
    EdgeListDataset ds = parse_string("0 1 0\n1 0 3\n1 1 9\n0 1 9\n", 5);
    LogisticMatrixModel model = build_frequency_matrix(ds);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            const double scaled = model.freq_matrix(i, j) * 5.0;
            CHECK(scaled == Catch::Approx(std::round(scaled)).margin(1e-12));
        }
}

TEST_CASE("all timestamps equal collapses to one active segment") {
    EdgeListDataset ds = parse_string("0 1 0\n0 1 0\n", 49);
    CHECK(build_frequency_matrix(ds).freq_matrix(0, 1) == Catch::Approx(1.0 / 49.0));
}

TEST_CASE("missing file raises a ParseError") {
    CHECK_THROWS_AS(parse_edge_list("/nonexistent/edges.txt", 49), ParseError);
}
