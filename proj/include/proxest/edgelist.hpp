#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "proxest/models.hpp"

namespace proxest {

class ParseError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct EdgeEvent {
    long source = 0;
    long target = 0;
    long timestamp = 0;
};

/// Temporal edge list: "src dst timestamp" per line, '#' comments skipped.
struct EdgeListDataset {
    std::vector<EdgeEvent> events;
    long node_count = 0;  // 1 + max id observed
    int segments = 49;
};

inline EdgeListDataset parse_edge_list(std::istream& in, int segments,
                                       const std::string& name = "<stream>") {
    if (segments < 1) throw ParseError(name + ": segments must be >= 1");
    EdgeListDataset ds;
    ds.segments = segments;
    std::string line;
    long line_no = 0;
    long max_id = -1;
    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream fields(line);
        EdgeEvent ev;
        std::string extra;
        if (!(fields >> ev.source >> ev.target >> ev.timestamp) || (fields >> extra))
            throw ParseError(name + ":" + std::to_string(line_no) +
                             ": expected 3 integer fields 'src dst timestamp'");
        if (ev.source < 0 || ev.target < 0)
            throw ParseError(name + ":" + std::to_string(line_no) + ": negative node id");
        if (ev.timestamp < 0)
            throw ParseError(name + ":" + std::to_string(line_no) + ": negative timestamp");
        max_id = std::max({max_id, ev.source, ev.target});
        ds.events.push_back(ev);
    }
    if (ds.events.empty()) throw ParseError(name + ": no events");
    ds.node_count = max_id + 1;
    return ds;
}

inline EdgeListDataset parse_edge_list(const std::string& path, int segments) {
    std::ifstream in(path);
    if (!in) throw ParseError(path + ": cannot open file");
    return parse_edge_list(in, segments, path);
}

/// Bins timestamps into `segments` equal-width intervals over
/// [0, max_timestamp] (right-closed final bin) and records a Bernoulli
/// outcome per (cell, segment): 1 if at least one event landed there.
/// Xbar_ij = active segments / segments.
inline LogisticMatrixModel build_frequency_matrix(const EdgeListDataset& ds,
                                                  double penalty = 0.0) {
    const long N = ds.node_count;
    const int S = ds.segments;
    long max_ts = 0;
    for (const auto& ev : ds.events) max_ts = std::max(max_ts, ev.timestamp);

    std::vector<std::uint8_t> active(static_cast<std::size_t>(N) * N * S, 0);
    for (const auto& ev : ds.events) {
        int bin = 0;
        if (max_ts > 0) {
            // equal-width bins over [0, max_ts], final bin right-closed
            bin = static_cast<int>((static_cast<double>(ev.timestamp) * S) / max_ts);
            bin = std::min(bin, S - 1);
        }
        active[(static_cast<std::size_t>(ev.source) * N + ev.target) * S + bin] = 1;
    }
    Matrix freq(N, N);
    for (long i = 0; i < N; ++i)
        for (long j = 0; j < N; ++j) {
            int count = 0;
            const std::size_t base = (static_cast<std::size_t>(i) * N + j) * S;
            for (int s = 0; s < S; ++s) count += active[base + s];
            freq(i, j) = static_cast<double>(count) / S;
        }
    return LogisticMatrixModel(std::move(freq), S, penalty);
}

}  // namespace proxest
