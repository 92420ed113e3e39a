#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "proxest/experiments.hpp"
#include "proxest/solvers.hpp"

namespace proxest {

class IoError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// 17 significant digits: enough for a bit-faithful double round trip.
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Extended reals carry an explicit sentinel in reports; arithmetic elsewhere
/// uses floating-point infinity directly.
inline nlohmann::json json_real(double v) {
    if (std::isinf(v)) return v > 0 ? "+inf" : "-inf";
    if (std::isnan(v)) return "nan";
    return v;
}

enum class ReportFormat { Csv, Json };

inline ReportFormat parse_format(const std::string& s) {
    if (s == "csv") return ReportFormat::Csv;
    if (s == "json") return ReportFormat::Json;
    throw IoError("unknown format '" + s + "' (expected csv or json)");
}

namespace detail {

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open output file: " + path);
    return out;
}

inline void write_csv_row(std::ostream& out, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out << ',';
        out << cells[i];
    }
    out << '\n';
}

}  // namespace detail

// --- McReport --------------------------------------------------------------

inline nlohmann::json to_json(const McReport& r) {
    nlohmann::json j;
    j["ose_kind"] = to_string(r.ose_kind);
    j["replicates"] = r.replicates;
    j["base_seed"] = r.base_seed;
    j["sample_sizes"] = r.sample_sizes;
    j["records"] = nlohmann::json::array();
    for (const auto& rec : r.records)
        j["records"].push_back({{"n", rec.n},
                                {"replicate", rec.replicate},
                                {"dev_ose", json_real(rec.dev_ose)},
                                {"dev_init", json_real(rec.dev_init)},
                                {"ok", rec.ok}});
    j["summaries"] = nlohmann::json::array();
    for (const auto& s : r.summaries)
        j["summaries"].push_back({{"n", s.n},
                                  {"median_ose", json_real(s.median_ose)},
                                  {"q90_ose", json_real(s.q90_ose)},
                                  {"median_init", json_real(s.median_init)},
                                  {"q90_init", json_real(s.q90_init)},
                                  {"failures", s.failures},
                                  {"ordering_violated", s.ordering_violated}});
    return j;
}

inline void write_csv(const McReport& r, std::ostream& out) {
    detail::write_csv_row(out, {"n", "replicate", "dev_ose", "dev_init", "ok"});
    for (const auto& rec : r.records)
        detail::write_csv_row(out, {std::to_string(rec.n), std::to_string(rec.replicate),
                                    fmt_double(rec.dev_ose), fmt_double(rec.dev_init),
                                    rec.ok ? "1" : "0"});
}

// --- CounterexampleReport --------------------------------------------------

inline nlohmann::json to_json(const CounterexampleReport& r) {
    return {{"mode", to_string(r.mode)},
            {"sigma1", json_real(r.sigma1)},
            {"sigma2", json_real(r.sigma2)},
            {"m_constant", json_real(r.m_constant)},
            {"empirical_prob", json_real(r.empirical_prob)},
            {"closed_form_prob", json_real(r.closed_form_prob)},
            {"std_error", json_real(r.std_error)},
            {"replicates", r.replicates},
            {"n", r.n}};
}

inline void write_csv(const CounterexampleReport& r, std::ostream& out) {
    detail::write_csv_row(out, {"mode", "sigma1", "sigma2", "m_constant", "empirical_prob",
                                "closed_form_prob", "std_error", "replicates", "n"});
    detail::write_csv_row(out, {to_string(r.mode), fmt_double(r.sigma1), fmt_double(r.sigma2),
                                fmt_double(r.m_constant), fmt_double(r.empirical_prob),
                                fmt_double(r.closed_form_prob), fmt_double(r.std_error),
                                std::to_string(r.replicates), std::to_string(r.n)});
}

// --- LowRankReport ---------------------------------------------------------

inline nlohmann::json to_json(const LowRankReport& r) {
    nlohmann::json j;
    j["lambda"] = json_real(r.lambda);
    j["stopping_threshold"] = json_real(r.stopping_threshold);
    j["iterations"] = r.iterations;
    j["final_rank"] = r.final_rank;
    j["stopping_reason"] = to_string(r.stopping_reason);
    j["ok"] = r.ok;
    if (!r.ok) j["error"] = r.error;
    j["objective_trajectory"] = nlohmann::json::array();
    for (double v : r.objective_trajectory) j["objective_trajectory"].push_back(json_real(v));
    return j;
}

inline nlohmann::json to_json(const std::vector<LowRankReport>& rs) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : rs) j.push_back(to_json(r));
    return j;
}

inline void write_csv(const std::vector<LowRankReport>& rs, std::ostream& out) {
    detail::write_csv_row(out, {"lambda", "iteration", "objective", "final_rank",
                                "stopping_reason", "ok"});
    for (const auto& r : rs)
        for (std::size_t k = 0; k < r.objective_trajectory.size(); ++k)
            detail::write_csv_row(out, {fmt_double(r.lambda), std::to_string(k),
                                        fmt_double(r.objective_trajectory[k]),
                                        std::to_string(r.final_rank),
                                        to_string(r.stopping_reason), r.ok ? "1" : "0"});
}

// --- StopCondReport --------------------------------------------------------

inline nlohmann::json to_json(const StopCondReport& r) {
    return {{"kappa_conservative", json_real(r.kappa_conservative)},
            {"kappa_stated_max", json_real(r.kappa_stated_max)},
            {"step_norm", json_real(r.step_norm)},
            {"distance", json_real(r.distance)},
            {"required", json_real(r.required)},
            {"margin", json_real(r.margin)},
            {"holds", r.holds}};
}

inline void write_csv(const std::vector<StopCondReport>& rs, std::ostream& out) {
    detail::write_csv_row(out, {"instance", "kappa_conservative", "kappa_stated_max",
                                "step_norm", "distance", "required", "margin", "holds"});
    for (std::size_t i = 0; i < rs.size(); ++i)
        detail::write_csv_row(out, {std::to_string(i), fmt_double(rs[i].kappa_conservative),
                                    fmt_double(rs[i].kappa_stated_max),
                                    fmt_double(rs[i].step_norm), fmt_double(rs[i].distance),
                                    fmt_double(rs[i].required), fmt_double(rs[i].margin),
                                    rs[i].holds ? "1" : "0"});
}

inline nlohmann::json to_json(const std::vector<StopCondReport>& rs) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : rs) j.push_back(to_json(r));
    return j;
}

// --- ProxCheckReport -------------------------------------------------------

inline nlohmann::json to_json(const ProxCheckReport& r) {
    nlohmann::json j;
    j["trials"] = r.trials;
    j["seed"] = r.seed;
    j["violations"] = r.violations;
    j["records"] = nlohmann::json::array();
    for (const auto& rec : r.records)
        j["records"].push_back({{"trial", rec.trial},
                                {"family", rec.family},
                                {"lhs", json_real(rec.lhs)},
                                {"rhs", json_real(rec.rhs)},
                                {"ok", rec.ok}});
    return j;
}

inline void write_csv(const ProxCheckReport& r, std::ostream& out) {
    detail::write_csv_row(out, {"trial", "family", "lhs", "rhs", "ok"});
    for (const auto& rec : r.records)
        detail::write_csv_row(out, {std::to_string(rec.trial), rec.family, fmt_double(rec.lhs),
                                    fmt_double(rec.rhs), rec.ok ? "1" : "0"});
}

// --- generic emit ----------------------------------------------------------

template <class Report>
void emit_report(const Report& report, const std::string& path, ReportFormat format) {
    auto out = detail::open_out(path);
    if (format == ReportFormat::Json) {
        out << to_json(report).dump(2) << '\n';
    } else {
        write_csv(report, out);
    }
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace proxest
