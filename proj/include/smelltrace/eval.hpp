/*
 * Copyright (C) 2026 The smelltrace Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef SMELLTRACE_EVAL_HPP
#define SMELLTRACE_EVAL_HPP

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "smelltrace/core.hpp"
#include "smelltrace/events_file.hpp"
#include "smelltrace/monitors.hpp"

namespace smelltrace::eval {

// ---------------------------------------------------------------------------
// Coverage
// ---------------------------------------------------------------------------

struct CoveragePoint {
    std::int64_t action_index = 0;
    std::int64_t logical_ms = 0;
    std::size_t unique_covered = 0;

    bool operator==(const CoveragePoint&) const = default;
};

/// Cumulative unique declared-site coverage, sampled once per action.
struct CoverageSeries {
    std::vector<CoveragePoint> points;
    std::size_t universe = 0;

    bool operator==(const CoverageSeries&) const = default;

    std::size_t final_covered() const {
        return points.empty() ? 0 : points.back().unique_covered;
    }
};

inline void write_coverage_csv(std::ostream& out, const CoverageSeries& series) {
    out << "action,logical_ms,covered,universe\n";
    for (const auto& p : series.points)
        out << p.action_index << ',' << p.logical_ms << ',' << p.unique_covered << ','
            << series.universe << '\n';
}

inline CoverageSeries read_coverage_csv(std::istream& in) {
    CoverageSeries series;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (header) {
            header = false;
            continue;
        }
        std::istringstream row(line);
        std::string col;
        CoveragePoint p;
        std::uint64_t universe = 0;
        if (!std::getline(row, col, ',')) throw IoFailure("bad coverage row: " + line);
        p.action_index = std::stoll(col);
        if (!std::getline(row, col, ',')) throw IoFailure("bad coverage row: " + line);
        p.logical_ms = std::stoll(col);
        if (!std::getline(row, col, ',')) throw IoFailure("bad coverage row: " + line);
        p.unique_covered = static_cast<std::size_t>(std::stoull(col));
        if (!std::getline(row, col, ',')) throw IoFailure("bad coverage row: " + line);
        universe = std::stoull(col);
        series.universe = static_cast<std::size_t>(universe);
        series.points.push_back(p);
    }
    return series;
}

/// Declared sites touched by the trace, each counted once. Entries that match
/// no declaration are reported as unknown-site diagnostics.
inline std::set<std::size_t> covered_sites(const Trace& trace, const SiteIndex& index,
                                           std::vector<std::string>* diagnostics = nullptr) {
    std::set<std::size_t> covered;
    for (const auto& e : trace.entries) {
        if (auto site = index.site_of(e))
            covered.insert(*site);
        else if (diagnostics)
            diagnostics->push_back("unknown-site: " + e.location.to_string() + ":" +
                                   std::to_string(e.id) + ":" +
                                   std::string(keyword_of(e.event)));
    }
    return covered;
}

struct CoverageResult {
    CoverageSeries series;  ///< one point per trace entry
    std::size_t final_covered = 0;
    std::vector<std::string> diagnostics;
};

inline CoverageResult coverage(const Trace& trace, const EventsFile& events) {
    SiteIndex index(events);
    CoverageResult result;
    result.series.universe = index.universe();
    auto stamps = logical_timestamps(trace);
    std::set<std::size_t> covered;
    for (std::size_t i = 0; i < trace.entries.size(); ++i) {
        const auto& e = trace.entries[i];
        if (auto site = index.site_of(e))
            covered.insert(*site);
        else
            result.diagnostics.push_back("unknown-site: " + e.location.to_string() + ":" +
                                         std::to_string(e.id) + ":" +
                                         std::string(keyword_of(e.event)));
        result.series.points.push_back(
            {static_cast<std::int64_t>(i + 1), stamps[i], covered.size()});
    }
    result.final_covered = covered.size();
    return result;
}

// ---------------------------------------------------------------------------
// Precision / recall against annotated ground truth
// ---------------------------------------------------------------------------

/// Detections and annotations are matched at (apk, kind, class, method)
/// granularity; site ids play no role here.
struct InstanceKey {
    std::string apk;
    Smell kind = Smell::HMU;
    std::string clazz;
    std::string method;

    bool operator==(const InstanceKey&) const = default;
    auto operator<=>(const InstanceKey&) const = default;
};

inline InstanceKey key_of(const monitors::SmellInstance& inst) {
    return InstanceKey{inst.apk, inst.kind, inst.file, inst.method};
}

struct GroundTruth {
    std::map<InstanceKey, bool> labels;  ///< true = smell, false = notSmell

    static GroundTruth parse(std::istream& in) {
        GroundTruth truth;
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty() || line.starts_with("apk,")) continue;
            std::istringstream row(line);
            std::string apk, kind, clazz, method, label;
            if (!std::getline(row, apk, ',') || !std::getline(row, kind, ',') ||
                !std::getline(row, clazz, ',') || !std::getline(row, method, ',') ||
                !std::getline(row, label, ','))
                throw IoFailure("bad ground-truth row: " + line);
            auto smell = smell_from(kind);
            if (!smell) throw IoFailure("unknown smell kind in ground truth: " + kind);
            bool is_smell;
            if (label == "smell")
                is_smell = true;
            else if (label == "notSmell")
                is_smell = false;
            else
                throw IoFailure("unknown label in ground truth: " + label);
            truth.labels[InstanceKey{apk, *smell, clazz, method}] = is_smell;
        }
        return truth;
    }
};

inline GroundTruth read_ground_truth(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot open ground-truth file: " + path.string());
    return GroundTruth::parse(in);
}

struct PrResult {
    std::size_t true_positives = 0;
    std::size_t detected = 0;        ///< |D|
    std::size_t false_negatives = 0;
    std::optional<double> precision;  ///< empty when nothing was detected
    std::optional<double> recall;     ///< empty when the truth holds no smells
};

inline PrResult precision_recall(const std::set<InstanceKey>& detected,
                                 const GroundTruth& truth) {
    PrResult r;
    r.detected = detected.size();
    for (const auto& key : detected) {
        auto it = truth.labels.find(key);
        if (it != truth.labels.end() && it->second) ++r.true_positives;
    }
    for (const auto& [key, is_smell] : truth.labels)
        if (is_smell && !detected.contains(key)) ++r.false_negatives;
    if (r.detected > 0)
        r.precision = static_cast<double>(r.true_positives) / static_cast<double>(r.detected);
    if (r.true_positives + r.false_negatives > 0)
        r.recall = static_cast<double>(r.true_positives) /
                   static_cast<double>(r.true_positives + r.false_negatives);
    else if (r.detected > 0)
        r.recall = std::nullopt;
    else
        r.recall = truth.labels.empty() ? std::nullopt : std::optional<double>(0.0);
    return r;
}

/// Recall percentage as printed in summary tables: floor of 100*tp/total.
inline int recall_percent_floor(std::size_t tp, std::size_t total) {
    if (total == 0) return 0;
    return static_cast<int>((100 * tp) / total);
}

inline std::string format_recall_ratio(std::size_t tp, std::size_t total) {
    return std::to_string(tp) + " / " + std::to_string(total) + " (" +
           std::to_string(recall_percent_floor(tp, total)) + "%)";
}

/// Summary-table family: HAS, HSS and HBR report under the single HP row.
inline std::string report_family(Smell kind) {
    switch (kind) {
    case Smell::HAS:
    case Smell::HSS:
    case Smell::HBR: return "HP";
    default: return std::string(to_string(kind));
    }
}

// ---------------------------------------------------------------------------
// Contingency table and the McNemar test
// ---------------------------------------------------------------------------

struct SetOutsideUniverse : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DegenerateTable : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Paired coverage over one shared event universe.
struct ContingencyTable {
    std::size_t a = 0;  ///< covered by both
    std::size_t b = 0;  ///< only in A
    std::size_t c = 0;  ///< only in B
    std::size_t d = 0;  ///< covered by neither

    bool operator==(const ContingencyTable&) const = default;
};

inline ContingencyTable contingency(const std::set<std::size_t>& covered_a,
                                    const std::set<std::size_t>& covered_b,
                                    std::size_t universe) {
    for (const auto& sets : {&covered_a, &covered_b})
        for (std::size_t x : *sets)
            if (x >= universe)
                throw SetOutsideUniverse("covered element " + std::to_string(x) +
                                         " outside universe of " + std::to_string(universe));
    ContingencyTable t;
    for (std::size_t x = 0; x < universe; ++x) {
        const bool in_a = covered_a.contains(x);
        const bool in_b = covered_b.contains(x);
        if (in_a && in_b)
            ++t.a;
        else if (in_a)
            ++t.b;
        else if (in_b)
            ++t.c;
        else
            ++t.d;
    }
    return t;
}

/// Upper tail of the chi-square distribution with one degree of freedom.
inline double chi_square_p_df1(double chi2) {
    if (chi2 <= 0.0) return 1.0;
    return std::erfc(std::sqrt(chi2 / 2.0));
}

enum class McNemarMode { plain, continuity, exact };

inline std::optional<McNemarMode> mcnemar_mode_from(std::string_view name) {
    if (name == "plain") return McNemarMode::plain;
    if (name == "continuity") return McNemarMode::continuity;
    if (name == "exact") return McNemarMode::exact;
    return std::nullopt;
}

struct McNemarResult {
    double statistic = 0.0;  ///< chi-square value; 0 for the exact mode
    double p_value = 1.0;
};

inline McNemarResult mcnemar(const ContingencyTable& t, McNemarMode mode = McNemarMode::plain) {
    const double b = static_cast<double>(t.b);
    const double c = static_cast<double>(t.c);
    const std::size_t n = t.b + t.c;
    if (n == 0) throw DegenerateTable("both discordant cells are zero");

    McNemarResult r;
    switch (mode) {
    case McNemarMode::plain:
        r.statistic = (b - c) * (b - c) / (b + c);
        r.p_value = chi_square_p_df1(r.statistic);
        break;
    case McNemarMode::continuity: {
        const double num = std::max(0.0, std::abs(b - c) - 1.0);
        r.statistic = num * num / (b + c);
        r.p_value = chi_square_p_df1(r.statistic);
        break;
    }
    case McNemarMode::exact: {
        // Two-sided binomial(min(b,c); n, 1/2) via log terms.
        const std::size_t m = std::min(t.b, t.c);
        double tail = 0.0;
        for (std::size_t k = 0; k <= m; ++k) {
            const double log_term = std::lgamma(static_cast<double>(n) + 1.0) -
                                    std::lgamma(static_cast<double>(k) + 1.0) -
                                    std::lgamma(static_cast<double>(n - k) + 1.0) -
                                    static_cast<double>(n) * std::log(2.0);
            tail += std::exp(log_term);
        }
        r.statistic = 0.0;
        r.p_value = std::min(1.0, 2.0 * tail);
        break;
    }
    }
    return r;
}

// ---------------------------------------------------------------------------
// Report writing
// ---------------------------------------------------------------------------

/// Everything the evaluator needs to summarize one finished session.
struct SessionEval {
    std::string app;
    std::set<InstanceKey> detected;
    CoverageSeries coverage;
};

/// Writes summary.txt, summary.csv and one coverage CSV per session.
inline void write_eval_report(const std::vector<SessionEval>& sessions,
                              const GroundTruth& truth, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir / "series");

    // Aggregate recall per report family across all sessions.
    std::set<InstanceKey> all_detected;
    for (const auto& s : sessions) all_detected.insert(s.detected.begin(), s.detected.end());

    std::map<std::string, std::pair<std::size_t, std::size_t>> per_family;  // tp, total
    for (const auto& [key, is_smell] : truth.labels) {
        if (!is_smell) continue;
        auto& [tp, total] = per_family[report_family(key.kind)];
        ++total;
        if (all_detected.contains(key)) ++tp;
    }

    std::string text = "smell detection recall\n";
    std::string csv = "family,true_positives,annotated,recall_percent\n";
    for (const auto& [family, counts] : per_family) {
        text += "  " + family + ": " + format_recall_ratio(counts.first, counts.second) + "\n";
        csv += family + "," + std::to_string(counts.first) + "," +
               std::to_string(counts.second) + "," +
               std::to_string(recall_percent_floor(counts.first, counts.second)) + "\n";
    }
    text += "\ncoverage per session\n";
    for (const auto& s : sessions) {
        text += "  " + s.app + ": " + std::to_string(s.coverage.final_covered()) + " / " +
                std::to_string(s.coverage.universe) + "\n";
        std::ofstream series(out_dir / "series" / (s.app + ".csv"));
        if (!series) throw IoFailure("cannot create series file for " + s.app);
        write_coverage_csv(series, s.coverage);
    }
    if (sessions.empty()) text += "  (none)\n";

    monitors::detail::write_file_atomically(out_dir / "summary.txt", text);
    monitors::detail::write_file_atomically(out_dir / "summary.csv", csv);
}

}  // namespace smelltrace::eval

#endif  // SMELLTRACE_EVAL_HPP
