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

#ifndef SMELLTRACE_CORE_HPP
#define SMELLTRACE_CORE_HPP

#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace smelltrace {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct MalformedLine : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ArityMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Smell families and event keywords
// ---------------------------------------------------------------------------

/// The seven behavioural smell families a monitor can report.
enum class Smell { HMU, DW, IOD, HAS, HSS, HBR, NLMR };

constexpr std::array<Smell, 7> all_smells = {Smell::HMU, Smell::DW,  Smell::IOD, Smell::HAS,
                                             Smell::HSS, Smell::HBR, Smell::NLMR};

constexpr std::string_view to_string(Smell s) {
    switch (s) {
    case Smell::HMU: return "HMU";
    case Smell::DW: return "DW";
    case Smell::IOD: return "IOD";
    case Smell::HAS: return "HAS";
    case Smell::HSS: return "HSS";
    case Smell::HBR: return "HBR";
    case Smell::NLMR: return "NLMR";
    }
    return "?";
}

inline std::optional<Smell> smell_from(std::string_view name) {
    for (Smell s : all_smells)
        if (to_string(s) == name) return s;
    // HP is the aggregate family used in summary tables, not a trace-level kind.
    return std::nullopt;
}

/// One canonical event keyword. Every log entry carries exactly one of these.
enum class EventKind {
    hmuimpl,
    hmuadd,
    hmuaddall,
    hmuremove,
    hmuclear,
    wlacquire,
    wlrelease,
    odstart,
    odend,
    odalloc,
    hasstart,
    hasend,
    hssstart,
    hssend,
    hbrstart,
    hbrend,
    actstart,
    olmstart,
    olmend,
};

namespace detail {

struct EventKindInfo {
    EventKind kind;
    std::string_view keyword;
    Smell smell;
    int arity;
};

// The keyword table. Value conventions:
//   hmu*      (structureId, size-or-delta, structureType)
//   wl*       (wakelockId)
//   odstart/odend (viewId, logical-millis); odalloc (viewId, bytes)
//   has*/hss*/hbr* (taskId, logical-millis)
//   actstart  (activityName); olm* (activityName, heap-bytes-in-use)
inline constexpr std::array<EventKindInfo, 19> event_kind_table = {{
    {EventKind::hmuimpl, "hmuimpl", Smell::HMU, 3},
    {EventKind::hmuadd, "hmuadd", Smell::HMU, 3},
    {EventKind::hmuaddall, "hmuaddall", Smell::HMU, 3},
    {EventKind::hmuremove, "hmuremove", Smell::HMU, 3},
    {EventKind::hmuclear, "hmuclear", Smell::HMU, 3},
    {EventKind::wlacquire, "wlacquire", Smell::DW, 1},
    {EventKind::wlrelease, "wlrelease", Smell::DW, 1},
    {EventKind::odstart, "odstart", Smell::IOD, 2},
    {EventKind::odend, "odend", Smell::IOD, 2},
    {EventKind::odalloc, "odalloc", Smell::IOD, 2},
    {EventKind::hasstart, "hasstart", Smell::HAS, 2},
    {EventKind::hasend, "hasend", Smell::HAS, 2},
    {EventKind::hssstart, "hssstart", Smell::HSS, 2},
    {EventKind::hssend, "hssend", Smell::HSS, 2},
    {EventKind::hbrstart, "hbrstart", Smell::HBR, 2},
    {EventKind::hbrend, "hbrend", Smell::HBR, 2},
    {EventKind::actstart, "actstart", Smell::NLMR, 1},
    {EventKind::olmstart, "olmstart", Smell::NLMR, 2},
    {EventKind::olmend, "olmend", Smell::NLMR, 2},
}};

inline constexpr const EventKindInfo& info(EventKind k) {
    return event_kind_table[static_cast<std::size_t>(k)];
}

}  // namespace detail

constexpr std::string_view keyword_of(EventKind k) { return detail::info(k).keyword; }
constexpr Smell smell_of(EventKind k) { return detail::info(k).smell; }
constexpr int arity_of(EventKind k) { return detail::info(k).arity; }

inline std::optional<EventKind> event_kind_from(std::string_view keyword) {
    for (const auto& e : detail::event_kind_table)
        if (e.keyword == keyword) return e.kind;
    return std::nullopt;
}

constexpr std::array<EventKind, 19> all_event_kinds = {
    EventKind::hmuimpl,  EventKind::hmuadd,  EventKind::hmuaddall, EventKind::hmuremove,
    EventKind::hmuclear, EventKind::wlacquire, EventKind::wlrelease, EventKind::odstart,
    EventKind::odend,    EventKind::odalloc, EventKind::hasstart,  EventKind::hasend,
    EventKind::hssstart, EventKind::hssend,  EventKind::hbrstart,  EventKind::hbrend,
    EventKind::actstart, EventKind::olmstart, EventKind::olmend,
};

// ---------------------------------------------------------------------------
// Location
// ---------------------------------------------------------------------------

namespace detail {

inline bool is_ident_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
           c == '_' || c == '$';
}

inline bool is_ident(std::string_view s) {
    if (s.empty()) return false;
    if (s.front() >= '0' && s.front() <= '9') return false;
    for (char c : s)
        if (!is_ident_char(c)) return false;
    return true;
}

// Dollar-separated chain of identifiers, e.g. "Outer$Inner".
inline bool is_class_stem(std::string_view s) {
    while (true) {
        auto pos = s.find('$');
        std::string_view seg = pos == std::string_view::npos ? s : s.substr(0, pos);
        if (!is_ident(seg)) return false;
        if (pos == std::string_view::npos) return true;
        s.remove_prefix(pos + 1);
    }
}

// Dotted chain of identifiers, e.g. "com.example.app". Dollars are not
// valid in package segments; they belong to the class stem.
inline bool is_package(std::string_view s) {
    while (true) {
        auto pos = s.find('.');
        std::string_view seg = pos == std::string_view::npos ? s : s.substr(0, pos);
        if (seg.empty() || seg.find('$') != std::string_view::npos || !is_ident(seg))
            return false;
        if (pos == std::string_view::npos) return true;
        s.remove_prefix(pos + 1);
    }
}

// Method names as they appear in translated bytecode: plain identifiers,
// synthetic names such as "lambda$load$0", or the special "<init>"/"<clinit>".
inline bool is_method_name(std::string_view s) {
    if (s == "<init>" || s == "<clinit>") return true;
    if (s.empty()) return false;
    for (char c : s)
        if (!is_ident_char(c)) return false;
    return true;
}

}  // namespace detail

/// A source position as written in trace lines: `package.Class.java$method`.
/// The class part keeps its `.java` suffix and may contain `$` inner-class
/// separators; the `$` right after `.java` splits class path from method.
struct Location {
    std::string package;  ///< dotted package, may be empty for the default package
    std::string clazz;    ///< e.g. "TimePeriodPreference$TimePeriod.java"
    std::string method;   ///< e.g. "fromString", "<clinit>", "lambda$load$0"

    bool operator==(const Location&) const = default;
    auto operator<=>(const Location&) const = default;

    /// Package-qualified class, e.g. "package.TimePeriodPreference$TimePeriod.java".
    std::string qualified_class() const {
        return package.empty() ? clazz : package + "." + clazz;
    }

    std::string to_string() const { return qualified_class() + "$" + method; }

    static std::optional<Location> parse(std::string_view text) {
        // The ".java$" boundary is unique in well-formed locations: identifiers
        // never contain dots, so ".java" only occurs at the end of the class
        // part. rfind keeps a class stem like "java$Foo" from confusing us.
        auto boundary = text.rfind(".java$");
        if (boundary == std::string_view::npos) return std::nullopt;
        std::string_view method = text.substr(boundary + 6);
        std::string_view stem = text.substr(0, boundary);  // package + class stem
        if (!detail::is_method_name(method)) return std::nullopt;

        std::string_view package, class_stem;
        auto last_dot = stem.rfind('.');
        if (last_dot == std::string_view::npos) {
            class_stem = stem;
        } else {
            package = stem.substr(0, last_dot);
            class_stem = stem.substr(last_dot + 1);
        }
        if (!detail::is_class_stem(class_stem)) return std::nullopt;
        if (!package.empty() && !detail::is_package(package)) return std::nullopt;

        Location loc;
        loc.package = std::string(package);
        loc.clazz = std::string(class_stem) + ".java";
        loc.method = std::string(method);
        return loc;
    }
};

// ---------------------------------------------------------------------------
// Time-of-day stamps
// ---------------------------------------------------------------------------

inline constexpr std::int32_t millis_per_day = 24 * 60 * 60 * 1000;

/// Parses a strict `HH:MM:SS.mmm` stamp into milliseconds since midnight.
inline std::optional<std::int32_t> parse_time_of_day(std::string_view s) {
    if (s.size() != 12 || s[2] != ':' || s[5] != ':' || s[8] != '.') return std::nullopt;
    auto digits = [&](std::size_t at, std::size_t n) -> std::optional<int> {
        int v = 0;
        for (std::size_t i = at; i < at + n; ++i) {
            if (s[i] < '0' || s[i] > '9') return std::nullopt;
            v = v * 10 + (s[i] - '0');
        }
        return v;
    };
    auto hh = digits(0, 2), mm = digits(3, 2), ss = digits(6, 2), ms = digits(9, 3);
    if (!hh || !mm || !ss || !ms) return std::nullopt;
    if (*hh > 23 || *mm > 59 || *ss > 59) return std::nullopt;
    return ((*hh * 60 + *mm) * 60 + *ss) * 1000 + *ms;
}

inline std::string format_time_of_day(std::int32_t millis) {
    millis %= millis_per_day;
    if (millis < 0) millis += millis_per_day;
    char buf[16];
    std::snprintf(buf, sizeof buf, "%02d:%02d:%02d.%03d", millis / 3600000,
                  (millis / 60000) % 60, (millis / 1000) % 60, millis % 1000);
    return buf;
}

// ---------------------------------------------------------------------------
// LogEntry
// ---------------------------------------------------------------------------

/// One trace line. The untimestamped body is colon-joined:
/// `location:id:keyword:value...`; a leading `HH:MM:SS.mmm,` stamp is optional.
struct LogEntry {
    std::optional<std::int32_t> timestamp_ms;  ///< millis since midnight, if stamped
    Location location;
    std::uint32_t id = 0;  ///< fixed label of the source site within (location, event)
    EventKind event = EventKind::hmuimpl;
    std::vector<std::string> values;  ///< length equals arity_of(event)

    bool operator==(const LogEntry&) const = default;
};

namespace detail {

// Strict non-negative integer, no sign, no superfluous leading zeros.
inline std::optional<std::uint64_t> parse_canonical_uint(std::string_view s) {
    if (s.empty() || s.size() > 19) return std::nullopt;
    if (s.size() > 1 && s[0] == '0') return std::nullopt;
    std::uint64_t v = 0;
    for (char c : s) {
        if (c < '0' || c > '9') return std::nullopt;
        v = v * 10 + static_cast<std::uint64_t>(c - '0');
    }
    return v;
}

inline bool valid_value_field(std::string_view v) {
    return v.find(':') == std::string_view::npos && v.find(',') == std::string_view::npos &&
           v.find('\n') == std::string_view::npos && v.find('\r') == std::string_view::npos;
}

}  // namespace detail

/// Parses one trace line; nullopt when the line is not a smell log entry.
inline std::optional<LogEntry> try_parse_log_entry(std::string_view line) {
    if (line.empty()) return std::nullopt;

    LogEntry entry;
    if (line.size() > 13 && line[12] == ',') {
        if (auto t = parse_time_of_day(line.substr(0, 12))) {
            entry.timestamp_ms = *t;
            line.remove_prefix(13);
        }
    }

    // Colon-split, keeping empty fields. Locations never contain ':', so the
    // body is exactly location, id, keyword, then arity-many values.
    std::vector<std::string_view> fields;
    while (true) {
        auto pos = line.find(':');
        fields.push_back(line.substr(0, pos));
        if (pos == std::string_view::npos) break;
        line.remove_prefix(pos + 1);
    }
    if (fields.size() < 4) return std::nullopt;

    auto kind = event_kind_from(fields[2]);
    if (!kind) return std::nullopt;
    if (fields.size() != 3 + static_cast<std::size_t>(arity_of(*kind))) return std::nullopt;

    auto loc = Location::parse(fields[0]);
    if (!loc) return std::nullopt;
    auto id = detail::parse_canonical_uint(fields[1]);
    if (!id || *id > 0xffffffffULL) return std::nullopt;

    entry.location = std::move(*loc);
    entry.id = static_cast<std::uint32_t>(*id);
    entry.event = *kind;
    for (std::size_t i = 3; i < fields.size(); ++i) {
        if (!detail::valid_value_field(fields[i])) return std::nullopt;
        entry.values.emplace_back(fields[i]);
    }
    return entry;
}

/// Throwing counterpart of try_parse_log_entry, for callers that treat a
/// malformed line as an error rather than something to filter out.
inline LogEntry parse_log_entry(std::string_view line) {
    if (line.empty()) throw MalformedLine("empty line");
    auto entry = try_parse_log_entry(line);
    if (!entry) throw MalformedLine("not a smell log entry: " + std::string(line));
    return *entry;
}

inline std::string serialize_log_entry(const LogEntry& entry) {
    const auto arity = static_cast<std::size_t>(arity_of(entry.event));
    if (entry.values.size() != arity)
        throw ArityMismatch(std::string(keyword_of(entry.event)) + " expects " +
                            std::to_string(arity) + " values, got " +
                            std::to_string(entry.values.size()));
    std::string out;
    if (entry.timestamp_ms) {
        out += format_time_of_day(*entry.timestamp_ms);
        out += ',';
    }
    out += entry.location.to_string();
    out += ':';
    out += std::to_string(entry.id);
    out += ':';
    out += keyword_of(entry.event);
    for (const auto& v : entry.values) {
        if (!detail::valid_value_field(v))
            throw ArityMismatch("value field contains a separator: " + v);
        out += ':';
        out += v;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Trace
// ---------------------------------------------------------------------------

/// Identifies the app a trace was recorded from.
struct TraceSource {
    std::string apk;
    std::string package_name;

    bool operator==(const TraceSource&) const = default;
};

struct Trace {
    std::vector<LogEntry> entries;  ///< emission order
    TraceSource source;
};

struct TraceReadResult {
    Trace trace;
    std::size_t dropped = 0;  ///< lines that did not match the log grammar
};

/// Reads every line, keeping entries that parse and counting the rest. Never
/// reorders surviving lines.
inline TraceReadResult read_trace(std::istream& in, TraceSource source = {}) {
    TraceReadResult result;
    result.trace.source = std::move(source);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (auto entry = try_parse_log_entry(line))
            result.trace.entries.push_back(std::move(*entry));
        else
            ++result.dropped;
    }
    if (in.bad()) throw IoFailure("read error while scanning trace stream");
    return result;
}

inline TraceReadResult read_trace_file(const std::filesystem::path& path,
                                       TraceSource source = {}) {
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot open trace file: " + path.string());
    return read_trace(in, std::move(source));
}

inline void write_trace(std::ostream& out, const Trace& trace) {
    for (const auto& e : trace.entries) out << serialize_log_entry(e) << '\n';
}

/// Unfolds time-of-day stamps onto a single monotone axis: a backward jump of
/// more than 12 hours is read as midnight rollover. Entries without stamps
/// inherit the previous value.
inline std::vector<std::int64_t> logical_timestamps(const Trace& trace) {
    std::vector<std::int64_t> out;
    out.reserve(trace.entries.size());
    std::int64_t day_base = 0;
    std::int64_t prev = 0;
    bool seen = false;
    for (const auto& e : trace.entries) {
        if (e.timestamp_ms) {
            std::int64_t t = *e.timestamp_ms;
            if (seen && t < prev - millis_per_day / 2) day_base += millis_per_day;
            prev = t;
            seen = true;
            out.push_back(day_base + t);
        } else {
            out.push_back(day_base + prev);
        }
    }
    return out;
}

}  // namespace smelltrace

#endif  // SMELLTRACE_CORE_HPP
