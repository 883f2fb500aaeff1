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

#ifndef SMELLTRACE_EVENTS_FILE_HPP
#define SMELLTRACE_EVENTS_FILE_HPP

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "smelltrace/core.hpp"

namespace smelltrace {

struct MalformedDecl : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DuplicateDecl : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// One instrumented site that can emit a smell-related event. Line 0 means
/// the source line was lost in bytecode translation.
struct EventDecl {
    std::string clazz;  ///< fully qualified, e.g. "package.TimePeriodPreference.java"
    std::string method;
    std::uint32_t line = 0;
    EventKind event = EventKind::hmuimpl;

    bool operator==(const EventDecl&) const = default;
    auto operator<=>(const EventDecl&) const = default;
};

/// The ordered universe of declared sites for one app. One CSV line per decl:
/// `class,method,line,keyword`.
class EventsFile {
  public:
    EventsFile() = default;

    void add(EventDecl decl) {
        if (!seen_.insert(decl).second)
            throw DuplicateDecl("duplicate event declaration: " + render(decl));
        decls_.push_back(std::move(decl));
    }

    const std::vector<EventDecl>& decls() const { return decls_; }
    std::size_t size() const { return decls_.size(); }
    bool empty() const { return decls_.empty(); }

    bool operator==(const EventsFile& other) const { return decls_ == other.decls_; }

    static std::string render(const EventDecl& d) {
        return d.clazz + "," + d.method + "," + std::to_string(d.line) + "," +
               std::string(keyword_of(d.event));
    }

    static EventDecl parse_line(std::string_view line) {
        std::vector<std::string_view> cols;
        std::string_view rest = line;
        while (true) {
            auto pos = rest.find(',');
            cols.push_back(rest.substr(0, pos));
            if (pos == std::string_view::npos) break;
            rest.remove_prefix(pos + 1);
        }
        if (cols.size() != 4)
            throw MalformedDecl("expected 4 columns: " + std::string(line));
        auto lineno = detail::parse_canonical_uint(cols[2]);
        if (!lineno || *lineno > 0xffffffffULL)
            throw MalformedDecl("bad line number: " + std::string(line));
        auto kind = event_kind_from(cols[3]);
        if (!kind) throw MalformedDecl("unknown keyword: " + std::string(line));
        if (cols[0].empty() || cols[1].empty())
            throw MalformedDecl("empty class or method: " + std::string(line));
        EventDecl d;
        d.clazz = std::string(cols[0]);
        d.method = std::string(cols[1]);
        d.line = static_cast<std::uint32_t>(*lineno);
        d.event = *kind;
        return d;
    }

    static EventsFile parse(std::istream& in) {
        EventsFile file;
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            file.add(parse_line(line));
        }
        if (in.bad()) throw IoFailure("read error while scanning events stream");
        return file;
    }

    void write(std::ostream& out) const {
        for (const auto& d : decls_) out << render(d) << '\n';
    }

  private:
    std::vector<EventDecl> decls_;
    std::set<EventDecl> seen_;
};

inline EventsFile read_events_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot open events file: " + path.string());
    return EventsFile::parse(in);
}

inline void write_events_file(const std::filesystem::path& path, const EventsFile& file) {
    std::ofstream out(path);
    if (!out) throw IoFailure("cannot create events file: " + path.string());
    file.write(out);
    out.flush();
    if (!out) throw IoFailure("write error on events file: " + path.string());
}

/// Maps trace entries back onto declared sites. Entries carry no line number,
/// so sites are grouped by (class, method, keyword), and an entry's id picks
/// the id-th declaration of its group in file order. This is also the
/// fallback identity for declarations whose line number was lost.
class SiteIndex {
  public:
    explicit SiteIndex(const EventsFile& file) {
        for (std::size_t i = 0; i < file.decls().size(); ++i) {
            const auto& d = file.decls()[i];
            groups_[GroupKey{d.clazz, d.method, d.event}].push_back(i);
        }
        universe_ = file.decls().size();
    }

    /// Declaration index covered by this entry, or nullopt for unknown sites.
    std::optional<std::size_t> site_of(const LogEntry& entry) const {
        auto it = groups_.find(
            GroupKey{entry.location.qualified_class(), entry.location.method, entry.event});
        if (it == groups_.end()) return std::nullopt;
        if (entry.id >= it->second.size()) return std::nullopt;
        return it->second[entry.id];
    }

    std::size_t universe() const { return universe_; }

  private:
    using GroupKey = std::tuple<std::string, std::string, EventKind>;
    std::map<GroupKey, std::vector<std::size_t>> groups_;
    std::size_t universe_ = 0;
};

}  // namespace smelltrace

#endif  // SMELLTRACE_EVENTS_FILE_HPP
