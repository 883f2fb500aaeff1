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

#ifndef SMELLTRACE_TESTS_ORACLE_MONITORS_HPP
#define SMELLTRACE_TESTS_ORACLE_MONITORS_HPP

// Independent detection oracle for small traces. Instead of streaming state
// machines it enumerates (key, obligation) pairs exhaustively with direct
// scans over the whole trace, so it shares no code path with the monitors it
// checks. Only viable for short traces; the comparisons are quadratic.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "smelltrace/core.hpp"
#include "smelltrace/events_file.hpp"
#include "smelltrace/monitors.hpp"

namespace testsupport::oracle {

using smelltrace::EventKind;
using smelltrace::EventsFile;
using smelltrace::LogEntry;
using smelltrace::Smell;
using smelltrace::Trace;
namespace mon = smelltrace::monitors;

struct Found {
    std::size_t anchor_pos;
    mon::SmellInstance instance;
};

inline std::optional<std::int64_t> as_int(const std::string& s) {
    if (s.empty() || s.size() > 18) return std::nullopt;
    if (s.size() > 1 && s[0] == '0') return std::nullopt;
    std::int64_t v = 0;
    for (char c : s) {
        if (c < '0' || c > '9') return std::nullopt;
        v = v * 10 + (c - '0');
    }
    return v;
}

inline mon::SmellInstance base_instance(const Trace& t, const LogEntry& anchor, Smell kind) {
    mon::SmellInstance inst;
    inst.apk = t.source.apk;
    inst.package_name = t.source.package_name;
    inst.file = anchor.location.qualified_class();
    inst.method = anchor.location.method;
    inst.kind = kind;
    return inst;
}

inline std::vector<std::string> keys_of_family(const Trace& t, Smell family) {
    std::vector<std::string> keys;
    for (const auto& e : t.entries)
        if (smelltrace::smell_of(e.event) == family &&
            std::find(keys.begin(), keys.end(), e.values[0]) == keys.end())
            keys.push_back(e.values[0]);
    return keys;
}

// --- HMU ---------------------------------------------------------------

inline void hmu(const Trace& t, const mon::MonitorConfig& cfg, std::vector<Found>& out) {
    std::set<std::pair<std::string, std::string>> dedup;
    for (const auto& key : keys_of_family(t, Smell::HMU)) {
        std::vector<std::size_t> events;
        for (std::size_t i = 0; i < t.entries.size(); ++i)
            if (smelltrace::smell_of(t.entries[i].event) == Smell::HMU &&
                t.entries[i].values[0] == key)
                events.push_back(i);

        // Size after the k-th event, recomputed from scratch each time.
        auto size_after = [&](std::size_t k) {
            std::int64_t size = 0;
            for (std::size_t j = 0; j <= k; ++j) {
                const auto& e = t.entries[events[j]];
                auto v = as_int(e.values[1]);
                if (!v) continue;
                if (e.event == EventKind::hmuimpl) size = *v;
                if (e.event == EventKind::hmuadd) size += 1;
                if (e.event == EventKind::hmuaddall) size += *v;
                if (e.event == EventKind::hmuremove) size = std::max<std::int64_t>(0, size - 1);
                if (e.event == EventKind::hmuclear) size = 0;
            }
            return size;
        };
        std::int64_t max_size = 0;
        for (std::size_t k = 0; k < events.size(); ++k)
            max_size = std::max(max_size, size_after(k));

        const auto& anchor = t.entries[events.front()];
        const std::string type = anchor.values[2];
        const bool smelly = (type == "HashMap" && max_size <= cfg.hmu_small_max) ||
                            ((type == "ArrayMap" || type == "SimpleArrayMap") &&
                             max_size >= cfg.hmu_large_min);
        if (!smelly) continue;
        if (!dedup.emplace(anchor.location.to_string(), key).second) continue;
        auto inst = base_instance(t, anchor, Smell::HMU);
        inst.payload = mon::HmuPayload{type, max_size};
        inst.witnesses = {mon::Witness::of(anchor)};
        out.push_back({events.front(), std::move(inst)});
    }
}

// --- DW ----------------------------------------------------------------

inline void dw(const Trace& t, std::vector<Found>& out) {
    for (const auto& key : keys_of_family(t, Smell::DW)) {
        std::ptrdiff_t last_release = -1;
        for (std::size_t i = 0; i < t.entries.size(); ++i)
            if (t.entries[i].event == EventKind::wlrelease && t.entries[i].values[0] == key)
                last_release = static_cast<std::ptrdiff_t>(i);
        for (std::size_t i = 0; i < t.entries.size(); ++i) {
            if (t.entries[i].event != EventKind::wlacquire || t.entries[i].values[0] != key)
                continue;
            if (static_cast<std::ptrdiff_t>(i) <= last_release) continue;
            auto inst = base_instance(t, t.entries[i], Smell::DW);
            inst.payload = mon::DwPayload{key};
            inst.witnesses = {mon::Witness::of(t.entries[i])};
            out.push_back({i, std::move(inst)});
            break;  // only the first acquire after the last release anchors
        }
    }
}

// --- brackets shared by IOD / heavy / NLMR-ineffective ------------------

struct Bracket {
    std::size_t start;
    std::size_t end;
};

// start..end pairs where no same-key boundary event intervenes.
template <typename IsStart, typename IsEnd>
inline std::vector<Bracket> brackets(const Trace& t, const std::string& key, IsStart is_start,
                                     IsEnd is_end) {
    std::vector<Bracket> out;
    for (std::size_t s = 0; s < t.entries.size(); ++s) {
        if (!is_start(t.entries[s]) || t.entries[s].values[0] != key) continue;
        for (std::size_t e = s + 1; e < t.entries.size(); ++e) {
            if (t.entries[e].values.empty() || t.entries[e].values[0] != key) continue;
            if (is_start(t.entries[e])) break;  // restarted before closing
            if (is_end(t.entries[e])) {
                out.push_back({s, e});
                break;
            }
        }
    }
    return out;
}

// --- IOD ----------------------------------------------------------------

inline void iod(const Trace& t, const mon::MonitorConfig& cfg, std::vector<Found>& out) {
    std::set<std::pair<std::string, std::string>> dedup;
    for (const auto& view : keys_of_family(t, Smell::IOD)) {
        auto pairs = brackets(
            t, view, [](const LogEntry& e) { return e.event == EventKind::odstart; },
            [](const LogEntry& e) { return e.event == EventKind::odend; });
        for (const auto& br : pairs) {
            const LogEntry* alloc = nullptr;
            for (std::size_t i = br.start + 1; i < br.end; ++i)
                if (t.entries[i].event == EventKind::odalloc && t.entries[i].values[0] == view) {
                    alloc = &t.entries[i];
                    break;
                }
            std::optional<mon::IodTrigger> trigger;
            const LogEntry* second = nullptr;
            if (alloc) {
                trigger = mon::IodTrigger::alloc;
                second = alloc;
            } else {
                auto t0 = as_int(t.entries[br.start].values[1]);
                auto t1 = as_int(t.entries[br.end].values[1]);
                if (t0 && t1 && *t1 - *t0 > cfg.iod_frame_budget_ms) {
                    trigger = mon::IodTrigger::duration;
                    second = &t.entries[br.end];
                }
            }
            if (!trigger) continue;
            const auto& anchor = t.entries[br.start];
            if (!dedup.emplace(anchor.location.to_string(), view).second) continue;
            auto inst = base_instance(t, anchor, Smell::IOD);
            inst.payload = mon::IodPayload{view, *trigger};
            inst.witnesses = {mon::Witness::of(anchor), mon::Witness::of(*second)};
            out.push_back({br.start, std::move(inst)});
        }
    }
}

// --- HAS / HSS / HBR -----------------------------------------------------

inline void heavy(const Trace& t, const mon::MonitorConfig& cfg, std::vector<Found>& out) {
    const std::map<Smell, std::pair<EventKind, EventKind>> families = {
        {Smell::HAS, {EventKind::hasstart, EventKind::hasend}},
        {Smell::HSS, {EventKind::hssstart, EventKind::hssend}},
        {Smell::HBR, {EventKind::hbrstart, EventKind::hbrend}},
    };
    for (const auto& [family, kinds] : families) {
        std::set<std::pair<std::string, std::string>> dedup;
        for (const auto& task : keys_of_family(t, family)) {
            auto pairs = brackets(
                t, task, [&](const LogEntry& e) { return e.event == kinds.first; },
                [&](const LogEntry& e) { return e.event == kinds.second; });
            for (const auto& br : pairs) {
                auto t0 = as_int(t.entries[br.start].values[1]);
                auto t1 = as_int(t.entries[br.end].values[1]);
                if (!t0 || !t1) continue;
                const std::int64_t duration = *t1 - *t0;
                if (duration <= cfg.heavy_millis.at(family)) continue;
                const auto& anchor = t.entries[br.start];
                if (!dedup.emplace(anchor.location.to_string(), task).second) continue;
                auto inst = base_instance(t, anchor, family);
                inst.payload = mon::HeavyPayload{task, duration};
                inst.witnesses = {mon::Witness::of(anchor), mon::Witness::of(t.entries[br.end])};
                out.push_back({br.start, std::move(inst)});
            }
        }
    }
}

// --- NLMR ----------------------------------------------------------------

inline void nlmr(const Trace& t, const EventsFile& events, const mon::MonitorConfig& cfg,
                 std::vector<Found>& out) {
    std::set<std::string> resolver_classes;
    for (const auto& d : events.decls())
        if (d.event == EventKind::olmstart) resolver_classes.insert(d.clazz);

    std::set<std::string> missing_dedup;
    for (std::size_t i = 0; i < t.entries.size(); ++i) {
        const auto& e = t.entries[i];
        if (e.event != EventKind::actstart) continue;
        if (resolver_classes.contains(e.location.qualified_class())) continue;
        if (!missing_dedup.insert(e.values[0]).second) continue;
        auto inst = base_instance(t, e, Smell::NLMR);
        inst.payload = mon::NlmrPayload{e.values[0], mon::NlmrCause::missing};
        inst.witnesses = {mon::Witness::of(e)};
        out.push_back({i, std::move(inst)});
    }

    std::set<std::pair<std::string, std::string>> dedup;
    for (const auto& activity : keys_of_family(t, Smell::NLMR)) {
        auto pairs = brackets(
            t, activity, [](const LogEntry& e) { return e.event == EventKind::olmstart; },
            [](const LogEntry& e) { return e.event == EventKind::olmend; });
        for (const auto& br : pairs) {
            auto before = as_int(t.entries[br.start].values[1]);
            auto after = as_int(t.entries[br.end].values[1]);
            if (!before || !after) continue;
            if (!(static_cast<double>(*after) >
                  static_cast<double>(*before) * (1.0 - cfg.nlmr_min_release_fraction)))
                continue;
            const auto& anchor = t.entries[br.start];
            if (!dedup.emplace(anchor.location.to_string(), activity).second) continue;
            auto inst = base_instance(t, anchor, Smell::NLMR);
            inst.payload = mon::NlmrPayload{activity, mon::NlmrCause::ineffective};
            inst.witnesses = {mon::Witness::of(anchor), mon::Witness::of(t.entries[br.end])};
            out.push_back({br.start, std::move(inst)});
        }
    }
}

// --- combined ------------------------------------------------------------

inline std::map<Smell, std::vector<mon::SmellInstance>> detect(
    const Trace& t, const EventsFile& events, const mon::MonitorConfig& cfg = {}) {
    std::vector<Found> found;
    hmu(t, cfg, found);
    dw(t, found);
    iod(t, cfg, found);
    heavy(t, cfg, found);
    nlmr(t, events, cfg, found);
    std::stable_sort(found.begin(), found.end(),
                     [](const Found& a, const Found& b) { return a.anchor_pos < b.anchor_pos; });
    std::map<Smell, std::vector<mon::SmellInstance>> out;
    for (auto& f : found) out[f.instance.kind].push_back(std::move(f.instance));
    return out;
}

}  // namespace testsupport::oracle

#endif  // SMELLTRACE_TESTS_ORACLE_MONITORS_HPP
