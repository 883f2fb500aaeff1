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

#ifndef SMELLTRACE_MONITORS_HPP
#define SMELLTRACE_MONITORS_HPP

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "smelltrace/core.hpp"
#include "smelltrace/events_file.hpp"

namespace smelltrace::monitors {

// ---------------------------------------------------------------------------
// Results
// ---------------------------------------------------------------------------

struct HmuPayload {
    std::string structure_type;  ///< HashMap, ArrayMap or SimpleArrayMap
    std::int64_t max_size = 0;   ///< largest size attempted over the structure's lifetime
    bool operator==(const HmuPayload&) const = default;
};

struct DwPayload {
    std::string wakelock_id;
    bool operator==(const DwPayload&) const = default;
};

enum class IodTrigger { alloc, duration };

struct IodPayload {
    std::string view_id;
    IodTrigger trigger = IodTrigger::alloc;
    bool operator==(const IodPayload&) const = default;
};

struct HeavyPayload {
    std::string task_id;
    std::int64_t duration_ms = 0;
    bool operator==(const HeavyPayload&) const = default;
};

enum class NlmrCause { missing, ineffective };

struct NlmrPayload {
    std::string activity;
    NlmrCause cause = NlmrCause::missing;
    bool operator==(const NlmrPayload&) const = default;
};

using Payload = std::variant<HmuPayload, DwPayload, IodPayload, HeavyPayload, NlmrPayload>;

/// One event that contributed to a detection, as printed in report files.
struct Witness {
    std::optional<std::int32_t> timestamp_ms;
    Location location;
    std::uint32_t id = 0;
    EventKind event = EventKind::hmuimpl;

    bool operator==(const Witness&) const = default;

    static Witness of(const LogEntry& e) {
        return Witness{e.timestamp_ms, e.location, e.id, e.event};
    }

    std::string render() const {
        std::string out = timestamp_ms ? format_time_of_day(*timestamp_ms) : std::string();
        out += ',';
        out += location.to_string();
        out += ',';
        out += std::to_string(id);
        out += ',';
        out += keyword_of(event);
        return out;
    }
};

struct SmellInstance {
    std::string apk;
    std::string package_name;
    std::string file;    ///< qualified class of the anchoring event
    std::string method;  ///< method of the anchoring event
    Smell kind = Smell::HMU;
    Payload payload;
    std::vector<Witness> witnesses;

    bool operator==(const SmellInstance&) const = default;
};

struct MonitorConfig {
    std::int64_t hmu_small_max = 100;  ///< HashMap sizes up to this are "small"
    std::int64_t hmu_large_min = 101;  ///< ArrayMap sizes from this up are "large"
    std::map<Smell, std::int64_t> heavy_millis = {
        {Smell::HAS, 200}, {Smell::HSS, 200}, {Smell::HBR, 200}};
    std::int64_t iod_frame_budget_ms = 16;  ///< one frame at 60 Hz
    double nlmr_min_release_fraction = 0.05;

    void validate() const {
        if (hmu_small_max <= 0 || hmu_large_min <= hmu_small_max)
            throw std::invalid_argument("hmu thresholds must satisfy 0 < small_max < large_min");
        for (auto kind : {Smell::HAS, Smell::HSS, Smell::HBR})
            if (!heavy_millis.contains(kind) || heavy_millis.at(kind) <= 0)
                throw std::invalid_argument("heavy thresholds must be positive for HAS/HSS/HBR");
        if (iod_frame_budget_ms <= 0)
            throw std::invalid_argument("iod frame budget must be positive");
        if (nlmr_min_release_fraction < 0.0 || nlmr_min_release_fraction > 1.0)
            throw std::invalid_argument("nlmr release fraction must be within [0,1]");
    }
};

struct DetectionResult {
    std::map<Smell, std::vector<SmellInstance>> instances;
    std::vector<std::string> diagnostics;  ///< inconsistent-trace notes, never fatal

    std::size_t total() const {
        std::size_t n = 0;
        for (const auto& [k, v] : instances) n += v.size();
        return n;
    }
};

// ---------------------------------------------------------------------------
// Detector internals
// ---------------------------------------------------------------------------

namespace detail {

inline std::optional<std::int64_t> parse_value_int(const std::string& s) {
    auto v = smelltrace::detail::parse_canonical_uint(s);
    if (!v || *v > static_cast<std::uint64_t>(INT64_MAX)) return std::nullopt;
    return static_cast<std::int64_t>(*v);
}

inline void note(std::vector<std::string>* diagnostics, std::string message) {
    if (diagnostics) diagnostics->push_back(std::move(message));
}

inline SmellInstance make_instance(const Trace& trace, const LogEntry& anchor, Smell kind,
                                   Payload payload) {
    SmellInstance inst;
    inst.apk = trace.source.apk;
    inst.package_name = trace.source.package_name;
    inst.file = anchor.location.qualified_class();
    inst.method = anchor.location.method;
    inst.kind = kind;
    inst.payload = std::move(payload);
    return inst;
}

// Instances are emitted in trace order of their anchoring event.
struct Pending {
    std::size_t anchor_pos;
    SmellInstance instance;
};

inline std::vector<SmellInstance> finish(std::vector<Pending>&& pending) {
    std::stable_sort(pending.begin(), pending.end(),
                     [](const Pending& a, const Pending& b) { return a.anchor_pos < b.anchor_pos; });
    std::vector<SmellInstance> out;
    out.reserve(pending.size());
    for (auto& p : pending) out.push_back(std::move(p.instance));
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// HMU: a HashMap kept small, or an (Simple)ArrayMap grown large
// ---------------------------------------------------------------------------

/// Tracks each structure's running size: impl assigns the declared size, add
/// is +1, addall adds the carried delta, remove is -1 floored at zero, clear
/// resets to zero. One instance per structure, anchored at its creation.
inline std::vector<SmellInstance> detect_hmu(const Trace& trace, const MonitorConfig& cfg,
                                             std::vector<std::string>* diagnostics = nullptr) {
    struct State {
        std::size_t anchor_pos = 0;
        const LogEntry* anchor = nullptr;
        std::string type;
        std::int64_t size = 0;
        std::int64_t max_size = 0;
    };
    std::map<std::string, State> structures;

    for (std::size_t pos = 0; pos < trace.entries.size(); ++pos) {
        const auto& e = trace.entries[pos];
        if (smell_of(e.event) != Smell::HMU) continue;
        const std::string& key = e.values[0];

        auto it = structures.find(key);
        if (it == structures.end()) {
            if (e.event != EventKind::hmuimpl)
                detail::note(diagnostics, "inconsistent-trace: " +
                                              std::string(keyword_of(e.event)) +
                                              " before hmuimpl for structure " + key +
                                              "; creation synthesized at size 0");
            State st;
            st.anchor_pos = pos;
            st.anchor = &e;
            st.type = e.values[2];
            it = structures.emplace(key, std::move(st)).first;
        }
        State& st = it->second;

        auto num = detail::parse_value_int(e.values[1]);
        if (!num) {
            detail::note(diagnostics, "inconsistent-trace: non-numeric size value '" +
                                          e.values[1] + "' for structure " + key);
            continue;
        }
        switch (e.event) {
        case EventKind::hmuimpl: st.size = *num; break;
        case EventKind::hmuadd: st.size += 1; break;
        case EventKind::hmuaddall: st.size += *num; break;
        case EventKind::hmuremove: st.size = std::max<std::int64_t>(0, st.size - 1); break;
        case EventKind::hmuclear: st.size = 0; break;
        default: break;
        }
        st.max_size = std::max(st.max_size, st.size);
    }

    std::vector<detail::Pending> pending;
    std::set<std::pair<std::string, std::string>> reported;  // (anchor location, key)
    for (const auto& [key, st] : structures) {
        const bool small_hashmap = st.type == "HashMap" && st.max_size <= cfg.hmu_small_max;
        const bool large_arraymap = (st.type == "ArrayMap" || st.type == "SimpleArrayMap") &&
                                    st.max_size >= cfg.hmu_large_min;
        if (!small_hashmap && !large_arraymap) continue;
        if (!reported.emplace(st.anchor->location.to_string(), key).second) continue;
        auto inst = detail::make_instance(trace, *st.anchor, Smell::HMU,
                                          HmuPayload{st.type, st.max_size});
        inst.witnesses.push_back(Witness::of(*st.anchor));
        pending.push_back({st.anchor_pos, std::move(inst)});
    }
    return detail::finish(std::move(pending));
}

// ---------------------------------------------------------------------------
// DW: a wakelock acquired and never released
// ---------------------------------------------------------------------------

/// Per wakelock, an acquire with no later release leaves one open obligation
/// at end of trace; a release restarts the obligation for later acquires.
inline std::vector<SmellInstance> detect_dw(const Trace& trace,
                                            std::vector<std::string>* diagnostics = nullptr) {
    struct State {
        bool held = false;
        std::size_t anchor_pos = 0;
        const LogEntry* anchor = nullptr;
    };
    std::map<std::string, State> locks;

    for (std::size_t pos = 0; pos < trace.entries.size(); ++pos) {
        const auto& e = trace.entries[pos];
        if (smell_of(e.event) != Smell::DW) continue;
        State& st = locks[e.values[0]];
        if (e.event == EventKind::wlacquire) {
            if (!st.held) {
                st.held = true;
                st.anchor_pos = pos;
                st.anchor = &e;
            }
        } else {
            if (!st.held)
                detail::note(diagnostics, "inconsistent-trace: wlrelease without acquire for "
                                          "wakelock " + e.values[0]);
            st.held = false;
            st.anchor = nullptr;
        }
    }

    std::vector<detail::Pending> pending;
    for (const auto& [key, st] : locks) {
        if (!st.held) continue;
        auto inst = detail::make_instance(trace, *st.anchor, Smell::DW, DwPayload{key});
        inst.witnesses.push_back(Witness::of(*st.anchor));
        pending.push_back({st.anchor_pos, std::move(inst)});
    }
    return detail::finish(std::move(pending));
}

// ---------------------------------------------------------------------------
// IOD: allocation or slow work inside a draw invocation
// ---------------------------------------------------------------------------

/// Each odstart..odend bracket of a view is one draw invocation. Any odalloc
/// inside triggers the alloc cause; otherwise a duration over the frame
/// budget triggers the duration cause. At most one instance per
/// (view, draw-site) across the trace.
inline std::vector<SmellInstance> detect_iod(const Trace& trace, const MonitorConfig& cfg,
                                             std::vector<std::string>* diagnostics = nullptr) {
    struct Open {
        std::size_t start_pos = 0;
        const LogEntry* start = nullptr;
        std::optional<std::int64_t> start_ms;
        const LogEntry* first_alloc = nullptr;
    };
    std::map<std::string, Open> open;
    std::set<std::pair<std::string, std::string>> reported;  // (start location, viewId)
    std::vector<detail::Pending> pending;

    for (std::size_t pos = 0; pos < trace.entries.size(); ++pos) {
        const auto& e = trace.entries[pos];
        if (smell_of(e.event) != Smell::IOD) continue;
        const std::string& view = e.values[0];

        switch (e.event) {
        case EventKind::odstart: {
            if (open.contains(view))
                detail::note(diagnostics, "inconsistent-trace: odstart while a draw of view " +
                                              view + " is already open; restarting bracket");
            Open o;
            o.start_pos = pos;
            o.start = &e;
            o.start_ms = detail::parse_value_int(e.values[1]);
            open[view] = o;
            break;
        }
        case EventKind::odalloc: {
            auto it = open.find(view);
            if (it == open.end()) {
                detail::note(diagnostics,
                             "inconsistent-trace: odalloc outside any draw of view " + view);
                break;
            }
            if (!it->second.first_alloc) it->second.first_alloc = &e;
            break;
        }
        case EventKind::odend: {
            auto it = open.find(view);
            if (it == open.end()) {
                detail::note(diagnostics,
                             "inconsistent-trace: odend without odstart for view " + view);
                break;
            }
            const Open o = it->second;
            open.erase(it);

            std::optional<IodTrigger> trigger;
            const LogEntry* second_witness = nullptr;
            if (o.first_alloc) {
                trigger = IodTrigger::alloc;
                second_witness = o.first_alloc;
            } else {
                auto end_ms = detail::parse_value_int(e.values[1]);
                if (o.start_ms && end_ms && *end_ms - *o.start_ms > cfg.iod_frame_budget_ms) {
                    trigger = IodTrigger::duration;
                    second_witness = &e;
                }
            }
            if (!trigger) break;
            if (!reported.emplace(o.start->location.to_string(), view).second) break;

            auto inst = detail::make_instance(trace, *o.start, Smell::IOD,
                                              IodPayload{view, *trigger});
            inst.witnesses.push_back(Witness::of(*o.start));
            inst.witnesses.push_back(Witness::of(*second_witness));
            pending.push_back({o.start_pos, std::move(inst)});
            break;
        }
        default: break;
        }
    }
    for (const auto& [view, o] : open)
        detail::note(diagnostics,
                     "inconsistent-trace: draw of view " + view + " still open at end of trace");
    return detail::finish(std::move(pending));
}

// ---------------------------------------------------------------------------
// HAS / HSS / HBR: long-running main-thread work
// ---------------------------------------------------------------------------

/// One instance per task whose start..end spans more than the configured
/// budget for its family. Tasks without an end stay undecided.
inline std::vector<SmellInstance> detect_heavy(const Trace& trace, const MonitorConfig& cfg,
                                               std::vector<std::string>* diagnostics = nullptr) {
    struct Open {
        std::size_t start_pos = 0;
        const LogEntry* start = nullptr;
        std::optional<std::int64_t> start_ms;
    };
    auto is_start = [](EventKind k) {
        return k == EventKind::hasstart || k == EventKind::hssstart || k == EventKind::hbrstart;
    };
    std::map<std::pair<Smell, std::string>, Open> open;
    std::set<std::tuple<Smell, std::string, std::string>> reported;  // (kind, loc, taskId)
    std::vector<detail::Pending> pending;

    for (std::size_t pos = 0; pos < trace.entries.size(); ++pos) {
        const auto& e = trace.entries[pos];
        const Smell family = smell_of(e.event);
        if (family != Smell::HAS && family != Smell::HSS && family != Smell::HBR) continue;
        const std::string& task = e.values[0];
        const auto key = std::make_pair(family, task);

        if (is_start(e.event)) {
            if (open.contains(key))
                detail::note(diagnostics, "inconsistent-trace: repeated start for " +
                                              std::string(to_string(family)) + " task " + task +
                                              "; restarting");
            Open o;
            o.start_pos = pos;
            o.start = &e;
            o.start_ms = detail::parse_value_int(e.values[1]);
            open[key] = o;
            continue;
        }

        auto it = open.find(key);
        if (it == open.end()) {
            detail::note(diagnostics, "inconsistent-trace: end without start for " +
                                          std::string(to_string(family)) + " task " + task);
            continue;
        }
        const Open o = it->second;
        open.erase(it);
        auto end_ms = detail::parse_value_int(e.values[1]);
        if (!o.start_ms || !end_ms) continue;
        const std::int64_t duration = *end_ms - *o.start_ms;
        if (duration <= cfg.heavy_millis.at(family)) continue;
        if (!reported.emplace(family, o.start->location.to_string(), task).second) continue;

        auto inst =
            detail::make_instance(trace, *o.start, family, HeavyPayload{task, duration});
        inst.witnesses.push_back(Witness::of(*o.start));
        inst.witnesses.push_back(Witness::of(e));
        pending.push_back({o.start_pos, std::move(inst)});
    }
    for (const auto& [key, o] : open)
        detail::note(diagnostics, "inconsistent-trace: " + std::string(to_string(key.first)) +
                                      " task " + key.second +
                                      " has no end before end of trace; duration unknown");
    return detail::finish(std::move(pending));
}

// ---------------------------------------------------------------------------
// NLMR: low-memory callback missing or ineffective
// ---------------------------------------------------------------------------

/// An activity started without any declared olmstart site for its class lacks
/// the callback entirely; a callback run that releases less than the
/// configured fraction of the heap is ineffective.
inline std::vector<SmellInstance> detect_nlmr(const Trace& trace, const EventsFile& events,
                                              const MonitorConfig& cfg,
                                              std::vector<std::string>* diagnostics = nullptr) {
    std::set<std::string> resolver_classes;
    for (const auto& d : events.decls())
        if (d.event == EventKind::olmstart) resolver_classes.insert(d.clazz);

    struct Open {
        std::size_t start_pos = 0;
        const LogEntry* start = nullptr;
        std::optional<std::int64_t> heap_before;
    };
    std::map<std::string, Open> open;                                 // by activity
    std::set<std::string> reported_missing;                           // by activity
    std::set<std::pair<std::string, std::string>> reported_ineffective;  // (loc, activity)
    std::vector<detail::Pending> pending;

    for (std::size_t pos = 0; pos < trace.entries.size(); ++pos) {
        const auto& e = trace.entries[pos];
        if (smell_of(e.event) != Smell::NLMR) continue;
        const std::string& activity = e.values[0];

        if (e.event == EventKind::actstart) {
            if (resolver_classes.contains(e.location.qualified_class())) continue;
            if (!reported_missing.insert(activity).second) continue;
            auto inst = detail::make_instance(trace, e, Smell::NLMR,
                                              NlmrPayload{activity, NlmrCause::missing});
            inst.witnesses.push_back(Witness::of(e));
            pending.push_back({pos, std::move(inst)});
            continue;
        }

        if (!resolver_classes.contains(e.location.qualified_class()))
            detail::note(diagnostics, "inconsistent-trace: low-memory event for undeclared "
                                      "class " + e.location.qualified_class());

        if (e.event == EventKind::olmstart) {
            if (open.contains(activity))
                detail::note(diagnostics, "inconsistent-trace: repeated olmstart for activity " +
                                              activity + "; restarting");
            Open o;
            o.start_pos = pos;
            o.start = &e;
            o.heap_before = detail::parse_value_int(e.values[1]);
            open[activity] = o;
            continue;
        }

        // olmend
        auto it = open.find(activity);
        if (it == open.end()) {
            detail::note(diagnostics,
                         "inconsistent-trace: olmend without olmstart for activity " + activity);
            continue;
        }
        const Open o = it->second;
        open.erase(it);
        auto heap_after = detail::parse_value_int(e.values[1]);
        if (!o.heap_before || !heap_after) continue;
        const double floor = static_cast<double>(*o.heap_before) *
                             (1.0 - cfg.nlmr_min_release_fraction);
        if (!(static_cast<double>(*heap_after) > floor)) continue;
        if (!reported_ineffective.emplace(o.start->location.to_string(), activity).second)
            continue;

        auto inst = detail::make_instance(trace, *o.start, Smell::NLMR,
                                          NlmrPayload{activity, NlmrCause::ineffective});
        inst.witnesses.push_back(Witness::of(*o.start));
        inst.witnesses.push_back(Witness::of(e));
        pending.push_back({o.start_pos, std::move(inst)});
    }
    for (const auto& [activity, o] : open)
        detail::note(diagnostics, "inconsistent-trace: olmstart for activity " + activity +
                                      " never closed");
    return detail::finish(std::move(pending));
}

// ---------------------------------------------------------------------------
// Orchestration and report files
// ---------------------------------------------------------------------------

/// Runs every monitor over the trace. Pure in (trace, events, cfg);
/// inconsistencies land in diagnostics, never abort detection.
inline DetectionResult detect(const Trace& trace, const EventsFile& events,
                              const MonitorConfig& cfg = {}) {
    cfg.validate();
    DetectionResult result;
    auto put = [&result](Smell kind, std::vector<SmellInstance> found) {
        if (!found.empty()) result.instances[kind] = std::move(found);
    };
    put(Smell::HMU, detect_hmu(trace, cfg, &result.diagnostics));
    put(Smell::DW, detect_dw(trace, &result.diagnostics));
    put(Smell::IOD, detect_iod(trace, cfg, &result.diagnostics));
    for (auto& inst : detect_heavy(trace, cfg, &result.diagnostics))
        result.instances[inst.kind].push_back(std::move(inst));
    put(Smell::NLMR, detect_nlmr(trace, events, cfg, &result.diagnostics));
    for (auto it = result.instances.begin(); it != result.instances.end();)
        it = it->second.empty() ? result.instances.erase(it) : std::next(it);
    return result;
}

inline std::string render_payload(const Payload& payload) {
    struct Renderer {
        std::string operator()(const HmuPayload& p) const {
            return p.structure_type + "," + std::to_string(p.max_size);
        }
        std::string operator()(const DwPayload& p) const { return p.wakelock_id; }
        std::string operator()(const IodPayload& p) const {
            return p.view_id + "," + (p.trigger == IodTrigger::alloc ? "alloc" : "duration");
        }
        std::string operator()(const HeavyPayload& p) const {
            return p.task_id + "," + std::to_string(p.duration_ms);
        }
        std::string operator()(const NlmrPayload& p) const {
            return p.activity + "," +
                   (p.cause == NlmrCause::missing ? "missing" : "ineffective");
        }
    };
    return std::visit(Renderer{}, payload);
}

/// One header line per instance, then one line per witness.
inline std::string render_instance(const SmellInstance& inst) {
    std::string out = inst.apk + "," + inst.package_name + "," + inst.file + "," + inst.method +
                      "," + render_payload(inst.payload);
    out += '\n';
    for (const auto& w : inst.witnesses) {
        out += w.render();
        out += '\n';
    }
    return out;
}

namespace detail {

inline void write_file_atomically(const std::filesystem::path& path, const std::string& body) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoFailure("cannot create " + tmp.string());
        out << body;
        out.flush();
        if (!out) throw IoFailure("write error on " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace detail

/// Writes one report file per smell kind into `out_dir`, empty files for
/// kinds without instances. Diagnostics go to a side `.diag` file, never
/// interleaved with reports.
inline void write_reports(const DetectionResult& result, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    for (Smell kind : all_smells) {
        std::string body;
        if (auto it = result.instances.find(kind); it != result.instances.end())
            for (const auto& inst : it->second) body += render_instance(inst);
        detail::write_file_atomically(out_dir / (std::string(to_string(kind)) + ".txt"), body);
    }
    if (!result.diagnostics.empty()) {
        std::string body;
        for (const auto& d : result.diagnostics) {
            body += d;
            body += '\n';
        }
        detail::write_file_atomically(out_dir / "detect.diag", body);
    }
}

}  // namespace smelltrace::monitors

#endif  // SMELLTRACE_MONITORS_HPP
