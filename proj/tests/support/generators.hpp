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

#ifndef SMELLTRACE_TESTS_GENERATORS_HPP
#define SMELLTRACE_TESTS_GENERATORS_HPP

#include <random>
#include <string>
#include <vector>

#include "smelltrace/core.hpp"

namespace testsupport {

using smelltrace::EventKind;
using smelltrace::Location;
using smelltrace::LogEntry;
using smelltrace::Smell;
using smelltrace::Trace;

inline std::size_t pick(std::mt19937_64& rng, std::size_t bound) {
    return static_cast<std::size_t>(rng() % bound);
}

inline std::string random_identifier(std::mt19937_64& rng, bool upper_first) {
    static constexpr char lower[] = "abcdefghijklmnopqrstuvwxyz";
    static constexpr char mixed[] = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_";
    std::string out;
    char first = lower[pick(rng, 26)];
    if (upper_first) first = static_cast<char>(first - 'a' + 'A');
    out.push_back(first);
    const std::size_t len = 1 + pick(rng, 8);
    for (std::size_t i = 0; i < len; ++i) out.push_back(mixed[pick(rng, sizeof(mixed) - 1)]);
    return out;
}

inline Location random_location(std::mt19937_64& rng) {
    Location loc;
    const std::size_t package_depth = pick(rng, 4);  // may be empty
    for (std::size_t i = 0; i < package_depth; ++i) {
        if (i) loc.package += '.';
        loc.package += random_identifier(rng, false);
    }
    const std::size_t class_depth = 1 + pick(rng, 3);
    for (std::size_t i = 0; i < class_depth; ++i) {
        if (i) loc.clazz += '$';
        loc.clazz += random_identifier(rng, true);
    }
    loc.clazz += ".java";
    switch (pick(rng, 5)) {
    case 0: loc.method = "<init>"; break;
    case 1: loc.method = "<clinit>"; break;
    case 2: loc.method = "lambda$" + random_identifier(rng, false) + "$0"; break;
    default: loc.method = random_identifier(rng, false); break;
    }
    return loc;
}

inline std::string random_value(std::mt19937_64& rng) {
    switch (pick(rng, 4)) {
    case 0: return std::to_string(rng() % 1000000);
    case 1: return random_identifier(rng, true);
    case 2: return "";  // empty value fields survive the grammar
    default: return std::to_string(rng() % 64);
    }
}

inline LogEntry random_entry(std::mt19937_64& rng) {
    LogEntry e;
    if (pick(rng, 2) == 0)
        e.timestamp_ms = static_cast<std::int32_t>(rng() % smelltrace::millis_per_day);
    e.location = random_location(rng);
    e.id = static_cast<std::uint32_t>(rng() % 4);
    e.event = smelltrace::all_event_kinds[pick(rng, smelltrace::all_event_kinds.size())];
    for (int i = 0; i < smelltrace::arity_of(e.event); ++i)
        e.values.push_back(random_value(rng));
    return e;
}

// -- Trace generator over the full event grammar, small key/location pools so
//    that obligations actually collide.

struct GrammarPools {
    std::vector<Location> locations;
    std::vector<std::string> keys = {"7", "8", "9"};
    std::vector<std::string> structure_types = {"HashMap", "ArrayMap", "SimpleArrayMap",
                                                "TreeMap"};
    std::vector<std::string> activities = {"Main", "Settings"};

    static GrammarPools standard() {
        GrammarPools p;
        Location a{"app", "Main.java", "onCreate"};
        Location b{"app", "Main.java", "onDraw"};
        Location c{"app", "Worker$Task.java", "run"};
        Location d{"app", "Settings.java", "<init>"};
        p.locations = {a, b, c, d};
        return p;
    }
};

inline LogEntry random_grammar_entry(std::mt19937_64& rng, const GrammarPools& pools,
                                     std::int64_t& clock) {
    LogEntry e;
    clock += static_cast<std::int64_t>(rng() % 200);
    e.timestamp_ms = static_cast<std::int32_t>(clock % smelltrace::millis_per_day);
    e.location = pools.locations[pick(rng, pools.locations.size())];
    e.id = static_cast<std::uint32_t>(rng() % 2);
    e.event = smelltrace::all_event_kinds[pick(rng, smelltrace::all_event_kinds.size())];

    const std::string& key = pools.keys[pick(rng, pools.keys.size())];
    switch (smelltrace::smell_of(e.event)) {
    case Smell::HMU:
        e.values = {key, std::to_string(rng() % 150),
                    pools.structure_types[pick(rng, pools.structure_types.size())]};
        break;
    case Smell::DW: e.values = {key}; break;
    case Smell::IOD:
        if (e.event == EventKind::odalloc)
            e.values = {key, std::to_string(rng() % 8192)};
        else
            e.values = {key, std::to_string(clock)};
        break;
    case Smell::HAS:
    case Smell::HSS:
    case Smell::HBR: e.values = {key, std::to_string(clock)}; break;
    case Smell::NLMR:
        if (e.event == EventKind::actstart)
            e.values = {pools.activities[pick(rng, pools.activities.size())]};
        else
            e.values = {pools.activities[pick(rng, pools.activities.size())],
                        std::to_string(1000000 + rng() % 1000000)};
        break;
    }
    return e;
}

inline Trace random_grammar_trace(std::mt19937_64& rng, std::size_t max_entries,
                                  const GrammarPools& pools = GrammarPools::standard()) {
    Trace trace;
    trace.source = {"app.apk", "app"};
    std::int64_t clock = 1000;
    const std::size_t n = pick(rng, max_entries + 1);
    for (std::size_t i = 0; i < n; ++i)
        trace.entries.push_back(random_grammar_entry(rng, pools, clock));
    return trace;
}

}  // namespace testsupport

#endif  // SMELLTRACE_TESTS_GENERATORS_HPP
