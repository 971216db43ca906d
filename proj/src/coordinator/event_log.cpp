/*
 * Copyright (C) 2026 The cwasi-cpp Authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#include <chrono>

#include "cwasi/coordinator.hpp"
#include "json.hpp"

namespace cwasi {

std::string to_line(const Event& event)
{
    nlohmann::ordered_json line;
    line["seq"] = event.seq;
    line["ts_ns"] = event.timestamp_ns;
    line["function"] = event.function;
    line["event"] = event.event;
    line["mode"] = event.mode;
    return line.dump();
}

EventLog::EventLog(std::ostream& sink)
    : sink_(&sink)
{
}

void EventLog::record(std::string_view function, std::string_view event, std::string_view mode)
{
    auto now = std::chrono::duration_cast<std::chrono::nanoseconds>(
        std::chrono::steady_clock::now().time_since_epoch())
                   .count();

    std::lock_guard lock(mutex_);
    Event entry {events_.size(), now, std::string(function), std::string(event), std::string(mode)};
    if (sink_) {
        *sink_ << to_line(entry) << '\n';
    }
    events_.push_back(std::move(entry));
}

std::vector<Event> EventLog::events() const
{
    std::lock_guard lock(mutex_);
    return events_;
}

std::vector<Event> EventLog::events_for(std::string_view function) const
{
    std::lock_guard lock(mutex_);
    std::vector<Event> out;
    for (const auto& e : events_) {
        if (e.function == function) {
            out.push_back(e);
        }
    }
    return out;
}

size_t EventLog::count(std::string_view function, std::string_view event) const
{
    std::lock_guard lock(mutex_);
    size_t n = 0;
    for (const auto& e : events_) {
        n += e.function == function && e.event == event;
    }
    return n;
}

std::optional<size_t> EventLog::first(std::string_view function, std::string_view event) const
{
    std::lock_guard lock(mutex_);
    for (size_t i = 0; i < events_.size(); ++i) {
        if (events_[i].function == function && events_[i].event == event) {
            return i;
        }
    }
    return std::nullopt;
}

} // namespace cwasi
