/*
 * Copyright (C) 2026 The cwasi-cpp Authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#include <unistd.h>

#include <condition_variable>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "cwasi/bench.hpp"
#include "cwasi/error.hpp"

namespace cwasi::bench {

namespace {

struct ProcStat {
    uint64_t cpu_ticks = 0;
    uint64_t rss_kb = 0;
};

ProcStat read_proc(pid_t pid)
{
    auto base = "/proc/" + std::to_string(pid);
    std::ifstream stat(base + "/stat");
    std::string line;
    if (!stat || !std::getline(stat, line)) {
        raise(Errc::Unsupported, "no process statistics for pid " + std::to_string(pid));
    }

    // The command name may contain spaces; fields resume after the last ')'.
    auto close = line.rfind(')');
    if (close == std::string::npos) {
        raise(Errc::Unsupported, "unreadable /proc stat line");
    }
    std::istringstream rest(line.substr(close + 2));
    std::string state;
    rest >> state;
    if (state == "Z" || state == "X") {
        raise(Errc::Unsupported, "pid " + std::to_string(pid) + " is not running");
    }
    // Fields 4..13 precede utime (14) and stime (15).
    std::string skip;
    for (int i = 4; i <= 13; ++i) {
        rest >> skip;
    }
    uint64_t utime = 0, stime = 0;
    if (!(rest >> utime >> stime)) {
        raise(Errc::Unsupported, "unreadable /proc stat times");
    }

    ProcStat out;
    out.cpu_ticks = utime + stime;

    std::ifstream status(base + "/status");
    while (std::getline(status, line)) {
        if (line.rfind("VmRSS:", 0) == 0) {
            std::istringstream(line.substr(6)) >> out.rss_kb;
            break;
        }
    }
    return out;
}

double cpu_percent(uint64_t ticks, std::chrono::steady_clock::duration wall)
{
    static const long hz = ::sysconf(_SC_CLK_TCK);
    double seconds = std::chrono::duration<double>(wall).count();
    if (seconds <= 0 || hz <= 0) {
        return 0;
    }
    return 100.0 * (static_cast<double>(ticks) / static_cast<double>(hz)) / seconds;
}

} // namespace

ResourceSample sample_resources(pid_t pid, std::chrono::milliseconds interval)
{
    auto before = read_proc(pid);
    auto t0 = std::chrono::steady_clock::now();
    std::this_thread::sleep_for(interval);
    auto after = read_proc(pid);
    auto wall = std::chrono::steady_clock::now() - t0;

    return ResourceSample {cpu_percent(after.cpu_ticks - before.cpu_ticks, wall), after.rss_kb};
}

struct ResourceSampler::State {
    pid_t pid = 0;
    std::chrono::milliseconds interval {100};
    mutable std::mutex mutex;
    std::condition_variable wake;
    bool stop = false;
    std::optional<ResourceSample> latest;
    std::thread thread;

    void run()
    {
        std::optional<ProcStat> previous;
        auto previous_time = std::chrono::steady_clock::now();
        try {
            previous = read_proc(pid);
        } catch (const Error&) {
            return;
        }

        std::unique_lock lock(mutex);
        while (!wake.wait_for(lock, interval, [&] { return stop; })) {
            lock.unlock();
            std::optional<ResourceSample> sample;
            auto now = std::chrono::steady_clock::now();
            try {
                auto current = read_proc(pid);
                sample = ResourceSample {
                    cpu_percent(current.cpu_ticks - previous->cpu_ticks, now - previous_time), current.rss_kb};
                previous = current;
                previous_time = now;
            } catch (const Error&) {
            }
            lock.lock();
            if (!sample) {
                return;
            }
            latest = sample;
        }
    }
};

ResourceSampler::ResourceSampler(pid_t pid, std::chrono::milliseconds interval)
    : state_(std::make_shared<State>())
{
    state_->pid = pid;
    state_->interval = interval;
    state_->thread = std::thread([state = state_] { state->run(); });
}

ResourceSampler::~ResourceSampler()
{
    {
        std::lock_guard lock(state_->mutex);
        state_->stop = true;
    }
    state_->wake.notify_all();
    state_->thread.join();
}

std::optional<ResourceSample> ResourceSampler::latest() const
{
    std::lock_guard lock(state_->mutex);
    return state_->latest;
}

} // namespace cwasi::bench
