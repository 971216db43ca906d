/*
 * Copyright (C) 2026 The cwasi-cpp Authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cwasi/bench.hpp"
#include "cwasi/error.hpp"

namespace cwasi::bench {

namespace {

std::string format_double(double value)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

std::vector<std::string_view> split(std::string_view line, char sep)
{
    std::vector<std::string_view> out;
    size_t start = 0;
    for (;;) {
        auto pos = line.find(sep, start);
        out.push_back(line.substr(start, pos - start));
        if (pos == std::string_view::npos) {
            return out;
        }
        start = pos + 1;
    }
}

template <typename T>
T parse_number(std::string_view field, const char* column)
{
    T value {};
    auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || end != field.data() + field.size()) {
        raise(Errc::DecodeError, std::string("bad ") + column + " value '" + std::string(field) + "'");
    }
    return value;
}

double parse_double(std::string_view field, const char* column)
{
    // strtod instead of from_chars<double>, which older standard libraries lack.
    std::string text(field);
    char* end = nullptr;
    double value = std::strtod(text.c_str(), &end);
    if (text.empty() || end != text.c_str() + text.size()) {
        raise(Errc::DecodeError, std::string("bad ") + column + " value '" + text + "'");
    }
    return value;
}

} // namespace

std::string to_csv(const std::vector<BenchRecord>& records)
{
    if (records.empty()) {
        raise(Errc::InvalidArgument, "no records to emit");
    }

    std::ostringstream out;
    out << kCsvHeader << '\n';
    for (const auto& r : records) {
        out << pattern_name(r.pattern) << ',' << mode_name(r.mode) << ',' << r.payload_size << ',' << r.degree << ','
            << r.iteration << ',' << format_double(r.latency_s) << ',' << format_double(r.throughput_rps) << ','
            << (r.cpu_percent ? format_double(*r.cpu_percent) : "") << ','
            << (r.rss_kb ? std::to_string(*r.rss_kb) : "") << ',' << format_double(r.timestamp) << '\n';
    }
    return out.str();
}

void emit_csv(const std::vector<BenchRecord>& records, const std::filesystem::path& path)
{
    auto text = to_csv(records);
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) {
        raise(Errc::IoFailure, "cannot open " + path.string() + " for writing");
    }
    file << text;
    file.flush();
    if (!file) {
        raise(Errc::IoFailure, "cannot write " + path.string());
    }
}

std::vector<BenchRecord> parse_csv(std::string_view text)
{
    auto lines = split(text, '\n');
    if (lines.empty() || lines.front() != kCsvHeader) {
        raise(Errc::DecodeError, "missing or unexpected CSV header");
    }

    std::vector<BenchRecord> records;
    for (size_t i = 1; i < lines.size(); ++i) {
        auto line = lines[i];
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        if (line.empty()) {
            continue;
        }
        auto fields = split(line, ',');
        if (fields.size() != 10) {
            raise(Errc::DecodeError, "line " + std::to_string(i + 1) + " has " + std::to_string(fields.size())
                    + " fields, expected 10");
        }

        BenchRecord r;
        try {
            r.pattern = parse_pattern(fields[0]);
            r.mode = parse_mode(fields[1]);
        } catch (const Error& e) {
            raise(Errc::DecodeError, e.what());
        }
        r.payload_size = parse_number<uint64_t>(fields[2], "payload_size");
        r.degree = parse_number<uint32_t>(fields[3], "degree");
        r.iteration = parse_number<uint32_t>(fields[4], "iteration");
        r.latency_s = parse_double(fields[5], "latency_s");
        r.throughput_rps = parse_double(fields[6], "throughput_rps");
        if (!fields[7].empty()) {
            r.cpu_percent = parse_double(fields[7], "cpu_percent");
        }
        if (!fields[8].empty()) {
            r.rss_kb = parse_number<uint64_t>(fields[8], "rss_kb");
        }
        r.timestamp = parse_double(fields[9], "timestamp");
        records.push_back(r);
    }
    return records;
}

} // namespace cwasi::bench
