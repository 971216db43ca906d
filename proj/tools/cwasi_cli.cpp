/*
 * Copyright (C) 2026 The cwasi-cpp Authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

// Command-line front end. Talks to the runtime only through the C API.

#include <pthread.h>
#include <signal.h>

#include <cstdio>
#include <fstream>
#include <iterator>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "cwasi/cwasi.h"

namespace {

constexpr int kExitFailure = 1;

struct CliError {
    cwasi_status status;
    std::string message;
};

void check(cwasi_status status)
{
    if (status != CWASI_OK) {
        throw CliError {status, cwasi_last_error()};
    }
}

/// Owns a string handed out by the library.
struct OwnedString {
    char* text = nullptr;
    ~OwnedString() { cwasi_string_free(text); }
    std::string str() const { return text ? text : ""; }
};

struct OwnedBuffer {
    cwasi_buffer buffer {nullptr, 0};
    ~OwnedBuffer() { cwasi_buffer_free(&buffer); }
};

struct Registry {
    cwasi_registry* handle = nullptr;
    explicit Registry(const std::string& path) { check(cwasi_registry_open(path.c_str(), 1, &handle)); }
    ~Registry() { cwasi_registry_close(handle); }
};

const char* or_null(const std::string& text)
{
    return text.empty() ? nullptr : text.c_str();
}

std::string read_payload(const std::string& data, const std::string& file)
{
    if (file.empty()) {
        return data;
    }
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        throw CliError {CWASI_E_IO_FAILURE, "cannot read " + file};
    }
    return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_reply(const cwasi_buffer& reply)
{
    std::fwrite(reply.data, 1, reply.size, stdout);
    std::fflush(stdout);
}

/// Internal signal that releases a sigwait without killing anything.
constexpr int kWakeSignal = SIGUSR2;

/// Blocks SIGINT, SIGTERM and the wake signal so a helper thread can wait for them with sigwait.
sigset_t block_termination_signals()
{
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    sigaddset(&set, kWakeSignal);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);
    return set;
}

struct BenchArgs {
    std::string pattern;
    std::string mode = "local";
    std::string size = "0";
    uint32_t degree = 1;
    uint32_t iterations = 10;
    uint32_t warmup = 2;
    uint32_t concurrency = 0;
    bool one_shot = false;
    std::string handler = "echo";
    std::string out;
    std::string broker;
    std::string running_path;
    uint32_t timeout_ms = 30000;
};

int run_bench(const BenchArgs& args)
{
    cwasi_bench_config config;
    cwasi_bench_config_init(&config);
    check(cwasi_parse_pattern(args.pattern.c_str(), &config.pattern));
    check(cwasi_parse_mode(args.mode.c_str(), &config.mode));
    check(cwasi_parse_size(args.size.c_str(), &config.payload_size));
    config.degree = args.degree;
    config.iterations = args.iterations;
    config.warmup = args.warmup;
    config.concurrency = args.concurrency;
    config.one_shot = args.one_shot;
    config.handler = args.handler.c_str();
    config.broker_address = or_null(args.broker);
    config.running_path = or_null(args.running_path);
    config.timeout_ms = args.timeout_ms;

    cwasi_bench_result* result = nullptr;
    cwasi_status status = cwasi_bench_run(&config, &result);
    if (!result) {
        check(status);
    }
    std::string failure = status == CWASI_OK ? "" : cwasi_last_error();

    // Partial results still go out; an aborted run with no records leaves a header-only file.
    if (!args.out.empty()) {
        if (cwasi_bench_record_count(result) > 0) {
            cwasi_status written = cwasi_bench_write_csv(result, args.out.c_str());
            if (written != CWASI_OK) {
                cwasi_bench_result_free(result);
                check(written);
            }
        } else {
            std::ofstream(args.out) << cwasi_bench_csv_header() << '\n';
        }
    }

    cwasi_bench_summary summary;
    cwasi_bench_summary_get(result, &summary);
    std::fprintf(stderr,
        "%s %s size=%s degree=%u: %llu requests, median %.6f s, mean %.6f s, p95 %.6f s, %.2f req/s\n",
        args.pattern.c_str(), cwasi_mode_name(config.mode), args.size.c_str(), args.degree,
        static_cast<unsigned long long>(summary.requests), summary.median_latency_s, summary.mean_latency_s,
        summary.p95_latency_s, summary.throughput_rps);
    cwasi_bench_result_free(result);

    if (status != CWASI_OK) {
        throw CliError {status, failure};
    }
    return 0;
}

struct RunArgs {
    std::string bundle;
    std::string running_path = "/run/cwasi";
    std::string broker;
    std::string snapshot;
    std::string event_log;
    std::string input;
    std::string input_file;
    bool persistent = false;
    bool no_register = false;
    uint32_t timeout_ms = 30000;
};

int run_function(const RunArgs& args)
{
    auto signals = block_termination_signals();
    Registry registry(args.running_path);
    std::string input = read_payload(args.input, args.input_file);

    cwasi_function_options options;
    cwasi_function_options_init(&options);
    options.broker_address = or_null(args.broker);
    options.snapshot_root = or_null(args.snapshot);
    options.event_log_path = or_null(args.event_log);
    options.persistent = args.persistent;
    options.timeout_ms = args.timeout_ms;
    options.input = reinterpret_cast<const uint8_t*>(input.data());
    options.input_size = input.size();

    cwasi_role role;
    check(cwasi_spec_role(args.bundle.c_str(), &role));
    options.register_function = role == CWASI_ROLE_SECONDARY && !args.no_register;

    cwasi_function* function = nullptr;
    check(cwasi_function_start(args.bundle.c_str(), registry.handle, &options, &function));

    // A signal kills the function, which releases the wait below.
    std::thread watcher([&signals, function] {
        int received = 0;
        sigwait(&signals, &received);
        if (received != kWakeSignal) {
            cwasi_function_kill(function);
        }
    });

    cwasi_status status = cwasi_function_wait(function);
    std::string failure = status == CWASI_OK ? "" : cwasi_last_error();

    if (status == CWASI_OK && role == CWASI_ROLE_PRIMARY) {
        OwnedBuffer output;
        check(cwasi_function_output(function, &output.buffer));
        write_reply(output.buffer);
    } else if (role == CWASI_ROLE_SECONDARY) {
        std::fprintf(stderr, "served %llu request(s)\n",
            static_cast<unsigned long long>(cwasi_function_executions(function)));
    }

    cwasi_function_free(function);
    pthread_kill(watcher.native_handle(), kWakeSignal);
    watcher.join();

    if (status != CWASI_OK) {
        throw CliError {status, failure};
    }
    return 0;
}

int serve_broker(const std::string& listen)
{
    auto signals = block_termination_signals();
    cwasi_broker* broker = nullptr;
    check(cwasi_broker_serve(listen.c_str(), &broker));

    OwnedString address;
    check(cwasi_broker_address(broker, &address.text));
    std::printf("broker listening on %s\n", address.text);
    std::fflush(stdout);

    int received = 0;
    do {
        sigwait(&signals, &received);
    } while (received == kWakeSignal);
    cwasi_broker_stop(broker);
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app {"cwasi: shim runtime for WebAssembly function communication"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(cwasi_version()));

    BenchArgs bench;
    auto* bench_cmd = app.add_subcommand("bench", "Run a communication benchmark and emit CSV");
    bench_cmd->add_option("pattern", bench.pattern, "sequential, fanout or fanin")
        ->required()
        ->check(CLI::IsMember({"sequential", "fanout", "fanin"}));
    bench_cmd->add_option("--mode", bench.mode, "embedded, local or network")->capture_default_str();
    bench_cmd->add_option("--size", bench.size, "Payload size: bytes or a K/M/G suffix")->capture_default_str();
    bench_cmd->add_option("--degree", bench.degree, "Concurrent requests per batch")->capture_default_str();
    bench_cmd->add_option("--iterations", bench.iterations, "Measured batches")->capture_default_str();
    bench_cmd->add_option("--warmup", bench.warmup, "Unmeasured batches first")->capture_default_str();
    bench_cmd->add_option("--concurrency", bench.concurrency, "In-flight request cap (0: min(degree, 8))");
    bench_cmd->add_flag("--one-shot", bench.one_shot, "Fresh one-shot receiver per request (sequential local)");
    bench_cmd->add_option("--handler", bench.handler, "echo, reverse or checksum")->capture_default_str();
    bench_cmd->add_option("--out", bench.out, "CSV output path");
    bench_cmd->add_option("--broker", bench.broker, "Broker host:port (default: in-process broker)");
    bench_cmd->add_option("--running-path", bench.running_path, "Registry directory (default: temporary)");
    bench_cmd->add_option("--timeout-ms", bench.timeout_ms, "Per-request timeout")->capture_default_str();

    RunArgs run;
    auto* run_cmd = app.add_subcommand("run", "Start a function from its bundle");
    run_cmd->add_option("bundle", run.bundle, "Bundle directory holding config.json")->required();
    run_cmd->add_option("--running-path", run.running_path, "Registry directory")->capture_default_str();
    run_cmd->add_option("--broker", run.broker, "Broker host:port for the networked buffer");
    run_cmd->add_option("--snapshot", run.snapshot, "Snapshot store for embedding discovery");
    run_cmd->add_option("--event-log", run.event_log, "Append lifecycle events as JSON lines");
    run_cmd->add_option("--input", run.input, "Input bytes for a primary");
    run_cmd->add_option("--input-file", run.input_file, "Read the primary's input from a file");
    run_cmd->add_flag("--persistent", run.persistent, "Secondaries keep serving after the first reply");
    run_cmd->add_flag("--no-register", run.no_register, "Do not add a secondary to the registry");
    run_cmd->add_option("--timeout-ms", run.timeout_ms, "Transport timeout")->capture_default_str();

    std::string listen = "127.0.0.1:7077";
    auto* broker_cmd = app.add_subcommand("broker", "Run the reference broker until interrupted");
    broker_cmd->add_option("--listen", listen, "Bind address host:port")->capture_default_str();

    std::string running_path = "/run/cwasi";
    std::string target;
    std::string source_bundle;
    std::string snapshot;
    auto* select_cmd = app.add_subcommand("select", "Show how a call to a function type would be routed");
    select_cmd->add_option("target", target, "Function type (args[0] of the target)")->required();
    select_cmd->add_option("--running-path", running_path, "Registry directory")->capture_default_str();
    select_cmd->add_option("--from", source_bundle, "Source bundle: print the communication mode instead");
    select_cmd->add_option("--snapshot", snapshot, "Snapshot store consulted with --from");

    std::string module;
    auto* imports_cmd = app.add_subcommand("imports", "List a module's imports as JSON");
    imports_cmd->add_option("module", module, ".wasm or .wat file")->required();

    auto* discover_cmd = app.add_subcommand("discover", "List snapshot bundles a module would embed");
    discover_cmd->add_option("module", module, ".wasm or .wat file")->required();
    discover_cmd->add_option("--snapshot", snapshot, "Snapshot store")->required();

    std::string socket;
    std::string data;
    std::string data_file;
    uint32_t timeout_ms = 30000;
    auto* send_cmd = app.add_subcommand("send", "Send one request over the local buffer");
    send_cmd->add_option("socket", socket, "Receiver socket path")->required();
    send_cmd->add_option("--data", data, "Request bytes");
    send_cmd->add_option("--file", data_file, "Read the request from a file");
    send_cmd->add_option("--timeout-ms", timeout_ms, "Reply timeout")->capture_default_str();

    std::string broker_address = "127.0.0.1:7077";
    auto* publish_cmd = app.add_subcommand("publish", "Send one request through the broker");
    publish_cmd->add_option("target", target, "Target queue (function type)")->required();
    publish_cmd->add_option("--broker", broker_address, "Broker host:port")->capture_default_str();
    publish_cmd->add_option("--data", data, "Request bytes");
    publish_cmd->add_option("--file", data_file, "Read the request from a file");
    publish_cmd->add_option("--timeout-ms", timeout_ms, "Reply timeout")->capture_default_str();

    std::string bundle;
    std::string name;
    auto* register_cmd = app.add_subcommand("register", "Add a bundle's function to the registry");
    register_cmd->add_option("bundle", bundle, "Bundle directory")->required();
    register_cmd->add_option("--running-path", running_path, "Registry directory")->capture_default_str();
    auto* unregister_cmd = app.add_subcommand("unregister", "Remove a registry entry");
    unregister_cmd->add_option("name", name, "Entry (bundle directory) name")->required();
    unregister_cmd->add_option("--running-path", running_path, "Registry directory")->capture_default_str();
    auto* list_cmd = app.add_subcommand("list", "List registry entries");
    list_cmd->add_option("--running-path", running_path, "Registry directory")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*bench_cmd) {
            return run_bench(bench);
        }
        if (*run_cmd) {
            return run_function(run);
        }
        if (*broker_cmd) {
            return serve_broker(listen);
        }
        if (*select_cmd) {
            Registry registry(running_path);
            if (!source_bundle.empty()) {
                cwasi_mode mode;
                check(cwasi_select_mode(registry.handle, source_bundle.c_str(), target.c_str(), or_null(snapshot), &mode));
                std::printf("%s\n", cwasi_mode_name(mode));
                return 0;
            }
            OwnedString path;
            check(cwasi_registry_select(registry.handle, target.c_str(), &path.text));
            std::printf("%s\n", path.text ? path.text : "not local");
            return 0;
        }
        if (*imports_cmd) {
            OwnedString json;
            check(cwasi_read_imports(module.c_str(), &json.text));
            std::printf("%s\n", json.text);
            return 0;
        }
        if (*discover_cmd) {
            OwnedString json;
            check(cwasi_discover_embeddings(module.c_str(), snapshot.c_str(), &json.text));
            std::printf("%s\n", json.text);
            return 0;
        }
        if (*send_cmd || *publish_cmd) {
            std::string payload = read_payload(data, data_file);
            const auto* bytes = reinterpret_cast<const uint8_t*>(payload.data());
            OwnedBuffer reply;
            if (*send_cmd) {
                check(cwasi_local_send(socket.c_str(), bytes, payload.size(), timeout_ms, &reply.buffer));
            } else {
                check(cwasi_publish_request(
                    broker_address.c_str(), target.c_str(), bytes, payload.size(), timeout_ms, &reply.buffer));
            }
            write_reply(reply.buffer);
            return 0;
        }
        if (*register_cmd) {
            Registry registry(running_path);
            OwnedString path;
            check(cwasi_registry_register(registry.handle, bundle.c_str(), &path.text));
            std::printf("%s\n", path.text);
            return 0;
        }
        if (*unregister_cmd) {
            Registry registry(running_path);
            check(cwasi_registry_unregister(registry.handle, name.c_str()));
            return 0;
        }
        if (*list_cmd) {
            Registry registry(running_path);
            OwnedString names;
            check(cwasi_registry_list(registry.handle, &names.text));
            std::fputs(names.str().c_str(), stdout);
            return 0;
        }
    } catch (const CliError& e) {
        std::fprintf(stderr, "cwasi: %s\n", e.message.empty() ? cwasi_status_name(e.status) : e.message.c_str());
        return kExitFailure;
    }
    return 0;
}
