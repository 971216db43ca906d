/*
 * Copyright (C) 2026 The cwasi-cpp Authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#include "cwasi/cwasi.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <optional>
#include <string>

#include "json.hpp"

#include "cwasi/bench.hpp"
#include "cwasi/broker.hpp"
#include "cwasi/coordinator.hpp"
#include "cwasi/error.hpp"
#include "cwasi/guest/wasm_engine.hpp"
#include "cwasi/linker.hpp"
#include "cwasi/local_buffer.hpp"
#include "cwasi/registry.hpp"
#include "cwasi/spec.hpp"

using namespace cwasi;

struct cwasi_registry {
    RunningRegistry registry;
};

struct cwasi_broker {
    std::unique_ptr<broker::Broker> broker;
};

struct cwasi_function {
    guest::WasmEngine engine;
    std::ofstream event_file;
    std::unique_ptr<EventLog> log;
    std::unique_ptr<RunningFunction> running;
    cwasi_registry* registry = nullptr;
    std::optional<std::string> registered_name;
};

struct cwasi_bench_result {
    bench::BenchRun run;
};

namespace {

constexpr const char* kVersion = "0.1.0";

thread_local std::string last_error;

cwasi_status fail(cwasi_status status, std::string message)
{
    last_error = std::move(message);
    return status;
}

/// Runs body, mapping exceptions to status codes and the thread's last error.
template <typename Body>
cwasi_status guarded(Body&& body) noexcept
{
    try {
        body();
        return CWASI_OK;
    } catch (const Error& e) {
        return fail(static_cast<cwasi_status>(e.code()), e.what());
    } catch (const std::bad_alloc&) {
        return fail(CWASI_E_ALLOCATION_FAILURE, "out of memory");
    } catch (const std::exception& e) {
        return fail(CWASI_E_INTERNAL, e.what());
    } catch (...) {
        return fail(CWASI_E_INTERNAL, "unknown failure");
    }
}

void require(bool condition, const char* what)
{
    if (!condition) {
        raise(Errc::InvalidArgument, what);
    }
}

char* copy_string(std::string_view text)
{
    auto* out = static_cast<char*>(std::malloc(text.size() + 1));
    if (!out) {
        throw std::bad_alloc();
    }
    std::memcpy(out, text.data(), text.size());
    out[text.size()] = '\0';
    return out;
}

void fill_buffer(cwasi_buffer* out, ByteView data)
{
    out->data = nullptr;
    out->size = 0;
    if (data.empty()) {
        return;
    }
    out->data = static_cast<uint8_t*>(std::malloc(data.size()));
    if (!out->data) {
        throw std::bad_alloc();
    }
    std::memcpy(out->data, data.data(), data.size());
    out->size = data.size();
}

ByteView view(const uint8_t* data, size_t size)
{
    require(data || size == 0, "null data with a non-zero size");
    return ByteView(data, size);
}

std::chrono::milliseconds timeout_or_default(uint32_t ms)
{
    return ms ? std::chrono::milliseconds(ms) : local::kDefaultTimeout;
}

std::string text_or_empty(const char* text)
{
    return text ? std::string(text) : std::string();
}

CommunicationMode to_mode(cwasi_mode mode)
{
    switch (mode) {
    case CWASI_MODE_EMBEDDED:
        return CommunicationMode::Embedded;
    case CWASI_MODE_LOCAL:
        return CommunicationMode::LocalBuffer;
    case CWASI_MODE_NETWORK:
        return CommunicationMode::NetworkedBuffer;
    }
    raise(Errc::InvalidArgument, "unknown mode value");
}

cwasi_mode from_mode(CommunicationMode mode)
{
    switch (mode) {
    case CommunicationMode::Embedded:
        return CWASI_MODE_EMBEDDED;
    case CommunicationMode::LocalBuffer:
        return CWASI_MODE_LOCAL;
    case CommunicationMode::NetworkedBuffer:
        break;
    }
    return CWASI_MODE_NETWORK;
}

bench::Pattern to_pattern(cwasi_pattern pattern)
{
    switch (pattern) {
    case CWASI_PATTERN_SEQUENTIAL:
        return bench::Pattern::Sequential;
    case CWASI_PATTERN_FANOUT:
        return bench::Pattern::FanOut;
    case CWASI_PATTERN_FANIN:
        return bench::Pattern::FanIn;
    }
    raise(Errc::InvalidArgument, "unknown pattern value");
}

std::string paths_json(const BundlePathSet& paths)
{
    auto array = nlohmann::json::array();
    for (const auto& path : paths) {
        array.push_back(path.string());
    }
    return array.dump();
}

} // namespace

extern "C" {

const char* cwasi_version(void)
{
    return kVersion;
}

const char* cwasi_status_name(cwasi_status status)
{
    // errc_name returns views of string literals, so data() is NUL-terminated.
    return errc_name(static_cast<Errc>(status)).data();
}

const char* cwasi_last_error(void)
{
    return last_error.c_str();
}

void cwasi_string_free(char* text)
{
    std::free(text);
}

void cwasi_buffer_free(cwasi_buffer* buffer)
{
    if (buffer) {
        std::free(buffer->data);
        buffer->data = nullptr;
        buffer->size = 0;
    }
}

const char* cwasi_mode_name(cwasi_mode mode)
{
    switch (mode) {
    case CWASI_MODE_EMBEDDED:
        return "embedded";
    case CWASI_MODE_LOCAL:
        return "local";
    case CWASI_MODE_NETWORK:
        return "network";
    }
    return "unknown";
}

cwasi_status cwasi_parse_mode(const char* name, cwasi_mode* out)
{
    return guarded([&] {
        require(name && out, "name and out are required");
        *out = from_mode(parse_mode(name));
    });
}

cwasi_status cwasi_parse_pattern(const char* name, cwasi_pattern* out)
{
    return guarded([&] {
        require(name && out, "name and out are required");
        switch (bench::parse_pattern(name)) {
        case bench::Pattern::Sequential:
            *out = CWASI_PATTERN_SEQUENTIAL;
            break;
        case bench::Pattern::FanOut:
            *out = CWASI_PATTERN_FANOUT;
            break;
        case bench::Pattern::FanIn:
            *out = CWASI_PATTERN_FANIN;
            break;
        }
    });
}

cwasi_status cwasi_parse_size(const char* text, uint64_t* out)
{
    return guarded([&] {
        require(text && out, "text and out are required");
        *out = bench::parse_size(text);
    });
}

cwasi_status cwasi_spec_role(const char* bundle_path, cwasi_role* out)
{
    return guarded([&] {
        require(bundle_path && out, "bundle_path and out are required");
        *out = classify(load_spec(bundle_path)) == Role::Secondary ? CWASI_ROLE_SECONDARY : CWASI_ROLE_PRIMARY;
    });
}

cwasi_status cwasi_spec_artifact(const char* bundle_path, char** out)
{
    return guarded([&] {
        require(bundle_path && out, "bundle_path and out are required");
        *out = copy_string(load_spec(bundle_path).artifact_path().string());
    });
}

cwasi_status cwasi_registry_open(const char* running_path, int create, cwasi_registry** out)
{
    return guarded([&] {
        require(running_path && out, "running_path and out are required");
        *out = nullptr;
        auto registry = create ? RunningRegistry::create(running_path) : RunningRegistry(running_path);
        *out = new cwasi_registry {std::move(registry)};
    });
}

void cwasi_registry_close(cwasi_registry* registry)
{
    delete registry;
}

cwasi_status cwasi_registry_register(cwasi_registry* registry, const char* bundle_path, char** function_path)
{
    return guarded([&] {
        require(registry && bundle_path, "registry and bundle_path are required");
        auto path = registry->registry.register_function(load_spec(bundle_path));
        if (function_path) {
            *function_path = copy_string(path.string());
        }
    });
}

cwasi_status cwasi_registry_unregister(cwasi_registry* registry, const char* name)
{
    return guarded([&] {
        require(registry && name, "registry and name are required");
        registry->registry.unregister_function(name);
    });
}

cwasi_status cwasi_registry_list(const cwasi_registry* registry, char** out)
{
    return guarded([&] {
        require(registry && out, "registry and out are required");
        std::string text;
        for (const auto& name : registry->registry.list()) {
            text += name;
            text += '\n';
        }
        *out = copy_string(text);
    });
}

cwasi_status cwasi_registry_select(const cwasi_registry* registry, const char* target_type, char** out)
{
    return guarded([&] {
        require(registry && target_type && out, "registry, target_type and out are required");
        auto socket = registry->registry.ifc_selection(target_type);
        *out = socket ? copy_string(socket->string()) : nullptr;
    });
}

cwasi_status cwasi_select_mode(const cwasi_registry* registry, const char* source_bundle, const char* target_type,
    const char* snapshot_root, cwasi_mode* out)
{
    return guarded([&] {
        require(registry && source_bundle && target_type && out, "registry, source, target and out are required");
        auto spec = load_spec(source_bundle);

        bool embeddable = false;
        if (snapshot_root) {
            auto imports = read_imports(guest::ModuleArtifact::load(spec.artifact_path()));
            for (const auto& path : discover_embeddings(imports, SnapshotStore(snapshot_root))) {
                embeddable = embeddable || path.stem() == target_type;
            }
        }
        *out = from_mode(select_mode(spec, target_type, registry->registry, read_hint(spec), embeddable));
    });
}

cwasi_status cwasi_read_imports(const char* module_path, char** json_out)
{
    return guarded([&] {
        require(module_path && json_out, "module_path and json_out are required");
        auto array = nlohmann::json::array();
        for (const auto& import : read_imports(guest::ModuleArtifact::load(module_path))) {
            array.push_back({import.module, import.name});
        }
        *json_out = copy_string(array.dump());
    });
}

cwasi_status cwasi_discover_embeddings(const char* module_path, const char* snapshot_root, char** json_out)
{
    return guarded([&] {
        require(module_path && snapshot_root && json_out, "module_path, snapshot_root and json_out are required");
        auto imports = read_imports(guest::ModuleArtifact::load(module_path));
        *json_out = copy_string(paths_json(discover_embeddings(imports, SnapshotStore(snapshot_root))));
    });
}

cwasi_status cwasi_local_send(
    const char* socket_path, const uint8_t* request, size_t request_size, uint32_t timeout_ms, cwasi_buffer* reply)
{
    return guarded([&] {
        require(socket_path && reply, "socket_path and reply are required");
        auto body = local::send(SocketPath {socket_path}, view(request, request_size), timeout_or_default(timeout_ms));
        fill_buffer(reply, body);
    });
}

cwasi_status cwasi_broker_serve(const char* address, cwasi_broker** out)
{
    return guarded([&] {
        require(out, "out is required");
        *out = nullptr;
        auto broker = broker::Broker::serve(address ? address : std::string(broker::kDefaultAddress));
        *out = new cwasi_broker {std::move(broker)};
    });
}

uint16_t cwasi_broker_port(const cwasi_broker* broker)
{
    return broker ? broker->broker->port() : 0;
}

cwasi_status cwasi_broker_address(const cwasi_broker* broker, char** out)
{
    return guarded([&] {
        require(broker && out, "broker and out are required");
        *out = copy_string(broker->broker->address());
    });
}

uint64_t cwasi_broker_subscribers(const cwasi_broker* broker, const char* queue)
{
    if (!broker || !queue) {
        return 0;
    }
    return broker->broker->subscriber_count(queue);
}

void cwasi_broker_stop(cwasi_broker* broker)
{
    if (!broker) {
        return;
    }
    try {
        broker->broker->stop();
    } catch (...) {
    }
    delete broker;
}

cwasi_status cwasi_publish_request(const char* broker_address, const char* target, const uint8_t* payload,
    size_t payload_size, uint32_t timeout_ms, cwasi_buffer* reply)
{
    return guarded([&] {
        require(broker_address && target && reply, "broker_address, target and reply are required");
        auto body = broker::publish_request(
            broker_address, target, view(payload, payload_size), timeout_or_default(timeout_ms));
        fill_buffer(reply, body);
    });
}

void cwasi_function_options_init(cwasi_function_options* options)
{
    if (options) {
        *options = cwasi_function_options {};
        options->timeout_ms = static_cast<uint32_t>(local::kDefaultTimeout.count());
    }
}

cwasi_status cwasi_function_start(
    const char* bundle_path, cwasi_registry* registry, const cwasi_function_options* options, cwasi_function** out)
{
    return guarded([&] {
        require(bundle_path && registry && out, "bundle_path, registry and out are required");
        *out = nullptr;

        cwasi_function_options defaults;
        cwasi_function_options_init(&defaults);
        const auto& opts = options ? *options : defaults;

        auto function = std::make_unique<cwasi_function>();
        auto spec = load_spec(bundle_path);

        CoordinatorOptions co;
        co.broker_address = text_or_empty(opts.broker_address);
        co.receiver_mode = opts.persistent ? local::ReceiverMode::Persistent : local::ReceiverMode::OneShot;
        co.timeout = timeout_or_default(opts.timeout_ms);
        if (opts.snapshot_root) {
            co.snapshot_root = std::filesystem::path(opts.snapshot_root);
        }
        if (opts.input_size) {
            auto input = view(opts.input, opts.input_size);
            co.input.assign(input.begin(), input.end());
        }
        if (opts.event_log_path) {
            function->event_file.open(opts.event_log_path, std::ios::app);
            if (!function->event_file) {
                raise(Errc::IoFailure, std::string("cannot open event log ") + opts.event_log_path);
            }
            function->log = std::make_unique<EventLog>(function->event_file);
        } else {
            function->log = std::make_unique<EventLog>();
        }
        co.log = function->log.get();

        function->registry = registry;
        if (opts.register_function) {
            registry->registry.register_function(spec);
            function->registered_name = spec.bundle_name();
        }

        try {
            function->running = coordinate(spec, registry->registry, function->engine, std::move(co));
        } catch (...) {
            if (function->registered_name) {
                registry->registry.unregister_function(*function->registered_name);
            }
            throw;
        }
        *out = function.release();
    });
}

cwasi_role cwasi_function_role(const cwasi_function* function)
{
    return function && function->running->role() == Role::Secondary ? CWASI_ROLE_SECONDARY : CWASI_ROLE_PRIMARY;
}

cwasi_status cwasi_function_wait(cwasi_function* function)
{
    return guarded([&] {
        require(function, "function is required");
        auto state = function->running->wait();
        if (auto* instance = function->running->instance()) {
            if (state == guest::InstanceState::Killed) {
                raise(Errc::Trap, "guest was killed");
            }
            if (auto message = instance->trap_message(); !message.empty()) {
                raise(Errc::Trap, message);
            }
        }
    });
}

cwasi_status cwasi_function_output(const cwasi_function* function, cwasi_buffer* out)
{
    return guarded([&] {
        require(function && out, "function and out are required");
        auto* running = const_cast<RunningFunction*>(function->running.get());
        auto* instance = running->instance();
        if (!instance) {
            raise(Errc::BadState, "secondary functions have no single output");
        }
        fill_buffer(out, instance->output());
    });
}

uint64_t cwasi_function_executions(const cwasi_function* function)
{
    return function ? function->running->executions() : 0;
}

void cwasi_function_kill(cwasi_function* function)
{
    if (function) {
        try {
            function->running->kill();
        } catch (...) {
        }
    }
}

void cwasi_function_free(cwasi_function* function)
{
    if (!function) {
        return;
    }
    cwasi_function_kill(function);
    function->running.reset();
    if (function->registered_name) {
        try {
            function->registry->registry.unregister_function(*function->registered_name);
        } catch (...) {
        }
    }
    delete function;
}

void cwasi_bench_config_init(cwasi_bench_config* config)
{
    if (!config) {
        return;
    }
    bench::WorkloadConfig defaults;
    *config = cwasi_bench_config {};
    config->pattern = CWASI_PATTERN_SEQUENTIAL;
    config->mode = CWASI_MODE_LOCAL;
    config->degree = defaults.degree;
    config->iterations = defaults.iterations;
    config->warmup = defaults.warmup;
    config->handler = "echo";
    config->timeout_ms = static_cast<uint32_t>(defaults.timeout.count());
}

cwasi_status cwasi_bench_run(const cwasi_bench_config* config, cwasi_bench_result** out)
{
    cwasi_status status = guarded([&] {
        require(config && out, "config and out are required");
        *out = nullptr;

        bench::WorkloadConfig cfg;
        cfg.pattern = to_pattern(config->pattern);
        cfg.mode = to_mode(config->mode);
        cfg.payload_size = config->payload_size;
        cfg.degree = config->degree;
        cfg.iterations = config->iterations;
        cfg.warmup = config->warmup;
        cfg.concurrency = config->concurrency;
        cfg.one_shot = config->one_shot != 0;
        cfg.handler = config->handler ? config->handler : "echo";
        cfg.broker_address = text_or_empty(config->broker_address);
        cfg.running_path = text_or_empty(config->running_path);
        cfg.timeout = timeout_or_default(config->timeout_ms);
        cfg.validate();

        auto result = std::make_unique<cwasi_bench_result>();
        result->run = bench::run_workload(cfg);
        *out = result.release();
    });

    // The run's error text already carries its code name.
    if (status == CWASI_OK && (*out)->run.error) {
        return fail(CWASI_E_INFRA_UNAVAILABLE, *(*out)->run.error);
    }
    return status;
}

size_t cwasi_bench_record_count(const cwasi_bench_result* result)
{
    return result ? result->run.records.size() : 0;
}

void cwasi_bench_summary_get(const cwasi_bench_result* result, cwasi_bench_summary* out)
{
    if (!out) {
        return;
    }
    *out = cwasi_bench_summary {};
    if (!result) {
        return;
    }
    const auto& s = result->run.summary;
    *out = cwasi_bench_summary {
        s.requests, s.elapsed_s, s.throughput_rps, s.median_latency_s, s.mean_latency_s, s.p95_latency_s};
}

const char* cwasi_bench_error(const cwasi_bench_result* result)
{
    return result && result->run.error ? result->run.error->c_str() : nullptr;
}

cwasi_status cwasi_bench_write_csv(const cwasi_bench_result* result, const char* path)
{
    return guarded([&] {
        require(result && path, "result and path are required");
        bench::emit_csv(result->run.records, path);
    });
}

const char* cwasi_bench_csv_header(void)
{
    static const std::string header(bench::kCsvHeader);
    return header.c_str();
}

void cwasi_bench_result_free(cwasi_bench_result* result)
{
    delete result;
}

cwasi_status cwasi_bench_apply_handler(const char* handler, const uint8_t* payload, size_t payload_size, cwasi_buffer* out)
{
    return guarded([&] {
        require(handler && out, "handler and out are required");
        fill_buffer(out, bench::apply_handler(handler, view(payload, payload_size)));
    });
}

} // extern "C"
