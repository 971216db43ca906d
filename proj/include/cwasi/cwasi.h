/*
 * Copyright (C) 2026 The cwasi-cpp Authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

/*
 * C interface to the cwasi runtime. All objects are opaque handles owned by
 * the caller and released with the matching *_free / *_close / *_stop call.
 * Every fallible call returns a cwasi_status; on failure the calling thread's
 * cwasi_last_error() describes it until the next failing call on that thread.
 * Strings and buffers handed out by the library are freed with
 * cwasi_string_free and cwasi_buffer_free.
 */

#ifndef CWASI_H_
#define CWASI_H_

#include <stddef.h>
#include <stdint.h>

#if defined(CWASI_BUILDING_LIBRARY)
#define CWASI_API __attribute__((visibility("default")))
#else
#define CWASI_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Mirrors cwasi::Errc value for value. */
typedef enum cwasi_status {
    CWASI_OK = 0,
    CWASI_E_MALFORMED_CONFIG = 1,
    CWASI_E_MISSING_ARGS = 2,
    CWASI_E_DUPLICATE_FUNCTION = 3,
    CWASI_E_IO_FAILURE = 4,
    CWASI_E_SCAN_FAILURE = 5,
    CWASI_E_UNPARSABLE_TEXT = 6,
    CWASI_E_BAD_MAGIC = 7,
    CWASI_E_TRUNCATED_SECTION = 8,
    CWASI_E_MALFORMED_LEB128 = 9,
    CWASI_E_MALFORMED_MODULE = 10,
    CWASI_E_LINK_ERROR = 11,
    CWASI_E_ENGINE_ERROR = 12,
    CWASI_E_OUT_OF_BOUNDS = 13,
    CWASI_E_BAD_STATE = 14,
    CWASI_E_ALLOCATION_FAILURE = 15,
    CWASI_E_TRUNCATED_ENVELOPE = 16,
    CWASI_E_EMPTY_NAME = 17,
    CWASI_E_BAD_TRANSITION = 18,
    CWASI_E_TRAP = 19,
    CWASI_E_ADDRESS_IN_USE = 20,
    CWASI_E_CONNECT_REFUSED = 21,
    CWASI_E_TIMEOUT = 22,
    CWASI_E_FRAME_TOO_LARGE = 23,
    CWASI_E_PROTOCOL_ERROR = 24,
    CWASI_E_BIND_FAILURE = 25,
    CWASI_E_BROKER_UNREACHABLE = 26,
    CWASI_E_DECODE_ERROR = 27,
    CWASI_E_STARTUP_FAILURE = 28,
    CWASI_E_INFRA_UNAVAILABLE = 29,
    CWASI_E_ZERO_ELAPSED = 30,
    CWASI_E_UNSUPPORTED = 31,
    CWASI_E_INVALID_ARGUMENT = 32,
    CWASI_E_NOT_FOUND = 33,
    CWASI_E_INTERNAL = 34
} cwasi_status;

typedef enum cwasi_mode {
    CWASI_MODE_EMBEDDED = 0,
    CWASI_MODE_LOCAL = 1,
    CWASI_MODE_NETWORK = 2
} cwasi_mode;

typedef enum cwasi_role {
    CWASI_ROLE_PRIMARY = 0,
    CWASI_ROLE_SECONDARY = 1
} cwasi_role;

typedef enum cwasi_pattern {
    CWASI_PATTERN_SEQUENTIAL = 0,
    CWASI_PATTERN_FANOUT = 1,
    CWASI_PATTERN_FANIN = 2
} cwasi_pattern;

typedef struct cwasi_buffer {
    uint8_t* data;
    size_t size;
} cwasi_buffer;

typedef struct cwasi_registry cwasi_registry;
typedef struct cwasi_broker cwasi_broker;
typedef struct cwasi_function cwasi_function;
typedef struct cwasi_bench_result cwasi_bench_result;

/* ---- errors and memory ---- */

CWASI_API const char* cwasi_version(void);

/* Stable identifier such as "ConnectRefused"; "Unknown" for other values. */
CWASI_API const char* cwasi_status_name(cwasi_status status);

/* Message of the last failure on this thread; empty when none. */
CWASI_API const char* cwasi_last_error(void);

CWASI_API void cwasi_string_free(char* text);
CWASI_API void cwasi_buffer_free(cwasi_buffer* buffer);

/* ---- mode names ---- */

CWASI_API const char* cwasi_mode_name(cwasi_mode mode);

/* Accepts "embedded", "local", "network" and their short forms. */
CWASI_API cwasi_status cwasi_parse_mode(const char* name, cwasi_mode* out);

CWASI_API cwasi_status cwasi_parse_pattern(const char* name, cwasi_pattern* out);

/* Byte count with optional K/M/G suffix (binary multiples). */
CWASI_API cwasi_status cwasi_parse_size(const char* text, uint64_t* out);

/* ---- function specs ---- */

/* Loads <bundle>/config.json and reports the function's role. */
CWASI_API cwasi_status cwasi_spec_role(const char* bundle_path, cwasi_role* out);

/* Module artifact path of the bundle's function. */
CWASI_API cwasi_status cwasi_spec_artifact(const char* bundle_path, char** out);

/* ---- registry ---- */

/* create != 0 makes running_path (and parents) first. */
CWASI_API cwasi_status cwasi_registry_open(const char* running_path, int create, cwasi_registry** out);
CWASI_API void cwasi_registry_close(cwasi_registry* registry);

/* Registers the bundle's function; *function_path (optional) receives its entry. */
CWASI_API cwasi_status cwasi_registry_register(cwasi_registry* registry, const char* bundle_path, char** function_path);
CWASI_API cwasi_status cwasi_registry_unregister(cwasi_registry* registry, const char* name);

/* Newline-separated entry names in lexicographic order. */
CWASI_API cwasi_status cwasi_registry_list(const cwasi_registry* registry, char** out);

/* Socket path of the co-located function of type target_type; *out is NULL when it is not local. */
CWASI_API cwasi_status cwasi_registry_select(const cwasi_registry* registry, const char* target_type, char** out);

/*
 * Communication mode a call from the bundle's function to target_type would
 * use. snapshot_root may be NULL (nothing is embeddable).
 */
CWASI_API cwasi_status cwasi_select_mode(const cwasi_registry* registry, const char* source_bundle,
    const char* target_type, const char* snapshot_root, cwasi_mode* out);

/* ---- linker ---- */

/* Imports of a .wasm or .wat module as a JSON array of [module, name] pairs. */
CWASI_API cwasi_status cwasi_read_imports(const char* module_path, char** json_out);

/* Snapshot artifacts the module's imports name, as a JSON array of paths. */
CWASI_API cwasi_status cwasi_discover_embeddings(const char* module_path, const char* snapshot_root, char** json_out);

/* ---- local buffer ---- */

CWASI_API cwasi_status cwasi_local_send(const char* socket_path, const uint8_t* request, size_t request_size,
    uint32_t timeout_ms, cwasi_buffer* reply);

/* ---- broker ---- */

/* address is "host:port"; port 0 picks a free port. */
CWASI_API cwasi_status cwasi_broker_serve(const char* address, cwasi_broker** out);
CWASI_API uint16_t cwasi_broker_port(const cwasi_broker* broker);
CWASI_API cwasi_status cwasi_broker_address(const cwasi_broker* broker, char** out);
CWASI_API uint64_t cwasi_broker_subscribers(const cwasi_broker* broker, const char* queue);
CWASI_API void cwasi_broker_stop(cwasi_broker* broker);

/* Request/reply through a broker: publishes to target and waits for the reply. */
CWASI_API cwasi_status cwasi_publish_request(const char* broker_address, const char* target, const uint8_t* payload,
    size_t payload_size, uint32_t timeout_ms, cwasi_buffer* reply);

/* ---- functions ---- */

typedef struct cwasi_function_options {
    const char* broker_address; /* NULL or "": no networked buffer */
    const char* snapshot_root;  /* NULL: no embedding discovery */
    const char* event_log_path; /* NULL: events are not written out */
    int persistent;             /* secondaries: keep serving after the first reply */
    int register_function;      /* add the function to the registry while it runs */
    uint32_t timeout_ms;
    const uint8_t* input; /* primaries: bytes readable through ("cwasi","input") */
    size_t input_size;
} cwasi_function_options;

CWASI_API void cwasi_function_options_init(cwasi_function_options* options);

/* Starts the bundle's function with the WebAssembly engine. */
CWASI_API cwasi_status cwasi_function_start(const char* bundle_path, cwasi_registry* registry,
    const cwasi_function_options* options, cwasi_function** out);

CWASI_API cwasi_role cwasi_function_role(const cwasi_function* function);

/* Blocks until the primary finished or the secondary's receiver shut down; fails with Trap if the guest trapped. */
CWASI_API cwasi_status cwasi_function_wait(cwasi_function* function);

/* Output the primary guest produced. */
CWASI_API cwasi_status cwasi_function_output(const cwasi_function* function, cwasi_buffer* out);

CWASI_API uint64_t cwasi_function_executions(const cwasi_function* function);

/* Stops receivers and guests; idempotent. */
CWASI_API void cwasi_function_kill(cwasi_function* function);

/* Kills, unregisters (when registered) and releases the function. */
CWASI_API void cwasi_function_free(cwasi_function* function);

/* ---- bench ---- */

typedef struct cwasi_bench_config {
    cwasi_pattern pattern;
    cwasi_mode mode;
    uint64_t payload_size;
    uint32_t degree;
    uint32_t iterations;
    uint32_t warmup;
    uint32_t concurrency; /* 0: min(degree, 8) */
    int one_shot;
    const char* handler;        /* "echo", "reverse" or "checksum" */
    const char* broker_address; /* NULL or "": in-process broker */
    const char* running_path;   /* NULL or "": temporary directory */
    uint32_t timeout_ms;
} cwasi_bench_config;

typedef struct cwasi_bench_summary {
    uint64_t requests;
    double elapsed_s;
    double throughput_rps;
    double median_latency_s;
    double mean_latency_s;
    double p95_latency_s;
} cwasi_bench_summary;

CWASI_API void cwasi_bench_config_init(cwasi_bench_config* config);

/*
 * Runs the workload. *out is set whenever the configuration was valid, also
 * when the run aborted (status InfraUnavailable) with partial records.
 */
CWASI_API cwasi_status cwasi_bench_run(const cwasi_bench_config* config, cwasi_bench_result** out);

CWASI_API size_t cwasi_bench_record_count(const cwasi_bench_result* result);
CWASI_API void cwasi_bench_summary_get(const cwasi_bench_result* result, cwasi_bench_summary* out);

/* Abort reason, or NULL for a complete run. */
CWASI_API const char* cwasi_bench_error(const cwasi_bench_result* result);

/* Header line plus one row per record. Fails with InvalidArgument when there are no records. */
CWASI_API cwasi_status cwasi_bench_write_csv(const cwasi_bench_result* result, const char* path);

/* The CSV header line, without a newline. */
CWASI_API const char* cwasi_bench_csv_header(void);
CWASI_API void cwasi_bench_result_free(cwasi_bench_result* result);

/* Output of a synthetic handler, for checking replies. */
CWASI_API cwasi_status cwasi_bench_apply_handler(const char* handler, const uint8_t* payload, size_t payload_size,
    cwasi_buffer* out);

#ifdef __cplusplus
}
#endif

#endif
