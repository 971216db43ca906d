/*
 * Copyright (C) 2026 The cwasi-cpp Authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

// Exercises the shared library through cwasi.h only.

#include <gtest/gtest.h>

#include <cstring>
#include <string>
#include <thread>

#include "cwasi/cwasi.h"
#include "json.hpp"
#include "test_support.hpp"

namespace {

using cwasi::testing::TempDir;

struct OwnedString {
    char* text = nullptr;
    ~OwnedString() { cwasi_string_free(text); }
    std::string str() const { return text ? text : ""; }
};

struct OwnedBuffer {
    cwasi_buffer buffer {nullptr, 0};
    ~OwnedBuffer() { cwasi_buffer_free(&buffer); }
    std::string str() const { return std::string(reinterpret_cast<const char*>(buffer.data), buffer.size); }
};

struct Registry {
    cwasi_registry* handle = nullptr;
    explicit Registry(const std::filesystem::path& path)
    {
        EXPECT_EQ(cwasi_registry_open(path.c_str(), 1, &handle), CWASI_OK) << cwasi_last_error();
    }
    ~Registry() { cwasi_registry_close(handle); }
};

std::filesystem::path bundle(const std::filesystem::path& root, const std::string& name, const std::string& fixture,
    bool secondary)
{
    auto dir = root / name;
    std::map<std::string, std::string> annotations;
    if (secondary) {
        annotations["cwasi/role"] = "secondary";
    }
    cwasi::testing::write_config(dir, {name}, annotations);
    std::filesystem::copy_file(cwasi::testing::fixture(fixture + ".wasm"), dir / (name + ".wasm"));
    return dir;
}

TEST(Basics, VersionAndNames)
{
    EXPECT_STREQ(cwasi_version(), "0.1.0");
    EXPECT_STREQ(cwasi_status_name(CWASI_OK), "Ok");
    EXPECT_STREQ(cwasi_status_name(CWASI_E_NOT_FOUND), "NotFound");
    EXPECT_STREQ(cwasi_status_name(CWASI_E_INTERNAL), "Internal");
    EXPECT_STREQ(cwasi_mode_name(CWASI_MODE_LOCAL), "local");

    cwasi_mode mode;
    EXPECT_EQ(cwasi_parse_mode("network", &mode), CWASI_OK);
    EXPECT_EQ(mode, CWASI_MODE_NETWORK);
    EXPECT_EQ(cwasi_parse_mode("bogus", &mode), CWASI_E_INVALID_ARGUMENT);
    EXPECT_NE(std::strstr(cwasi_last_error(), "bogus"), nullptr);

    cwasi_pattern pattern;
    EXPECT_EQ(cwasi_parse_pattern("fanin", &pattern), CWASI_OK);
    EXPECT_EQ(pattern, CWASI_PATTERN_FANIN);

    uint64_t size = 0;
    EXPECT_EQ(cwasi_parse_size("3M", &size), CWASI_OK);
    EXPECT_EQ(size, 3u << 20);
    EXPECT_EQ(cwasi_parse_size(nullptr, &size), CWASI_E_INVALID_ARGUMENT);
}

TEST(Spec, RoleAndArtifact)
{
    TempDir dir;
    auto primary = bundle(dir.path(), "fna", "no_imports", false);
    auto secondary = bundle(dir.path(), "fnb", "echo", true);
    cwasi_role role;
    EXPECT_EQ(cwasi_spec_role(primary.c_str(), &role), CWASI_OK);
    EXPECT_EQ(role, CWASI_ROLE_PRIMARY);
    EXPECT_EQ(cwasi_spec_role(secondary.c_str(), &role), CWASI_OK);
    EXPECT_EQ(role, CWASI_ROLE_SECONDARY);

    OwnedString artifact;
    EXPECT_EQ(cwasi_spec_artifact(primary.c_str(), &artifact.text), CWASI_OK);
    EXPECT_EQ(artifact.str(), (primary / "fna.wasm").string());

    cwasi::testing::write_text(dir / "broken" / "config.json", "{");
    EXPECT_EQ(cwasi_spec_role((dir / "broken").c_str(), &role), CWASI_E_MALFORMED_CONFIG);
    EXPECT_EQ(cwasi_spec_role((dir / "absent").c_str(), &role), CWASI_E_IO_FAILURE);
}

TEST(RegistryApi, RegisterListSelectUnregister)
{
    TempDir dir;
    Registry registry(dir / "run");
    auto b = bundle(dir / "bundles", "fnb", "echo", true);

    OwnedString path;
    ASSERT_EQ(cwasi_registry_register(registry.handle, b.c_str(), &path.text), CWASI_OK) << cwasi_last_error();
    EXPECT_EQ(path.str(), (dir / "run" / "fnb").string());
    EXPECT_EQ(cwasi_registry_register(registry.handle, b.c_str(), nullptr), CWASI_E_DUPLICATE_FUNCTION);

    OwnedString names;
    EXPECT_EQ(cwasi_registry_list(registry.handle, &names.text), CWASI_OK);
    EXPECT_EQ(names.str(), "fnb\n");

    OwnedString socket;
    EXPECT_EQ(cwasi_registry_select(registry.handle, "fnb", &socket.text), CWASI_OK);
    EXPECT_EQ(socket.str(), (dir / "run" / "fnb").string() + ".sock");
    OwnedString none;
    EXPECT_EQ(cwasi_registry_select(registry.handle, "fnz", &none.text), CWASI_OK);
    EXPECT_EQ(none.text, nullptr);

    auto source = bundle(dir / "bundles", "fna", "primary_dispatch", false);
    cwasi_mode mode;
    EXPECT_EQ(cwasi_select_mode(registry.handle, source.c_str(), "fnb", nullptr, &mode), CWASI_OK);
    EXPECT_EQ(mode, CWASI_MODE_LOCAL);
    EXPECT_EQ(cwasi_select_mode(registry.handle, source.c_str(), "fnz", nullptr, &mode), CWASI_OK);
    EXPECT_EQ(mode, CWASI_MODE_NETWORK);

    EXPECT_EQ(cwasi_registry_unregister(registry.handle, "fnb"), CWASI_OK);
    EXPECT_EQ(cwasi_registry_unregister(registry.handle, "fnb"), CWASI_E_NOT_FOUND);

    cwasi_registry* missing = nullptr;
    EXPECT_EQ(cwasi_registry_open((dir / "nope").c_str(), 0, &missing), CWASI_E_IO_FAILURE);
    EXPECT_EQ(missing, nullptr);
}

TEST(LinkerApi, ImportsAndDiscovery)
{
    OwnedString json;
    ASSERT_EQ(cwasi_read_imports(cwasi::testing::fixture("primary_embed.wasm").c_str(), &json.text), CWASI_OK);
    auto imports = nlohmann::json::parse(json.str());
    EXPECT_EQ(imports.size(), 3u);
    EXPECT_TRUE(std::find(imports.begin(), imports.end(), nlohmann::json {"fn_utils", "handle"}) != imports.end());

    TempDir snapshot;
    std::filesystem::copy_file(cwasi::testing::fixture("fn_utils.wasm"), snapshot / "fn_utils.wasm");
    OwnedString found;
    ASSERT_EQ(cwasi_discover_embeddings(
                  cwasi::testing::fixture("primary_embed.wasm").c_str(), snapshot.path().c_str(), &found.text),
        CWASI_OK);
    EXPECT_EQ(nlohmann::json::parse(found.str()), nlohmann::json::array({(snapshot / "fn_utils.wasm").string()}));

    TempDir dir;
    cwasi::testing::write_text(dir / "bad.wasm", "not wasm");
    OwnedString none;
    EXPECT_EQ(cwasi_read_imports((dir / "bad.wasm").c_str(), &none.text), CWASI_E_BAD_MAGIC);
}

TEST(FunctionApi, SecondaryServesLocalAndNetwork)
{
    TempDir dir;
    Registry registry(dir / "run");
    cwasi_broker* broker = nullptr;
    ASSERT_EQ(cwasi_broker_serve("127.0.0.1:0", &broker), CWASI_OK);
    EXPECT_GT(cwasi_broker_port(broker), 0);
    OwnedString address;
    ASSERT_EQ(cwasi_broker_address(broker, &address.text), CWASI_OK);

    auto b = bundle(dir / "bundles", "fnb", "reverse", true);
    cwasi_function_options options;
    cwasi_function_options_init(&options);
    options.broker_address = address.text;
    options.persistent = 1;
    options.register_function = 1;
    auto log_path = (dir / "events.jsonl").string();
    options.event_log_path = log_path.c_str();

    cwasi_function* function = nullptr;
    ASSERT_EQ(cwasi_function_start(b.c_str(), registry.handle, &options, &function), CWASI_OK) << cwasi_last_error();
    EXPECT_EQ(cwasi_function_role(function), CWASI_ROLE_SECONDARY);
    EXPECT_EQ(cwasi_broker_subscribers(broker, "fnb"), 1u);

    OwnedString socket;
    ASSERT_EQ(cwasi_registry_select(registry.handle, "fnb", &socket.text), CWASI_OK);
    ASSERT_NE(socket.text, nullptr);

    const uint8_t payload[] = {'a', 'b', 'c'};
    OwnedBuffer local;
    ASSERT_EQ(cwasi_local_send(socket.text, payload, 3, 5000, &local.buffer), CWASI_OK) << cwasi_last_error();
    EXPECT_EQ(local.str(), "cba");
    OwnedBuffer remote;
    ASSERT_EQ(cwasi_publish_request(address.text, "fnb", payload, 3, 5000, &remote.buffer), CWASI_OK)
        << cwasi_last_error();
    EXPECT_EQ(remote.str(), "cba");
    EXPECT_EQ(cwasi_function_executions(function), 2u);

    OwnedBuffer none;
    EXPECT_EQ(cwasi_function_output(function, &none.buffer), CWASI_E_BAD_STATE);

    cwasi_function_kill(function);
    EXPECT_EQ(cwasi_function_wait(function), CWASI_OK);
    EXPECT_FALSE(std::filesystem::exists(socket.str()));
    cwasi_function_free(function);

    // Freed functions leave the registry.
    OwnedString names;
    EXPECT_EQ(cwasi_registry_list(registry.handle, &names.text), CWASI_OK);
    EXPECT_EQ(names.str(), "");

    auto log = cwasi::testing::read_file(log_path);
    EXPECT_FALSE(log.empty());
    cwasi_broker_stop(broker);
}

TEST(FunctionApi, PrimaryProducesOutput)
{
    TempDir dir;
    Registry registry(dir / "run");
    TempDir snapshot;
    std::filesystem::copy_file(cwasi::testing::fixture("fn_utils.wasm"), snapshot / "fn_utils.wasm");
    auto b = bundle(dir / "bundles", "fna", "primary_embed", false);

    cwasi_function_options options;
    cwasi_function_options_init(&options);
    options.snapshot_root = snapshot.path().c_str();
    const std::string input = "quiet please";
    options.input = reinterpret_cast<const uint8_t*>(input.data());
    options.input_size = input.size();

    cwasi_function* function = nullptr;
    ASSERT_EQ(cwasi_function_start(b.c_str(), registry.handle, &options, &function), CWASI_OK) << cwasi_last_error();
    EXPECT_EQ(cwasi_function_role(function), CWASI_ROLE_PRIMARY);
    EXPECT_EQ(cwasi_function_wait(function), CWASI_OK);
    OwnedBuffer output;
    EXPECT_EQ(cwasi_function_output(function, &output.buffer), CWASI_OK);
    EXPECT_EQ(output.str(), "QUIET PLEASE");
    cwasi_function_free(function);

    // Without the snapshot the embedded import cannot link.
    options.snapshot_root = nullptr;
    function = nullptr;
    EXPECT_EQ(cwasi_function_start(b.c_str(), registry.handle, &options, &function), CWASI_E_LINK_ERROR);
    EXPECT_EQ(function, nullptr);
}

TEST(FunctionApi, TrappingPrimaryReportsTrap)
{
    TempDir dir;
    Registry registry(dir / "run");
    auto b = bundle(dir / "bundles", "boom", "trap", false);
    cwasi_function_options options;
    cwasi_function_options_init(&options);
    cwasi_function* function = nullptr;
    ASSERT_EQ(cwasi_function_start(b.c_str(), registry.handle, &options, &function), CWASI_OK);
    EXPECT_EQ(cwasi_function_wait(function), CWASI_E_TRAP);
    EXPECT_NE(std::string(cwasi_last_error()), "");
    cwasi_function_free(function);
}

TEST(FunctionApi, ConcurrentKillAndFree)
{
    TempDir dir;
    Registry registry(dir / "run");
    auto b = bundle(dir / "bundles", "fnb", "echo", true);
    for (int round = 0; round < 10; ++round) {
        cwasi_function_options options;
        cwasi_function_options_init(&options);
        options.persistent = 1;
        options.register_function = 1;
        cwasi_function* function = nullptr;
        ASSERT_EQ(cwasi_function_start(b.c_str(), registry.handle, &options, &function), CWASI_OK)
            << cwasi_last_error();
        std::thread killer([function] { cwasi_function_kill(function); });
        cwasi_function_wait(function);
        killer.join();
        cwasi_function_free(function);
    }
}

TEST(BenchApi, RunSummarizeAndWrite)
{
    cwasi_bench_config config;
    cwasi_bench_config_init(&config);
    EXPECT_EQ(config.iterations, 10u);
    EXPECT_EQ(config.degree, 1u);
    config.mode = CWASI_MODE_LOCAL;
    config.payload_size = 1024;
    config.iterations = 3;
    config.warmup = 1;
    config.handler = "reverse";

    cwasi_bench_result* result = nullptr;
    ASSERT_EQ(cwasi_bench_run(&config, &result), CWASI_OK) << cwasi_last_error();
    EXPECT_EQ(cwasi_bench_record_count(result), 3u);
    EXPECT_EQ(cwasi_bench_error(result), nullptr);
    cwasi_bench_summary summary;
    cwasi_bench_summary_get(result, &summary);
    EXPECT_EQ(summary.requests, 3u);
    EXPECT_NEAR(summary.throughput_rps, 3.0 / summary.elapsed_s, 1e-6 * summary.throughput_rps);

    TempDir dir;
    ASSERT_EQ(cwasi_bench_write_csv(result, (dir / "out.csv").c_str()), CWASI_OK);
    auto text = cwasi::testing::read_file(dir / "out.csv");
    std::string csv(text.begin(), text.end());
    EXPECT_EQ(csv.substr(0, std::strlen(cwasi_bench_csv_header())), cwasi_bench_csv_header());
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
    cwasi_bench_result_free(result);

    config.degree = 0;
    result = nullptr;
    EXPECT_EQ(cwasi_bench_run(&config, &result), CWASI_E_INVALID_ARGUMENT);
    EXPECT_EQ(result, nullptr);

    cwasi_bench_config_init(&config);
    config.mode = CWASI_MODE_NETWORK;
    config.iterations = 1;
    config.broker_address = "127.0.0.1:1";
    config.timeout_ms = 500;
    EXPECT_EQ(cwasi_bench_run(&config, &result), CWASI_E_INFRA_UNAVAILABLE);
    ASSERT_NE(result, nullptr);
    EXPECT_NE(cwasi_bench_error(result), nullptr);
    cwasi_bench_result_free(result);
}

TEST(BenchApi, ApplyHandler)
{
    const uint8_t payload[] = {1, 2, 3};
    OwnedBuffer out;
    ASSERT_EQ(cwasi_bench_apply_handler("reverse", payload, 3, &out.buffer), CWASI_OK);
    EXPECT_EQ(out.str(), std::string("\3\2\1"));
    OwnedBuffer tagged;
    ASSERT_EQ(cwasi_bench_apply_handler("checksum", payload, 3, &tagged.buffer), CWASI_OK);
    EXPECT_EQ(tagged.buffer.size, 11u);
    OwnedBuffer none;
    EXPECT_EQ(cwasi_bench_apply_handler("nope", payload, 3, &none.buffer), CWASI_E_INVALID_ARGUMENT);
}

TEST(Errors, NullArgumentsAreRejected)
{
    EXPECT_EQ(cwasi_registry_open(nullptr, 1, nullptr), CWASI_E_INVALID_ARGUMENT);
    EXPECT_EQ(cwasi_local_send(nullptr, nullptr, 0, 0, nullptr), CWASI_E_INVALID_ARGUMENT);
    EXPECT_EQ(cwasi_function_wait(nullptr), CWASI_E_INVALID_ARGUMENT);
    cwasi_function_kill(nullptr);
    cwasi_function_free(nullptr);
    cwasi_buffer_free(nullptr);
    cwasi_string_free(nullptr);

    OwnedBuffer reply;
    EXPECT_EQ(cwasi_local_send("/nonexistent/socket.sock", nullptr, 0, 100, &reply.buffer), CWASI_E_CONNECT_REFUSED);
}

} // namespace
