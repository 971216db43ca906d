/*
 * Copyright (C) 2026 The cwasi-cpp Authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <limits>
#include <thread>

#include "cwasi/error.hpp"
#include "cwasi/guest/wasm_engine.hpp"
#include "test_support.hpp"

namespace cwasi::guest {
namespace {

Errc error_of(const std::function<void()>& action)
{
    try {
        action();
    } catch (const Error& e) {
        return e.code();
    }
    return Errc::Ok;
}

uint64_t f64_bits(double value)
{
    return std::bit_cast<uint64_t>(value);
}

double as_f64(uint64_t bits)
{
    return std::bit_cast<double>(bits);
}

uint64_t f32_bits(float value)
{
    return std::bit_cast<uint32_t>(value);
}

float as_f32(uint64_t bits)
{
    return std::bit_cast<float>(static_cast<uint32_t>(bits));
}

class Compute : public ::testing::Test {
protected:
    void SetUp() override
    {
        instance = engine.instantiate(ModuleArtifact::load(testing::fixture("compute.wasm")), {}, {});
    }

    uint64_t call1(std::string_view name, std::vector<uint64_t> args = {})
    {
        auto results = instance->call(name, args);
        EXPECT_EQ(results.size(), 1u) << name;
        return results.empty() ? 0 : results[0];
    }

    int32_t call_i32(std::string_view name, std::vector<uint64_t> args = {})
    {
        return static_cast<int32_t>(static_cast<uint32_t>(call1(name, std::move(args))));
    }

    WasmEngine engine;
    std::unique_ptr<GuestInstance> instance;
};

uint64_t i32(int32_t value)
{
    return static_cast<uint32_t>(value);
}

TEST_F(Compute, StartFunctionRanAtInstantiation)
{
    EXPECT_EQ(call_i32("started"), 42);
}

TEST_F(Compute, TableDispatch)
{
    EXPECT_EQ(call_i32("apply", {0, i32(7), i32(5)}), 12);
    EXPECT_EQ(call_i32("apply", {1, i32(7), i32(5)}), 2);
    EXPECT_EQ(call_i32("apply", {2, i32(-7), i32(5)}), -35);
    EXPECT_EQ(call_i32("apply", {3, i32(-7), i32(2)}), -3); // truncates toward zero
    EXPECT_EQ(call_i32("apply", {4, i32(1), i32(1)}), -1);
    EXPECT_EQ(call_i32("apply", {i32(-1), i32(1), i32(1)}), -1);
    EXPECT_EQ(error_of([&] { instance->call("apply", std::vector<uint64_t> {3, 1, 0}); }), Errc::Trap);
    EXPECT_EQ(error_of([&] { instance->call("apply", std::vector<uint64_t> {3, i32(INT32_MIN), i32(-1)}); }), Errc::Trap);
}

TEST_F(Compute, MemoryGrowthAndData)
{
    EXPECT_EQ(call_i32("pages"), 1);
    EXPECT_EQ(call_i32("byte_at", {256}), 'c');
    EXPECT_EQ(call_i32("byte_at", {260}), 'i');
    EXPECT_EQ(call_i32("grow", {2}), 1);
    EXPECT_EQ(call_i32("pages"), 3);
    EXPECT_EQ(call_i32("grow", {10}), -1); // limit is 8 pages
    EXPECT_EQ(call_i32("pages"), 3);
    EXPECT_EQ(call_i32("byte_at", {3 * 65536 - 1}), 0);
    EXPECT_EQ(error_of([&] { instance->call("byte_at", std::vector<uint64_t> {3 * 65536}); }), Errc::Trap);
}

TEST_F(Compute, Loops)
{
    EXPECT_EQ(call1("sum_to", {0}), 0u);
    EXPECT_EQ(call1("sum_to", {10}), 45u);
    EXPECT_EQ(call1("sum_to", {100000}), 4999950000ull);
}

TEST_F(Compute, FloatingPoint)
{
    EXPECT_DOUBLE_EQ(as_f64(call1("hypot", {f64_bits(3), f64_bits(4)})), 5.0);
    EXPECT_EQ(call_i32("to_i32_sat", {f64_bits(1e20)}), INT32_MAX);
    EXPECT_EQ(call_i32("to_i32_sat", {f64_bits(-1e20)}), INT32_MIN);
    EXPECT_EQ(call_i32("to_i32_sat", {f64_bits(std::nan(""))}), 0);
    EXPECT_EQ(call_i32("to_i32", {f64_bits(-3.9)}), -3);
    EXPECT_EQ(error_of([&] { instance->call("to_i32", std::vector<uint64_t> {f64_bits(1e20)}); }), Errc::Trap);
    EXPECT_EQ(error_of([&] { instance->call("to_i32", std::vector<uint64_t> {f64_bits(std::nan(""))}); }), Errc::Trap);

    EXPECT_EQ(as_f32(call1("fmin", {f32_bits(1.5f), f32_bits(-2.0f)})), -2.0f);
    EXPECT_TRUE(std::isnan(as_f32(call1("fmin", {f32_bits(std::nanf("")), f32_bits(1.0f)}))));
    float negative_zero = as_f32(call1("fmin", {f32_bits(0.0f), f32_bits(-0.0f)}));
    EXPECT_TRUE(std::signbit(negative_zero));
}

TEST_F(Compute, IntegerBitOps)
{
    // clz + 100*ctz + 10000*popcnt
    EXPECT_EQ(call1("clz_ctz_popcnt", {0}), 64u + 6400u);
    EXPECT_EQ(call1("clz_ctz_popcnt", {1}), 63u + 0u + 10000u);
    EXPECT_EQ(call1("clz_ctz_popcnt", {0x8000000000000000ull}), 0u + 6300u + 10000u);
    EXPECT_EQ(call1("clz_ctz_popcnt", {0xf0}), 56u + 400u + 40000u);
    EXPECT_EQ(static_cast<uint32_t>(call1("rotl", {0x80000001u, 1})), 0x00000003u);
    EXPECT_EQ(static_cast<uint32_t>(call1("rotl", {0x12345678u, 36})), 0x23456781u);
    EXPECT_EQ(call_i32("select_max", {i32(-5), i32(3)}), 3);
    EXPECT_EQ(call_i32("select_max", {i32(9), i32(3)}), 9);
}

TEST_F(Compute, BulkMemory)
{
    EXPECT_EQ(call_i32("fill_and_sum", {7, 100}), 700);
    EXPECT_EQ(call_i32("fill_and_sum", {255, 0}), 0);
    EXPECT_EQ(call_i32("fill_and_sum", {0x1ff, 3}), 3 * 0xff); // value truncated to a byte
}

TEST_F(Compute, RecursionDepthIsBounded)
{
    EXPECT_EQ(call_i32("depth", {500}), 500);
    EXPECT_EQ(error_of([&] { instance->call("depth", std::vector<uint64_t> {1000000}); }), Errc::Trap);
    // The instance stays usable after a trap.
    EXPECT_EQ(call_i32("depth", {10}), 10);
}

TEST_F(Compute, HeapStartsAboveHeapBase)
{
    auto span = instance->write_bytes(to_bytes("payload"));
    EXPECT_GE(span.pointer, 4096u);
    EXPECT_EQ(cwasi::to_string(instance->read_span(span)), "payload");
}

TEST_F(Compute, CallArgumentChecks)
{
    EXPECT_EQ(error_of([&] { instance->call("missing"); }), Errc::LinkError);
    EXPECT_NE(error_of([&] { instance->call("apply", std::vector<uint64_t> {1}); }), Errc::Ok);
    EXPECT_TRUE(instance->has_export("run"));
    EXPECT_FALSE(instance->has_export("nope"));
}

TEST(NoImports, Arithmetic)
{
    WasmEngine engine;
    auto instance = engine.instantiate(ModuleArtifact::load(testing::fixture("no_imports.wasm")), {}, {});
    const uint64_t factorials[] = {1, 1, 2, 6, 24, 120, 720, 5040};
    for (uint64_t n = 0; n < 8; ++n) {
        EXPECT_EQ(instance->call("fac", std::vector<uint64_t> {n})[0], factorials[n]);
    }
    EXPECT_EQ(instance->call("fac", std::vector<uint64_t> {20})[0], 2432902008176640000ull);
    uint64_t a = 0, b = 1;
    for (uint64_t n = 0; n < 90; ++n) {
        ASSERT_EQ(instance->call("fib", std::vector<uint64_t> {n})[0], a) << n;
        b += a;
        std::swap(a, b);
    }
}

TEST(Traps, RunTrapIsRecorded)
{
    WasmEngine engine;
    auto instance = engine.instantiate(ModuleArtifact::load(testing::fixture("trap.wasm")), {}, standard_host_functions());
    EXPECT_EQ(error_of([&] { instance->call("divide", std::vector<uint64_t> {1, 0}); }), Errc::Trap);
    EXPECT_EQ(error_of([&] { instance->call("load", std::vector<uint64_t> {65535}); }), Errc::Trap);
    EXPECT_EQ(instance->call("load", std::vector<uint64_t> {65532})[0], 0u);
    instance->start();
    EXPECT_EQ(instance->wait(), InstanceState::Finished);
    EXPECT_NE(instance->trap_message().find("unreachable"), std::string::npos);
}

TEST(Traps, SpinningGuestIsKillable)
{
    WasmEngine engine;
    auto instance = engine.instantiate(ModuleArtifact::load(testing::fixture("spin.wasm")), {}, standard_host_functions());
    instance->start();
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    EXPECT_EQ(instance->state(), InstanceState::Running);
    auto before = std::chrono::steady_clock::now();
    instance->kill();
    EXPECT_EQ(instance->state(), InstanceState::Killed);
    EXPECT_LT(std::chrono::steady_clock::now() - before, std::chrono::seconds(2));
}

TEST(Linking, MixedImportKindsResolveAgainstExtras)
{
    WasmEngine engine;
    auto primary = ModuleArtifact::load(testing::fixture("mixed_imports.wasm"));
    // Nothing provides env.* or lib.helper.
    EXPECT_EQ(error_of([&] { engine.instantiate(primary, {}, standard_host_functions()); }), Errc::LinkError);
}

TEST(Linking, HostFunctionTypeMismatchIsLinkError)
{
    WasmEngine engine;
    HostFunction wrong {"cwasi", "dispatch", {{ValueType::I32}, {ValueType::I32}}, [](GuestInstance&, auto, auto) {}};
    auto primary = ModuleArtifact::load(testing::fixture("primary_dispatch.wasm"));
    auto hosts = standard_host_functions();
    hosts.push_back(wrong);
    EXPECT_EQ(error_of([&] { engine.instantiate(primary, {}, hosts); }), Errc::LinkError);
}

TEST(Linking, HostCallbackSeesGuestMemory)
{
    WasmEngine engine;
    auto primary = ModuleArtifact::load(testing::fixture("primary_dispatch.wasm"));
    auto hosts = standard_host_functions();
    std::string seen_target;
    hosts.push_back({"cwasi", "dispatch", dispatch_type(),
        [&](GuestInstance& self, std::span<const uint64_t> args, std::span<uint64_t> results) {
            auto envelope = decode_envelope(self.read_span({uint32_t(args[0]), uint32_t(args[1])}));
            seen_target = envelope.target;
            Bytes reply = {0x00};
            reply.insert(reply.end(), envelope.payload.rbegin(), envelope.payload.rend());
            results[0] = pack_span(self.write_bytes(reply));
        }});
    auto instance = engine.instantiate(primary, {}, hosts);
    instance->set_input(to_bytes("abc"));
    instance->start();
    EXPECT_EQ(instance->wait(), InstanceState::Finished);
    EXPECT_EQ(instance->trap_message(), "");
    EXPECT_EQ(seen_target, "echo");
    EXPECT_EQ(instance->output(), (Bytes {0x00, 'c', 'b', 'a'}));
}

// Corrupted modules are rejected with an Error, never a crash.
TEST(DecoderProperty, MutatedModulesFailCleanly)
{
    WasmEngine engine;
    std::mt19937_64 rng(testing::kPropertySeed + 20);
    const std::vector<std::string> sources = {"echo.wasm", "reverse.wasm", "checksum.wasm", "no_imports.wasm", "fn_utils.wasm"};
    int accepted = 0;
    for (int i = 0; i < 3000; ++i) {
        auto artifact = ModuleArtifact::load(testing::fixture(sources[rng() % sources.size()]));
        for (int flips = 1 + int(rng() % 3); flips > 0; --flips) {
            artifact.bytes[8 + rng() % (artifact.bytes.size() - 8)] = static_cast<uint8_t>(rng());
        }
        if (rng() % 4 == 0) {
            artifact.bytes.resize(8 + rng() % (artifact.bytes.size() - 8));
        }
        try {
            auto instance = engine.instantiate(artifact, {}, standard_host_functions());
            ++accepted;
        } catch (const Error&) {
        }
    }
    RecordProperty("accepted", accepted);
}

} // namespace
} // namespace cwasi::guest
