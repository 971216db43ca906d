/*
 * Copyright (C) 2026 The cwasi-cpp Authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include "cwasi/bench.hpp"
#include "cwasi/coordinator.hpp"
#include "cwasi/error.hpp"
#include "cwasi/guest/native_engine.hpp"
#include "cwasi/guest/wasm_engine.hpp"
#include "oracles.hpp"
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

ModuleArtifact named(const std::string& name)
{
    ModuleArtifact artifact;
    artifact.name = name;
    artifact.path = name + ".wasm";
    return artifact;
}

/// "run" applies fn to the input and publishes the result as output.
NativeModule transform_module(std::function<Bytes(ByteView)> fn)
{
    NativeModule module;
    module.exports["run"] = NativeExport {{}, [fn](GuestInstance& self, std::span<const uint64_t>) {
        auto span = self.input_span().value_or(MemorySpan {});
        self.set_output(fn(self.view_span(span)));
        return std::vector<uint64_t> {};
    }};
    return module;
}

class NativeGuest : public ::testing::Test {
protected:
    void SetUp() override
    {
        engine.define("noop", transform_module([](ByteView) { return Bytes {}; }));
        NativeModule spin;
        spin.exports["run"] = NativeExport {{}, [](GuestInstance& self, std::span<const uint64_t>) {
            while (!self.interrupted()) {
                std::this_thread::sleep_for(std::chrono::milliseconds(1));
            }
            return std::vector<uint64_t> {};
        }};
        engine.define("spin", std::move(spin));
        NativeModule failing;
        failing.exports["run"] = NativeExport {{}, [](GuestInstance&, std::span<const uint64_t>) -> std::vector<uint64_t> {
            throw std::runtime_error("guest exploded");
        }};
        engine.define("failing", std::move(failing));
    }

    NativeEngine engine;
};

// ---- spans and envelopes ----

TEST(SpanPacking, Examples)
{
    EXPECT_EQ(pack_span({0x10, 0x20}), 0x0000001000000020ull);
    EXPECT_EQ(pack_span({0, 0}), 0ull);
    EXPECT_EQ(unpack_span(0xffffffff00000001ull), (MemorySpan {0xffffffffu, 1}));
}

TEST(SpanPackingProperty, RoundTrip)
{
    std::mt19937_64 rng(testing::kPropertySeed + 10);
    for (int i = 0; i < testing::kPropertyCases; ++i) {
        MemorySpan span {static_cast<uint32_t>(rng()), static_cast<uint32_t>(rng())};
        if (i % 7 == 0) {
            span.pointer = 0;
        }
        uint64_t word = pack_span(span);
        ASSERT_EQ(word, oracle::pack(span.pointer, span.length)) << "case " << i;
        ASSERT_EQ(unpack_span(word), span) << "case " << i;
        ASSERT_EQ(pack_span(unpack_span(word)), word);
    }
}

TEST(Envelope, Layout)
{
    DispatchEnvelope envelope {"fna", "fnb", to_bytes("hi")};
    Bytes want = {0x00, 0x03, 'f', 'n', 'a', 0x00, 0x03, 'f', 'n', 'b', 'h', 'i'};
    EXPECT_EQ(encode_envelope(envelope), want);
    EXPECT_EQ(decode_envelope(want), envelope);
}

TEST(Envelope, Errors)
{
    EXPECT_EQ(error_of([] { decode_envelope(Bytes {0x00, 0x03, 'f'}); }), Errc::TruncatedEnvelope);
    EXPECT_EQ(error_of([] { decode_envelope(Bytes {}); }), Errc::TruncatedEnvelope);
    EXPECT_EQ(error_of([] { decode_envelope(Bytes {0x00, 0x01, 'a', 0x00}); }), Errc::TruncatedEnvelope);
    EXPECT_EQ(error_of([] { decode_envelope(Bytes {0x00, 0x00, 0x00, 0x01, 'b'}); }), Errc::EmptyName);
    EXPECT_EQ(error_of([] { decode_envelope(Bytes {0x00, 0x01, 'a', 0x00, 0x00}); }), Errc::EmptyName);
    EXPECT_EQ(error_of([] { encode_envelope({"", "b", {}}); }), Errc::EmptyName);
    EXPECT_EQ(error_of([] { encode_envelope({"a", "", {}}); }), Errc::EmptyName);
    EXPECT_EQ(error_of([] { encode_envelope({std::string(65536, 'a'), "b", {}}); }), Errc::InvalidArgument);
}

TEST(EnvelopeProperty, RoundTrip)
{
    std::mt19937_64 rng(testing::kPropertySeed + 11);
    const std::string alphabet = "abcdefghijklmnopqrstuvwxyz.-_0123456789\xc3\xa9";
    for (int i = 0; i < testing::kPropertyCases; ++i) {
        DispatchEnvelope envelope;
        envelope.source = testing::random_string(rng, alphabet, 1, i % 100 == 0 ? 300 : 16);
        envelope.target = testing::random_string(rng, alphabet, 1, 16);
        envelope.payload = testing::random_bytes(rng, testing::random_size(rng, 4096));

        auto wire = encode_envelope(envelope);
        ASSERT_EQ(wire, oracle::envelope(envelope.source, envelope.target, envelope.payload)) << "case " << i;
        ASSERT_EQ(decode_envelope(wire), envelope) << "case " << i;

        auto view = view_envelope(wire);
        ASSERT_EQ(view.source, envelope.source);
        ASSERT_EQ(view.target, envelope.target);
        ASSERT_TRUE(std::equal(view.payload.begin(), view.payload.end(), envelope.payload.begin(), envelope.payload.end()));

        // Cutting into the header is always detected.
        size_t header = 4 + envelope.source.size() + envelope.target.size();
        size_t cut = rng() % header;
        ASSERT_EQ(error_of([&] { decode_envelope(ByteView(wire).first(cut)); }), Errc::TruncatedEnvelope)
            << "case " << i << " cut " << cut;
    }
}

// ---- linear memory ----

TEST(LinearMemory, GrowKeepsContentsInPlace)
{
    LinearMemory memory(1, 4);
    EXPECT_EQ(memory.size(), LinearMemory::kPageSize);
    uint8_t* base = memory.data();
    memory.data()[100] = 0xab;

    EXPECT_EQ(memory.grow(2), 1);
    EXPECT_EQ(memory.pages(), 3u);
    EXPECT_EQ(memory.data(), base);
    EXPECT_EQ(memory.data()[100], 0xab);
    EXPECT_EQ(memory.data()[3 * LinearMemory::kPageSize - 1], 0);

    EXPECT_EQ(memory.grow(2), -1); // beyond max
    EXPECT_EQ(memory.grow(1), 3);
    EXPECT_EQ(memory.grow(0), 4);
}

TEST(LinearMemory, ContainsIsOverflowSafe)
{
    LinearMemory memory(1);
    EXPECT_TRUE(memory.contains(0, LinearMemory::kPageSize));
    EXPECT_TRUE(memory.contains(LinearMemory::kPageSize, 0));
    EXPECT_FALSE(memory.contains(LinearMemory::kPageSize, 1));
    EXPECT_FALSE(memory.contains(1, UINT64_MAX));
}

TEST(LinearMemory, RecycledMemoryIsZeroed)
{
    for (int round = 0; round < 3; ++round) {
        LinearMemory memory(2);
        for (uint64_t i = 0; i < memory.size(); i += 4093) {
            ASSERT_EQ(memory.data()[i], 0) << "round " << round << " offset " << i;
        }
        std::memset(memory.data(), 0x5a, memory.size());
    }
}

// ---- read/write ----

TEST_F(NativeGuest, ReadWriteExamples)
{
    auto instance = engine.instantiate(named("noop"), {}, {});
    EXPECT_TRUE(instance->read_span({0, 0}).empty());

    auto abc = instance->write_bytes(to_bytes("abc"));
    EXPECT_EQ(abc.length, 3u);
    EXPECT_EQ(cwasi::to_string(instance->read_span(abc)), "abc");

    auto empty = instance->write_bytes({});
    EXPECT_EQ(empty.length, 0u);

    auto second = instance->write_bytes(to_bytes("defg"));
    EXPECT_TRUE(second.pointer >= abc.end() || second.end() <= abc.pointer);

    EXPECT_EQ(error_of([&] { instance->read_span({0xfffffff0u, 32}); }), Errc::OutOfBounds);
    EXPECT_EQ(error_of([&] { instance->write_at(LinearMemory::kPageSize * 100, to_bytes("x")); }), Errc::OutOfBounds);

    instance->write_at(abc.pointer, to_bytes("xy"));
    EXPECT_EQ(cwasi::to_string(instance->read_span(abc)), "xyc");
}

TEST_F(NativeGuest, SpansNeverOverlap)
{
    std::mt19937_64 rng(testing::kPropertySeed + 12);
    auto instance = engine.instantiate(named("noop"), {}, {});
    std::vector<std::pair<MemorySpan, Bytes>> written;
    for (int i = 0; i < 500; ++i) {
        auto data = testing::random_bytes(rng, testing::random_size(rng, 70000));
        auto span = instance->write_bytes(data);
        ASSERT_EQ(span.length, data.size());
        for (const auto& [other, _] : written) {
            bool disjoint = span.length == 0 || other.length == 0 || span.pointer >= other.end() || span.end() <= other.pointer;
            ASSERT_TRUE(disjoint) << "write " << i;
        }
        written.emplace_back(span, std::move(data));
    }
    for (const auto& [span, data] : written) {
        ASSERT_EQ(instance->read_span(span), data);
    }
}

TEST_F(NativeGuest, LargeRoundTrip)
{
    std::mt19937_64 rng(testing::kPropertySeed + 13);
    auto instance = engine.instantiate(named("noop"), {}, {});
    auto data = testing::random_bytes(rng, 100u * 1024 * 1024);
    auto span = instance->write_bytes(data);
    EXPECT_TRUE(instance->read_span(span) == data);
}

TEST_F(NativeGuest, ViewsAreStableAcrossGrowth)
{
    auto instance = engine.instantiate(named("noop"), {}, {});
    auto first = instance->write_bytes(to_bytes("stable"));
    auto view = instance->view_span(first);
    instance->write_bytes(Bytes(8u * 1024 * 1024, 1)); // forces growth
    EXPECT_EQ(cwasi::to_string(view), "stable");
}

// ---- lifecycle ----

TEST_F(NativeGuest, HappyPath)
{
    auto instance = engine.instantiate(named("noop"), {}, {});
    EXPECT_EQ(instance->lifecycle(LifecycleAction::New), InstanceState::Created);
    // A no-op guest may already be done by the time start returns.
    auto started = instance->lifecycle(LifecycleAction::Start);
    EXPECT_TRUE(started == InstanceState::Running || started == InstanceState::Finished);
    EXPECT_EQ(instance->lifecycle(LifecycleAction::Wait), InstanceState::Finished);
    EXPECT_TRUE(instance->trap_message().empty());
    EXPECT_EQ(instance->lifecycle(LifecycleAction::Delete), InstanceState::Finished);
    EXPECT_TRUE(instance->deleted());
}

TEST_F(NativeGuest, IllegalTransitions)
{
    auto instance = engine.instantiate(named("noop"), {}, {});
    EXPECT_EQ(error_of([&] { instance->wait(); }), Errc::BadTransition);
    EXPECT_EQ(error_of([&] { instance->kill(); }), Errc::BadTransition);
    instance->start();
    instance->wait();
    EXPECT_EQ(error_of([&] { instance->start(); }), Errc::BadTransition);
    EXPECT_EQ(error_of([&] { instance->kill(); }), Errc::BadTransition);
    EXPECT_EQ(error_of([&] { instance->lifecycle(LifecycleAction::New); }), Errc::BadTransition);
    EXPECT_EQ(error_of([&] { instance->read_span({0, 1}); }), Errc::BadState);
    instance->remove();
    EXPECT_EQ(error_of([&] { instance->remove(); }), Errc::BadTransition);
}

TEST_F(NativeGuest, KillRunningGuest)
{
    auto instance = engine.instantiate(named("spin"), {}, {});
    instance->start();
    EXPECT_EQ(instance->state(), InstanceState::Running);
    EXPECT_EQ(error_of([&] { instance->read_span({0, 1}); }), Errc::BadState); // not the executor
    EXPECT_EQ(error_of([&] { instance->remove(); }), Errc::BadTransition);
    EXPECT_EQ(instance->lifecycle(LifecycleAction::Kill), InstanceState::Killed);
    EXPECT_TRUE(instance->interrupted());
    EXPECT_EQ(instance->wait(), InstanceState::Killed);
}

TEST_F(NativeGuest, ThrowingGuestRecordsTrap)
{
    auto instance = engine.instantiate(named("failing"), {}, {});
    instance->start();
    EXPECT_EQ(instance->wait(), InstanceState::Finished);
    EXPECT_NE(instance->trap_message().find("guest exploded"), std::string::npos);
}

TEST_F(NativeGuest, ReleaseHooksRunOnce)
{
    for (bool kill : {false, true}) {
        int released = 0;
        auto instance = engine.instantiate(named(kill ? "spin" : "noop"), {}, {});
        instance->on_release([&] { ++released; });
        instance->start();
        if (kill) {
            instance->kill();
        }
        instance->wait();
        instance->remove();
        instance.reset();
        EXPECT_EQ(released, 1) << "kill=" << kill;
    }

    int released = 0;
    {
        auto instance = engine.instantiate(named("noop"), {}, {});
        instance->on_release([&] { ++released; });
    }
    EXPECT_EQ(released, 1) << "destroyed without running";
}

TEST_F(NativeGuest, UnknownModuleIsEngineError)
{
    EXPECT_EQ(error_of([&] { engine.instantiate(named("ghost"), {}, {}); }), Errc::EngineError);
}

TEST_F(NativeGuest, UnresolvedImportIsLinkError)
{
    NativeModule needy;
    needy.imports.push_back({"lib", "helper", {{ValueType::I32}, {ValueType::I32}}});
    needy.exports["run"] = NativeExport {{}, [](GuestInstance&, std::span<const uint64_t>) { return std::vector<uint64_t> {}; }};
    engine.define("needy", std::move(needy));
    EXPECT_EQ(error_of([&] { engine.instantiate(named("needy"), {}, {}); }), Errc::LinkError);

    NativeModule lib;
    lib.exports["helper"] = NativeExport {{{ValueType::I32}, {ValueType::I32}},
        [](GuestInstance&, std::span<const uint64_t> args) { return std::vector<uint64_t> {args[0] * 2}; }};
    engine.define("lib", std::move(lib));
    auto instance = engine.instantiate(named("needy"), std::vector<ModuleArtifact> {named("lib")}, {});
    EXPECT_EQ(instance->call_import("lib", "helper", std::vector<uint64_t> {21}), std::vector<uint64_t> {42});
    EXPECT_EQ(instance->module_count(), 2u);
}

TEST_F(NativeGuest, InputAndOutput)
{
    engine.define("upper", transform_module([](ByteView in) {
        Bytes out(in.begin(), in.end());
        for (auto& c : out) {
            c = static_cast<uint8_t>(std::toupper(c));
        }
        return out;
    }));
    EXPECT_EQ(cwasi::to_string(execute_once(engine, named("upper"), to_bytes("quiet"))), "QUIET");
    EXPECT_EQ(cwasi::to_string(execute_once(engine, named("upper"), {})), "");
    EXPECT_EQ(error_of([&] { execute_once(engine, named("failing"), {}); }), Errc::Trap);
}

// ---- host ABI through the WebAssembly backend ----

TEST(WasmGuest, StandardHostFunctions)
{
    auto names = standard_host_functions();
    std::set<std::string> got;
    for (const auto& fn : names) {
        EXPECT_EQ(fn.module, kHostModule);
        got.insert(fn.name);
    }
    EXPECT_EQ(got, (std::set<std::string> {"input", "output", "alloc"}));
    EXPECT_EQ(dispatch_type(), (FunctionType {{ValueType::I32, ValueType::I32}, {ValueType::I64}}));
}

TEST(WasmGuest, TextArtifactsAreRejected)
{
    WasmEngine engine;
    auto artifact = ModuleArtifact::load(testing::fixture("echo.wat"));
    EXPECT_TRUE(artifact.is_text());
    EXPECT_EQ(error_of([&] { engine.instantiate(artifact, {}, {}); }), Errc::EngineError);
}

// Both backends give the same bytes for the synthetic handlers.
TEST(BackendConformance, HandlersAgree)
{
    NativeEngine native;
    WasmEngine wasm;
    for (const auto& handler : bench::handler_names()) {
        native.define(handler, transform_module([handler](ByteView in) { return bench::apply_handler(handler, in); }));
    }

    std::mt19937_64 rng(testing::kPropertySeed + 14);
    for (const auto& handler : bench::handler_names()) {
        auto wasm_artifact = ModuleArtifact::load(testing::fixture(handler + ".wasm"));
        for (int i = 0; i < 30; ++i) {
            auto payload = testing::random_bytes(rng, testing::random_size(rng, 300000));
            auto from_wasm = execute_once(wasm, wasm_artifact, payload, standard_host_functions());
            auto from_native = execute_once(native, named(handler), payload);
            ASSERT_EQ(from_wasm, from_native) << handler << " case " << i;
            Bytes want = handler == "echo" ? payload : handler == "reverse" ? oracle::reverse(payload) : oracle::checksum_tag(payload);
            ASSERT_EQ(from_wasm, want) << handler << " case " << i;
        }
    }
}

} // namespace
} // namespace cwasi::guest
