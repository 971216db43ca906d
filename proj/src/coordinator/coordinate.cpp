/*
 * Copyright (C) 2026 The cwasi-cpp Authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#include <set>

#include "cwasi/coordinator.hpp"
#include "cwasi/error.hpp"

namespace cwasi {

Bytes execute_once(guest::GuestEngine& engine, const guest::ModuleArtifact& artifact, ByteView payload,
    std::span<const guest::HostFunction> host_functions)
{
    auto instance = engine.instantiate(artifact, {}, host_functions);
    instance->set_input(payload);
    instance->start();
    auto state = instance->wait();
    if (state != guest::InstanceState::Finished || !instance->trap_message().empty()) {
        raise(Errc::Trap, artifact.name + ": " + instance->trap_message());
    }
    return instance->take_output();
}

struct RunningFunction::State {
    FunctionSpec spec;
    Role role = Role::Primary;
    CoordinatorOptions options;
    guest::GuestEngine* engine = nullptr;
    std::unique_ptr<Dispatcher> dispatcher;
    std::vector<guest::HostFunction> hosts;
    guest::ModuleArtifact artifact;

    // primary
    std::unique_ptr<guest::GuestInstance> instance;
    BundlePathSet embeddings;

    // secondary
    std::unique_ptr<broker::NetworkReceiver> network;
    std::unique_ptr<local::LocalReceiver> local;
    std::mutex active_mutex;
    std::set<guest::GuestInstance*> active;
    bool killed = false;
    // Held for the whole teardown so a concurrent kill() returns only once it is done.
    std::mutex kill_mutex;

    std::atomic<uint64_t> executions {0};

    void record(std::string_view event, std::string_view mode = {})
    {
        if (options.log) {
            options.log->record(spec.name(), event, mode);
        }
    }

    Bytes handle(ByteView payload, std::string_view mode)
    {
        record(events::kRequestReceived, mode);

        auto instance = engine->instantiate(artifact, {}, hosts);
        {
            std::lock_guard lock(active_mutex);
            if (killed) {
                raise(Errc::BadState, spec.name() + " was killed");
            }
            active.insert(instance.get());
        }
        record(events::kGuestCreated, mode);

        struct Untrack {
            State* state;
            guest::GuestInstance* instance;
            ~Untrack()
            {
                std::lock_guard lock(state->active_mutex);
                state->active.erase(instance);
            }
        } untrack {this, instance.get()};

        instance->set_input(payload);
        instance->start();
        executions.fetch_add(1, std::memory_order_relaxed);
        record(events::kGuestStarted, mode);

        auto final_state = instance->wait();
        if (final_state != guest::InstanceState::Finished || !instance->trap_message().empty()) {
            record(final_state == guest::InstanceState::Killed ? events::kGuestKilled : events::kGuestFailed, mode);
            raise(Errc::Trap, spec.name() + ": " + instance->trap_message());
        }
        record(events::kGuestFinished, mode);

        Bytes reply = instance->take_output();
        record(events::kReplySent, mode);
        return reply;
    }

    void start_secondary(const RunningRegistry& registry)
    {
        auto network_mode = mode_name(CommunicationMode::NetworkedBuffer);
        auto local_mode = mode_name(CommunicationMode::LocalBuffer);

        if (!options.broker_address.empty()) {
            broker::ReceiverEvents ev;
            ev.on_subscribed = [this, network_mode] { record(events::kNetworkSubscribed, network_mode); };
            network = broker::network_receiver(options.broker_address, spec.name(),
                [this, network_mode](ByteView payload) { return handle(payload, network_mode); }, std::move(ev));
        }

        local::ReceiverOptions ro;
        ro.mode = options.receiver_mode;
        ro.io_timeout = options.timeout;
        ro.events.on_listening = [this, local_mode] { record(events::kLocalListening, local_mode); };
        ro.events.on_connection = [this, local_mode] { record(events::kLocalConnection, local_mode); };
        ro.events.on_shutdown = [this, local_mode] { record(events::kLocalShutdown, local_mode); };

        try {
            local = local::start_receiver(registry, spec.bundle_name(),
                [this, local_mode](ByteView payload) { return handle(payload, local_mode); }, std::move(ro));
        } catch (const Error& e) {
            if (network) {
                network->stop();
            }
            raise(Errc::StartupFailure, spec.name() + ": local receiver failed to start: " + e.what());
        }
    }

    void start_primary()
    {
        auto imports = read_imports(artifact);
        if (options.snapshot_root) {
            embeddings = discover_embeddings(imports, SnapshotStore(*options.snapshot_root));
        }
        record(events::kEmbeddingsDiscovered,
            embeddings.empty() ? std::string_view {} : mode_name(CommunicationMode::Embedded));

        instance = embed_modules(artifact, embeddings, *engine, hosts);
        record(events::kGuestCreated);

        if (!options.input.empty()) {
            instance->set_input(options.input);
        }
        instance->start();
        executions.fetch_add(1, std::memory_order_relaxed);
        record(events::kGuestStarted);
    }
};

RunningFunction::RunningFunction(std::unique_ptr<State> state)
    : state_(std::move(state))
{
}

RunningFunction::~RunningFunction()
{
    try {
        kill();
    } catch (...) {
    }
}

const FunctionSpec& RunningFunction::spec() const noexcept
{
    return state_->spec;
}

Role RunningFunction::role() const noexcept
{
    return state_->role;
}

guest::GuestInstance* RunningFunction::instance() noexcept
{
    return state_->instance.get();
}

const BundlePathSet& RunningFunction::embeddings() const noexcept
{
    return state_->embeddings;
}

const local::LocalReceiver* RunningFunction::local_receiver() const noexcept
{
    return state_->local.get();
}

const broker::NetworkReceiver* RunningFunction::network_receiver() const noexcept
{
    return state_->network.get();
}

uint64_t RunningFunction::executions() const noexcept
{
    return state_->executions.load(std::memory_order_relaxed);
}

Dispatcher& RunningFunction::dispatcher() noexcept
{
    return *state_->dispatcher;
}

guest::InstanceState RunningFunction::wait()
{
    if (state_->instance) {
        auto result = state_->instance->wait();
        if (result == guest::InstanceState::Killed) {
            state_->record(events::kGuestKilled);
        } else if (!state_->instance->trap_message().empty()) {
            state_->record(events::kGuestFailed);
        } else {
            state_->record(events::kGuestFinished);
        }
        return result;
    }

    if (state_->local) {
        state_->local->wait();
    }
    std::lock_guard lock(state_->active_mutex);
    return state_->killed ? guest::InstanceState::Killed : guest::InstanceState::Finished;
}

namespace {

// The guest may finish between the check and the kill; that race is benign.
void kill_if_running(guest::GuestInstance& instance)
{
    if (instance.state() != guest::InstanceState::Running) {
        return;
    }
    try {
        instance.lifecycle(guest::LifecycleAction::Kill);
    } catch (const Error& e) {
        if (e.code() != Errc::BadTransition) {
            throw;
        }
    }
}

} // namespace

void RunningFunction::kill()
{
    std::lock_guard teardown(state_->kill_mutex);
    {
        std::lock_guard lock(state_->active_mutex);
        if (state_->killed) {
            return;
        }
        state_->killed = true;
        for (auto* instance : state_->active) {
            kill_if_running(*instance);
        }
    }

    if (state_->instance) {
        kill_if_running(*state_->instance);
    }
    if (state_->network) {
        state_->network->stop();
    }
    if (state_->local) {
        state_->local->stop();
    }
    state_->record(events::kFunctionKilled);
}

std::unique_ptr<RunningFunction> coordinate(
    const FunctionSpec& spec, const RunningRegistry& registry, guest::GuestEngine& engine, CoordinatorOptions options)
{
    auto state = std::make_unique<RunningFunction::State>();
    state->spec = spec;
    state->role = classify(spec);
    state->options = std::move(options);
    state->engine = &engine;

    DispatcherOptions dispatch_options;
    dispatch_options.broker_address = state->options.broker_address;
    dispatch_options.timeout = state->options.timeout;
    dispatch_options.source = spec.name();
    state->dispatcher = std::make_unique<Dispatcher>(registry, dispatch_options, state->options.log);
    state->hosts.push_back(state->dispatcher->host_function());

    try {
        state->artifact = guest::ModuleArtifact::load(spec.artifact_path());
        if (state->role == Role::Secondary) {
            state->start_secondary(registry);
        } else {
            state->start_primary();
        }
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        raise(Errc::StartupFailure, spec.name() + ": " + e.what());
    }

    return std::unique_ptr<RunningFunction>(new RunningFunction(std::move(state)));
}

} // namespace cwasi
