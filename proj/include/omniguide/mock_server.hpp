#pragma once

#include "omniguide/toy_model.hpp"

#include <atomic>
#include <chrono>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <unordered_map>

namespace httplib {
class Server;
}

namespace omniguide {

/// Artificial compute cost injected before each response is written.
struct LatencyModel {
    double per_token_prefill_s = 0.0;
    double per_step_s = 0.0;
    double omni_payload_factor_s_per_kb = 0.0;

    void validate() const;
    std::chrono::nanoseconds prefill_cost(std::size_t prompt_tokens, std::size_t payload_bytes) const;
    std::chrono::nanoseconds step_cost() const;
};

/// One simulated accelerator. Servers sharing a device run their simulated
/// compute one request at a time, the way co-located models share a GPU.
class SimulatedDevice {
public:
    void occupy(std::chrono::nanoseconds cost);

private:
    std::mutex mutex_;
};

struct ServerStats {
    std::size_t live_sessions = 0;
    std::size_t opened = 0;
    std::size_t closed = 0;
};

/// Test-fixture server exposing one toy model over the wire protocol.
class MockServer {
public:
    MockServer(std::shared_ptr<const ToyModel> model, LatencyModel latency,
               std::shared_ptr<SimulatedDevice> device = nullptr);
    ~MockServer();
    MockServer(const MockServer&) = delete;
    MockServer& operator=(const MockServer&) = delete;

    /// Binds host:port (port 0 picks a free one) and returns the bound port.
    int bind(const std::string& host, int port);
    /// Serves on a background thread; requires bind().
    void start();
    /// Serves on the calling thread until stop().
    void run();
    /// Stops accepting, waits for in-flight requests, drops remaining sessions.
    void stop();

    std::string endpoint() const;
    ServerStats stats() const;

private:
    struct HostedSession;
    void install_routes();
    std::shared_ptr<HostedSession> find(const std::string& id);

    std::shared_ptr<const ToyModel> model_;
    LatencyModel latency_;
    std::shared_ptr<SimulatedDevice> device_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    std::string host_;
    int port_ = -1;

    mutable std::mutex sessions_mutex_;
    std::unordered_map<std::string, std::shared_ptr<HostedSession>> sessions_;
    std::size_t opened_ = 0;
    std::size_t closed_ = 0;
    std::atomic<std::uint64_t> next_id_{1};
};

/// Builds the model, binds and starts serving in the background.
std::unique_ptr<MockServer> serve(ToySpec spec, LatencyModel latency, const std::string& host, int port,
                                  std::shared_ptr<SimulatedDevice> device = nullptr);

}  // namespace omniguide
