#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "mompc/service/session.hpp"

namespace mompc::service {

/// Websocket endpoint with JSON text frames. Network I/O runs on an internal
/// thread; every public call is non-blocking and thread-safe.
class WsServer {
public:
    struct Inbound {
        std::uint64_t client = 0;
        bool connected = false;  ///< connect notification, text empty
        std::string text;
    };

    /// Port 0 picks a free port. Throws Error when the port cannot be bound.
    explicit WsServer(unsigned short port, const std::string& address = "127.0.0.1");
    ~WsServer();
    WsServer(const WsServer&) = delete;
    WsServer& operator=(const WsServer&) = delete;

    unsigned short port() const noexcept;
    std::size_t client_count() const noexcept;

    /// Droppable messages (telemetry) replace an older droppable message still
    /// queued for a slow client; the others are always delivered in order.
    void broadcast(std::string text, bool droppable);
    void send_to(std::uint64_t client, std::string text);

    /// Messages and connect notifications received since the last call.
    std::vector<Inbound> drain();

    struct Impl;

private:
    std::unique_ptr<Impl> impl_;
};

struct ServeOptions {
    double telemetry_hz = 20.0;
    const std::atomic<bool>* stop = nullptr;
};

/// Runs the session against wall time scaled by its speed factor until
/// `stop` is set. Client I/O never blocks the simulation.
void serve(Session& session, WsServer& server, const ServeOptions& options = {});

/// Sends `messages` through `sink`, message i at wall time times[i] / speed.
/// Returns early when `stop` is set.
void paced_send(const std::vector<std::string>& messages, const std::vector<double>& times, double speed,
                const std::function<void(const std::string&)>& sink, const std::atomic<bool>* stop = nullptr);

/// Streams `log` as state messages once the first client connects, then a
/// `finished` message; a `reset` restarts the stream. Runs until `stop`.
void replay(const DriveLog& log, WsServer& server, double speed, const Track* track = nullptr,
            const std::atomic<bool>* stop = nullptr);

}  // namespace mompc::service
