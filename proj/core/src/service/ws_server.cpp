#include "mompc/service/ws_server.hpp"

#include <chrono>
#include <deque>
#include <map>
#include <mutex>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <json.hpp>

#include "mompc/errors.hpp"

namespace mompc::service {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

constexpr std::size_t max_queued = 4096;

class Connection;

}  // namespace

struct WsServer::Impl {
    asio::io_context ioc;
    tcp::acceptor acceptor{ioc};
    std::thread thread;
    std::atomic<std::size_t> clients{0};
    std::map<std::uint64_t, std::shared_ptr<Connection>> connections;  // io thread only
    std::uint64_t next_id = 1;
    std::mutex inbox_mutex;
    std::vector<Inbound> inbox;

    void accept();
    void push(Inbound in) {
        std::lock_guard lock(inbox_mutex);
        inbox.push_back(std::move(in));
    }
};

namespace {

class Connection : public std::enable_shared_from_this<Connection> {
public:
    Connection(tcp::socket socket, WsServer::Impl& server, std::uint64_t id)
        : ws_(std::move(socket)), server_(server), id_(id) {}

    void start() {
        ws_.text(true);
        ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
            if (ec) {
                return;
            }
            self->server_.connections[self->id_] = self;
            ++self->server_.clients;
            self->server_.push({self->id_, true, {}});
            self->read();
        });
    }

    void enqueue(const std::string& text, bool droppable) {
        if (closed_) {
            return;
        }
        if (droppable) {
            // the front message may be in flight; only replace later ones
            for (auto it = queue_.begin() + (writing_ ? 1 : 0); it != queue_.end();) {
                it = it->droppable ? queue_.erase(it) : it + 1;
            }
        }
        if (queue_.size() >= max_queued) {
            queue_.erase(queue_.begin() + (writing_ ? 1 : 0));
        }
        queue_.push_back({text, droppable});
        if (!writing_) {
            write();
        }
    }

    void close() {
        if (closed_) {
            return;
        }
        beast::error_code ec;
        ws_.next_layer().close(ec);
    }

private:
    struct Outgoing {
        std::string text;
        bool droppable;
    };

    void read() {
        ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) {
                self->drop();
                return;
            }
            self->server_.push({self->id_, false, beast::buffers_to_string(self->buffer_.data())});
            self->buffer_.consume(self->buffer_.size());
            self->read();
        });
    }

    void write() {
        writing_ = true;
        ws_.async_write(asio::buffer(queue_.front().text), [self = shared_from_this()](beast::error_code ec, std::size_t) {
            self->queue_.pop_front();
            self->writing_ = false;
            if (ec) {
                self->drop();
                return;
            }
            if (!self->queue_.empty()) {
                self->write();
            }
        });
    }

    void drop() {
        if (closed_) {
            return;
        }
        closed_ = true;
        if (server_.connections.erase(id_) > 0) {
            --server_.clients;
        }
    }

    websocket::stream<tcp::socket> ws_;
    WsServer::Impl& server_;
    std::uint64_t id_;
    beast::flat_buffer buffer_;
    std::deque<Outgoing> queue_;
    bool writing_ = false;
    bool closed_ = false;
};

}  // namespace

void WsServer::Impl::accept() {
    acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
        if (ec) {
            if (ec != asio::error::operation_aborted) {
                accept();
            }
            return;
        }
        std::make_shared<Connection>(std::move(socket), *this, next_id++)->start();
        accept();
    });
}

WsServer::WsServer(unsigned short port, const std::string& address) : impl_(std::make_unique<Impl>()) {
    beast::error_code ec;
    const tcp::endpoint endpoint(asio::ip::make_address(address, ec), port);
    if (ec) {
        throw Error("invalid listen address '" + address + "'");
    }
    impl_->acceptor.open(endpoint.protocol(), ec);
    if (!ec) {
        impl_->acceptor.set_option(asio::socket_base::reuse_address(true), ec);
    }
    if (!ec) {
        impl_->acceptor.bind(endpoint, ec);
    }
    if (!ec) {
        impl_->acceptor.listen(asio::socket_base::max_listen_connections, ec);
    }
    if (ec) {
        throw Error("cannot listen on " + address + ":" + std::to_string(port) + ": " + ec.message());
    }
    impl_->accept();
    impl_->thread = std::thread([impl = impl_.get()] { impl->ioc.run(); });
}

WsServer::~WsServer() {
    asio::post(impl_->ioc, [impl = impl_.get()] {
        beast::error_code ec;
        impl->acceptor.close(ec);
        for (auto& [id, c] : impl->connections) {
            c->close();
        }
        impl->connections.clear();
        impl->ioc.stop();
    });
    impl_->thread.join();
}

unsigned short WsServer::port() const noexcept { return impl_->acceptor.local_endpoint().port(); }

std::size_t WsServer::client_count() const noexcept { return impl_->clients.load(); }

void WsServer::broadcast(std::string text, bool droppable) {
    asio::post(impl_->ioc, [impl = impl_.get(), text = std::move(text), droppable] {
        for (auto& [id, c] : impl->connections) {
            c->enqueue(text, droppable);
        }
    });
}

void WsServer::send_to(std::uint64_t client, std::string text) {
    asio::post(impl_->ioc, [impl = impl_.get(), client, text = std::move(text)] {
        if (const auto it = impl->connections.find(client); it != impl->connections.end()) {
            it->second->enqueue(text, false);
        }
    });
}

std::vector<WsServer::Inbound> WsServer::drain() {
    std::lock_guard lock(impl_->inbox_mutex);
    return std::exchange(impl_->inbox, {});
}

namespace {

using Clock = std::chrono::steady_clock;

bool stopped(const std::atomic<bool>* stop) { return stop != nullptr && stop->load(); }

}  // namespace

void serve(Session& session, WsServer& server, const ServeOptions& options) {
    const auto telemetry_period = std::chrono::duration<double>(1.0 / options.telemetry_hz);
    auto last_wall = Clock::now();
    auto next_telemetry = last_wall;
    double sim_budget = 0.0;
    bool announced = false;
    while (!stopped(options.stop)) {
        for (auto& in : server.drain()) {
            if (in.connected) {
                server.send_to(in.client, session.state_message());
                continue;
            }
            const bool was_finished = session.phase() == Phase::Finished;
            for (auto& reply : session.handle(in.text)) {
                server.send_to(in.client, std::move(reply));
            }
            if (was_finished && session.phase() != Phase::Finished) {
                announced = false;
            }
        }

        const auto now = Clock::now();
        const double wall_dt = std::chrono::duration<double>(now - last_wall).count();
        last_wall = now;
        if (session.phase() == Phase::Driving) {
            sim_budget += wall_dt * session.speed();
            const double step = session.runner().config().integrator.step;
            while (sim_budget >= step && session.phase() == Phase::Driving) {
                if (session.tick()) {
                    server.broadcast(session.state_message(), false);
                }
                sim_budget -= step;
                if (Clock::now() - now > telemetry_period) {
                    sim_budget = 0.0;  // fall behind rather than starve I/O
                }
            }
        } else {
            sim_budget = 0.0;
        }
        if (session.phase() == Phase::Finished && !announced) {
            server.broadcast(session.state_message(), false);
            server.broadcast(session.finished_message(), false);
            announced = true;
        }
        if (now >= next_telemetry) {
            server.broadcast(session.state_message(), true);
            next_telemetry = now + std::chrono::duration_cast<Clock::duration>(telemetry_period);
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
}

void paced_send(const std::vector<std::string>& messages, const std::vector<double>& times, double speed,
                const std::function<void(const std::string&)>& sink, const std::atomic<bool>* stop) {
    if (messages.size() != times.size()) {
        throw Error("paced_send: message and time counts differ");
    }
    if (!(speed > 0.0)) {
        throw ConfigError("speed factor must be positive");
    }
    const auto start = Clock::now();
    const double t0 = times.empty() ? 0.0 : times.front();
    for (std::size_t i = 0; i < messages.size(); ++i) {
        if (stopped(stop)) {
            return;
        }
        std::this_thread::sleep_until(start + std::chrono::duration_cast<Clock::duration>(
                                                  std::chrono::duration<double>((times[i] - t0) / speed)));
        sink(messages[i]);
    }
}

void replay(const DriveLog& log, WsServer& server, double speed, const Track* track, const std::atomic<bool>* stop) {
    const std::vector<std::string> messages = replay_messages(log, track);
    std::vector<double> times;
    times.reserve(log.samples.size());
    for (const auto& s : log.samples) {
        times.push_back(s.t);
    }
    const std::string finished = nlohmann::json{{"v", schema_version},
                                                {"type", "finished"},
                                                {"totals",
                                                 {{"J1", log.totals.j1},
                                                  {"J2", log.totals.j2},
                                                  {"wheel_energy", log.wheel_energy},
                                                  {"samples", log.samples.size()}}}}
                                     .dump();
    bool pending = true;
    while (!stopped(stop)) {
        for (auto& in : server.drain()) {
            if (in.connected) {
                continue;
            }
            nlohmann::json msg = nlohmann::json::parse(in.text, nullptr, false);
            if (msg.is_object() && msg.value("type", "") == "reset") {
                pending = true;
            } else {
                server.send_to(in.client, error_message("replay accepts only reset"));
            }
        }
        if (pending && server.client_count() > 0) {
            paced_send(messages, times, speed, [&](const std::string& m) { server.broadcast(m, false); }, stop);
            server.broadcast(finished, false);
            pending = false;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
}

}  // namespace mompc::service
