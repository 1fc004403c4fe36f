#include <gtest/gtest.h>

#include <chrono>
#include <thread>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <json.hpp>

#include "common.hpp"
#include "mompc/errors.hpp"
#include "mompc/service/ws_server.hpp"

using namespace mompc;
using namespace mompc::service;
using nlohmann::json;

namespace {

const Track& short_track() {
    static const Track t = fixture::track_from("limit 0 300 50\nlimit 300 600 40\nstop 550\n");
    return t;
}

ModelParams plant() { return fixture::demo_library().config().model; }

SessionOptions options(double rho0 = 0.5) {
    SessionOptions o;
    o.rho0 = rho0;
    return o;
}

void run_to_end(Session& s) {
    while (s.phase() == Phase::Driving) {
        s.tick();
    }
}

json parse(const std::string& text) { return json::parse(text); }

std::string msg(json m) {
    m["v"] = 1;
    return m.dump();
}

}  // namespace

TEST(Session, DrivesWithoutClients) {
    Session s(fixture::demo_library(), short_track(), plant(), MpcConfig{}, options());
    run_to_end(s);
    ASSERT_EQ(s.phase(), Phase::Finished);
    EXPECT_FALSE(s.failure());
    EXPECT_TRUE(s.runner().log() == fixture::drive(short_track(), fixed_rho(0.5)));
}

TEST(Session, RhoLatchesAtTheNextSample) {
    Session s(fixture::demo_library(), short_track(), plant(), MpcConfig{}, options(0.0));
    while (s.runner().samples_started() < 3 || s.runner().at_sample_boundary()) {
        s.tick();
    }
    const std::size_t rows = s.runner().log().samples.size();
    const DriveLog before = s.runner().log();
    const auto replies = s.handle(msg({{"type", "set_rho"}, {"value", 1.0}}));
    ASSERT_EQ(replies.size(), 1u);
    EXPECT_EQ(parse(replies[0])["type"], "state");
    EXPECT_EQ(parse(replies[0])["rho"], 0.0);
    while (!s.runner().at_sample_boundary()) {
        s.tick();
        ASSERT_EQ(s.runner().decision().rho, 0.0);
    }
    s.tick();
    EXPECT_EQ(s.runner().decision().rho, 1.0);
    EXPECT_EQ(s.latched().back().second, 1.0);
    for (std::size_t i = 0; i < rows; ++i) {
        ASSERT_TRUE(s.runner().log().samples[i] == before.samples[i]);
    }
}

TEST(Session, PauseDoesNotChangeTheDrive) {
    Session a(fixture::demo_library(), short_track(), plant(), MpcConfig{}, options());
    Session b(fixture::demo_library(), short_track(), plant(), MpcConfig{}, options());
    for (int i = 0; i < 1234; ++i) {
        a.tick();
        b.tick();
    }
    EXPECT_EQ(parse(a.handle(msg({{"type", "pause"}}))[0])["phase"], "paused");
    const double t = a.sim_time();
    for (int i = 0; i < 100; ++i) {
        EXPECT_FALSE(a.tick());
    }
    EXPECT_EQ(a.sim_time(), t);
    a.handle(msg({{"type", "set_rho"}, {"value", 0.9}}));
    b.handle(msg({{"type", "set_rho"}, {"value", 0.9}}));
    EXPECT_EQ(parse(a.handle(msg({{"type", "resume"}}))[0])["phase"], "driving");
    run_to_end(a);
    run_to_end(b);
    EXPECT_TRUE(a.runner().log() == b.runner().log());
}

TEST(Session, LogEqualsHeadlessRunWithLatchedSchedule) {
    Session s(fixture::demo_library(), short_track(), plant(), MpcConfig{}, options(0.2));
    int n = 0;
    while (s.phase() == Phase::Driving) {
        if (++n % 700 == 0) {
            s.handle(msg({{"type", "set_rho"}, {"value", (n / 700 % 5) / 4.0}}));
        }
        s.tick();
    }
    ASSERT_GT(s.latched().size(), 5u);
    EXPECT_TRUE(s.runner().log() == fixture::drive(short_track(), scheduled_rho(s.latched())));
}

TEST(Session, BadMessagesGetErrors) {
    Session s(fixture::demo_library(), short_track(), plant(), MpcConfig{}, options());
    for (const std::string text :
         {std::string("not json"), std::string("[1,2]"), json{{"type", "pause"}}.dump(),
          json{{"type", "pause"}, {"v", 2}}.dump(), msg({{"type", "warp"}}), msg({{"type", "set_rho"}, {"value", 1.5}}),
          msg({{"type", "set_rho"}}), msg({{"type", "set_speed"}, {"factor", 0}}),
          msg({{"type", "reset"}, {"track", 5}})}) {
        const auto replies = s.handle(text);
        ASSERT_EQ(replies.size(), 1u) << text;
        const json r = parse(replies[0]);
        EXPECT_EQ(r["type"], "error") << text;
        EXPECT_EQ(r["v"], 1);
        EXPECT_TRUE(r["message"].is_string());
    }
}

TEST(Session, StateMessageCarriesTheSchema) {
    Session s(fixture::demo_library(), short_track(), plant(), MpcConfig{}, options());
    for (int i = 0; i < 500; ++i) {
        s.tick();
    }
    const json m = parse(s.state_message());
    EXPECT_EQ(m["v"], 1);
    EXPECT_EQ(m["type"], "state");
    for (const char* key : {"t", "p", "v_kmh", "S", "u", "rho"}) {
        EXPECT_TRUE(m[key].is_number()) << key;
    }
    EXPECT_TRUE(m["scenario"].is_string());
    EXPECT_TRUE(m["limits"]["vmin"].is_number());
    EXPECT_TRUE(m["limits"]["vmax"].is_number());
    ASSERT_TRUE(m["front"].is_array());
    ASSERT_FALSE(m["front"].empty());
    for (const auto& e : m["front"]) {
        EXPECT_TRUE(e["u"].is_number() && e["J1"].is_number() && e["J2"].is_number());
    }
    const long selected = m["selected"];
    EXPECT_GE(selected, 0);
    EXPECT_LT(selected, static_cast<long>(m["front"].size()));
    EXPECT_DOUBLE_EQ(m["front"][selected]["u"].get<double>(), m["u"].get<double>());
}

TEST(Session, FinishAndReset) {
    Session s(fixture::demo_library(), short_track(), plant(), MpcConfig{}, options());
    s.set_track_loader([](const std::string& name) {
        if (name != "flat") {
            throw Error("no such track");
        }
        return fixture::track_from("limit 0 200 50\n");
    });
    run_to_end(s);
    const json done = parse(s.finished_message());
    EXPECT_EQ(done["type"], "finished");
    EXPECT_GT(done["totals"]["J2"].get<double>(), 0.0);
    EXPECT_EQ(done["totals"]["stops"].size(), 1u);
    EXPECT_EQ(parse(s.handle(msg({{"type", "resume"}}))[0])["type"], "error");
    EXPECT_EQ(parse(s.handle(msg({{"type", "reset"}, {"track", "nowhere"}}))[0])["type"], "error");
    EXPECT_EQ(parse(s.handle(msg({{"type", "reset"}, {"track", "flat"}}))[0])["phase"], "driving");
    run_to_end(s);
    EXPECT_TRUE(s.runner().log() == fixture::drive(fixture::track_from("limit 0 200 50\n"), fixed_rho(0.5)));
}

TEST(Replay, OneMessagePerLogRow) {
    const DriveLog log = fixture::drive(short_track(), fixed_rho(0.5));
    const auto messages = replay_messages(log, &short_track());
    ASSERT_EQ(messages.size(), log.samples.size());
    const json last = parse(messages.back());
    EXPECT_EQ(last["type"], "state");
    EXPECT_DOUBLE_EQ(last["p"].get<double>(), log.samples.back().p);
}

TEST(Replay, SpeedFactorScalesWallTime) {
    std::vector<std::string> messages(201, "{}");
    std::vector<double> times;
    for (int i = 0; i <= 200; ++i) {
        times.push_back(0.01 * i);
    }
    std::size_t sent = 0;
    const auto start = std::chrono::steady_clock::now();
    paced_send(messages, times, 10.0, [&](const std::string&) { ++sent; });
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    EXPECT_EQ(sent, messages.size());
    EXPECT_NEAR(wall, 0.2, 0.05);
}

TEST(WebSocket, ScriptedClientMatchesHeadlessRun) {
    namespace beast = boost::beast;
    namespace asio = boost::asio;
    Session session(fixture::demo_library(), short_track(), plant(), MpcConfig{}, options(0.0));
    session.handle(msg({{"type", "set_speed"}, {"factor", 40.0}}));
    WsServer server(0);
    std::atomic<bool> stop{false};
    std::thread loop([&] { serve(session, server, {20.0, &stop}); });

    asio::io_context ioc;
    asio::ip::tcp::resolver resolver(ioc);
    beast::websocket::stream<asio::ip::tcp::socket> ws(ioc);
    asio::connect(ws.next_layer(), resolver.resolve("127.0.0.1", std::to_string(server.port())));
    ws.handshake("127.0.0.1", "/");

    std::size_t states = 0, errors = 0;
    bool sent_rho = false, sent_bogus = false, finished = false;
    beast::flat_buffer buffer;
    while (!finished) {
        ws.read(buffer);
        const json m = json::parse(beast::buffers_to_string(buffer.data()));
        buffer.consume(buffer.size());
        const std::string type = m["type"];
        if (type == "state") {
            ++states;
            if (!sent_rho && m["p"].get<double>() > 100.0) {
                ws.write(asio::buffer(msg({{"type", "set_rho"}, {"value", 1.0}})));
                sent_rho = true;
            } else if (sent_rho && !sent_bogus) {
                ws.write(asio::buffer(msg({{"type", "bogus"}})));
                sent_bogus = true;
            }
        } else if (type == "error") {
            ++errors;
        } else if (type == "finished") {
            finished = true;
        }
    }
    stop = true;
    loop.join();
    ws.close(beast::websocket::close_code::normal);

    EXPECT_EQ(errors, 1u);
    EXPECT_GT(states, 10u);
    EXPECT_EQ(session.phase(), Phase::Finished);
    bool saw_one = false;
    for (const auto& [p, rho] : session.latched()) {
        saw_one = saw_one || rho == 1.0;
    }
    EXPECT_TRUE(saw_one);
    EXPECT_TRUE(session.runner().log() == fixture::drive(short_track(), scheduled_rho(session.latched())));
}

TEST(WebSocket, PortInUseIsReported) {
    WsServer first(0);
    EXPECT_THROW(WsServer second(first.port()), Error);
}
