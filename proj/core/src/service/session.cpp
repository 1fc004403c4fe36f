#include "mompc/service/session.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "mompc/errors.hpp"
#include "mompc/units.hpp"

namespace mompc::service {

using nlohmann::json;

std::string_view to_string(Phase p) {
    switch (p) {
        case Phase::Idle: return "idle";
        case Phase::Driving: return "driving";
        case Phase::Paused: return "paused";
        case Phase::Finished: return "finished";
    }
    return "?";
}

std::string error_message(std::string_view text) {
    return json{{"v", schema_version}, {"type", "error"}, {"message", text}}.dump();
}

namespace {

json limits_json(const Track& track, double p, bool stopping) {
    const double vmax = track.vmax_at(std::min(p, track.length()));
    return {{"vmin", stopping ? 0.0 : 0.8 * vmax}, {"vmax", vmax}};
}

double number_field(const json& msg, const char* name) {
    const auto it = msg.find(name);
    if (it == msg.end() || !it->is_number()) {
        throw Error(std::string("field '") + name + "' must be a number");
    }
    const double value = it->get<double>();
    if (!std::isfinite(value)) {
        throw Error(std::string("field '") + name + "' must be finite");
    }
    return value;
}

}  // namespace

Session::Session(const Library& library, Track track, ModelParams plant, MpcConfig config, SessionOptions options)
    : library_(library),
      track_(std::move(track)),
      plant_(std::move(plant)),
      config_(std::move(config)),
      options_(std::move(options)),
      requested_rho_(options_.rho0),
      speed_(options_.speed),
      loader_([](const std::string& path) { return load_track(path); }) {
    if (!(options_.rho0 >= 0.0 && options_.rho0 <= 1.0)) {
        throw ConfigError("rho0 must lie in [0, 1]");
    }
    if (!(options_.speed > 0.0) || !std::isfinite(options_.speed)) {
        throw ConfigError("speed factor must be positive");
    }
    runner_.emplace(track_, library_, plant_, config_);
    phase_ = options_.autostart ? Phase::Driving : Phase::Idle;
}

void Session::restart() {
    runner_.emplace(track_, library_, plant_, config_);
    latched_.clear();
    failure_.reset();
    phase_ = Phase::Driving;
}

double Session::sim_time() const { return runner_->state().t; }

std::vector<std::string> Session::handle(std::string_view text) {
    json msg;
    try {
        msg = json::parse(text);
    } catch (const json::exception&) {
        return {error_message("malformed JSON")};
    }
    if (!msg.is_object()) {
        return {error_message("message must be a JSON object")};
    }
    const auto version = msg.find("v");
    if (version == msg.end() || !version->is_number_integer() || version->get<int>() != schema_version) {
        return {error_message("unsupported schema version (expected \"v\": 1)")};
    }
    const auto type_it = msg.find("type");
    if (type_it == msg.end() || !type_it->is_string()) {
        return {error_message("missing message type")};
    }
    const std::string type = type_it->get<std::string>();
    try {
        if (type == "set_rho") {
            const double value = number_field(msg, "value");
            if (value < 0.0 || value > 1.0) {
                return {error_message("rho must lie in [0, 1]")};
            }
            requested_rho_ = value;
        } else if (type == "pause") {
            if (phase_ == Phase::Finished || phase_ == Phase::Idle) {
                return {error_message("no drive in progress")};
            }
            phase_ = Phase::Paused;
        } else if (type == "resume") {
            if (phase_ == Phase::Finished) {
                return {error_message("drive finished; send reset")};
            }
            phase_ = Phase::Driving;
        } else if (type == "reset") {
            if (const auto t = msg.find("track"); t != msg.end() && !t->is_null()) {
                if (!t->is_string()) {
                    return {error_message("field 'track' must be a string")};
                }
                track_ = loader_(t->get<std::string>());
            }
            restart();
        } else if (type == "set_speed") {
            const double factor = number_field(msg, "factor");
            if (factor <= 0.0) {
                return {error_message("speed factor must be positive")};
            }
            speed_ = factor;
        } else {
            return {error_message("unknown message type '" + type + "'")};
        }
    } catch (const Error& e) {
        return {error_message(e.what())};
    }
    return {state_message()};
}

bool Session::tick() {
    if (phase_ != Phase::Driving) {
        return false;
    }
    const bool boundary = runner_->at_sample_boundary();
    const double p = runner_->state().p;
    try {
        runner_->tick(requested_rho_);
    } catch (const Error& e) {
        failure_ = e.what();
        phase_ = Phase::Finished;
        return false;
    }
    if (boundary) {
        latched_.emplace_back(p, runner_->decision().rho);
    }
    if (runner_->finished()) {
        phase_ = Phase::Finished;
        if (!options_.log_path.empty()) {
            write_drive_log(runner_->log(), options_.log_path);
        }
    }
    return boundary;
}

std::string Session::state_message() const {
    const VehicleState& s = runner_->state();
    const MpcDecision& d = runner_->decision();
    json front = json::array();
    long selected = -1;
    bool stopping = false;
    std::string scenario;
    if (runner_->samples_started() > 0 && d.entry != nullptr) {
        for (const auto& e : d.entry->front.entries) {
            front.push_back({{"u", e.u.torque}, {"J1", e.objectives.j1}, {"J2", e.objectives.j2}});
        }
        selected = static_cast<long>(d.selected);
        stopping = d.classified.kase() == ScenarioCase::Stop;
        scenario = to_string(d.entry->key());
    }
    double current = 0.0;
    if (!runner_->log().samples.empty()) {
        current = runner_->log().samples.back().current;
    }
    json msg{{"v", schema_version},
             {"type", "state"},
             {"phase", to_string(phase_)},
             {"t", s.t},
             {"p", s.p},
             {"v_kmh", mps_to_kmh(s.v)},
             {"S", s.soc},
             {"u", d.u.torque},
             {"I", std::isfinite(current) ? json(current) : json(nullptr)},
             {"rho", runner_->samples_started() > 0 ? d.rho : requested_rho_},
             {"rho_requested", requested_rho_},
             {"scenario", scenario},
             {"limits", limits_json(track_, s.p, stopping)},
             {"front", std::move(front)},
             {"selected", selected}};
    return msg.dump();
}

std::string Session::finished_message() const {
    const DriveLog& log = runner_->log();
    json stops = json::array();
    for (const auto& r : log.stops) {
        stops.push_back({{"sign", r.sign}, {"position", r.position}});
    }
    json totals{{"J1", log.totals.j1},
                {"J2", log.totals.j2},
                {"wheel_energy", log.wheel_energy},
                {"samples", log.samples.size()},
                {"stops", std::move(stops)}};
    json msg{{"v", schema_version}, {"type", "finished"}, {"totals", std::move(totals)}};
    if (failure_) {
        msg["error"] = *failure_;
    }
    return msg.dump();
}

std::vector<std::string> replay_messages(const DriveLog& log, const Track* track) {
    std::vector<std::string> out;
    out.reserve(log.samples.size());
    for (const auto& s : log.samples) {
        json limits = nullptr;
        if (track != nullptr) {
            limits = limits_json(*track, s.p, s.scenario.rfind("stop", 0) == 0);
        }
        out.push_back(json{{"v", schema_version},
                           {"type", "state"},
                           {"phase", "replay"},
                           {"t", s.t},
                           {"p", s.p},
                           {"v_kmh", s.v_kmh},
                           {"S", s.soc},
                           {"u", s.u},
                           {"I", std::isfinite(s.current) ? json(s.current) : json(nullptr)},
                           {"rho", s.rho},
                           {"scenario", s.scenario},
                           {"limits", std::move(limits)},
                           {"front", json::array()},
                           {"selected", -1}}
                          .dump());
    }
    return out;
}

}  // namespace mompc::service
