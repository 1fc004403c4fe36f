#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mompc/mpc_controller.hpp"

namespace mompc::service {

inline constexpr int schema_version = 1;

enum class Phase { Idle, Driving, Paused, Finished };
std::string_view to_string(Phase p);

struct SessionOptions {
    double rho0 = 0.5;
    double speed = 1.0;      ///< simulated seconds per wall second
    std::string log_path;    ///< DriveLog CSV written on finish when non-empty
    bool autostart = true;
};

/// One drive driven by client messages. Not thread-safe; the service loop
/// owns it and feeds it messages between integrator ticks.
class Session {
public:
    using TrackLoader = std::function<Track(const std::string&)>;

    Session(const Library& library, Track track, ModelParams plant, MpcConfig config, SessionOptions options = {});
    Session(const Session&) = delete;
    Session& operator=(const Session&) = delete;

    /// Applies one client message. Returns the replies for the sender: a
    /// `state` acknowledgement or an `error`.
    std::vector<std::string> handle(std::string_view text);

    /// Advances one integrator step while driving. Returns true when an MPC
    /// sample started during this step.
    bool tick();

    Phase phase() const noexcept { return phase_; }
    double speed() const noexcept { return speed_; }
    double requested_rho() const noexcept { return requested_rho_; }
    double sim_time() const;
    const DriveRunner& runner() const { return *runner_; }
    /// (sample start position, rho) for every MPC sample so far.
    const std::vector<std::pair<double, double>>& latched() const noexcept { return latched_; }
    /// Set when the drive stopped on an error (stall, no feasible scenario).
    const std::optional<std::string>& failure() const noexcept { return failure_; }

    std::string state_message() const;
    std::string finished_message() const;

    /// Track files named by `reset{track}` are read through this hook
    /// (load_track by default).
    void set_track_loader(TrackLoader loader) { loader_ = std::move(loader); }

private:
    void restart();

    const Library& library_;
    Track track_;
    ModelParams plant_;
    MpcConfig config_;
    SessionOptions options_;
    std::optional<DriveRunner> runner_;
    Phase phase_ = Phase::Idle;
    double requested_rho_;
    double speed_;
    std::vector<std::pair<double, double>> latched_;
    std::optional<std::string> failure_;
    TrackLoader loader_;
};

std::string error_message(std::string_view text);

/// `state` messages for every row of a recorded drive; no controller involved.
std::vector<std::string> replay_messages(const DriveLog& log, const Track* track = nullptr);

}  // namespace mompc::service
