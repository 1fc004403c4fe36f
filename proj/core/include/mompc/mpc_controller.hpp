#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "mompc/key_value.hpp"
#include "mompc/pareto.hpp"
#include "mompc/scenario.hpp"
#include "mompc/scenario_library.hpp"
#include "mompc/track.hpp"
#include "mompc/vehicle_model.hpp"

namespace mompc {

struct HeuristicConfig {
    double rho_hi = 0.9;
    double rho_lo = 0.2;
    double v_lo = 0.3;       ///< fraction of v_max below which rho = rho_hi
    double v_hi = 0.9;       ///< fraction of v_max above which rho = rho_lo
    double window = 100.0;   ///< braking-approach window [m]
};

struct MpcConfig {
    double sample_distance = 20.0;  ///< delta [m]
    double lookahead = 100.0;       ///< [m]
    double accel_ramp = 0.05;       ///< a_min [(km/h)/m]
    double stop_ramp = 0.5;         ///< a_dec [(km/h)/m]
    /// Decelerate ramps available for selection; replaced by the library's set.
    std::vector<double> decel_ramps{0.05, 0.1, 0.2};
    /// Library velocity step; replaced by the library's grid.
    double v_step = 0.1;
    double stop_dwell = 0.0;        ///< [s]
    double initial_soc = 0.8;
    IntegratorConfig integrator{};
    HeuristicConfig heuristic{};

    /// Throws ConfigError.
    void validate() const;
};

/// `name = value` overrides: sample_distance, lookahead, accel_ramp,
/// stop_ramp, stop_dwell, initial_soc, integrator_step, integrator_t_cap and
/// heuristic.{rho_hi, rho_lo, v_lo, v_hi, window}. Throws FormatError.
MpcConfig mpc_config_from(const std::vector<KeyValue>& entries);

/// Stop signs already passed are skipped through `stops_served`.
///
/// Stop: the next stop sign lies within the lookahead and the vehicle has
/// reached its braking line v^2 >= a_dec * d * v_grid, where v_grid is v
/// rounded up to the library step (the stop control from v_grid halts the
/// vehicle after d when applied at v).
/// Decelerate: the limit falls within the lookahead, or v > v_max.
/// Accelerate: the limit rises within the lookahead, or v < 0.8 v_max.
/// ConstantVelocity otherwise. Priority in that order.
Scenario classify_scenario(const Track& track, double p, double v_kmh, const MpcConfig& config,
                           std::size_t stops_served = 0);

/// Weighted sum rho * J2^ + (1 - rho) * J1^ over the front's own min-max
/// normalization; ties go to the smaller J2. Returns the entry index.
/// Throws EmptyFront.
std::size_t select_compromise(const ParetoSet& front, double rho);

/// Velocity-dependent preference with a linear ramp toward rho_lo inside the
/// braking window before the next stop or limit drop.
double heuristic_rho(const VehicleState& state, const Track& track, const HeuristicConfig& config,
                     std::size_t stops_served = 0);

struct DriveSample {
    double t = 0.0;
    double p = 0.0;
    double v_kmh = 0.0;
    double soc = 0.0;
    double u = 0.0;
    double current = 0.0;
    double rho = 0.0;
    std::string scenario;

    friend bool operator==(const DriveSample&, const DriveSample&) = default;
};

struct StopRecord {
    double sign = 0.0;      ///< stop-sign position [m]
    double position = 0.0;  ///< where the vehicle came to rest [m]
};

struct DriveLog {
    std::vector<DriveSample> samples;
    ObjectivePoint totals;          ///< (S(0) - S(end), t_end)
    double wheel_energy = 0.0;      ///< [J], efficiency-weighted wheel work
    std::vector<StopRecord> stops;
    std::vector<std::string> warnings;

    friend bool operator==(const DriveLog& a, const DriveLog& b) {
        return a.samples == b.samples && a.totals == b.totals && a.wheel_energy == b.wheel_energy;
    }
};

/// Battery-side energy of a wheel-force step: drive losses scale up,
/// regeneration is recovered at eta_regen.
double wheel_energy_step(double force, double distance, const ModelParams& params);

/// CSV with header `t,p,v_kmh,S,u,I,rho,scenario`.
void write_drive_log(const DriveLog& log, std::ostream& out);
void write_drive_log(const DriveLog& log, const std::string& path);
/// Reads the samples back; totals are taken from the first/last rows and the
/// wheel energy is recomputed with `params`. Throws FormatError naming the row.
DriveLog read_drive_log(std::istream& in, const ModelParams& params = {});
DriveLog read_drive_log(const std::string& path, const ModelParams& params = {});

/// What the controller decided at the start of an MPC sample.
struct MpcDecision {
    Scenario classified;
    const LibraryEntry* entry = nullptr;
    std::size_t selected = 0;
    ControlSignal u;
    double rho = 0.0;
    bool clamped = false;
    bool fallback = false;
};

struct DriveContext {
    const VehicleState& state;
    const Track& track;
    std::size_t stops_served;
};

using RhoPolicy = std::function<double(const DriveContext&)>;

RhoPolicy fixed_rho(double rho);
/// Piecewise-constant schedule: the rho of the last entry with position <= p.
RhoPolicy scheduled_rho(std::vector<std::pair<double, double>> schedule);
RhoPolicy heuristic_rho_policy(HeuristicConfig config);

/// `<position_m> <rho>` lines, '#' comments.
std::vector<std::pair<double, double>> parse_rho_schedule(std::istream& in);
std::vector<std::pair<double, double>> load_rho_schedule(const std::string& path);

struct Perturbation {
    double position = 0.0;  ///< applied at the first integrator step at or after this position
    double dv_kmh = 0.0;
};

/// Receding-horizon drive, advanced one integrator step at a time so that a
/// service can interleave I/O. Starts at rest at p = 0.
class DriveRunner {
public:
    DriveRunner(const Track& track, const Library& library, ModelParams plant, MpcConfig config);

    /// True when a new MPC sample starts at the next tick (rho is latched then).
    bool at_sample_boundary() const noexcept { return !active_; }
    bool finished() const noexcept { return finished_; }

    /// One integrator step. `rho` is used only if a sample starts here.
    /// Throws NoFeasibleScenario or StallDetected with position context.
    void tick(double rho);

    /// Applies a velocity disturbance to the plant state (feedback test hook).
    void perturb(double dv_kmh);

    const VehicleState& state() const noexcept { return state_; }
    const MpcDecision& decision() const noexcept { return decision_; }
    const DriveLog& log() const noexcept { return log_; }
    std::size_t stops_served() const noexcept { return stops_served_; }
    std::size_t samples_started() const noexcept { return samples_started_; }
    const Track& track() const noexcept { return track_; }
    const MpcConfig& config() const noexcept { return config_; }

private:
    void plan(double rho);
    void record(const VehicleState& s);
    void finish();

    const Track& track_;
    const Library& library_;
    ModelParams plant_;
    MpcConfig config_;
    VehicleState state_;
    MpcDecision decision_;
    DriveLog log_;
    bool active_ = false;
    bool finished_ = false;
    bool stopping_ = false;
    bool stop_engaged_ = false;
    double sample_start_p_ = 0.0;
    double sample_start_t_ = 0.0;
    std::size_t stops_served_ = 0;
    std::size_t samples_started_ = 0;
    std::string scenario_label_;
};

struct RunOptions {
    std::vector<Perturbation> perturbations;
};

DriveLog run_drive(const Track& track, const RhoPolicy& policy, const Library& library, const ModelParams& plant,
                   const MpcConfig& config, const RunOptions& options = {});

}  // namespace mompc
