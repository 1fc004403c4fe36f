#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mompc/mpc_controller.hpp"
#include "mompc/track.hpp"
#include "mompc/vehicle_model.hpp"

namespace mompc {

struct DpConfig {
    double beta = 6e-5;        ///< energy weight [s/J]
    int stage_count = 100;
    double v_step = 0.5;       ///< velocity node spacing [km/h]
    /// Lower corridor bound min(0.8 v_max(p), accel_ramp * p) lets the
    /// profile leave the standing start.
    double accel_ramp = 0.05;  ///< [(km/h)/m]
    double soc = 0.8;          ///< state of charge for the current-bound check
    ModelParams model{};

    /// Throws ConfigError.
    void validate() const;
};

/// Position stages with velocity nodes [m/s] and per-interval corridors.
struct DpGrid {
    std::vector<double> positions;               ///< stage_count + 1 entries
    std::vector<std::vector<double>> nodes;      ///< per stage
    std::vector<double> interval_lo;             ///< per interval [m/s]
    std::vector<double> interval_hi;             ///< per interval [m/s]
};

struct DpTransition {
    double dt = 0.0;      ///< [s]
    double energy = 0.0;  ///< efficiency-weighted wheel work [J]
    double force = 0.0;   ///< [N]
};

/// Stage k starts at rest; the corridor of interval k is taken at its midpoint.
/// Throws ConfigError when the track has stop signs.
DpGrid make_dp_grid(const Track& track, const DpConfig& config);

/// Constant-acceleration move between adjacent stages, or nullopt when it
/// violates the corridor, the torque bounds or the current bounds.
std::optional<DpTransition> dp_transition(const DpGrid& grid, std::size_t stage, double v_from, double v_to,
                                          const DpConfig& config);

struct DpSolution {
    /// value[k][i]: optimal cost-to-go from node i of stage k (+inf if none).
    std::vector<std::vector<double>> value;
    /// policy[k][i]: successor node index in stage k + 1 (npos at the last stage).
    std::vector<std::vector<std::size_t>> policy;
    std::vector<double> positions;
    std::vector<double> profile_kmh;   ///< optimal velocity per stage
    std::vector<double> forces;        ///< per interval [N]
    double time = 0.0;                 ///< [s]
    double energy = 0.0;               ///< [J]
    double cost = 0.0;                 ///< time + beta * energy
};

/// Backward induction; the path starts at the best stage-0 node. Throws
/// NoFeasiblePath when no chain of admissible transitions spans the grid.
DpSolution solve_dp_grid(const DpGrid& grid, const DpConfig& config);
DpSolution solve_dp(const Track& track, const DpConfig& config);

/// Largest |value - (cost + successor value)| over all nodes.
double bellman_residual(const DpGrid& grid, const DpSolution& solution, const DpConfig& config);

/// The DP profile as a drive log (one row per stage, scenario "dp").
DriveLog dp_to_drive_log(const DpSolution& solution, const ModelParams& model);

struct DpComparison {
    double mpc_time = 0.0;
    double mpc_energy = 0.0;
    double mpc_cost = 0.0;
    double dp_cost = 0.0;
    double gap = 0.0;        ///< mpc_cost - dp_cost
    double relative_gap = 0.0;
    bool comparable = false;  ///< mpc within 5 % of the DP cost
};

/// Weighted cost t_end + beta * E of the log against the DP optimum.
/// Throws TrackMismatch when the log does not span the DP's track.
DpComparison compare(const DriveLog& log, const DpSolution& dp, double beta);

}  // namespace mompc
