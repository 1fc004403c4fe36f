#pragma once

#include <cmath>
#include <span>
#include <string_view>
#include <variant>

#include "mompc/pareto.hpp"
#include "mompc/scenario.hpp"
#include "mompc/vehicle_model.hpp"

namespace mompc {

struct SolverConfig {
    int n_points = 20;
    /// Spacing of consecutive targets along the front in normalized space.
    double front_step = std::sqrt(2.0) / 19.0;
    /// Offset of a target point off the front, toward the utopia point.
    double target_offset = 0.05;
    int coarse_grid = 201;
    /// Control tolerance as a fraction of (torque_max - torque_min).
    double refine_tol_fraction = 1e-3;
    /// Prediction horizon for the non-stop cases [m].
    double horizon = 100.0;
    /// Accepted early stop before the stop position [m].
    double stop_tolerance = 0.02;
    /// Initial state of charge used for library problems.
    double nominal_soc = 0.8;
    IntegratorConfig integrator{};
    /// Internal units the search works in (objective multipliers). Results are
    /// reported in the natural units regardless.
    double j1_unit = 1.0;
    double j2_unit = 1.0;

    double refine_tol(const ModelParams& params) const {
        return refine_tol_fraction * (params.torque_max - params.torque_min);
    }

    /// Throws ConfigError on invalid values.
    void validate() const;
    std::vector<std::pair<std::string, double>> named_values() const;

    friend bool operator==(const SolverConfig&, const SolverConfig&) = default;
};

/// Applies `name = number` overrides (names as in named_values()).
SolverConfig solver_config_from(const std::vector<KeyValue>& entries);

/// One open-loop problem: scenario envelope plus the initial state it starts from.
struct Mocp {
    Scenario scenario;
    VehicleState x0;
    ModelParams params;
    SolverConfig config;
};

/// Library problem: starts at rest in the non-velocity states with the
/// configured nominal state of charge.
Mocp make_mocp(const Scenario& scenario, const ModelParams& params, const SolverConfig& config);

enum class Violation {
    VelocityUpper,
    VelocityLower,
    CurrentUpper,
    CurrentLower,
    PowerLimit,
    HorizonNotReached,
    StopOvershoot,
    StopShort,
};

std::string_view to_string(Violation v);

/// True when the violation is cured by less torque. The feasible controls of
/// every scenario form an interval, so this orients bisection.
bool needs_less_torque(Violation v);

struct Infeasible {
    Violation kind;
    double position;  ///< relative position of the first violation [m]
};

using Evaluation = std::variant<ObjectivePoint, Infeasible>;

/// Integrates the scenario horizon under constant u, checking the velocity
/// envelope and current bounds at every integrator sample.
Evaluation evaluate_objectives(const Mocp& problem, ControlSignal u);

/// Utopia / nadir bounds from the two scalar minima; maps into [0, 1]^2.
struct Normalization {
    ObjectivePoint utopia;
    ObjectivePoint nadir;

    double scale1() const;
    double scale2() const;
    ObjectivePoint apply(const ObjectivePoint& p) const;
};

struct TargetPoint {
    double j1 = 0.0;  ///< normalized
    double j2 = 0.0;  ///< normalized
};

enum class Objective { Energy = 0, Time = 1 };

/// Coarse grid over the torque range, then golden-section refinement.
/// Throws NoFeasibleControl when the feasible set is empty.
ParetoEntry scalar_minimize(const Mocp& problem, Objective objective);

/// Minimizes the normalized distance to `target`, warm-started at the secant
/// predictor from the last two entries. Throws FrontExhausted when the result
/// is within refine_tol of the last entry, NoFeasibleControl on an empty set.
ParetoEntry reference_point_step(std::span<const ParetoEntry> previous, const TargetPoint& target,
                                 const Mocp& problem, const Normalization& normalization);

/// Next target from the last normalized point and the unit tangent.
TargetPoint next_target(const ObjectivePoint& last_normalized, double tangent1, double tangent2,
                        const SolverConfig& config);

struct FrontSolution {
    ParetoSet front;
    Normalization normalization;
};

/// Reference-point continuation from the time minimum to the energy minimum.
FrontSolution solve_mocp_detailed(const Mocp& problem);
ParetoSet solve_mocp(const Mocp& problem);

/// Validation oracle: evaluates `grid_size` equally spaced controls and
/// filters the feasible ones. Throws NoFeasibleControl if none is feasible.
ParetoSet brute_force_front(const Mocp& problem, int grid_size);

}  // namespace mompc
