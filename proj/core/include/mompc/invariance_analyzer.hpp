#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "mompc/mocp_solver.hpp"
#include "mompc/vehicle_model.hpp"

namespace mompc {

enum class StateDimension { Position, Soc, Velocity, LongDrop, ShortDrop };

std::string_view to_string(StateDimension d);
StateDimension state_dimension_from_string(std::string_view name);

/// Translation of one state component by `delta` (component units: m, -, m/s, V, V).
struct GroupAction {
    StateDimension dimension = StateDimension::Position;
    double delta = 0.0;
};

/// Throws Error when the translated state leaves the state space
/// (S outside [0, 1] or negative velocity).
VehicleState apply_action(const VehicleState& x, const GroupAction& action);

enum class Verdict { Invariant, NearInvariant, NotInvariant };
std::string_view to_string(Verdict v);

struct InvarianceConfig {
    double invariant_threshold = 1e-9;
    double near_flow_threshold = 0.02;
    double near_solution_factor = 2.0;  ///< times refine_tol
    double v_scale = 50.0;              ///< m/s
    double soc_scale = 1.0;
    double voltage_scale = 10.0;        ///< V
    IntegratorConfig integrator{};
};

struct FlowCheck {
    double deviation = 0.0;
    std::size_t samples = 0;
    Verdict verdict = Verdict::Invariant;
};

/// Integrates from x0 and from psi(x0) under the same u and compares psi
/// applied to the first run against the second on their common regular time
/// samples (the interpolated final samples are excluded). Components are
/// normalized by the config scales and p by p_f.
FlowCheck check_flow_invariance(const VehicleState& x0, const GroupAction& action, ControlSignal u, double p_f,
                                const ModelParams& params, const InvarianceConfig& config = {});

struct SolutionCheck {
    double deviation = 0.0;  ///< max |u1 - u2| over rank-matched entries [N m]
    std::size_t matched = 0;
    Verdict verdict = Verdict::Invariant;
};

/// Solves the library problem of `scenario` from its nominal state and from
/// the translated state; a velocity action also moves the scenario's v0.
/// Entries are matched by rank along the J2-sorted fronts. Throws
/// NotComparable when either side has no feasible control.
SolutionCheck check_solution_invariance(const Scenario& scenario, const GroupAction& action, const ModelParams& params,
                                        const SolverConfig& solver, const InvarianceConfig& config = {});

struct InvarianceRow {
    GroupAction action;
    FlowCheck flow;
    SolutionCheck solution;
};

/// Report rows for the given actions on one scenario / control.
std::vector<InvarianceRow> invariance_report(const Scenario& scenario, ControlSignal u,
                                             const std::vector<GroupAction>& actions, const ModelParams& params,
                                             const SolverConfig& solver, const InvarianceConfig& config = {});

void write_invariance_table(const std::vector<InvarianceRow>& rows, std::ostream& out);
void write_invariance_csv(const std::vector<InvarianceRow>& rows, std::ostream& out);

}  // namespace mompc
