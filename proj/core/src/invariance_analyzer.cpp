#include "mompc/invariance_analyzer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "mompc/errors.hpp"
#include "mompc/units.hpp"

namespace mompc {

std::string_view to_string(StateDimension d) {
    switch (d) {
        case StateDimension::Position: return "p";
        case StateDimension::Soc: return "S";
        case StateDimension::Velocity: return "v";
        case StateDimension::LongDrop: return "U_dL";
        case StateDimension::ShortDrop: return "U_dS";
    }
    return "?";
}

StateDimension state_dimension_from_string(std::string_view name) {
    for (auto d : {StateDimension::Position, StateDimension::Soc, StateDimension::Velocity, StateDimension::LongDrop,
                   StateDimension::ShortDrop}) {
        if (to_string(d) == name) {
            return d;
        }
    }
    throw Error("unknown state dimension '" + std::string(name) + "' (expected p, S, v, U_dL or U_dS)");
}

std::string_view to_string(Verdict v) {
    switch (v) {
        case Verdict::Invariant: return "invariant";
        case Verdict::NearInvariant: return "near-invariant";
        case Verdict::NotInvariant: return "not-invariant";
    }
    return "?";
}

VehicleState apply_action(const VehicleState& x, const GroupAction& action) {
    VehicleState y = x;
    switch (action.dimension) {
        case StateDimension::Position: y.p += action.delta; break;
        case StateDimension::Soc: y.soc += action.delta; break;
        case StateDimension::Velocity: y.v += action.delta; break;
        case StateDimension::LongDrop: y.u_dl += action.delta; break;
        case StateDimension::ShortDrop: y.u_ds += action.delta; break;
    }
    if (y.soc < 0.0 || y.soc > 1.0 || y.v < 0.0) {
        throw Error("translated state leaves the state space");
    }
    return y;
}

namespace {

Verdict flow_verdict(double deviation, const InvarianceConfig& c) {
    if (deviation <= c.invariant_threshold) {
        return Verdict::Invariant;
    }
    return deviation <= c.near_flow_threshold ? Verdict::NearInvariant : Verdict::NotInvariant;
}

}  // namespace

FlowCheck check_flow_invariance(const VehicleState& x0, const GroupAction& action, ControlSignal u, double p_f,
                                const ModelParams& params, const InvarianceConfig& config) {
    const Horizon a = integrate_horizon(x0, u, p_f, params, config.integrator);
    const Horizon b = integrate_horizon(apply_action(x0, action), u, p_f, params, config.integrator);
    FlowCheck check;
    check.samples = std::min(a.samples.size(), b.samples.size()) - 1;
    for (std::size_t i = 0; i < check.samples; ++i) {
        const VehicleState shifted = apply_action(a.samples[i].state, action);
        const VehicleState& other = b.samples[i].state;
        const double d = std::max({std::abs(shifted.v - other.v) / config.v_scale,
                                   std::abs(shifted.soc - other.soc) / config.soc_scale,
                                   std::abs(shifted.u_dl - other.u_dl) / config.voltage_scale,
                                   std::abs(shifted.u_ds - other.u_ds) / config.voltage_scale,
                                   std::abs(shifted.p - other.p) / p_f});
        check.deviation = std::max(check.deviation, d);
    }
    check.verdict = flow_verdict(check.deviation, config);
    return check;
}

SolutionCheck check_solution_invariance(const Scenario& scenario, const GroupAction& action, const ModelParams& params,
                                        const SolverConfig& solver, const InvarianceConfig& config) {
    const Mocp base = make_mocp(scenario, params, solver);
    Mocp moved = base;
    moved.x0 = apply_action(base.x0, action);
    if (action.dimension == StateDimension::Velocity) {
        moved.scenario = Scenario::make(scenario.kase(), mps_to_kmh(moved.x0.v), scenario.vlim_kmh(), scenario.ramp());
        moved.x0.v = kmh_to_mps(moved.scenario.v0_kmh());
    }
    ParetoSet fa, fb;
    try {
        fa = solve_mocp(base);
        fb = solve_mocp(moved);
    } catch (const NoFeasibleControl& e) {
        throw NotComparable(std::string("cannot compare fronts: ") + e.what());
    }
    const ParetoSet& small = fa.size() <= fb.size() ? fa : fb;
    const ParetoSet& large = fa.size() <= fb.size() ? fb : fa;
    SolutionCheck check;
    check.matched = small.size();
    for (std::size_t i = 0; i < small.size(); ++i) {
        const std::size_t j =
            small.size() == 1 ? 0
                              : static_cast<std::size_t>(std::lround(static_cast<double>(i) * (large.size() - 1) /
                                                                     (small.size() - 1)));
        check.deviation = std::max(check.deviation, std::abs(small.entries[i].u.torque - large.entries[j].u.torque));
    }
    const double tol = solver.refine_tol(params);
    if (check.deviation <= config.invariant_threshold) {
        check.verdict = Verdict::Invariant;
    } else if (check.deviation <= config.near_solution_factor * tol) {
        check.verdict = Verdict::NearInvariant;
    } else {
        check.verdict = Verdict::NotInvariant;
    }
    return check;
}

std::vector<InvarianceRow> invariance_report(const Scenario& scenario, ControlSignal u,
                                             const std::vector<GroupAction>& actions, const ModelParams& params,
                                             const SolverConfig& solver, const InvarianceConfig& config) {
    const Mocp base = make_mocp(scenario, params, solver);
    std::vector<InvarianceRow> rows;
    for (const auto& a : actions) {
        rows.push_back({a, check_flow_invariance(base.x0, a, u, solver.horizon, params, config),
                        check_solution_invariance(scenario, a, params, solver, config)});
    }
    return rows;
}

void write_invariance_table(const std::vector<InvarianceRow>& rows, std::ostream& out) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-6s %10s %14s %-15s %14s %-15s\n", "action", "delta", "flow_dev", "flow",
                  "argmin_dev", "solution");
    out << buf;
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%-6s %10.4g %14.6e %-15s %14.6e %-15s\n",
                      std::string(to_string(r.action.dimension)).c_str(), r.action.delta, r.flow.deviation,
                      std::string(to_string(r.flow.verdict)).c_str(), r.solution.deviation,
                      std::string(to_string(r.solution.verdict)).c_str());
        out << buf;
    }
}

void write_invariance_csv(const std::vector<InvarianceRow>& rows, std::ostream& out) {
    out << "action,delta,flow_deviation,flow_verdict,argmin_deviation,solution_verdict\n";
    for (const auto& r : rows) {
        out << to_string(r.action.dimension) << ',' << format_decimal(r.action.delta) << ','
            << format_decimal(r.flow.deviation) << ',' << to_string(r.flow.verdict) << ','
            << format_decimal(r.solution.deviation) << ',' << to_string(r.solution.verdict) << '\n';
    }
}

}  // namespace mompc
