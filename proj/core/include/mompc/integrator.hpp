#pragma once

#include <algorithm>

#include "mompc/vehicle_model.hpp"

namespace mompc {

enum class PropagationEnd { Event, Aborted, TimeCap };

/// Fixed-step RK4 under a constant control with terminal-event detection.
///
/// `event(state)` is evaluated on the unclamped step result; the run ends at
/// the first step where it becomes >= 0, and the final state is linearly
/// interpolated inside that step. `visit(state, is_final)` sees every stored
/// state after x0 and may return false to abort. The run is capped at
/// `t_budget` seconds of simulated time.
template <class Event, class Visit>
PropagationEnd propagate(VehicleState x, ControlSignal u, const ModelParams& params, double step,
                         double t_budget, Event&& event, Visit&& visit) {
    const double t_start = x.t;
    double g_prev = event(x);
    if (g_prev >= 0.0) {
        return PropagationEnd::Event;
    }
    while (x.t - t_start < t_budget) {
        VehicleState next = rk4_step_unclamped(x, u, params, step);
        const double g_next = event(next);
        if (g_next >= 0.0) {
            const double theta = g_prev / (g_prev - g_next);
            VehicleState hit = lerp(x, next, std::clamp(theta, 0.0, 1.0));
            hit.v = std::max(hit.v, 0.0);
            visit(hit, true);
            return PropagationEnd::Event;
        }
        next.v = std::max(next.v, 0.0);
        if (!visit(next, false)) {
            return PropagationEnd::Aborted;
        }
        x = next;
        g_prev = g_next;
    }
    return PropagationEnd::TimeCap;
}

}  // namespace mompc
