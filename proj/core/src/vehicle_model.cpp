#include "mompc/vehicle_model.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "mompc/errors.hpp"
#include "mompc/integrator.hpp"

namespace mompc {

namespace {

// Single source of truth for config-file names.
template <class Params, class Fn>
void for_each_field(Params& p, Fn&& fn) {
    fn("mass", p.mass);
    fn("wheel_radius", p.wheel_radius);
    fn("c0", p.c0);
    fn("c1", p.c1);
    fn("c2", p.c2);
    fn("capacity_ah", p.capacity_ah);
    fn("u_oc0", p.u_oc0);
    fn("u_oc1", p.u_oc1);
    fn("r0", p.r0);
    fn("r_long", p.r_long);
    fn("tau_long", p.tau_long);
    fn("r_short", p.r_short);
    fn("tau_short", p.tau_short);
    fn("eta_drive", p.eta_drive);
    fn("eta_regen", p.eta_regen);
    fn("torque_min", p.torque_min);
    fn("torque_max", p.torque_max);
    fn("current_min", p.current_min);
    fn("current_max", p.current_max);
}

}  // namespace

void ModelParams::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) {
            throw ConfigError(std::string("invalid model parameters: ") + what);
        }
    };
    require(mass > 0 && wheel_radius > 0 && capacity_ah > 0, "mass, wheel_radius, capacity_ah must be > 0");
    require(tau_long > 0 && tau_short > 0, "time constants must be > 0");
    require(r0 > 0 && r_long >= 0 && r_short >= 0, "resistances must be nonnegative, r0 > 0");
    require(c0 >= 0 && c1 >= 0 && c2 >= 0, "resistance coefficients must be nonnegative");
    require(eta_drive > 0 && eta_drive <= 1 && eta_regen > 0 && eta_regen <= 1, "efficiencies must be in (0, 1]");
    require(torque_min < 0 && torque_max > 0, "torque bounds must satisfy u_min < 0 < u_max");
    require(current_min < 0 && current_max > 0, "current bounds must satisfy I_min < 0 < I_max");
}

std::vector<std::pair<std::string, double>> ModelParams::named_values() const {
    std::vector<std::pair<std::string, double>> out;
    ModelParams copy = *this;
    for_each_field(copy, [&](const char* name, double& value) { out.emplace_back(name, value); });
    return out;
}

ModelParams model_params_from(const std::vector<KeyValue>& entries) {
    ModelParams params;
    std::map<std::string, double*> fields;
    for_each_field(params, [&](const char* name, double& value) { fields[name] = &value; });
    for (const auto& kv : entries) {
        const auto it = fields.find(kv.key);
        if (it == fields.end()) {
            throw FormatError(kv.line, "unknown model parameter '" + kv.key + "'");
        }
        *it->second = parse_number(kv.value, kv.line);
    }
    params.validate();
    return params;
}

ModelParams load_model_params(const std::string& path) {
    return model_params_from(read_key_value_file(path));
}

double open_circuit_voltage(double soc, const ModelParams& params) {
    return params.u_oc0 + params.u_oc1 * soc;
}

double resistive_force(double v, const ModelParams& params) {
    if (v <= 0.0) {
        return 0.0;
    }
    return params.c0 + params.c1 * v + params.c2 * v * v;
}

double battery_power(double wheel_power, const ModelParams& params) {
    return wheel_power >= 0.0 ? wheel_power / params.eta_drive : params.eta_regen * wheel_power;
}

double battery_current(const VehicleState& state, ControlSignal u, const ModelParams& params) {
    const double u_eff = open_circuit_voltage(state.soc, params) - state.u_dl - state.u_ds;
    if (u_eff <= 0.0) {
        throw InfeasiblePower("effective terminal voltage is not positive");
    }
    const double wheel_power = u.torque / params.wheel_radius * std::max(state.v, 0.0);
    const double p_batt = battery_power(wheel_power, params);
    const double disc = u_eff * u_eff - 4.0 * params.r0 * p_batt;
    if (disc < 0.0) {
        throw InfeasiblePower("demanded power exceeds what the battery can deliver");
    }
    // Cancellation-free form of (U - sqrt(disc)) / (2 R0).
    return 2.0 * p_batt / (u_eff + std::sqrt(disc));
}

StateDerivative derivatives(const VehicleState& state, ControlSignal u, const ModelParams& params) {
    const double v = std::max(state.v, 0.0);
    const double current = battery_current(state, u, params);
    StateDerivative d;
    d.dv = (u.torque / params.wheel_radius - resistive_force(v, params)) / params.mass;
    d.dsoc = -current / (3600.0 * params.capacity_ah);
    d.du_dl = (params.r_long * current - state.u_dl) / params.tau_long;
    d.du_ds = (params.r_short * current - state.u_ds) / params.tau_short;
    d.dp = v;
    return d;
}

namespace {

VehicleState advance(const VehicleState& x, const StateDerivative& d, double h) {
    VehicleState y = x;
    y.v += h * d.dv;
    y.soc += h * d.dsoc;
    y.u_dl += h * d.du_dl;
    y.u_ds += h * d.du_ds;
    y.p += h * d.dp;
    y.t += h;
    return y;
}

}  // namespace

VehicleState rk4_step_unclamped(const VehicleState& x, ControlSignal u, const ModelParams& params, double dt) {
    const StateDerivative k1 = derivatives(x, u, params);
    const StateDerivative k2 = derivatives(advance(x, k1, 0.5 * dt), u, params);
    const StateDerivative k3 = derivatives(advance(x, k2, 0.5 * dt), u, params);
    const StateDerivative k4 = derivatives(advance(x, k3, dt), u, params);
    VehicleState y = x;
    const double w = dt / 6.0;
    y.v += w * (k1.dv + 2.0 * k2.dv + 2.0 * k3.dv + k4.dv);
    y.soc += w * (k1.dsoc + 2.0 * k2.dsoc + 2.0 * k3.dsoc + k4.dsoc);
    y.u_dl += w * (k1.du_dl + 2.0 * k2.du_dl + 2.0 * k3.du_dl + k4.du_dl);
    y.u_ds += w * (k1.du_ds + 2.0 * k2.du_ds + 2.0 * k3.du_ds + k4.du_ds);
    y.p += w * (k1.dp + 2.0 * k2.dp + 2.0 * k3.dp + k4.dp);
    y.t = x.t + dt;
    return y;
}

VehicleState rk4_step(const VehicleState& state, ControlSignal u, const ModelParams& params, double dt) {
    VehicleState next = rk4_step_unclamped(state, u, params, dt);
    next.v = std::max(next.v, 0.0);
    return next;
}

VehicleState lerp(const VehicleState& a, const VehicleState& b, double theta) {
    auto mix = [theta](double x, double y) { return x + theta * (y - x); };
    return {mix(a.v, b.v), mix(a.soc, b.soc), mix(a.u_dl, b.u_dl), mix(a.u_ds, b.u_ds), mix(a.p, b.p), mix(a.t, b.t)};
}

Horizon integrate_horizon(const VehicleState& x0, ControlSignal u, double p_f, const ModelParams& params,
                          const IntegratorConfig& config) {
    if (!(p_f > 0.0) || !(config.step > 0.0)) {
        throw Error("integrate_horizon: p_f and step must be positive");
    }
    Horizon h;
    h.samples.push_back({x0, u, battery_current(x0, u, params)});
    const double p0 = x0.p;
    const auto end = propagate(
        x0, u, params, config.step, config.t_cap, [&](const VehicleState& s) { return (s.p - p0) - p_f; },
        [&](const VehicleState& s, bool) {
            h.samples.push_back({s, u, battery_current(s, u, params)});
            return true;
        });
    if (end != PropagationEnd::Event) {
        throw HorizonNotReached("horizon of " + format_decimal(p_f) + " m not reached within " +
                                format_decimal(config.t_cap) + " s");
    }
    h.t_f = h.samples.back().state.t - x0.t;
    return h;
}

}  // namespace mompc
