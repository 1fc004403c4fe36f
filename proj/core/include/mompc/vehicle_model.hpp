#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mompc/key_value.hpp"

namespace mompc {

/// The four ODE states plus the two integrated bookkeeping coordinates.
struct VehicleState {
    double v = 0.0;     ///< velocity [m/s]
    double soc = 0.0;   ///< state of charge [0, 1]
    double u_dl = 0.0;  ///< long-term RC voltage drop [V]
    double u_ds = 0.0;  ///< short-term RC voltage drop [V]
    double p = 0.0;     ///< position [m]
    double t = 0.0;     ///< time [s]

    friend bool operator==(const VehicleState&, const VehicleState&) = default;
};

/// Front-wheel torque [N m], held constant over one prediction horizon.
struct ControlSignal {
    double torque = 0.0;

    friend auto operator<=>(const ControlSignal&, const ControlSignal&) = default;
};

/// Surrogate EV: quadratic road load plus a Thevenin battery with two RC links
/// and an affine open-circuit voltage U_oc(S) = u_oc0 + u_oc1 * S.
struct ModelParams {
    double mass = 1200.0;          // kg
    double wheel_radius = 0.3;     // m
    double c0 = 150.0;             // N
    double c1 = 1.5;               // N s/m
    double c2 = 0.4;               // N s^2/m^2
    double capacity_ah = 60.0;     // Ah
    double u_oc0 = 320.0;          // V
    double u_oc1 = 40.0;           // V
    double r0 = 0.1;               // Ohm
    double r_long = 0.05;          // Ohm
    double tau_long = 60.0;        // s
    double r_short = 0.02;         // Ohm
    double tau_short = 5.0;        // s
    double eta_drive = 0.9;
    double eta_regen = 0.85;
    double torque_min = -400.0;    // N m
    double torque_max = 400.0;     // N m
    double current_min = -150.0;   // A
    double current_max = 200.0;    // A

    /// Throws ConfigError when a physical invariant does not hold.
    void validate() const;

    /// Ordered (name, value) pairs; the names are the config-file keys.
    std::vector<std::pair<std::string, double>> named_values() const;

    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Applies `name = number` overrides on top of the defaults. Unknown names are
/// a FormatError so that typos do not silently fall back to defaults.
ModelParams model_params_from(const std::vector<KeyValue>& entries);
ModelParams load_model_params(const std::string& path);

struct StateDerivative {
    double dv = 0.0;
    double dsoc = 0.0;
    double du_dl = 0.0;
    double du_ds = 0.0;
    double dp = 0.0;
};

double open_circuit_voltage(double soc, const ModelParams& params);

/// Road load c0*[v>0] + c1*v + c2*v^2 for v >= 0.
double resistive_force(double v, const ModelParams& params);

/// Power drawn at the battery terminals for a given wheel power: drive losses
/// scale up, regeneration is recovered at eta_regen.
double battery_power(double wheel_power, const ModelParams& params);

/// Physical (smaller-magnitude) root of R0 I^2 - U_eff I + P_batt = 0.
/// Throws InfeasiblePower when the discriminant is negative or U_eff <= 0.
double battery_current(const VehicleState& state, ControlSignal u, const ModelParams& params);

StateDerivative derivatives(const VehicleState& state, ControlSignal u, const ModelParams& params);

struct TrajectorySample {
    VehicleState state;
    ControlSignal u;
    double current = 0.0;
};

struct IntegratorConfig {
    double step = 0.01;   // s
    double t_cap = 120.0; // s, per horizon

    friend bool operator==(const IntegratorConfig&, const IntegratorConfig&) = default;
};

/// One fixed RK4 step with v clamped at zero from below.
VehicleState rk4_step(const VehicleState& state, ControlSignal u, const ModelParams& params, double dt);

/// Same as rk4_step but without the clamp; used for crossing detection.
VehicleState rk4_step_unclamped(const VehicleState& state, ControlSignal u, const ModelParams& params,
                                double dt);

/// Componentwise linear blend a + theta (b - a).
VehicleState lerp(const VehicleState& a, const VehicleState& b, double theta);

struct Horizon {
    std::vector<TrajectorySample> samples;
    double t_f = 0.0;  ///< elapsed time to reach p_f (relative to x0.t)
};

/// Integrates under constant u until p - x0.p reaches p_f. The last sample is
/// interpolated inside the crossing step. Throws HorizonNotReached after t_cap.
Horizon integrate_horizon(const VehicleState& x0, ControlSignal u, double p_f, const ModelParams& params,
                          const IntegratorConfig& config = {});

}  // namespace mompc
