#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "mompc/errors.hpp"
#include "mompc/units.hpp"
#include "mompc/vehicle_model.hpp"

using namespace mompc;

namespace {

VehicleState at_speed(double v_mps, double soc = 0.8) {
    VehicleState s;
    s.v = v_mps;
    s.soc = soc;
    return s;
}

// Textbook root of R0 I^2 - U I + P = 0 in long double.
long double reference_current(long double u_eff, long double r0, long double p_batt) {
    return (u_eff - std::sqrt(u_eff * u_eff - 4.0L * r0 * p_batt)) / (2.0L * r0);
}

}  // namespace

TEST(VehicleModel, ResistiveForceAtTenMetresPerSecond) {
    ModelParams p;
    EXPECT_DOUBLE_EQ(resistive_force(10.0, p), 205.0);
    EXPECT_EQ(resistive_force(0.0, p), 0.0);
    EXPECT_EQ(resistive_force(-1.0, p), 0.0);
}

TEST(VehicleModel, SocRateMatchesCoulombCounting) {
    ModelParams p;
    // Pick the torque that draws exactly 36 A at 10 m/s: P = U I - R0 I^2.
    const double current = 36.0;
    const double u_eff = open_circuit_voltage(0.8, p);
    const double p_batt = u_eff * current - p.r0 * current * current;
    const double wheel_power = p_batt * p.eta_drive;
    const double torque = wheel_power / 10.0 * p.wheel_radius;
    const StateDerivative d = derivatives(at_speed(10.0), ControlSignal{torque}, p);
    EXPECT_NEAR(d.dsoc, -1.6666666666666666e-4, 1e-12);
}

TEST(VehicleModel, BatteryCurrentMatchesQuadraticRoot) {
    ModelParams p;
    const VehicleState s = at_speed(kmh_to_mps(60.0));
    const double i = battery_current(s, ControlSignal{100.0}, p);
    const long double wheel = 100.0L / 0.3L * (60.0L / 3.6L);
    const long double expected = reference_current(352.0L, 0.1L, wheel / 0.9L);
    EXPECT_NEAR(i, static_cast<double>(expected), 1e-10);
    EXPECT_NEAR(i, 17.625, 1e-3);

    const double regen = battery_current(s, ControlSignal{-100.0}, p);
    const long double expected_regen = reference_current(352.0L, 0.1L, -wheel * 0.85L);
    EXPECT_NEAR(regen, static_cast<double>(expected_regen), 1e-10);
    EXPECT_LT(regen, 0.0);
}

TEST(VehicleModel, ExcessPowerIsInfeasible) {
    ModelParams p;
    p.u_oc0 = 20.0;
    p.u_oc1 = 0.0;
    EXPECT_THROW(battery_current(at_speed(30.0), ControlSignal{400.0}, p), InfeasiblePower);
    VehicleState s = at_speed(10.0);
    s.u_dl = 400.0;
    EXPECT_THROW(battery_current(s, ControlSignal{10.0}, ModelParams{}), InfeasiblePower);
}

TEST(VehicleModel, EquilibriumCruiseTakesDistanceOverSpeed) {
    ModelParams p;
    const double torque = resistive_force(20.0, p) * p.wheel_radius;
    EXPECT_DOUBLE_EQ(torque, 102.0);
    const Horizon h = integrate_horizon(at_speed(20.0), ControlSignal{torque}, 100.0, p);
    EXPECT_NEAR(h.t_f, 5.0, 1e-9);
    EXPECT_NEAR(h.samples.back().state.p, 100.0, 1e-9);
    EXPECT_NEAR(h.samples.back().state.v, 20.0, 1e-12);
}

TEST(VehicleModel, Rk4ConvergesAtFourthOrder) {
    ModelParams p;
    auto run = [&](double dt) {
        VehicleState s = at_speed(5.0);
        const int steps = static_cast<int>(std::lround(4.0 / dt));
        for (int i = 0; i < steps; ++i) {
            s = rk4_step(s, ControlSignal{300.0}, p, dt);
        }
        return s;
    };
    const VehicleState a = run(0.4);
    const VehicleState b = run(0.2);
    const VehicleState c = run(0.1);
    const double ratio_v = (a.v - b.v) / (b.v - c.v);
    const double ratio_s = (a.u_ds - b.u_ds) / (b.u_ds - c.u_ds);
    EXPECT_NEAR(ratio_v, 16.0, 1.5);
    EXPECT_NEAR(ratio_s, 16.0, 1.5);
}

TEST(VehicleModel, VelocityNeverNegative) {
    ModelParams p;
    VehicleState s = at_speed(1.0);
    for (int i = 0; i < 500; ++i) {
        s = rk4_step(s, ControlSignal{-400.0}, p, 0.01);
        ASSERT_GE(s.v, 0.0);
    }
    EXPECT_EQ(s.v, 0.0);
}

TEST(VehicleModel, PositionTranslationLeavesFlowUnchanged) {
    ModelParams p;
    VehicleState a = at_speed(12.0, 0.6);
    VehicleState b = a;
    b.p = 1234.5;
    const Horizon ha = integrate_horizon(a, ControlSignal{150.0}, 100.0, p);
    const Horizon hb = integrate_horizon(b, ControlSignal{150.0}, 100.0, p);
    ASSERT_EQ(ha.samples.size(), hb.samples.size());
    for (std::size_t i = 0; i + 1 < ha.samples.size(); ++i) {
        const auto& x = ha.samples[i].state;
        const auto& y = hb.samples[i].state;
        EXPECT_EQ(x.v, y.v);
        EXPECT_EQ(x.soc, y.soc);
        EXPECT_EQ(x.u_dl, y.u_dl);
        EXPECT_NEAR(y.p - x.p, 1234.5, 1e-9);
    }
    EXPECT_NEAR(ha.t_f, hb.t_f, 1e-9);
}

TEST(VehicleModel, HorizonNotReachedWhenStalled) {
    ModelParams p;
    EXPECT_THROW(integrate_horizon(at_speed(2.0), ControlSignal{-50.0}, 100.0, p), HorizonNotReached);
}

TEST(VehicleModel, ParamsParseAndRejectUnknownKeys) {
    std::istringstream in("# vehicle\nmass = 1500\nc2 = 0.35\n");
    const ModelParams p = model_params_from(parse_key_values(in));
    EXPECT_EQ(p.mass, 1500.0);
    EXPECT_EQ(p.c2, 0.35);
    EXPECT_EQ(p.c0, 150.0);

    std::istringstream bad("mass = 1500\nmas = 3\n");
    try {
        model_params_from(parse_key_values(bad));
        FAIL() << "expected FormatError";
    } catch (const FormatError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
    std::istringstream invalid("mass = -1\n");
    EXPECT_THROW(model_params_from(parse_key_values(invalid)), ConfigError);
}

TEST(VehicleModel, HalvedStepAgreesToOnePartInAMillion) {
    ModelParams p;
    const VehicleState x0 = at_speed(kmh_to_mps(60.0));
    const Horizon a = integrate_horizon(x0, ControlSignal{200.0}, 100.0, p, {0.01, 120.0});
    const Horizon b = integrate_horizon(x0, ControlSignal{200.0}, 100.0, p, {0.005, 120.0});
    const double ds_a = x0.soc - a.samples.back().state.soc;
    const double ds_b = x0.soc - b.samples.back().state.soc;
    EXPECT_LE(std::abs(a.t_f - b.t_f) / b.t_f, 1e-6);
    EXPECT_LE(std::abs(ds_a - ds_b) / ds_b, 1e-6);
}

TEST(VehicleModel, FinalSampleLandsOnHorizon) {
    ModelParams p;
    for (double u : {-50.0, 0.0, 120.0, 400.0}) {
        VehicleState x0 = at_speed(kmh_to_mps(70.0));
        x0.p = 1234.5;
        const Horizon h = integrate_horizon(x0, ControlSignal{u}, 100.0, p);
        EXPECT_LE(std::abs(h.samples.back().state.p - x0.p - 100.0), 1e-6) << "u=" << u;
        EXPECT_NEAR(h.samples.back().state.t - x0.t, h.t_f, 1e-12);
    }
}

TEST(VehicleModel, VoltageDropsDecayExponentiallyWithoutCurrent) {
    ModelParams p;
    VehicleState s = at_speed(0.0);
    s.u_dl = 5.0;
    s.u_ds = 2.0;
    const double dt = 0.01;
    for (int i = 0; i < 1000; ++i) {
        s = rk4_step(s, ControlSignal{0.0}, p, dt);
    }
    EXPECT_NEAR(s.u_dl, 5.0 * std::exp(-10.0 / p.tau_long), 1e-9);
    EXPECT_NEAR(s.u_ds, 2.0 * std::exp(-10.0 / p.tau_short), 1e-9);
}

TEST(VehicleModel, ChargeFollowsPowerSign) {
    ModelParams p;
    for (double u : {50.0, 300.0}) {
        const Horizon h = integrate_horizon(at_speed(15.0), ControlSignal{u}, 100.0, p);
        for (std::size_t i = 1; i < h.samples.size(); ++i) {
            ASSERT_LE(h.samples[i].state.soc, h.samples[i - 1].state.soc);
        }
    }
    const Horizon regen = integrate_horizon(at_speed(25.0), ControlSignal{-150.0}, 100.0, p);
    for (std::size_t i = 1; i < regen.samples.size(); ++i) {
        ASSERT_GE(regen.samples[i].state.soc, regen.samples[i - 1].state.soc);
    }
}

TEST(VehicleModel, HalvingSequenceConverges) {
    ModelParams p;
    const VehicleState x0 = at_speed(kmh_to_mps(30.0));
    std::vector<Horizon> runs;
    for (double dt : {0.04, 0.02, 0.01}) {
        runs.push_back(integrate_horizon(x0, ControlSignal{350.0}, 100.0, p, {dt, 120.0}));
    }
    const double d1 = std::abs(runs[0].t_f - runs[1].t_f);
    const double d2 = std::abs(runs[1].t_f - runs[2].t_f);
    EXPECT_LE(d2, 4.0 * d1) << d1 << " " << d2;
    const double s1 = std::abs(runs[0].samples.back().state.soc - runs[1].samples.back().state.soc);
    const double s2 = std::abs(runs[1].samples.back().state.soc - runs[2].samples.back().state.soc);
    EXPECT_LE(s2, 4.0 * s1) << s1 << " " << s2;
}
