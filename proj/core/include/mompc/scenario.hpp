#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace mompc {

/// Lower corridor bound relative to the speed limit.
inline constexpr double kMinVelocityRatio = 0.8;

enum class ScenarioCase : std::uint8_t { ConstantVelocity = 0, Accelerate = 1, Decelerate = 2, Stop = 3 };

std::string_view to_string(ScenarioCase c);
/// Accepts the names produced by to_string; throws Error otherwise.
ScenarioCase scenario_case_from_string(std::string_view name);

/// Exact integer key: velocities in centi-km/h, ramps in milli-(km/h)/m.
struct ScenarioKey {
    ScenarioCase kase = ScenarioCase::ConstantVelocity;
    std::int32_t v0_centi = 0;
    std::int32_t vlim_centi = 0;
    std::int32_t ramp_milli = 0;

    friend auto operator<=>(const ScenarioKey&, const ScenarioKey&) = default;
};

/// "case:v0_centi:vlim_centi:ramp_milli", e.g. "accelerate:4820:5000:50".
std::string to_string(const ScenarioKey& key);

std::int32_t quantize_centi(double kmh);
std::int32_t quantize_milli(double ramp);

/// One open-loop situation of the library: an initial velocity class and the
/// velocity envelope imposed over the horizon. Positions `s` are relative to
/// the scenario start, velocities in km/h.
///
///  - ConstantVelocity: box [0.8 v_lim, v_lim].
///  - Accelerate: upper v_lim, lower min(v0 + ramp s, 0.8 v_lim).
///  - Decelerate: upper max(v0 - ramp s, v_lim) when v0 > v_lim else v_lim,
///    lower min(0.8 v_lim, v0).
///  - Stop: the vehicle must come to rest at s = v0 / ramp (the braking line
///    of slope `ramp` through v0); upper max(v0, v_lim), lower 0.
class Scenario {
public:
    Scenario() = default;
    explicit Scenario(ScenarioKey key) : key_(key) {}

    static Scenario make(ScenarioCase c, double v0_kmh, double vlim_kmh, double ramp = 0.0);

    const ScenarioKey& key() const noexcept { return key_; }
    ScenarioCase kase() const noexcept { return key_.kase; }
    double v0_kmh() const noexcept { return key_.v0_centi / 100.0; }
    double vlim_kmh() const noexcept { return key_.vlim_centi / 100.0; }
    double ramp() const noexcept { return key_.ramp_milli / 1000.0; }

    double upper_kmh(double s) const;
    double lower_kmh(double s) const;

    /// Stop case only: distance to the stop position [m]; 0 when v0 = 0 or ramp = 0.
    double stop_distance() const;

    friend bool operator==(const Scenario&, const Scenario&) = default;

private:
    ScenarioKey key_{};
};

}  // namespace mompc
