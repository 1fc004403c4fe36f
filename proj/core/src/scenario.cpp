#include "mompc/scenario.hpp"

#include <algorithm>
#include <cmath>

#include "mompc/errors.hpp"

namespace mompc {

std::string_view to_string(ScenarioCase c) {
    switch (c) {
        case ScenarioCase::ConstantVelocity: return "constant";
        case ScenarioCase::Accelerate: return "accelerate";
        case ScenarioCase::Decelerate: return "decelerate";
        case ScenarioCase::Stop: return "stop";
    }
    return "unknown";
}

ScenarioCase scenario_case_from_string(std::string_view name) {
    for (auto c : {ScenarioCase::ConstantVelocity, ScenarioCase::Accelerate, ScenarioCase::Decelerate,
                   ScenarioCase::Stop}) {
        if (to_string(c) == name) {
            return c;
        }
    }
    throw Error("unknown scenario case '" + std::string(name) + "'");
}

std::string to_string(const ScenarioKey& key) {
    return std::string(to_string(key.kase)) + ":" + std::to_string(key.v0_centi) + ":" +
           std::to_string(key.vlim_centi) + ":" + std::to_string(key.ramp_milli);
}

std::int32_t quantize_centi(double kmh) { return static_cast<std::int32_t>(std::llround(kmh * 100.0)); }
std::int32_t quantize_milli(double ramp) { return static_cast<std::int32_t>(std::llround(ramp * 1000.0)); }

Scenario Scenario::make(ScenarioCase c, double v0_kmh, double vlim_kmh, double ramp) {
    return Scenario(ScenarioKey{c, quantize_centi(v0_kmh), quantize_centi(vlim_kmh), quantize_milli(ramp)});
}

double Scenario::upper_kmh(double s) const {
    const double v0 = v0_kmh();
    const double vlim = vlim_kmh();
    switch (kase()) {
        case ScenarioCase::ConstantVelocity:
        case ScenarioCase::Accelerate: return vlim;
        case ScenarioCase::Decelerate: return v0 > vlim ? std::max(v0 - ramp() * s, vlim) : vlim;
        case ScenarioCase::Stop: return std::max(v0, vlim);
    }
    return vlim;
}

double Scenario::lower_kmh(double s) const {
    const double v0 = v0_kmh();
    const double box_low = kMinVelocityRatio * vlim_kmh();
    switch (kase()) {
        case ScenarioCase::ConstantVelocity: return box_low;
        case ScenarioCase::Accelerate: return std::min(v0 + ramp() * s, box_low);
        case ScenarioCase::Decelerate: return std::min(box_low, v0);
        case ScenarioCase::Stop: return 0.0;
    }
    return 0.0;
}

double Scenario::stop_distance() const {
    if (kase() != ScenarioCase::Stop || key_.ramp_milli <= 0) {
        return 0.0;
    }
    return v0_kmh() / ramp();
}

}  // namespace mompc
