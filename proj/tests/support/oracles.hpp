#pragma once

#include <cstdint>
#include <vector>

#include "mompc/mocp_solver.hpp"
#include "mompc/scenario_library.hpp"

namespace mompc::oracle {

/// No point of `b` improves on a point of `a` by more than eps in both
/// normalized objectives.
inline bool eps_covered(const ParetoSet& a, const ParetoSet& b, const Normalization& n, double eps) {
    for (const auto& x : a.entries) {
        const ObjectivePoint px = n.apply(x.objectives);
        for (const auto& y : b.entries) {
            const ObjectivePoint py = n.apply(y.objectives);
            if (py.j1 <= px.j1 - eps && py.j2 <= px.j2 - eps) {
                return false;
            }
        }
    }
    return true;
}

/// Utopia/nadir of the union of two fronts.
inline Normalization joint_normalization(const ParetoSet& a, const ParetoSet& b) {
    Normalization n{{1e300, 1e300}, {-1e300, -1e300}};
    for (const ParetoSet* f : {&a, &b}) {
        for (const auto& e : f->entries) {
            n.utopia.j1 = std::min(n.utopia.j1, e.objectives.j1);
            n.utopia.j2 = std::min(n.utopia.j2, e.objectives.j2);
            n.nadir.j1 = std::max(n.nadir.j1, e.objectives.j1);
            n.nadir.j2 = std::max(n.nadir.j2, e.objectives.j2);
        }
    }
    return n;
}

/// Scenario count by walking every velocity of the grid in integer
/// centi-km/h and testing membership case by case.
inline std::size_t counted_scenarios(const GridConfig& g) {
    const auto centi = [](double kmh) { return static_cast<std::int64_t>(kmh * 100.0 + (kmh >= 0 ? 0.5 : -0.5)); };
    const std::int64_t step = centi(g.v_step);
    const std::int64_t cap = centi(g.v_cap);
    std::size_t n = 0;
    for (double vlim_kmh : g.vlims) {
        const std::int64_t vlim = centi(vlim_kmh);
        for (ScenarioCase c : g.cases) {
            for (std::int64_t v = 0; v <= cap; v += step) {
                switch (c) {
                    case ScenarioCase::ConstantVelocity: n += (5 * v >= 4 * vlim && v <= vlim) ? 1 : 0; break;
                    case ScenarioCase::Accelerate: n += v <= vlim ? g.accel_ramps.size() : 0; break;
                    case ScenarioCase::Decelerate: n += g.decel_ramps.size(); break;
                    case ScenarioCase::Stop: n += g.stop_ramps.size(); break;
                }
            }
        }
    }
    return n;
}

}  // namespace mompc::oracle
