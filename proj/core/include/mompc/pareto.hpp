#pragma once

#include <span>
#include <vector>

#include "mompc/scenario.hpp"
#include "mompc/vehicle_model.hpp"

namespace mompc {

/// j1: charge consumed S(t0) - S(tf) [fraction]; j2: travel time [s].
struct ObjectivePoint {
    double j1 = 0.0;
    double j2 = 0.0;

    friend bool operator==(const ObjectivePoint&, const ObjectivePoint&) = default;
};

struct ParetoEntry {
    ControlSignal u;
    ObjectivePoint objectives;

    friend bool operator==(const ParetoEntry&, const ParetoEntry&) = default;
};

/// Nondominated entries of one scenario, sorted by ascending j2.
struct ParetoSet {
    ScenarioKey scenario;
    std::vector<ParetoEntry> entries;

    bool empty() const noexcept { return entries.empty(); }
    std::size_t size() const noexcept { return entries.size(); }

    friend bool operator==(const ParetoSet&, const ParetoSet&) = default;
};

/// a <= b in both objectives and strictly better in at least one.
constexpr bool dominates(const ObjectivePoint& a, const ObjectivePoint& b) {
    return a.j1 <= b.j1 && a.j2 <= b.j2 && (a.j1 < b.j1 || a.j2 < b.j2);
}

/// Keeps the entries no other entry dominates, sorted by (j2, j1) ascending.
/// Exact duplicates in objective space collapse to the first occurrence.
/// Sort-and-scan, O(n log n).
std::vector<ParetoEntry> nondominated_filter(std::vector<ParetoEntry> points);

/// Sorted by j2 ascending with j1 strictly decreasing and j2 strictly increasing.
bool is_monotone_front(std::span<const ParetoEntry> entries);

}  // namespace mompc
