#include "mompc/pareto.hpp"

#include <algorithm>
#include <limits>

namespace mompc {

std::vector<ParetoEntry> nondominated_filter(std::vector<ParetoEntry> points) {
    std::stable_sort(points.begin(), points.end(), [](const ParetoEntry& a, const ParetoEntry& b) {
        if (a.objectives.j2 != b.objectives.j2) {
            return a.objectives.j2 < b.objectives.j2;
        }
        return a.objectives.j1 < b.objectives.j1;
    });
    // After the sort every earlier point has j2 <= the current one, so the
    // current point survives iff its j1 beats every j1 seen so far.
    std::vector<ParetoEntry> kept;
    double best_j1 = std::numeric_limits<double>::infinity();
    for (const auto& p : points) {
        if (p.objectives.j1 < best_j1) {
            kept.push_back(p);
            best_j1 = p.objectives.j1;
        }
    }
    return kept;
}

bool is_monotone_front(std::span<const ParetoEntry> entries) {
    for (std::size_t i = 1; i < entries.size(); ++i) {
        const auto& a = entries[i - 1].objectives;
        const auto& b = entries[i].objectives;
        if (!(b.j2 > a.j2) || !(b.j1 < a.j1)) {
            return false;
        }
    }
    return true;
}

}  // namespace mompc
