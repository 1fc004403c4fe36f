#include <benchmark/benchmark.h>

#include <random>

#include "mompc/mocp_solver.hpp"
#include "mompc/pareto.hpp"
#include "mompc/scenario_library.hpp"

using namespace mompc;

namespace {

// Full default grid with placeholder fronts; lookups do not touch the fronts.
const Library& placeholder_library() {
    static const Library lib = [] {
        LibraryConfig config;
        std::vector<LibraryEntry> entries;
        for (const Scenario& s : enumerate_scenarios(config.grid)) {
            LibraryEntry e;
            e.front.scenario = s.key();
            e.front.entries.push_back({ControlSignal{0.0}, {1e-4, 6.0}});
            entries.push_back(std::move(e));
        }
        return Library(config, std::move(entries));
    }();
    return lib;
}

void BM_Lookup(benchmark::State& state) {
    const Library& lib = placeholder_library();
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> v(0.0, 130.0);
    const std::vector<double> vlims = lib.vlims();
    for (auto _ : state) {
        const double vlim = vlims[rng() % vlims.size()];
        benchmark::DoNotOptimize(lib.lookup(v(rng), ScenarioCase::Decelerate, vlim, 0.1));
    }
}
BENCHMARK(BM_Lookup);

void BM_EvaluateObjectives(benchmark::State& state) {
    const Mocp m = make_mocp(Scenario::make(ScenarioCase::Accelerate, 60.0, 100.0, 0.05), {}, {});
    const ParetoSet front = solve_mocp(m);
    const ControlSignal u = front.entries[front.size() / 2].u;
    for (auto _ : state) {
        benchmark::DoNotOptimize(evaluate_objectives(m, u));
    }
}
BENCHMARK(BM_EvaluateObjectives);

void BM_SolveMocp(benchmark::State& state) {
    const Mocp m = make_mocp(Scenario::make(ScenarioCase::Accelerate, 60.0, 100.0, 0.05), {}, {});
    for (auto _ : state) {
        benchmark::DoNotOptimize(solve_mocp(m));
    }
}
BENCHMARK(BM_SolveMocp)->Unit(benchmark::kMillisecond);

void BM_SolveStop(benchmark::State& state) {
    const Mocp m = make_mocp(Scenario::make(ScenarioCase::Stop, 50.0, 50.0, 0.5), {}, {});
    for (auto _ : state) {
        benchmark::DoNotOptimize(solve_mocp(m));
    }
}
BENCHMARK(BM_SolveStop)->Unit(benchmark::kMillisecond);

void BM_NondominatedFilter(benchmark::State& state) {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> d(0.0, 1.0);
    std::vector<ParetoEntry> points(static_cast<std::size_t>(state.range(0)));
    for (auto& p : points) {
        p.objectives = {d(rng), d(rng)};
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(nondominated_filter(points));
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_NondominatedFilter)->Range(64, 16384)->Complexity();

}  // namespace

BENCHMARK_MAIN();
