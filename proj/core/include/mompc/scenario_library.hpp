#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "mompc/key_value.hpp"
#include "mompc/mocp_solver.hpp"
#include "mompc/pareto.hpp"
#include "mompc/scenario.hpp"
#include "mompc/vehicle_model.hpp"

namespace mompc {

/// Scenario grid. Velocities in km/h, ramps in (km/h)/m.
struct GridConfig {
    double v_step = 0.1;
    double v_cap = 130.0;
    std::vector<double> vlims{30.0, 50.0, 60.0, 70.0, 100.0};
    std::vector<double> accel_ramps{0.05, 0.1, 0.2};
    std::vector<double> decel_ramps{0.05, 0.1, 0.2};
    std::vector<double> stop_ramps{0.5};
    std::vector<ScenarioCase> cases{ScenarioCase::ConstantVelocity, ScenarioCase::Accelerate,
                                    ScenarioCase::Decelerate, ScenarioCase::Stop};

    /// Throws ConfigError on malformed ranges (non-positive step, limits not on
    /// the velocity grid, v_cap below a limit, non-positive ramps).
    void validate() const;

    friend bool operator==(const GridConfig&, const GridConfig&) = default;
};

/// Everything a library depends on; hashed into the file header.
struct LibraryConfig {
    ModelParams model;
    SolverConfig solver;
    GridConfig grid;

    friend bool operator==(const LibraryConfig&, const LibraryConfig&) = default;
};

/// Reads `model.<name>`, `solver.<name>` and `grid.<name>` keys; list values
/// (grid.vlims, grid.*_ramps, grid.cases) are comma separated.
LibraryConfig library_config_from(const std::vector<KeyValue>& entries);
LibraryConfig load_library_config(const std::string& path);

/// Enumeration per speed limit v_lim, velocities on multiples of v_step:
///   constant:   v0 in [0.8 v_lim, v_lim]
///   accelerate: v0 in [0, v_lim] for each accel ramp
///   decelerate: v0 in [0, v_cap] for each decel ramp
///   stop:       v0 in [0, v_cap] for each stop ramp
/// Throws EmptyGrid when nothing is enumerated.
std::vector<Scenario> enumerate_scenarios(const GridConfig& grid);

/// Closed-form size of enumerate_scenarios(grid).
std::size_t scenario_count(const GridConfig& grid);

struct LibraryEntry {
    ParetoSet front;             ///< empty when infeasible
    std::string infeasible_reason;  ///< non-empty iff the scenario is infeasible

    bool feasible() const noexcept { return !front.empty(); }
    const ScenarioKey& key() const noexcept { return front.scenario; }

    friend bool operator==(const LibraryEntry&, const LibraryEntry&) = default;
};

struct LookupResult {
    const LibraryEntry* entry = nullptr;
    /// The measured velocity lay above the stored range of the row.
    bool clamped = false;
};

class Library {
public:
    Library() = default;
    Library(LibraryConfig config, std::vector<LibraryEntry> entries);

    const LibraryConfig& config() const noexcept { return config_; }
    const std::vector<LibraryEntry>& entries() const noexcept { return entries_; }
    std::uint64_t config_hash() const;

    /// Safe-side lookup: the smallest stored v0 >= v_kmh in the row
    /// (case, v_lim, ramp), walking upward past infeasible entries. Throws
    /// NoFeasibleScenario when the row is missing or has no feasible entry
    /// at or above v_kmh.
    LookupResult lookup(double v_kmh, ScenarioCase kase, double vlim_kmh, double ramp = 0.0) const;

    /// Sorted speed limits present in the library.
    std::vector<double> vlims() const;
    /// Sorted ramps present for `kase`.
    std::vector<double> ramps(ScenarioCase kase) const;

    const LibraryEntry* find(const ScenarioKey& key) const;

    friend bool operator==(const Library& a, const Library& b) {
        return a.config_ == b.config_ && a.entries_ == b.entries_;
    }

private:
    struct Row {
        std::size_t first = 0;  ///< index into entries_
        std::size_t count = 0;
        std::int32_t v0_first_centi = 0;
        std::int32_t step_centi = 1;
    };
    static std::uint64_t row_id(ScenarioCase kase, std::int32_t vlim_centi, std::int32_t ramp_milli);

    void index();

    LibraryConfig config_;
    std::vector<LibraryEntry> entries_;
    std::unordered_map<std::uint64_t, Row> rows_;
};

using BuildProgress = std::function<void(std::size_t done, std::size_t total)>;

/// Solves every enumerated scenario with `workers` threads. Fronts are
/// rounded to the persisted precision, so the result equals its own
/// save/load round trip. Output does not depend on the worker count.
Library build_library(const LibraryConfig& config, unsigned workers = 1, const BuildProgress& progress = {});

/// Text header parameters in file order.
std::vector<std::pair<std::string, std::string>> library_params(const LibraryConfig& config);

void save_library(const Library& library, std::ostream& out);
void save_library(const Library& library, const std::string& path);

/// Parses and re-validates a library. Throws FormatError (with line) on a
/// bad magic, hash mismatch, malformed or truncated content, or a stored front
/// that is not strictly monotone.
Library load_library(std::istream& in);
Library load_library(const std::string& path);

/// FNV-1a 64.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace mompc
