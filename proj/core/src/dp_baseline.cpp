#include "mompc/dp_baseline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mompc/errors.hpp"
#include "mompc/scenario.hpp"
#include "mompc/units.hpp"

namespace mompc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kNone = static_cast<std::size_t>(-1);

}  // namespace

void DpConfig::validate() const {
    if (!(beta >= 0.0) || stage_count < 2 || !(v_step > 0.0) || !(accel_ramp > 0.0) || soc < 0.0 || soc > 1.0) {
        throw ConfigError("invalid DP config: need beta >= 0, stage_count >= 2, v_step > 0, accel_ramp > 0");
    }
    model.validate();
}

DpGrid make_dp_grid(const Track& track, const DpConfig& config) {
    config.validate();
    if (!track.stops().empty()) {
        throw ConfigError("the DP baseline does not handle stop signs");
    }
    DpGrid g;
    const std::size_t n = static_cast<std::size_t>(config.stage_count);
    const double dp = track.length() / config.stage_count;
    for (std::size_t k = 0; k <= n; ++k) {
        g.positions.push_back(k == n ? track.length() : dp * static_cast<double>(k));
    }
    for (std::size_t k = 0; k < n; ++k) {
        const double mid = 0.5 * (g.positions[k] + g.positions[k + 1]);
        const double hi = track.vmax_at(mid);
        const double lo = std::min(kMinVelocityRatio * hi, config.accel_ramp * g.positions[k]);
        g.interval_lo.push_back(kmh_to_mps(lo));
        g.interval_hi.push_back(kmh_to_mps(hi));
    }
    g.nodes.push_back({0.0});
    for (std::size_t k = 1; k <= n; ++k) {
        // A node must be admissible for the interval before and after it.
        double lo = g.interval_lo[k - 1];
        double hi = g.interval_hi[k - 1];
        if (k < n) {
            lo = std::max(lo, g.interval_lo[k]);
            hi = std::min(hi, g.interval_hi[k]);
        }
        std::vector<double> stage;
        const double step = kmh_to_mps(config.v_step);
        const auto first = static_cast<long>(std::ceil(lo / step - 1e-9));
        for (long i = std::max(first, 0L); i * step <= hi + 1e-9; ++i) {
            stage.push_back(static_cast<double>(i) * step);
        }
        g.nodes.push_back(std::move(stage));
    }
    return g;
}

std::optional<DpTransition> dp_transition(const DpGrid& grid, std::size_t stage, double v_from, double v_to,
                                          const DpConfig& config) {
    const double eps = 1e-9;
    if (v_from < grid.interval_lo[stage] - eps || v_to < grid.interval_lo[stage] - eps ||
        v_from > grid.interval_hi[stage] + eps || v_to > grid.interval_hi[stage] + eps) {
        return std::nullopt;
    }
    if (v_from + v_to <= 0.0) {
        return std::nullopt;
    }
    const ModelParams& m = config.model;
    const double dp = grid.positions[stage + 1] - grid.positions[stage];
    const double a = (v_to * v_to - v_from * v_from) / (2.0 * dp);
    const double force = m.mass * a + resistive_force(0.5 * (v_from + v_to), m);
    const ControlSignal u{force * m.wheel_radius};
    if (u.torque < m.torque_min || u.torque > m.torque_max) {
        return std::nullopt;
    }
    for (double v : {v_from, v_to}) {
        VehicleState s;
        s.v = v;
        s.soc = config.soc;
        try {
            const double current = battery_current(s, u, m);
            if (current < m.current_min || current > m.current_max) {
                return std::nullopt;
            }
        } catch (const InfeasiblePower&) {
            return std::nullopt;
        }
    }
    return DpTransition{2.0 * dp / (v_from + v_to), wheel_energy_step(force, dp, m), force};
}

DpSolution solve_dp_grid(const DpGrid& grid, const DpConfig& config) {
    const std::size_t n = grid.positions.size() - 1;
    DpSolution sol;
    sol.positions = grid.positions;
    sol.value.resize(n + 1);
    sol.policy.resize(n + 1);
    sol.value[n].assign(grid.nodes[n].size(), 0.0);
    sol.policy[n].assign(grid.nodes[n].size(), kNone);
    for (std::size_t k = n; k-- > 0;) {
        sol.value[k].assign(grid.nodes[k].size(), kInf);
        sol.policy[k].assign(grid.nodes[k].size(), kNone);
        for (std::size_t i = 0; i < grid.nodes[k].size(); ++i) {
            for (std::size_t j = 0; j < grid.nodes[k + 1].size(); ++j) {
                if (!std::isfinite(sol.value[k + 1][j])) {
                    continue;
                }
                const auto tr = dp_transition(grid, k, grid.nodes[k][i], grid.nodes[k + 1][j], config);
                if (!tr) {
                    continue;
                }
                const double c = tr->dt + config.beta * tr->energy + sol.value[k + 1][j];
                if (c < sol.value[k][i]) {
                    sol.value[k][i] = c;
                    sol.policy[k][i] = j;
                }
            }
        }
    }
    const auto start = std::min_element(sol.value[0].begin(), sol.value[0].end());
    if (start == sol.value[0].end() || !std::isfinite(*start)) {
        throw NoFeasiblePath("no admissible velocity chain through the corridor");
    }
    std::size_t i = static_cast<std::size_t>(start - sol.value[0].begin());
    sol.profile_kmh.push_back(mps_to_kmh(grid.nodes[0][i]));
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t j = sol.policy[k][i];
        const auto tr = dp_transition(grid, k, grid.nodes[k][i], grid.nodes[k + 1][j], config);
        sol.time += tr->dt;
        sol.energy += tr->energy;
        sol.forces.push_back(tr->force);
        sol.profile_kmh.push_back(mps_to_kmh(grid.nodes[k + 1][j]));
        i = j;
    }
    sol.cost = sol.time + config.beta * sol.energy;
    return sol;
}

DpSolution solve_dp(const Track& track, const DpConfig& config) { return solve_dp_grid(make_dp_grid(track, config), config); }

double bellman_residual(const DpGrid& grid, const DpSolution& solution, const DpConfig& config) {
    double worst = 0.0;
    const std::size_t n = grid.positions.size() - 1;
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t i = 0; i < grid.nodes[k].size(); ++i) {
            double best = kInf;
            for (std::size_t j = 0; j < grid.nodes[k + 1].size(); ++j) {
                const auto tr = dp_transition(grid, k, grid.nodes[k][i], grid.nodes[k + 1][j], config);
                if (tr) {
                    best = std::min(best, tr->dt + config.beta * tr->energy + solution.value[k + 1][j]);
                }
            }
            const double v = solution.value[k][i];
            if (std::isfinite(best) != std::isfinite(v)) {
                return kInf;
            }
            if (std::isfinite(best)) {
                worst = std::max(worst, std::abs(best - v));
            }
        }
    }
    return worst;
}

DriveLog dp_to_drive_log(const DpSolution& solution, const ModelParams& model) {
    DriveLog log;
    double t = 0.0;
    for (std::size_t k = 0; k < solution.positions.size(); ++k) {
        DriveSample s;
        if (k > 0) {
            const double v0 = kmh_to_mps(solution.profile_kmh[k - 1]);
            const double v1 = kmh_to_mps(solution.profile_kmh[k]);
            const double dp = solution.positions[k] - solution.positions[k - 1];
            t += 2.0 * dp / (v0 + v1);
            log.wheel_energy += wheel_energy_step(solution.forces[k - 1], dp, model);
        }
        s.t = t;
        s.p = solution.positions[k];
        s.v_kmh = solution.profile_kmh[k];
        s.soc = 0.0;
        s.u = (k == 0 ? solution.forces.front() : solution.forces[k - 1]) * model.wheel_radius;
        s.scenario = "dp";
        log.samples.push_back(std::move(s));
    }
    log.totals = {0.0, t};
    return log;
}

DpComparison compare(const DriveLog& log, const DpSolution& dp, double beta) {
    if (log.samples.empty() || dp.positions.empty()) {
        throw TrackMismatch("empty drive log or DP solution");
    }
    const double length = dp.positions.back();
    const double start = log.samples.front().p;
    const double end = log.samples.back().p;
    if (std::abs(start - dp.positions.front()) > 1e-6 || std::abs(end - length) > 1e-6 * std::max(1.0, length)) {
        throw TrackMismatch("drive log spans [" + format_decimal(start) + ", " + format_decimal(end) +
                            "] m but the DP track spans [0, " + format_decimal(length) + "] m");
    }
    DpComparison c;
    c.mpc_time = log.samples.back().t - log.samples.front().t;
    c.mpc_energy = log.wheel_energy;
    c.mpc_cost = c.mpc_time + beta * c.mpc_energy;
    c.dp_cost = dp.time + beta * dp.energy;
    c.gap = c.mpc_cost - c.dp_cost;
    c.relative_gap = c.gap / c.dp_cost;
    c.comparable = c.mpc_cost <= 1.05 * c.dp_cost;
    return c;
}

}  // namespace mompc
