#include "mompc/mocp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <type_traits>

#include "mompc/errors.hpp"
#include "mompc/integrator.hpp"
#include "mompc/units.hpp"

namespace mompc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kVelocityEps = 1e-9;  // km/h, absorbs the km/h <-> m/s round trip
constexpr double kGolden = 0.6180339887498949;

}  // namespace

void SolverConfig::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) {
            throw ConfigError(std::string("invalid solver config: ") + what);
        }
    };
    require(n_points >= 2, "n_points >= 2");
    require(front_step > 0, "front_step > 0");
    require(target_offset > 0, "target_offset > 0");
    require(coarse_grid >= 3, "coarse_grid >= 3");
    require(refine_tol_fraction > 0, "refine_tol_fraction > 0");
    require(horizon > 0, "horizon > 0");
    require(stop_tolerance > 0, "stop_tolerance > 0");
    require(nominal_soc >= 0 && nominal_soc <= 1, "nominal_soc in [0, 1]");
    require(integrator.step > 0 && integrator.t_cap > 0, "integrator step and t_cap > 0");
    require(j1_unit > 0 && j2_unit > 0, "objective units > 0");
}

namespace {

template <class Config, class Fn>
void for_each_field(Config& c, Fn&& fn) {
    fn("n_points", c.n_points);
    fn("front_step", c.front_step);
    fn("target_offset", c.target_offset);
    fn("coarse_grid", c.coarse_grid);
    fn("refine_tol_fraction", c.refine_tol_fraction);
    fn("horizon", c.horizon);
    fn("stop_tolerance", c.stop_tolerance);
    fn("nominal_soc", c.nominal_soc);
    fn("integrator_step", c.integrator.step);
    fn("integrator_t_cap", c.integrator.t_cap);
}

}  // namespace

std::vector<std::pair<std::string, double>> SolverConfig::named_values() const {
    std::vector<std::pair<std::string, double>> out;
    SolverConfig copy = *this;
    for_each_field(copy, [&](const char* name, auto& value) { out.emplace_back(name, static_cast<double>(value)); });
    return out;
}

SolverConfig solver_config_from(const std::vector<KeyValue>& entries) {
    SolverConfig config;
    for (const auto& kv : entries) {
        bool known = false;
        for_each_field(config, [&](const char* name, auto& value) {
            if (kv.key != name) {
                return;
            }
            known = true;
            const double x = parse_number(kv.value, kv.line);
            if constexpr (std::is_same_v<std::remove_reference_t<decltype(value)>, int>) {
                if (x != std::floor(x)) {
                    throw FormatError(kv.line, "expected an integer for '" + kv.key + "'");
                }
                value = static_cast<int>(x);
            } else {
                value = x;
            }
        });
        if (!known) {
            throw FormatError(kv.line, "unknown solver parameter '" + kv.key + "'");
        }
    }
    config.validate();
    return config;
}

Mocp make_mocp(const Scenario& scenario, const ModelParams& params, const SolverConfig& config) {
    Mocp m;
    m.scenario = scenario;
    m.x0.v = kmh_to_mps(scenario.v0_kmh());
    m.x0.soc = config.nominal_soc;
    m.params = params;
    m.config = config;
    return m;
}

std::string_view to_string(Violation v) {
    switch (v) {
        case Violation::VelocityUpper: return "velocity-upper";
        case Violation::VelocityLower: return "velocity-lower";
        case Violation::CurrentUpper: return "current-upper";
        case Violation::CurrentLower: return "current-lower";
        case Violation::PowerLimit: return "power-limit";
        case Violation::HorizonNotReached: return "horizon-not-reached";
        case Violation::StopOvershoot: return "stop-overshoot";
        case Violation::StopShort: return "stop-short";
    }
    return "unknown";
}

bool needs_less_torque(Violation v) {
    switch (v) {
        case Violation::VelocityUpper:
        case Violation::CurrentUpper:
        case Violation::PowerLimit:
        case Violation::StopOvershoot: return true;
        case Violation::VelocityLower:
        case Violation::CurrentLower:
        case Violation::HorizonNotReached:
        case Violation::StopShort: return false;
    }
    return false;
}

Evaluation evaluate_objectives(const Mocp& problem, ControlSignal u) {
    const Scenario& sc = problem.scenario;
    const ModelParams& params = problem.params;
    const VehicleState& x0 = problem.x0;
    const bool stop_case = sc.kase() == ScenarioCase::Stop;
    const double stop_at = sc.stop_distance();

    if (stop_case && !(stop_at > 0.0)) {
        return Infeasible{Violation::StopShort, 0.0};
    }

    std::optional<Infeasible> violation;
    auto check = [&](const VehicleState& s) {
        const double rel = s.p - x0.p;
        const double v_kmh = mps_to_kmh(s.v);
        if (v_kmh > sc.upper_kmh(rel) + kVelocityEps) {
            violation = Infeasible{Violation::VelocityUpper, rel};
            return false;
        }
        if (v_kmh < sc.lower_kmh(rel) - kVelocityEps) {
            violation = Infeasible{Violation::VelocityLower, rel};
            return false;
        }
        double current = 0.0;
        try {
            current = battery_current(s, u, params);
        } catch (const InfeasiblePower&) {
            violation = Infeasible{Violation::PowerLimit, rel};
            return false;
        }
        if (current > params.current_max) {
            violation = Infeasible{Violation::CurrentUpper, rel};
            return false;
        }
        if (current < params.current_min) {
            violation = Infeasible{Violation::CurrentLower, rel};
            return false;
        }
        if (stop_case && rel > stop_at) {
            violation = Infeasible{Violation::StopOvershoot, rel};
            return false;
        }
        if (!stop_case && s.v <= 0.0 && u.torque <= 0.0) {
            // At rest without positive torque the vehicle never moves again.
            violation = Infeasible{Violation::HorizonNotReached, rel};
            return false;
        }
        return true;
    };

    if (!check(x0)) {
        return *violation;
    }

    VehicleState last = x0;
    PropagationEnd end{};
    try {
        end = propagate(
            x0, u, params, problem.config.integrator.step, problem.config.integrator.t_cap,
            [&](const VehicleState& s) { return stop_case ? -s.v : (s.p - x0.p) - problem.config.horizon; },
            [&](const VehicleState& s, bool) {
                last = s;
                return check(s);
            });
    } catch (const InfeasiblePower&) {
        return Infeasible{Violation::PowerLimit, last.p - x0.p};
    }

    if (violation) {
        return *violation;
    }
    if (end == PropagationEnd::TimeCap) {
        return Infeasible{stop_case ? Violation::StopOvershoot : Violation::HorizonNotReached, last.p - x0.p};
    }
    if (!check(last)) {
        return *violation;
    }
    if (stop_case && last.p - x0.p < stop_at - problem.config.stop_tolerance) {
        return Infeasible{Violation::StopShort, last.p - x0.p};
    }
    return ObjectivePoint{x0.soc - last.soc, last.t - x0.t};
}

double Normalization::scale1() const {
    const double s = nadir.j1 - utopia.j1;
    return s > 0.0 ? s : 1.0;
}

double Normalization::scale2() const {
    const double s = nadir.j2 - utopia.j2;
    return s > 0.0 ? s : 1.0;
}

ObjectivePoint Normalization::apply(const ObjectivePoint& p) const {
    return {(p.j1 - utopia.j1) / scale1(), (p.j2 - utopia.j2) / scale2()};
}

TargetPoint next_target(const ObjectivePoint& last, double t1, double t2, const SolverConfig& config) {
    // Of the two unit normals, (-t2, t1) points toward the utopia point for a
    // tangent heading from the time minimum toward the energy minimum.
    const double n1 = -t2;
    const double n2 = t1;
    return {last.j1 + config.front_step * t1 + config.target_offset * n1,
            last.j2 + config.front_step * t2 + config.target_offset * n2};
}

namespace {

enum class ControlClass { TooSmall, Feasible, TooLarge };

/// Evaluation cache and the 1-D searches over the bounded scalar control.
class ControlSearch {
public:
    explicit ControlSearch(const Mocp& problem)
        : problem_(problem),
          u_min_(problem.params.torque_min),
          u_max_(problem.params.torque_max),
          refine_tol_(problem.config.refine_tol(problem.params)),
          search_tol_(1e-2 * refine_tol_) {}

    double refine_tol() const { return refine_tol_; }

    const Evaluation& eval(double u) {
        auto it = cache_.find(u);
        if (it == cache_.end()) {
            it = cache_.emplace(u, evaluate_objectives(problem_, ControlSignal{u})).first;
        }
        return it->second;
    }

    ControlClass classify(double u) {
        const Evaluation& e = eval(u);
        if (std::holds_alternative<ObjectivePoint>(e)) {
            return ControlClass::Feasible;
        }
        return needs_less_torque(std::get<Infeasible>(e).kind) ? ControlClass::TooLarge : ControlClass::TooSmall;
    }

    /// Objective in internal units; +inf when infeasible.
    ObjectivePoint internal(double u) {
        const Evaluation& e = eval(u);
        if (const auto* p = std::get_if<ObjectivePoint>(&e)) {
            return {p->j1 * problem_.config.j1_unit, p->j2 * problem_.config.j2_unit};
        }
        return {kInf, kInf};
    }

    ParetoEntry entry(double u) {
        return {ControlSignal{u}, std::get<ObjectivePoint>(eval(u))};
    }

    std::vector<double> grid() const {
        const int n = problem_.config.coarse_grid;
        std::vector<double> g(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            g[static_cast<std::size_t>(i)] = u_min_ + (u_max_ - u_min_) * i / (n - 1);
        }
        return g;
    }

    /// [lo, hi] of feasible controls, boundaries resolved by bisection.
    std::pair<double, double> feasible_interval() {
        if (interval_) {
            return *interval_;
        }
        const auto g = grid();
        std::optional<std::size_t> first, last;
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (classify(g[i]) == ControlClass::Feasible) {
                if (!first) {
                    first = i;
                }
                last = i;
            }
        }
        double seed = 0.0;
        if (!first) {
            // Narrow slivers (e.g. stop problems) fall between grid points:
            // bisect where the violation flips from "too small" to "too large".
            std::optional<double> found;
            for (std::size_t i = 0; i + 1 < g.size() && !found; ++i) {
                if (classify(g[i]) == ControlClass::TooSmall && classify(g[i + 1]) == ControlClass::TooLarge) {
                    double a = g[i], b = g[i + 1];
                    for (int it = 0; it < 60 && !found; ++it) {
                        const double m = 0.5 * (a + b);
                        switch (classify(m)) {
                            case ControlClass::Feasible: found = m; break;
                            case ControlClass::TooSmall: a = m; break;
                            case ControlClass::TooLarge: b = m; break;
                        }
                        if (b - a < 1e-12 * (u_max_ - u_min_)) {
                            break;
                        }
                    }
                }
            }
            if (!found) {
                throw NoFeasibleControl("no feasible control for scenario " + to_string(problem_.scenario.key()));
            }
            seed = *found;
            interval_ = {boundary(seed, lower_neighbour(g, seed)), boundary(seed, upper_neighbour(g, seed))};
        } else {
            const double lo = *first == 0 ? g.front() : boundary(g[*first], g[*first - 1]);
            const double hi = *last + 1 == g.size() ? g.back() : boundary(g[*last], g[*last + 1]);
            interval_ = {lo, hi};
        }
        return *interval_;
    }

    double golden(double a, double b, const auto& f) {
        double c = b - kGolden * (b - a);
        double d = a + kGolden * (b - a);
        double fc = f(c);
        double fd = f(d);
        while (b - a > refine_tol_) {
            if (fc <= fd) {
                b = d;
                d = c;
                fd = fc;
                c = b - kGolden * (b - a);
                fc = f(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + kGolden * (b - a);
                fd = f(d);
            }
        }
        return fc <= fd ? c : d;
    }

    /// Best candidate of `candidates` under f, refined by golden section
    /// between its neighbours. Candidates must be sorted.
    double refine_min(const std::vector<double>& candidates, const auto& f) {
        std::size_t best = 0;
        double best_f = kInf;
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            const double v = f(candidates[i]);
            if (v < best_f) {
                best_f = v;
                best = i;
            }
        }
        if (!std::isfinite(best_f)) {
            throw NoFeasibleControl("no feasible candidate for scenario " + to_string(problem_.scenario.key()));
        }
        const double a = candidates[best == 0 ? 0 : best - 1];
        const double b = candidates[std::min(best + 1, candidates.size() - 1)];
        double u = candidates[best];
        if (b - a > refine_tol_) {
            const double g = golden(a, b, f);
            if (f(g) < best_f) {
                u = g;
            }
        }
        return u;
    }

    std::vector<double> candidates(double lo, double hi, std::initializer_list<double> extra = {}) {
        std::vector<double> c{lo, hi};
        for (double u : grid()) {
            if (u > lo && u < hi) {
                c.push_back(u);
            }
        }
        for (double u : extra) {
            if (u > lo && u < hi) {
                c.push_back(u);
            }
        }
        std::sort(c.begin(), c.end());
        c.erase(std::unique(c.begin(), c.end()), c.end());
        return c;
    }

    ParetoEntry minimize(Objective objective) {
        const auto [lo, hi] = feasible_interval();
        auto f = [&](double u) {
            const ObjectivePoint p = internal(u);
            return objective == Objective::Energy ? p.j1 : p.j2;
        };
        const double u = refine_min(candidates(lo, hi), f);
        // Ties across a flat objective resolve toward the other objective.
        return entry(u);
    }

    ParetoEntry reference_step(std::span<const ParetoEntry> previous, const TargetPoint& target,
                               const Normalization& norm, double domain_lo, double domain_hi) {
        if (previous.empty()) {
            throw Error("reference_point_step needs at least one previous entry");
        }
        const Normalization internal_norm{
            {norm.utopia.j1 * problem_.config.j1_unit, norm.utopia.j2 * problem_.config.j2_unit},
            {norm.nadir.j1 * problem_.config.j1_unit, norm.nadir.j2 * problem_.config.j2_unit}};
        const double u_last = previous.back().u.torque;
        const double u_prev = previous.size() >= 2 ? previous[previous.size() - 2].u.torque : u_last;
        const double predictor = std::clamp(u_last + (u_last - u_prev), domain_lo, domain_hi);

        auto f = [&](double u) {
            const ObjectivePoint p = internal(u);
            if (!std::isfinite(p.j1)) {
                return kInf;
            }
            const ObjectivePoint n = internal_norm.apply(p);
            return std::hypot(n.j1 - target.j1, n.j2 - target.j2);
        };

        // The predictor joins the cached grid as a candidate, so a local
        // search that strays from the feasible set falls back to the grid.
        const double u = refine_min(candidates(domain_lo, domain_hi, {predictor, u_last}), f);
        if (std::abs(u - u_last) <= refine_tol_) {
            throw FrontExhausted("front end reached");
        }
        return entry(u);
    }

private:
    double lower_neighbour(const std::vector<double>& g, double u) const {
        auto it = std::lower_bound(g.begin(), g.end(), u);
        return it == g.begin() ? g.front() : *std::prev(it);
    }

    double upper_neighbour(const std::vector<double>& g, double u) const {
        auto it = std::upper_bound(g.begin(), g.end(), u);
        return it == g.end() ? g.back() : *it;
    }

    /// Bisects between a feasible and an infeasible control; returns the
    /// feasible end once the bracket is below the search tolerance.
    double boundary(double feasible, double infeasible) {
        if (classify(infeasible) == ControlClass::Feasible) {
            return infeasible;
        }
        while (std::abs(infeasible - feasible) > 1e-1 * search_tol_) {
            const double m = 0.5 * (feasible + infeasible);
            if (classify(m) == ControlClass::Feasible) {
                feasible = m;
            } else {
                infeasible = m;
            }
        }
        return feasible;
    }

    const Mocp& problem_;
    double u_min_;
    double u_max_;
    double refine_tol_;
    double search_tol_;
    std::map<double, Evaluation> cache_;
    std::optional<std::pair<double, double>> interval_;
};

Normalization normalization_from(const ParetoEntry& time_min, const ParetoEntry& energy_min) {
    return {{energy_min.objectives.j1, time_min.objectives.j2}, {time_min.objectives.j1, energy_min.objectives.j2}};
}

}  // namespace

ParetoEntry scalar_minimize(const Mocp& problem, Objective objective) {
    ControlSearch search(problem);
    return search.minimize(objective);
}

ParetoEntry reference_point_step(std::span<const ParetoEntry> previous, const TargetPoint& target,
                                 const Mocp& problem, const Normalization& normalization) {
    ControlSearch search(problem);
    const auto [lo, hi] = search.feasible_interval();
    return search.reference_step(previous, target, normalization, lo, hi);
}

FrontSolution solve_mocp_detailed(const Mocp& problem) {
    problem.config.validate();
    ControlSearch search(problem);
    const ParetoEntry fastest = search.minimize(Objective::Time);
    const ParetoEntry cheapest = search.minimize(Objective::Energy);
    const Normalization norm = normalization_from(fastest, cheapest);
    const double tol = search.refine_tol();

    std::vector<ParetoEntry> entries{fastest};
    if (std::abs(fastest.u.torque - cheapest.u.torque) > tol) {
        const double lo = std::min(fastest.u.torque, cheapest.u.torque);
        const double hi = std::max(fastest.u.torque, cheapest.u.torque);
        const double inv = 1.0 / std::sqrt(2.0);
        double t1 = -inv;
        double t2 = inv;
        const auto& cfg = problem.config;
        while (static_cast<int>(entries.size()) + 1 < cfg.n_points) {
            const ObjectivePoint last = norm.apply(entries.back().objectives);
            const TargetPoint target = next_target(last, t1, t2, cfg);
            ParetoEntry next;
            try {
                next = search.reference_step(entries, target, norm, lo, hi);
            } catch (const FrontExhausted&) {
                break;
            }
            const ObjectivePoint np = norm.apply(next.objectives);
            if (!(np.j2 > last.j2) || std::abs(next.u.torque - cheapest.u.torque) <= tol) {
                break;
            }
            entries.push_back(next);
            const double d1 = np.j1 - last.j1;
            const double d2 = np.j2 - last.j2;
            const double len = std::hypot(d1, d2);
            if (len > 0.0) {
                t1 = d1 / len;
                t2 = d2 / len;
            }
        }
        entries.push_back(cheapest);
    }

    FrontSolution out;
    out.front.scenario = problem.scenario.key();
    out.front.entries = nondominated_filter(std::move(entries));
    out.normalization = norm;
    return out;
}

ParetoSet solve_mocp(const Mocp& problem) { return solve_mocp_detailed(problem).front; }

ParetoSet brute_force_front(const Mocp& problem, int grid_size) {
    if (grid_size < 2) {
        throw Error("brute_force_front needs grid_size >= 2");
    }
    const double lo = problem.params.torque_min;
    const double hi = problem.params.torque_max;
    std::vector<ParetoEntry> feasible;
    for (int i = 0; i < grid_size; ++i) {
        const double u = lo + (hi - lo) * i / (grid_size - 1);
        const Evaluation e = evaluate_objectives(problem, ControlSignal{u});
        if (const auto* p = std::get_if<ObjectivePoint>(&e)) {
            feasible.push_back({ControlSignal{u}, *p});
        }
    }
    if (feasible.empty()) {
        throw NoFeasibleControl("brute force: no feasible control for scenario " +
                                to_string(problem.scenario.key()));
    }
    return {problem.scenario.key(), nondominated_filter(std::move(feasible))};
}

}  // namespace mompc
