#include "mompc/mpc_controller.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "mompc/errors.hpp"
#include "mompc/units.hpp"

namespace mompc {

namespace {

std::string at_position(double p) { return " at p = " + format_decimal(p) + " m"; }

double round_up_to_step(double v_kmh, double step) {
    if (v_kmh <= 0.0) {
        return 0.0;
    }
    return std::ceil(v_kmh / step - 1e-9) * step;
}

std::optional<double> next_stop(const Track& track, std::size_t served) {
    if (served < track.stops().size()) {
        return track.stops()[served];
    }
    return std::nullopt;
}

double pick_decel_ramp(const std::vector<double>& ramps, double required) {
    std::vector<double> sorted = ramps;
    std::sort(sorted.begin(), sorted.end());
    for (double r : sorted) {
        if (r >= required - 1e-12) {
            return r;
        }
    }
    return sorted.back();
}

/// Event function whose zero is the stop braking line.
double braking_line(const VehicleState& s, double stop, double ramp, double step) {
    const double v = mps_to_kmh(s.v);
    const double grid = round_up_to_step(v, step);
    if (grid <= 0.0) {
        return -(stop - s.p);
    }
    return v * v / (ramp * grid) - (stop - s.p);
}

}  // namespace

void MpcConfig::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) {
            throw ConfigError(std::string("invalid controller config: ") + what);
        }
    };
    require(sample_distance > 0, "sample_distance > 0");
    require(lookahead > 0, "lookahead > 0");
    require(accel_ramp > 0 && stop_ramp > 0, "ramps > 0");
    require(!decel_ramps.empty(), "decel_ramps not empty");
    require(v_step > 0, "v_step > 0");
    require(stop_dwell >= 0, "stop_dwell >= 0");
    require(initial_soc >= 0 && initial_soc <= 1, "initial_soc in [0, 1]");
    require(integrator.step > 0 && integrator.t_cap > 0, "integrator step and t_cap > 0");
    require(heuristic.window > 0 && heuristic.v_hi > heuristic.v_lo, "heuristic window > 0 and v_hi > v_lo");
}

Scenario classify_scenario(const Track& track, double p, double v_kmh, const MpcConfig& config,
                           std::size_t stops_served) {
    const double cur = track.vmax_at(p);
    const double ahead = std::min(p + config.lookahead, track.length());

    if (const auto stop = next_stop(track, stops_served); stop && v_kmh > 0.0) {
        const double dist = std::max(*stop - p, 0.0);
        const double grid = round_up_to_step(v_kmh, config.v_step);
        if (dist <= config.lookahead && v_kmh * v_kmh >= config.stop_ramp * dist * grid) {
            return Scenario::make(ScenarioCase::Stop, v_kmh, cur, config.stop_ramp);
        }
    }

    const double gov = track.min_limit(p, ahead);
    if (gov < cur || v_kmh > cur) {
        const double vlim = std::min(gov, cur);
        double required = 0.0;
        if (v_kmh > vlim) {
            const auto drop = gov < cur ? track.next_drop(p, config.lookahead) : std::nullopt;
            const double dist = drop ? *drop - p : config.sample_distance;
            required = (v_kmh - vlim) / std::max(dist, 1e-6);
        }
        return Scenario::make(ScenarioCase::Decelerate, v_kmh, vlim, pick_decel_ramp(config.decel_ramps, required));
    }

    if (track.max_limit(p, ahead) > cur || v_kmh < kMinVelocityRatio * cur) {
        return Scenario::make(ScenarioCase::Accelerate, v_kmh, cur, config.accel_ramp);
    }
    return Scenario::make(ScenarioCase::ConstantVelocity, v_kmh, cur);
}

std::size_t select_compromise(const ParetoSet& front, double rho) {
    if (front.empty()) {
        throw EmptyFront("cannot select from an empty front");
    }
    rho = std::clamp(rho, 0.0, 1.0);
    double j1_min = std::numeric_limits<double>::infinity(), j1_max = -j1_min;
    double j2_min = j1_min, j2_max = -j1_min;
    for (const auto& e : front.entries) {
        j1_min = std::min(j1_min, e.objectives.j1);
        j1_max = std::max(j1_max, e.objectives.j1);
        j2_min = std::min(j2_min, e.objectives.j2);
        j2_max = std::max(j2_max, e.objectives.j2);
    }
    const double s1 = j1_max > j1_min ? j1_max - j1_min : 1.0;
    const double s2 = j2_max > j2_min ? j2_max - j2_min : 1.0;
    std::size_t best = 0;
    double best_score = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < front.size(); ++i) {
        const auto& o = front.entries[i].objectives;
        const double score = rho * (o.j2 - j2_min) / s2 + (1.0 - rho) * (o.j1 - j1_min) / s1;
        const bool smaller_time = o.j2 < front.entries[best].objectives.j2;
        if (score < best_score || (score == best_score && smaller_time)) {
            best_score = score;
            best = i;
        }
    }
    return best;
}

double heuristic_rho(const VehicleState& state, const Track& track, const HeuristicConfig& config,
                     std::size_t stops_served) {
    const double vlim = track.vmax_at(state.p);
    const double ratio = mps_to_kmh(state.v) / vlim;
    double rho = config.rho_hi;
    if (ratio >= config.v_hi) {
        rho = config.rho_lo;
    } else if (ratio > config.v_lo) {
        rho = config.rho_hi + (config.rho_lo - config.rho_hi) * (ratio - config.v_lo) / (config.v_hi - config.v_lo);
    }

    double event = std::numeric_limits<double>::infinity();
    if (const auto stop = next_stop(track, stops_served)) {
        event = std::max(*stop - state.p, 0.0);
    }
    if (const auto drop = track.next_drop(state.p, config.window)) {
        event = std::min(event, *drop - state.p);
    }
    if (event <= config.window && rho > config.rho_lo) {
        rho = config.rho_lo + (rho - config.rho_lo) * (event / config.window);
    }
    return std::clamp(rho, 0.0, 1.0);
}

double wheel_energy_step(double force, double distance, const ModelParams& params) {
    const double work = force * distance;
    return work >= 0.0 ? work / params.eta_drive : params.eta_regen * work;
}

void write_drive_log(const DriveLog& log, std::ostream& out) {
    out << "t,p,v_kmh,S,u,I,rho,scenario\n";
    for (const auto& s : log.samples) {
        out << format_decimal(s.t) << ',' << format_decimal(s.p) << ',' << format_decimal(s.v_kmh) << ','
            << format_decimal(s.soc) << ',' << format_decimal(s.u) << ',' << format_decimal(s.current) << ','
            << format_decimal(s.rho) << ',' << s.scenario << '\n';
    }
}

void write_drive_log(const DriveLog& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write drive log: " + path);
    }
    write_drive_log(log, out);
}

DriveLog read_drive_log(std::istream& in, const ModelParams& params) {
    DriveLog log;
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line) || line != "t,p,v_kmh,S,u,I,rho,scenario") {
        throw FormatError(1, "expected drive log header 't,p,v_kmh,S,u,I,rho,scenario'");
    }
    ++line_no;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> f;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) {
            f.push_back(cell);
        }
        if (f.size() != 8) {
            throw FormatError(line_no, "row " + std::to_string(line_no - 1) + ": expected 8 fields, found " +
                                           std::to_string(f.size()));
        }
        DriveSample s;
        try {
            s.t = parse_number(f[0], line_no);
            s.p = parse_number(f[1], line_no);
            s.v_kmh = parse_number(f[2], line_no);
            s.soc = parse_number(f[3], line_no);
            s.u = parse_number(f[4], line_no);
            s.current = parse_number(f[5], line_no);
            s.rho = parse_number(f[6], line_no);
        } catch (const FormatError& e) {
            throw FormatError(line_no, "row " + std::to_string(line_no - 1) + ": " + e.what());
        }
        s.scenario = f[7];
        if (!log.samples.empty()) {
            const DriveSample& prev = log.samples.back();
            log.wheel_energy += wheel_energy_step(s.u / params.wheel_radius, s.p - prev.p, params);
        }
        log.samples.push_back(std::move(s));
    }
    if (!log.samples.empty()) {
        log.totals = {log.samples.front().soc - log.samples.back().soc, log.samples.back().t - log.samples.front().t};
    }
    return log;
}

DriveLog read_drive_log(const std::string& path, const ModelParams& params) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open drive log: " + path);
    }
    return read_drive_log(in, params);
}

RhoPolicy fixed_rho(double rho) {
    return [rho](const DriveContext&) { return rho; };
}

RhoPolicy scheduled_rho(std::vector<std::pair<double, double>> schedule) {
    std::sort(schedule.begin(), schedule.end());
    return [schedule = std::move(schedule)](const DriveContext& ctx) {
        double rho = schedule.empty() ? 0.5 : schedule.front().second;
        for (const auto& [position, value] : schedule) {
            if (position <= ctx.state.p + 1e-9) {
                rho = value;
            }
        }
        return rho;
    };
}

RhoPolicy heuristic_rho_policy(HeuristicConfig config) {
    return [config](const DriveContext& ctx) { return heuristic_rho(ctx.state, ctx.track, config, ctx.stops_served); };
}

std::vector<std::pair<double, double>> parse_rho_schedule(std::istream& in) {
    std::vector<std::pair<double, double>> out;
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::istringstream ls(raw.substr(0, raw.find('#')));
        std::vector<std::string> t;
        for (std::string w; ls >> w;) {
            t.push_back(w);
        }
        if (t.empty()) {
            continue;
        }
        if (t.size() != 2) {
            throw FormatError(line_no, "expected '<position_m> <rho>'");
        }
        const double rho = parse_number(t[1], line_no);
        if (rho < 0.0 || rho > 1.0) {
            throw FormatError(line_no, "rho must lie in [0, 1]");
        }
        out.emplace_back(parse_number(t[0], line_no), rho);
    }
    if (out.empty()) {
        throw FormatError(line_no, "empty rho schedule");
    }
    return out;
}

std::vector<std::pair<double, double>> load_rho_schedule(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open rho schedule: " + path);
    }
    return parse_rho_schedule(in);
}

DriveRunner::DriveRunner(const Track& track, const Library& library, ModelParams plant, MpcConfig config)
    : track_(track), library_(library), plant_(std::move(plant)), config_(std::move(config)) {
    plant_.validate();
    const GridConfig& grid = library_.config().grid;
    config_.v_step = grid.v_step;
    if (const auto ramps = library_.ramps(ScenarioCase::Decelerate); !ramps.empty()) {
        config_.decel_ramps = ramps;
    }
    auto snap = [&](double wanted, ScenarioCase kase, const char* name) {
        const auto ramps = library_.ramps(kase);
        if (ramps.empty() || std::any_of(ramps.begin(), ramps.end(),
                                         [&](double r) { return quantize_milli(r) == quantize_milli(wanted); })) {
            return wanted;
        }
        log_.warnings.push_back(std::string(name) + " ramp " + format_decimal(wanted) +
                                " not in library; using " + format_decimal(ramps.front()));
        return ramps.front();
    };
    config_.accel_ramp = snap(config_.accel_ramp, ScenarioCase::Accelerate, "accelerate");
    config_.stop_ramp = snap(config_.stop_ramp, ScenarioCase::Stop, "stop");
    config_.validate();
    state_.soc = config_.initial_soc;
}

MpcConfig mpc_config_from(const std::vector<KeyValue>& entries) {
    MpcConfig c;
    const std::pair<const char*, double*> fields[] = {
        {"sample_distance", &c.sample_distance},   {"lookahead", &c.lookahead},
        {"accel_ramp", &c.accel_ramp},             {"stop_ramp", &c.stop_ramp},
        {"stop_dwell", &c.stop_dwell},             {"initial_soc", &c.initial_soc},
        {"integrator_step", &c.integrator.step},   {"integrator_t_cap", &c.integrator.t_cap},
        {"heuristic.rho_hi", &c.heuristic.rho_hi}, {"heuristic.rho_lo", &c.heuristic.rho_lo},
        {"heuristic.v_lo", &c.heuristic.v_lo},     {"heuristic.v_hi", &c.heuristic.v_hi},
        {"heuristic.window", &c.heuristic.window},
    };
    for (const auto& kv : entries) {
        const auto it = std::find_if(std::begin(fields), std::end(fields),
                                     [&](const auto& f) { return kv.key == f.first; });
        if (it == std::end(fields)) {
            throw FormatError(kv.line, "unknown controller setting '" + kv.key + "'");
        }
        *it->second = parse_number(kv.value, kv.line);
    }
    c.validate();
    return c;
}

void DriveRunner::perturb(double dv_kmh) { state_.v = std::max(0.0, state_.v + kmh_to_mps(dv_kmh)); }

void DriveRunner::plan(double rho) {
    const double v_kmh = mps_to_kmh(state_.v);
    MpcDecision d;
    d.rho = std::clamp(rho, 0.0, 1.0);
    d.classified = stop_engaged_ ? Scenario::make(ScenarioCase::Stop, v_kmh, track_.vmax_at(state_.p), config_.stop_ramp)
                                 : classify_scenario(track_, state_.p, v_kmh, config_, stops_served_);

    const std::vector<double> vlims = library_.vlims();
    double vlim = -1.0;
    for (double l : vlims) {
        if (l <= d.classified.vlim_kmh() + 1e-9) {
            vlim = l;
        }
    }
    if (vlim < 0.0) {
        throw NoFeasibleScenario("library has no speed limit at or below " + format_decimal(d.classified.vlim_kmh()) +
                                 " km/h" + at_position(state_.p));
    }

    std::vector<std::pair<ScenarioCase, double>> candidates{{d.classified.kase(), d.classified.ramp()}};
    if (d.classified.kase() == ScenarioCase::Decelerate) {
        std::vector<double> ramps = config_.decel_ramps;
        std::sort(ramps.begin(), ramps.end());
        for (double r : ramps) {
            if (r > d.classified.ramp()) {
                candidates.emplace_back(ScenarioCase::Decelerate, r);
            }
        }
        for (auto it = ramps.rbegin(); it != ramps.rend(); ++it) {
            if (*it < d.classified.ramp()) {
                candidates.emplace_back(ScenarioCase::Decelerate, *it);
            }
        }
    }
    if (d.classified.kase() == ScenarioCase::Accelerate || d.classified.kase() == ScenarioCase::Decelerate) {
        candidates.emplace_back(ScenarioCase::ConstantVelocity, 0.0);
    }

    std::string failure;
    for (std::size_t i = 0; i < candidates.size() && !d.entry; ++i) {
        try {
            const LookupResult r = library_.lookup(v_kmh, candidates[i].first, vlim, candidates[i].second);
            d.entry = r.entry;
            d.clamped = r.clamped;
            d.fallback = i > 0;
        } catch (const NoFeasibleScenario& e) {
            if (failure.empty()) {
                failure = e.what();
            }
        }
    }
    if (!d.entry) {
        throw NoFeasibleScenario(failure + at_position(state_.p));
    }
    if (d.clamped) {
        log_.warnings.push_back("velocity " + format_decimal(v_kmh) + " km/h above library range, clamped" +
                                at_position(state_.p));
    }
    if (d.fallback) {
        log_.warnings.push_back("fallback to " + to_string(d.entry->key()) + " for " +
                                to_string(d.classified.key()) + at_position(state_.p));
    }
    d.selected = select_compromise(d.entry->front, d.rho);
    d.u = d.entry->front.entries[d.selected].u;
    decision_ = d;
    scenario_label_ = to_string(d.entry->key());
}

void DriveRunner::record(const VehicleState& s) {
    DriveSample sample;
    sample.t = s.t;
    sample.p = s.p;
    sample.v_kmh = mps_to_kmh(s.v);
    sample.soc = s.soc;
    sample.u = decision_.u.torque;
    try {
        sample.current = battery_current(s, decision_.u, plant_);
    } catch (const InfeasiblePower&) {
        sample.current = std::numeric_limits<double>::quiet_NaN();
    }
    sample.rho = decision_.rho;
    sample.scenario = scenario_label_;
    if (!log_.samples.empty()) {
        log_.wheel_energy +=
            wheel_energy_step(decision_.u.torque / plant_.wheel_radius, s.p - log_.samples.back().p, plant_);
    }
    log_.samples.push_back(std::move(sample));
}

void DriveRunner::finish() {
    finished_ = true;
    active_ = false;
    log_.totals = {config_.initial_soc - state_.soc, state_.t};
}

void DriveRunner::tick(double rho) {
    if (finished_) {
        return;
    }
    if (!active_) {
        plan(rho);
        active_ = true;
        stopping_ = decision_.classified.kase() == ScenarioCase::Stop;
        sample_start_p_ = state_.p;
        sample_start_t_ = state_.t;
        ++samples_started_;
        if (log_.samples.empty()) {
            record(state_);
        }
    }

    const VehicleState x = state_;
    VehicleState next;
    try {
        next = rk4_step_unclamped(x, decision_.u, plant_, config_.integrator.step);
    } catch (const InfeasiblePower& e) {
        throw InfeasiblePower(std::string(e.what()) + at_position(x.p));
    }

    enum class Kind { Sample, End, Trigger, Rest };
    struct Crossing {
        Kind kind;
        double theta;
    };
    std::optional<Crossing> first;
    auto consider = [&](Kind kind, double g_prev, double g_next) {
        if (g_prev < 0.0 && g_next >= 0.0) {
            const double theta = std::clamp(g_prev / (g_prev - g_next), 0.0, 1.0);
            if (!first || theta < first->theta) {
                first = Crossing{kind, theta};
            }
        }
    };
    const double length = track_.length();
    consider(Kind::End, x.p - length, next.p - length);
    const auto stop = next_stop(track_, stops_served_);
    if (stopping_) {
        consider(Kind::Rest, -x.v, -next.v);
    } else {
        const double start = sample_start_p_ + config_.sample_distance;
        consider(Kind::Sample, x.p - start, next.p - start);
        if (stop && *stop - x.p <= config_.lookahead && x.v > 0.0) {
            consider(Kind::Trigger, braking_line(x, *stop, config_.stop_ramp, config_.v_step),
                     braking_line(next, *stop, config_.stop_ramp, config_.v_step));
        }
    }

    if (!first) {
        next.v = std::max(next.v, 0.0);
        state_ = next;
        record(state_);
        if (!stopping_ && state_.v <= 0.0 && decision_.u.torque <= 0.0) {
            throw StallDetected("vehicle at rest under non-positive torque" + at_position(state_.p));
        }
        if (state_.t - sample_start_t_ > config_.integrator.t_cap) {
            throw StallDetected("MPC sample exceeded " + format_decimal(config_.integrator.t_cap) + " s" +
                                at_position(state_.p));
        }
        return;
    }

    VehicleState hit = lerp(x, next, first->theta);
    hit.v = std::max(hit.v, 0.0);
    if (first->kind == Kind::Rest) {
        hit.v = 0.0;
    }
    state_ = hit;
    record(state_);
    active_ = false;

    switch (first->kind) {
        case Kind::End: finish(); return;
        case Kind::Sample: return;
        case Kind::Trigger: stop_engaged_ = true; return;
        case Kind::Rest: break;
    }

    log_.stops.push_back({stop ? *stop : state_.p, state_.p});
    ++stops_served_;
    stop_engaged_ = false;
    if (config_.stop_dwell > 0.0) {
        decision_.u = ControlSignal{0.0};
        const double target = state_.t + config_.stop_dwell;
        while (state_.t < target - 1e-12) {
            state_ = rk4_step(state_, decision_.u, plant_, std::min(config_.integrator.step, target - state_.t));
            record(state_);
        }
    }
    if (stop && *stop >= length - 1e-9) {
        finish();
    }
}

DriveLog run_drive(const Track& track, const RhoPolicy& policy, const Library& library, const ModelParams& plant,
                   const MpcConfig& config, const RunOptions& options) {
    DriveRunner runner(track, library, plant, config);
    std::vector<bool> applied(options.perturbations.size(), false);
    while (!runner.finished()) {
        for (std::size_t i = 0; i < options.perturbations.size(); ++i) {
            if (!applied[i] && runner.state().p >= options.perturbations[i].position) {
                runner.perturb(options.perturbations[i].dv_kmh);
                applied[i] = true;
            }
        }
        double rho = 0.0;
        if (runner.at_sample_boundary()) {
            rho = policy(DriveContext{runner.state(), track, runner.stops_served()});
        }
        runner.tick(rho);
    }
    return runner.log();
}

}  // namespace mompc
