#include "mompc/scenario_library.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "mompc/errors.hpp"

namespace mompc {

namespace {

constexpr const char* kMagic = "MPCLIB 1";

std::int32_t ceil_div(std::int64_t a, std::int64_t b) { return static_cast<std::int32_t>((a + b - 1) / b); }

std::int32_t step_centi(const GridConfig& g) { return quantize_centi(g.v_step); }

std::int32_t constant_first_centi(std::int32_t vlim, std::int32_t step) {
    // smallest grid velocity >= 0.8 v_lim
    return ceil_div(4LL * vlim, 5LL * step) * step;
}

bool on_centi_grid(double kmh) { return std::abs(kmh * 100.0 - std::round(kmh * 100.0)) < 1e-6; }

const std::vector<double>& ramps_for(const GridConfig& g, ScenarioCase c) {
    static const std::vector<double> none{0.0};
    switch (c) {
        case ScenarioCase::Accelerate: return g.accel_ramps;
        case ScenarioCase::Decelerate: return g.decel_ramps;
        case ScenarioCase::Stop: return g.stop_ramps;
        case ScenarioCase::ConstantVelocity: return none;
    }
    return none;
}

std::string join(const std::vector<double>& values) {
    std::string out;
    for (double v : values) {
        out += (out.empty() ? "" : ",") + format_exact(v);
    }
    return out;
}

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, sep)) {
        out.push_back(item);
    }
    return out;
}

std::vector<std::string> tokens(const std::string& line) {
    std::istringstream in(line);
    std::vector<std::string> out;
    std::string t;
    while (in >> t) {
        out.push_back(t);
    }
    return out;
}

std::int32_t parse_int(const std::string& text, std::size_t line) {
    const double x = parse_number(text, line);
    if (x != std::floor(x) || std::abs(x) > 2e9) {
        throw FormatError(line, "expected an integer: '" + text + "'");
    }
    return static_cast<std::int32_t>(x);
}

std::string hex64(std::uint64_t h) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::uint64_t hash_params(const std::vector<std::pair<std::string, std::string>>& params) {
    std::uint64_t h = fnv1a64("");
    for (const auto& [name, value] : params) {
        h = fnv1a64(name + " " + value + "\n", h);
    }
    return h;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

void GridConfig::validate() const {
    auto require = [](bool ok, const std::string& what) {
        if (!ok) {
            throw ConfigError("invalid grid config: " + what);
        }
    };
    require(v_step > 0 && on_centi_grid(v_step), "v_step must be a positive multiple of 0.01 km/h");
    const std::int32_t step = step_centi(*this);
    require(on_centi_grid(v_cap) && quantize_centi(v_cap) % step == 0, "v_cap must lie on the velocity grid");
    for (double vlim : vlims) {
        require(vlim > 0 && on_centi_grid(vlim) && quantize_centi(vlim) % step == 0,
                "speed limit " + format_decimal(vlim) + " must be positive and on the velocity grid");
        require(vlim <= v_cap, "speed limit " + format_decimal(vlim) + " above v_cap");
    }
    for (const auto* set : {&accel_ramps, &decel_ramps, &stop_ramps}) {
        for (double r : *set) {
            require(r > 0 && quantize_milli(r) > 0, "ramps must be >= 0.001");
        }
    }
}

std::vector<Scenario> enumerate_scenarios(const GridConfig& grid) {
    grid.validate();
    const std::int32_t step = step_centi(grid);
    const std::int32_t cap = quantize_centi(grid.v_cap);
    std::vector<double> vlims = grid.vlims;
    std::sort(vlims.begin(), vlims.end());
    vlims.erase(std::unique(vlims.begin(), vlims.end()), vlims.end());
    std::vector<ScenarioCase> cases = grid.cases;
    std::sort(cases.begin(), cases.end());
    cases.erase(std::unique(cases.begin(), cases.end()), cases.end());

    std::vector<Scenario> out;
    for (double vlim_kmh : vlims) {
        const std::int32_t vlim = quantize_centi(vlim_kmh);
        for (ScenarioCase c : cases) {
            std::vector<double> ramps = ramps_for(grid, c);
            std::sort(ramps.begin(), ramps.end());
            ramps.erase(std::unique(ramps.begin(), ramps.end(),
                                    [](double a, double b) { return quantize_milli(a) == quantize_milli(b); }),
                        ramps.end());
            for (double ramp : ramps) {
                std::int32_t lo = 0;
                std::int32_t hi = cap;
                if (c == ScenarioCase::ConstantVelocity) {
                    lo = constant_first_centi(vlim, step);
                    hi = vlim;
                } else if (c == ScenarioCase::Accelerate) {
                    hi = vlim;
                }
                for (std::int32_t v0 = lo; v0 <= hi; v0 += step) {
                    out.emplace_back(ScenarioKey{c, v0, vlim, quantize_milli(ramp)});
                }
            }
        }
    }
    if (out.empty()) {
        throw EmptyGrid("the scenario grid is empty");
    }
    return out;
}

std::size_t scenario_count(const GridConfig& grid) {
    grid.validate();
    const std::int64_t step = step_centi(grid);
    const std::int64_t cap = quantize_centi(grid.v_cap);
    auto has = [&](ScenarioCase c) { return std::find(grid.cases.begin(), grid.cases.end(), c) != grid.cases.end(); };
    auto distinct = [](std::vector<double> r) {
        std::vector<std::int32_t> q;
        for (double x : r) {
            q.push_back(quantize_milli(x));
        }
        std::sort(q.begin(), q.end());
        return static_cast<std::int64_t>(std::unique(q.begin(), q.end()) - q.begin());
    };
    std::vector<std::int32_t> vlims;
    for (double v : grid.vlims) {
        vlims.push_back(quantize_centi(v));
    }
    std::sort(vlims.begin(), vlims.end());
    vlims.erase(std::unique(vlims.begin(), vlims.end()), vlims.end());

    std::int64_t total = 0;
    for (std::int64_t vlim : vlims) {
        if (has(ScenarioCase::ConstantVelocity)) {
            total += (vlim - constant_first_centi(static_cast<std::int32_t>(vlim), static_cast<std::int32_t>(step))) / step + 1;
        }
        if (has(ScenarioCase::Accelerate)) {
            total += distinct(grid.accel_ramps) * (vlim / step + 1);
        }
        const std::int64_t full = cap / step + 1;
        if (has(ScenarioCase::Decelerate)) {
            total += distinct(grid.decel_ramps) * full;
        }
        if (has(ScenarioCase::Stop)) {
            total += distinct(grid.stop_ramps) * full;
        }
    }
    return static_cast<std::size_t>(total);
}

LibraryConfig library_config_from(const std::vector<KeyValue>& entries) {
    std::vector<KeyValue> model, solver;
    LibraryConfig config;
    GridConfig& g = config.grid;
    for (const auto& kv : entries) {
        const auto dot = kv.key.find('.');
        const std::string section = dot == std::string::npos ? "" : kv.key.substr(0, dot);
        KeyValue inner{dot == std::string::npos ? kv.key : kv.key.substr(dot + 1), kv.value, kv.line};
        if (section == "model") {
            model.push_back(std::move(inner));
        } else if (section == "solver") {
            solver.push_back(std::move(inner));
        } else if (section == "grid") {
            const std::string& name = inner.key;
            if (name == "v_step") {
                g.v_step = parse_number(kv.value, kv.line);
            } else if (name == "v_cap") {
                g.v_cap = parse_number(kv.value, kv.line);
            } else if (name == "vlims") {
                g.vlims = parse_number_list(kv.value, kv.line);
            } else if (name == "accel_ramps") {
                g.accel_ramps = parse_number_list(kv.value, kv.line);
            } else if (name == "decel_ramps") {
                g.decel_ramps = parse_number_list(kv.value, kv.line);
            } else if (name == "stop_ramps") {
                g.stop_ramps = parse_number_list(kv.value, kv.line);
            } else if (name == "cases") {
                g.cases.clear();
                for (const auto& item : split(kv.value, ',')) {
                    const auto t = tokens(item);
                    if (t.size() != 1) {
                        throw FormatError(kv.line, "bad case list '" + kv.value + "'");
                    }
                    try {
                        g.cases.push_back(scenario_case_from_string(t[0]));
                    } catch (const FormatError&) {
                        throw;
                    } catch (const Error& e) {
                        throw FormatError(kv.line, e.what());
                    }
                }
            } else {
                throw FormatError(kv.line, "unknown grid parameter '" + name + "'");
            }
        } else {
            throw FormatError(kv.line, "expected a model., solver. or grid. prefix on '" + kv.key + "'");
        }
    }
    config.model = model_params_from(model);
    config.solver = solver_config_from(solver);
    g.validate();
    return config;
}

LibraryConfig load_library_config(const std::string& path) { return library_config_from(read_key_value_file(path)); }

std::vector<std::pair<std::string, std::string>> library_params(const LibraryConfig& config) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& [name, value] : config.model.named_values()) {
        out.emplace_back("model." + name, format_exact(value));
    }
    for (const auto& [name, value] : config.solver.named_values()) {
        out.emplace_back("solver." + name, format_exact(value));
    }
    const GridConfig& g = config.grid;
    out.emplace_back("grid.v_step", format_exact(g.v_step));
    out.emplace_back("grid.v_cap", format_exact(g.v_cap));
    out.emplace_back("grid.vlims", join(g.vlims));
    out.emplace_back("grid.accel_ramps", join(g.accel_ramps));
    out.emplace_back("grid.decel_ramps", join(g.decel_ramps));
    out.emplace_back("grid.stop_ramps", join(g.stop_ramps));
    std::string cases;
    for (ScenarioCase c : g.cases) {
        cases += (cases.empty() ? "" : ",") + std::string(to_string(c));
    }
    out.emplace_back("grid.cases", cases);
    out.emplace_back("grid.scenario_count", std::to_string(scenario_count(g)));
    return out;
}

Library::Library(LibraryConfig config, std::vector<LibraryEntry> entries)
    : config_(std::move(config)), entries_(std::move(entries)) {
    index();
}

std::uint64_t Library::config_hash() const { return hash_params(library_params(config_)); }

std::uint64_t Library::row_id(ScenarioCase kase, std::int32_t vlim_centi, std::int32_t ramp_milli) {
    return (static_cast<std::uint64_t>(kase) << 56) ^ (static_cast<std::uint64_t>(static_cast<std::uint32_t>(vlim_centi)) << 24) ^
           static_cast<std::uint64_t>(static_cast<std::uint32_t>(ramp_milli));
}

void Library::index() {
    rows_.clear();
    const std::int32_t step = std::max<std::int32_t>(1, step_centi(config_.grid));
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const ScenarioKey& k = entries_[i].key();
        const std::uint64_t id = row_id(k.kase, k.vlim_centi, k.ramp_milli);
        auto [it, inserted] = rows_.try_emplace(id, Row{i, 1, k.v0_centi, step});
        if (inserted) {
            continue;
        }
        Row& row = it->second;
        if (row.first + row.count != i || k.v0_centi != row.v0_first_centi + static_cast<std::int32_t>(row.count) * step) {
            throw Error("library row " + to_string(k) + " is not a contiguous velocity run");
        }
        ++row.count;
    }
}

LookupResult Library::lookup(double v_kmh, ScenarioCase kase, double vlim_kmh, double ramp) const {
    const std::int32_t ramp_milli = kase == ScenarioCase::ConstantVelocity ? 0 : quantize_milli(ramp);
    const auto it = rows_.find(row_id(kase, quantize_centi(vlim_kmh), ramp_milli));
    if (it == rows_.end()) {
        throw NoFeasibleScenario("no library row for " + std::string(to_string(kase)) + " v_lim " +
                                 format_decimal(vlim_kmh) + " ramp " + format_decimal(ramp));
    }
    const Row& row = it->second;
    const double pos = (v_kmh * 100.0 - row.v0_first_centi) / row.step_centi;
    LookupResult result;
    std::size_t idx = 0;
    if (pos > 0.0) {
        // The 1e-9 slack keeps exact grid velocities (after km/h <-> m/s
        // round trips) on their own entry instead of the next one up.
        const double up = std::ceil(pos - 1e-9);
        if (up >= static_cast<double>(row.count)) {
            idx = row.count - 1;
            result.clamped = up > static_cast<double>(row.count - 1);
        } else {
            idx = static_cast<std::size_t>(up);
        }
    }
    for (; idx < row.count; ++idx) {
        const LibraryEntry& e = entries_[row.first + idx];
        if (e.feasible()) {
            result.entry = &e;
            return result;
        }
    }
    throw NoFeasibleScenario("no feasible " + std::string(to_string(kase)) + " scenario at or above " +
                             format_decimal(v_kmh) + " km/h (v_lim " + format_decimal(vlim_kmh) + ")");
}

std::vector<double> Library::vlims() const {
    std::vector<double> out;
    for (const auto& e : entries_) {
        out.push_back(e.key().vlim_centi / 100.0);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<double> Library::ramps(ScenarioCase kase) const {
    std::vector<double> out;
    for (const auto& e : entries_) {
        if (e.key().kase == kase) {
            out.push_back(e.key().ramp_milli / 1000.0);
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

const LibraryEntry* Library::find(const ScenarioKey& key) const {
    const auto it = rows_.find(row_id(key.kase, key.vlim_centi, key.ramp_milli));
    if (it == rows_.end()) {
        return nullptr;
    }
    const Row& row = it->second;
    const std::int32_t offset = key.v0_centi - row.v0_first_centi;
    if (offset < 0 || offset % row.step_centi != 0 || static_cast<std::size_t>(offset / row.step_centi) >= row.count) {
        return nullptr;
    }
    return &entries_[row.first + static_cast<std::size_t>(offset / row.step_centi)];
}

Library build_library(const LibraryConfig& config, unsigned workers, const BuildProgress& progress) {
    config.model.validate();
    config.solver.validate();
    const std::vector<Scenario> scenarios = enumerate_scenarios(config.grid);
    std::vector<LibraryEntry> entries(scenarios.size());
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> done{0};
    std::mutex progress_mutex;

    auto work = [&] {
        for (std::size_t i = next++; i < scenarios.size(); i = next++) {
            LibraryEntry& e = entries[i];
            e.front.scenario = scenarios[i].key();
            try {
                const ParetoSet f = solve_mocp(make_mocp(scenarios[i], config.model, config.solver));
                std::vector<ParetoEntry> rounded;
                rounded.reserve(f.size());
                for (const auto& p : f.entries) {
                    rounded.push_back({ControlSignal{round_to_persisted(p.u.torque)},
                                       {round_to_persisted(p.objectives.j1), round_to_persisted(p.objectives.j2)}});
                }
                e.front.entries = nondominated_filter(std::move(rounded));
            } catch (const NoFeasibleControl&) {
                e.infeasible_reason = "no-feasible-control";
            } catch (const Error& err) {
                std::string reason = std::string("error: ") + err.what();
                std::replace(reason.begin(), reason.end(), '\n', ' ');
                e.infeasible_reason = reason;
            }
            const std::size_t d = ++done;
            if (progress) {
                std::lock_guard lock(progress_mutex);
                progress(d, scenarios.size());
            }
        }
    };

    workers = std::max(1u, workers);
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < workers; ++w) {
        pool.emplace_back(work);
    }
    work();
    for (auto& t : pool) {
        t.join();
    }
    return Library(config, std::move(entries));
}

void save_library(const Library& library, std::ostream& out) {
    const auto params = library_params(library.config());
    out << kMagic << '\n' << "confighash " << hex64(hash_params(params)) << '\n';
    for (const auto& [name, value] : params) {
        out << "param " << name << ' ' << value << '\n';
    }
    for (const auto& e : library.entries()) {
        const ScenarioKey& k = e.key();
        out << "scenario " << to_string(k.kase) << ' ' << k.v0_centi << ' ' << k.vlim_centi << ' ' << k.ramp_milli
            << ' ';
        if (!e.feasible()) {
            out << "INFEASIBLE " << e.infeasible_reason << '\n';
            continue;
        }
        out << e.front.size() << '\n';
        for (const auto& p : e.front.entries) {
            out << "point " << format_decimal(p.u.torque) << ' ' << format_decimal(p.objectives.j1) << ' '
                << format_decimal(p.objectives.j2) << '\n';
        }
    }
}

void save_library(const Library& library, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write library file: " + path);
    }
    save_library(library, out);
    if (!out.flush()) {
        throw Error("failed writing library file: " + path);
    }
}

Library load_library(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    auto next_line = [&]() -> bool {
        if (!std::getline(in, line)) {
            return false;
        }
        ++line_no;
        return true;
    };

    if (!next_line() || line != kMagic) {
        throw FormatError(1, "bad magic, expected '" + std::string(kMagic) + "'");
    }
    if (!next_line()) {
        throw FormatError(2, "truncated: expected confighash");
    }
    const auto hash_tokens = tokens(line);
    if (hash_tokens.size() != 2 || hash_tokens[0] != "confighash") {
        throw FormatError(2, "expected 'confighash <hex>'");
    }
    const std::size_t hash_line = line_no;

    std::vector<std::pair<std::string, std::string>> params;
    std::vector<KeyValue> config_entries;
    std::size_t declared_count = 0;
    bool have_count = false;
    bool pending = next_line();
    while (pending && line.rfind("param ", 0) == 0) {
        const auto t = tokens(line);
        if (t.size() != 3) {
            throw FormatError(line_no, "expected 'param <name> <value>'");
        }
        params.emplace_back(t[1], t[2]);
        if (t[1] == "grid.scenario_count") {
            declared_count = static_cast<std::size_t>(parse_int(t[2], line_no));
            have_count = true;
        } else {
            config_entries.push_back({t[1], t[2], line_no});
        }
        pending = next_line();
    }
    if (!have_count) {
        throw FormatError(line_no, "missing param grid.scenario_count");
    }
    if (hex64(hash_params(params)) != hash_tokens[1]) {
        throw FormatError(hash_line, "config hash mismatch: header " + hash_tokens[1] + ", parameters hash to " +
                                         hex64(hash_params(params)));
    }
    LibraryConfig config;
    try {
        config = library_config_from(config_entries);
    } catch (const FormatError&) {
        throw;
    } catch (const Error& e) {
        throw FormatError(hash_line, e.what());
    }
    const std::vector<Scenario> expected = enumerate_scenarios(config.grid);
    if (expected.size() != declared_count) {
        throw FormatError(hash_line, "scenario_count does not match the grid");
    }

    std::vector<LibraryEntry> entries;
    entries.reserve(expected.size());
    while (pending) {
        const std::size_t scenario_line = line_no;
        const auto t = tokens(line);
        if (t.empty()) {
            pending = next_line();
            continue;
        }
        if (t[0] != "scenario" || t.size() < 6) {
            throw FormatError(line_no, "expected 'scenario <case> <v0> <vlim> <ramp> <n|INFEASIBLE>'");
        }
        LibraryEntry e;
        try {
            e.front.scenario.kase = scenario_case_from_string(t[1]);
        } catch (const Error& err) {
            throw FormatError(line_no, err.what());
        }
        e.front.scenario.v0_centi = parse_int(t[2], line_no);
        e.front.scenario.vlim_centi = parse_int(t[3], line_no);
        e.front.scenario.ramp_milli = parse_int(t[4], line_no);
        if (entries.size() >= expected.size() || expected[entries.size()].key() != e.front.scenario) {
            throw FormatError(line_no, "unexpected scenario " + to_string(e.front.scenario));
        }
        if (t[5] == "INFEASIBLE") {
            const auto pos = line.find("INFEASIBLE");
            e.infeasible_reason = pos + 11 <= line.size() ? line.substr(pos + 11) : std::string{};
            if (e.infeasible_reason.empty()) {
                e.infeasible_reason = "unspecified";
            }
            entries.push_back(std::move(e));
            pending = next_line();
            continue;
        }
        if (t.size() != 6) {
            throw FormatError(line_no, "trailing tokens after point count");
        }
        const std::int32_t n = parse_int(t[5], line_no);
        if (n <= 0) {
            throw FormatError(line_no, "point count must be positive");
        }
        for (std::int32_t k = 0; k < n; ++k) {
            if (!next_line()) {
                throw FormatError(line_no + 1, "truncated: scenario " + to_string(e.front.scenario) + " expects " +
                                                   std::to_string(n) + " points");
            }
            const auto pt = tokens(line);
            if (pt.size() != 4 || pt[0] != "point") {
                throw FormatError(line_no, "expected 'point <u> <J1> <J2>'");
            }
            e.front.entries.push_back({ControlSignal{parse_number(pt[1], line_no)},
                                       {parse_number(pt[2], line_no), parse_number(pt[3], line_no)}});
        }
        if (!is_monotone_front(e.front.entries)) {
            const auto& pts = e.front.entries;
            for (std::size_t a = 0; a < pts.size(); ++a) {
                for (std::size_t b = 0; b < pts.size(); ++b) {
                    if (a != b && (dominates(pts[b].objectives, pts[a].objectives) || pts[b].objectives == pts[a].objectives)) {
                        throw FormatError(scenario_line, "nondominance violation in scenario " +
                                                             to_string(e.front.scenario) + ": point " +
                                                             std::to_string(a + 1) + " is dominated by point " +
                                                             std::to_string(b + 1));
                    }
                }
            }
            throw FormatError(scenario_line, "points of scenario " + to_string(e.front.scenario) +
                                                 " are not sorted by ascending J2");
        }
        entries.push_back(std::move(e));
        pending = next_line();
    }
    if (entries.size() != expected.size()) {
        throw FormatError(line_no + 1, "truncated: expected " + std::to_string(expected.size()) + " scenarios, found " +
                                           std::to_string(entries.size()));
    }
    return Library(std::move(config), std::move(entries));
}

Library load_library(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open library file: " + path);
    }
    return load_library(in);
}

}  // namespace mompc
