#include <atomic>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "mompc/dp_baseline.hpp"
#include "mompc/errors.hpp"
#include "mompc/invariance_analyzer.hpp"
#include "mompc/mocp_solver.hpp"
#include "mompc/mpc_controller.hpp"
#include "mompc/scenario_library.hpp"
#include "mompc/service/ws_server.hpp"
#include "mompc/units.hpp"

namespace {

using namespace mompc;

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

/// "case:v0:vlim[:ramp]" in km/h and (km/h)/m.
Scenario parse_scenario(const std::string& text) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string part; std::getline(ss, part, ':');) {
        parts.push_back(part);
    }
    if (parts.size() < 3 || parts.size() > 4) {
        throw ConfigError("scenario must be case:v0:vlim[:ramp], got '" + text + "'");
    }
    return Scenario::make(scenario_case_from_string(parts[0]), parse_number(parts[1], 0), parse_number(parts[2], 0),
                          parts.size() == 4 ? parse_number(parts[3], 0) : 0.0);
}

void print_front(const ParetoSet& front) {
    std::printf("%14s %16s %12s\n", "u [N m]", "J1 [dS]", "J2 [s]");
    for (const auto& e : front.entries) {
        std::printf("%14.6f %16.9e %12.6f\n", e.u.torque, e.objectives.j1, e.objectives.j2);
    }
}

struct DriveOptions {
    std::string track;
    std::string library;
    std::string params;
    std::string mpc;
    double rho = -1.0;
    std::string schedule;
    bool heuristic = false;
    double dwell = -1.0;
};

void add_drive_options(CLI::App* cmd, DriveOptions& o) {
    cmd->add_option("--track", o.track, "track file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--library", o.library, "library file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--params", o.params, "plant model parameters (default: the library's model)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--mpc", o.mpc, "controller settings file")->check(CLI::ExistingFile);
    cmd->add_option("--dwell", o.dwell, "rest time at stop signs [s]");
}

ModelParams plant_params(const DriveOptions& o, const Library& library) {
    return o.params.empty() ? library.config().model : load_model_params(o.params);
}

MpcConfig controller_config(const DriveOptions& o) {
    MpcConfig c = o.mpc.empty() ? MpcConfig{} : mpc_config_from(read_key_value_file(o.mpc));
    if (o.dwell >= 0.0) {
        c.stop_dwell = o.dwell;
    }
    return c;
}

RhoPolicy rho_policy(const DriveOptions& o, const MpcConfig& config) {
    const int chosen = (o.rho >= 0.0 ? 1 : 0) + (o.schedule.empty() ? 0 : 1) + (o.heuristic ? 1 : 0);
    if (chosen != 1) {
        throw ConfigError("choose exactly one of --rho, --rho-schedule, --rho-heuristic");
    }
    if (o.rho >= 0.0) {
        if (o.rho > 1.0) {
            throw ConfigError("--rho must lie in [0, 1]");
        }
        return fixed_rho(o.rho);
    }
    if (!o.schedule.empty()) {
        return scheduled_rho(load_rho_schedule(o.schedule));
    }
    return heuristic_rho_policy(config.heuristic);
}

void print_drive_summary(const DriveLog& log, double beta) {
    std::printf("t_end      %.4f s\n", log.totals.j2);
    std::printf("dS         %.9f\n", log.totals.j1);
    std::printf("wheel E    %.1f J\n", log.wheel_energy);
    std::printf("J          %.6f (beta %g)\n", log.totals.j2 + beta * log.wheel_energy, beta);
    for (const auto& r : log.stops) {
        std::printf("stop sign  %.3f m  rest at %.4f m (%+.4f)\n", r.sign, r.position, r.position - r.sign);
    }
    for (const auto& w : log.warnings) {
        std::fprintf(stderr, "warning: %s\n", w.c_str());
    }
}

unsigned short default_port() {
    if (const char* env = std::getenv("MOMPC_PORT"); env != nullptr && *env != '\0') {
        const int port = std::atoi(env);
        if (port < 0 || port > 65535) {
            throw ConfigError(std::string("MOMPC_PORT out of range: ") + env);
        }
        return static_cast<unsigned short>(port);
    }
    return 8765;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multiobjective MPC for electric-vehicle longitudinal control"};
    app.require_subcommand(1);

    // build-library
    std::string lib_config, lib_out;
    unsigned workers = std::max(1u, std::thread::hardware_concurrency());
    bool reuse = false;
    auto* build = app.add_subcommand("build-library", "solve every scenario of a grid and save the library");
    build->add_option("--config", lib_config, "library config (model.*, solver.*, grid.*)")->check(CLI::ExistingFile);
    build->add_option("--out", lib_out, "output library file")->required();
    build->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
    build->add_flag("--reuse", reuse, "keep an existing output whose config hash matches");

    // enumerate
    bool list = false;
    auto* enumerate = app.add_subcommand("enumerate", "count (or list) the scenarios of a grid");
    enumerate->add_option("--config", lib_config, "library config")->check(CLI::ExistingFile);
    enumerate->add_flag("--list", list, "print every scenario key");

    // solve
    std::string scenario_text, params_file, solver_file;
    int oracle = 0;
    auto* solve = app.add_subcommand("solve", "compute the Pareto front of one scenario");
    solve->add_option("--scenario", scenario_text, "case:v0:vlim[:ramp], e.g. accelerate:60:100:0.05")->required();
    solve->add_option("--params", params_file, "model parameters")->check(CLI::ExistingFile);
    solve->add_option("--solver", solver_file, "solver settings")->check(CLI::ExistingFile);
    solve->add_option("--oracle", oracle, "also print a brute-force front over N controls");

    // drive
    DriveOptions drive_opts;
    std::string log_out;
    double beta = 6e-5;
    auto* drive = app.add_subcommand("drive", "run the receding-horizon controller along a track");
    add_drive_options(drive, drive_opts);
    drive->add_option("--rho", drive_opts.rho, "fixed preference in [0, 1]");
    drive->add_option("--rho-schedule", drive_opts.schedule, "position/rho schedule file")->check(CLI::ExistingFile);
    drive->add_flag("--rho-heuristic", drive_opts.heuristic, "velocity-based preference heuristic");
    drive->add_option("--log", log_out, "write the drive log CSV");
    drive->add_option("--beta", beta, "energy weight for the reported J [s/J]");

    // compare-dp
    std::string track_file, library_file, mpc_log, report_file, dp_log;
    DpConfig dp_config;
    auto* cmp = app.add_subcommand("compare-dp", "compare a drive log against the dynamic-programming optimum");
    cmp->add_option("--track", track_file, "track without stop signs")->required()->check(CLI::ExistingFile);
    cmp->add_option("--library", library_file, "library whose model the drive used")->required()->check(
        CLI::ExistingFile);
    cmp->add_option("--beta", dp_config.beta, "energy weight [s/J]");
    cmp->add_option("--log", mpc_log, "controller drive log CSV")->required()->check(CLI::ExistingFile);
    cmp->add_option("--report", report_file, "CSV report");
    cmp->add_option("--stages", dp_config.stage_count, "position stages");
    cmp->add_option("--v-step", dp_config.v_step, "velocity node spacing [km/h]");
    cmp->add_option("--dp-log", dp_log, "write the DP profile as a drive log");

    // invariance
    double u_inv = 100.0;
    double dp_pos = 250.0, ds = -0.3, dv_kmh = 5.0, dudl = 1.0, duds = 1.0;
    std::string csv_out;
    auto* inv = app.add_subcommand("invariance", "check flow and Pareto-set invariance under state translations");
    inv->add_option("--scenario", scenario_text, "case:v0:vlim[:ramp]")->default_val("accelerate:60:100:0.05");
    inv->add_option("--u", u_inv, "control for the flow check [N m]");
    inv->add_option("--delta-p", dp_pos, "position shift [m]");
    inv->add_option("--delta-s", ds, "state-of-charge shift");
    inv->add_option("--delta-v", dv_kmh, "velocity shift [km/h]");
    inv->add_option("--delta-udl", dudl, "long-term voltage-drop shift [V]");
    inv->add_option("--delta-uds", duds, "short-term voltage-drop shift [V]");
    inv->add_option("--params", params_file, "model parameters")->check(CLI::ExistingFile);
    inv->add_option("--solver", solver_file, "solver settings")->check(CLI::ExistingFile);
    inv->add_option("--csv", csv_out, "CSV report");

    // serve
    DriveOptions serve_opts;
    int port = -1;
    std::string host = "127.0.0.1";
    double speed = 1.0, rho0 = 0.5;
    auto* serve = app.add_subcommand("serve", "run a drive as a websocket service");
    add_drive_options(serve, serve_opts);
    serve->add_option("--port", port, "listen port (default $MOMPC_PORT or 8765)");
    serve->add_option("--host", host, "listen address");
    serve->add_option("--speed", speed, "simulated seconds per wall second")->check(CLI::PositiveNumber);
    serve->add_option("--rho0", rho0, "initial preference")->check(CLI::Range(0.0, 1.0));
    serve->add_option("--log", log_out, "write the drive log CSV on finish");

    // replay
    std::string replay_log;
    auto* rep = app.add_subcommand("replay", "stream a recorded drive log over a websocket");
    rep->add_option("--log", replay_log, "drive log CSV")->required()->check(CLI::ExistingFile);
    rep->add_option("--port", port, "listen port (default $MOMPC_PORT or 8765)");
    rep->add_option("--host", host, "listen address");
    rep->add_option("--speed", speed, "simulated seconds per wall second")->check(CLI::PositiveNumber);
    rep->add_option("--track", track_file, "track for the corridor limits")->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        if (build->parsed()) {
            const LibraryConfig config = lib_config.empty() ? LibraryConfig{} : load_library_config(lib_config);
            if (reuse && std::filesystem::exists(lib_out)) {
                try {
                    const Library existing = load_library(lib_out);
                    if (existing.config_hash() == Library(config, {}).config_hash()) {
                        std::printf("%s is up to date\n", lib_out.c_str());
                        return 0;
                    }
                } catch (const Error& e) {
                    std::fprintf(stderr, "rebuilding: %s\n", e.what());
                }
            }
            std::size_t last = 0;
            const Library library = build_library(config, workers, [&](std::size_t done, std::size_t total) {
                if (done * 20 / total != last * 20 / total || done == total) {
                    std::fprintf(stderr, "\r%zu / %zu scenarios", done, total);
                }
                last = done;
            });
            std::fprintf(stderr, "\n");
            save_library(library, lib_out);
            std::size_t infeasible = 0;
            for (const auto& e : library.entries()) {
                infeasible += e.feasible() ? 0 : 1;
            }
            std::printf("%zu scenarios, %zu infeasible, written to %s\n", library.entries().size(), infeasible,
                        lib_out.c_str());
        } else if (enumerate->parsed()) {
            const LibraryConfig config = lib_config.empty() ? LibraryConfig{} : load_library_config(lib_config);
            if (list) {
                for (const auto& s : enumerate_scenarios(config.grid)) {
                    std::printf("%s\n", to_string(s.key()).c_str());
                }
            }
            std::printf("%zu scenarios\n", scenario_count(config.grid));
        } else if (solve->parsed()) {
            const ModelParams params = params_file.empty() ? ModelParams{} : load_model_params(params_file);
            const SolverConfig solver =
                solver_file.empty() ? SolverConfig{} : solver_config_from(read_key_value_file(solver_file));
            const Mocp problem = make_mocp(parse_scenario(scenario_text), params, solver);
            print_front(solve_mocp(problem));
            if (oracle > 0) {
                std::printf("\nbrute force over %d controls\n", oracle);
                print_front(brute_force_front(problem, oracle));
            }
        } else if (drive->parsed()) {
            const Library library = load_library(drive_opts.library);
            const Track track = load_track(drive_opts.track);
            const MpcConfig config = controller_config(drive_opts);
            const DriveLog log =
                run_drive(track, rho_policy(drive_opts, config), library, plant_params(drive_opts, library), config);
            print_drive_summary(log, beta);
            if (!log_out.empty()) {
                write_drive_log(log, log_out);
            }
        } else if (cmp->parsed()) {
            const Library library = load_library(library_file);
            const Track track = load_track(track_file);
            dp_config.model = library.config().model;
            const DpSolution dp = solve_dp(track, dp_config);
            const DriveLog log = read_drive_log(mpc_log, dp_config.model);
            const DpComparison c = compare(log, dp, dp_config.beta);
            std::printf("beta        %g s/J\n", dp_config.beta);
            std::printf("DP          t %.4f s  E %.1f J  J %.6f\n", dp.time, dp.energy, c.dp_cost);
            std::printf("controller  t %.4f s  E %.1f J  J %.6f\n", c.mpc_time, c.mpc_energy, c.mpc_cost);
            std::printf("gap         %.6f (%.2f %%)  %s\n", c.gap, 100.0 * c.relative_gap,
                        c.comparable ? "comparable" : "not comparable");
            if (!report_file.empty()) {
                std::ofstream out(report_file);
                out << "beta,dp_time,dp_energy,dp_cost,mpc_time,mpc_energy,mpc_cost,gap,relative_gap,comparable\n"
                    << format_decimal(dp_config.beta) << ',' << format_decimal(dp.time) << ','
                    << format_decimal(dp.energy) << ',' << format_decimal(c.dp_cost) << ','
                    << format_decimal(c.mpc_time) << ',' << format_decimal(c.mpc_energy) << ','
                    << format_decimal(c.mpc_cost) << ',' << format_decimal(c.gap) << ','
                    << format_decimal(c.relative_gap) << ',' << (c.comparable ? 1 : 0) << '\n';
                if (!out) {
                    throw Error("cannot write " + report_file);
                }
            }
            if (!dp_log.empty()) {
                write_drive_log(dp_to_drive_log(dp, dp_config.model), dp_log);
            }
        } else if (inv->parsed()) {
            const ModelParams params = params_file.empty() ? ModelParams{} : load_model_params(params_file);
            const SolverConfig solver =
                solver_file.empty() ? SolverConfig{} : solver_config_from(read_key_value_file(solver_file));
            const std::vector<GroupAction> actions{{StateDimension::Position, dp_pos},
                                                   {StateDimension::Soc, ds},
                                                   {StateDimension::Velocity, kmh_to_mps(dv_kmh)},
                                                   {StateDimension::LongDrop, dudl},
                                                   {StateDimension::ShortDrop, duds}};
            const auto rows =
                invariance_report(parse_scenario(scenario_text), ControlSignal{u_inv}, actions, params, solver);
            write_invariance_table(rows, std::cout);
            if (!csv_out.empty()) {
                std::ofstream out(csv_out);
                write_invariance_csv(rows, out);
            }
        } else if (serve->parsed()) {
            const Library library = load_library(serve_opts.library);
            Track track = load_track(serve_opts.track);
            const MpcConfig config = controller_config(serve_opts);
            service::Session session(library, std::move(track), plant_params(serve_opts, library), config,
                                     {rho0, speed, log_out, true});
            service::WsServer server(port >= 0 ? static_cast<unsigned short>(port) : default_port(), host);
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::printf("serving on ws://%s:%u\n", host.c_str(), server.port());
            std::fflush(stdout);
            service::serve(session, server, {20.0, &g_stop});
        } else if (rep->parsed()) {
            const DriveLog log = read_drive_log(replay_log);
            std::optional<Track> track;
            if (!track_file.empty()) {
                track = load_track(track_file);
            }
            service::WsServer server(port >= 0 ? static_cast<unsigned short>(port) : default_port(), host);
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::printf("replaying %zu samples on ws://%s:%u\n", log.samples.size(), host.c_str(), server.port());
            std::fflush(stdout);
            service::replay(log, server, speed, track ? &*track : nullptr, &g_stop);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
