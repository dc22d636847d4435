// mwsim: solves and calibrates the two-sector directed-search labor market
// model, sweeps joint minimum-wage/tax grids, evaluates sufficient-statistic
// welfare conditions, and runs stacked event-study estimation.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "mwsim/calibration.hpp"
#include "mwsim/config.hpp"
#include "mwsim/econpanel.hpp"
#include "mwsim/equilibrium.hpp"
#include "mwsim/errors.hpp"
#include "mwsim/policy_grid.hpp"
#include "mwsim/report.hpp"
#include "mwsim/suffstats.hpp"

namespace fs = std::filesystem;
using namespace mwsim;

namespace {

struct GlobalArgs {
    std::optional<std::string> config_path;
    std::string out_dir = ".";
    int jobs = 1;
    uint64_t seed = 1;
    std::vector<std::string> overrides;
    std::string format = "csv";  // csv | json
};

void add_common(CLI::App* cmd, GlobalArgs& g) {
    cmd->add_option("--config", g.config_path, "key=value config file");
    cmd->add_option("--out", g.out_dir, "output directory");
    cmd->add_option("--jobs", g.jobs, "worker count (output is identical for any value)");
    cmd->add_option("--seed", g.seed, "random seed for stochastic components");
    cmd->add_option("--set", g.overrides, "config override key=value (repeatable)");
    cmd->add_option("--format", g.format, "csv or json")
        ->check(CLI::IsMember({"csv", "json"}));
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    if (!out) throw DataError("cannot open for writing: " + p.string());
    out << text;
}

void write_resolved_config(const Config& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    write_text(fs::path(out_dir) / "run_config.cfg", cfg.serialize());
}

int run_solve(const GlobalArgs& g) {
    Config cfg = Config::load(g.config_path, g.overrides);
    write_resolved_config(cfg, g.out_dir);
    ModelParams mp = cfg.model_params();
    Policy pol = cfg.baseline_policy();
    SolveOptions opt = SolveOptions::from_config(cfg);
    Equilibrium eq;
    if (cfg.get_bool("close_budget", true)) {
        eq = close_budget(mp, pol, opt);
    } else {
        eq = solve_at_policy(mp, pol, opt);
    }
    MomentSet moments = compute_moments(mp, pol, opt);
    auto meta = metadata_lines(cfg, g.seed, g.jobs);
    fs::create_directories(g.out_dir);
    if (g.format == "json") {
        write_text(fs::path(g.out_dir) / "equilibrium.json",
                   equilibrium_json(eq, &moments, meta));
    } else {
        write_equilibrium_csv((fs::path(g.out_dir) / "equilibrium.csv").string(), eq,
                              meta);
    }
    if (!eq.feasible) {
        std::cerr << "infeasible policy: " << eq.infeasible_reason << "\n";
        return 5;
    }
    return 0;
}

int run_calibrate(const GlobalArgs& g) {
    Config cfg = Config::load(g.config_path, g.overrides);
    write_resolved_config(cfg, g.out_dir);
    CalibrationSpec spec = CalibrationSpec::bundled_default(cfg);
    spec.seed = g.seed;
    EstimateResult res = estimate(spec);
    auto meta = metadata_lines(cfg, g.seed, g.jobs);
    fs::create_directories(g.out_dir);
    write_calibration_trace_csv((fs::path(g.out_dir) / "calibration_trace.csv").string(),
                                res, meta);
    write_text(fs::path(g.out_dir) / "calibration.json", calibration_json(res, meta));
    if (!res.converged)
        std::cerr << "calibration: budget exhausted before tolerance (best loss "
                  << res.best_loss << ")\n";
    return 0;
}

int run_grid(const GlobalArgs& g) {
    Config cfg = Config::load(g.config_path, g.overrides);
    write_resolved_config(cfg, g.out_dir);
    ModelParams mp = cfg.model_params();
    SolveOptions opt = SolveOptions::from_config(cfg);
    PolicyGrid grid = PolicyGrid::from_config(cfg);
    WelfareSurface surf = sweep(mp, grid, opt, g.jobs);
    auto env = envelope(surf);
    auto optima = optimal_mw_per_tax(surf);
    JointOptimum opt_cell = joint_optimum(surf);
    auto meta = metadata_lines(cfg, g.seed, g.jobs);
    fs::create_directories(g.out_dir);
    write_surface_csv((fs::path(g.out_dir) / "surface.csv").string(), surf, meta);
    write_envelope_csv((fs::path(g.out_dir) / "envelope.csv").string(), env, meta);
    write_optima_csv((fs::path(g.out_dir) / "optimal_mw.csv").string(), optima, meta);
    write_text(fs::path(g.out_dir) / "grid_summary.json",
               grid_summary_json(surf, opt_cell, meta));
    return 0;
}

int run_suffstats(const GlobalArgs& g) {
    Config cfg = Config::load(g.config_path, g.overrides);
    write_resolved_config(cfg, g.out_dir);
    Table5Inputs in = Table5Inputs::bundled(cfg);
    auto cells = table5_report(in);
    auto meta = metadata_lines(cfg, g.seed, g.jobs);
    fs::create_directories(g.out_dir);
    write_table5_csv((fs::path(g.out_dir) / "table5.csv").string(), cells, meta);
    return 0;
}

int run_events(const GlobalArgs& g) {
    Config cfg = Config::load(g.config_path, g.overrides);
    write_resolved_config(cfg, g.out_dir);
    std::string mw_path = cfg.get_string("mw_panel_csv", "");
    std::string deflator_path = cfg.get_string("deflator_csv", "");
    std::string outcomes_path = cfg.get_string("outcomes_csv", "");
    if (mw_path.empty() || deflator_path.empty() || outcomes_path.empty())
        throw ConfigError(
            "events: set mw_panel_csv, deflator_csv and outcomes_csv in the config");
    MwPanel panel = MwPanel::from_csv(mw_path, deflator_path);
    OutcomePanel outcomes = OutcomePanel::from_csv(outcomes_path);

    EventRules rules;
    rules.min_real_increase = cfg.get_double("event_min_real_increase", 0.25);
    rules.min_affected_share = cfg.get_double("event_min_affected_share", 0.02);
    rules.clean_pre_years = cfg.get_int("event_clean_pre_years", 3);
    rules.window_pre = cfg.get_int("event_window_pre", 3);
    rules.window_post = cfg.get_int("event_window_post", 4);

    EventDetection det = detect_events(panel, rules);
    StackedPanel stack = build_stack(outcomes, det, rules);

    FitSpec fspec;
    std::string te = cfg.get_string("time_effects", "year_by_event");
    if (te == "region_year_event") fspec.time_effects = TimeEffects::region_year_event;
    else if (te == "division_year_event") fspec.time_effects = TimeEffects::division_year_event;
    else if (te != "year_by_event") throw ConfigError("events: unknown time_effects " + te);
    fspec.by_industry = cfg.get_bool("by_industry", false);
    fspec.include_controls = cfg.get_bool("include_increase_controls", true);

    auto meta = metadata_lines(cfg, g.seed, g.jobs);
    fs::create_directories(g.out_dir);

    fspec.event_study = true;
    EstimateReport es = fit_fe(stack, fspec);
    write_coefficients_csv((fs::path(g.out_dir) / "event_study.csv").string(), es, meta);

    fspec.event_study = false;
    EstimateReport did = fit_fe(stack, fspec);
    write_coefficients_csv((fs::path(g.out_dir) / "did.csv").string(), did, meta);
    write_text(fs::path(g.out_dir) / "events_summary.json",
               events_summary_json(did, det, meta));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"two-sector directed-search policy engine"};
    app.require_subcommand(1);
    GlobalArgs g;

    auto* solve = app.add_subcommand("solve", "solve one policy and report the equilibrium");
    add_common(solve, g);
    auto* calibrate = app.add_subcommand("calibrate", "estimate parameters by moment matching");
    add_common(calibrate, g);
    auto* grid = app.add_subcommand("grid", "sweep the policy grid and find the joint optimum");
    add_common(grid, g);
    auto* suffstats = app.add_subcommand("suffstats", "critical welfare-weight report");
    add_common(suffstats, g);
    auto* events = app.add_subcommand("events", "stacked event-study estimation");
    add_common(events, g);

    CLI11_PARSE(app, argc, argv);

    try {
        if (solve->parsed()) return run_solve(g);
        if (calibrate->parsed()) return run_calibrate(g);
        if (grid->parsed()) return run_grid(g);
        if (suffstats->parsed()) return run_suffstats(g);
        if (events->parsed()) return run_events(g);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const SolverError& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return 3;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 4;
    } catch (const InfeasiblePolicy& e) {
        std::cerr << "infeasible policy: " << e.what() << "\n";
        return 5;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
