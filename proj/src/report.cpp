#include "mwsim/report.hpp"

#include "json.hpp"
#include "mwsim/csv.hpp"

namespace mwsim {

using nlohmann::json;
using nlohmann::ordered_json;

std::vector<std::string> metadata_lines(const Config& cfg, uint64_t seed, int jobs) {
    // accounting conventions ride along so any emitted number is
    // interpretable without the config file
    return {std::string("tool=") + kToolVersion,
            "config_hash=" + cfg.hash(),
            "seed=" + std::to_string(seed),
            "jobs=" + std::to_string(jobs),
            "hours_annualization=" + cfg.get_string("hours_annualization", "1811.16"),
            "capitalists_receive_lump_sum=" +
                cfg.get_string("capitalists_receive_lump_sum", "true"),
            "include_foreign_income=" + cfg.get_string("include_foreign_income", "false"),
            "truncate_worker_integral=" +
                cfg.get_string("truncate_worker_integral", "false")};
}

namespace {

ordered_json meta_json(const std::vector<std::string>& meta) {
    ordered_json m;
    for (const auto& line : meta) {
        auto eq = line.find('=');
        if (eq != std::string::npos) m[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return m;
}

}  // namespace

void write_equilibrium_csv(const std::string& path, const Equilibrium& eq,
                           const std::vector<std::string>& meta) {
    CsvWriter w(path);
    for (const auto& m : meta) w.comment(m);
    w.row({"key", "value"});
    for (const auto& [k, v] : eq.flat_record()) w.row({k, fmt_double(v)});
}

std::string equilibrium_json(const Equilibrium& eq, const MomentSet* moments,
                             const std::vector<std::string>& meta) {
    ordered_json j;
    j["meta"] = meta_json(meta);
    ordered_json rec;
    for (const auto& [k, v] : eq.flat_record()) rec[k] = v;
    j["equilibrium"] = rec;
    j["feasible"] = eq.feasible;
    if (!eq.feasible) j["infeasible_reason"] = eq.infeasible_reason;
    if (moments) {
        ordered_json m;
        for (int i = 0; i < MomentSet::kCount; ++i)
            m[MomentSet::names()[i]] = moments->values[i];
        j["moments"] = m;
    }
    return j.dump(2) + "\n";
}

void write_surface_csv(const std::string& path, const WelfareSurface& surf,
                       const std::vector<std::string>& meta) {
    CsvWriter w(path);
    for (const auto& m : meta) w.comment(m);
    w.row({"tau_l", "t", "mw_hourly", "feasible", "social_welfare", "y0", "wage_l",
           "wage_h", "employment_l", "unemployment_l", "profit_S", "mw_binding",
           "capped", "infeasible_reason"});
    for (const auto& c : surf.cells) {
        w.row({fmt_double(c.tau_l), fmt_double(c.t), fmt_double(c.mw_hourly),
               c.feasible ? "1" : "0",
               c.feasible ? fmt_double(c.social_welfare) : "",
               fmt_double(c.y0), fmt_double(c.wage_l), fmt_double(c.wage_h),
               fmt_double(c.employment_l), fmt_double(c.unemployment_l),
               fmt_double(c.profit_S), c.mw_binding ? "1" : "0",
               c.capped ? "1" : "0", c.infeasible_reason});
    }
}

void write_envelope_csv(const std::string& path,
                        const std::vector<EnvelopePoint>& env,
                        const std::vector<std::string>& meta) {
    CsvWriter w(path);
    for (const auto& m : meta) w.comment(m);
    w.row({"mw_hourly", "present", "tau_l", "t", "social_welfare", "tie"});
    for (const auto& p : env) {
        if (p.present)
            w.row({fmt_double(p.mw_hourly), "1", fmt_double(p.tau_l), fmt_double(p.t),
                   fmt_double(p.sw), p.tie ? "1" : "0"});
        else
            w.row({fmt_double(p.mw_hourly), "0", "", "", "", ""});
    }
}

void write_optima_csv(const std::string& path,
                      const std::vector<OptimalMwPoint>& pts,
                      const std::vector<std::string>& meta) {
    CsvWriter w(path);
    for (const auto& m : meta) w.comment(m);
    w.row({"tau_l", "t", "present", "mw_hourly", "social_welfare", "tie"});
    for (const auto& p : pts) {
        if (p.present)
            w.row({fmt_double(p.tau_l), fmt_double(p.t), "1", fmt_double(p.mw_hourly),
                   fmt_double(p.sw), p.tie ? "1" : "0"});
        else
            w.row({fmt_double(p.tau_l), fmt_double(p.t), "0", "", "", ""});
    }
}

std::string grid_summary_json(const WelfareSurface& surf, const JointOptimum& opt,
                              const std::vector<std::string>& meta) {
    ordered_json j;
    j["meta"] = meta_json(meta);
    j["grid"] = {{"tax_pairs", surf.grid.tax_pairs()},
                 {"mw_values", surf.grid.mw_values_hourly.size()},
                 {"cells", surf.grid.cells()},
                 {"tau_h", surf.grid.tau_h}};
    size_t feasible = 0, binding = 0, capped = 0;
    for (const auto& c : surf.cells) {
        feasible += c.feasible;
        binding += c.mw_binding;
        capped += c.capped;
    }
    j["cells_feasible"] = feasible;
    j["cells_mw_binding"] = binding;
    j["cells_capped_matching"] = capped;
    j["joint_optimum"] = {{"tau_l", opt.tau_l},
                          {"t", opt.t},
                          {"mw_hourly", opt.mw_hourly},
                          {"social_welfare", opt.sw},
                          {"tie", opt.tie}};
    return j.dump(2) + "\n";
}

void write_calibration_trace_csv(const std::string& path, const EstimateResult& res,
                                 const std::vector<std::string>& meta) {
    CsvWriter w(path);
    for (const auto& m : meta) w.comment(m);
    std::vector<std::string> hdr{"eval", "loss", "improved"};
    static const char* pnames[14] = {"delta0_l", "delta1_l", "lambda_l", "K_S",
                                     "psi_S",    "kappa0_l", "kappa1_l", "delta0_h",
                                     "delta1_h", "lambda_h", "K_M",      "psi_M",
                                     "kappa0_h", "kappa1_h"};
    for (const char* p : pnames) hdr.push_back(p);
    w.row(hdr);
    for (size_t i = 0; i < res.trace.size(); ++i) {
        std::vector<std::string> row{std::to_string(res.trace[i].eval),
                                     fmt_double(res.trace[i].loss),
                                     res.trace[i].improved ? "1" : "0"};
        for (double v : res.trace_params[i]) row.push_back(fmt_double(v));
        w.row(row);
    }
}

std::string calibration_json(const EstimateResult& res,
                             const std::vector<std::string>& meta) {
    ordered_json j;
    j["meta"] = meta_json(meta);
    j["best_loss"] = res.best_loss;
    j["converged"] = res.converged;
    j["evaluations"] = res.evaluations;
    auto x = pack_free_params(res.params);
    static const char* pnames[14] = {"delta0_l", "delta1_l", "lambda_l", "K_S",
                                     "psi_S",    "kappa0_l", "kappa1_l", "delta0_h",
                                     "delta1_h", "lambda_h", "K_M",      "psi_M",
                                     "kappa0_h", "kappa1_h"};
    ordered_json params;
    for (int i = 0; i < 14; ++i) params[pnames[i]] = x[i];
    j["params"] = params;
    ordered_json moments;
    for (int i = 0; i < MomentSet::kCount; ++i)
        moments[MomentSet::names()[i]] = res.moments[i];
    j["moments"] = moments;
    return j.dump(2) + "\n";
}

void write_table5_csv(const std::string& path, const std::vector<Table5Cell>& cells,
                      const std::vector<std::string>& meta) {
    CsvWriter w(path);
    for (const auto& m : meta) w.comment(m);
    w.comment("the optimal-tax micro-elasticity condition is out of scope: it needs");
    w.comment("variation in minimum wages holding after-tax allocations fixed, for");
    w.comment("which no identified empirical inputs exist");
    w.row({"panel_eps_profit", "period", "tax_basis", "mode", "g1_star", "raw",
           "clamped", "provenance"});
    for (const auto& c : cells) {
        char g1buf[32];
        snprintf(g1buf, sizeof(g1buf), "%.2f", c.g1_star);
        w.row({c.eps_profit, c.period, c.tax_basis, c.mode, g1buf, fmt_double(c.raw),
               c.clamped ? "1" : "0", c.provenance});
    }
}

void write_coefficients_csv(const std::string& path, const EstimateReport& rep,
                            const std::vector<std::string>& meta) {
    CsvWriter w(path);
    for (const auto& m : meta) w.comment(m);
    w.row({"name", "rel_time", "beta", "se", "ci_low", "ci_high", "omitted"});
    for (const auto& c : rep.coefficients) {
        w.row({c.name, std::to_string(c.rel_time), fmt_double(c.beta),
               fmt_double(c.se), fmt_double(c.ci_low), fmt_double(c.ci_high),
               c.omitted ? "1" : "0"});
    }
}

std::string events_summary_json(const EstimateReport& rep, const EventDetection& det,
                                const std::vector<std::string>& meta) {
    ordered_json j;
    j["meta"] = meta_json(meta);
    j["events_detected"] = det.events.size();
    ordered_json evs = ordered_json::array();
    for (const auto& e : det.events)
        evs.push_back({{"state", e.state},
                       {"year", e.year},
                       {"real_increase", e.real_increase},
                       {"affected_share", e.affected_share},
                       {"dlog_mw", e.dlog_mw}});
    j["events"] = evs;
    j["small_state_increases"] = det.small_state_increases.size();
    j["federal_increases"] = det.federal_increases.size();
    j["events_used"] = rep.n_events;
    j["observations"] = rep.n_obs;
    j["clusters"] = rep.n_clusters;
    j["dlog_mw"] = rep.dlog_mw;
    if (rep.elasticity != 0.0) j["elasticity"] = rep.elasticity;
    ordered_json coefs = ordered_json::array();
    for (const auto& c : rep.coefficients) {
        coefs.push_back({{"name", c.name},
                         {"beta", c.beta},
                         {"se", c.se},
                         {"ci_low", c.ci_low},
                         {"ci_high", c.ci_high},
                         {"omitted", c.omitted}});
    }
    j["coefficients"] = coefs;
    if (!rep.dropped_columns.empty()) j["dropped_columns"] = rep.dropped_columns;
    return j.dump(2) + "\n";
}

}  // namespace mwsim
