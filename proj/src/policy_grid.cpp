#include "mwsim/policy_grid.hpp"

#include <cmath>

#include "mwsim/errors.hpp"
#include "mwsim/parallel.hpp"

namespace mwsim {

namespace {

std::vector<double> linspace_by_step(double lo, double hi, double step) {
    std::vector<double> out;
    int n = static_cast<int>(std::round((hi - lo) / step)) + 1;
    for (int i = 0; i < n; ++i) out.push_back(lo + i * step);
    return out;
}

}  // namespace

PolicyGrid PolicyGrid::defaults() {
    PolicyGrid g;
    g.tau_l_values = linspace_by_step(-1.0, 0.3, 0.1);   // 14 values
    g.t_values = linspace_by_step(0.0, 0.5, 0.05);       // 11 values
    g.tau_h = 0.3;
    g.mw_values_hourly = linspace_by_step(4.00, 17.00, 0.25);  // 53 values
    return g;
}

PolicyGrid PolicyGrid::from_config(const Config& cfg) {
    PolicyGrid g;
    g.tau_l_values = linspace_by_step(cfg.get_double("grid_tau_l_min", -1.0),
                                      cfg.get_double("grid_tau_l_max", 0.3),
                                      cfg.get_double("grid_tau_l_step", 0.1));
    g.t_values = linspace_by_step(cfg.get_double("grid_t_min", 0.0),
                                  cfg.get_double("grid_t_max", 0.5),
                                  cfg.get_double("grid_t_step", 0.05));
    g.tau_h = cfg.get_double("grid_tau_h", 0.3);
    g.mw_values_hourly = linspace_by_step(cfg.get_double("grid_mw_min", 4.0),
                                          cfg.get_double("grid_mw_max", 17.0),
                                          cfg.get_double("grid_mw_step", 0.25));
    g.validate();
    return g;
}

void PolicyGrid::validate() const {
    auto increasing = [](const std::vector<double>& v) {
        for (size_t i = 1; i < v.size(); ++i)
            if (v[i] <= v[i - 1]) return false;
        return !v.empty();
    };
    if (!increasing(tau_l_values) || !increasing(t_values) ||
        !increasing(mw_values_hourly))
        throw ConfigError("policy grid: values must be strictly increasing");
}

WelfareSurface sweep(const ModelParams& mp, const PolicyGrid& grid,
                     const SolveOptions& opt, int jobs) {
    grid.validate();
    mp.validate();
    WelfareSurface surf;
    surf.grid = grid;
    surf.cells.resize(grid.cells());
    const size_t n_mw = grid.mw_values_hourly.size();
    const size_t n_t = grid.t_values.size();

    parallel_for(surf.cells.size(), jobs, [&](size_t idx) {
        size_t pair_idx = idx / n_mw;
        size_t mw_idx = idx % n_mw;
        size_t itau = pair_idx / n_t;
        size_t it = pair_idx % n_t;

        SurfaceCell& cell = surf.cells[idx];
        cell.tau_l = grid.tau_l_values[itau];
        cell.t = grid.t_values[it];
        cell.mw_hourly = grid.mw_values_hourly[mw_idx];

        Policy pol;
        pol.tau_l = cell.tau_l;
        pol.tau_h = grid.tau_h;
        pol.t = cell.t;
        pol.mw_hourly = cell.mw_hourly;
        try {
            Equilibrium eq = close_budget(mp, pol, opt);
            cell.feasible = eq.feasible;
            cell.infeasible_reason = eq.infeasible_reason;
            cell.y0 = eq.y0_solved;
            cell.wage_l = eq.services.wage;
            cell.wage_h = eq.manufacturing.wage;
            cell.employment_l = eq.services.employment;
            cell.unemployment_l = eq.low.unemployment_rate;
            cell.profit_S = eq.services.profit_pre_tax;
            cell.mw_binding = eq.services.mw_binding;
            cell.capped = eq.services.capped || eq.manufacturing.capped;
            if (eq.feasible) cell.social_welfare = eq.social_welfare;
        } catch (const std::exception& e) {
            cell.feasible = false;
            cell.infeasible_reason = e.what();
        }
    });
    return surf;
}

std::vector<EnvelopePoint> envelope(const WelfareSurface& surface) {
    const auto& grid = surface.grid;
    std::vector<EnvelopePoint> out;
    out.reserve(grid.mw_values_hourly.size());
    for (size_t imw = 0; imw < grid.mw_values_hourly.size(); ++imw) {
        EnvelopePoint pt;
        pt.mw_hourly = grid.mw_values_hourly[imw];
        pt.present = false;
        pt.tie = false;
        for (size_t itau = 0; itau < grid.tau_l_values.size(); ++itau) {
            for (size_t it = 0; it < grid.t_values.size(); ++it) {
                const SurfaceCell& c = surface.at(surface.pair_index(itau, it), imw);
                if (!c.feasible) continue;
                if (!pt.present || c.social_welfare > pt.sw) {
                    pt.present = true;
                    pt.sw = c.social_welfare;
                    pt.tau_l = c.tau_l;
                    pt.t = c.t;
                    pt.tie = false;
                } else if (c.social_welfare == pt.sw) {
                    pt.tie = true;
                    // lexicographic: smaller t, then smaller |tau_l|
                    if (c.t < pt.t ||
                        (c.t == pt.t && std::abs(c.tau_l) < std::abs(pt.tau_l))) {
                        pt.tau_l = c.tau_l;
                        pt.t = c.t;
                    }
                }
            }
        }
        out.push_back(pt);
    }
    return out;
}

std::vector<OptimalMwPoint> optimal_mw_per_tax(const WelfareSurface& surface) {
    const auto& grid = surface.grid;
    std::vector<OptimalMwPoint> out;
    for (size_t itau = 0; itau < grid.tau_l_values.size(); ++itau) {
        for (size_t it = 0; it < grid.t_values.size(); ++it) {
            OptimalMwPoint pt;
            pt.tau_l = grid.tau_l_values[itau];
            pt.t = grid.t_values[it];
            pt.present = false;
            pt.tie = false;
            for (size_t imw = 0; imw < grid.mw_values_hourly.size(); ++imw) {
                const SurfaceCell& c = surface.at(surface.pair_index(itau, it), imw);
                if (!c.feasible) continue;
                if (!pt.present || c.social_welfare > pt.sw) {
                    pt.present = true;
                    pt.sw = c.social_welfare;
                    pt.mw_hourly = c.mw_hourly;
                    pt.tie = false;
                } else if (c.social_welfare == pt.sw) {
                    pt.tie = true;  // lowest mw wins: already kept
                }
            }
            out.push_back(pt);
        }
    }
    return out;
}

JointOptimum joint_optimum(const WelfareSurface& surface) {
    bool found = false;
    JointOptimum result{};
    for (const auto& c : surface.cells) {
        if (!c.feasible) continue;
        JointOptimum cur{c.tau_l, c.t, c.mw_hourly, c.social_welfare, false};
        if (!found || cur.sw > result.sw) {
            result = cur;
            found = true;
        } else if (cur.sw == result.sw) {
            bool better = cur.t < result.t ||
                          (cur.t == result.t && std::abs(cur.tau_l) < std::abs(result.tau_l)) ||
                          (cur.t == result.t && cur.tau_l == result.tau_l &&
                           cur.mw_hourly < result.mw_hourly);
            if (better) result = cur;
            result.tie = true;
        }
    }
    if (!found) throw InfeasiblePolicy("joint_optimum: no feasible cells in surface");
    return result;
}

}  // namespace mwsim
