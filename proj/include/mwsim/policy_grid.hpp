#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mwsim/config.hpp"
#include "mwsim/equilibrium.hpp"

namespace mwsim {

/// The joint policy grid: tax pairs (tau_l, t) at a fixed tau_h, crossed
/// with hourly minimum wages.
struct PolicyGrid {
    std::vector<double> tau_l_values;
    std::vector<double> t_values;
    double tau_h = 0.3;
    std::vector<double> mw_values_hourly;

    static PolicyGrid defaults();
    static PolicyGrid from_config(const Config& cfg);
    void validate() const;
    size_t tax_pairs() const { return tau_l_values.size() * t_values.size(); }
    size_t cells() const { return tax_pairs() * mw_values_hourly.size(); }
};

struct SurfaceCell {
    double tau_l = 0.0;
    double t = 0.0;
    double mw_hourly = 0.0;
    bool feasible = false;
    std::string infeasible_reason;
    double social_welfare = 0.0;
    double y0 = 0.0;
    double wage_l = 0.0;          // equilibrium summary
    double wage_h = 0.0;
    double employment_l = 0.0;
    double unemployment_l = 0.0;
    double profit_S = 0.0;
    bool mw_binding = false;
    bool capped = false;
};

struct WelfareSurface {
    PolicyGrid grid;
    std::vector<SurfaceCell> cells;  // row-major: (tau_l, t) pair index x mw index

    const SurfaceCell& at(size_t pair_idx, size_t mw_idx) const {
        return cells[pair_idx * grid.mw_values_hourly.size() + mw_idx];
    }
    size_t pair_index(size_t itau, size_t it) const {
        return itau * grid.t_values.size() + it;
    }
};

/// One budget-closing equilibrium solve per cell; failures and welfare
/// domain errors are recorded as infeasible cells, never aborting the sweep.
WelfareSurface sweep(const ModelParams& mp, const PolicyGrid& grid,
                     const SolveOptions& opt, int jobs = 1);

struct EnvelopePoint {
    double mw_hourly;
    bool present;         // false when every tax pair is infeasible
    double tau_l, t, sw;
    bool tie;
};

/// For each minimum wage, the feasible tax pair with maximal welfare.
/// Ties break toward smaller t, then smaller |tau_l|.
std::vector<EnvelopePoint> envelope(const WelfareSurface& surface);

struct OptimalMwPoint {
    double tau_l, t;
    bool present;
    double mw_hourly, sw;
    bool tie;
};

/// For each tax pair, the welfare-maximizing minimum wage (lowest wins ties).
std::vector<OptimalMwPoint> optimal_mw_per_tax(const WelfareSurface& surface);

struct JointOptimum {
    double tau_l, t, mw_hourly, sw;
    bool tie;
};

/// Global argmax over feasible cells; errors if none are feasible.
JointOptimum joint_optimum(const WelfareSurface& surface);

}  // namespace mwsim
