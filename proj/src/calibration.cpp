#include "mwsim/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mwsim/errors.hpp"
#include "mwsim/rng.hpp"

namespace mwsim {

const std::array<std::string, MomentSet::kCount>& MomentSet::names() {
    static const std::array<std::string, kCount> n = {
        "unemployment_l",  "unemployment_h",  "job_filling_S",  "job_filling_M",
        "emp_per_estab_S", "emp_per_estab_M", "earnings_l",     "earnings_h",
        "participation_l", "participation_h", "profit_S",       "profit_M",
        "markdown_l",      "markdown_h"};
    return n;
}

MomentSet compute_moments(const ModelParams& mp, const Policy& baseline,
                          const SolveOptions& opt) {
    Equilibrium eq = solve_at_policy(mp, baseline, opt);
    MomentSet m;
    const auto& S = eq.services;
    const auto& M = eq.manufacturing;
    m[0] = eq.low.unemployment_rate;
    m[1] = eq.high.unemployment_rate;
    m[2] = S.q;
    m[3] = M.q;
    m[4] = S.employment / mp.services.K;
    m[5] = M.employment / mp.manufacturing.K;
    m[6] = eq.low.expected_wage_active;    // (1 - rho) * wage
    m[7] = eq.high.expected_wage_active;
    m[8] = eq.low.participation_rate;
    m[9] = eq.high.participation_rate;
    m[10] = S.profit_pre_tax;
    m[11] = M.profit_pre_tax;
    double n_s = S.q * S.vacancies_per_firm;
    double n_m = M.q * M.vacancies_per_firm;
    m[12] = S.wage / revenue_dn(S.capital_per_firm, n_s, mp.services);
    m[13] = M.wage / revenue_dn(M.capital_per_firm, n_m, mp.manufacturing);
    return m;
}

MomentSet table_dii_model_column() {
    MomentSet m;
    m.values = {0.046, 0.054, 0.752, 0.831, 9.94,   25.86, 13.20,
                76.85, 0.583, 0.675, 199.94, 345.96, 0.516, 0.794};
    return m;
}

void CalibrationSpec::validate() const {
    bool any = false;
    for (int i = 0; i < MomentSet::kCount; ++i) {
        if (weights[i] < 0.0) throw ConfigError("calibration: negative weight");
        if (weights[i] > 0.0) {
            any = true;
            if (targets[i] == 0.0)
                throw ConfigError("calibration: zero target with positive weight for " +
                                  MomentSet::names()[i]);
        }
    }
    if (!any) throw ConfigError("calibration: all weights are zero");
    auto x = pack_free_params(seed_params);
    for (int i = 0; i < 14; ++i) {
        if (lower[i] > upper[i]) throw ConfigError("calibration: inverted bounds");
        if (x[i] < lower[i] || x[i] > upper[i])
            throw ConfigError("calibration: seed outside bounds at index " +
                              std::to_string(i));
    }
}

double loss(const MomentSet& model, const CalibrationSpec& spec) {
    double acc = 0.0;
    for (int i = 0; i < MomentSet::kCount; ++i) {
        if (spec.weights[i] == 0.0) continue;
        if (spec.targets[i] == 0.0)
            throw ConfigError("loss: zero target with positive weight for " +
                              MomentSet::names()[i]);
        double d = (model[i] - spec.targets[i]) / spec.targets[i];
        acc += spec.weights[i] * d * d;
    }
    return acc;
}

std::array<double, 14> pack_free_params(const ModelParams& mp) {
    return {mp.low.delta0,   mp.low.delta1,   mp.low.lambda,  mp.services.K,
            mp.services.psi, mp.low.kappa0,   mp.low.kappa1,  mp.high.delta0,
            mp.high.delta1,  mp.high.lambda,  mp.manufacturing.K,
            mp.manufacturing.psi, mp.high.kappa0, mp.high.kappa1};
}

ModelParams unpack_free_params(const ModelParams& base, const std::array<double, 14>& x) {
    ModelParams mp = base;
    mp.low.delta0 = x[0];
    mp.low.delta1 = x[1];
    mp.low.lambda = x[2];
    mp.services.K = x[3];
    mp.services.psi = x[4];
    mp.low.kappa0 = x[5];
    mp.low.kappa1 = x[6];
    mp.high.delta0 = x[7];
    mp.high.delta1 = x[8];
    mp.high.lambda = x[9];
    mp.manufacturing.K = x[10];
    mp.manufacturing.psi = x[11];
    mp.high.kappa0 = x[12];
    mp.high.kappa1 = x[13];
    return mp;
}

CalibrationSpec CalibrationSpec::bundled_default(const Config& cfg) {
    CalibrationSpec spec;
    spec.targets = table_dii_model_column();
    spec.weights.fill(1.0);
    // targets and weights are overridable per moment through the same
    // config schema: target_<name> and weight_<name>
    for (int i = 0; i < MomentSet::kCount; ++i) {
        spec.targets[i] = cfg.get_double("target_" + MomentSet::names()[i],
                                         spec.targets[i]);
        spec.weights[i] = cfg.get_double("weight_" + MomentSet::names()[i],
                                         spec.weights[i]);
    }
    spec.seed_params = cfg.model_params();
    spec.baseline = cfg.baseline_policy();
    spec.solve_opt = SolveOptions::from_config(cfg);
    spec.max_evals = cfg.get_int("calib_max_evals", 20000);
    spec.tol = cfg.get_double("calib_tol", 1e-10);
    spec.multistarts = cfg.get_int("calib_multistarts", 0);
    // wide boxes keeping solves inside the uncapped probability region
    //            d0_l   d1_l  lam_l  K_S    psi_S  k0_l  k1_l   d0_h  d1_h  lam_h  K_M    psi_M  k0_h  k1_h
    spec.lower = {0.30, 0.05, 2.0,  0.001, 5.0,  0.05, 0.10, 0.30, 0.05, 10.0, 0.0005, 5.0,  0.02, 0.10};
    spec.upper = {0.99, 0.95, 80.0, 0.50,  120.0, 5.0,  4.0,  0.99, 0.95, 400.0, 0.20,  150.0, 5.0,  4.0};
    return spec;
}

namespace {

struct Objective {
    explicit Objective(const CalibrationSpec& s) : spec(s) {}
    const CalibrationSpec& spec;
    int evals = 0;
    double best = std::numeric_limits<double>::infinity();
    std::vector<TracePoint> trace;
    std::vector<std::array<double, 14>> trace_params;

    double operator()(const std::array<double, 14>& x) {
        ++evals;
        double f;
        try {
            ModelParams mp = unpack_free_params(spec.seed_params, x);
            mp.validate();
            MomentSet m = compute_moments(mp, spec.baseline, spec.solve_opt);
            f = loss(m, spec);
        } catch (const std::exception&) {
            f = 1e30;  // infeasible parameter point
        }
        bool improved = f < best;
        if (improved) best = f;
        trace.push_back({evals, f, improved});
        trace_params.push_back(x);
        return f;
    }
};

std::array<double, 14> clamp_box(const CalibrationSpec& spec,
                                 std::array<double, 14> x) {
    for (int i = 0; i < 14; ++i) x[i] = std::clamp(x[i], spec.lower[i], spec.upper[i]);
    return x;
}

// Standard Nelder-Mead on the 14-parameter box; candidates are clamped to
// the box before evaluation.
struct NelderMead {
    static constexpr int N = 14;
    const CalibrationSpec& spec;
    Objective& obj;

    std::pair<std::array<double, N>, double> run(const std::array<double, N>& start,
                                                 int budget) {
        using Vec = std::array<double, N>;
        std::vector<Vec> xs(N + 1);
        std::vector<double> fs(N + 1);
        auto reset_simplex = [&](const Vec& x0) {
            xs[0] = clamp_box(spec, x0);
            fs[0] = obj(xs[0]);
            for (int i = 0; i < N; ++i) {
                Vec xi = xs[0];
                double h = 0.05 * std::max(std::abs(xi[i]), 1e-3);
                xi[i] = std::clamp(xi[i] + h, spec.lower[i], spec.upper[i]);
                if (xi[i] == xs[0][i]) xi[i] = std::clamp(xs[0][i] - h, spec.lower[i], spec.upper[i]);
                xs[i + 1] = xi;
                fs[i + 1] = obj(xi);
            }
        };
        reset_simplex(start);
        auto order = [&] {
            std::vector<int> idx(N + 1);
            std::iota(idx.begin(), idx.end(), 0);
            std::stable_sort(idx.begin(), idx.end(),
                             [&](int a, int b) { return fs[a] < fs[b]; });
            std::vector<Vec> x2(N + 1);
            std::vector<double> f2(N + 1);
            for (int i = 0; i <= N; ++i) { x2[i] = xs[idx[i]]; f2[i] = fs[idx[i]]; }
            xs = std::move(x2);
            fs = std::move(f2);
        };
        int restarts = 0;
        while (obj.evals < budget && fs[0] > spec.tol) {
            order();
            if (fs[0] <= spec.tol) break;
            // collapse detection: restart from the incumbent with a fresh simplex
            double spread = std::abs(fs[N] - fs[0]);
            if (spread < 1e-14 * (1.0 + std::abs(fs[0]))) {
                if (++restarts > 3) break;
                reset_simplex(xs[0]);
                continue;
            }
            Vec centroid{};
            for (int i = 0; i < N; ++i)
                for (int j = 0; j < N; ++j) centroid[j] += xs[i][j] / N;
            auto blend = [&](double coef) {
                Vec x;
                for (int j = 0; j < N; ++j)
                    x[j] = centroid[j] + coef * (centroid[j] - xs[N][j]);
                return clamp_box(spec, x);
            };
            Vec xr = blend(1.0);
            double fr = obj(xr);
            if (fr < fs[0]) {
                Vec xe = blend(2.0);
                double fe = obj(xe);
                if (fe < fr) { xs[N] = xe; fs[N] = fe; }
                else { xs[N] = xr; fs[N] = fr; }
            } else if (fr < fs[N - 1]) {
                xs[N] = xr; fs[N] = fr;
            } else {
                Vec xc = blend(fr < fs[N] ? 0.5 : -0.5);
                double fc = obj(xc);
                if (fc < std::min(fr, fs[N])) {
                    xs[N] = xc; fs[N] = fc;
                } else {
                    for (int i = 1; i <= N; ++i) {  // shrink toward the best
                        for (int j = 0; j < N; ++j)
                            xs[i][j] = xs[0][j] + 0.5 * (xs[i][j] - xs[0][j]);
                        fs[i] = obj(xs[i]);
                        if (obj.evals >= budget) break;
                    }
                }
            }
        }
        order();
        return {xs[0], fs[0]};
    }
};

}  // namespace

EstimateResult estimate(const CalibrationSpec& spec) {
    spec.validate();
    Objective obj(spec);
    NelderMead nm{spec, obj};

    auto best_x = pack_free_params(spec.seed_params);
    auto [x0, f0] = nm.run(best_x, spec.max_evals);
    best_x = x0;
    double best_f = f0;

    Rng rng(Rng::mix(spec.seed, 0xCA11B));
    for (int s = 0; s < spec.multistarts && obj.evals < spec.max_evals &&
                    best_f > spec.tol; ++s) {
        // Latin-hypercube style draw: one stratum per parameter per start
        std::array<double, 14> x;
        for (int i = 0; i < 14; ++i) {
            double u = (s + rng.uniform()) / spec.multistarts;
            x[i] = spec.lower[i] + u * (spec.upper[i] - spec.lower[i]);
        }
        auto [xs, fs] = nm.run(x, spec.max_evals);
        if (fs < best_f) { best_f = fs; best_x = xs; }
    }

    EstimateResult res;
    res.params = unpack_free_params(spec.seed_params, best_x);
    res.moments = compute_moments(res.params, spec.baseline, spec.solve_opt);
    res.best_loss = best_f;
    res.converged = best_f <= spec.tol;
    res.evaluations = obj.evals;
    res.trace = std::move(obj.trace);
    res.trace_params = std::move(obj.trace_params);
    return res;
}

}  // namespace mwsim
