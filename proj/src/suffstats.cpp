#include "mwsim/suffstats.hpp"

#include <cmath>

#include "mwsim/errors.hpp"

namespace mwsim {

void ElasticityInputs::validate() const {
    if (!(PTW > 0.0) || !(IT > 0.0) || !(PTP > 0.0))
        throw ConfigError("suffstats: PTW, IT, PTP must be positive");
    if (!(t >= 0.0 && t < 1.0)) throw ConfigError("suffstats: t must lie in [0,1)");
    if (it_to_ptw_ratio < 0.0)
        throw ConfigError("suffstats: it_to_ptw_ratio must be nonnegative");
}

void WelfareWeights::validate() const {
    if (g1_l < 0.0 || g1_h < 0.0 || g0 < 0.0 || gK < 0.0)
        throw ConfigError("suffstats: welfare weights must be nonnegative");
}

double prop1_margin(double dU_l, double dU_h, double L_A_l, double L_A_h,
                    const WelfareWeights& weights, double profit_term) {
    if (!(L_A_l > 0.0) || !(L_A_h > 0.0))
        throw ConfigError("prop1_margin: active masses must be positive");
    return dU_l * L_A_l * weights.g1_l + dU_h * L_A_h * weights.g1_h + profit_term;
}

Prop2Decomposition prop2_empirical(const ElasticityInputs& in,
                                   const WelfareWeights& weights) {
    in.validate();
    Prop2Decomposition d;
    d.worker_welfare = (in.eps_U_pretax * in.PTW + in.eps_IT * in.IT) * weights.g1_l;
    d.capitalist_welfare = in.eps_profit * in.PTP * (1.0 - in.t) * weights.gK;
    d.transfer_fiscal = -in.eps_IT * in.IT;
    d.corporate_fiscal = in.eps_profit * in.t * in.PTP;
    return d;
}

namespace {

double omega_of(const ElasticityInputs& in) {
    if (!(in.U_l_percap > 0.0) || !(in.profit_percap > 0.0))
        throw ConfigError("critical_g1: endogenous mode needs per-capita U^l and Pi^S");
    double ratio = in.U_l_percap / ((1.0 - in.t) * in.profit_percap);
    return std::pow(ratio, -in.zeta);
}

}  // namespace

CriticalG1 critical_g1(const ElasticityInputs& in, CriticalG1Mode mode) {
    in.validate();
    CriticalG1 out;
    double worker_coeff = in.eps_U_pretax * in.PTW + in.eps_IT * in.IT;
    double fiscal = -in.eps_IT * in.IT + in.eps_profit * in.t * in.PTP;
    double cap_term = in.eps_profit * in.PTP * (1.0 - in.t);
    if (mode == CriticalG1Mode::gK_equals_1) {
        // 0 = worker_coeff * g1 + cap_term + fiscal
        if (worker_coeff == 0.0)
            throw SolverError("critical_g1: zero denominator (worker coefficient)");
        out.raw = -(cap_term + fiscal) / worker_coeff;
        out.gK = 1.0;
    } else {
        // gK = g1 / omega: 0 = (worker_coeff + cap_term/omega) * g1 + fiscal
        double omega = omega_of(in);
        double denom = worker_coeff + cap_term / omega;
        if (denom == 0.0)
            throw SolverError("critical_g1: zero denominator (endogenous mode)");
        out.raw = -fiscal / denom;
        out.gK = out.raw / omega;
    }
    out.clamped = out.raw < 0.0;
    out.value = out.clamped ? 0.0 : out.raw;
    return out;
}

double prop4_tax_threshold(double B, double C, double eps_theta_delta, double t,
                           double gK) {
    if (!(B > 0.0 && B < 1.0) || !(C > 0.0 && C < 1.0))
        throw ConfigError("prop4_tax_threshold: B and C must lie in (0,1)");
    double denom = 1.0 - B * eps_theta_delta;
    if (denom <= 0.0)
        throw SolverError("prop4_tax_threshold: B*eps >= 1 (singular)");
    return (1.0 - C * eps_theta_delta * ((1.0 - t) * gK + t)) / denom;
}

SufficientStatistic compute_sufficient_statistic(double employment_rate,
                                                 double mean_wage_employed,
                                                 double avg_net_tax) {
    if (!(employment_rate >= 0.0 && employment_rate <= 1.0))
        throw ConfigError("compute_sufficient_statistic: employment rate outside [0,1]");
    SufficientStatistic s;
    s.pre_tax = employment_rate * mean_wage_employed;
    // post-tax: subtract average net liabilities of actives; the transfer to
    // the unemployed is the (1 - rate) share of the net-liability term
    s.post_tax = s.pre_tax - avg_net_tax;
    return s;
}

Table5Inputs Table5Inputs::bundled(const Config& cfg) {
    Table5Inputs in;
    auto fill = [&](ElasticityInputs& e, const std::string& suffix) {
        e.eps_U_pretax = cfg.get_double("eps_U_pretax", 0.017);
        e.eps_IT = cfg.get_double("eps_IT", -0.05);
        e.eps_profit = cfg.get_double("eps_profit_low", -0.047);
        e.PTW = cfg.get_double("PTW_" + suffix);
        e.IT = cfg.get_double("IT_" + suffix);
        e.PTP = cfg.get_double("PTP_" + suffix);
        e.it_to_ptw_ratio = cfg.get_double("it_to_ptw_ratio", 0.14);
        e.U_l_percap = cfg.get_double("U_l_percap", 22.1122);
        e.profit_percap = cfg.get_double("profit_percap", 170.21733);
    };
    fill(in.past, "past");
    fill(in.today, "today");
    in.eps_profit_low = cfg.get_double("eps_profit_low", -0.047);
    in.eps_profit_high = cfg.get_double("eps_profit_high", -0.062);
    in.t_statutory_past = cfg.get_double("t_statutory_past", 0.35);
    in.t_statutory_today = cfg.get_double("t_statutory_today", 0.21);
    in.t_effective_past = cfg.get_double("t_effective_past", 0.20);
    in.t_effective_today = cfg.get_double("t_effective_today", 0.13);
    return in;
}

std::vector<Table5Cell> table5_report(const Table5Inputs& in) {
    std::vector<Table5Cell> cells;
    struct Panel { const char* name; double eps; };
    struct Period { const char* name; const ElasticityInputs* base; double t_stat, t_eff; };
    const Panel panels[] = {{"low", in.eps_profit_low}, {"high", in.eps_profit_high}};
    const Period periods[] = {
        {"past", &in.past, in.t_statutory_past, in.t_effective_past},
        {"today", &in.today, in.t_statutory_today, in.t_effective_today}};

    for (const auto& panel : panels) {
        for (const auto& period : periods) {
            struct Basis { const char* name; double t; };
            const Basis bases[] = {{"statutory", period.t_stat},
                                   {"effective", period.t_eff}};
            for (const auto& basis : bases) {
                ElasticityInputs e = *period.base;
                e.eps_profit = panel.eps;
                e.t = basis.t;
                // gK = 1 column
                {
                    CriticalG1 r = critical_g1(e, CriticalG1Mode::gK_equals_1);
                    cells.push_back({period.name, panel.name, basis.name, "gK=1",
                                     r.value, r.raw, r.clamped,
                                     "back-solved aggregates"});
                }
                for (double z : {1.0, 1.5, 2.0}) {
                    e.zeta = z;
                    CriticalG1 r = critical_g1(e, CriticalG1Mode::endogenous);
                    char mode[32];
                    snprintf(mode, sizeof(mode), "zeta=%.1f", z);
                    cells.push_back({period.name, panel.name, basis.name, mode,
                                     r.value, r.raw, r.clamped,
                                     "back-solved aggregates"});
                }
            }
        }
    }
    return cells;
}

}  // namespace mwsim
