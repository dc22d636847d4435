#pragma once

#include <string>
#include <vector>

#include "mwsim/config.hpp"

namespace mwsim {

/// Reduced-form elasticities and aggregates feeding the empirical welfare
/// condition for a small minimum wage increase under fixed taxes.
struct ElasticityInputs {
    double eps_U_pretax;     // pre-tax low-skill sufficient-statistic elasticity
    double eps_IT;           // income-maintenance-transfer elasticity (signed)
    double eps_profit;       // exposed-services profit elasticity (signed)
    double PTW;              // total annual pre-tax low-skill wages
    double IT;               // total income maintenance benefits
    double PTP;              // total annual pre-tax exposed-services profits
    double t;                // corporate tax rate
    double zeta = 1.0;       // welfare curvature (endogenous-weight mode)
    double it_to_ptw_ratio = 0.14;  // post-tax amplification of the pre-tax statistic
    double U_l_percap = 0.0;        // per-capita post-tax sufficient statistic
    double profit_percap = 0.0;     // per-establishment pre-tax profit

    void validate() const;
};

struct WelfareWeights {
    double g1_l = 1.0;
    double g1_h = 1.0;
    double g0 = 1.0;
    double gK = 1.0;

    void validate() const;
};

struct SufficientStatistic {
    double pre_tax;   // employment rate x mean wage of the employed
    double post_tax;  // net of average tax liabilities, unemployment transfers back
};

/// Proposition I margin: dU^l L_A^l g1^l + dU^h L_A^h g1^h + weighted profits.
double prop1_margin(double dU_l, double dU_h, double L_A_l, double L_A_h,
                    const WelfareWeights& weights, double profit_term);

/// The four addends of the empirical condition (worker welfare, capitalist
/// welfare, transfer fiscal effect, corporate-revenue fiscal effect).
struct Prop2Decomposition {
    double worker_welfare;
    double capitalist_welfare;
    double transfer_fiscal;
    double corporate_fiscal;
    double total() const {
        return worker_welfare + capitalist_welfare + transfer_fiscal + corporate_fiscal;
    }
};

Prop2Decomposition prop2_empirical(const ElasticityInputs& in,
                                   const WelfareWeights& weights);

enum class CriticalG1Mode { gK_equals_1, endogenous };

struct CriticalG1 {
    double value;        // clamped below at zero
    double raw;          // unclamped solution
    bool clamped;
    double gK;           // implied capitalist weight at the critical point
};

/// Welfare weight on low-skill workers that makes the empirical condition
/// hold with equality, under either gK = 1 or the endogenous-weights rule
/// gK = g1 / omega(zeta) with omega = (U^l / ((1-t) Pi^S))^(-zeta).
CriticalG1 critical_g1(const ElasticityInputs& in, CriticalG1Mode mode);

/// Proposition IV threshold: the optimal marginal tax on employed low-skill
/// workers is negative when g1^l exceeds this.
double prop4_tax_threshold(double B, double C, double eps_theta_delta, double t,
                           double gK);

SufficientStatistic compute_sufficient_statistic(double employment_rate,
                                                 double mean_wage_employed,
                                                 double avg_net_tax);

/// One Table-5 style report row.
struct Table5Cell {
    std::string period;      // "past" or "today"
    std::string eps_profit;  // "low" or "high"
    std::string tax_basis;   // "statutory" or "effective"
    std::string mode;        // "gK=1" or "zeta=..."
    double g1_star;
    double raw;
    bool clamped;
    std::string provenance;
};

struct Table5Inputs {
    ElasticityInputs past;
    ElasticityInputs today;
    double eps_profit_low = -0.047;
    double eps_profit_high = -0.062;
    double t_statutory_past = 0.35;
    double t_statutory_today = 0.21;
    double t_effective_past = 0.20;
    double t_effective_today = 0.13;
    std::vector<double> zetas{1.0, 1.5, 2.0};

    static Table5Inputs bundled(const Config& cfg);
};

/// All 32 cells of the critical-weight table (2 panels x 2 periods x 2 tax
/// bases x (gK=1 + one column per zeta)).
std::vector<Table5Cell> table5_report(const Table5Inputs& in);

}  // namespace mwsim
