#pragma once

#include <optional>
#include <string>

namespace mwsim {

/// Matching, participation and vacancy-cost primitives for one skill group.
/// Monetary units are thousands of 2019 dollars per year throughout.
struct SkillParams {
    double alpha;    // population share
    double lambda;   // upper bound of the uniform participation-cost distribution
    double delta0;   // matching efficiency
    double delta1;   // matching elasticity on applicants
    double kappa0;   // vacancy cost scale
    double kappa1;   // vacancy cost convexity

    void validate(const std::string& label) const;
};

/// Technology and capitalist-side primitives for one sector.
struct SectorParams {
    double psi;             // total factor productivity
    double beta_n;          // labor exponent
    double beta_k;          // capital exponent
    double K;               // mass of capitalists relative to worker population 1
    double foreign_return;  // after-tax foreign return r*(1-t*) per unit capital

    void validate(const std::string& label) const;
};

/// Two skills, two sectors: services employs low skill only, manufacturing
/// high skill only (the inframarginal two-sector restriction).
struct ModelParams {
    SkillParams low;
    SkillParams high;
    SectorParams services;
    SectorParams manufacturing;
    double hours_annualization = 52.0 * 34.83;  // hours/year for hourly<->annual

    void validate() const;
};

/// Policy instruments. y0 is endogenous under budget closure; in a fixed
/// baseline it is an input. mw_hourly empty means no statutory minimum.
struct Policy {
    double tau_l = 0.0;
    double tau_h = 0.0;
    double t = 0.0;
    std::optional<double> mw_hourly;
    double y0 = 0.0;

    void validate() const;
    double mw_annual(double hours_annualization) const;  // thousands/year
};

// ---- Matching technology (Cobb-Douglas, rates capped at 1) ----------------

/// Job-finding rate p(theta) = min(delta0 * theta^(1-delta1), 1).
double job_finding(double theta, const SkillParams& sp);

/// Job-filling rate q(theta) = min(delta0 * theta^(-delta1), 1).
double job_filling(double theta, const SkillParams& sp);

/// True when either rate at this tightness sits on the cap.
bool matching_capped(double theta, const SkillParams& sp);

// ---- Technology ------------------------------------------------------------

/// Revenue psi * k^beta_k * n^beta_n and its analytic marginal products.
double revenue(double k, double n, const SectorParams& sec);
double revenue_dn(double k, double n, const SectorParams& sec);
double revenue_dk(double k, double n, const SectorParams& sec);

/// Vacancy posting cost kappa0 * v^(1+kappa1) / (1+kappa1) and marginal cost.
double vacancy_cost(double v, const SkillParams& sp);
double vacancy_marginal_cost(double v, const SkillParams& sp);

// ---- Tax schedule ----------------------------------------------------------

/// Consumption of an employed worker: (1-tau)*w + y0.
double after_tax_income(double w, double tau, double y0);

/// Employment surplus over non-employment: Delta y = (1-tau)*w.
double employment_surplus(double w, double tau);

}  // namespace mwsim
