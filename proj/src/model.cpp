#include "mwsim/model.hpp"

#include <cmath>
#include <stdexcept>

#include "mwsim/errors.hpp"

namespace mwsim {

namespace {
void require(bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
}
}  // namespace

void SkillParams::validate(const std::string& label) const {
    require(alpha > 0.0 && alpha < 1.0, label + ": alpha must lie in (0,1)");
    require(lambda > 0.0, label + ": lambda must be positive");
    require(delta0 > 0.0, label + ": delta0 must be positive");
    require(delta1 > 0.0 && delta1 < 1.0, label + ": delta1 must lie in (0,1)");
    require(kappa0 > 0.0, label + ": kappa0 must be positive");
    require(kappa1 > 0.0, label + ": kappa1 must be positive");
}

void SectorParams::validate(const std::string& label) const {
    require(psi > 0.0, label + ": psi must be positive");
    require(beta_n > 0.0, label + ": beta_n must be positive");
    require(beta_k >= 0.0, label + ": beta_k must be nonnegative");
    require(beta_n + beta_k < 1.0, label + ": beta_n + beta_k must be < 1");
    require(K > 0.0, label + ": K must be positive");
    require(foreign_return > 0.0, label + ": foreign_return must be positive");
}

void ModelParams::validate() const {
    low.validate("low");
    high.validate("high");
    services.validate("services");
    manufacturing.validate("manufacturing");
    require(std::abs(low.alpha + high.alpha - 1.0) < 1e-12,
            "skill shares must sum to 1");
    require(hours_annualization > 0.0, "hours_annualization must be positive");
}

void Policy::validate() const {
    require(t >= 0.0 && t < 1.0, "policy: t must lie in [0,1)");
    require(tau_l < 1.0, "policy: tau_l must be < 1");
    require(tau_h < 1.0, "policy: tau_h must be < 1");
    if (mw_hourly) require(*mw_hourly > 0.0, "policy: mw_hourly must be positive");
}

double Policy::mw_annual(double hours_annualization) const {
    if (!mw_hourly) throw ConfigError("policy: no minimum wage set");
    return *mw_hourly * hours_annualization / 1000.0;
}

double job_finding(double theta, const SkillParams& sp) {
    if (!(theta > 0.0)) throw std::domain_error("job_finding: theta must be positive");
    return std::min(sp.delta0 * std::pow(theta, 1.0 - sp.delta1), 1.0);
}

double job_filling(double theta, const SkillParams& sp) {
    if (!(theta > 0.0)) throw std::domain_error("job_filling: theta must be positive");
    return std::min(sp.delta0 * std::pow(theta, -sp.delta1), 1.0);
}

bool matching_capped(double theta, const SkillParams& sp) {
    if (!(theta > 0.0)) throw std::domain_error("matching_capped: theta must be positive");
    return sp.delta0 * std::pow(theta, 1.0 - sp.delta1) > 1.0 ||
           sp.delta0 * std::pow(theta, -sp.delta1) > 1.0;
}

double revenue(double k, double n, const SectorParams& sec) {
    if (k < 0.0 || n < 0.0) throw std::domain_error("revenue: inputs must be nonnegative");
    return sec.psi * std::pow(k, sec.beta_k) * std::pow(n, sec.beta_n);
}

double revenue_dn(double k, double n, const SectorParams& sec) {
    if (k < 0.0 || n < 0.0) throw std::domain_error("revenue_dn: inputs must be nonnegative");
    return sec.psi * sec.beta_n * std::pow(k, sec.beta_k) * std::pow(n, sec.beta_n - 1.0);
}

double revenue_dk(double k, double n, const SectorParams& sec) {
    if (k < 0.0 || n < 0.0) throw std::domain_error("revenue_dk: inputs must be nonnegative");
    return sec.psi * sec.beta_k * std::pow(k, sec.beta_k - 1.0) * std::pow(n, sec.beta_n);
}

double vacancy_cost(double v, const SkillParams& sp) {
    if (v < 0.0) throw std::domain_error("vacancy_cost: v must be nonnegative");
    return sp.kappa0 * std::pow(v, 1.0 + sp.kappa1) / (1.0 + sp.kappa1);
}

double vacancy_marginal_cost(double v, const SkillParams& sp) {
    if (v < 0.0) throw std::domain_error("vacancy_marginal_cost: v must be nonnegative");
    return sp.kappa0 * std::pow(v, sp.kappa1);
}

double after_tax_income(double w, double tau, double y0) {
    return (1.0 - tau) * w + y0;
}

double employment_surplus(double w, double tau) {
    return (1.0 - tau) * w;
}

}  // namespace mwsim
