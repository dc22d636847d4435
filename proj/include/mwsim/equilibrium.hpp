#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mwsim/config.hpp"
#include "mwsim/model.hpp"

namespace mwsim {

/// Firm-side solution given the worker value U: wage, vacancies and capital
/// satisfying the posting first-order conditions (wage FOC dropped when the
/// minimum wage binds).
struct FirmSolution {
    double w = 0.0;
    double v = 0.0;
    double k = 0.0;
    double n = 0.0;        // employment per firm, q~ * v
    double q_tilde = 0.0;  // internalized job-filling rate at (w, U)
    bool constrained = false;
    bool capped = false;   // matching rates touched a cap during evaluation
    double foc_residual = 0.0;  // max relative FOC residual
    int iterations = 0;
};

/// Market outcome for one sector.
struct SectorEquilibrium {
    double wage = 0.0;               // annual, thousands
    double vacancies_per_firm = 0.0;
    double capital_per_firm = 0.0;
    double theta = 0.0;              // V / L_A
    double p = 0.0;                  // job-finding rate
    double q = 0.0;                  // job-filling rate
    double employment = 0.0;         // E = p * L_A
    double profit_pre_tax = 0.0;     // per firm
    bool mw_binding = false;
    bool capped = false;
    double foc_residual = 0.0;
    double fixed_point_residual = 0.0;
};

struct WorkerAggregates {
    double U = 0.0;                    // expected value of entry, gross of cost
    double L_A = 0.0;                  // active mass
    double participation_rate = 0.0;   // L_A / alpha
    double unemployment_rate = 0.0;    // 1 - p
    double expected_wage_active = 0.0; // (1 - rho) * wage
};

struct Equilibrium {
    SectorEquilibrium services;
    SectorEquilibrium manufacturing;
    WorkerAggregates low;
    WorkerAggregates high;
    Policy policy;              // y0 filled with y0_solved after budget closure
    double y0_solved = 0.0;
    double social_welfare = 0.0;
    double budget_residual = 0.0;
    bool feasible = true;
    std::string infeasible_reason;

    std::vector<std::pair<std::string, double>> flat_record() const;
};

/// Solves the firm problem at fixed worker value U. The unconstrained branch
/// solves the three FOCs in (w, v, k) by damped Newton with an analytic
/// Jacobian; if the resulting wage falls below the statutory minimum the
/// constrained branch re-solves (v, k) at the floor.
FirmSolution solve_firm(const SectorParams& sec, const SkillParams& sp, double U,
                        double tau, double t, double y0,
                        const std::optional<double>& mw_annual,
                        const SolveOptions& opt = {});

/// Sector equilibrium: firm optimality, worker indifference, participation
/// and tightness consistency hold jointly. Newton on (U, theta) with
/// damping, seeded by a tightness bisection.
std::pair<SectorEquilibrium, WorkerAggregates> solve_sector(
    const SectorParams& sec, const SkillParams& sp, double tau, double t,
    double y0, const std::optional<double>& mw_annual,
    const SolveOptions& opt = {});

/// Tax revenue minus lump-sum outlays at a given allocation; linear in y0.
double budget_residual_at(const Equilibrium& eq, const ModelParams& mp,
                          double y0, const SolveOptions& opt);

/// Full equilibrium with y0 set by budget closure (outer bisection on
/// [0, y0_max], sector solves re-run per trial). Infeasible policies come
/// back tagged rather than thrown.
Equilibrium close_budget(const ModelParams& mp, Policy policy,
                         const SolveOptions& opt = {});

/// Equilibrium at a fixed policy (no budget closure; y0 taken from policy).
Equilibrium solve_at_policy(const ModelParams& mp, const Policy& policy,
                            const SolveOptions& opt = {});

/// Social welfare, Eq. (5) shape: inactive individuals at G(y0), active
/// workers integrated over participation costs, capitalists at after-tax
/// profit. Closed form for zeta = 1, 64-node Gauss-Legendre otherwise.
double social_welfare(const Equilibrium& eq, const ModelParams& mp,
                      double zeta, const SolveOptions& opt = {});

/// Planner-FOC residual q*phi_n - c*/theta - eta_v at the decentralized
/// allocation, relative to eta_v; max over sectors. Zero (to solver
/// tolerance) at zero taxes with no binding minimum wage.
double check_efficiency(const Equilibrium& eq, const ModelParams& mp);

/// Analytic d(profit)/d(mw_annual) for a binding minimum wage, including the
/// general-equilibrium tightness response (implicit differentiation of the
/// sector system). Errors if the minimum wage does not bind.
double constrained_profit_derivative(const Equilibrium& eq, const ModelParams& mp,
                                     const SolveOptions& opt = {});

}  // namespace mwsim
