#include "mwsim/equilibrium.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "mwsim/errors.hpp"

namespace mwsim {

namespace {

constexpr double kBindTol = 1e-12;

double p_raw(double theta, const SkillParams& sp) {
    return sp.delta0 * std::pow(theta, 1.0 - sp.delta1);
}
double q_raw(double theta, const SkillParams& sp) {
    return sp.delta0 * std::pow(theta, -sp.delta1);
}

// Capital along the allocation FOC (1-t) * phi_k = r, for given employment.
double capital_given_n(const SectorParams& sec, double n, double t) {
    if (sec.beta_k == 0.0) return 0.0;
    return std::pow((1.0 - t) * sec.psi * sec.beta_k * std::pow(n, sec.beta_n) /
                        sec.foreign_return,
                    1.0 / (1.0 - sec.beta_k));
}

// Marginal product of labor with capital substituted out via its FOC.
// Log-linear in log n: ln m = m_const + m_slope * ln n.
struct ReducedMpl {
    double m_const;
    double m_slope;
    double eval(double ln_n) const { return std::exp(m_const + m_slope * ln_n); }
};

ReducedMpl reduced_mpl(const SectorParams& sec, double t) {
    ReducedMpl r;
    if (sec.beta_k == 0.0) {
        r.m_const = std::log(sec.psi * sec.beta_n);
        r.m_slope = sec.beta_n - 1.0;
        return r;
    }
    // k(n) = ((1-t) psi beta_k n^beta_n / r)^(1/(1-beta_k))
    double lk0 = std::log((1.0 - t) * sec.psi * sec.beta_k / sec.foreign_return) /
                 (1.0 - sec.beta_k);
    double lk_slope = sec.beta_n / (1.0 - sec.beta_k);
    r.m_const = std::log(sec.psi * sec.beta_n) + sec.beta_k * lk0;
    r.m_slope = sec.beta_k * lk_slope + sec.beta_n - 1.0;
    return r;
}

struct Ctx {
    const SectorParams& sec;
    const SkillParams& sp;
    double tau;
    double t;
    double y0;
};

// ---- firm problem given the worker value U --------------------------------
//
// The firm internalizes theta(w, U) through worker indifference
// U - y0 = p(theta) * (1-tau) * w, so its perceived job-filling rate is
// q~(w, U) = delta0^(1/(1-delta1)) * ((1-tau) w / (U - y0))^(delta1/(1-delta1)).

double q_tilde_raw(const Ctx& c, double w, double du) {
    double a = c.sp.delta1 / (1.0 - c.sp.delta1);
    return std::pow(c.sp.delta0, 1.0 / (1.0 - c.sp.delta1)) *
           std::pow((1.0 - c.tau) * w / du, a);
}

struct FirmResiduals {
    std::array<double, 3> L{0.0, 0.0, 0.0};
    std::array<std::array<double, 3>, 3> J{};
    int dim = 3;
    bool valid = false;
    double w = 0, v = 0, k = 0, n = 0, qt = 0;
};

// Log residuals of the firm FOCs at x = (ln w, ln v, ln k); the constrained
// variant drops the wage FOC and the wage coordinate.
FirmResiduals firm_residuals(const Ctx& c, double du, bool constrained,
                             double wbar, const std::array<double, 3>& x,
                             bool cap_q) {
    FirmResiduals out;
    const SectorParams& sec = c.sec;
    const SkillParams& sp = c.sp;
    bool has_k = sec.beta_k > 0.0;
    double a = sp.delta1 / (1.0 - sp.delta1);

    double w = constrained ? wbar : std::exp(x[0]);
    int iv = constrained ? 0 : 1;
    int ik = iv + 1;
    double v = std::exp(x[iv]);
    double k = has_k ? std::exp(x[ik]) : 0.0;
    if (!(w > 0.0) || !std::isfinite(w) || !std::isfinite(v)) return out;

    double qt = q_tilde_raw(c, w, du);
    double dlnq_dlw = a;
    if (cap_q && qt >= 1.0) {
        qt = 1.0;
        dlnq_dlw = 0.0;
    }
    double n = qt * v;
    double phin = sec.psi * sec.beta_n *
                  (has_k ? std::pow(k, sec.beta_k) : 1.0) *
                  std::pow(n, sec.beta_n - 1.0);
    double D = phin - w;
    if (!(D > 0.0) || !std::isfinite(D)) return out;
    double eta_v = sp.kappa0 * std::pow(v, sp.kappa1);

    // d ln n / d(lw, lv, lk); d ln phin likewise
    std::array<double, 3> dln_n{dlnq_dlw, 0.0, 0.0};
    dln_n[iv] = 1.0;
    std::array<double, 3> dln_phin{};
    for (int j = 0; j < 3; ++j) dln_phin[j] = (sec.beta_n - 1.0) * dln_n[j];
    if (has_k) dln_phin[ik] += sec.beta_k;

    auto dD = [&](int j) {
        double d = phin * dln_phin[j];
        if (!constrained && j == 0) d -= w;
        return d;
    };

    int row = 0;
    if (!constrained) {
        // wage FOC: a * (phin - w) = w
        out.L[row] = std::log(a * D) - std::log(w);
        for (int j = 0; j < 3; ++j) out.J[row][j] = dD(j) / D;
        out.J[row][0] -= 1.0;
        ++row;
    }
    // vacancy FOC: (phin - w) * q~ = eta_v
    out.L[row] = std::log(D * qt) - std::log(eta_v);
    for (int j = 0; j < 3; ++j) out.J[row][j] = dD(j) / D;
    out.J[row][0] += constrained ? 0.0 : dlnq_dlw;
    out.J[row][iv] -= sp.kappa1;
    ++row;
    if (has_k) {
        // capital FOC: (1-t) * phi_k = r
        double phik = sec.psi * sec.beta_k * std::pow(k, sec.beta_k - 1.0) *
                      std::pow(n, sec.beta_n);
        out.L[row] = std::log((1.0 - c.t) * phik) - std::log(sec.foreign_return);
        for (int j = 0; j < 3; ++j) out.J[row][j] = sec.beta_n * dln_n[j];
        out.J[row][ik] += sec.beta_k - 1.0;
        ++row;
    }
    out.dim = row;
    out.valid = true;
    out.w = w; out.v = v; out.k = k; out.n = n; out.qt = qt;
    return out;
}

bool solve_linear(const std::array<std::array<double, 3>, 3>& A,
                  const std::array<double, 3>& b, int dim,
                  std::array<double, 3>& x) {
    if (dim < 1 || dim > 3) return false;
    std::array<std::array<double, 4>, 3> m{};
    for (int i = 0; i < dim; ++i) {
        for (int j = 0; j < dim; ++j) m[i][j] = A[i][j];
        m[i][dim] = b[i];
    }
    for (int col = 0; col < dim; ++col) {
        int piv = col;
        for (int r = col + 1; r < dim; ++r)
            if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
        if (std::abs(m[piv][col]) < 1e-300) return false;
        std::swap(m[col], m[piv]);
        for (int r = 0; r < dim; ++r) {
            if (r == col) continue;
            double f = m[r][col] / m[col][col];
            for (int j = col; j <= dim; ++j) m[r][j] -= f * m[col][j];
        }
    }
    for (int i = 0; i < dim; ++i) x[i] = m[i][dim] / m[i][i];
    return true;
}

double norm2(const std::array<double, 3>& r, int dim) {
    double s = 0.0;
    for (int i = 0; i < dim; ++i) s += r[i] * r[i];
    return std::sqrt(s);
}

// Closed-form seed for the unconstrained firm problem: all three FOCs are
// log-linear in (ln w, ln v, ln k) once the marginal product is reduced
// along the capital FOC.
std::array<double, 3> firm_seed_unconstrained(const Ctx& c, double du) {
    const SectorParams& sec = c.sec;
    const SkillParams& sp = c.sp;
    double a = sp.delta1 / (1.0 - sp.delta1);
    bool has_k = sec.beta_k > 0.0;

    // ln n as a function of lw via phi_n = w / delta1 and the capital FOC
    double det = has_k ? (sec.beta_n + sec.beta_k - 1.0) : (sec.beta_n - 1.0);
    double ln_n_const, ln_n_slope;
    if (has_k) {
        // [beta_k, beta_n-1; beta_k-1, beta_n] [lk; ln] = [A; B]
        double Bc = std::log(sec.foreign_return / ((1.0 - c.t) * sec.psi * sec.beta_k));
        double Ac0 = -std::log(sp.delta1 * sec.psi * sec.beta_n);  // A = lw + Ac0
        ln_n_const = (sec.beta_k * Bc - (sec.beta_k - 1.0) * Ac0) / det;
        ln_n_slope = -(sec.beta_k - 1.0) / det;
    } else {
        ln_n_const = -std::log(sp.delta1 * sec.psi * sec.beta_n) / det;
        ln_n_slope = 1.0 / det;
    }
    // ln q~ = q0 + a lw ; ln v_foc = (ln((1-delta1)/delta1) + lw + ln q~ - ln kappa0)/kappa1
    double q0 = std::log(sp.delta0) / (1.0 - sp.delta1) +
                a * std::log((1.0 - c.tau) / du);
    double rhs_const = q0 + (std::log((1.0 - sp.delta1) / sp.delta1) + q0 -
                             std::log(sp.kappa0)) / sp.kappa1;
    double rhs_slope = a + (1.0 + a) / sp.kappa1;
    double lw = (rhs_const - ln_n_const) / (ln_n_slope - rhs_slope);

    std::array<double, 3> x{lw, 0.0, 0.0};
    double ln_n = ln_n_const + ln_n_slope * lw;
    double qt = q_tilde_raw(c, std::exp(lw), du);
    x[1] = ln_n - std::log(qt);
    if (has_k) x[2] = std::log(capital_given_n(sec, std::exp(ln_n), c.t));
    return x;
}

// Bisection seed for the constrained firm problem in ln v.
std::array<double, 3> firm_seed_constrained(const Ctx& c, double du, double wbar,
                                            bool cap_q) {
    const SectorParams& sec = c.sec;
    const SkillParams& sp = c.sp;
    double qt = q_tilde_raw(c, wbar, du);
    if (cap_q) qt = std::min(qt, 1.0);
    ReducedMpl mpl = reduced_mpl(sec, c.t);
    auto res = [&](double lv) {
        double v = std::exp(lv);
        double n = qt * v;
        double m = mpl.eval(std::log(n));
        return std::log(std::max(m - wbar, 1e-300) * qt) -
               std::log(sp.kappa0 * std::pow(v, sp.kappa1));
    };
    double lo = -40.0, hi = 40.0;
    // m(n) - wbar must be positive at lo; shrink lo if not
    while (mpl.eval(std::log(qt * std::exp(lo))) <= wbar && lo > -600.0) lo -= 20.0;
    if (mpl.eval(std::log(qt * std::exp(lo))) <= wbar)
        throw SolverError("constrained firm: no vacancy level with positive surplus");
    double flo = res(lo), fhi = res(hi);
    int guard = 0;
    while (fhi > 0.0 && guard++ < 10) { hi += 20.0; fhi = res(hi); }
    if (flo < 0.0 || fhi > 0.0)
        throw SolverError("constrained firm: vacancy FOC bracket failed");
    for (int i = 0; i < 80; ++i) {
        double mid = 0.5 * (lo + hi);
        (res(mid) > 0.0 ? lo : hi) = mid;
    }
    double lv = 0.5 * (lo + hi);
    double n = qt * std::exp(lv);
    std::array<double, 3> x{lv, 0.0, 0.0};
    if (sec.beta_k > 0.0) x[1] = std::log(capital_given_n(sec, n, c.t));
    return x;
}

FirmSolution newton_firm(const Ctx& c, double du, bool constrained, double wbar,
                         const SolveOptions& opt) {
    bool cap_q = constrained;  // the unconstrained FOCs presume the smooth region
    std::array<double, 3> x = constrained ? firm_seed_constrained(c, du, wbar, cap_q)
                                          : firm_seed_unconstrained(c, du);
    FirmResiduals r = firm_residuals(c, du, constrained, wbar, x, cap_q);
    if (!r.valid) throw SolverError("firm solve: invalid seed");
    double rn = norm2(r.L, r.dim);
    int it = 0;
    for (; it < opt.max_newton_iter && rn > opt.firm_tol; ++it) {
        std::array<double, 3> step{};
        bool ok = solve_linear(r.J, r.L, r.dim, step);
        if (!ok) {
            // finite-difference fallback Jacobian
            FirmResiduals rf = r;
            const double h = 1e-7;
            for (int j = 0; j < r.dim; ++j) {
                auto xp = x, xm = x;
                xp[j] += h; xm[j] -= h;
                auto rp = firm_residuals(c, du, constrained, wbar, xp, cap_q);
                auto rm = firm_residuals(c, du, constrained, wbar, xm, cap_q);
                if (!rp.valid || !rm.valid) throw SolverError("firm solve: FD fallback left domain");
                for (int i = 0; i < r.dim; ++i)
                    rf.J[i][j] = (rp.L[i] - rm.L[i]) / (2.0 * h);
            }
            if (!solve_linear(rf.J, rf.L, r.dim, step))
                throw SolverError("firm solve: singular Jacobian");
        }
        double lambda = 1.0;
        FirmResiduals rnew;
        for (int half = 0; half < 60; ++half) {
            std::array<double, 3> xn = x;
            for (int j = 0; j < r.dim; ++j) xn[j] -= lambda * step[j];
            rnew = firm_residuals(c, du, constrained, wbar, xn, cap_q);
            if (rnew.valid && norm2(rnew.L, rnew.dim) < rn) {
                x = xn;
                break;
            }
            lambda *= 0.5;
        }
        if (!rnew.valid || norm2(rnew.L, rnew.dim) >= rn)
            throw SolverError("firm solve: damped Newton stalled at residual " +
                              std::to_string(rn));
        r = rnew;
        rn = norm2(r.L, r.dim);
    }
    if (rn > opt.firm_tol) {
        std::ostringstream os;
        os << "firm solve: no convergence, residual " << rn;
        throw SolverError(os.str());
    }
    FirmSolution s;
    s.w = r.w; s.v = r.v; s.k = r.k; s.n = r.n; s.q_tilde = r.qt;
    s.constrained = constrained;
    s.foc_residual = rn;
    s.iterations = it;
    double p_impl = du / ((1.0 - c.tau) * s.w);
    s.capped = q_tilde_raw(c, s.w, du) > 1.0 || p_impl >= 1.0;
    return s;
}

// Firm block at a market tightness (used only to seed the sector solve).
struct ThetaFirm {
    double w, v, k, n, q;
};

ThetaFirm firm_given_theta_unconstrained(const Ctx& c, double theta) {
    const SectorParams& sec = c.sec;
    const SkillParams& sp = c.sp;
    double q = std::min(q_raw(theta, sp), 1.0);
    ReducedMpl mpl = reduced_mpl(sec, c.t);
    // markdown: phi_n = w / delta1; technology gives ln n linear in ln w,
    // vacancy FOC gives another linear relation -> closed form
    double ln_n_const = (0.0 - std::log(sp.delta1) - (mpl.m_const)) / mpl.m_slope;
    double ln_n_slope = 1.0 / mpl.m_slope;  // ln n = (lw - ln d1 - m_const)/m_slope
    double rhs_const = std::log(q) +
                       (std::log((1.0 - sp.delta1) / sp.delta1 * q / sp.kappa0)) / sp.kappa1;
    double rhs_slope = 1.0 / sp.kappa1;
    double lw = (rhs_const - ln_n_const) / (ln_n_slope - rhs_slope);
    double w = std::exp(lw);
    double n = std::exp(ln_n_const + ln_n_slope * lw);
    ThetaFirm f;
    f.w = w; f.n = n; f.q = q; f.v = n / q;
    f.k = capital_given_n(sec, n, c.t);
    return f;
}

ThetaFirm firm_given_theta_constrained(const Ctx& c, double theta, double wbar) {
    const SectorParams& sec = c.sec;
    const SkillParams& sp = c.sp;
    double q = std::min(q_raw(theta, sp), 1.0);
    ReducedMpl mpl = reduced_mpl(sec, c.t);
    auto res = [&](double lv) {
        double n = q * std::exp(lv);
        double m = mpl.eval(std::log(n));
        if (m <= wbar) return -1e10 + lv;  // outside surplus region: too many vacancies
        return std::log((m - wbar) * q) - std::log(sp.kappa0) - sp.kappa1 * lv;
    };
    double lo = -60.0, hi = 60.0;
    while (res(lo) < 0.0 && lo > -600.0) lo -= 60.0;
    if (res(lo) < 0.0) throw SolverError("sector seed: constrained surplus empty");
    for (int i = 0; i < 90; ++i) {
        double mid = 0.5 * (lo + hi);
        (res(mid) > 0.0 ? lo : hi) = mid;
    }
    ThetaFirm f;
    f.v = std::exp(0.5 * (lo + hi));
    f.q = q;
    f.n = q * f.v;
    f.k = capital_given_n(sec, f.n, c.t);
    f.w = wbar;
    return f;
}

double active_mass(const Ctx& c, double du) {
    return c.sp.alpha * std::clamp(du / c.sp.lambda, 0.0, 1.0);
}

// Consistency gap K v - theta L_A along the tightness reduction.
double theta_gap(const Ctx& c, double theta, bool constrained, double wbar) {
    ThetaFirm f = constrained ? firm_given_theta_constrained(c, theta, wbar)
                              : firm_given_theta_unconstrained(c, theta);
    double p = std::min(p_raw(theta, c.sp), 1.0);
    double du = p * (1.0 - c.tau) * f.w;
    return c.sec.K * f.v - theta * active_mass(c, du);
}

double seed_theta(const Ctx& c, bool constrained, double wbar) {
    double llo = std::log(1e-9), lhi = std::log(1e7);
    double flo = theta_gap(c, std::exp(llo), constrained, wbar);
    double fhi = theta_gap(c, std::exp(lhi), constrained, wbar);
    if (flo < 0.0 || fhi > 0.0)
        throw SolverError("sector solve: tightness bracket failed");
    for (int i = 0; i < 60; ++i) {
        double mid = 0.5 * (llo + lhi);
        (theta_gap(c, std::exp(mid), constrained, wbar) > 0.0 ? llo : lhi) = mid;
    }
    return std::exp(0.5 * (llo + lhi));
}

struct SectorState {
    double U, theta;
    FirmSolution firm;
    double r1, r2;
};

SectorState sector_residuals(const Ctx& c, double U, double theta, bool constrained,
                             double wbar, const SolveOptions& opt) {
    SectorState s;
    s.U = U;
    s.theta = theta;
    double du = U - c.y0;
    if (!(du > 0.0)) throw SolverError("sector solve: U fell to the outside option");
    s.firm = newton_firm(c, du, constrained, wbar, opt);
    double p = std::min(p_raw(theta, c.sp), 1.0);
    double LA = active_mass(c, du);
    s.r1 = (du - p * (1.0 - c.tau) * s.firm.w) / std::max(du, 1e-9);
    s.r2 = (c.sec.K * s.firm.v - theta * LA) /
           std::max(c.sec.K * s.firm.v, 1e-12);
    return s;
}

SectorState newton_sector(const Ctx& c, bool constrained, double wbar,
                          const SolveOptions& opt) {
    double theta = seed_theta(c, constrained, wbar);
    ThetaFirm f = constrained ? firm_given_theta_constrained(c, theta, wbar)
                              : firm_given_theta_unconstrained(c, theta);
    double p = std::min(p_raw(theta, c.sp), 1.0);
    double U = c.y0 + p * (1.0 - c.tau) * f.w;

    SectorState s = sector_residuals(c, U, theta, constrained, wbar, opt);
    double rn = std::hypot(s.r1, s.r2);
    for (int it = 0; it < opt.max_newton_iter && rn > opt.fixed_point_tol; ++it) {
        double hU = std::max(1e-7 * std::abs(s.U), 1e-9);
        double hT = std::max(1e-7 * s.theta, 1e-10);
        SectorState sU = sector_residuals(c, s.U + hU, s.theta, constrained, wbar, opt);
        SectorState sT = sector_residuals(c, s.U, s.theta + hT, constrained, wbar, opt);
        double j11 = (sU.r1 - s.r1) / hU, j12 = (sT.r1 - s.r1) / hT;
        double j21 = (sU.r2 - s.r2) / hU, j22 = (sT.r2 - s.r2) / hT;
        double det = j11 * j22 - j12 * j21;
        if (std::abs(det) < 1e-300)
            throw SolverError("sector solve: singular (U,theta) Jacobian");
        double dU = (s.r1 * j22 - s.r2 * j12) / det;
        double dT = (j11 * s.r2 - j21 * s.r1) / det;
        double lambda = 1.0;
        bool moved = false;
        for (int half = 0; half < 60; ++half) {
            double Un = s.U - lambda * dU;
            double Tn = s.theta - lambda * dT;
            if (Un > c.y0 && Tn > 0.0) {
                try {
                    SectorState sn = sector_residuals(c, Un, Tn, constrained, wbar, opt);
                    if (std::hypot(sn.r1, sn.r2) < rn) {
                        s = sn;
                        rn = std::hypot(s.r1, s.r2);
                        moved = true;
                        break;
                    }
                } catch (const SolverError&) {
                }
            }
            lambda *= 0.5;  // damping on divergence
        }
        if (!moved) break;
    }
    if (rn > opt.fixed_point_tol) {
        std::ostringstream os;
        os << "sector solve: fixed point stalled, U=" << s.U << " theta=" << s.theta
           << " residuals=(" << s.r1 << ", " << s.r2 << ")";
        throw SolverError(os.str());
    }
    return s;
}

void fill_sector(const Ctx& c, const SectorState& s, bool constrained,
                 SectorEquilibrium& se, WorkerAggregates& wa) {
    const SkillParams& sp = c.sp;
    double theta = s.theta;
    double p = std::min(p_raw(theta, sp), 1.0);
    double q = std::min(q_raw(theta, sp), 1.0);
    double du = s.U - c.y0;
    double LA = active_mass(c, du);

    se.wage = s.firm.w;
    se.vacancies_per_firm = s.firm.v;
    se.capital_per_firm = s.firm.k;
    se.theta = theta;
    se.p = p;
    se.q = q;
    se.employment = p * LA;
    double rev = revenue(s.firm.k, s.firm.n, c.sec);
    se.profit_pre_tax = rev - s.firm.w * s.firm.n - vacancy_cost(s.firm.v, sp);
    se.mw_binding = constrained;
    se.capped = matching_capped(theta, sp) || s.firm.capped;
    se.foc_residual = s.firm.foc_residual;
    se.fixed_point_residual = std::hypot(s.r1, s.r2);

    wa.U = s.U;
    wa.L_A = LA;
    wa.participation_rate = LA / sp.alpha;
    wa.unemployment_rate = 1.0 - p;
    wa.expected_wage_active = (1.0 - wa.unemployment_rate) * se.wage;
}

}  // namespace

FirmSolution solve_firm(const SectorParams& sec, const SkillParams& sp, double U,
                        double tau, double t, double y0,
                        const std::optional<double>& mw_annual,
                        const SolveOptions& opt) {
    Ctx c{sec, sp, tau, t, y0};
    double du = U - y0;
    if (!(du > 0.0)) throw SolverError("solve_firm: U must exceed the outside option");
    FirmSolution s = newton_firm(c, du, false, 0.0, opt);
    if (mw_annual && s.w < *mw_annual - kBindTol)
        s = newton_firm(c, du, true, *mw_annual, opt);
    return s;
}

std::pair<SectorEquilibrium, WorkerAggregates> solve_sector(
    const SectorParams& sec, const SkillParams& sp, double tau, double t,
    double y0, const std::optional<double>& mw_annual, const SolveOptions& opt) {
    Ctx c{sec, sp, tau, t, y0};
    SectorState s = newton_sector(c, false, 0.0, opt);
    bool constrained = mw_annual && s.firm.w < *mw_annual - kBindTol;
    if (constrained) s = newton_sector(c, true, *mw_annual, opt);
    SectorEquilibrium se;
    WorkerAggregates wa;
    fill_sector(c, s, constrained, se, wa);
    return {se, wa};
}

double budget_residual_at(const Equilibrium& eq, const ModelParams& mp,
                          double y0, const SolveOptions& opt) {
    double revenue_total =
        eq.policy.tau_l * eq.services.wage * eq.services.employment +
        eq.policy.tau_h * eq.manufacturing.wage * eq.manufacturing.employment +
        eq.policy.t * (mp.services.K * eq.services.profit_pre_tax +
                       mp.manufacturing.K * eq.manufacturing.profit_pre_tax);
    double divisor = 1.0;
    if (opt.capitalists_receive_lump_sum)
        divisor += mp.services.K + mp.manufacturing.K;
    return revenue_total - y0 * divisor;
}

namespace {

Equilibrium solve_allocation(const ModelParams& mp, const Policy& policy,
                             double y0, const SolveOptions& opt) {
    Equilibrium eq;
    eq.policy = policy;
    eq.policy.y0 = y0;
    std::optional<double> mw;
    if (policy.mw_hourly) mw = policy.mw_annual(mp.hours_annualization);
    auto [se_s, wa_l] = solve_sector(mp.services, mp.low, policy.tau_l, policy.t,
                                     y0, mw, opt);
    auto [se_m, wa_h] = solve_sector(mp.manufacturing, mp.high, policy.tau_h,
                                     policy.t, y0, std::nullopt, opt);
    eq.services = se_s;
    eq.manufacturing = se_m;
    eq.low = wa_l;
    eq.high = wa_h;
    eq.y0_solved = y0;
    return eq;
}

void attach_welfare(Equilibrium& eq, const ModelParams& mp, const SolveOptions& opt) {
    try {
        eq.social_welfare = social_welfare(eq, mp, opt.zeta, opt);
    } catch (const std::domain_error& e) {
        eq.feasible = false;
        eq.infeasible_reason = e.what();
        eq.social_welfare = std::numeric_limits<double>::quiet_NaN();
    }
}

}  // namespace

Equilibrium solve_at_policy(const ModelParams& mp, const Policy& policy,
                            const SolveOptions& opt) {
    mp.validate();
    policy.validate();
    Equilibrium eq = solve_allocation(mp, policy, policy.y0, opt);
    eq.budget_residual = budget_residual_at(eq, mp, policy.y0, opt);
    attach_welfare(eq, mp, opt);
    return eq;
}

Equilibrium close_budget(const ModelParams& mp, Policy policy,
                         const SolveOptions& opt) {
    mp.validate();
    policy.validate();
    auto trial = [&](double y0) {
        Equilibrium eq = solve_allocation(mp, policy, y0, opt);
        return std::make_pair(budget_residual_at(eq, mp, y0, opt), eq);
    };
    auto [f_lo, eq_lo] = trial(0.0);
    if (f_lo < 0.0) {
        // revenue cannot fund any nonnegative lump sum
        eq_lo.feasible = false;
        eq_lo.infeasible_reason = "budget cannot close with y0 >= 0";
        eq_lo.budget_residual = f_lo;
        eq_lo.social_welfare = std::numeric_limits<double>::quiet_NaN();
        return eq_lo;
    }
    double revenue_scale = std::max(f_lo, 1e-12);
    if (f_lo <= opt.budget_tol * revenue_scale) {
        eq_lo.budget_residual = f_lo;
        attach_welfare(eq_lo, mp, opt);
        return eq_lo;
    }
    auto [f_hi, eq_hi] = trial(opt.y0_max);
    if (f_hi > 0.0)
        throw SolverError("close_budget: y0_max too small to bracket the budget");
    double lo = 0.0, hi = opt.y0_max;
    Equilibrium best = eq_hi;
    double fbest = f_hi;
    for (int i = 0; i < opt.max_bisect_iter; ++i) {
        double mid = 0.5 * (lo + hi);
        auto [f, eq] = trial(mid);
        best = eq;
        fbest = f;
        if (std::abs(f) <= opt.budget_tol * revenue_scale) break;
        (f > 0.0 ? lo : hi) = mid;
    }
    best.budget_residual = fbest;
    attach_welfare(best, mp, opt);
    return best;
}

namespace {

// 64-node Gauss-Legendre on [-1, 1], computed once by Newton on the
// Legendre recurrence.
const std::array<std::pair<double, double>, 64>& gauss_legendre_64() {
    static const auto table = [] {
        std::array<std::pair<double, double>, 64> t{};
        const int n = 64;
        const double pi = 3.14159265358979323846;
        for (int i = 0; i < n; ++i) {
            double x = std::cos(pi * (i + 0.75) / (n + 0.5));
            double pp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = x;
                for (int k = 2; k <= n; ++k) {
                    double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                pp = n * (x * p1 - p0) / (x * x - 1.0);
                double dx = p1 / pp;
                x -= dx;
                if (std::abs(dx) < 1e-15) break;
            }
            t[i] = {x, 2.0 / ((1.0 - x * x) * pp * pp)};
        }
        return t;
    }();
    return table;
}

double G_of(double x, double zeta) {
    if (zeta == 1.0) return std::log(x);
    return std::pow(x, 1.0 - zeta) / (1.0 - zeta);
}

// integral_0^x G(U - c) dc over the uniform cost density support
double worker_integral(double U, double x, double zeta) {
    if (x <= 0.0) return 0.0;
    if (zeta == 1.0)
        return U * std::log(U) - (U - x) * std::log(U - x) - x;
    double acc = 0.0;
    for (const auto& [node, weight] : gauss_legendre_64()) {
        double cc = 0.5 * x * (node + 1.0);
        acc += weight * G_of(U - cc, zeta);
    }
    return 0.5 * x * acc;
}

}  // namespace

double social_welfare(const Equilibrium& eq, const ModelParams& mp, double zeta,
                      const SolveOptions& opt) {
    double y0 = eq.y0_solved;
    double LI = 1.0 - eq.low.L_A - eq.high.L_A;
    if (zeta >= 1.0 && y0 <= 0.0 && LI > 0.0)
        throw std::domain_error(
            "social_welfare: non-positive consumption for inactive individuals");
    double sw = LI > 0.0 ? LI * G_of(y0, zeta) : 0.0;

    struct WorkerSide { const WorkerAggregates& wa; const SkillParams& sp; const char* name; };
    for (const auto& side : {WorkerSide{eq.low, mp.low, "low-skill workers"},
                             WorkerSide{eq.high, mp.high, "high-skill workers"}}) {
        double du = side.wa.U - y0;
        if (du <= 0.0) continue;
        double x = opt.truncate_worker_integral ? std::min(du, side.sp.lambda) : du;
        if (zeta >= 1.0 && side.wa.U - x <= 0.0)
            throw std::domain_error(std::string("social_welfare: non-positive consumption for ") +
                                    side.name);
        sw += side.sp.alpha / side.sp.lambda * worker_integral(side.wa.U, x, zeta);
    }

    struct CapSide { const SectorEquilibrium& se; const SectorParams& sec;
                     double kbar; const char* name; };
    for (const auto& side :
         {CapSide{eq.services, mp.services, opt.kbar_S, "services capitalists"},
          CapSide{eq.manufacturing, mp.manufacturing, opt.kbar_M,
                  "manufacturing capitalists"}}) {
        double cons = (1.0 - eq.policy.t) * side.se.profit_pre_tax;
        if (opt.capitalists_receive_lump_sum) cons += y0;
        if (opt.include_foreign_income) {
            if (side.kbar < side.se.capital_per_firm)
                throw ConfigError(std::string("social_welfare: foreign income needs a "
                                              "capital endowment >= domestic capital for ") +
                                  side.name);
            cons += (side.kbar - side.se.capital_per_firm) * side.sec.foreign_return;
        }
        if (zeta >= 1.0 && cons <= 0.0)
            throw std::domain_error(std::string("social_welfare: non-positive consumption for ") +
                                    side.name);
        sw += side.sec.K * G_of(cons, zeta);
    }
    return sw;
}

double check_efficiency(const Equilibrium& eq, const ModelParams& mp) {
    double worst = 0.0;
    struct Side { const SectorEquilibrium& se; const WorkerAggregates& wa;
                  const SectorParams& sec; const SkillParams& sp; };
    for (const auto& s : {Side{eq.services, eq.low, mp.services, mp.low},
                          Side{eq.manufacturing, eq.high, mp.manufacturing, mp.high}}) {
        double n = s.se.q * s.se.vacancies_per_firm;
        double phin = revenue_dn(s.se.capital_per_firm, n, s.sec);
        double eta_v = vacancy_marginal_cost(s.se.vacancies_per_firm, s.sp);
        double cstar = s.wa.U - eq.y0_solved;
        // vacancy margin: q phi_n - c*/theta = eta_v
        double r1 = (s.se.q * phin - cstar / s.se.theta - eta_v) / eta_v;
        // applicant margin: -theta^2 q' phi_n = c*, i.e. delta1 theta q phi_n = c*
        double r2 = (s.sp.delta1 * s.se.theta * s.se.q * phin - cstar) /
                    std::max(cstar, 1e-12);
        worst = std::max({worst, std::abs(r1), std::abs(r2)});
    }
    return worst;
}

double constrained_profit_derivative(const Equilibrium& eq, const ModelParams& mp,
                                     const SolveOptions& opt) {
    (void)opt;  // tolerances are compile-time here; kept for interface symmetry
    if (!eq.services.mw_binding)
        throw SolverError("constrained_profit_derivative: minimum wage does not bind");
    const SectorParams& sec = mp.services;
    const SkillParams& sp = mp.low;
    const SectorEquilibrium& se = eq.services;
    double tau = eq.policy.tau_l;
    double wbar = eq.policy.mw_annual(mp.hours_annualization);
    double theta = se.theta, v = se.vacancies_per_firm;
    double q = se.q, p = se.p;
    double n = q * v;
    double du = eq.low.U - eq.y0_solved;

    bool q_capped = q_raw(theta, sp) > 1.0;
    bool p_capped = p_raw(theta, sp) > 1.0;
    bool part_clamped = du >= sp.lambda;
    double qth = q_capped ? 0.0 : -sp.delta1 * q / theta;
    double pth = p_capped ? 0.0 : (1.0 - sp.delta1) * sp.delta0 *
                                  std::pow(theta, -sp.delta1);

    ReducedMpl mpl = reduced_mpl(sec, eq.policy.t);
    double m = mpl.eval(std::log(n));
    double mprime = mpl.m_slope * m / n;

    // A: vacancy FOC, B: tightness consistency; unknowns (theta, v)
    double A_th = qth * (mprime * v * q + (m - wbar));
    double A_v = mprime * q * q - sp.kappa0 * sp.kappa1 * std::pow(v, sp.kappa1 - 1.0);
    double A_w = -q;
    double dLA_dth = part_clamped ? 0.0 : sp.alpha * pth * (1.0 - tau) * wbar / sp.lambda;
    double dLA_dw = part_clamped ? 0.0 : sp.alpha * p * (1.0 - tau) / sp.lambda;
    double LA = eq.low.L_A;
    double B_th = -LA - theta * dLA_dth;
    double B_v = sec.K;
    double B_w = -theta * dLA_dw;

    double det = A_th * B_v - A_v * B_th;
    if (std::abs(det) < 1e-300)
        throw SolverError("constrained_profit_derivative: singular system");
    double dtheta = (-A_w * B_v + A_v * B_w) / det;
    double dv = (B_th * A_w - A_th * B_w) / det;

    // Pre-tax domestic profit is only part of the capitalist's value, so the
    // envelope does not absorb the capital margin: dPi includes phi_k dk with
    // phi_k = r/(1-t) at the capital FOC and k moving along k(n).
    double dn = q * dv + qth * dtheta * v;
    double dk = sec.beta_k > 0.0
                    ? se.capital_per_firm * (sec.beta_n / (1.0 - sec.beta_k)) * dn / n
                    : 0.0;
    double phik = sec.beta_k > 0.0 ? sec.foreign_return / (1.0 - eq.policy.t) : 0.0;
    return qth * dtheta * v * (m - wbar) - v * q + phik * dk;
}

std::vector<std::pair<std::string, double>> Equilibrium::flat_record() const {
    std::vector<std::pair<std::string, double>> rec;
    auto sector = [&](const std::string& tag, const SectorEquilibrium& se) {
        rec.emplace_back(tag + ".wage", se.wage);
        rec.emplace_back(tag + ".vacancies_per_firm", se.vacancies_per_firm);
        rec.emplace_back(tag + ".capital_per_firm", se.capital_per_firm);
        rec.emplace_back(tag + ".theta", se.theta);
        rec.emplace_back(tag + ".p", se.p);
        rec.emplace_back(tag + ".q", se.q);
        rec.emplace_back(tag + ".employment", se.employment);
        rec.emplace_back(tag + ".profit_pre_tax", se.profit_pre_tax);
        rec.emplace_back(tag + ".mw_binding", se.mw_binding ? 1.0 : 0.0);
        rec.emplace_back(tag + ".capped", se.capped ? 1.0 : 0.0);
        rec.emplace_back(tag + ".foc_residual", se.foc_residual);
    };
    auto worker = [&](const std::string& tag, const WorkerAggregates& wa) {
        rec.emplace_back(tag + ".U", wa.U);
        rec.emplace_back(tag + ".L_A", wa.L_A);
        rec.emplace_back(tag + ".participation_rate", wa.participation_rate);
        rec.emplace_back(tag + ".unemployment_rate", wa.unemployment_rate);
        rec.emplace_back(tag + ".expected_wage_active", wa.expected_wage_active);
    };
    sector("services", services);
    sector("manufacturing", manufacturing);
    worker("low", low);
    worker("high", high);
    rec.emplace_back("policy.tau_l", policy.tau_l);
    rec.emplace_back("policy.tau_h", policy.tau_h);
    rec.emplace_back("policy.t", policy.t);
    rec.emplace_back("policy.mw_hourly", policy.mw_hourly ? *policy.mw_hourly : 0.0);
    rec.emplace_back("y0_solved", y0_solved);
    rec.emplace_back("social_welfare", social_welfare);
    rec.emplace_back("budget_residual", budget_residual);
    rec.emplace_back("feasible", feasible ? 1.0 : 0.0);
    return rec;
}

}  // namespace mwsim
