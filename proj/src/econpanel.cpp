#include "mwsim/econpanel.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <climits>
#include <functional>
#include <cmath>
#include <set>
#include <sstream>
#include <tuple>

#include "mwsim/csv.hpp"
#include "mwsim/errors.hpp"
#include "mwsim/rng.hpp"

namespace mwsim {

// ---- panel ------------------------------------------------------------------

void MwPanel::validate() const {
    std::map<int, std::vector<int>> years_by_state;
    std::set<std::pair<int, int>> seen;
    for (const auto& r : rows) {
        if (!seen.insert({r.state, r.year}).second)
            throw DataError("mw panel: duplicate state-year " + std::to_string(r.state) +
                            "/" + std::to_string(r.year));
        years_by_state[r.state].push_back(r.year);
    }
    std::vector<int> missing_deflator;
    for (auto& [st, ys] : years_by_state) {
        std::sort(ys.begin(), ys.end());
        for (size_t i = 1; i < ys.size(); ++i)
            if (ys[i] != ys[i - 1] + 1)
                throw DataError("mw panel: years not contiguous for state " +
                                std::to_string(st));
        for (int y : ys)
            if (!deflator.count(y)) missing_deflator.push_back(y);
    }
    if (!missing_deflator.empty()) {
        std::sort(missing_deflator.begin(), missing_deflator.end());
        missing_deflator.erase(
            std::unique(missing_deflator.begin(), missing_deflator.end()),
            missing_deflator.end());
        std::ostringstream os;
        os << "mw panel: missing deflator years:";
        for (int y : missing_deflator) os << ' ' << y;
        throw DataError(os.str());
    }
    for (const auto& [y, d] : deflator)
        if (!(d > 0.0)) throw DataError("mw panel: non-positive deflator in " +
                                        std::to_string(y));
}

double MwPanel::real_binding_mw(int state, int year) const {
    for (const auto& r : rows)
        if (r.state == state && r.year == year)
            return std::max(r.mw_state, r.mw_fed) / deflator.at(year);
    throw DataError("mw panel: no row for state " + std::to_string(state) +
                    " year " + std::to_string(year));
}

MwPanel MwPanel::from_csv(const std::string& panel_path,
                          const std::string& deflator_path) {
    MwPanel p;
    CsvTable t = read_csv(panel_path);
    int cs = t.col("state"), cy = t.col("year");
    int cm = t.col("mw_state"), cf = t.col("mw_fed");
    int ca = t.col("affected_share");
    int cp = t.has_col("population") ? t.col("population") : -1;
    for (size_t i = 0; i < t.rows.size(); ++i) {
        MwPanelRow r;
        r.state = static_cast<int>(t.num(i, cs));
        r.year = static_cast<int>(t.num(i, cy));
        r.mw_state = t.num(i, cm);
        r.mw_fed = t.num(i, cf);
        r.affected_share = t.num(i, ca);
        r.population = cp >= 0 ? t.num(i, cp) : 1.0;
        p.rows.push_back(r);
    }
    CsvTable d = read_csv(deflator_path);
    int dy = d.col("year"), di = d.col("index");
    for (size_t i = 0; i < d.rows.size(); ++i)
        p.deflator[static_cast<int>(d.num(i, dy))] = d.num(i, di);
    p.validate();
    return p;
}

OutcomePanel OutcomePanel::from_csv(const std::string& path) {
    OutcomePanel p;
    CsvTable t = read_csv(path);
    int cs = t.col("state"), cy = t.col("year"), cv = t.col("value");
    int cw = t.has_col("weight") ? t.col("weight") : -1;
    int cr = t.has_col("region") ? t.col("region") : -1;
    int cd = t.has_col("division") ? t.col("division") : -1;
    int ci = t.has_col("industry") ? t.col("industry") : -1;
    for (size_t i = 0; i < t.rows.size(); ++i) {
        OutcomeRow r;
        r.state = static_cast<int>(t.num(i, cs));
        r.year = static_cast<int>(t.num(i, cy));
        r.value = t.num(i, cv);
        r.weight = cw >= 0 ? t.num(i, cw) : 1.0;
        r.region = cr >= 0 ? static_cast<int>(t.num(i, cr)) : 0;
        r.division = cd >= 0 ? static_cast<int>(t.num(i, cd)) : 0;
        r.industry = ci >= 0 ? static_cast<int>(t.num(i, ci)) : -1;
        p.rows.push_back(r);
    }
    return p;
}

// ---- event detection ----------------------------------------------------------

EventDetection detect_events(const MwPanel& panel, const EventRules& rules) {
    panel.validate();
    // canonical ordering makes detection independent of input row order
    std::map<int, std::map<int, MwPanelRow>> by_state;
    for (const auto& r : panel.rows) by_state[r.state][r.year] = r;

    EventDetection out;
    for (const auto& [state, series] : by_state) {
        int y_min = series.begin()->first;
        int y_max = series.rbegin()->first;
        int last_event_year = y_min - rules.clean_pre_years - 1;
        for (const auto& [year, row] : series) {
            if (year == y_min) continue;
            const MwPanelRow& prev = series.at(year - 1);
            double bind = std::max(row.mw_state, row.mw_fed);
            double bind_prev = std::max(prev.mw_state, prev.mw_fed);
            if (bind <= bind_prev) continue;  // no increase in the binding minimum

            bool state_driven = row.mw_state > row.mw_fed;
            if (!state_driven) {
                out.federal_increases.push_back({state, year});
                continue;
            }
            double real_inc = bind / panel.deflator.at(year) -
                              bind_prev / panel.deflator.at(year - 1);
            bool qualifies = real_inc >= rules.min_real_increase - 1e-12 &&
                             row.affected_share >= rules.min_affected_share - 1e-12;
            bool clean_pre = year - last_event_year > rules.clean_pre_years;
            bool window_ok = year - rules.window_pre >= y_min &&
                             year + rules.window_post <= y_max;
            if (qualifies && clean_pre && window_ok) {
                Event ev;
                ev.state = state;
                ev.year = year;
                ev.real_increase = real_inc;
                ev.affected_share = row.affected_share;
                ev.dlog_mw = std::log(bind / panel.deflator.at(year)) -
                             std::log(bind_prev / panel.deflator.at(year - 1));
                out.events.push_back(ev);
                last_event_year = year;
            } else {
                out.small_state_increases.push_back({state, year});
            }
        }
    }
    return out;
}

// ---- stacking ----------------------------------------------------------------

StackedPanel build_stack(const OutcomePanel& outcomes, const EventDetection& det,
                         const EventRules& rules) {
    std::map<std::pair<int, int>, std::vector<const OutcomeRow*>> by_state_year;
    std::set<int> all_states;
    for (const auto& r : outcomes.rows) {
        by_state_year[{r.state, r.year}].push_back(&r);
        all_states.insert(r.state);
    }
    std::map<int, std::vector<int>> events_by_state;
    for (const auto& e : det.events) events_by_state[e.state].push_back(e.year);

    StackedPanel stack;
    stack.window_pre = rules.window_pre;
    stack.window_post = rules.window_post;

    auto has_event_in_window = [&](int state, int y_lo, int y_hi) {
        auto it = events_by_state.find(state);
        if (it == events_by_state.end()) return false;
        for (int y : it->second)
            if (y >= y_lo && y <= y_hi) return true;
        return false;
    };

    int event_id = 0;
    double dlog_sum = 0.0;
    for (const auto& ev : det.events) {
        int y_lo = ev.year - rules.window_pre;
        int y_hi = ev.year + rules.window_post;

        // treated state must be fully observed
        std::vector<int> gaps;
        for (int y = y_lo; y <= y_hi; ++y)
            if (!by_state_year.count({ev.state, y})) gaps.push_back(y);
        if (!gaps.empty()) {
            std::ostringstream os;
            os << "build_stack: treated state " << ev.state
               << " missing outcome years:";
            for (int y : gaps) os << ' ' << y;
            throw DataError(os.str());
        }

        std::vector<int> members{ev.state};
        for (int st : all_states) {
            if (st == ev.state) continue;
            if (has_event_in_window(st, y_lo, y_hi)) continue;
            bool complete = true;
            for (int y = y_lo; y <= y_hi && complete; ++y)
                if (!by_state_year.count({st, y})) complete = false;
            if (complete) members.push_back(st);
        }
        if (members.size() == 1) {
            stack.events_dropped.push_back(ev.state * 10000 + ev.year);
            continue;
        }

        for (int st : members) {
            for (int y = y_lo; y <= y_hi; ++y) {
                for (const OutcomeRow* orow : by_state_year.at({st, y})) {
                    StackedRow r;
                    r.event_id = event_id;
                    r.state = st;
                    r.year = y;
                    r.rel_time = y - ev.year;
                    r.treated = (st == ev.state);
                    if (!(orow->value > 0.0))
                        throw DataError("build_stack: non-positive outcome for state " +
                                        std::to_string(st) + " year " + std::to_string(y));
                    r.log_outcome = std::log(orow->value);
                    r.weight = orow->weight;
                    r.region = orow->region;
                    r.division = orow->division;
                    r.industry = orow->industry;
                    stack.rows.push_back(r);
                }
            }
        }
        stack.events_used.push_back(ev);
        dlog_sum += ev.dlog_mw;
        ++event_id;
    }
    if (!stack.events_used.empty())
        stack.mean_dlog_mw = dlog_sum / stack.events_used.size();

    // Early/Pre/Post x Small/Fed interactions, one set per event
    struct Inc { int state, year; bool fed; };
    std::vector<Inc> incs;
    for (const auto& s : det.small_state_increases) incs.push_back({s.state, s.year, false});
    for (const auto& s : det.federal_increases) incs.push_back({s.state, s.year, true});

    auto add_control = [&](const std::string& name, std::vector<double> col) {
        bool nonzero = false;
        for (double v : col)
            if (v != 0.0) { nonzero = true; break; }
        if (!nonzero) return;
        stack.control_names.push_back(name);
        stack.control_cols.push_back(std::move(col));
    };
    for (size_t e = 0; e < stack.events_used.size(); ++e) {
        for (int fed = 0; fed <= 1; ++fed) {
            const char* kind = fed ? "fed" : "small";
            std::vector<double> early(stack.rows.size(), 0.0);
            std::vector<double> pre(stack.rows.size(), 0.0);
            std::vector<double> post(stack.rows.size(), 0.0);
            for (size_t i = 0; i < stack.rows.size(); ++i) {
                const StackedRow& r = stack.rows[i];
                if (r.event_id != static_cast<int>(e)) continue;
                for (const auto& inc : incs) {
                    if (inc.fed != static_cast<bool>(fed) || inc.state != r.state) continue;
                    if (r.year == inc.year - 3 || r.year == inc.year - 2) early[i] = 1.0;
                    if (r.year == inc.year - 1) pre[i] = 1.0;
                    if (r.year >= inc.year && r.year <= inc.year + 4) post[i] = 1.0;
                }
            }
            std::string base = std::string(kind) + "_e" + std::to_string(e);
            add_control(base + "_early", std::move(early));
            add_control(base + "_pre", std::move(pre));
            add_control(base + "_post", std::move(post));
        }
    }
    return stack;
}

// ---- weighted high-dimensional FE estimator -----------------------------------

namespace {

struct FeGroups {
    // group index per row, per FE dimension
    std::vector<std::vector<int>> ids;
    std::vector<int> n_groups;
};

// dense group labels for the requested effect structure
FeGroups make_groups(const StackedPanel& stack, const FitSpec& spec) {
    FeGroups g;
    auto label = [&](auto key_fn) {
        std::map<decltype(key_fn(stack.rows[0])), int> dict;
        std::vector<int> ids(stack.rows.size());
        for (size_t i = 0; i < stack.rows.size(); ++i) {
            auto key = key_fn(stack.rows[i]);
            auto [it, inserted] = dict.emplace(key, static_cast<int>(dict.size()));
            ids[i] = it->second;
        }
        g.ids.push_back(std::move(ids));
        g.n_groups.push_back(static_cast<int>(dict.size()));
    };
    if (spec.by_industry) {
        label([](const StackedRow& r) {
            return std::tuple<int, int, int>(r.state, r.industry, r.event_id);
        });
    } else {
        label([](const StackedRow& r) {
            return std::tuple<int, int>(r.state, r.event_id);
        });
    }
    switch (spec.time_effects) {
        case TimeEffects::year_by_event:
            label([](const StackedRow& r) {
                return std::tuple<int, int>(r.year, r.event_id);
            });
            break;
        case TimeEffects::region_year_event:
            label([](const StackedRow& r) {
                return std::tuple<int, int, int>(r.region, r.year, r.event_id);
            });
            break;
        case TimeEffects::division_year_event:
            label([](const StackedRow& r) {
                return std::tuple<int, int, int>(r.division, r.year, r.event_id);
            });
            break;
    }
    return g;
}

// weighted demeaning by alternating projections; returns max residual mean
double demean(Eigen::MatrixXd& M, const Eigen::VectorXd& w, const FeGroups& g,
              double tol, int max_passes) {
    const auto n = M.rows();
    std::vector<Eigen::VectorXd> wsum(g.ids.size());
    for (size_t d = 0; d < g.ids.size(); ++d) {
        wsum[d] = Eigen::VectorXd::Zero(g.n_groups[d]);
        for (Eigen::Index i = 0; i < n; ++i) wsum[d][g.ids[d][i]] += w[i];
    }
    double worst = 0.0;
    for (int pass = 0; pass < max_passes; ++pass) {
        worst = 0.0;
        for (size_t d = 0; d < g.ids.size(); ++d) {
            Eigen::MatrixXd means = Eigen::MatrixXd::Zero(g.n_groups[d], M.cols());
            for (Eigen::Index i = 0; i < n; ++i)
                means.row(g.ids[d][i]) += w[i] * M.row(i);
            for (int gi = 0; gi < g.n_groups[d]; ++gi)
                means.row(gi) /= wsum[d][gi];
            for (Eigen::Index i = 0; i < n; ++i) M.row(i) -= means.row(g.ids[d][i]);
            worst = std::max(worst, means.cwiseAbs().maxCoeff());
        }
        if (worst <= tol) return worst;
    }
    throw SolverError("fit_fe: demeaning did not converge, residual " +
                      std::to_string(worst));
}

}  // namespace

EstimateReport fit_fe(const StackedPanel& stack, const FitSpec& spec) {
    if (stack.rows.empty()) throw DataError("fit_fe: empty stacked panel");
    const size_t n = stack.rows.size();

    // design columns
    std::vector<std::string> names;
    std::vector<int> rel_of;  // relative time per column, INT_MIN for controls
    std::vector<std::vector<double>> cols;
    if (spec.event_study) {
        for (int tau = -stack.window_pre; tau <= stack.window_post; ++tau) {
            if (tau == -1) continue;  // omitted category
            std::vector<double> col(n, 0.0);
            for (size_t i = 0; i < n; ++i)
                col[i] = (stack.rows[i].treated && stack.rows[i].rel_time == tau) ? 1.0 : 0.0;
            names.push_back("tau_" + std::to_string(tau));
            rel_of.push_back(tau);
            cols.push_back(std::move(col));
        }
    } else {
        std::vector<double> col(n, 0.0);
        for (size_t i = 0; i < n; ++i)
            col[i] = (stack.rows[i].treated && stack.rows[i].rel_time >= 0) ? 1.0 : 0.0;
        names.push_back("treated_post");
        rel_of.push_back(0);
        cols.push_back(std::move(col));
    }
    if (spec.include_controls) {
        for (size_t c = 0; c < stack.control_cols.size(); ++c) {
            names.push_back(stack.control_names[c]);
            rel_of.push_back(INT_MIN);
            cols.push_back(stack.control_cols[c]);
        }
    }

    const int p = static_cast<int>(cols.size());
    Eigen::MatrixXd M(n, p + 1);  // [y | X]
    Eigen::VectorXd w(n);
    for (size_t i = 0; i < n; ++i) {
        M(i, 0) = stack.rows[i].log_outcome;
        w[i] = stack.rows[i].weight;
        for (int j = 0; j < p; ++j) M(i, j + 1) = cols[j][i];
    }
    if ((w.array() <= 0.0).any()) throw DataError("fit_fe: non-positive weights");

    FeGroups groups = make_groups(stack, spec);
    EstimateReport rep;
    rep.demean_residual = demean(M, w, groups, spec.demean_tol, spec.demean_max_passes);

    Eigen::VectorXd y = M.col(0);
    Eigen::MatrixXd X = M.rightCols(p);
    Eigen::VectorXd sw = w.array().sqrt();

    // rank-revealing QR on the weighted design; collinear columns are dropped
    Eigen::MatrixXd Xw = sw.asDiagonal() * X;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xw);
    qr.setThreshold(1e-9);
    int rank = static_cast<int>(qr.rank());
    std::vector<int> keep;
    {
        auto perm = qr.colsPermutation().indices();
        std::vector<int> first(rank);
        for (int i = 0; i < rank; ++i) first[i] = perm[i];
        std::sort(first.begin(), first.end());
        keep = first;
        std::vector<char> kept(p, 0);
        for (int c : keep) kept[c] = 1;
        for (int c = 0; c < p; ++c)
            if (!kept[c]) rep.dropped_columns.push_back(names[c]);
    }
    Eigen::MatrixXd Xk(n, keep.size());
    for (size_t j = 0; j < keep.size(); ++j) Xk.col(j) = X.col(keep[j]);

    Eigen::MatrixXd XtWX = Xk.transpose() * w.asDiagonal() * Xk;
    Eigen::VectorXd XtWy = Xk.transpose() * (w.asDiagonal() * y);
    Eigen::LLT<Eigen::MatrixXd> llt(XtWX);
    if (llt.info() != Eigen::Success)
        throw SolverError("fit_fe: normal equations not positive definite after drop");
    Eigen::VectorXd beta = llt.solve(XtWy);
    Eigen::MatrixXd bread = llt.solve(Eigen::MatrixXd::Identity(keep.size(), keep.size()));
    Eigen::VectorXd resid = y - Xk * beta;

    // cluster labels
    std::map<long long, int> cl;
    std::vector<int> cluster_of(n);
    for (size_t i = 0; i < n; ++i) {
        long long key = spec.by_industry
                            ? (static_cast<long long>(stack.rows[i].state) << 20) +
                                  stack.rows[i].industry
                            : stack.rows[i].state;
        auto [it, ins] = cl.emplace(key, static_cast<int>(cl.size()));
        cluster_of[i] = it->second;
    }
    int G = static_cast<int>(cl.size());
    if (G < 2) throw DataError("fit_fe: singular cluster structure (G < 2)");

    // CR1 meat: sum over clusters of (X' W u)(X' W u)'
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(keep.size(), keep.size());
    {
        Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(G, keep.size());
        for (size_t i = 0; i < n; ++i)
            scores.row(cluster_of[i]) += w[i] * resid[i] * Xk.row(i);
        meat = scores.transpose() * scores;
    }
    // absorbed parameters count toward K: columns kept plus fixed-effect
    // levels, net of one redundancy per connected component of the
    // unit/time incidence graph (one shared intercept per component)
    long long N = static_cast<long long>(n);
    long long K = static_cast<long long>(keep.size());
    for (size_t d = 0; d < groups.ids.size(); ++d) K += groups.n_groups[d];
    {
        int total_nodes = groups.n_groups[0] + groups.n_groups[1];
        std::vector<int> parent(total_nodes);
        for (int i = 0; i < total_nodes; ++i) parent[i] = i;
        std::function<int(int)> find = [&](int a) {
            while (parent[a] != a) a = parent[a] = parent[parent[a]];
            return a;
        };
        for (size_t i = 0; i < n; ++i) {
            int a = find(groups.ids[0][i]);
            int b = find(groups.n_groups[0] + groups.ids[1][i]);
            if (a != b) parent[a] = b;
        }
        std::set<int> roots;
        for (size_t i = 0; i < n; ++i) roots.insert(find(groups.ids[0][i]));
        K -= static_cast<long long>(roots.size());
    }
    if (K >= N) K = N - 1;
    double c_factor = (static_cast<double>(G) / (G - 1)) *
                      (static_cast<double>(N - 1) / (N - K));
    Eigen::MatrixXd vcov = c_factor * bread * meat * bread;

    // assemble report, re-inserting dropped columns and the omitted tau = -1
    std::map<int, int> col_to_kept;
    for (size_t j = 0; j < keep.size(); ++j) col_to_kept[keep[j]] = static_cast<int>(j);
    const double z975 = 1.959963984540054;
    auto push_coef = [&](const std::string& nm, int rel, int col_idx) {
        Coefficient c;
        c.name = nm;
        c.rel_time = rel;
        if (col_idx >= 0 && col_to_kept.count(col_idx)) {
            int j = col_to_kept[col_idx];
            c.beta = beta[j];
            c.se = std::sqrt(std::max(vcov(j, j), 0.0));
            c.ci_low = c.beta - z975 * c.se;
            c.ci_high = c.beta + z975 * c.se;
        } else {
            c.omitted = true;
        }
        rep.coefficients.push_back(c);
    };
    if (spec.event_study) {
        int design_idx = 0;
        for (int tau = -stack.window_pre; tau <= stack.window_post; ++tau) {
            if (tau == -1) {
                push_coef("tau_-1", -1, -1);  // normalized to zero
                continue;
            }
            push_coef("tau_" + std::to_string(tau), tau, design_idx);
            ++design_idx;
        }
    } else {
        push_coef("treated_post", 0, 0);
    }

    rep.n_events = static_cast<int>(stack.events_used.size());
    rep.n_obs = static_cast<int>(n);
    rep.n_clusters = G;
    rep.dlog_mw = stack.mean_dlog_mw;
    rep.rank = rank;
    if (!spec.event_study && rep.dlog_mw > 0.0)
        rep.elasticity = rep.coefficients.front().beta / rep.dlog_mw;
    return rep;
}

// ---- synthetic panels ----------------------------------------------------------

SynthPanel synth_panel(const SynthConfig& cfg) {
    SynthPanel out;
    for (int y = cfg.year_min; y <= cfg.year_max; ++y) out.mw.deflator[y] = 1.0;

    std::map<int, std::vector<int>> sched;
    for (const auto& [st, y] : cfg.event_schedule) sched[st].push_back(y);

    for (int st = 0; st < cfg.n_states; ++st) {
        double level = cfg.base_mw;
        for (int y = cfg.year_min; y <= cfg.year_max; ++y) {
            auto it = sched.find(st);
            if (it != sched.end() &&
                std::find(it->second.begin(), it->second.end(), y) != it->second.end())
                level += cfg.event_size_real;
            MwPanelRow r;
            r.state = st;
            r.year = y;
            r.mw_state = level;
            r.mw_fed = cfg.base_mw - 0.01;  // state minimum binds throughout
            r.affected_share = cfg.affected_share;
            r.population = 1.0;
            out.mw.rows.push_back(r);
        }
    }

    for (int st = 0; st < cfg.n_states; ++st) {
        double state_fe = 0.2 * Rng(Rng::mix(cfg.seed, st, 11)).normal();
        for (int y = cfg.year_min; y <= cfg.year_max; ++y) {
            double year_fe = 0.1 * Rng(Rng::mix(cfg.seed, y, 22)).normal();
            double effect = 0.0;
            auto it = sched.find(st);
            if (it != sched.end()) {
                for (int ev_year : it->second) {
                    int tau = y - ev_year;
                    if (tau >= -3 && tau <= 4) effect += cfg.effect_profile[tau + 3];
                }
            }
            double eps = cfg.noise_sd == 0.0
                             ? 0.0
                             : cfg.noise_sd * Rng(Rng::mix(cfg.seed, st * 100000 + y, 33)).normal();
            OutcomeRow r;
            r.state = st;
            r.year = y;
            r.value = std::exp(2.0 + state_fe + year_fe + effect + eps);
            r.weight = 1.0;
            r.region = st % 4;
            r.division = st % 9;
            r.industry = -1;
            out.outcomes.rows.push_back(r);
        }
    }
    return out;
}

}  // namespace mwsim
