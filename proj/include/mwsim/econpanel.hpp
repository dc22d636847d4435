#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mwsim {

// ---- inputs ----------------------------------------------------------------

struct MwPanelRow {
    int state = 0;
    int year = 0;
    double mw_state = 0.0;        // nominal statutory state minimum
    double mw_fed = 0.0;          // nominal federal minimum
    double affected_share = 0.0;  // prior-year share below the prospective minimum
    double population = 1.0;
};

struct MwPanel {
    std::vector<MwPanelRow> rows;
    std::map<int, double> deflator;  // year -> price index, 1.0 in the base year

    void validate() const;  // one row per state-year, contiguous years
    double real_binding_mw(int state, int year) const;
    static MwPanel from_csv(const std::string& panel_path,
                            const std::string& deflator_path);
};

struct Event {
    int state = 0;
    int year = 0;
    double real_increase = 0.0;   // base-year dollars per hour
    double affected_share = 0.0;
    double dlog_mw = 0.0;         // log real binding mw change at the event year
};

struct NonEventIncrease {
    int state = 0;
    int year = 0;
};

struct EventRules {
    double min_real_increase = 0.25;
    double min_affected_share = 0.02;
    int clean_pre_years = 3;
    int window_pre = 3;   // relative time runs -window_pre .. +window_post
    int window_post = 4;
};

struct EventDetection {
    std::vector<Event> events;
    std::vector<NonEventIncrease> small_state_increases;
    std::vector<NonEventIncrease> federal_increases;
};

/// Applies, in order: real-increase threshold, binding-above-federal
/// requirement, affected-share threshold, clean-pre rule, balanced-window
/// observability. Deterministic and independent of input row order.
EventDetection detect_events(const MwPanel& panel, const EventRules& rules = {});

// ---- outcomes and stacking -------------------------------------------------

struct OutcomeRow {
    int state = 0;
    int year = 0;
    double value = 0.0;     // level; the estimator takes logs
    double weight = 1.0;
    int region = 0;
    int division = 0;
    int industry = -1;      // -1 when the outcome does not vary by industry
};

struct OutcomePanel {
    std::vector<OutcomeRow> rows;
    static OutcomePanel from_csv(const std::string& path);
};

struct StackedRow {
    int event_id = 0;
    int state = 0;
    int year = 0;
    int rel_time = 0;
    bool treated = false;
    double log_outcome = 0.0;
    double weight = 1.0;
    int region = 0;
    int division = 0;
    int industry = -1;
};

struct StackedPanel {
    std::vector<StackedRow> rows;
    std::vector<std::string> control_names;     // Early/Pre/Post x Small/Fed per event
    std::vector<std::vector<double>> control_cols;
    std::vector<Event> events_used;
    std::vector<int> events_dropped;            // no clean controls
    double mean_dlog_mw = 0.0;
    int window_pre = 3, window_post = 4;
};

/// One appended dataset per event: the treated state plus every state with
/// no event inside that event's window. Control-flag interactions for
/// small/federal increases are materialized as numeric columns.
StackedPanel build_stack(const OutcomePanel& outcomes, const EventDetection& det,
                         const EventRules& rules = {});

// ---- fixed-effects estimator -----------------------------------------------

enum class TimeEffects { year_by_event, region_year_event, division_year_event };

struct FitSpec {
    bool event_study = true;       // false: pooled treated x post DiD
    TimeEffects time_effects = TimeEffects::year_by_event;
    bool include_controls = true;
    bool by_industry = false;      // state-by-industry-by-event units and clusters
    double demean_tol = 1e-10;
    int demean_max_passes = 10000;
};

struct Coefficient {
    std::string name;
    int rel_time = 0;       // meaningful for event-study terms
    double beta = 0.0;
    double se = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    bool omitted = false;   // the tau = -1 normalization
};

struct EstimateReport {
    std::vector<Coefficient> coefficients;   // event-study taus or pooled beta
    std::vector<std::string> dropped_columns;
    int n_events = 0;
    int n_obs = 0;
    int n_clusters = 0;
    double dlog_mw = 0.0;
    double elasticity = 0.0;                 // pooled beta / dlog_mw
    double demean_residual = 0.0;
    int rank = 0;
};

/// Weighted least squares after iterative demeaning over the fixed-effect
/// groups; cluster-robust CR1 covariance with factor G/(G-1)*(N-1)/(N-K).
EstimateReport fit_fe(const StackedPanel& stack, const FitSpec& spec);

// ---- synthetic validation panels -------------------------------------------

struct SynthConfig {
    int n_states = 30;
    int year_min = 1997;
    int year_max = 2019;
    std::vector<std::pair<int, int>> event_schedule;  // (state, event year)
    double event_size_real = 1.00;                    // real $ jump at events
    std::array<double, 8> effect_profile{};           // tau = -3..4, [tau+3]
    double noise_sd = 0.0;
    uint64_t seed = 1;
    double base_mw = 7.25;
    double affected_share = 0.05;
};

struct SynthPanel {
    MwPanel mw;
    OutcomePanel outcomes;
};

/// Reproducible pseudo-random panel with planted treatment effects and known
/// fixed-effect components. Same seed, same bits.
SynthPanel synth_panel(const SynthConfig& cfg);

}  // namespace mwsim
