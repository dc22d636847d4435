#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mwsim/model.hpp"

namespace mwsim {

/// Flat key=value configuration. Keys mirror the calibration symbol names
/// (delta0_l, beta_n_S, ...). '#' starts a comment; blank lines are ignored.
class Config {
public:
    Config() = default;

    static Config from_file(const std::string& path);
    static Config from_string(const std::string& text);

    /// Built-in defaults: the bundled baseline calibration and tolerances.
    static Config defaults();

    /// Defaults overlaid with a file (if any) and then --set overrides.
    static Config load(const std::optional<std::string>& path,
                       const std::vector<std::string>& overrides);

    bool has(const std::string& key) const;
    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;

    void set(const std::string& key, const std::string& value);
    void apply_override(const std::string& key_equals_value);

    /// FNV-1a hash of the canonical "key=value\n" serialization.
    std::string hash() const;
    std::string serialize() const;

    ModelParams model_params() const;
    Policy baseline_policy() const;

    const std::map<std::string, std::string>& entries() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

/// Solver and accounting knobs shared by the equilibrium and policy layers.
struct SolveOptions {
    double firm_tol = 1e-10;          // firm FOC residual tolerance (relative)
    double fixed_point_tol = 1e-10;   // (U, theta) residual tolerance
    double budget_tol = 1e-6;         // budget residual tolerance (relative)
    double y0_max = 200.0;
    int max_newton_iter = 120;
    int max_bisect_iter = 200;
    bool capitalists_receive_lump_sum = true;
    bool include_foreign_income = false;
    double kbar_S = -1.0;  // capital endowments, required only when foreign
    double kbar_M = -1.0;  // income is included in capitalist consumption
    // When set, the worker welfare integral stops at the cost-distribution
    // upper bound lambda instead of running to U - y0 as in the welfare
    // formula (the two differ only where participation is saturated).
    bool truncate_worker_integral = false;
    double zeta = 1.0;                // social welfare curvature

    static SolveOptions from_config(const Config& cfg);
};

}  // namespace mwsim
