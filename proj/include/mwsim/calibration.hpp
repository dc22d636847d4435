#pragma once

#include <array>
#include <string>
#include <vector>

#include "mwsim/config.hpp"
#include "mwsim/equilibrium.hpp"
#include "mwsim/model.hpp"

namespace mwsim {

/// The fourteen targeted moments, in table order: unemployment (l, h),
/// job-filling (S, M), employment per establishment (S, M), annual earnings
/// including the unemployed (l, h), participation (l, h), profit per
/// establishment (S, M), markdown (l, h).
struct MomentSet {
    static constexpr int kCount = 14;
    std::array<double, kCount> values{};

    static const std::array<std::string, kCount>& names();
    double operator[](int i) const { return values[i]; }
    double& operator[](int i) { return values[i]; }
};

/// Moments of the solved equilibrium at a baseline policy.
MomentSet compute_moments(const ModelParams& mp, const Policy& baseline,
                          const SolveOptions& opt = {});

/// The paper's reported model moments (used as the bundled default targets).
MomentSet table_dii_model_column();

struct CalibrationSpec {
    MomentSet targets;
    std::array<double, MomentSet::kCount> weights;  // per-moment, >= 0
    ModelParams seed_params;
    std::array<double, MomentSet::kCount> lower;    // parameter boxes
    std::array<double, MomentSet::kCount> upper;
    Policy baseline;
    int max_evals = 20000;
    double tol = 1e-10;
    int multistarts = 0;   // Latin-hypercube restarts beyond the seed
    uint64_t seed = 1;
    SolveOptions solve_opt;

    static CalibrationSpec bundled_default(const Config& cfg);
    void validate() const;
};

/// Weighted sum of squared relative deviations from the targets.
double loss(const MomentSet& model, const CalibrationSpec& spec);

struct TracePoint {
    int eval;
    double loss;
    bool improved;
};

struct EstimateResult {
    ModelParams params;
    MomentSet moments;
    double best_loss = 0.0;
    bool converged = false;
    int evaluations = 0;
    std::vector<TracePoint> trace;                  // best-so-far is monotone
    std::vector<std::array<double, 14>> trace_params;
};

/// The 14 free parameters as a flat vector (order matches MomentSet docs):
/// delta0_l, delta1_l, lambda_l, K_S, psi_S, kappa0_l, kappa1_l,
/// delta0_h, delta1_h, lambda_h, K_M, psi_M, kappa0_h, kappa1_h.
std::array<double, 14> pack_free_params(const ModelParams& mp);
ModelParams unpack_free_params(const ModelParams& base, const std::array<double, 14>& x);

/// Derivative-free Nelder-Mead descent with restart-on-collapse and optional
/// Latin-hypercube multi-start. Deterministic given spec.seed.
EstimateResult estimate(const CalibrationSpec& spec);

}  // namespace mwsim
