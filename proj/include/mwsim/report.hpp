#pragma once

#include <string>
#include <vector>

#include "mwsim/calibration.hpp"
#include "mwsim/config.hpp"
#include "mwsim/econpanel.hpp"
#include "mwsim/equilibrium.hpp"
#include "mwsim/policy_grid.hpp"
#include "mwsim/suffstats.hpp"

namespace mwsim {

inline constexpr const char* kToolVersion = "mwsim 1.0.0";

/// "# key=value" metadata lines carried by every emitted file; a run is
/// reproducible from these alone (no timestamps, outputs are byte-stable).
std::vector<std::string> metadata_lines(const Config& cfg, uint64_t seed, int jobs);

void write_equilibrium_csv(const std::string& path, const Equilibrium& eq,
                           const std::vector<std::string>& meta);
std::string equilibrium_json(const Equilibrium& eq, const MomentSet* moments,
                             const std::vector<std::string>& meta);

void write_surface_csv(const std::string& path, const WelfareSurface& surf,
                       const std::vector<std::string>& meta);
void write_envelope_csv(const std::string& path,
                        const std::vector<EnvelopePoint>& env,
                        const std::vector<std::string>& meta);
void write_optima_csv(const std::string& path,
                      const std::vector<OptimalMwPoint>& pts,
                      const std::vector<std::string>& meta);
std::string grid_summary_json(const WelfareSurface& surf, const JointOptimum& opt,
                              const std::vector<std::string>& meta);

void write_calibration_trace_csv(const std::string& path, const EstimateResult& res,
                                 const std::vector<std::string>& meta);
std::string calibration_json(const EstimateResult& res,
                             const std::vector<std::string>& meta);

void write_table5_csv(const std::string& path, const std::vector<Table5Cell>& cells,
                      const std::vector<std::string>& meta);

void write_coefficients_csv(const std::string& path, const EstimateReport& rep,
                            const std::vector<std::string>& meta);
std::string events_summary_json(const EstimateReport& rep,
                                const EventDetection& det,
                                const std::vector<std::string>& meta);

}  // namespace mwsim
