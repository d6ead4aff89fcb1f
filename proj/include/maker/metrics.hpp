// Horizon-banded and stratified MAE evaluation shared by the trainer's
// validation pass and the harness CLI.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "maker/forecaster.hpp"
#include "maker/kinematics.hpp"

namespace maker::metrics {

using forecaster::AblationFlags;
using forecaster::Forecaster;
using forecaster::PreparedSample;

struct BandReport {
    // band label -> MAE, in degrees and in normalized units
    std::map<std::string, double> mae_deg;
    std::map<std::string, double> mae_norm;
    std::map<std::string, std::size_t> step_counts;  // samples x steps per band
    std::size_t sample_count = 0;
};

struct StratifiedCell {
    double mae_deg = 0.0;
    std::size_t count = 0;
};

struct StratifiedReport {
    // axis ("spatial" | "temporal") -> level -> cell
    std::map<std::string, std::map<std::string, StratifiedCell>> cells;
};

// Bands partition 1..p into [1, p/4], (p/4, p/2], (p/2, p] plus the full
// range, matching the 1-6 / 7-12 / 13-24 / 1-24 protocol at p = 24.
std::vector<std::pair<std::string, std::pair<int, int>>> horizon_bands(int p);

// Deterministic: inference runs with masking disabled.
BandReport evaluate_samples(const Forecaster& model, ad::ParamStore& store,
                            const std::vector<PreparedSample>& samples,
                            const AblationFlags& flags,
                            const prompt_lm::FrozenLMProvider& provider);

// Per-sample degree-space MAE over all steps and both coordinates.
std::vector<double> per_sample_mae_deg(const Forecaster& model,
                                       ad::ParamStore& store,
                                       const std::vector<PreparedSample>& samples,
                                       const AblationFlags& flags,
                                       const prompt_lm::FrozenLMProvider& provider);

double spatial_score(const PreparedSample& s);
double temporal_score(const PreparedSample& s);

StratifiedReport stratified_evaluate(const Forecaster& model, ad::ParamStore& store,
                                     const std::vector<PreparedSample>& samples,
                                     const AblationFlags& flags,
                                     const prompt_lm::FrozenLMProvider& provider);

}  // namespace maker::metrics
