// Full model assembly: masked encoder -> prompt channel -> fusion ->
// inverted-attention decoder over variate tokens, plus kinematic heads,
// ablation variants, the constant-velocity baseline, and checkpoint IO.
#pragma once

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "maker/data.hpp"
#include "maker/fusion.hpp"
#include "maker/masked_encoder.hpp"
#include "maker/prompt_lm.hpp"

namespace maker::forecaster {

using ad::Mat;
using ad::ParamStore;
using ad::Tape;
using ad::Var;

struct AblationFlags {
    bool use_llm = true;
    bool use_prompt = true;
    bool use_fusion = true;
    bool use_decoder = true;
    bool use_ksl = true;
};

// Named variants from the ablation study. MAKER-LLM removes the whole text
// channel, which also removes the fusion that depends on it.
AblationFlags flags_for_variant(const std::string& name);
std::vector<std::string> known_variants();

struct ModelConfig {
    masked_encoder::EncoderConfig encoder;
    fusion::FusionConfig fusion;
    int p = 24;
    int dec_width = 64;
    int dec_blocks = 2;
    int dec_heads = 2;
    int dec_ff_mult = 4;
};

// A sample with normalization, kinematic ground truth, and the cached prompt
// embedding attached. Everything the forward/loss path needs.
struct PreparedSample {
    data::TrajectorySample raw;
    Mat norm_history;          // h x kChannels
    data::NormStats stats;
    Mat norm_future;           // p x 2, lon/lat in normalized units
    std::vector<double> history_ts;
    std::vector<double> future_ts;
    Eigen::VectorXd true_velocity;      // m/s, p-1
    Eigen::VectorXd true_acceleration;  // m/s^2, p-2
    double kin_scale = 1.0;             // meters per normalized unit
    Mat prompt_embedding;               // tokens x d_llm; empty when unused
};

PreparedSample prepare_sample(const data::TrajectorySample& sample,
                              const prompt_lm::FrozenLMProvider* provider,
                              const std::string& dataset_name, bool use_prompt);

struct ForwardVars {
    Var pred;   // p x 2 normalized positions
    Var recon;  // h x 2 normalized positions
    Var vel;    // 1 x (p-1), normalized units per second
    Var acc;    // 1 x (p-2)
    std::vector<double> attn_rowsums;
};

struct ModelOutput {
    Mat pred_positions;
    Mat recon_positions;
    Eigen::VectorXd pred_velocity;
    Eigen::VectorXd pred_acceleration;
};

class Forecaster {
public:
    explicit Forecaster(ModelConfig cfg);

    void init_params(ParamStore& store, std::uint64_t seed,
                     const prompt_lm::FrozenLMProvider& provider) const;

    // mask_ratio < 0 uses the configured ratio; pass 0 for inference.
    ForwardVars forward(Tape& t, ParamStore& store, const PreparedSample& sample,
                        const AblationFlags& flags,
                        const prompt_lm::FrozenLMProvider& provider,
                        std::uint64_t mask_seed, double mask_ratio = -1.0) const;

    ModelOutput run(ParamStore& store, const PreparedSample& sample,
                    const AblationFlags& flags,
                    const prompt_lm::FrozenLMProvider& provider,
                    std::uint64_t mask_seed, double mask_ratio = -1.0) const;

    const ModelConfig& config() const { return cfg_; }
    const masked_encoder::MaskedEncoder& encoder() const { return enc_; }
    const fusion::Fusion& fusion_component() const { return fus_; }

private:
    ModelConfig cfg_;
    masked_encoder::MaskedEncoder enc_;
    fusion::Fusion fus_;
    nn::AttentionConfig dec_cfg_;
};

// Extrapolates the last position with the mean velocity vector of the last
// three history steps. Output in degrees, p x 2.
Mat constant_velocity_baseline(const data::TrajectorySample& sample);

void save_checkpoint(const std::string& path, const ParamStore& store,
                     const nlohmann::json& meta);
// Returns the stored meta object; parameters are loaded into `store`.
nlohmann::json load_checkpoint(const std::string& path, ParamStore& store);

}  // namespace maker::forecaster
