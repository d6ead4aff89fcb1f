// Experiment configuration, dataset assembly, train/evaluate/ablate/stratify
// drivers, and the command-line front end.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "maker/forecaster.hpp"
#include "maker/metrics.hpp"
#include "maker/trainer.hpp"

namespace maker::harness {

struct ExperimentConfig {
    // data source: canonical store path, or synthetic generation when empty
    std::string data;
    std::string dataset_name = "synthetic";
    int synth_count = 64;
    std::string synth_kind = "mixed";
    int synth_len = 96;
    double synth_noise = 0.0003;
    std::string interval = "jittered";  // regular | jittered | bursty
    double interval_base = 60.0;
    double interval_jitter = 20.0;

    int h = 24, p = 24, stride = 8;
    int patch_len = 16, patch_stride = 8, d_m = 16;
    int enc_blocks = 2, enc_heads = 4;
    double mask_ratio = 0.5;
    int hidden_d = 500, prototypes = 100;
    int dec_width = 64, dec_blocks = 2, dec_heads = 2;

    std::string lm_provider = "stub";
    int stub_vocab = 1000, d_llm = 64;

    std::string variant = "full";
    std::uint64_t seed = 1;
    int epochs = 50, batch_size = 64;
    double lr = 0.001, lambda0 = 0.2, growth = 1.0003;
    double vel_weight = 1.0, acc_weight = 1.0;
    std::string gate_scope = "recon_kinematic";  // recon_kinematic | all
    double train_frac = 0.7, val_frac = 0.1;

    forecaster::ModelConfig model_config() const;
    trainer::TrainConfig train_config() const;
    forecaster::AblationFlags flags() const;
};

// Flat `key = value` file; '#' starts a comment. Unknown keys are an error.
ExperimentConfig load_config(const std::string& path);
std::string serialize_config(const ExperimentConfig& cfg);
std::uint64_t config_hash(const ExperimentConfig& cfg);

struct Splits {
    std::vector<forecaster::PreparedSample> train, val, test;
};

std::vector<data::Trajectory> build_dataset(const ExperimentConfig& cfg);

Splits split_and_prepare(const ExperimentConfig& cfg,
                         const std::vector<data::Trajectory>& trajs,
                         const prompt_lm::FrozenLMProvider& provider);

int cli(int argc, const char* const* argv);

}  // namespace maker::harness
