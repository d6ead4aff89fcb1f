// Knowledge-based self-paced training: composite kinematic loss, easiness
// selection against the pace threshold, the alternating optimization step,
// and the Adam-driven epoch loop.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "maker/forecaster.hpp"

namespace maker::trainer {

using forecaster::AblationFlags;
using forecaster::Forecaster;
using forecaster::ModelOutput;
using forecaster::PreparedSample;

struct EasinessState {
    double lambda = 0.2;
    double growth = 1.0003;
    std::vector<int> v;  // last selection, one 0/1 per batch sample
};

struct LossBreakdown {
    double pred_mae = 0.0;
    double recon_mae = 0.0;
    double vel_mae = 0.0;  // m/s
    double acc_mae = 0.0;  // m/s^2
    double easiness_loss = 0.0;
    double total = 0.0;
};

enum class GateScope { ReconKinematic, All };

struct TrainConfig {
    int epochs = 50;
    int batch_size = 64;
    double lr = 0.001;
    double lambda0 = 0.2;
    double growth = 1.0003;
    double vel_weight = 1.0;
    double acc_weight = 1.0;
    GateScope gate_scope = GateScope::ReconKinematic;
    std::uint64_t seed = 1;
    std::string dataset_name = "synthetic";
    std::string log_path;         // NDJSON, empty disables
    std::string checkpoint_path;  // empty disables
};

LossBreakdown sample_losses(const ModelOutput& output, const PreparedSample& sample,
                            double vel_weight = 1.0, double acc_weight = 1.0);

// v_i = 1 iff loss_i < lambda (strict).
std::vector<int> easiness(const std::vector<double>& losses, double lambda);

// E(w, v; lambda) = sum_i v_i loss_i - lambda sum_i v_i
double spl_objective(const std::vector<double>& losses, const std::vector<int>& v,
                     double lambda);

void advance_pace(EasinessState& state);

struct StepMetrics {
    int step = 0;
    double lambda = 0.0;
    double selected_fraction = 0.0;
    LossBreakdown mean_losses;
    std::vector<double> sample_easiness;  // per batch sample
    std::vector<int> selected;            // 0/1 per batch sample
    bool aborted = false;  // non-finite loss, update skipped
};

class Trainer {
public:
    Trainer(const Forecaster& model, const prompt_lm::FrozenLMProvider& provider,
            TrainConfig cfg);

    // One ACS iteration: forward, fix w -> select v, fix v -> Adam step,
    // then advance the pace.
    StepMetrics batch_step(ad::ParamStore& store,
                           const std::vector<const PreparedSample*>& batch,
                           EasinessState& state, const AblationFlags& flags);

    struct Result {
        int steps = 0;
        double final_lambda = 0.0;
        double final_val_mae_deg = -1.0;
        double best_val_mae_deg = -1.0;
        std::vector<StepMetrics> log;
    };

    Result train(ad::ParamStore& store, const std::vector<PreparedSample>& train_set,
                 const std::vector<PreparedSample>& val_set,
                 const AblationFlags& flags);

    const TrainConfig& config() const { return cfg_; }

private:
    const Forecaster& model_;
    const prompt_lm::FrozenLMProvider& provider_;
    TrainConfig cfg_;
    int global_step_ = 0;
};

}  // namespace maker::trainer
