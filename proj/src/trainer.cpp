#include "maker/trainer.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <numeric>
#include <random>
#include <stdexcept>

#include "maker/metrics.hpp"

namespace maker::trainer {

LossBreakdown sample_losses(const ModelOutput& output, const PreparedSample& sample,
                            double vel_weight, double acc_weight) {
    LossBreakdown lb;
    lb.pred_mae = (output.pred_positions - sample.norm_future).cwiseAbs().mean();
    lb.recon_mae =
        (output.recon_positions - sample.norm_history.leftCols(2)).cwiseAbs().mean();
    lb.vel_mae = (output.pred_velocity * sample.kin_scale - sample.true_velocity)
                     .cwiseAbs()
                     .mean();
    lb.acc_mae =
        (output.pred_acceleration * sample.kin_scale - sample.true_acceleration)
            .cwiseAbs()
            .mean();
    lb.easiness_loss =
        lb.recon_mae + vel_weight * lb.vel_mae + acc_weight * lb.acc_mae;
    lb.total = lb.pred_mae + lb.easiness_loss;
    return lb;
}

std::vector<int> easiness(const std::vector<double>& losses, double lambda) {
    if (lambda <= 0.0) throw std::invalid_argument("easiness: lambda must be > 0");
    std::vector<int> v(losses.size());
    for (std::size_t i = 0; i < losses.size(); ++i)
        v[i] = losses[i] < lambda ? 1 : 0;
    return v;
}

double spl_objective(const std::vector<double>& losses, const std::vector<int>& v,
                     double lambda) {
    if (losses.size() != v.size())
        throw std::invalid_argument("spl_objective: size mismatch");
    double e = 0.0;
    for (std::size_t i = 0; i < losses.size(); ++i)
        if (v[i]) e += losses[i] - lambda;
    return e;
}

void advance_pace(EasinessState& state) { state.lambda *= state.growth; }

Trainer::Trainer(const Forecaster& model, const prompt_lm::FrozenLMProvider& provider,
                 TrainConfig cfg)
    : model_(model), provider_(provider), cfg_(cfg) {}

StepMetrics Trainer::batch_step(ad::ParamStore& store,
                                const std::vector<const PreparedSample*>& batch,
                                EasinessState& state, const AblationFlags& flags) {
    if (batch.empty()) throw std::invalid_argument("batch_step: empty batch");
    const std::size_t n = batch.size();

    struct SampleGraph {
        std::unique_ptr<ad::Tape> tape;
        ad::Var pred_mae, easiness_loss;
    };
    std::vector<SampleGraph> graphs(n);
    StepMetrics m;
    m.step = ++global_step_;
    m.lambda = state.lambda;
    m.sample_easiness.resize(n);

    // (1) forward pass for every sample
    for (std::size_t i = 0; i < n; ++i) {
        const PreparedSample& s = *batch[i];
        auto tape = std::make_unique<ad::Tape>();
        const std::uint64_t mask_seed = ad::fnv1a(&m.step, sizeof m.step,
                                                  cfg_.seed * 0x9e3779b97f4a7c15ULL + i);
        auto fwd = model_.forward(*tape, store, s, flags, provider_, mask_seed);
        ad::Var pred_mae = tape->mae(fwd.pred, s.norm_future);
        ad::Var recon_mae = tape->mae(fwd.recon, s.norm_history.leftCols(2));
        ad::Var vel_mae = tape->mae(
            tape->scale(fwd.vel, s.kin_scale),
            s.true_velocity.transpose());
        ad::Var acc_mae = tape->mae(
            tape->scale(fwd.acc, s.kin_scale),
            s.true_acceleration.transpose());
        ad::Var easiness_loss =
            tape->add(recon_mae, tape->add(tape->scale(vel_mae, cfg_.vel_weight),
                                           tape->scale(acc_mae, cfg_.acc_weight)));
        m.sample_easiness[i] = easiness_loss.val()(0, 0);
        m.mean_losses.pred_mae += pred_mae.val()(0, 0);
        m.mean_losses.recon_mae += recon_mae.val()(0, 0);
        m.mean_losses.vel_mae += vel_mae.val()(0, 0);
        m.mean_losses.acc_mae += acc_mae.val()(0, 0);
        m.mean_losses.easiness_loss += easiness_loss.val()(0, 0);
        graphs[i] = {std::move(tape), pred_mae, easiness_loss};
    }
    m.mean_losses.pred_mae /= double(n);
    m.mean_losses.recon_mae /= double(n);
    m.mean_losses.vel_mae /= double(n);
    m.mean_losses.acc_mae /= double(n);
    m.mean_losses.easiness_loss /= double(n);
    m.mean_losses.total = m.mean_losses.pred_mae + m.mean_losses.easiness_loss;

    // (2) w fixed: select v by the pace threshold
    if (flags.use_ksl) {
        m.selected = easiness(m.sample_easiness, state.lambda);
        if (std::accumulate(m.selected.begin(), m.selected.end(), 0) == 0) {
            // never take a zero-gradient step: keep the single easiest sample
            const auto it = std::min_element(m.sample_easiness.begin(),
                                             m.sample_easiness.end());
            m.selected[std::size_t(it - m.sample_easiness.begin())] = 1;
        }
    } else {
        m.selected.assign(n, 1);
    }
    state.v = m.selected;
    m.selected_fraction =
        double(std::accumulate(m.selected.begin(), m.selected.end(), 0)) / double(n);

    bool finite = true;
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(m.sample_easiness[i]) ||
            !std::isfinite(graphs[i].pred_mae.val()(0, 0)))
            finite = false;
    if (!finite) {
        m.aborted = true;
        return m;
    }

    // (3) v fixed: one Adam step on mean_i [pred_mae_i + v_i * easiness_i]
    store.zero_grad();
    const double inv_n = 1.0 / double(n);
    for (std::size_t i = 0; i < n; ++i) {
        ad::Tape& t = *graphs[i].tape;
        ad::Var loss;
        if (cfg_.gate_scope == GateScope::ReconKinematic) {
            loss = m.selected[i]
                       ? t.add(graphs[i].pred_mae, graphs[i].easiness_loss)
                       : graphs[i].pred_mae;
        } else {
            if (!m.selected[i]) continue;
            loss = t.add(graphs[i].pred_mae, graphs[i].easiness_loss);
        }
        t.backward(t.scale(loss, inv_n));
    }
    store.adam_step(cfg_.lr);

    // (4) pace advances once per optimizer step
    if (flags.use_ksl) advance_pace(state);
    return m;
}

Trainer::Result Trainer::train(ad::ParamStore& store,
                               const std::vector<PreparedSample>& train_set,
                               const std::vector<PreparedSample>& val_set,
                               const AblationFlags& flags) {
    if (train_set.empty())
        throw std::invalid_argument("train: empty training dataset");
    EasinessState state;
    state.lambda = cfg_.lambda0;
    state.growth = cfg_.growth;

    std::ofstream log;
    if (!cfg_.log_path.empty()) {
        log.open(cfg_.log_path);
        if (!log) throw std::runtime_error("cannot write log: " + cfg_.log_path);
    }

    Result res;
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    auto validate = [&]() -> double {
        if (val_set.empty()) return -1.0;
        const auto rep =
            metrics::evaluate_samples(model_, store, val_set, flags, provider_);
        const auto bands = metrics::horizon_bands(model_.config().p);
        return rep.mae_deg.at(bands.back().first);
    };

    for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
        std::mt19937_64 rng(cfg_.seed + 0x51ed270b * std::uint64_t(epoch + 1));
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size();
             start += std::size_t(cfg_.batch_size)) {
            std::vector<const PreparedSample*> batch;
            const std::size_t end =
                std::min(order.size(), start + std::size_t(cfg_.batch_size));
            for (std::size_t i = start; i < end; ++i)
                batch.push_back(&train_set[order[i]]);
            auto sm = batch_step(store, batch, state, flags);
            if (log.is_open()) {
                nlohmann::json j{{"step", sm.step},
                                 {"lambda", sm.lambda},
                                 {"selected_fraction", sm.selected_fraction},
                                 {"pred_mae", sm.mean_losses.pred_mae},
                                 {"recon_mae", sm.mean_losses.recon_mae},
                                 {"vel_mae", sm.mean_losses.vel_mae},
                                 {"acc_mae", sm.mean_losses.acc_mae},
                                 {"easiness_loss", sm.mean_losses.easiness_loss},
                                 {"total", sm.mean_losses.total},
                                 {"sample_easiness", sm.sample_easiness},
                                 {"selected", sm.selected},
                                 {"aborted", sm.aborted}};
                log << j.dump() << "\n";
            }
            res.log.push_back(std::move(sm));
        }
        const double val = validate();
        if (val >= 0.0 && (res.best_val_mae_deg < 0.0 || val < res.best_val_mae_deg)) {
            res.best_val_mae_deg = val;
            if (!cfg_.checkpoint_path.empty())
                forecaster::save_checkpoint(cfg_.checkpoint_path + ".best", store,
                                            {{"epoch", epoch}, {"val_mae_deg", val}});
        }
    }
    res.steps = global_step_;
    res.final_lambda = state.lambda;
    res.final_val_mae_deg = validate();
    if (log.is_open() && res.final_val_mae_deg >= 0.0) {
        nlohmann::json j{{"final_val_mae_deg", res.final_val_mae_deg},
                         {"steps", res.steps},
                         {"lambda", res.final_lambda}};
        log << j.dump() << "\n";
    }
    if (!cfg_.checkpoint_path.empty())
        forecaster::save_checkpoint(cfg_.checkpoint_path, store,
                                    {{"steps", res.steps},
                                     {"lambda", res.final_lambda},
                                     {"val_mae_deg", res.final_val_mae_deg}});
    return res;
}

}  // namespace maker::trainer
