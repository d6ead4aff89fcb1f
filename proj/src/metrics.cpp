#include "maker/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace maker::metrics {

std::vector<std::pair<std::string, std::pair<int, int>>> horizon_bands(int p) {
    const int a = p / 4;
    const int b = p / 2;
    auto label = [](int lo, int hi) {
        return std::to_string(lo) + "-" + std::to_string(hi);
    };
    std::vector<std::pair<std::string, std::pair<int, int>>> bands;
    if (a >= 1) bands.push_back({label(1, a), {1, a}});
    if (b > a) bands.push_back({label(a + 1, b), {a + 1, b}});
    if (p > b) bands.push_back({label(b + 1, p), {b + 1, p}});
    bands.push_back({label(1, p), {1, p}});
    return bands;
}

BandReport evaluate_samples(const Forecaster& model, ad::ParamStore& store,
                            const std::vector<PreparedSample>& samples,
                            const AblationFlags& flags,
                            const prompt_lm::FrozenLMProvider& provider) {
    if (samples.empty()) throw std::invalid_argument("evaluate: empty split");
    const int p = model.config().p;
    const auto bands = horizon_bands(p);
    // per-step accumulators so band means are exact weighted aggregates
    std::vector<double> step_err_deg(std::size_t(p), 0.0);
    std::vector<double> step_err_norm(std::size_t(p), 0.0);

    for (const auto& s : samples) {
        const auto out = model.run(store, s, flags, provider, /*mask_seed=*/0,
                                   /*mask_ratio=*/0.0);
        const ad::Mat pred_deg = data::denormalize_positions(out.pred_positions, s.stats);
        for (int i = 0; i < p; ++i) {
            const auto& g = s.raw.future_positions[std::size_t(i)];
            step_err_deg[std::size_t(i)] += 0.5 * (std::abs(pred_deg(i, 0) - g.lon) +
                                                   std::abs(pred_deg(i, 1) - g.lat));
            step_err_norm[std::size_t(i)] +=
                0.5 * (std::abs(out.pred_positions(i, 0) - s.norm_future(i, 0)) +
                       std::abs(out.pred_positions(i, 1) - s.norm_future(i, 1)));
        }
    }

    BandReport rep;
    rep.sample_count = samples.size();
    for (const auto& [label, range] : bands) {
        double acc_deg = 0.0, acc_norm = 0.0;
        std::size_t steps = 0;
        for (int i = range.first; i <= range.second; ++i) {
            acc_deg += step_err_deg[std::size_t(i - 1)];
            acc_norm += step_err_norm[std::size_t(i - 1)];
            ++steps;
        }
        const double denom = double(steps) * double(samples.size());
        rep.mae_deg[label] = acc_deg / denom;
        rep.mae_norm[label] = acc_norm / denom;
        rep.step_counts[label] = steps * samples.size();
    }
    return rep;
}

std::vector<double> per_sample_mae_deg(const Forecaster& model, ad::ParamStore& store,
                                       const std::vector<PreparedSample>& samples,
                                       const AblationFlags& flags,
                                       const prompt_lm::FrozenLMProvider& provider) {
    std::vector<double> out;
    out.reserve(samples.size());
    const int p = model.config().p;
    for (const auto& s : samples) {
        const auto res = model.run(store, s, flags, provider, 0, 0.0);
        const ad::Mat pred_deg = data::denormalize_positions(res.pred_positions, s.stats);
        double acc = 0.0;
        for (int i = 0; i < p; ++i) {
            const auto& g = s.raw.future_positions[std::size_t(i)];
            acc += 0.5 * (std::abs(pred_deg(i, 0) - g.lon) +
                          std::abs(pred_deg(i, 1) - g.lat));
        }
        out.push_back(acc / double(p));
    }
    return out;
}

double spatial_score(const PreparedSample& s) {
    std::vector<kinematics::LonLat> pts;
    for (const auto& r : s.raw.history) pts.push_back({r.lon, r.lat});
    for (const auto& g : s.raw.future_positions) pts.push_back(g);
    return kinematics::spatial_complexity(pts);
}

double temporal_score(const PreparedSample& s) {
    std::vector<double> input_iv, pred_iv;
    for (std::size_t i = 0; i + 1 < s.history_ts.size(); ++i)
        input_iv.push_back(s.history_ts[i + 1] - s.history_ts[i]);
    // bridge interval plus the future gaps form the prediction-side spacing
    pred_iv.push_back(s.future_ts.front() - s.history_ts.back());
    for (std::size_t i = 0; i + 1 < s.future_ts.size(); ++i)
        pred_iv.push_back(s.future_ts[i + 1] - s.future_ts[i]);
    return kinematics::temporal_irregularity(input_iv, pred_iv);
}

StratifiedReport stratified_evaluate(const Forecaster& model, ad::ParamStore& store,
                                     const std::vector<PreparedSample>& samples,
                                     const AblationFlags& flags,
                                     const prompt_lm::FrozenLMProvider& provider) {
    if (samples.size() < 4)
        throw std::invalid_argument("stratified_evaluate: need split size >= 4");
    const auto maes = per_sample_mae_deg(model, store, samples, flags, provider);

    StratifiedReport rep;
    const char* level_names[] = {"Low", "Medium", "High"};
    for (const char* axis : {"spatial", "temporal"}) {
        std::vector<double> scores;
        scores.reserve(samples.size());
        for (const auto& s : samples)
            scores.push_back(std::string(axis) == "spatial" ? spatial_score(s)
                                                            : temporal_score(s));
        const auto levels = kinematics::quartile_levels(scores);
        auto& row = rep.cells[axis];
        for (const char* ln : level_names) row[ln] = StratifiedCell{};
        for (std::size_t i = 0; i < samples.size(); ++i) {
            auto& cell = row[level_names[int(levels[i])]];
            cell.mae_deg += maes[i];
            cell.count += 1;
        }
        for (const char* ln : level_names) {
            auto& cell = row[ln];
            if (cell.count > 0) cell.mae_deg /= double(cell.count);
        }
    }
    return rep;
}

}  // namespace maker::metrics
