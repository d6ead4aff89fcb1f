#include "maker/forecaster.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "maker/kinematics.hpp"

namespace maker::forecaster {

namespace {
constexpr double kMetersPerDegree = 111'194.92664455873;
}

AblationFlags flags_for_variant(const std::string& name) {
    AblationFlags f;
    if (name == "full") return f;
    if (name == "MAKER-LLM") {
        f.use_llm = false;
        f.use_fusion = false;  // fusion needs the text channel
        return f;
    }
    if (name == "MAKER-Prompt") {
        f.use_prompt = false;
        return f;
    }
    if (name == "MAKER-MKT") {
        f.use_fusion = false;
        return f;
    }
    if (name == "MAKER-de") {
        f.use_decoder = false;
        return f;
    }
    if (name == "MAKER-KSL") {
        f.use_ksl = false;
        return f;
    }
    throw std::invalid_argument("unknown ablation variant: " + name);
}

std::vector<std::string> known_variants() {
    return {"full", "MAKER-LLM", "MAKER-Prompt", "MAKER-MKT", "MAKER-de",
            "MAKER-KSL"};
}

PreparedSample prepare_sample(const data::TrajectorySample& sample,
                              const prompt_lm::FrozenLMProvider* provider,
                              const std::string& dataset_name, bool use_prompt) {
    PreparedSample out;
    out.raw = sample;
    auto [norm, stats] = data::instance_normalize(sample.history_matrix());
    out.norm_history = std::move(norm);
    out.stats = stats;
    out.history_ts = sample.history_timestamps();
    out.future_ts = sample.future_timestamps;

    const int p = int(sample.future_positions.size());
    out.norm_future.resize(p, 2);
    for (int i = 0; i < p; ++i) {
        out.norm_future(i, 0) = (sample.future_positions[std::size_t(i)].lon -
                                 stats.mean(0)) / (stats.std(0) + stats.epsilon);
        out.norm_future(i, 1) = (sample.future_positions[std::size_t(i)].lat -
                                 stats.mean(1)) / (stats.std(1) + stats.epsilon);
    }

    const auto vel = kinematics::velocity_series(sample.future_positions,
                                                 sample.future_timestamps);
    out.true_velocity = Eigen::Map<const Eigen::VectorXd>(vel.data(),
                                                          Eigen::Index(vel.size()));
    if (vel.size() >= 2) {
        const auto acc = kinematics::acceleration_series(vel, sample.future_timestamps);
        out.true_acceleration =
            Eigen::Map<const Eigen::VectorXd>(acc.data(), Eigen::Index(acc.size()));
    }

    const double lat_mean = sample.history_matrix().col(1).mean();
    const double deg_scale = 0.5 * ((stats.std(0) + stats.epsilon) *
                                        std::cos(lat_mean * M_PI / 180.0) +
                                    (stats.std(1) + stats.epsilon));
    out.kin_scale = deg_scale * kMetersPerDegree;

    if (use_prompt && provider != nullptr) {
        const std::string text = prompt_lm::build_prompt(sample, dataset_name);
        const auto tok = prompt_lm::tokenize(text, *provider);
        out.prompt_embedding = prompt_lm::embed_tokens(tok.token_ids, *provider);
    }
    return out;
}

Forecaster::Forecaster(ModelConfig cfg)
    : cfg_(cfg), enc_(cfg.encoder), fus_(cfg.fusion) {
    dec_cfg_ = {cfg_.dec_width, cfg_.dec_heads, cfg_.dec_blocks, cfg_.dec_ff_mult};
}

void Forecaster::init_params(ParamStore& store, std::uint64_t seed,
                             const prompt_lm::FrozenLMProvider& provider) const {
    std::mt19937_64 rng(seed);
    enc_.init_params(store, rng);
    fus_.init_params(store, provider.vocab_size(), rng);
    // encoder-output bypass used when fusion is disabled
    nn::init_linear(store, "byp.pool", cfg_.encoder.d_m, cfg_.dec_width, rng);
    nn::init_linear(store, "dec.futts", 2 * nn::kTimestampScales, cfg_.dec_width, rng);
    nn::init_attention_stack(store, "dec", dec_cfg_, rng);
    const int p = cfg_.p;
    nn::init_linear(store, "dec.pred", data::kChannels * cfg_.dec_width, 2 * p, rng);
    nn::init_linear(store, "dec.vel", data::kChannels * cfg_.dec_width, p - 1, rng);
    nn::init_linear(store, "dec.acc", data::kChannels * cfg_.dec_width, p - 2, rng);
    nn::init_linear(store, "de.pred", cfg_.dec_width, 2 * p, rng);
    nn::init_linear(store, "de.vel", cfg_.dec_width, p - 1, rng);
    nn::init_linear(store, "de.acc", cfg_.dec_width, p - 2, rng);
}

ForwardVars Forecaster::forward(Tape& t, ParamStore& store,
                                const PreparedSample& sample,
                                const AblationFlags& flags,
                                const prompt_lm::FrozenLMProvider& provider,
                                std::uint64_t mask_seed, double mask_ratio) const {
    if (flags.use_fusion && !flags.use_llm)
        throw std::invalid_argument("fusion requires the text channel (use_llm)");

    const double ratio = mask_ratio < 0.0 ? cfg_.encoder.mask_ratio : mask_ratio;
    const auto patches = masked_encoder::patchify(
        sample.norm_history, sample.history_ts, cfg_.encoder.patch_len,
        cfg_.encoder.stride);
    const auto plan = masked_encoder::plan_mask(patches.patch_count(),
                                                int(patches.channels.size()), ratio,
                                                mask_seed);
    ForwardVars out;
    auto embedded = enc_.embed_patches(t, store, patches);
    auto masked = enc_.apply_mask(t, store, embedded, plan);
    auto encoded = enc_.encode(t, store, masked, &out.attn_rowsums);
    out.recon = enc_.reconstruct(t, store, encoded);

    // one decoder variate token per channel
    Var h_g;
    if (flags.use_fusion) {
        Var h_e = fus_.project_vocab(t, store, provider.word_embedding_table());
        Var h_l;
        if (flags.use_prompt && sample.prompt_embedding.rows() > 0)
            h_l = t.constant(sample.prompt_embedding);
        for (const Var& chan : encoded) {
            Var h_a = fus_.cross_attend(t, store, chan, h_e, &out.attn_rowsums);
            Var h_c = fus_.fuse(t, store, h_a, h_l);
            Var g = fus_.to_decoder_input(t, store, h_c);
            h_g = h_g.valid() ? t.concat_rows(h_g, g) : g;
        }
    } else {
        for (const Var& chan : encoded) {
            Var g = nn::linear(t, store, "byp.pool", t.mean_rows(chan));
            h_g = h_g.valid() ? t.concat_rows(h_g, g) : g;
        }
    }

    // condition on the future timestamps through the periodic embedding
    Var fut = nn::linear(t, store, "dec.futts",
                         t.constant(nn::timestamp_features(sample.future_ts)));
    h_g = t.add_row(h_g, t.mean_rows(fut));

    // the position head predicts per-step displacements which are integrated
    // and anchored at the last observed position, so the pooled representation
    // only has to carry the motion pattern
    Mat last_pos(1, 2);
    last_pos(0, 0) = sample.norm_history(sample.norm_history.rows() - 1, 0);
    last_pos(0, 1) = sample.norm_history(sample.norm_history.rows() - 1, 1);
    Var anchor = t.constant(last_pos);
    Mat cum = Mat::Zero(cfg_.p, cfg_.p);  // running-sum operator
    for (int i = 0; i < cfg_.p; ++i)
        for (int j = 0; j <= i; ++j) cum(i, j) = 1.0;
    Var integrate = t.constant(cum);

    const int p = cfg_.p;
    if (flags.use_decoder) {
        Var state = nn::attention_stack(t, store, "dec", dec_cfg_, h_g,
                                        &out.attn_rowsums);
        Var flat = t.reshape_rowmajor(state, 1, data::kChannels * cfg_.dec_width);
        Var steps = t.reshape_rowmajor(nn::linear(t, store, "dec.pred", flat), p, 2);
        out.pred = t.add_row(t.matmul(integrate, steps), anchor);
        out.vel = nn::linear(t, store, "dec.vel", flat);
        out.acc = nn::linear(t, store, "dec.acc", flat);
    } else {
        Var pooled = t.mean_rows(h_g);
        Var steps = t.reshape_rowmajor(nn::linear(t, store, "de.pred", pooled), p, 2);
        out.pred = t.add_row(t.matmul(integrate, steps), anchor);
        out.vel = nn::linear(t, store, "de.vel", pooled);
        out.acc = nn::linear(t, store, "de.acc", pooled);
    }
    return out;
}

ModelOutput Forecaster::run(ParamStore& store, const PreparedSample& sample,
                            const AblationFlags& flags,
                            const prompt_lm::FrozenLMProvider& provider,
                            std::uint64_t mask_seed, double mask_ratio) const {
    Tape t;
    const auto vars = forward(t, store, sample, flags, provider, mask_seed, mask_ratio);
    ModelOutput out;
    out.pred_positions = vars.pred.val();
    out.recon_positions = vars.recon.val();
    out.pred_velocity = vars.vel.val().row(0).transpose();
    out.pred_acceleration = vars.acc.val().row(0).transpose();
    return out;
}

Mat constant_velocity_baseline(const data::TrajectorySample& sample) {
    const int h = int(sample.history.size());
    if (h < 2) throw std::invalid_argument("baseline: need h >= 2");
    const int steps = std::min(3, h - 1);
    double vlon = 0.0, vlat = 0.0;
    for (int i = h - steps; i < h; ++i) {
        const auto& a = sample.history[std::size_t(i - 1)];
        const auto& b = sample.history[std::size_t(i)];
        const double dt = double(b.timestamp - a.timestamp);
        vlon += (b.lon - a.lon) / dt;
        vlat += (b.lat - a.lat) / dt;
    }
    vlon /= double(steps);
    vlat /= double(steps);
    const auto& last = sample.history.back();
    Mat pred(Eigen::Index(sample.future_timestamps.size()), 2);
    for (Eigen::Index i = 0; i < pred.rows(); ++i) {
        const double dt = sample.future_timestamps[std::size_t(i)] -
                          double(last.timestamp);
        pred(i, 0) = last.lon + vlon * dt;
        pred(i, 1) = last.lat + vlat * dt;
    }
    return pred;
}

void save_checkpoint(const std::string& path, const ParamStore& store,
                     const nlohmann::json& meta) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["meta"] = meta;
    nlohmann::json params = nlohmann::json::object();
    for (const auto& [name, p] : store.entries()) {
        nlohmann::json entry;
        entry["rows"] = p.value.rows();
        entry["cols"] = p.value.cols();
        entry["trainable"] = p.trainable;
        std::vector<double> flat(std::size_t(p.value.size()));
        for (Eigen::Index i = 0; i < p.value.size(); ++i)
            flat[std::size_t(i)] = p.value(i / p.value.cols(), i % p.value.cols());
        entry["data"] = flat;
        params[name] = std::move(entry);
    }
    j["params"] = std::move(params);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out << j.dump();
}

nlohmann::json load_checkpoint(const std::string& path, ParamStore& store) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    nlohmann::json j;
    in >> j;
    if (j.value("format_version", 0) != 1)
        throw std::runtime_error("unsupported checkpoint version in " + path);
    for (const auto& [name, entry] : j.at("params").items()) {
        const Eigen::Index rows = entry.at("rows");
        const Eigen::Index cols = entry.at("cols");
        const std::vector<double> flat = entry.at("data");
        Mat m(rows, cols);
        for (Eigen::Index i = 0; i < m.size(); ++i)
            m(i / cols, i % cols) = flat[std::size_t(i)];
        if (store.has(name)) {
            store.at(name).value = std::move(m);
        } else {
            store.add(name, std::move(m), entry.value("trainable", true));
        }
    }
    return j.at("meta");
}

}  // namespace maker::forecaster
