#include "maker/masked_encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "maker/data.hpp"

namespace maker::masked_encoder {

int EncoderConfig::patch_count() const {
    if (h < patch_len) throw std::invalid_argument("patch_count: h < patch_len");
    return (h - patch_len) / stride + 2;
}

PatchSet patchify(const Mat& history, const std::vector<double>& timestamps,
                  int patch_len, int stride) {
    const int h = int(history.rows());
    if (h < patch_len) throw std::invalid_argument("patchify: h < patch_len");
    if (int(timestamps.size()) != h)
        throw std::invalid_argument("patchify: timestamp count mismatch");
    const int q = (h - patch_len) / stride + 2;

    // replicate the last step `stride` times so the final window fits
    const int padded = h + stride;
    std::vector<double> ts = timestamps;
    ts.resize(std::size_t(padded), timestamps.back());

    PatchSet out;
    out.patch_len = patch_len;
    out.stride = stride;
    out.patch_times.resize(std::size_t(q));
    for (int pi = 0; pi < q; ++pi) {
        const int start = pi * stride;
        double acc = 0.0;
        for (int j = 0; j < patch_len; ++j) acc += ts[std::size_t(start + j)];
        out.patch_times[std::size_t(pi)] = acc / double(patch_len);
    }
    for (Eigen::Index c = 0; c < history.cols(); ++c) {
        Mat chan(q, patch_len);
        for (int pi = 0; pi < q; ++pi) {
            const int start = pi * stride;
            for (int j = 0; j < patch_len; ++j) {
                const int idx = std::min(start + j, h - 1);
                chan(pi, j) = history(idx, c);
            }
        }
        out.channels.push_back(std::move(chan));
    }
    return out;
}

MaskPlan plan_mask(int patch_count, int channel_count, double ratio,
                   std::uint64_t seed) {
    if (ratio < 0.0 || ratio > 1.0)
        throw std::invalid_argument("plan_mask: ratio outside [0, 1]");
    MaskPlan plan;
    plan.ratio = ratio;
    plan.masked_indices.resize(std::size_t(channel_count));
    if (ratio == 0.0) return plan;  // no-mask ablation bypass
    const int count = std::max(1, int(std::floor(double(patch_count) * ratio)));
    std::mt19937_64 rng(seed);
    for (int c = 0; c < channel_count; ++c) {
        std::vector<int> idx(static_cast<std::size_t>(patch_count), 0);
        std::iota(idx.begin(), idx.end(), 0);
        // Fisher-Yates prefix draw without replacement
        for (int i = 0; i < count; ++i) {
            std::uniform_int_distribution<int> u(i, patch_count - 1);
            std::swap(idx[std::size_t(i)], idx[std::size_t(u(rng))]);
        }
        idx.resize(std::size_t(count));
        std::sort(idx.begin(), idx.end());
        plan.masked_indices[std::size_t(c)] = std::move(idx);
    }
    return plan;
}

MaskedEncoder::MaskedEncoder(EncoderConfig cfg, std::string prefix)
    : cfg_(cfg), prefix_(std::move(prefix)) {
    attn_cfg_ = {cfg_.d_m, cfg_.heads, cfg_.blocks, cfg_.ff_mult};
}

void MaskedEncoder::init_params(ParamStore& store, std::mt19937_64& rng) const {
    nn::init_linear(store, prefix_ + ".patch", cfg_.patch_len, cfg_.d_m, rng);
    nn::init_linear(store, prefix_ + ".ts", 2 * nn::kTimestampScales, cfg_.d_m, rng);
    std::normal_distribution<double> nd(0.0, 0.02);
    Mat mask_emb(1, cfg_.d_m);
    for (int i = 0; i < cfg_.d_m; ++i) mask_emb(0, i) = nd(rng);
    store.add(prefix_ + ".mask_emb", mask_emb);
    nn::init_attention_stack(store, prefix_, attn_cfg_, rng);
    const int q = cfg_.patch_count();
    nn::init_linear(store, prefix_ + ".recon", 2 * q * cfg_.d_m, 2 * cfg_.h, rng);
}

std::vector<Var> MaskedEncoder::embed_patches(Tape& t, ParamStore& store,
                                              const PatchSet& patches) const {
    const int q = patches.patch_count();
    Var pos = t.constant(nn::sinusoidal_positions(q, cfg_.d_m));
    Var ts_emb = nn::linear(t, store, prefix_ + ".ts",
                            t.constant(nn::timestamp_features(patches.patch_times)));
    std::vector<Var> out;
    out.reserve(patches.channels.size());
    for (const Mat& chan : patches.channels) {
        Var e = nn::linear(t, store, prefix_ + ".patch", t.constant(chan));
        out.push_back(t.add(t.add(e, pos), ts_emb));
    }
    return out;
}

std::vector<Var> MaskedEncoder::apply_mask(Tape& t, ParamStore& store,
                                           const std::vector<Var>& embedded,
                                           const MaskPlan& plan) const {
    if (plan.ratio == 0.0) return embedded;
    if (plan.masked_indices.size() != embedded.size())
        throw std::invalid_argument("apply_mask: channel count mismatch");
    Var mask_row = t.leaf(store.at(prefix_ + ".mask_emb"));
    std::vector<Var> out;
    out.reserve(embedded.size());
    for (std::size_t c = 0; c < embedded.size(); ++c)
        out.push_back(t.replace_rows(embedded[c], plan.masked_indices[c], mask_row));
    return out;
}

std::vector<Var> MaskedEncoder::encode(Tape& t, ParamStore& store,
                                       const std::vector<Var>& h,
                                       std::vector<double>* attn_rowsums) const {
    std::vector<Var> out;
    out.reserve(h.size());
    for (const Var& chan : h)
        out.push_back(nn::attention_stack(t, store, prefix_, attn_cfg_, chan,
                                          attn_rowsums));
    return out;
}

Var MaskedEncoder::reconstruct(Tape& t, ParamStore& store,
                               const std::vector<Var>& encoded) const {
    if (encoded.size() < 2)
        throw std::invalid_argument("reconstruct: need lon and lat channels");
    const int q = int(encoded[0].rows());
    Var lon = t.reshape_rowmajor(encoded[0], 1, q * cfg_.d_m);
    Var lat = t.reshape_rowmajor(encoded[1], 1, q * cfg_.d_m);
    Var flat = t.concat_cols(lon, lat);
    Var proj = nn::linear(t, store, prefix_ + ".recon", flat);
    return t.reshape_rowmajor(proj, cfg_.h, 2);
}

}  // namespace maker::masked_encoder
