// Channel-independent patching, patch + position + timestamp embedding,
// random patch masking, a small self-attention encoder, and the history
// reconstruction projection.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "maker/nn.hpp"

namespace maker::masked_encoder {

using ad::Mat;
using ad::ParamStore;
using ad::Tape;
using ad::Var;

struct EncoderConfig {
    int h = 24;
    int patch_len = 16;  // L_p
    int stride = 8;      // S
    int d_m = 16;
    int blocks = 2;
    int heads = 4;
    int ff_mult = 4;
    double mask_ratio = 0.5;

    int patch_count() const;  // Q = floor((h - L_p) / S) + 2
};

struct PatchSet {
    std::vector<Mat> channels;       // one Q x L_p matrix per channel
    std::vector<double> patch_times; // mean timestamp per patch, length Q
    int patch_len = 0;
    int stride = 0;
    int patch_count() const { return channels.empty() ? 0 : int(channels[0].rows()); }
};

struct MaskPlan {
    std::vector<std::vector<int>> masked_indices;  // per channel
    double ratio = 0.0;
};

// The final patch is completed by replicating the last step S times.
PatchSet patchify(const Mat& history, const std::vector<double>& timestamps,
                  int patch_len, int stride);

// |masked| = max(1, floor(Q * ratio)) per channel; ratio == 0 masks nothing.
MaskPlan plan_mask(int patch_count, int channel_count, double ratio,
                   std::uint64_t seed);

class MaskedEncoder {
public:
    MaskedEncoder(EncoderConfig cfg, std::string prefix = "enc");

    void init_params(ParamStore& store, std::mt19937_64& rng) const;

    // linear(patch) + sinusoidal positions + periodic timestamp embedding.
    std::vector<Var> embed_patches(Tape& t, ParamStore& store,
                                   const PatchSet& patches) const;

    std::vector<Var> apply_mask(Tape& t, ParamStore& store,
                                const std::vector<Var>& embedded,
                                const MaskPlan& plan) const;

    std::vector<Var> encode(Tape& t, ParamStore& store, const std::vector<Var>& h,
                            std::vector<double>* attn_rowsums = nullptr) const;

    // Concatenated lon/lat channel encodings -> h x 2 normalized positions.
    Var reconstruct(Tape& t, ParamStore& store, const std::vector<Var>& encoded) const;

    const EncoderConfig& config() const { return cfg_; }

private:
    EncoderConfig cfg_;
    std::string prefix_;
    nn::AttentionConfig attn_cfg_;
};

}  // namespace maker::masked_encoder
