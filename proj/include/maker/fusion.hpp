// Multi-modal knowledge transfer: word-embedding projection, cross-attention
// with trajectory queries against text keys/values, concatenation with the
// prompt representation, and pooling down to decoder variate embeddings.
#pragma once

#include <random>
#include <string>
#include <vector>

#include "maker/nn.hpp"

namespace maker::fusion {

using ad::Mat;
using ad::ParamStore;
using ad::Tape;
using ad::Var;

struct FusionConfig {
    int d_m = 16;
    int d_llm = 64;
    int hidden = 500;          // D
    int prototype_count = 100; // V'
    int decoder_width = 64;
};

class Fusion {
public:
    Fusion(FusionConfig cfg, std::string prefix = "fus");

    void init_params(ParamStore& store, int vocab_size, std::mt19937_64& rng) const;

    // W_E (vocab x d_llm) -> prototype compression -> H_E (V' x D).
    Var project_vocab(Tape& t, ParamStore& store, const Mat& word_embeddings) const;

    // Q = H_M W_Q; K = H_E W_K; V = H_E W_V; softmax(QK^T / sqrt(d_m)) V,
    // then up-projected to width D.
    Var cross_attend(Tape& t, ParamStore& store, Var h_m, Var h_e,
                     std::vector<double>* attn_rowsums = nullptr) const;

    // Sequence-axis concat of H_A with the projected prompt representation.
    // h_l has d_llm columns; an empty h_l (prompt ablation) yields H_C = H_A.
    Var fuse(Tape& t, ParamStore& store, Var h_a, Var h_l) const;

    // Mean-pool over the sequence axis, then map D -> decoder width.
    Var to_decoder_input(Tape& t, ParamStore& store, Var h_c) const;

    const FusionConfig& config() const { return cfg_; }
    const std::string& prefix() const { return prefix_; }

private:
    FusionConfig cfg_;
    std::string prefix_;
};

}  // namespace maker::fusion
