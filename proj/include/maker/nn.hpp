// Shared building blocks: parameter init, linear layers, positional and
// timestamp features, and pre-norm self-attention stacks.
#pragma once

#include <random>
#include <string>
#include <vector>

#include "maker/ad.hpp"

namespace maker::nn {

using ad::Mat;
using ad::ParamStore;
using ad::Tape;
using ad::Var;

Mat uniform_fan_in(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng);

// Registers name+".w" (in x out) and name+".b" (1 x out).
void init_linear(ParamStore& store, const std::string& name, Eigen::Index in,
                 Eigen::Index out, std::mt19937_64& rng);

Var linear(Tape& t, ParamStore& store, const std::string& name, Var x);

// Classic sinusoidal position encoding, n x d.
Mat sinusoidal_positions(Eigen::Index n, Eigen::Index d);

// Periodic features of epoch-second timestamps at several fixed scales,
// n x (2 * kTimestampScales).
inline constexpr int kTimestampScales = 6;
Mat timestamp_features(const std::vector<double>& timestamps);

struct AttentionConfig {
    int width = 16;
    int heads = 4;
    int blocks = 2;
    int ff_mult = 4;
};

void init_attention_stack(ParamStore& store, const std::string& prefix,
                          const AttentionConfig& cfg, std::mt19937_64& rng);

// Pre-norm blocks: x += MHA(LN(x)); x += FF(LN(x)). blocks == 0 is identity.
// When attn_rowsums is non-null, each block's per-head attention row sums are
// appended (softmax sanity probes).
Var attention_stack(Tape& t, ParamStore& store, const std::string& prefix,
                    const AttentionConfig& cfg, Var x,
                    std::vector<double>* attn_rowsums = nullptr);

}  // namespace maker::nn
