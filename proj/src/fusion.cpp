#include "maker/fusion.hpp"

#include <cmath>
#include <stdexcept>

namespace maker::fusion {

Fusion::Fusion(FusionConfig cfg, std::string prefix)
    : cfg_(cfg), prefix_(std::move(prefix)) {}

void Fusion::init_params(ParamStore& store, int vocab_size,
                         std::mt19937_64& rng) const {
    // prototype compression over the vocabulary axis, then width projection
    store.add(prefix_ + ".proto",
              nn::uniform_fan_in(cfg_.prototype_count, vocab_size, rng));
    nn::init_linear(store, prefix_ + ".vocab", cfg_.d_llm, cfg_.hidden, rng);
    store.add(prefix_ + ".wq", nn::uniform_fan_in(cfg_.d_m, cfg_.d_m, rng));
    store.add(prefix_ + ".wk", nn::uniform_fan_in(cfg_.hidden, cfg_.d_m, rng));
    store.add(prefix_ + ".wv", nn::uniform_fan_in(cfg_.hidden, cfg_.d_m, rng));
    nn::init_linear(store, prefix_ + ".up", cfg_.d_m, cfg_.hidden, rng);
    nn::init_linear(store, prefix_ + ".lmproj", cfg_.d_llm, cfg_.hidden, rng);
    nn::init_linear(store, prefix_ + ".pool", cfg_.hidden, cfg_.decoder_width, rng);
}

Var Fusion::project_vocab(Tape& t, ParamStore& store, const Mat& word_embeddings) const {
    if (int(word_embeddings.cols()) != cfg_.d_llm)
        throw std::invalid_argument("project_vocab: embedding width mismatch");
    Var proto = t.leaf(store.at(prefix_ + ".proto"));
    Var compressed = t.matmul(proto, t.constant(word_embeddings));  // V' x d_llm
    return nn::linear(t, store, prefix_ + ".vocab", compressed);    // V' x D
}

Var Fusion::cross_attend(Tape& t, ParamStore& store, Var h_m, Var h_e,
                         std::vector<double>* attn_rowsums) const {
    Var q = t.matmul(h_m, t.leaf(store.at(prefix_ + ".wq")));
    Var k = t.matmul(h_e, t.leaf(store.at(prefix_ + ".wk")));
    Var v = t.matmul(h_e, t.leaf(store.at(prefix_ + ".wv")));
    const double scale = 1.0 / std::sqrt(double(cfg_.d_m));
    Var attn = t.softmax_rows(t.scale(t.matmul_nt(q, k), scale));
    if (attn_rowsums) {
        for (Eigen::Index r = 0; r < attn.rows(); ++r)
            attn_rowsums->push_back(attn.val().row(r).sum());
    }
    Var out = t.matmul(attn, v);  // patches x d_m
    return nn::linear(t, store, prefix_ + ".up", out);  // patches x D
}

Var Fusion::fuse(Tape& t, ParamStore& store, Var h_a, Var h_l) const {
    if (!h_l.valid() || h_l.rows() == 0) return h_a;
    if (int(h_l.cols()) != cfg_.d_llm)
        throw std::invalid_argument("fuse: prompt representation width mismatch");
    Var projected = nn::linear(t, store, prefix_ + ".lmproj", h_l);
    return t.concat_rows(h_a, projected);
}

Var Fusion::to_decoder_input(Tape& t, ParamStore& store, Var h_c) const {
    return nn::linear(t, store, prefix_ + ".pool", t.mean_rows(h_c));
}

}  // namespace maker::fusion
