#include "maker/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace maker::nn {

Mat uniform_fan_in(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(double(rows));
    std::uniform_real_distribution<double> u(-bound, bound);
    Mat m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = u(rng);
    return m;
}

void init_linear(ParamStore& store, const std::string& name, Eigen::Index in,
                 Eigen::Index out, std::mt19937_64& rng) {
    store.add(name + ".w", uniform_fan_in(in, out, rng));
    store.add(name + ".b", Mat::Zero(1, out));
}

Var linear(Tape& t, ParamStore& store, const std::string& name, Var x) {
    Var w = t.leaf(store.at(name + ".w"));
    Var b = t.leaf(store.at(name + ".b"));
    return t.add_row(t.matmul(x, w), b);
}

Mat sinusoidal_positions(Eigen::Index n, Eigen::Index d) {
    Mat pe = Mat::Zero(n, d);
    for (Eigen::Index pos = 0; pos < n; ++pos) {
        for (Eigen::Index i = 0; i < d; i += 2) {
            const double div = std::pow(10000.0, double(i) / double(d));
            pe(pos, i) = std::sin(double(pos) / div);
            if (i + 1 < d) pe(pos, i + 1) = std::cos(double(pos) / div);
        }
    }
    return pe;
}

Mat timestamp_features(const std::vector<double>& timestamps) {
    static const double kPeriods[kTimestampScales] = {60.0,    600.0,   3600.0,
                                                      21600.0, 86400.0, 604800.0};
    Mat f(Eigen::Index(timestamps.size()), 2 * kTimestampScales);
    for (Eigen::Index r = 0; r < f.rows(); ++r) {
        for (int k = 0; k < kTimestampScales; ++k) {
            const double phase = 2.0 * M_PI * timestamps[std::size_t(r)] / kPeriods[k];
            f(r, 2 * k) = std::sin(phase);
            f(r, 2 * k + 1) = std::cos(phase);
        }
    }
    return f;
}

void init_attention_stack(ParamStore& store, const std::string& prefix,
                          const AttentionConfig& cfg, std::mt19937_64& rng) {
    if (cfg.width % cfg.heads != 0)
        throw std::invalid_argument("attention width must divide evenly by heads");
    const int dh = cfg.width / cfg.heads;
    for (int b = 0; b < cfg.blocks; ++b) {
        const std::string bp = prefix + ".blk" + std::to_string(b);
        store.add(bp + ".ln1.g", Mat::Ones(1, cfg.width));
        store.add(bp + ".ln1.b", Mat::Zero(1, cfg.width));
        store.add(bp + ".ln2.g", Mat::Ones(1, cfg.width));
        store.add(bp + ".ln2.b", Mat::Zero(1, cfg.width));
        for (int h = 0; h < cfg.heads; ++h) {
            const std::string hp = bp + ".h" + std::to_string(h);
            store.add(hp + ".wq", uniform_fan_in(cfg.width, dh, rng));
            store.add(hp + ".wk", uniform_fan_in(cfg.width, dh, rng));
            store.add(hp + ".wv", uniform_fan_in(cfg.width, dh, rng));
        }
        store.add(bp + ".wo", uniform_fan_in(cfg.width, cfg.width, rng));
        init_linear(store, bp + ".ff1", cfg.width, cfg.ff_mult * cfg.width, rng);
        init_linear(store, bp + ".ff2", cfg.ff_mult * cfg.width, cfg.width, rng);
    }
}

Var attention_stack(Tape& t, ParamStore& store, const std::string& prefix,
                    const AttentionConfig& cfg, Var x,
                    std::vector<double>* attn_rowsums) {
    const int dh = cfg.width / cfg.heads;
    const double scale = 1.0 / std::sqrt(double(dh));
    for (int b = 0; b < cfg.blocks; ++b) {
        const std::string bp = prefix + ".blk" + std::to_string(b);
        Var ln1 = t.layer_norm(x, t.leaf(store.at(bp + ".ln1.g")),
                               t.leaf(store.at(bp + ".ln1.b")));
        Var heads_out;
        for (int h = 0; h < cfg.heads; ++h) {
            const std::string hp = bp + ".h" + std::to_string(h);
            Var q = t.matmul(ln1, t.leaf(store.at(hp + ".wq")));
            Var k = t.matmul(ln1, t.leaf(store.at(hp + ".wk")));
            Var v = t.matmul(ln1, t.leaf(store.at(hp + ".wv")));
            Var attn = t.softmax_rows(t.scale(t.matmul_nt(q, k), scale));
            if (attn_rowsums) {
                for (Eigen::Index r = 0; r < attn.rows(); ++r)
                    attn_rowsums->push_back(attn.val().row(r).sum());
            }
            Var out = t.matmul(attn, v);
            heads_out = heads_out.valid() ? t.concat_cols(heads_out, out) : out;
        }
        x = t.add(x, t.matmul(heads_out, t.leaf(store.at(bp + ".wo"))));
        Var ln2 = t.layer_norm(x, t.leaf(store.at(bp + ".ln2.g")),
                               t.leaf(store.at(bp + ".ln2.b")));
        Var ff = linear(t, store, bp + ".ff2", t.relu(linear(t, store, bp + ".ff1", ln2)));
        x = t.add(x, ff);
    }
    return x;
}

}  // namespace maker::nn
