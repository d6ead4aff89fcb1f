#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "maker/fusion.hpp"
#include "test_util.hpp"

using namespace maker;
using namespace maker::fusion;

namespace {

Mat random_mat(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Mat m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = u(rng);
    return m;
}

FusionConfig small_cfg() {
    FusionConfig cfg;
    cfg.d_m = 6;
    cfg.d_llm = 10;
    cfg.hidden = 12;
    cfg.prototype_count = 5;
    cfg.decoder_width = 8;
    return cfg;
}

// Loop-based cross-attention oracle written without Eigen products.
Mat brute_cross_attention(const Mat& h_m, const Mat& h_e, const Mat& wq,
                          const Mat& wk, const Mat& wv) {
    auto mm = [](const Mat& a, const Mat& b) {
        Mat out = Mat::Zero(a.rows(), b.cols());
        for (Eigen::Index i = 0; i < a.rows(); ++i)
            for (Eigen::Index j = 0; j < b.cols(); ++j)
                for (Eigen::Index k = 0; k < a.cols(); ++k)
                    out(i, j) += a(i, k) * b(k, j);
        return out;
    };
    const Mat q = mm(h_m, wq), k = mm(h_e, wk), v = mm(h_e, wv);
    const double scale = 1.0 / std::sqrt(double(wq.cols()));
    Mat scores(q.rows(), k.rows());
    for (Eigen::Index i = 0; i < q.rows(); ++i)
        for (Eigen::Index j = 0; j < k.rows(); ++j) {
            double dot = 0.0;
            for (Eigen::Index d = 0; d < q.cols(); ++d) dot += q(i, d) * k(j, d);
            scores(i, j) = dot * scale;
        }
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        const double mx = scores.row(i).maxCoeff();
        double z = 0.0;
        for (Eigen::Index j = 0; j < scores.cols(); ++j) {
            scores(i, j) = std::exp(scores(i, j) - mx);
            z += scores(i, j);
        }
        scores.row(i) /= z;
    }
    return mm(scores, v);
}

}  // namespace

TEST_CASE("cross-attention matches a loop-based oracle on random instances") {
    const auto cfg = small_cfg();
    for (std::uint64_t trial = 0; trial < 100; ++trial) {
        Fusion fus(cfg);
        ad::ParamStore store;
        std::mt19937_64 rng(100 + trial);
        fus.init_params(store, 40, rng);
        const Mat h_m = random_mat(4, cfg.d_m, 1000 + trial);
        const Mat h_e = random_mat(cfg.prototype_count, cfg.hidden, 2000 + trial);

        ad::Tape t;
        Var out = fus.cross_attend(t, store, t.constant(h_m), t.constant(h_e));
        CHECK(out.rows() == 4);
        CHECK(out.cols() == cfg.hidden);

        const Mat attn = brute_cross_attention(h_m, h_e, store.at("fus.wq").value,
                                               store.at("fus.wk").value,
                                               store.at("fus.wv").value);
        const Mat want = (attn * store.at("fus.up.w").value).rowwise() +
                         store.at("fus.up.b").value.row(0);
        CHECK((Mat(out.val()) - want).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("attention rows are convex combinations: weights sum to one") {
    const auto cfg = small_cfg();
    Fusion fus(cfg);
    ad::ParamStore store;
    std::mt19937_64 rng(17);
    fus.init_params(store, 40, rng);
    ad::Tape t;
    std::vector<double> rowsums;
    fus.cross_attend(t, store, t.constant(random_mat(5, cfg.d_m, 50)),
                     t.constant(random_mat(cfg.prototype_count, cfg.hidden, 51)),
                     &rowsums);
    REQUIRE(rowsums.size() == 5);
    for (double s : rowsums) CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("vocabulary projection compresses to the prototype count") {
    const auto cfg = small_cfg();
    Fusion fus(cfg);
    ad::ParamStore store;
    std::mt19937_64 rng(23);
    fus.init_params(store, 40, rng);
    ad::Tape t;
    const Mat table = random_mat(40, cfg.d_llm, 60);
    Var h_e = fus.project_vocab(t, store, table);
    CHECK(h_e.rows() == cfg.prototype_count);
    CHECK(h_e.cols() == cfg.hidden);
    // oracle: proto * table, then the vocab linear
    const Mat compressed = store.at("fus.proto").value * table;
    const Mat want = (compressed * store.at("fus.vocab.w").value).rowwise() +
                     store.at("fus.vocab.b").value.row(0);
    CHECK((Mat(h_e.val()) - want).cwiseAbs().maxCoeff() < 1e-10);
    CHECK_THROWS_AS(fus.project_vocab(t, store, random_mat(40, cfg.d_llm + 1, 61)),
                    std::invalid_argument);
}

TEST_CASE("fuse concatenates along the sequence axis; empty prompt is identity") {
    const auto cfg = small_cfg();
    Fusion fus(cfg);
    ad::ParamStore store;
    std::mt19937_64 rng(29);
    fus.init_params(store, 40, rng);
    ad::Tape t;
    Var h_a = t.constant(random_mat(4, cfg.hidden, 70));
    Var h_l = t.constant(random_mat(6, cfg.d_llm, 71));
    Var h_c = fus.fuse(t, store, h_a, h_l);
    CHECK(h_c.rows() == 10);
    CHECK(h_c.cols() == cfg.hidden);
    // the first rows are H_A unchanged
    CHECK((Mat(h_c.val()).topRows(4) - Mat(h_a.val())).cwiseAbs().maxCoeff() == 0.0);

    Var identity = fus.fuse(t, store, h_a, ad::Var());
    CHECK((Mat(identity.val()) - Mat(h_a.val())).cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(
        fus.fuse(t, store, h_a, t.constant(random_mat(3, cfg.d_llm + 2, 72))),
        std::invalid_argument);
}

TEST_CASE("decoder input pooling yields a single row of decoder width") {
    const auto cfg = small_cfg();
    Fusion fus(cfg);
    ad::ParamStore store;
    std::mt19937_64 rng(31);
    fus.init_params(store, 40, rng);
    ad::Tape t;
    Var pooled =
        fus.to_decoder_input(t, store, t.constant(random_mat(9, cfg.hidden, 80)));
    CHECK(pooled.rows() == 1);
    CHECK(pooled.cols() == cfg.decoder_width);
}

TEST_CASE("fusion pipeline gradients match finite differences") {
    const auto cfg = small_cfg();
    Fusion fus(cfg);
    ad::ParamStore store;
    std::mt19937_64 rng(37);
    fus.init_params(store, 40, rng);
    store.add("x", random_mat(4, cfg.d_m, 90));
    const Mat table = random_mat(40, cfg.d_llm, 91);
    const Mat h_l = random_mat(5, cfg.d_llm, 92);
    auto forward = [&](ad::ParamStore& s, bool back) {
        ad::Tape t;
        Var h_e = fus.project_vocab(t, s, table);
        Var h_a = fus.cross_attend(t, s, t.leaf(s.at("x")), h_e);
        Var h_c = fus.fuse(t, s, h_a, t.constant(h_l));
        ad::Var loss = t.sum_sq(fus.to_decoder_input(t, s, h_c));
        if (back) t.backward(loss);
        return loss.val()(0, 0);
    };
    auto res = testutil::grad_check(
        store, [&](ad::ParamStore& s) { return forward(s, false); },
        [&](ad::ParamStore& s) { forward(s, true); }, 4);
    CHECK(res.checked > 0);
    CHECK(res.max_rel_err < 1e-4);
}
