#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <set>

#include "maker/masked_encoder.hpp"
#include "test_util.hpp"

using namespace maker;
using namespace maker::masked_encoder;

TEST_CASE("patch count matches an explicit window enumeration over a grid") {
    for (int h = 16; h <= 96; ++h)
        for (int lp : {8, 16})
            for (int s : {4, 8}) {
                EncoderConfig cfg;
                cfg.h = h;
                cfg.patch_len = lp;
                cfg.stride = s;
                // enumerate starts over the series padded by one stride of
                // replicated last steps; a window fits if it ends inside it
                int count = 0;
                for (int start = 0; start + lp <= h + s; start += s) ++count;
                CHECK(cfg.patch_count() == count);
                CHECK(cfg.patch_count() == (h - lp) / s + 2);
            }
    EncoderConfig bad;
    bad.h = 4;
    bad.patch_len = 16;
    CHECK_THROWS_AS(bad.patch_count(), std::invalid_argument);
}

TEST_CASE("patchify: shapes, replication padding, channel independence") {
    const int h = 24, lp = 16, s = 8;
    Mat hist(h, 4);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int i = 0; i < hist.size(); ++i) hist(i / 4, i % 4) = u(rng);
    std::vector<double> ts;
    for (int i = 0; i < h; ++i) ts.push_back(1000.0 + 60.0 * i);

    const auto ps = patchify(hist, ts, lp, s);
    REQUIRE(ps.channels.size() == 4);
    REQUIRE(ps.patch_count() == 3);
    for (const auto& chan : ps.channels) {
        CHECK(chan.rows() == 3);
        CHECK(chan.cols() == lp);
    }
    // interior patches are plain windows
    for (int c = 0; c < 4; ++c)
        for (int pi = 0; pi < 2; ++pi)
            for (int j = 0; j < lp; ++j)
                CHECK(ps.channels[c](pi, j) == hist(pi * s + j, c));
    // final patch: first 8 real steps then the last step replicated
    for (int c = 0; c < 4; ++c)
        for (int j = 0; j < lp; ++j)
            CHECK(ps.channels[c](2, j) == hist(std::min(16 + j, h - 1), c));
    // patch mean timestamps use the same replication
    double acc = 0.0;
    for (int j = 0; j < lp; ++j) acc += 1000.0 + 60.0 * std::min(16 + j, h - 1);
    CHECK(ps.patch_times[2] == doctest::Approx(acc / lp).epsilon(1e-12));

    // editing one channel leaves the other channels' patches untouched
    Mat hist2 = hist;
    hist2.col(2).array() += 5.0;
    const auto ps2 = patchify(hist2, ts, lp, s);
    for (int c : {0, 1, 3})
        CHECK((ps.channels[c] - ps2.channels[c]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((ps.channels[2] - ps2.channels[2]).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("mask plan: exact count, bounds, determinism, bypass, validation") {
    for (int q = 1; q <= 32; ++q) {
        for (double ratio : {0.25, 0.5, 0.75}) {
            const auto plan = plan_mask(q, 4, ratio, 77);
            const int want = std::max(1, int(std::floor(q * ratio)));
            for (const auto& ch : plan.masked_indices) {
                CHECK(int(ch.size()) == want);
                std::set<int> uniq(ch.begin(), ch.end());
                CHECK(uniq.size() == ch.size());
                for (int i : ch) {
                    CHECK(i >= 0);
                    CHECK(i < q);
                }
            }
        }
    }
    const auto a = plan_mask(16, 4, 0.5, 9);
    const auto b = plan_mask(16, 4, 0.5, 9);
    CHECK(a.masked_indices == b.masked_indices);
    const auto c = plan_mask(16, 4, 0.5, 10);
    CHECK(a.masked_indices != c.masked_indices);

    const auto none = plan_mask(16, 4, 0.0, 9);
    for (const auto& ch : none.masked_indices) CHECK(ch.empty());
    CHECK_THROWS_AS(plan_mask(16, 4, -0.1, 9), std::invalid_argument);
    CHECK_THROWS_AS(plan_mask(16, 4, 1.5, 9), std::invalid_argument);
}

namespace {

struct Fixture {
    EncoderConfig cfg;
    MaskedEncoder enc;
    ad::ParamStore store;
    PatchSet patches;

    explicit Fixture(std::uint64_t seed = 3) : enc(make_cfg(), "enc") {
        cfg = enc.config();
        std::mt19937_64 rng(seed);
        enc.init_params(store, rng);
        Mat hist(cfg.h, 4);
        std::uniform_real_distribution<double> u(-1, 1);
        for (int i = 0; i < hist.size(); ++i) hist(i / 4, i % 4) = u(rng);
        std::vector<double> ts;
        for (int i = 0; i < cfg.h; ++i) ts.push_back(60.0 * i);
        patches = patchify(hist, ts, cfg.patch_len, cfg.stride);
    }

    static EncoderConfig make_cfg() {
        EncoderConfig c;
        c.h = 24;
        c.d_m = 8;
        c.blocks = 1;
        c.heads = 2;
        c.ff_mult = 2;
        return c;
    }
};

}  // namespace

TEST_CASE("masked rows carry the shared mask embedding; others are untouched") {
    Fixture f;
    ad::Tape t;
    const auto embedded = f.enc.embed_patches(t, f.store, f.patches);
    const auto plan = plan_mask(f.patches.patch_count(), 4, 0.5, 21);
    const auto masked = f.enc.apply_mask(t, f.store, embedded, plan);
    const Mat mask_row = f.store.at("enc.mask_emb").value;
    for (std::size_t c = 0; c < masked.size(); ++c) {
        std::set<int> hit(plan.masked_indices[c].begin(),
                          plan.masked_indices[c].end());
        for (int r = 0; r < f.patches.patch_count(); ++r) {
            const Mat got = masked[c].val().row(r);
            const Mat want =
                hit.count(r) ? mask_row : Mat(embedded[c].val().row(r));
            CHECK((got - want).cwiseAbs().maxCoeff() == 0.0);
        }
    }
}

TEST_CASE("reconstruction has the history shape and is deterministic") {
    Fixture f;
    auto run = [&](ad::ParamStore& s) {
        ad::Tape t;
        auto e = f.enc.embed_patches(t, s, f.patches);
        const auto plan = plan_mask(f.patches.patch_count(), 4, 0.5, 21);
        auto m = f.enc.apply_mask(t, s, e, plan);
        auto enc = f.enc.encode(t, s, m);
        return Mat(f.enc.reconstruct(t, s, enc).val());
    };
    const Mat a = run(f.store);
    CHECK(a.rows() == f.cfg.h);
    CHECK(a.cols() == 2);
    const Mat b = run(f.store);
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("encoder gradients match finite differences") {
    Fixture f(11);
    const auto plan = plan_mask(f.patches.patch_count(), 4, 0.5, 21);
    auto forward = [&](ad::ParamStore& s, bool back) {
        ad::Tape t;
        auto e = f.enc.embed_patches(t, s, f.patches);
        auto m = f.enc.apply_mask(t, s, e, plan);
        auto enc = f.enc.encode(t, s, m);
        ad::Var loss = t.sum_sq(f.enc.reconstruct(t, s, enc));
        if (back) t.backward(loss);
        return loss.val()(0, 0);
    };
    auto res = testutil::grad_check(
        f.store, [&](ad::ParamStore& s) { return forward(s, false); },
        [&](ad::ParamStore& s) { forward(s, true); }, 3);
    CHECK(res.checked > 0);
    CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("mask embedding receives gradient when any patch is masked") {
    Fixture f(13);
    ad::Tape t;
    auto e = f.enc.embed_patches(t, f.store, f.patches);
    const auto plan = plan_mask(f.patches.patch_count(), 4, 0.5, 3);
    auto m = f.enc.apply_mask(t, f.store, e, plan);
    auto enc = f.enc.encode(t, f.store, m);
    f.store.zero_grad();
    t.backward(t.sum_sq(f.enc.reconstruct(t, f.store, enc)));
    CHECK(f.store.at("enc.mask_emb").grad.cwiseAbs().maxCoeff() > 0.0);
}
