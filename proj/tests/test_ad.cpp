#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "maker/ad.hpp"
#include "maker/nn.hpp"
#include "test_util.hpp"

using namespace maker;
using ad::Mat;

namespace {

Mat random_mat(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Mat m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = u(rng);
    return m;
}

}  // namespace

TEST_CASE("matmul forward and backward match finite differences") {
    ad::ParamStore store;
    store.add("a", random_mat(3, 4, 1));
    store.add("b", random_mat(4, 5, 2));
    auto run = [](ad::ParamStore& s, bool back) {
        ad::Tape t;
        ad::Var y = t.sum_sq(t.matmul(t.leaf(s.at("a")), t.leaf(s.at("b"))));
        if (back) t.backward(y);
        return y.val()(0, 0);
    };
    auto res = testutil::grad_check(
        store, [&](ad::ParamStore& s) { return run(s, false); },
        [&](ad::ParamStore& s) { run(s, true); }, 6);
    CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("composite graph gradient: softmax, layer_norm, relu, concat, slices") {
    ad::ParamStore store;
    store.add("x", random_mat(4, 6, 3));
    store.add("w", random_mat(6, 6, 4));
    store.add("g", Mat::Ones(1, 6) + 0.1 * random_mat(1, 6, 5));
    store.add("b", 0.1 * random_mat(1, 6, 6));
    store.add("row", random_mat(1, 6, 7));
    auto run = [](ad::ParamStore& s, bool back) {
        ad::Tape t;
        ad::Var x = t.leaf(s.at("x"));
        ad::Var w = t.leaf(s.at("w"));
        ad::Var ln = t.layer_norm(x, t.leaf(s.at("g")), t.leaf(s.at("b")));
        ad::Var att = t.softmax_rows(t.scale(t.matmul_nt(ln, ln), 0.5));
        ad::Var y = t.matmul(att, t.matmul(x, w));
        y = t.relu(t.add_row(y, t.leaf(s.at("row"))));
        y = t.replace_rows(y, {1, 3}, t.leaf(s.at("row")));
        ad::Var top = t.slice_rows(y, 0, 2);
        ad::Var rest = t.slice_rows(y, 2, 2);
        ad::Var cat = t.concat_cols(t.mean_rows(top), t.mean_rows(rest));
        ad::Var flat = t.reshape_rowmajor(cat, 3, 4);
        ad::Var loss = t.sum_sq(flat);
        if (back) t.backward(loss);
        return loss.val()(0, 0);
    };
    auto res = testutil::grad_check(
        store, [&](ad::ParamStore& s) { return run(s, false); },
        [&](ad::ParamStore& s) { run(s, true); }, 8);
    CHECK(res.max_rel_err < 1e-5);
}

TEST_CASE("mae value and subgradient") {
    ad::ParamStore store;
    store.add("x", random_mat(3, 3, 11));
    const Mat target = random_mat(3, 3, 12);
    ad::Tape t;
    ad::Var x = t.leaf(store.at("x"));
    ad::Var loss = t.mae(x, target);
    CHECK(loss.val()(0, 0) ==
          doctest::Approx((store.at("x").value - target).cwiseAbs().mean()));
    t.backward(loss);
    for (Eigen::Index i = 0; i < 9; ++i) {
        const double sign = store.at("x").value(i) > target(i) ? 1.0 : -1.0;
        CHECK(store.at("x").grad(i) == doctest::Approx(sign / 9.0));
    }
}

TEST_CASE("softmax rows sum to one") {
    ad::Tape t;
    ad::Var s = t.softmax_rows(t.constant(random_mat(5, 7, 20)));
    for (Eigen::Index r = 0; r < 5; ++r)
        CHECK(s.val().row(r).sum() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("adam step moves parameters against the gradient") {
    ad::ParamStore store;
    store.add("w", Mat::Ones(1, 1));
    store.at("w").grad(0, 0) = 1.0;
    store.adam_step(0.1);
    CHECK(store.at("w").value(0, 0) < 1.0);
}

TEST_CASE("checksum distinguishes parameter values") {
    ad::ParamStore a, b;
    a.add("w", Mat::Ones(2, 2));
    b.add("w", Mat::Ones(2, 2));
    CHECK(a.checksum() == b.checksum());
    b.at("w").value(0, 0) += 1e-12;
    CHECK(a.checksum() != b.checksum());
}
