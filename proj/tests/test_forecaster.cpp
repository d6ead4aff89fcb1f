#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <random>

#include "maker/forecaster.hpp"
#include "test_util.hpp"

using namespace maker;
using namespace maker::forecaster;
namespace fs = std::filesystem;

namespace {

ModelConfig small_cfg(int h = 24, int p = 24) {
    ModelConfig cfg;
    cfg.encoder.h = h;
    cfg.encoder.d_m = 8;
    cfg.encoder.blocks = 1;
    cfg.encoder.heads = 2;
    cfg.encoder.ff_mult = 2;
    cfg.fusion.d_m = 8;
    cfg.fusion.d_llm = 16;
    cfg.fusion.hidden = 20;
    cfg.fusion.prototype_count = 6;
    cfg.fusion.decoder_width = 16;
    cfg.p = p;
    cfg.dec_width = 16;
    cfg.dec_blocks = 1;
    cfg.dec_heads = 2;
    cfg.dec_ff_mult = 2;
    return cfg;
}

struct Fixture {
    ModelConfig cfg = small_cfg();
    prompt_lm::StubProvider provider{150, 16};
    Forecaster model{small_cfg()};
    ad::ParamStore store;
    PreparedSample sample;

    explicit Fixture(std::uint64_t seed = 1) {
        model.init_params(store, seed, provider);
        sample = prepare_sample(testutil::make_sample(24, 24, seed + 100),
                                &provider, "synthetic", true);
    }
};

}  // namespace

TEST_CASE("variant flag table covers the named ablations") {
    CHECK(flags_for_variant("full").use_llm);
    const auto llm = flags_for_variant("MAKER-LLM");
    CHECK_FALSE(llm.use_llm);
    CHECK_FALSE(llm.use_fusion);  // fusion cannot run without the text channel
    CHECK_FALSE(flags_for_variant("MAKER-Prompt").use_prompt);
    CHECK_FALSE(flags_for_variant("MAKER-MKT").use_fusion);
    CHECK_FALSE(flags_for_variant("MAKER-de").use_decoder);
    CHECK_FALSE(flags_for_variant("MAKER-KSL").use_ksl);
    CHECK(flags_for_variant("MAKER-KSL").use_fusion);
    CHECK_THROWS_AS(flags_for_variant("MAKER-???"), std::invalid_argument);
    CHECK(known_variants().size() == 6);
}

TEST_CASE("prepare_sample: normalization, kinematic targets, prompt cache") {
    Fixture f;
    const auto& s = f.sample;
    CHECK(s.norm_history.rows() == 24);
    CHECK(s.norm_history.cols() == data::kChannels);
    CHECK(s.norm_future.rows() == 24);
    CHECK(s.true_velocity.size() == 23);
    CHECK(s.true_acceleration.size() == 22);
    CHECK(s.kin_scale > 0.0);
    CHECK(s.prompt_embedding.rows() > 0);
    CHECK(s.prompt_embedding.cols() == f.provider.embed_width());
    // denormalizing the normalized future recovers the raw future positions
    const Mat back = data::denormalize_positions(s.norm_future, s.stats);
    for (int i = 0; i < 24; ++i) {
        CHECK(back(i, 0) ==
              doctest::Approx(s.raw.future_positions[std::size_t(i)].lon)
                  .epsilon(1e-9));
        CHECK(back(i, 1) ==
              doctest::Approx(s.raw.future_positions[std::size_t(i)].lat)
                  .epsilon(1e-9));
    }
    const auto no_prompt = prepare_sample(s.raw, &f.provider, "synthetic", false);
    CHECK(no_prompt.prompt_embedding.rows() == 0);
}

TEST_CASE("forward output shapes for every variant; invalid combo rejected") {
    Fixture f;
    for (const auto& name : known_variants()) {
        const auto out = f.model.run(f.store, f.sample, flags_for_variant(name),
                                     f.provider, 5);
        CHECK(out.pred_positions.rows() == 24);
        CHECK(out.pred_positions.cols() == 2);
        CHECK(out.recon_positions.rows() == 24);
        CHECK(out.recon_positions.cols() == 2);
        CHECK(out.pred_velocity.size() == 23);
        CHECK(out.pred_acceleration.size() == 22);
        CHECK(out.pred_positions.allFinite());
    }
    AblationFlags bad;
    bad.use_llm = false;
    bad.use_fusion = true;
    CHECK_THROWS_AS(f.model.run(f.store, f.sample, bad, f.provider, 5),
                    std::invalid_argument);
}

TEST_CASE("prediction never reads the future positions") {
    Fixture f;
    auto poisoned = f.sample;
    // corrupt the future ground truth while keeping the timestamps
    poisoned.norm_future.array() += 100.0;
    for (auto& pos : poisoned.raw.future_positions) {
        pos.lon += 50.0;
        pos.lat += 20.0;
    }
    const auto a =
        f.model.run(f.store, f.sample, flags_for_variant("full"), f.provider, 5);
    const auto b =
        f.model.run(f.store, poisoned, flags_for_variant("full"), f.provider, 5);
    CHECK((a.pred_positions - b.pred_positions).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.recon_positions - b.recon_positions).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("forward is deterministic per mask seed and varies across seeds") {
    Fixture f;
    const auto flags = flags_for_variant("full");
    const auto a = f.model.run(f.store, f.sample, flags, f.provider, 5);
    const auto b = f.model.run(f.store, f.sample, flags, f.provider, 5);
    CHECK((a.pred_positions - b.pred_positions).cwiseAbs().maxCoeff() == 0.0);
    const auto c = f.model.run(f.store, f.sample, flags, f.provider, 6);
    CHECK((a.recon_positions - c.recon_positions).cwiseAbs().maxCoeff() > 0.0);
    // inference path: ratio 0 removes mask randomness entirely
    const auto d = f.model.run(f.store, f.sample, flags, f.provider, 5, 0.0);
    const auto e = f.model.run(f.store, f.sample, flags, f.provider, 99, 0.0);
    CHECK((d.pred_positions - e.pred_positions).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("full-model gradients match finite differences") {
    Fixture f(7);
    auto forward = [&](ad::ParamStore& s, bool back) {
        ad::Tape t;
        const auto vars = f.model.forward(t, s, f.sample, flags_for_variant("full"),
                                          f.provider, 11);
        ad::Var loss = t.add(t.sum_sq(vars.pred), t.sum_sq(vars.recon));
        loss = t.add(loss, t.add(t.sum_sq(vars.vel), t.sum_sq(vars.acc)));
        loss = t.scale(loss, 1e-3);
        if (back) t.backward(loss);
        return loss.val()(0, 0);
    };
    // some decoder-attention gradients are tiny; a wider central-difference
    // step keeps the probe above floating-point roundoff
    auto res = testutil::grad_check(
        f.store, [&](ad::ParamStore& s) { return forward(s, false); },
        [&](ad::ParamStore& s) { forward(s, true); }, 2, 1e-4);
    CHECK(res.checked > 0);
    CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("constant-velocity baseline is exact on linear motion") {
    data::TrajectorySample s;
    for (int i = 0; i < 5; ++i) {
        data::AisRecord r;
        r.timestamp = 60 * i;
        r.lon = 0.001 * i;
        r.lat = 50.0 + 0.0005 * i;
        s.history.push_back(r);
    }
    for (int i = 5; i < 8; ++i) s.future_timestamps.push_back(60.0 * i);
    const Mat pred = constant_velocity_baseline(s);
    REQUIRE(pred.rows() == 3);
    for (int i = 0; i < 3; ++i) {
        CHECK(pred(i, 0) == doctest::Approx(0.001 * (5 + i)).epsilon(1e-12));
        CHECK(pred(i, 1) == doctest::Approx(50.0 + 0.0005 * (5 + i)).epsilon(1e-12));
    }
    data::TrajectorySample tiny;
    tiny.history.push_back(s.history[0]);
    tiny.future_timestamps = {60.0};
    CHECK_THROWS_AS(constant_velocity_baseline(tiny), std::invalid_argument);
}

TEST_CASE("checkpoint round trip restores every parameter bit-exactly") {
    Fixture f(21);
    const auto path = (fs::temp_directory_path() / "ckpt.json").string();
    nlohmann::json meta;
    meta["variant"] = "full";
    meta["note"] = "unit";
    save_checkpoint(path, f.store, meta);

    Forecaster other{small_cfg()};
    ad::ParamStore restored;
    other.init_params(restored, 999, f.provider);  // different values
    CHECK(restored.checksum() != f.store.checksum());
    const auto loaded_meta = load_checkpoint(path, restored);
    CHECK(loaded_meta.at("variant") == "full");
    CHECK(restored.checksum() == f.store.checksum());

    const auto a = f.model.run(f.store, f.sample, flags_for_variant("full"),
                               f.provider, 3);
    const auto b = other.run(restored, f.sample, flags_for_variant("full"),
                             f.provider, 3);
    CHECK((a.pred_positions - b.pred_positions).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("corrupt checkpoints are rejected") {
    const auto path = (fs::temp_directory_path() / "ckpt_bad.json").string();
    {
        std::ofstream out(path);
        out << "{\"format_version\": 2, \"params\": {}, \"meta\": {}}";
    }
    ad::ParamStore store;
    CHECK_THROWS_AS(load_checkpoint(path, store), std::runtime_error);
    CHECK_THROWS_AS(load_checkpoint("/nonexistent/ckpt.json", store),
                    std::runtime_error);
}
