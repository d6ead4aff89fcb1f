#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "maker/data.hpp"
#include "maker/kinematics.hpp"

using namespace maker::kinematics;

TEST_CASE("haversine identity, equator arc, quarter circumference") {
    CHECK(haversine_m({12.5, 48.2}, {12.5, 48.2}) == 0.0);
    // one degree along the equator: exact arc length pi/180 * R
    const double arc = M_PI / 180.0 * kEarthRadiusM;
    CHECK(haversine_m({0, 0}, {1, 0}) == doctest::Approx(arc).epsilon(1e-9));
    CHECK(arc == doctest::Approx(111194.93).epsilon(1e-6));
    // pole-to-equator quarter circumference
    CHECK(haversine_m({0, 0}, {0, 90}) ==
          doctest::Approx(M_PI / 2.0 * kEarthRadiusM).epsilon(1e-9));
}

TEST_CASE("haversine symmetry and triangle inequality on fuzzed triples") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> ulon(-180, 180), ulat(-85, 85);
    for (int i = 0; i < 300; ++i) {
        LonLat a{ulon(rng), ulat(rng)}, b{ulon(rng), ulat(rng)},
            c{ulon(rng), ulat(rng)};
        const double ab = haversine_m(a, b);
        CHECK(ab == doctest::Approx(haversine_m(b, a)).epsilon(1e-12));
        CHECK(ab <= haversine_m(a, c) + haversine_m(c, b) + 1e-6 * ab + 1e-6);
    }
}

TEST_CASE("velocity series: stationary, hand pair, straight generator") {
    std::vector<LonLat> still(4, {5.0, 5.0});
    std::vector<double> ts{0, 60, 120, 180};
    for (double v : velocity_series(still, ts)) CHECK(v == 0.0);

    // place a second point 120 m east along the equator; 60 s apart -> 2 m/s
    const double dlon = 120.0 / (M_PI / 180.0 * kEarthRadiusM);
    const auto v = velocity_series({{0, 0}, {dlon, 0}}, {0, 60});
    CHECK(v[0] == doctest::Approx(2.0).epsilon(1e-9));

    maker::data::IntervalModel im;
    im.kind = maker::data::IntervalModel::Kind::Jittered;
    im.base_s = 60;
    im.jitter_s = 25;
    const auto traj = maker::data::synth_trajectory(
        maker::data::SynthKind::Straight, 50, 0.0, 99, im);
    std::vector<LonLat> pos;
    std::vector<double> t;
    for (const auto& r : traj.records) {
        pos.push_back({r.lon, r.lat});
        t.push_back(double(r.timestamp));
    }
    const auto vs = velocity_series(pos, t);
    for (double x : vs)
        CHECK(x == doctest::Approx(vs.front()).epsilon(1e-6));
    const auto as = acceleration_series(vs, t);
    for (double a : as) CHECK(std::abs(a) < 1e-9);
}

TEST_CASE("acceleration: constant velocity, substitution, antisymmetry") {
    std::vector<double> ts{0, 60, 120, 180};
    for (double a : acceleration_series({3, 3, 3}, ts)) CHECK(a == 0.0);
    // v = [2, 4] with the second interval 60 s
    const auto a = acceleration_series({2, 4}, {0, 30, 90});
    CHECK(a[0] == doctest::Approx(2.0 / 60.0).epsilon(1e-12));
    const auto fwd = acceleration_series({1, 4, 2}, ts);
    const auto rev = acceleration_series({1, -2, 0}, ts);  // changes negated
    for (std::size_t i = 0; i < fwd.size(); ++i)
        CHECK(rev[i] == doctest::Approx(-fwd[i]));
}

TEST_CASE("spatial complexity: collinear, known steps, translation invariance") {
    std::vector<LonLat> line;
    for (int i = 0; i < 6; ++i) line.push_back({0.01 * i, 0.0});
    CHECK(spatial_complexity(line) == doctest::Approx(0.0));

    // step lengths 1, 1, 4 along the lon axis -> population std sqrt(2)
    std::vector<LonLat> steps{{0, 0}, {1, 0}, {2, 0}, {6, 0}};
    CHECK(spatial_complexity(steps) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));

    std::vector<LonLat> shifted;
    for (auto p : steps) shifted.push_back({p.lon + 3.3, p.lat - 1.1});
    CHECK(spatial_complexity(shifted) ==
          doctest::Approx(spatial_complexity(steps)).epsilon(1e-12));

    CHECK_THROWS(spatial_complexity({{0, 0}, {1, 1}}));
}

TEST_CASE("temporal irregularity: zero, substitution, scale invariance") {
    std::vector<double> a{60, 70, 50, 60};
    CHECK(temporal_irregularity(a, a) == doctest::Approx(0.0));

    // population stds 10 and 15 -> |15 - 10| / 10 = 0.5
    std::vector<double> in{50, 70}, pr{45, 75};
    CHECK(temporal_irregularity(in, pr) == doctest::Approx(0.5).epsilon(1e-7));

    std::vector<double> in2, pr2;
    for (double x : in) in2.push_back(3.7 * x);
    for (double x : pr) pr2.push_back(3.7 * x);
    CHECK(temporal_irregularity(in2, pr2) ==
          doctest::Approx(temporal_irregularity(in, pr)).epsilon(1e-6));
}

namespace {

// independent sort-based percentile classification
std::vector<Level> brute_levels(const std::vector<double>& scores) {
    std::vector<double> sorted = scores;
    std::sort(sorted.begin(), sorted.end());
    auto pct = [&](double q) {
        const double pos = q * double(sorted.size() - 1);
        const std::size_t lo = std::size_t(std::floor(pos));
        const std::size_t hi = std::size_t(std::ceil(pos));
        return sorted[lo] + (pos - double(lo)) * (sorted[hi] - sorted[lo]);
    };
    const double q1 = pct(0.25), q3 = pct(0.75);
    std::vector<Level> out;
    for (double s : scores)
        out.push_back(s > q3 ? Level::High : s < q1 ? Level::Low : Level::Medium);
    return out;
}

}  // namespace

TEST_CASE("quartile levels: 1..8 example, degenerate, monotone relabeling") {
    std::vector<double> scores{1, 2, 3, 4, 5, 6, 7, 8};
    const auto lv = quartile_levels(scores);
    CHECK(percentile_linear(scores, 0.25) == doctest::Approx(2.75));
    CHECK(percentile_linear(scores, 0.75) == doctest::Approx(6.25));
    CHECK(lv[0] == Level::Low);
    CHECK(lv[1] == Level::Low);
    for (int i = 2; i <= 5; ++i) CHECK(lv[std::size_t(i)] == Level::Medium);
    CHECK(lv[6] == Level::High);
    CHECK(lv[7] == Level::High);

    for (Level l : quartile_levels({4, 4, 4, 4, 4})) CHECK(l == Level::Medium);

    // strictly monotone relabeling preserves assignment
    std::vector<double> relabeled;
    for (double s : scores) relabeled.push_back(std::exp(s));
    const auto lv2 = quartile_levels(relabeled);
    for (std::size_t i = 0; i < lv.size(); ++i) CHECK(lv[i] == lv2[i]);
}

TEST_CASE("quartile levels match brute force on random multisets") {
    std::mt19937_64 rng(13);
    std::uniform_int_distribution<int> val(0, 6);
    for (int trial = 0; trial < 500; ++trial) {
        std::uniform_int_distribution<int> len(4, 8);
        std::vector<double> scores;
        const int n = len(rng);
        for (int i = 0; i < n; ++i) scores.push_back(double(val(rng)));
        const auto got = quartile_levels(scores);
        const auto want = brute_levels(scores);
        for (std::size_t i = 0; i < scores.size(); ++i) CHECK(got[i] == want[i]);
    }
}
