#include "maker/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace maker::kinematics {

namespace {
constexpr double kDegToRad = M_PI / 180.0;
}

double haversine_m(LonLat a, LonLat b) {
    const double phi1 = a.lat * kDegToRad;
    const double phi2 = b.lat * kDegToRad;
    const double dphi = (b.lat - a.lat) * kDegToRad;
    const double dlam = (b.lon - a.lon) * kDegToRad;
    const double s = std::sin(dphi / 2.0);
    const double t = std::sin(dlam / 2.0);
    const double h = s * s + std::cos(phi1) * std::cos(phi2) * t * t;
    return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

std::vector<double> velocity_series(const std::vector<LonLat>& positions,
                                    const std::vector<double>& timestamps) {
    if (positions.size() < 2 || positions.size() != timestamps.size())
        throw std::invalid_argument("velocity_series: need >= 2 aligned points");
    std::vector<double> v(positions.size() - 1);
    for (std::size_t i = 0; i + 1 < positions.size(); ++i) {
        const double dt = timestamps[i + 1] - timestamps[i];
        if (dt <= 0.0)
            throw std::invalid_argument("velocity_series: timestamps not increasing");
        v[i] = haversine_m(positions[i], positions[i + 1]) / dt;
    }
    return v;
}

std::vector<double> acceleration_series(const std::vector<double>& velocity,
                                        const std::vector<double>& timestamps) {
    if (velocity.size() < 2)
        throw std::invalid_argument("acceleration_series: need >= 2 velocities");
    if (timestamps.size() != velocity.size() + 1)
        throw std::invalid_argument("acceleration_series: need n+1 timestamps");
    std::vector<double> a(velocity.size() - 1);
    for (std::size_t i = 0; i + 1 < velocity.size(); ++i) {
        const double dt = timestamps[i + 2] - timestamps[i + 1];
        if (dt <= 0.0)
            throw std::invalid_argument("acceleration_series: timestamps not increasing");
        a[i] = (velocity[i + 1] - velocity[i]) / dt;
    }
    return a;
}

double population_std(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / double(xs.size());
    double acc = 0.0;
    for (double x : xs) acc += (x - mean) * (x - mean);
    return std::sqrt(acc / double(xs.size()));
}

double spatial_complexity(const std::vector<LonLat>& positions) {
    if (positions.size() < 3)
        throw std::invalid_argument("spatial_complexity: need >= 3 points");
    std::vector<double> steps(positions.size() - 1);
    for (std::size_t i = 0; i + 1 < positions.size(); ++i) {
        const double dx = positions[i + 1].lon - positions[i].lon;
        const double dy = positions[i + 1].lat - positions[i].lat;
        steps[i] = std::hypot(dx, dy);
    }
    return population_std(steps);
}

double temporal_irregularity(const std::vector<double>& input_intervals,
                             const std::vector<double>& pred_intervals,
                             double eps) {
    if (input_intervals.empty() || pred_intervals.empty())
        throw std::invalid_argument("temporal_irregularity: empty interval list");
    const double si = population_std(input_intervals);
    const double sp = population_std(pred_intervals);
    return std::abs(sp - si) / (si + eps);
}

double percentile_linear(std::vector<double> xs, double q) {
    if (xs.empty()) throw std::invalid_argument("percentile: empty input");
    std::sort(xs.begin(), xs.end());
    const double pos = q * double(xs.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = static_cast<std::size_t>(std::ceil(pos));
    const double frac = pos - double(lo);
    return xs[lo] + frac * (xs[hi] - xs[lo]);
}

std::vector<Level> quartile_levels(const std::vector<double>& scores) {
    if (scores.size() < 4)
        throw std::invalid_argument("quartile_levels: need >= 4 scores");
    const double q1 = percentile_linear(scores, 0.25);
    const double q3 = percentile_linear(scores, 0.75);
    std::vector<Level> out(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (scores[i] > q3)
            out[i] = Level::High;
        else if (scores[i] < q1)
            out[i] = Level::Low;
        else
            out[i] = Level::Medium;
    }
    return out;
}

}  // namespace maker::kinematics
