// Kinematic ground truth and stratification scores for irregular tracks.
#pragma once

#include <vector>

namespace maker::kinematics {

inline constexpr double kEarthRadiusM = 6'371'000.0;

struct LonLat {
    double lon = 0.0;
    double lat = 0.0;
};

enum class Level { Low, Medium, High };

struct KinematicProfile {
    std::vector<double> velocity;      // m/s, n-1 entries
    std::vector<double> acceleration;  // m/s^2, n-2 entries
    double spatial_complexity = 0.0;
    double temporal_irregularity = 0.0;
};

double haversine_m(LonLat a, LonLat b);

// v_i = dist(g_i, g_{i+1}) / (t_{i+1} - t_i). Throws on non-increasing times.
std::vector<double> velocity_series(const std::vector<LonLat>& positions,
                                    const std::vector<double>& timestamps);

// a_i = (v_{i+1} - v_i) / (t_{i+2} - t_{i+1}); timestamps are the point times.
std::vector<double> acceleration_series(const std::vector<double>& velocity,
                                        const std::vector<double>& timestamps);

// Population std of consecutive Euclidean step lengths in degree space.
double spatial_complexity(const std::vector<LonLat>& positions);

// |std(pred intervals) - std(input intervals)| / (std(input intervals) + eps)
double temporal_irregularity(const std::vector<double>& input_intervals,
                             const std::vector<double>& pred_intervals,
                             double eps = 1e-9);

// Strictly above Q3 -> High, strictly below Q1 -> Low, else Medium.
// Quartiles by linear interpolation of order statistics.
std::vector<Level> quartile_levels(const std::vector<double>& scores);

double population_std(const std::vector<double>& xs);
double percentile_linear(std::vector<double> xs, double q);  // q in [0,1]

}  // namespace maker::kinematics
