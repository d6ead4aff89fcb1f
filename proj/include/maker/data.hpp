// AIS ingestion, trajectory segmentation, sample windowing, instance
// normalization, and synthetic track generation.
#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

#include "maker/kinematics.hpp"

namespace maker::data {

using Mat = Eigen::MatrixXd;

// Channel layout used everywhere: lon, lat, sog, cog (M = 2 features).
inline constexpr int kChannels = 4;

struct AisRecord {
    std::string vessel_id;  // MMSI
    std::int64_t timestamp = 0;  // seconds since epoch, UTC
    double lon = 0.0;
    double lat = 0.0;
    double sog = 0.0;  // knots
    double cog = 0.0;  // degrees, [0, 360)

    bool valid() const;
};

struct Trajectory {
    std::string vessel_id;
    std::vector<AisRecord> records;

    std::size_t size() const { return records.size(); }
};

struct TrajectorySample {
    std::vector<AisRecord> history;                     // exactly h records
    std::vector<kinematics::LonLat> future_positions;   // exactly p
    std::vector<double> future_timestamps;              // exactly p

    std::vector<double> history_timestamps() const;
    Mat history_matrix() const;  // h x kChannels, channel order lon,lat,sog,cog
};

struct NormStats {
    Eigen::VectorXd mean;  // kChannels
    Eigen::VectorXd std;   // kChannels (population)
    double epsilon = 1e-5;
};

enum class Dialect { UsCoast, Danish };

struct ParseResult {
    std::vector<AisRecord> records;  // sorted by (vessel_id, timestamp)
    std::size_t dropped = 0;
};

// Throws std::runtime_error naming the column when a required column is
// missing. Invalid rows are dropped and counted.
ParseResult parse_ais_csv(const std::string& path, Dialect dialect);

// Canonical newline-delimited store: header + vessel_id,timestamp,lon,lat,sog,cog.
void write_canonical(const std::string& path, const std::vector<Trajectory>& trajs);
std::vector<Trajectory> read_canonical(const std::string& path);

std::vector<Trajectory> segment_trajectories(const std::vector<AisRecord>& records,
                                             double min_interval_s,
                                             double max_gap_s);

std::vector<TrajectorySample> window_samples(const Trajectory& traj, int h, int p,
                                             int stride);

// Per-channel (x - mean) / (std + epsilon) over the history window.
std::pair<Mat, NormStats> instance_normalize(const Mat& history, double epsilon = 1e-5);

// Inverse for the lon/lat channels: pred * (std + eps) + mean.
Mat denormalize_positions(const Mat& pred, const NormStats& stats);

// Full-width inverse (all kChannels columns).
Mat denormalize(const Mat& pred, const NormStats& stats);

enum class SynthKind { Straight, Loop, Zigzag, Mixed };

struct IntervalModel {
    enum class Kind { Regular, Jittered, Bursty } kind = Kind::Regular;
    double base_s = 60.0;
    double jitter_s = 0.0;  // jittered: uniform +-jitter
};

SynthKind synth_kind_from_string(const std::string& s);

Trajectory synth_trajectory(SynthKind kind, int n, double noise_deg,
                            std::uint64_t seed, const IntervalModel& intervals);

}  // namespace maker::data
