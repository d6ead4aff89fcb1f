#include "maker/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace maker::data {

namespace {

constexpr double kMetersPerDegree = 111'194.92664455873;  // pi/180 * R

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size() && std::isfinite(out);
}

bool parse_int(const std::string& s, int& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    long v = std::strtol(s.c_str(), &end, 10);
    if (end != s.c_str() + s.size()) return false;
    out = int(v);
    return true;
}

std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = unsigned(y - era * 400);
    const unsigned doy = unsigned((153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1);
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + std::int64_t(doe) - 719468;
}

std::int64_t to_epoch(int y, int mo, int d, int h, int mi, int s) {
    return days_from_civil(y, mo, d) * 86400 + h * 3600 + mi * 60 + s;
}

// Accepts "YYYY-MM-DDTHH:MM:SS[.fff][Z]" (space separator allowed) and the
// Danish export format "dd/MM/yyyy HH:mm:ss".
bool parse_timestamp(const std::string& raw, std::int64_t& out) {
    int y, mo, d, h, mi, s;
    if (raw.size() >= 19 && raw[4] == '-' && raw[7] == '-') {
        if (!parse_int(raw.substr(0, 4), y) || !parse_int(raw.substr(5, 2), mo) ||
            !parse_int(raw.substr(8, 2), d) || !parse_int(raw.substr(11, 2), h) ||
            !parse_int(raw.substr(14, 2), mi) || !parse_int(raw.substr(17, 2), s))
            return false;
    } else if (raw.size() >= 19 && raw[2] == '/' && raw[5] == '/') {
        if (!parse_int(raw.substr(0, 2), d) || !parse_int(raw.substr(3, 2), mo) ||
            !parse_int(raw.substr(6, 4), y) || !parse_int(raw.substr(11, 2), h) ||
            !parse_int(raw.substr(14, 2), mi) || !parse_int(raw.substr(17, 2), s))
            return false;
    } else {
        return false;
    }
    if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || s > 60)
        return false;
    out = to_epoch(y, mo, d, h, mi, s);
    return true;
}

struct ColumnMap {
    int mmsi, time, lat, lon, sog, cog;
};

int require_column(const std::vector<std::string>& header, const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return int(i);
    throw std::runtime_error("missing required column: " + name);
}

ColumnMap map_columns(const std::vector<std::string>& header, Dialect dialect) {
    ColumnMap m{};
    if (dialect == Dialect::UsCoast) {
        m.mmsi = require_column(header, "MMSI");
        m.time = require_column(header, "BaseDateTime");
        m.lat = require_column(header, "LAT");
        m.lon = require_column(header, "LON");
        m.sog = require_column(header, "SOG");
        m.cog = require_column(header, "COG");
    } else {
        m.mmsi = require_column(header, "MMSI");
        m.time = require_column(header, "# Timestamp");
        m.lat = require_column(header, "Latitude");
        m.lon = require_column(header, "Longitude");
        m.sog = require_column(header, "SOG");
        m.cog = require_column(header, "COG");
    }
    return m;
}

}  // namespace

bool AisRecord::valid() const {
    return lat >= -90.0 && lat <= 90.0 && lon >= -180.0 && lon <= 180.0 &&
           sog >= 0.0 && cog >= 0.0 && cog < 360.0 && !vessel_id.empty();
}

std::vector<double> TrajectorySample::history_timestamps() const {
    std::vector<double> ts(history.size());
    for (std::size_t i = 0; i < history.size(); ++i) ts[i] = double(history[i].timestamp);
    return ts;
}

Mat TrajectorySample::history_matrix() const {
    Mat m(Eigen::Index(history.size()), kChannels);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const AisRecord& r = history[std::size_t(i)];
        m(i, 0) = r.lon;
        m(i, 1) = r.lat;
        m(i, 2) = r.sog;
        m(i, 3) = r.cog;
    }
    return m;
}

ParseResult parse_ais_csv(const std::string& path, Dialect dialect) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    ParseResult out;
    std::string line;
    if (!std::getline(in, line)) return out;  // empty file
    const ColumnMap cols = map_columns(split_csv_line(line), dialect);
    const int max_col = std::max({cols.mmsi, cols.time, cols.lat, cols.lon,
                                  cols.sog, cols.cog});
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (int(fields.size()) <= max_col) {
            ++out.dropped;
            continue;
        }
        AisRecord r;
        r.vessel_id = fields[std::size_t(cols.mmsi)];
        if (!parse_timestamp(fields[std::size_t(cols.time)], r.timestamp) ||
            !parse_double(fields[std::size_t(cols.lat)], r.lat) ||
            !parse_double(fields[std::size_t(cols.lon)], r.lon) ||
            !parse_double(fields[std::size_t(cols.sog)], r.sog) ||
            !parse_double(fields[std::size_t(cols.cog)], r.cog) || !r.valid()) {
            ++out.dropped;
            continue;
        }
        out.records.push_back(std::move(r));
    }
    std::stable_sort(out.records.begin(), out.records.end(),
                     [](const AisRecord& a, const AisRecord& b) {
                         if (a.vessel_id != b.vessel_id) return a.vessel_id < b.vessel_id;
                         return a.timestamp < b.timestamp;
                     });
    return out;
}

void write_canonical(const std::string& path, const std::vector<Trajectory>& trajs) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << "vessel_id,timestamp,lon,lat,sog,cog\n";
    char buf[256];
    for (const auto& t : trajs) {
        for (const auto& r : t.records) {
            std::snprintf(buf, sizeof buf, "%s,%lld,%.10f,%.10f,%.5f,%.5f\n",
                          t.vessel_id.c_str(), static_cast<long long>(r.timestamp),
                          r.lon, r.lat, r.sog, r.cog);
            out << buf;
        }
    }
}

std::vector<Trajectory> read_canonical(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::vector<Trajectory> trajs;
    std::string line;
    if (!std::getline(in, line)) return trajs;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() < 6) throw std::runtime_error("malformed canonical record: " + line);
        AisRecord r;
        r.vessel_id = f[0];
        r.timestamp = std::strtoll(f[1].c_str(), nullptr, 10);
        r.lon = std::strtod(f[2].c_str(), nullptr);
        r.lat = std::strtod(f[3].c_str(), nullptr);
        r.sog = std::strtod(f[4].c_str(), nullptr);
        r.cog = std::strtod(f[5].c_str(), nullptr);
        if (trajs.empty() || trajs.back().vessel_id != r.vessel_id) {
            trajs.push_back(Trajectory{r.vessel_id, {}});
        }
        trajs.back().records.push_back(std::move(r));
    }
    return trajs;
}

std::vector<Trajectory> segment_trajectories(const std::vector<AisRecord>& records,
                                             double min_interval_s, double max_gap_s) {
    if (min_interval_s >= max_gap_s)
        throw std::invalid_argument("segment_trajectories: min_interval must be < max_gap");
    std::vector<Trajectory> out;
    Trajectory cur;
    auto flush = [&] {
        if (!cur.records.empty()) out.push_back(std::move(cur));
        cur = Trajectory{};
    };
    for (const auto& r : records) {
        if (cur.records.empty() || cur.vessel_id != r.vessel_id) {
            flush();
            cur.vessel_id = r.vessel_id;
            cur.records.push_back(r);
            continue;
        }
        const double gap = double(r.timestamp - cur.records.back().timestamp);
        if (gap < min_interval_s) continue;  // thin: keep the earlier record
        if (gap > max_gap_s) {
            flush();
            cur.vessel_id = r.vessel_id;
        }
        cur.records.push_back(r);
    }
    flush();
    return out;
}

std::vector<TrajectorySample> window_samples(const Trajectory& traj, int h, int p,
                                             int stride) {
    if (h < 1 || p < 1 || stride < 1)
        throw std::invalid_argument("window_samples: h, p, stride must be >= 1");
    std::vector<TrajectorySample> out;
    const int len = int(traj.records.size());
    for (int start = 0; start + h + p <= len; start += stride) {
        TrajectorySample s;
        s.history.assign(traj.records.begin() + start, traj.records.begin() + start + h);
        for (int i = 0; i < p; ++i) {
            const AisRecord& r = traj.records[std::size_t(start + h + i)];
            s.future_positions.push_back({r.lon, r.lat});
            s.future_timestamps.push_back(double(r.timestamp));
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::pair<Mat, NormStats> instance_normalize(const Mat& history, double epsilon) {
    if (history.rows() < 2)
        throw std::invalid_argument("instance_normalize: need h >= 2");
    NormStats stats;
    stats.epsilon = epsilon;
    stats.mean = history.colwise().mean();
    stats.std.resize(history.cols());
    for (Eigen::Index c = 0; c < history.cols(); ++c) {
        const double var =
            (history.col(c).array() - stats.mean(c)).square().mean();
        stats.std(c) = std::sqrt(var);
    }
    Mat norm(history.rows(), history.cols());
    for (Eigen::Index c = 0; c < history.cols(); ++c)
        norm.col(c) = (history.col(c).array() - stats.mean(c)) /
                      (stats.std(c) + epsilon);
    return {norm, stats};
}

Mat denormalize_positions(const Mat& pred, const NormStats& stats) {
    if (pred.cols() != 2)
        throw std::invalid_argument("denormalize_positions: expected 2 columns");
    Mat out(pred.rows(), 2);
    for (Eigen::Index c = 0; c < 2; ++c)
        out.col(c) = pred.col(c).array() * (stats.std(c) + stats.epsilon) + stats.mean(c);
    return out;
}

Mat denormalize(const Mat& pred, const NormStats& stats) {
    if (pred.cols() != stats.mean.size())
        throw std::invalid_argument("denormalize: channel count mismatch");
    Mat out(pred.rows(), pred.cols());
    for (Eigen::Index c = 0; c < pred.cols(); ++c)
        out.col(c) = pred.col(c).array() * (stats.std(c) + stats.epsilon) + stats.mean(c);
    return out;
}

SynthKind synth_kind_from_string(const std::string& s) {
    if (s == "straight") return SynthKind::Straight;
    if (s == "loop") return SynthKind::Loop;
    if (s == "zigzag") return SynthKind::Zigzag;
    if (s == "mixed") return SynthKind::Mixed;
    throw std::invalid_argument("unknown synthetic kind: " + s);
}

namespace {

std::vector<double> make_timestamps(int n, const IntervalModel& im,
                                    std::mt19937_64& rng) {
    std::vector<double> ts(static_cast<std::size_t>(n), 0.0);
    double t = 1'600'000'000.0;
    for (int i = 0; i < n; ++i) {
        ts[std::size_t(i)] = t;
        double dt = im.base_s;
        switch (im.kind) {
            case IntervalModel::Kind::Regular:
                break;
            case IntervalModel::Kind::Jittered: {
                std::uniform_real_distribution<double> u(-im.jitter_s, im.jitter_s);
                dt = std::max(1.0, im.base_s + u(rng));
                break;
            }
            case IntervalModel::Kind::Bursty: {
                // runs of dense sampling followed by sparse stretches
                std::uniform_real_distribution<double> u(0.0, 1.0);
                dt = (u(rng) < 0.25) ? im.base_s * 4.0 : im.base_s * 0.5;
                break;
            }
        }
        t += dt;
    }
    return ts;
}

void fill_sog_cog(Trajectory& traj) {
    const int n = int(traj.records.size());
    for (int i = 0; i < n; ++i) {
        const int j = (i + 1 < n) ? i : i - 1;
        const AisRecord& a = traj.records[std::size_t(j)];
        const AisRecord& b = traj.records[std::size_t(j + 1)];
        const double dt = double(b.timestamp - a.timestamp);
        const double mps =
            kinematics::haversine_m({a.lon, a.lat}, {b.lon, b.lat}) / std::max(dt, 1.0);
        traj.records[std::size_t(i)].sog = mps * 1.9438444924406046;  // m/s to knots
        double heading = std::atan2((b.lon - a.lon) *
                                        std::cos(a.lat * M_PI / 180.0),
                                    b.lat - a.lat) *
                         180.0 / M_PI;
        if (heading < 0.0) heading += 360.0;
        traj.records[std::size_t(i)].cog = std::fmod(heading, 360.0);
    }
}

}  // namespace

Trajectory synth_trajectory(SynthKind kind, int n, double noise_deg,
                            std::uint64_t seed, const IntervalModel& intervals) {
    if (n < 2) throw std::invalid_argument("synth_trajectory: need n >= 2");
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> ulat(25.0, 58.0);
    std::uniform_real_distribution<double> ulon(-75.0, 10.0);
    std::uniform_real_distribution<double> u01(0.0, 1.0);

    const double lat0 = ulat(rng);
    const double lon0 = ulon(rng);
    auto ts = make_timestamps(n, intervals, rng);
    // stored timestamps are whole seconds; generate positions from the same
    // values so kinematics derived from the records are exact
    for (double& t : ts) t = std::floor(t);
    const double t0 = ts.front();

    SynthKind actual = kind;
    if (kind == SynthKind::Mixed)
        actual = (u01(rng) < 0.5) ? SynthKind::Loop : SynthKind::Zigzag;

    Trajectory traj;
    traj.vessel_id = "SYN" + std::to_string(seed);
    traj.records.resize(std::size_t(n));

    switch (actual) {
        case SynthKind::Straight: {
            // pure east-west motion at fixed latitude keeps physical velocity
            // constant under irregular sampling
            const double speed_mps = 2.0 + 8.0 * u01(rng);
            const double sgn = u01(rng) < 0.5 ? 1.0 : -1.0;
            const double deg_per_s = sgn * speed_mps /
                                     (kMetersPerDegree * std::cos(lat0 * M_PI / 180.0));
            for (int i = 0; i < n; ++i) {
                traj.records[std::size_t(i)].lon = lon0 + deg_per_s * (ts[std::size_t(i)] - t0);
                traj.records[std::size_t(i)].lat = lat0;
            }
            break;
        }
        case SynthKind::Loop: {
            const double radius = 0.006 + 0.014 * u01(rng);
            const double deg_per_step = 5.0 + 6.0 * u01(rng);  // angular advance
            const double omega = deg_per_step * (M_PI / 180.0) / intervals.base_s;
            const double phase = 2.0 * M_PI * u01(rng);
            const double sgn = u01(rng) < 0.5 ? 1.0 : -1.0;
            for (int i = 0; i < n; ++i) {
                const double th = phase + sgn * omega * (ts[std::size_t(i)] - t0);
                traj.records[std::size_t(i)].lon = lon0 + radius * std::cos(th);
                traj.records[std::size_t(i)].lat = lat0 + radius * std::sin(th);
            }
            break;
        }
        case SynthKind::Zigzag: {
            const double step = 0.0010 + 0.0015 * u01(rng);
            const double base_heading = 2.0 * M_PI * u01(rng);
            const double swing = (M_PI / 3.0) + (M_PI / 3.0) * u01(rng);
            const int seg = 4 + int(u01(rng) * 5.0);
            double lon = lon0, lat = lat0;
            for (int i = 0; i < n; ++i) {
                traj.records[std::size_t(i)].lon = lon;
                traj.records[std::size_t(i)].lat = lat;
                const int leg = (i / seg) % 2;
                const double heading = base_heading + (leg == 0 ? swing : -swing);
                // step lengths alternate so consecutive distances are uneven
                const double len = step * (i % 2 == 0 ? 1.0 : 2.5);
                lon += len * std::cos(heading);
                lat += len * std::sin(heading);
            }
            break;
        }
        case SynthKind::Mixed:
            break;  // resolved above
    }

    if (noise_deg > 0.0) {
        std::uniform_real_distribution<double> un(-noise_deg, noise_deg);
        for (auto& r : traj.records) {
            r.lon += un(rng);
            r.lat += un(rng);
        }
    }
    for (int i = 0; i < n; ++i)
        traj.records[std::size_t(i)].timestamp = std::int64_t(ts[std::size_t(i)]);
    fill_sog_cog(traj);
    return traj;
}

}  // namespace maker::data
