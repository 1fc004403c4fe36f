#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mompc {

struct SpeedLimitSegment {
    double start = 0.0;  // m
    double end = 0.0;    // m
    double vmax = 0.0;   // km/h

    friend bool operator==(const SpeedLimitSegment&, const SpeedLimitSegment&) = default;
};

/// Position-indexed speed limits and stop signs. Segments are half-open
/// [start, end) except the last, which includes the track end.
class Track {
public:
    Track() = default;
    /// Throws ConfigError unless segments are contiguous from 0, limits are
    /// positive and stops lie within [0, length].
    Track(std::vector<SpeedLimitSegment> segments, std::vector<double> stops);

    const std::vector<SpeedLimitSegment>& segments() const noexcept { return segments_; }
    /// Sorted ascending.
    const std::vector<double>& stops() const noexcept { return stops_; }
    double length() const noexcept { return segments_.empty() ? 0.0 : segments_.back().end; }

    double vmax_at(double p) const;
    /// Minimum / maximum limit over [from, to].
    double min_limit(double from, double to) const;
    double max_limit(double from, double to) const;
    /// First position in (p, p + within] where the limit falls below vmax_at(p).
    std::optional<double> next_drop(double p, double within) const;

    friend bool operator==(const Track&, const Track&) = default;

private:
    std::vector<SpeedLimitSegment> segments_;
    std::vector<double> stops_;
};

/// `limit <start_m> <end_m> <vmax_kmh>` and `stop <pos_m>` lines, '#' comments.
Track parse_track(std::istream& in);
Track load_track(const std::string& path);
void save_track(const Track& track, std::ostream& out);

}  // namespace mompc
