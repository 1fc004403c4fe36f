#include "mompc/track.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mompc/errors.hpp"
#include "mompc/key_value.hpp"

namespace mompc {

Track::Track(std::vector<SpeedLimitSegment> segments, std::vector<double> stops)
    : segments_(std::move(segments)), stops_(std::move(stops)) {
    if (segments_.empty()) {
        throw ConfigError("track has no speed-limit segments");
    }
    std::sort(segments_.begin(), segments_.end(), [](auto& a, auto& b) { return a.start < b.start; });
    double expected = 0.0;
    for (const auto& s : segments_) {
        if (std::abs(s.start - expected) > 1e-9) {
            throw ConfigError("track segments must be contiguous from 0; gap or overlap at " + format_decimal(expected) + " m");
        }
        if (!(s.end > s.start)) {
            throw ConfigError("track segment ending at " + format_decimal(s.end) + " m is empty");
        }
        if (!(s.vmax > 0.0)) {
            throw ConfigError("speed limits must be positive");
        }
        expected = s.end;
    }
    std::sort(stops_.begin(), stops_.end());
    for (double s : stops_) {
        if (s < 0.0 || s > length()) {
            throw ConfigError("stop at " + format_decimal(s) + " m lies outside the track");
        }
    }
}

double Track::vmax_at(double p) const {
    for (const auto& s : segments_) {
        if (p < s.end) {
            return s.vmax;
        }
    }
    return segments_.back().vmax;
}

double Track::min_limit(double from, double to) const {
    double v = vmax_at(from);
    for (const auto& s : segments_) {
        if (s.start <= to && s.end > from) {
            v = std::min(v, s.vmax);
        }
    }
    return v;
}

double Track::max_limit(double from, double to) const {
    double v = vmax_at(from);
    for (const auto& s : segments_) {
        if (s.start <= to && s.end > from) {
            v = std::max(v, s.vmax);
        }
    }
    return v;
}

std::optional<double> Track::next_drop(double p, double within) const {
    const double current = vmax_at(p);
    for (const auto& s : segments_) {
        if (s.start > p && s.start <= p + within && s.start < length() && s.vmax < current) {
            return s.start;
        }
    }
    return std::nullopt;
}

Track parse_track(std::istream& in) {
    std::vector<SpeedLimitSegment> segments;
    std::vector<double> stops;
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string line = raw.substr(0, raw.find('#'));
        std::istringstream ls(line);
        std::vector<std::string> t;
        for (std::string w; ls >> w;) {
            t.push_back(w);
        }
        if (t.empty()) {
            continue;
        }
        if (t[0] == "limit" && t.size() == 4) {
            segments.push_back({parse_number(t[1], line_no), parse_number(t[2], line_no), parse_number(t[3], line_no)});
        } else if (t[0] == "stop" && t.size() == 2) {
            stops.push_back(parse_number(t[1], line_no));
        } else {
            throw FormatError(line_no, "expected 'limit <start> <end> <vmax>' or 'stop <pos>'");
        }
    }
    try {
        return Track(std::move(segments), std::move(stops));
    } catch (const ConfigError& e) {
        throw FormatError(line_no, e.what());
    }
}

Track load_track(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open track file: " + path);
    }
    return parse_track(in);
}

void save_track(const Track& track, std::ostream& out) {
    for (const auto& s : track.segments()) {
        out << "limit " << format_decimal(s.start) << ' ' << format_decimal(s.end) << ' ' << format_decimal(s.vmax) << '\n';
    }
    for (double s : track.stops()) {
        out << "stop " << format_decimal(s) << '\n';
    }
}

}  // namespace mompc
