#pragma once

// Photon arrival streams at the 800 MHz counter resolution.
//
// All positions are integer ticks of 1.25 ns (10 ns / 8). Conversion to
// physical units happens only at reporting boundaries, through the helpers
// below, so no fractional scaling ever touches stored data.

#include "errors.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mtcorr {

/// Ticks per 10 ns base sample.
inline constexpr std::uint64_t ticks_per_base_sample = 8;

/// Minimum separation of two detected events, set by the 10 ns detector
/// output pulse width.
inline constexpr std::uint64_t min_event_gap_ticks = 8;

/// One tick is exactly 1250 ps.
inline constexpr std::uint64_t picoseconds_per_tick = 1250;

inline constexpr double seconds_per_tick = 1.25e-9;

/// Exact physical time of a tick position, in picoseconds.
[[nodiscard]] constexpr auto tick_to_picoseconds(std::uint64_t ticks)
    -> std::uint64_t {
    return ticks * picoseconds_per_tick;
}

/// Physical time in nanoseconds (tick x 1.25), converted once.
[[nodiscard]] constexpr auto tick_to_nanoseconds(std::uint64_t ticks)
    -> double {
    return static_cast<double>(tick_to_picoseconds(ticks)) / 1000.0;
}

[[nodiscard]] constexpr auto tick_to_seconds(std::uint64_t ticks) -> double {
    return static_cast<double>(tick_to_picoseconds(ticks)) * 1e-12;
}

/// Detected events in tick units over an explicit observation window
/// [0, duration).
struct photon_stream {
    std::vector<std::uint64_t> events;
    std::uint64_t duration = 0;

    friend auto operator==(photon_stream const &,
                           photon_stream const &) -> bool = default;
};

/// Raw counter output: clock cycles between consecutive events. The first
/// entry is measured from stream start.
struct interval_record {
    std::vector<std::uint64_t> raw_intervals;

    friend auto operator==(interval_record const &,
                           interval_record const &) -> bool = default;
};

/// Photon counts per fixed sampling interval.
struct sample_series {
    std::vector<std::uint64_t> counts;
    double sample_period = 1e-8; // seconds

    friend auto operator==(sample_series const &,
                           sample_series const &) -> bool = default;
};

/// Throws stream_error unless events are strictly increasing with gaps of at
/// least eight ticks and all lie inside the observation window.
inline void validate(photon_stream const &stream) {
    auto const &ev = stream.events;
    for (std::size_t k = 0; k < ev.size(); ++k) {
        if (ev[k] >= stream.duration)
            throw stream_error("event " + std::to_string(k) + " at tick " +
                               std::to_string(ev[k]) +
                               " lies outside duration " +
                               std::to_string(stream.duration));
        if (k > 0) {
            if (ev[k] <= ev[k - 1])
                throw stream_error("events not strictly increasing at index " +
                                   std::to_string(k));
            if (ev[k] - ev[k - 1] < min_event_gap_ticks)
                throw stream_error("inter-event gap " +
                                   std::to_string(ev[k] - ev[k - 1]) +
                                   " ticks below minimum at index " +
                                   std::to_string(k));
        }
    }
}

[[nodiscard]] inline auto encode_intervals(photon_stream const &stream)
    -> interval_record {
    validate(stream);
    interval_record rec;
    rec.raw_intervals.reserve(stream.events.size());
    std::uint64_t prev = 0;
    for (auto const t : stream.events) {
        rec.raw_intervals.push_back(t - prev);
        prev = t;
    }
    return rec;
}

/// Prefix-sums the counter output back into tick positions. The window is
/// not part of the record; callers supply it (defaults to one tick past the
/// last event).
[[nodiscard]] inline auto decode_intervals(interval_record const &record,
                                           std::uint64_t duration = 0)
    -> photon_stream {
    photon_stream out;
    out.events.reserve(record.raw_intervals.size());
    std::uint64_t t = 0;
    for (std::size_t k = 0; k < record.raw_intervals.size(); ++k) {
        auto const dt = record.raw_intervals[k];
        if (k > 0 && dt == 0)
            throw stream_error("corrupt interval record: zero interval at "
                               "position " +
                               std::to_string(k));
        if (k > 0 && dt < min_event_gap_ticks)
            throw stream_error("corrupt interval record: interval " +
                               std::to_string(dt) +
                               " below minimum gap at position " +
                               std::to_string(k));
        if (t + dt < t)
            throw stream_error("interval record overflows 64-bit ticks");
        t += dt;
        out.events.push_back(t);
    }
    out.duration = duration != 0 ? duration
                                 : (out.events.empty() ? 0 : t + 1);
    validate(out);
    return out;
}

/// Counts events per frame of `period_ticks`. The series covers
/// ceil(duration / period) frames.
[[nodiscard]] inline auto bin_to_samples(photon_stream const &stream,
                                         std::uint64_t period_ticks)
    -> sample_series {
    if (period_ticks == 0)
        throw config_error("sample period must be at least one tick");
    validate(stream);
    sample_series out;
    out.sample_period =
        static_cast<double>(period_ticks) * seconds_per_tick;
    out.counts.assign((stream.duration + period_ticks - 1) / period_ticks, 0);
    for (auto const t : stream.events)
        ++out.counts[t / period_ticks];
    return out;
}

} // namespace mtcorr
