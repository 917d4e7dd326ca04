#pragma once

// Timestamp files.
//
// Text:   "# ticks=1.25ns duration=<N>" header, then one unsigned tick value
//         per line. Further '#' lines are comments.
// Binary: 16-byte header {"PHOT", u32 version = 1, u64 duration}, then
//         little-endian u64 ticks. All integers little-endian.

#include "detail/parse.hpp"
#include "errors.hpp"
#include "photon_events.hpp"

#include <array>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>

namespace mtcorr {

enum class timestamp_format { text, binary };

inline constexpr std::array<char, 4> binary_magic{'P', 'H', 'O', 'T'};
inline constexpr std::uint32_t binary_version = 1;

namespace detail {

inline void put_le(std::ostream &os, std::uint64_t v, int bytes) {
    std::array<char, 8> buf{};
    for (int i = 0; i < bytes; ++i)
        buf[static_cast<std::size_t>(i)] =
            static_cast<char>((v >> (8 * i)) & 0xffU);
    os.write(buf.data(), bytes);
}

inline auto get_le(std::istream &is, int bytes) -> std::optional<std::uint64_t> {
    std::array<unsigned char, 8> buf{};
    is.read(reinterpret_cast<char *>(buf.data()), bytes);
    if (is.gcount() == 0)
        return std::nullopt;
    if (is.gcount() != bytes)
        throw parse_error("truncated binary timestamp record");
    std::uint64_t v = 0;
    for (int i = bytes - 1; i >= 0; --i)
        v = (v << 8) | buf[static_cast<std::size_t>(i)];
    return v;
}

} // namespace detail

/// Incremental writer; events must be appended in order and are checked
/// against the stream invariants as they arrive.
class timestamp_writer {
    std::ostream *os_;
    timestamp_format fmt_;
    std::uint64_t duration_;
    std::optional<std::uint64_t> last_;

  public:
    timestamp_writer(std::ostream &os, timestamp_format fmt,
                     std::uint64_t duration,
                     std::string_view comment = {})
        : os_(&os), fmt_(fmt), duration_(duration) {
        if (fmt_ == timestamp_format::text) {
            *os_ << "# ticks=1.25ns duration=" << duration_ << '\n';
            std::string_view rest = comment;
            while (!rest.empty()) {
                auto const nl = rest.find('\n');
                *os_ << "# " << rest.substr(0, nl) << '\n';
                rest = nl == std::string_view::npos ? std::string_view{}
                                                    : rest.substr(nl + 1);
            }
        } else {
            os_->write(binary_magic.data(), binary_magic.size());
            detail::put_le(*os_, binary_version, 4);
            detail::put_le(*os_, duration_, 8);
        }
    }

    void write(std::uint64_t tick) {
        if (tick >= duration_)
            throw stream_error("event at tick " + std::to_string(tick) +
                               " outside duration");
        if (last_ && (tick <= *last_ || tick - *last_ < min_event_gap_ticks))
            throw stream_error("event at tick " + std::to_string(tick) +
                               " violates ordering or minimum gap");
        last_ = tick;
        if (fmt_ == timestamp_format::text)
            *os_ << tick << '\n';
        else
            detail::put_le(*os_, tick, 8);
    }
};

/// Incremental reader. The format is detected from the first bytes.
class timestamp_reader {
    std::istream *is_;
    timestamp_format fmt_ = timestamp_format::text;
    std::optional<std::uint64_t> duration_;
    std::optional<std::uint64_t> last_;
    std::size_t line_ = 0;
    std::optional<std::uint64_t> lookahead_;

    auto next_text() -> std::optional<std::uint64_t> {
        std::string line;
        while (std::getline(*is_, line)) {
            ++line_;
            auto const body = detail::trim(line);
            if (body.empty() || body.front() == '#')
                continue;
            auto const v = detail::parse_u64(body);
            if (!v)
                throw parse_error("not an unsigned tick value: '" +
                                      std::string(body) + "'",
                                  line_);
            return v;
        }
        return std::nullopt;
    }

    void check(std::uint64_t tick) {
        if (duration_ && tick >= *duration_)
            throw parse_error("event at tick " + std::to_string(tick) +
                                  " outside duration",
                              line_);
        if (last_ &&
            (tick <= *last_ || tick - *last_ < min_event_gap_ticks))
            throw parse_error("event at tick " + std::to_string(tick) +
                                  " violates ordering or minimum gap",
                              line_);
        last_ = tick;
    }

  public:
    explicit timestamp_reader(std::istream &is) : is_(&is) {
        auto const c = is_->peek();
        if (c == 'P') {
            std::array<char, 4> magic{};
            is_->read(magic.data(), magic.size());
            if (is_->gcount() != 4 || magic != binary_magic)
                throw parse_error("bad binary timestamp magic");
            auto const ver = detail::get_le(*is_, 4);
            if (!ver || *ver != binary_version)
                throw parse_error("unsupported binary timestamp version");
            auto const dur = detail::get_le(*is_, 8);
            if (!dur)
                throw parse_error("truncated binary timestamp header");
            fmt_ = timestamp_format::binary;
            duration_ = *dur;
            return;
        }
        // Text: header must be the first non-empty line if present.
        std::string line;
        while (std::getline(*is_, line)) {
            ++line_;
            auto const body = detail::trim(line);
            if (body.empty())
                continue;
            constexpr std::string_view tag = "# ticks=1.25ns duration=";
            if (body.substr(0, tag.size()) == tag) {
                auto const v = detail::parse_u64(body.substr(tag.size()));
                if (!v)
                    throw parse_error("bad duration in header", line_);
                duration_ = *v;
            } else if (body.front() != '#') {
                auto const v = detail::parse_u64(body);
                if (!v)
                    throw parse_error("not an unsigned tick value: '" +
                                          std::string(body) + "'",
                                      line_);
                check(*v);
                lookahead_ = *v;
            } else {
                continue;
            }
            break;
        }
    }

    [[nodiscard]] auto format() const -> timestamp_format { return fmt_; }

    /// Window from the header, if the file carried one.
    [[nodiscard]] auto duration() const -> std::optional<std::uint64_t> {
        return duration_;
    }

    /// Supplies a window when the header is absent, or overrides it.
    void set_duration(std::uint64_t d) { duration_ = d; }

    [[nodiscard]] auto line() const -> std::size_t { return line_; }

    auto next() -> std::optional<std::uint64_t> {
        if (lookahead_) {
            auto v = lookahead_;
            lookahead_.reset();
            if (duration_ && *v >= *duration_)
                throw parse_error("event at tick " + std::to_string(*v) +
                                      " outside duration",
                                  line_);
            return v;
        }
        std::optional<std::uint64_t> v;
        if (fmt_ == timestamp_format::text) {
            v = next_text();
        } else {
            ++line_;
            v = detail::get_le(*is_, 8);
        }
        if (v)
            check(*v);
        return v;
    }
};

inline void write_timestamps(std::ostream &os, photon_stream const &stream,
                             timestamp_format fmt = timestamp_format::text) {
    timestamp_writer w(os, fmt, stream.duration);
    for (auto const t : stream.events)
        w.write(t);
}

inline auto read_timestamps(std::istream &is,
                            std::optional<std::uint64_t> duration = {})
    -> photon_stream {
    timestamp_reader r(is);
    if (duration)
        r.set_duration(*duration);
    photon_stream out;
    while (auto t = r.next())
        out.events.push_back(*t);
    if (!r.duration())
        throw parse_error("timestamp file has no duration header and none "
                          "was supplied");
    out.duration = *r.duration();
    return out;
}

} // namespace mtcorr
