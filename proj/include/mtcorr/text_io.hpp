#pragma once

// Plain-text artifacts: correlogram tables and key=value reports.

#include "detail/parse.hpp"
#include "errors.hpp"
#include "multitau.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace mtcorr {

/// Round-trippable decimal form of a double.
[[nodiscard]] inline auto format_double(double v) -> std::string {
    if (std::isnan(v))
        return "nan";
    std::array<char, 32> buf{};
    std::snprintf(buf.data(), buf.size(), "%.17g", v);
    return buf.data();
}

namespace detail {

inline auto parse_double(std::string_view s) -> std::optional<double> {
    if (s == "nan")
        return std::numeric_limits<double>::quiet_NaN();
    double v = 0;
    auto const *end = s.data() + s.size();
    auto const [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc{} || ptr != end)
        return std::nullopt;
    return v;
}

inline auto split_ws(std::string_view line) -> std::vector<std::string_view> {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' ||
                                   line[i] == '\r' || line[i] == ','))
            ++i;
        auto const b = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t' &&
               line[i] != '\r' && line[i] != ',')
            ++i;
        if (i > b)
            out.push_back(line.substr(b, i - b));
    }
    return out;
}

} // namespace detail

/// Writes the correlogram table. `provenance` lines are emitted as extra
/// '#' header lines.
inline void write_correlogram(std::ostream &os, correlogram const &cg,
                              std::vector<std::string> const &provenance = {}) {
    auto const &c = cg.config;
    os << "# mtcorr correlogram\n";
    os << "# config S=" << c.num_blocks << " P=" << c.channels_per_block
       << " P0=" << c.first_block_channels
       << " dt0=" << format_double(c.base_sample_period)
       << " n=" << c.dilation << '\n';
    os << "# total_samples=" << cg.total_samples << '\n';
    for (auto const &p : provenance)
        os << "# " << p << '\n';
    os << "# lag_seconds g_normalized raw_sum direct_monitor delayed_monitor "
          "update_count\n";
    for (auto const &ch : cg.channels) {
        os << format_double(ch.lag) << ' '
           << (ch.g ? format_double(*ch.g) : std::string("nan")) << ' '
           << ch.raw_sum << ' ' << ch.direct_monitor << ' '
           << ch.delayed_monitor << ' ' << ch.update_count << '\n';
    }
}

[[nodiscard]] inline auto read_correlogram(std::istream &is) -> correlogram {
    correlogram cg;
    bool have_config = false;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::string_view body = line;
        auto const tok = detail::split_ws(body);
        if (tok.empty())
            continue;
        if (tok.front().front() == '#') {
            if (tok.size() >= 2 && tok[0] == "#" && tok[1] == "config") {
                for (std::size_t k = 2; k < tok.size(); ++k) {
                    auto const eq = tok[k].find('=');
                    if (eq == std::string_view::npos)
                        continue;
                    auto const key = tok[k].substr(0, eq);
                    auto const val = tok[k].substr(eq + 1);
                    auto const u = detail::parse_u64(val);
                    if (key == "dt0") {
                        auto const d = detail::parse_double(val);
                        if (!d)
                            throw parse_error("bad dt0", lineno);
                        cg.config.base_sample_period = *d;
                        continue;
                    }
                    if (!u)
                        throw parse_error("bad config value '" +
                                              std::string(tok[k]) + "'",
                                          lineno);
                    if (key == "S")
                        cg.config.num_blocks = *u;
                    else if (key == "P")
                        cg.config.channels_per_block = *u;
                    else if (key == "P0")
                        cg.config.first_block_channels = *u;
                    else if (key == "n")
                        cg.config.dilation = *u;
                }
                have_config = true;
            } else if (tok.size() >= 2 && tok[0] == "#" &&
                       tok[1].substr(0, 14) == "total_samples=") {
                auto const u = detail::parse_u64(tok[1].substr(14));
                if (!u)
                    throw parse_error("bad total_samples", lineno);
                cg.total_samples = *u;
            }
            continue;
        }
        if (tok.size() != 6)
            throw parse_error("expected 6 columns, found " +
                                  std::to_string(tok.size()),
                              lineno);
        channel_record ch;
        auto const lag = detail::parse_double(tok[0]);
        auto const g = detail::parse_double(tok[1]);
        auto const raw = detail::parse_u64(tok[2]);
        auto const dm = detail::parse_u64(tok[3]);
        auto const em = detail::parse_u64(tok[4]);
        auto const m = detail::parse_u64(tok[5]);
        if (!lag || !g || !raw || !dm || !em || !m)
            throw parse_error("malformed correlogram row", lineno);
        ch.lag = *lag;
        if (!std::isnan(*g))
            ch.g = *g;
        ch.raw_sum = *raw;
        ch.direct_monitor = *dm;
        ch.delayed_monitor = *em;
        ch.update_count = *m;
        if (!cg.channels.empty() && !(ch.lag > cg.channels.back().lag))
            throw parse_error("lags not strictly increasing", lineno);
        cg.channels.push_back(ch);
    }
    if (have_config) {
        auto const sched = lag_schedule(cg.config);
        if (sched.size() == cg.channels.size())
            for (std::size_t k = 0; k < sched.size(); ++k) {
                cg.channels[k].block = sched[k].block;
                cg.channels[k].delay = sched[k].delay;
                cg.channels[k].lag_samples = sched[k].lag_samples;
            }
    }
    return cg;
}

/// Ordered key=value report.
class kv_report {
    std::vector<std::pair<std::string, std::string>> items_;

  public:
    void set(std::string key, std::string value) {
        for (auto &[k, v] : items_)
            if (k == key) {
                v = std::move(value);
                return;
            }
        items_.emplace_back(std::move(key), std::move(value));
    }
    void set(std::string key, double value) {
        set(std::move(key), format_double(value));
    }
    void set(std::string key, char const *value) {
        set(std::move(key), std::string(value));
    }
    template <typename I>
        requires std::is_integral_v<I>
    void set(std::string key, I value) {
        set(std::move(key), std::to_string(value));
    }

    [[nodiscard]] auto get(std::string_view key) const
        -> std::optional<std::string> {
        for (auto const &[k, v] : items_)
            if (k == key)
                return v;
        return std::nullopt;
    }

    [[nodiscard]] auto number(std::string_view key) const -> double {
        auto const v = get(key);
        if (!v)
            throw parse_error("missing key '" + std::string(key) + "'");
        auto const d = detail::parse_double(*v);
        if (!d)
            throw parse_error("key '" + std::string(key) +
                              "' is not a number: '" + *v + "'");
        return *d;
    }

    [[nodiscard]] auto items() const
        -> std::vector<std::pair<std::string, std::string>> const & {
        return items_;
    }

    void write(std::ostream &os) const {
        for (auto const &[k, v] : items_)
            os << k << '=' << v << '\n';
    }

    static auto read(std::istream &is) -> kv_report {
        kv_report r;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            auto const body = detail::trim(line);
            if (body.empty() || body.front() == '#')
                continue;
            auto const eq = body.find('=');
            if (eq == std::string_view::npos || eq == 0)
                throw parse_error("expected key=value", lineno);
            r.set(std::string(detail::trim(body.substr(0, eq))),
                  std::string(detail::trim(body.substr(eq + 1))));
        }
        return r;
    }
};

} // namespace mtcorr
