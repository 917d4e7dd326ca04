#pragma once

#include <charconv>
#include <cstdint>
#include <optional>
#include <string_view>

namespace mtcorr::detail {

inline auto trim(std::string_view s) -> std::string_view {
    auto const b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos)
        return {};
    auto const e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline auto parse_u64(std::string_view s) -> std::optional<std::uint64_t> {
    std::uint64_t v = 0;
    auto const *end = s.data() + s.size();
    auto const [ptr, ec] = std::from_chars(s.data(), end, v);
    if (s.empty() || ec != std::errc{} || ptr != end)
        return std::nullopt;
    return v;
}

} // namespace mtcorr::detail
