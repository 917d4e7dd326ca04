#pragma once

// Brute-force reference correlator. Holds the whole series in memory and
// costs O(N * J); it exists to check the streaming engine.

#include "errors.hpp"
#include "multitau.hpp"
#include "photon_events.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace mtcorr {

/// Lag-j sums of x(i) * x(i + j) over the N - j available pairs, with the
/// plain 1/(N - j) estimator alongside.
struct direct_correlogram {
    std::vector<std::uint64_t> lags;
    std::vector<std::uint64_t> sums;
    std::vector<std::uint64_t> terms;
    std::vector<double> normalized;
};

/// One lag of the direct correlator with the monitors needed for symmetric
/// normalization.
struct direct_channel {
    std::uint64_t lag = 0;
    std::uint64_t raw_sum = 0;
    std::uint64_t terms = 0;
    std::uint64_t direct_monitor = 0;  // sum of x(i) for i in [lag, N)
    std::uint64_t delayed_monitor = 0; // sum of x(i) for i in [0, N - lag)

    [[nodiscard]] auto symmetric() const -> std::optional<double> {
        return normalize_symmetric(raw_sum, direct_monitor, delayed_monitor,
                                   terms);
    }
};

[[nodiscard]] inline auto direct_lag(std::vector<std::uint64_t> const &x,
                                     std::uint64_t lag) -> direct_channel {
    direct_channel out;
    out.lag = lag;
    auto const n = static_cast<std::uint64_t>(x.size());
    if (lag >= n)
        return out;
    out.terms = n - lag;
    for (std::uint64_t i = lag; i < n; ++i) {
        out.raw_sum = detail::checked_add(
            out.raw_sum,
            detail::checked_mul(x[i], x[i - lag], "direct product overflow"),
            "direct sum overflow");
        out.direct_monitor += x[i];
        out.delayed_monitor += x[i - lag];
    }
    return out;
}

[[nodiscard]] inline auto direct_correlate(sample_series const &series,
                                           std::uint64_t max_lag)
    -> direct_correlogram {
    auto const n = static_cast<std::uint64_t>(series.counts.size());
    if (max_lag >= n)
        throw config_error("max_lag " + std::to_string(max_lag) +
                           " needs more than " + std::to_string(n) +
                           " samples");
    direct_correlogram out;
    for (std::uint64_t j = 1; j <= max_lag; ++j) {
        auto const ch = direct_lag(series.counts, j);
        out.lags.push_back(j);
        out.sums.push_back(ch.raw_sum);
        out.terms.push_back(ch.terms);
        out.normalized.push_back(static_cast<double>(ch.raw_sum) /
                                 static_cast<double>(ch.terms));
    }
    return out;
}

/// Group sums of `factor` consecutive samples; a trailing partial group is
/// dropped.
[[nodiscard]] inline auto coarsen(sample_series const &series,
                                  std::uint64_t factor) -> sample_series {
    if (factor == 0)
        throw config_error("coarsening factor must be positive");
    sample_series out;
    out.sample_period = series.sample_period * static_cast<double>(factor);
    auto const groups = series.counts.size() / factor;
    out.counts.resize(groups, 0);
    for (std::size_t g = 0; g < groups; ++g)
        for (std::uint64_t k = 0; k < factor; ++k)
            out.counts[g] += series.counts[g * factor + k];
    return out;
}

struct bias_entry {
    std::size_t block = 0;
    std::uint64_t delay = 0;
    std::uint64_t lag_samples = 0;
    double lag = 0;
    double g_multitau = 0;
    double g_direct = 0;
    double bias = 0; // g_multitau - g_direct
};

/// Runs the engine over `series` and compares every defined channel with
/// the direct correlator at the same physical lag on the uncoarsened
/// series, both symmetrically normalized. Channels undefined on either side
/// are omitted.
[[nodiscard]] inline auto averaging_bias(sample_series const &series,
                                         correlator_config const &cfg)
    -> std::vector<bias_entry> {
    multitau_engine engine(cfg);
    engine.arm();
    engine.start();
    for (auto const c : series.counts)
        engine.push_sample(c);
    engine.stop();
    auto const cg = engine.snapshot();

    std::vector<bias_entry> out;
    for (auto const &ch : cg.channels) {
        if (!ch.g)
            continue;
        auto const direct = direct_lag(series.counts, ch.lag_samples);
        auto const gd = direct.symmetric();
        if (!gd)
            continue;
        bias_entry e;
        e.block = ch.block;
        e.delay = ch.delay;
        e.lag_samples = ch.lag_samples;
        e.lag = ch.lag;
        e.g_multitau = *ch.g;
        e.g_direct = *gd;
        e.bias = e.g_multitau - e.g_direct;
        out.push_back(e);
    }
    return out;
}

} // namespace mtcorr
