#pragma once

// Streaming multi-tau correlator.
//
// Block 0 runs at the base sample period; every further block sees the
// stream coarsened by `dilation` (group sums, never averages) and therefore
// runs at base_period * dilation^s. Each block keeps a short history of its
// own samples and one 64-bit accumulator per channel. Block 0 channels sit
// at delays 1..P0; block s >= 1 channels continue from the previous block's
// last lag in steps of its own sample period. With the defaults (35 blocks,
// 16 + 34 * 8 = 288 channels, 10 ns base, dilation 2) the lags run from
// 10 ns to 2^38 * 10 ns.
//
// Monitors are not accumulated per sample. For a block that has seen n
// samples y(0..n-1) and a channel at delay d:
//
//   update count    M = max(0, n - d)
//   direct monitor  D = sum_{i=d}^{n-1} y(i)   = total - (first d samples)
//   delayed monitor E = sum_{i=0}^{n-1-d} y(i) = total - (last d samples)
//
// so only the first and last max-delay samples of each block are kept. This
// lets runs of empty samples be skipped in O(1) per block.

#include "errors.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace mtcorr {

struct correlator_config {
    std::size_t num_blocks = 35;
    std::size_t channels_per_block = 8;
    std::size_t first_block_channels = 16;
    double base_sample_period = 1e-8; // seconds
    std::uint64_t dilation = 2;

    friend auto operator==(correlator_config const &,
                           correlator_config const &) -> bool = default;
};

/// Geometry of one block, in units of that block's own sample period.
struct block_layout {
    std::uint64_t first_delay = 1;  // delay of channel 0
    std::size_t channels = 0;
    std::uint64_t time_scale = 1;   // base samples per block sample
    std::uint64_t lag_offset = 0;   // previous block's last lag, base samples

    [[nodiscard]] auto max_delay() const -> std::uint64_t {
        return first_delay + channels - 1;
    }
};

namespace detail {

inline auto checked_mul(std::uint64_t a, std::uint64_t b,
                        char const *what) -> std::uint64_t {
    std::uint64_t r = 0;
    if (__builtin_mul_overflow(a, b, &r))
        throw accumulator_overflow(what);
    return r;
}

inline auto checked_add(std::uint64_t a, std::uint64_t b,
                        char const *what) -> std::uint64_t {
    std::uint64_t r = 0;
    if (__builtin_add_overflow(a, b, &r))
        throw accumulator_overflow(what);
    return r;
}

} // namespace detail

/// Per-block geometry. Throws config_error when the configuration cannot
/// place a block's first lag on that block's sample grid.
[[nodiscard]] inline auto block_layouts(correlator_config const &cfg)
    -> std::vector<block_layout> {
    if (cfg.num_blocks == 0)
        throw config_error("num_blocks must be positive");
    if (cfg.first_block_channels == 0)
        throw config_error("first_block_channels must be positive");
    if (cfg.num_blocks > 1 && cfg.channels_per_block == 0)
        throw config_error("channels_per_block must be positive");
    if (cfg.dilation < 2 && cfg.num_blocks > 1)
        throw config_error("dilation must be at least 2");
    if (!(cfg.base_sample_period > 0) ||
        !std::isfinite(cfg.base_sample_period))
        throw config_error("base_sample_period must be positive");

    std::vector<block_layout> out;
    out.reserve(cfg.num_blocks);
    block_layout b0;
    b0.first_delay = 1;
    b0.channels = cfg.first_block_channels;
    b0.time_scale = 1;
    b0.lag_offset = 0;
    out.push_back(b0);
    std::uint64_t last_lag = cfg.first_block_channels;
    std::uint64_t scale = 1;
    for (std::size_t s = 1; s < cfg.num_blocks; ++s) {
        std::uint64_t next_scale = 0;
        if (__builtin_mul_overflow(scale, cfg.dilation, &next_scale))
            throw config_error("block time scale overflows 64 bits");
        scale = next_scale;
        if (last_lag % scale != 0)
            throw config_error(
                "block " + std::to_string(s) +
                " cannot continue the lag schedule on its sample grid "
                "(requires first_block_channels = dilation * "
                "channels_per_block / (dilation - 1))");
        block_layout b;
        b.first_delay = last_lag / scale + 1;
        b.channels = cfg.channels_per_block;
        b.time_scale = scale;
        b.lag_offset = last_lag;
        std::uint64_t span = 0;
        if (__builtin_mul_overflow(scale, cfg.channels_per_block, &span) ||
            __builtin_add_overflow(last_lag, span, &last_lag))
            throw config_error("lag schedule overflows 64 bits");
        out.push_back(b);
    }
    return out;
}

inline void validate(correlator_config const &cfg) {
    static_cast<void>(block_layouts(cfg));
}

[[nodiscard]] inline auto total_channels(correlator_config const &cfg)
    -> std::size_t {
    return cfg.first_block_channels +
           (cfg.num_blocks - 1) * cfg.channels_per_block;
}

/// Sample period of block s in seconds.
[[nodiscard]] inline auto block_sample_period(correlator_config const &cfg,
                                              std::size_t s) -> double {
    return cfg.base_sample_period *
           std::pow(static_cast<double>(cfg.dilation),
                    static_cast<double>(s));
}

struct lag_entry {
    std::size_t block = 0;
    std::size_t channel = 0;       // index within the block
    std::uint64_t delay = 0;       // in block samples
    std::uint64_t lag_samples = 0; // in base samples
    double lag = 0;                // seconds
};

[[nodiscard]] inline auto lag_schedule(correlator_config const &cfg)
    -> std::vector<lag_entry> {
    auto const layouts = block_layouts(cfg);
    std::vector<lag_entry> out;
    out.reserve(total_channels(cfg));
    for (std::size_t s = 0; s < layouts.size(); ++s) {
        auto const &b = layouts[s];
        for (std::size_t c = 0; c < b.channels; ++c) {
            lag_entry e;
            e.block = s;
            e.channel = c;
            e.delay = b.first_delay + c;
            e.lag_samples = e.delay * b.time_scale;
            e.lag = static_cast<double>(e.lag_samples) *
                    cfg.base_sample_period;
            out.push_back(e);
        }
    }
    return out;
}

/// Symmetric monitor normalization g = G * M / (D * E).
///
/// The ratio is reduced exactly in 128-bit integers before the single
/// conversion to floating point, so scaling every input count by an integer
/// leaves the result bit-identical. Returns nullopt when any of M, D, E is
/// zero.
[[nodiscard]] inline auto normalize_symmetric(std::uint64_t raw_sum,
                                              std::uint64_t direct_monitor,
                                              std::uint64_t delayed_monitor,
                                              std::uint64_t update_count)
    -> std::optional<double> {
    if (update_count == 0 || direct_monitor == 0 || delayed_monitor == 0)
        return std::nullopt;
    using u128 = unsigned __int128;
    u128 num = static_cast<u128>(raw_sum) * update_count;
    u128 den = static_cast<u128>(direct_monitor) * delayed_monitor;
    u128 a = num;
    u128 b = den;
    while (b != 0) {
        u128 const r = a % b;
        a = b;
        b = r;
    }
    if (a > 1) {
        num /= a;
        den /= a;
    }
    return static_cast<double>(num) / static_cast<double>(den);
}

struct channel_record {
    std::size_t block = 0;
    std::uint64_t delay = 0;
    std::uint64_t lag_samples = 0;
    double lag = 0;
    std::uint64_t raw_sum = 0;
    std::uint64_t direct_monitor = 0;
    std::uint64_t delayed_monitor = 0;
    std::uint64_t update_count = 0;
    std::optional<double> g;
};

struct correlogram {
    correlator_config config;
    std::uint64_t total_samples = 0;
    std::vector<channel_record> channels;
};

/// State of one correlator block.
struct block_state {
    block_layout layout;
    std::vector<std::uint64_t> history; // ring of the last max_delay samples
    std::size_t head = 0;               // slot of the most recent sample
    std::vector<std::uint64_t> first;   // the first max_delay samples
    std::vector<std::uint64_t> accumulators;
    std::uint64_t samples = 0;
    std::uint64_t direct_total = 0;
    std::uint64_t pending_sum = 0;   // partial group for the next block
    std::uint64_t cycle_counter = 0; // position within the clock-enable period

    explicit block_state(block_layout const &l)
        : layout(l), history(l.max_delay(), 0), first(l.max_delay(), 0),
          accumulators(l.channels, 0) {}

    /// Sample seen `d` samples before the next incoming one (d >= 1).
    [[nodiscard]] auto delayed(std::uint64_t d) const -> std::uint64_t {
        auto const n = history.size();
        return history[(head + n - static_cast<std::size_t>(d - 1)) % n];
    }

    [[nodiscard]] auto update_count(std::size_t ch) const -> std::uint64_t {
        auto const d = layout.first_delay + ch;
        return samples > d ? samples - d : 0;
    }

    [[nodiscard]] auto direct_monitor(std::size_t ch) const -> std::uint64_t {
        auto const d = layout.first_delay + ch;
        if (samples <= d)
            return 0;
        std::uint64_t head_sum = 0;
        for (std::uint64_t i = 0; i < d; ++i)
            head_sum += first[static_cast<std::size_t>(i)];
        return direct_total - head_sum;
    }

    [[nodiscard]] auto delayed_monitor(std::size_t ch) const
        -> std::uint64_t {
        auto const d = layout.first_delay + ch;
        if (samples <= d)
            return 0;
        std::uint64_t tail_sum = 0;
        for (std::uint64_t k = 1; k <= d; ++k)
            tail_sum += delayed(k);
        return direct_total - tail_sum;
    }

    void reset() {
        std::fill(history.begin(), history.end(), 0);
        std::fill(first.begin(), first.end(), 0);
        std::fill(accumulators.begin(), accumulators.end(), 0);
        head = 0;
        samples = 0;
        direct_total = 0;
        pending_sum = 0;
        cycle_counter = 0;
    }
};

enum class engine_phase { idle, ready, processing, done };

[[nodiscard]] inline auto to_string(engine_phase p) -> char const * {
    switch (p) {
    case engine_phase::idle:
        return "idle";
    case engine_phase::ready:
        return "ready";
    case engine_phase::processing:
        return "processing";
    case engine_phase::done:
        return "done";
    }
    return "?";
}

/// The streaming engine. Lifecycle: idle -> ready -> processing -> done;
/// clear() returns to idle from anywhere and zeroes every accumulator.
/// Single writer; not internally synchronized.
class multitau_engine {
    correlator_config cfg_;
    std::vector<block_state> blocks_;
    engine_phase phase_ = engine_phase::idle;
    std::uint64_t total_samples_ = 0;

    void require_processing(char const *op) const {
        if (phase_ != engine_phase::processing)
            throw lifecycle_error(std::string(op) + " not allowed in state " +
                                  to_string(phase_));
    }

    void transition(engine_phase from, engine_phase to, char const *op) {
        if (phase_ != from)
            throw lifecycle_error(std::string(op) + " not allowed in state " +
                                  to_string(phase_));
        phase_ = to;
    }

    void push_into(std::size_t s, std::uint64_t x) {
        auto &b = blocks_[s];
        if (x != 0) {
            auto const d0 = b.layout.first_delay;
            for (std::size_t c = 0; c < b.accumulators.size(); ++c) {
                auto const y = b.delayed(d0 + c);
                if (y == 0)
                    continue;
                b.accumulators[c] = detail::checked_add(
                    b.accumulators[c],
                    detail::checked_mul(x, y, "channel product overflow"),
                    "channel accumulator overflow");
            }
            b.direct_total = detail::checked_add(b.direct_total, x,
                                                 "monitor overflow");
        }
        if (b.samples < b.first.size())
            b.first[static_cast<std::size_t>(b.samples)] = x;
        b.head = (b.head + 1) % b.history.size();
        b.history[b.head] = x;
        ++b.samples;

        if (s + 1 < blocks_.size()) {
            b.pending_sum = detail::checked_add(b.pending_sum, x,
                                                "coarsened sample overflow");
            if (++b.cycle_counter == cfg_.dilation) {
                auto const y = b.pending_sum;
                b.pending_sum = 0;
                b.cycle_counter = 0;
                push_into(s + 1, y);
            }
        }
    }

    void push_zeros_into(std::size_t s, std::uint64_t run) {
        if (run == 0)
            return;
        auto &b = blocks_[s];
        auto const len = b.history.size();
        if (run >= len) {
            std::fill(b.history.begin(), b.history.end(), 0);
        } else {
            for (std::uint64_t k = 0; k < run; ++k) {
                b.head = (b.head + 1) % len;
                b.history[b.head] = 0;
            }
        }
        // `first` entries are zero until written, so nothing to record.
        b.samples += run;

        if (s + 1 >= blocks_.size())
            return;
        auto const n = cfg_.dilation;
        if (b.cycle_counter != 0) {
            auto const need = n - b.cycle_counter;
            if (run < need) {
                b.cycle_counter += run;
                return;
            }
            run -= need;
            auto const y = b.pending_sum;
            b.pending_sum = 0;
            b.cycle_counter = 0;
            if (y != 0)
                push_into(s + 1, y);
            else
                push_zeros_into(s + 1, 1);
        }
        push_zeros_into(s + 1, run / n);
        b.cycle_counter = run % n;
    }

  public:
    explicit multitau_engine(correlator_config cfg = {}) : cfg_(cfg) {
        for (auto const &l : block_layouts(cfg_))
            blocks_.emplace_back(l);
    }

    [[nodiscard]] auto config() const -> correlator_config const & {
        return cfg_;
    }
    [[nodiscard]] auto phase() const -> engine_phase { return phase_; }
    [[nodiscard]] auto total_samples() const -> std::uint64_t {
        return total_samples_;
    }
    [[nodiscard]] auto total_time() const -> double {
        return static_cast<double>(total_samples_) * cfg_.base_sample_period;
    }
    [[nodiscard]] auto blocks() const -> std::vector<block_state> const & {
        return blocks_;
    }

    /// Heap and inline footprint of the state; depends on config only.
    [[nodiscard]] auto state_bytes() const -> std::size_t {
        std::size_t n = sizeof(*this) +
                        blocks_.capacity() * sizeof(block_state);
        for (auto const &b : blocks_)
            n += (b.history.capacity() + b.first.capacity() +
                  b.accumulators.capacity()) *
                 sizeof(std::uint64_t);
        return n;
    }

    void arm() { transition(engine_phase::idle, engine_phase::ready, "arm"); }
    void start() {
        transition(engine_phase::ready, engine_phase::processing, "start");
    }
    void stop() {
        transition(engine_phase::processing, engine_phase::done, "stop");
    }
    void clear() {
        for (auto &b : blocks_)
            b.reset();
        total_samples_ = 0;
        phase_ = engine_phase::idle;
    }

    /// Feeds one base sample (photon count for one base period).
    void push_sample(std::uint64_t count) {
        require_processing("push_sample");
        if (count == 0) {
            push_zeros_into(0, 1);
        } else {
            push_into(0, count);
        }
        ++total_samples_;
    }

    /// Feeds `run` consecutive empty base samples.
    void push_zeros(std::uint64_t run) {
        require_processing("push_zeros");
        push_zeros_into(0, run);
        total_samples_ += run;
    }

    [[nodiscard]] auto snapshot() const -> correlogram {
        if (phase_ == engine_phase::idle || phase_ == engine_phase::ready)
            throw no_data_error(std::string("snapshot not available in state ") +
                                to_string(phase_));
        correlogram out;
        out.config = cfg_;
        out.total_samples = total_samples_;
        out.channels.reserve(total_channels(cfg_));
        for (std::size_t s = 0; s < blocks_.size(); ++s) {
            auto const &b = blocks_[s];
            for (std::size_t c = 0; c < b.accumulators.size(); ++c) {
                channel_record r;
                r.block = s;
                r.delay = b.layout.first_delay + c;
                r.lag_samples = r.delay * b.layout.time_scale;
                r.lag = static_cast<double>(r.lag_samples) *
                        cfg_.base_sample_period;
                r.raw_sum = b.accumulators[c];
                r.update_count = b.update_count(c);
                r.direct_monitor = b.direct_monitor(c);
                r.delayed_monitor = b.delayed_monitor(c);
                r.g = normalize_symmetric(r.raw_sum, r.direct_monitor,
                                          r.delayed_monitor, r.update_count);
                out.channels.push_back(r);
            }
        }
        return out;
    }
};

/// Bins tick-stamped events into base samples on the fly and feeds them to
/// an engine in processing state. Events must arrive in order.
class event_feeder {
    multitau_engine *engine_;
    std::uint64_t period_;
    std::uint64_t cursor_ = 0;  // index of the frame being filled
    std::uint64_t pending_ = 0; // events in that frame

  public:
    explicit event_feeder(multitau_engine &engine,
                          std::uint64_t period_ticks = 8)
        : engine_(&engine), period_(period_ticks) {
        if (period_ == 0)
            throw config_error("sample period must be at least one tick");
    }

    void add(std::uint64_t tick) {
        auto const frame = tick / period_;
        if (frame < cursor_)
            throw stream_error("events out of order");
        if (frame > cursor_) {
            engine_->push_sample(pending_);
            engine_->push_zeros(frame - cursor_ - 1);
            cursor_ = frame;
            pending_ = 0;
        }
        ++pending_;
    }

    /// Number of frames fully handed to the engine.
    [[nodiscard]] auto frames_pushed() const -> std::uint64_t {
        return cursor_;
    }

    /// Flushes through the end of the observation window,
    /// ceil(duration / period) frames in total.
    void finish(std::uint64_t duration_ticks) {
        auto const frames = (duration_ticks + period_ - 1) / period_;
        if (frames <= cursor_) {
            if (pending_ != 0 || frames < cursor_)
                throw stream_error("event beyond observation window");
            return;
        }
        engine_->push_sample(pending_);
        pending_ = 0;
        ++cursor_;
        engine_->push_zeros(frames - cursor_);
        cursor_ = frames;
    }
};

} // namespace mtcorr
