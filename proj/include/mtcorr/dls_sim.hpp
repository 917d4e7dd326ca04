#pragma once

// Synthetic dynamic-light-scattering data.
//
// Brownian sizing parameters -> (q, D, Gamma) -> a complex Gaussian field
// with first-order autoregressive dynamics -> intensity -> photon events by
// per-sample Bernoulli thinning at the base 10 ns rate.

#include "errors.hpp"
#include "photon_events.hpp"
#include "rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

namespace mtcorr {

inline constexpr double boltzmann = 1.380649e-23; // J/K

struct experiment_params {
    double temperature = 298.15;      // K
    double viscosity = 0.89e-3;       // Pa s
    double wavelength = 532e-9;       // m, in vacuo
    double medium_index = 1.332;      // water at 532 nm, 25 C
    double angle = std::numbers::pi / 6; // rad
    double diameter = 530e-9;         // m
    double mean_count_rate = 5e6;     // counts/s
    double coherence = 0.8;           // beta
};

inline void validate(experiment_params const &p) {
    auto positive = [](double v, char const *name) {
        if (!(v > 0) || !std::isfinite(v))
            throw physics_error(std::string(name) + " must be positive");
    };
    positive(p.temperature, "temperature");
    positive(p.viscosity, "viscosity");
    positive(p.wavelength, "wavelength");
    positive(p.medium_index, "medium refractive index");
    positive(p.diameter, "diameter");
    positive(p.mean_count_rate, "mean count rate");
    positive(p.coherence, "coherence factor");
    if (p.coherence > 1)
        throw physics_error("coherence factor must not exceed 1");
    if (!(p.angle > 0 && p.angle < std::numbers::pi))
        throw physics_error("scattering angle must lie in (0, pi)");
}

struct ground_truth_values {
    double q = 0;          // 1/m
    double diffusion = 0;  // m^2/s
    double decay_rate = 0; // 1/s, intensity ACF
};

[[nodiscard]] inline auto scattering_vector(experiment_params const &p)
    -> double {
    return 4 * std::numbers::pi * p.medium_index / p.wavelength *
           std::sin(p.angle / 2);
}

/// Stokes-Einstein diffusion coefficient for a sphere of diameter d.
[[nodiscard]] inline auto stokes_einstein_diffusion(double temperature,
                                                    double viscosity,
                                                    double diameter)
    -> double {
    return boltzmann * temperature /
           (3 * std::numbers::pi * viscosity * diameter);
}

[[nodiscard]] inline auto ground_truth(experiment_params const &p)
    -> ground_truth_values {
    validate(p);
    ground_truth_values g;
    g.q = scattering_vector(p);
    g.diffusion =
        stokes_einstein_diffusion(p.temperature, p.viscosity, p.diameter);
    g.decay_rate = 2 * g.diffusion * g.q * g.q;
    return g;
}

/// Relative intensity (mean 1) of a Gaussian speckle field whose intensity
/// ACF is 1 + beta * exp(-Gamma * tau). The field obeys
/// z[k+1] = a z[k] + sqrt(1 - a^2) w[k] with a = exp(-Gamma * dt / 2); beta
/// below 1 is realized by mixing in a constant intensity floor f with
/// (1 - f)^2 = beta.
class speckle_field {
    random_source rng_;
    double a_;
    double drive_;
    double floor_;
    double re_ = 0;
    double im_ = 0;

  public:
    speckle_field(double decay_rate, double coherence, double step_seconds,
                  std::uint64_t seed)
        : rng_(seed) {
        if (!(decay_rate >= 0) || !std::isfinite(decay_rate) ||
            !(step_seconds > 0))
            throw physics_error("field recurrence needs decay_rate >= 0 and "
                                "a positive step");
        if (!(coherence > 0 && coherence <= 1))
            throw physics_error("coherence factor must lie in (0, 1]");
        a_ = std::exp(-decay_rate * step_seconds / 2);
        if (!(a_ >= 0 && a_ <= 1))
            throw physics_error("unstable field recurrence coefficient");
        drive_ = std::sqrt(1 - a_ * a_);
        floor_ = 1 - std::sqrt(coherence);
        auto const [x, y] = rng_.normal_pair();
        re_ = x * std::numbers::sqrt2 / 2;
        im_ = y * std::numbers::sqrt2 / 2;
    }

    [[nodiscard]] auto coefficient() const -> double { return a_; }

    /// Current relative intensity, then advances the field by one step.
    auto next() -> double {
        double const speckle = re_ * re_ + im_ * im_;
        double const value = (1 - floor_) * speckle + floor_;
        auto const [x, y] = rng_.normal_pair();
        double const s = drive_ * std::numbers::sqrt2 / 2;
        re_ = a_ * re_ + s * x;
        im_ = a_ * im_ + s * y;
        return value;
    }
};

struct intensity_series {
    std::vector<double> values;
    std::uint64_t period_ticks = 8;
};

inline constexpr std::uint64_t field_stream_tag = 0x4649454c44ULL;  // FIELD
inline constexpr std::uint64_t photon_stream_tag = 0x50484f544fULL; // PHOTO

[[nodiscard]] inline auto generate_intensity(ground_truth_values const &truth,
                                             double coherence,
                                             double mean_intensity,
                                             std::uint64_t period_ticks,
                                             std::size_t num_samples,
                                             std::uint64_t seed)
    -> intensity_series {
    if (period_ticks == 0)
        throw physics_error("intensity sample period must be positive");
    speckle_field field(truth.decay_rate, coherence,
                        static_cast<double>(period_ticks) * seconds_per_tick,
                        mix_seed(seed ^ field_stream_tag));
    intensity_series out;
    out.period_ticks = period_ticks;
    out.values.reserve(num_samples);
    for (std::size_t k = 0; k < num_samples; ++k)
        out.values.push_back(mean_intensity * field.next());
    return out;
}

/// Intensity step used by the streaming simulator: Gamma * step <= 1e-3,
/// between one and 4096 base samples.
[[nodiscard]] inline auto default_intensity_period_ticks(double decay_rate)
    -> std::uint64_t {
    constexpr std::uint64_t max_samples = 4096;
    if (!(decay_rate > 0))
        return max_samples * ticks_per_base_sample;
    double const k = std::floor(1e-3 / (decay_rate * 1e-8));
    auto const samples = static_cast<std::uint64_t>(
        std::clamp(k, 1.0, static_cast<double>(max_samples)));
    return samples * ticks_per_base_sample;
}

struct photon_diagnostics {
    std::uint64_t events = 0;
    std::uint64_t gap_constrained = 0; // placement pushed by the 8-tick gap
    std::uint64_t dropped = 0;         // no legal tick left inside the window
    std::uint64_t clipped_samples = 0; // probability capped at 1

    [[nodiscard]] auto constrained_fraction() const -> double {
        return events == 0 ? 0.0
                           : static_cast<double>(gap_constrained + dropped) /
                                 static_cast<double>(events + dropped);
    }

    [[nodiscard]] auto warn(double threshold = 1e-3) const -> bool {
        return constrained_fraction() > threshold || clipped_samples > 0;
    }
};

/// Thins a piecewise-constant intensity into photon events, one Bernoulli
/// trial per 10 ns base sample, placing each photon on a uniformly chosen
/// tick of its sample that keeps the 8-tick gap.
class photon_emitter {
    random_source rng_;
    double rate_;
    std::uint64_t duration_;
    bool have_last_ = false;
    std::uint64_t last_ = 0;
    photon_diagnostics diag_;

    template <typename Sink> void place(std::uint64_t sample, Sink &sink) {
        std::uint64_t lo = sample * ticks_per_base_sample;
        std::uint64_t const hi =
            std::min(lo + ticks_per_base_sample - 1, duration_ - 1);
        if (have_last_ && last_ + min_event_gap_ticks > lo) {
            lo = last_ + min_event_gap_ticks;
            ++diag_.gap_constrained;
        }
        if (lo > hi) {
            ++diag_.dropped;
            return;
        }
        auto const t = lo + rng_.below(hi - lo + 1);
        have_last_ = true;
        last_ = t;
        ++diag_.events;
        sink(t);
    }

  public:
    photon_emitter(double mean_count_rate, std::uint64_t duration_ticks,
                   std::uint64_t seed)
        : rng_(mix_seed(seed ^ photon_stream_tag)), rate_(mean_count_rate),
          duration_(duration_ticks) {
        if (!(rate_ >= 0) || !std::isfinite(rate_))
            throw physics_error("count rate must be non-negative");
    }

    /// Emits photons for base samples [first, first + count) at relative
    /// intensity `intensity`.
    template <typename Sink>
    void segment(std::uint64_t first, std::uint64_t count, double intensity,
                 Sink &&sink) {
        double const base_seconds =
            static_cast<double>(ticks_per_base_sample) * seconds_per_tick;
        double p = intensity * rate_ * base_seconds;
        if (!(p > 0))
            return;
        if (p >= 1) {
            diag_.clipped_samples += count;
            for (std::uint64_t j = 0; j < count; ++j)
                place(first + j, sink);
            return;
        }
        double const log_q = std::log1p(-p);
        std::uint64_t j = 0;
        while (j < count) {
            double const skip = std::floor(std::log(rng_.uniform_open_zero()) /
                                           log_q);
            if (skip >= static_cast<double>(count - j))
                break;
            j += static_cast<std::uint64_t>(skip);
            place(first + j, sink);
            ++j;
        }
    }

    [[nodiscard]] auto diagnostics() const -> photon_diagnostics const & {
        return diag_;
    }
};

struct photon_result {
    photon_stream stream;
    photon_diagnostics diagnostics;
};

[[nodiscard]] inline auto generate_photons(intensity_series const &intensity,
                                           double mean_count_rate,
                                           std::uint64_t seed)
    -> photon_result {
    auto const period = intensity.period_ticks;
    if (period == 0 || period % ticks_per_base_sample != 0)
        throw physics_error("intensity period must be a whole number of "
                            "base samples");
    auto const per_step = period / ticks_per_base_sample;
    photon_result out;
    out.stream.duration =
        static_cast<std::uint64_t>(intensity.values.size()) * period;
    photon_emitter emitter(mean_count_rate, out.stream.duration, seed);
    auto sink = [&](std::uint64_t t) { out.stream.events.push_back(t); };
    for (std::size_t k = 0; k < intensity.values.size(); ++k)
        emitter.segment(k * per_step, per_step, intensity.values[k], sink);
    out.diagnostics = emitter.diagnostics();
    return out;
}

/// Streaming simulation of a whole experiment: events are handed to `sink`
/// in order and never stored. With the same seed and intensity period this
/// produces exactly generate_photons(generate_intensity(...)).
template <typename Sink>
auto simulate_photons(experiment_params const &params,
                      std::uint64_t duration_ticks, std::uint64_t seed,
                      Sink &&sink, std::uint64_t intensity_period_ticks = 0)
    -> photon_diagnostics {
    auto const truth = ground_truth(params);
    auto const period = intensity_period_ticks != 0
                            ? intensity_period_ticks
                            : default_intensity_period_ticks(truth.decay_rate);
    if (period % ticks_per_base_sample != 0)
        throw physics_error("intensity period must be a whole number of "
                            "base samples");
    speckle_field field(truth.decay_rate, params.coherence,
                        static_cast<double>(period) * seconds_per_tick,
                        mix_seed(seed ^ field_stream_tag));
    photon_emitter emitter(params.mean_count_rate, duration_ticks, seed);
    auto const per_step = period / ticks_per_base_sample;
    auto const total_samples =
        (duration_ticks + ticks_per_base_sample - 1) / ticks_per_base_sample;
    for (std::uint64_t first = 0; first < total_samples; first += per_step) {
        auto const count = std::min(per_step, total_samples - first);
        emitter.segment(first, count, field.next(), sink);
    }
    return emitter.diagnostics();
}

} // namespace mtcorr
