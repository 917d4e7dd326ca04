#include <mtcorr/dls_sim.hpp>
#include <mtcorr/photon_events.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace mtcorr;

namespace {

constexpr double deg = std::numbers::pi / 180;

auto params_530_30() -> experiment_params {
    experiment_params p;
    p.diameter = 530e-9;
    p.angle = 30 * deg;
    return p;
}

} // namespace

TEST(GroundTruth, AgreesWithExtendedPrecisionEvaluation) {
    auto const p = params_530_30();
    auto const g = ground_truth(p);
    long double const pi = std::numbers::pi_v<long double>;
    long double const kb = 1.380649e-23L;
    long double const d = kb * 298.15L / (3 * pi * 0.89e-3L * 530e-9L);
    long double const q =
        4 * pi * 1.332L / 532e-9L * std::sin(15 * pi / 180);
    long double const gamma = 2 * d * q * q;
    EXPECT_NEAR(g.diffusion, static_cast<double>(d), 1e-14 * g.diffusion);
    EXPECT_NEAR(g.q, static_cast<double>(q), 1e-14 * g.q);
    EXPECT_NEAR(g.decay_rate, static_cast<double>(gamma),
                1e-13 * g.decay_rate);
}

TEST(GroundTruth, ReferenceMagnitudes) {
    auto const g = ground_truth(params_530_30());
    EXPECT_NEAR(g.diffusion, 9.26e-13, 0.005e-13);
    EXPECT_NEAR(g.q, 8.14e6, 0.005e6);
    EXPECT_NEAR(g.decay_rate, 1.23e2, 0.005e2);
    EXPECT_NEAR(1 / g.decay_rate, 8e-3, 0.2e-3);
}

TEST(GroundTruth, SmallAngleLimit) {
    auto p = params_530_30();
    p.angle = 1e-9;
    auto const g = ground_truth(p);
    EXPECT_LT(g.q, 1e-1);
    EXPECT_LT(g.decay_rate, 1e-14);
}

TEST(GroundTruth, RejectsInvalidParameters) {
    auto p = params_530_30();
    p.angle = 0;
    EXPECT_THROW(static_cast<void>(ground_truth(p)), physics_error);
    p = params_530_30();
    p.angle = std::numbers::pi;
    EXPECT_THROW(static_cast<void>(ground_truth(p)), physics_error);
    p = params_530_30();
    p.viscosity = -1;
    EXPECT_THROW(static_cast<void>(ground_truth(p)), physics_error);
    p = params_530_30();
    p.coherence = 1.5;
    EXPECT_THROW(static_cast<void>(ground_truth(p)), physics_error);
    p = params_530_30();
    p.diameter = 0;
    EXPECT_THROW(static_cast<void>(ground_truth(p)), physics_error);
}

TEST(GenerateIntensity, RejectsUnstableRecurrence) {
    ground_truth_values t;
    t.decay_rate = -5;
    EXPECT_THROW(static_cast<void>(generate_intensity(t, 1, 1, 8, 10, 1)),
                 physics_error);
    t.decay_rate = 100;
    EXPECT_THROW(static_cast<void>(generate_intensity(t, 1, 1, 0, 10, 1)),
                 physics_error);
}

TEST(GenerateIntensity, DeterministicForSeed) {
    ground_truth_values t;
    t.decay_rate = 1e3;
    auto const a = generate_intensity(t, 0.8, 1, 8, 10000, 42);
    auto const b = generate_intensity(t, 0.8, 1, 8, 10000, 42);
    auto const c = generate_intensity(t, 0.8, 1, 8, 10000, 43);
    EXPECT_EQ(a.values, b.values);
    EXPECT_NE(a.values, c.values);
}

TEST(GenerateIntensity, FrozenFieldWhenGammaIsZero) {
    ground_truth_values t;
    t.decay_rate = 0;
    double const beta = 0.7;
    double m1 = 0, m2 = 0;
    constexpr int seeds = 20000;
    for (int s = 0; s < seeds; ++s) {
        auto const v =
            generate_intensity(t, beta, 1, 8, 16, static_cast<std::uint64_t>(s))
                .values;
        for (auto x : v)
            EXPECT_EQ(x, v.front());
        m1 += v.front();
        m2 += v.front() * v.front();
    }
    m1 /= seeds;
    m2 /= seeds;
    // Ensemble <I^2>/<I>^2 = 1 + beta; the per-seed estimate of <I^2> has
    // relative spread ~sqrt(20/seeds) for the exponential-like speckle.
    EXPECT_NEAR(m2 / (m1 * m1), 1 + beta, 5 * std::sqrt(20.0 / seeds));
}

TEST(GenerateIntensity, AutocorrelationMatchesSiegertForm) {
    ground_truth_values t;
    t.decay_rate = 1e-3 / 1e-8; // Gamma * dt = 1e-3
    constexpr std::size_t n = 10'000'000;
    auto const v = generate_intensity(t, 1.0, 1.0, 8, n, 7).values;

    // Batch-means estimate of the normalized ACF and its standard error.
    constexpr std::size_t batches = 25;
    constexpr std::size_t len = n / batches;
    for (std::size_t lag : {100u, 500u, 1000u, 2000u, 4000u}) {
        double sum = 0, sum2 = 0;
        for (std::size_t b = 0; b < batches; ++b) {
            double num = 0, d = 0, e = 0;
            auto const first = b * len;
            for (std::size_t i = first + lag; i < first + len; ++i) {
                num += v[i] * v[i - lag];
                d += v[i];
                e += v[i - lag];
            }
            double const m = static_cast<double>(len - lag);
            double const g = num * m / (d * e);
            sum += g;
            sum2 += g * g;
        }
        double const mean = sum / batches;
        double const var = (sum2 / batches - mean * mean) * batches /
                           (batches - 1);
        double const se = std::sqrt(var / batches);
        double const expect =
            1 + std::exp(-1e-3 * static_cast<double>(lag));
        EXPECT_LT(std::abs(mean - expect), 5 * se) << "lag " << lag;
        EXPECT_LT(se, 0.05);
    }
}

TEST(GeneratePhotons, ZeroIntensityGivesEmptyStream) {
    intensity_series s{std::vector<double>(1000, 0.0), 64};
    auto const r = generate_photons(s, 5e6, 1);
    EXPECT_TRUE(r.stream.events.empty());
    EXPECT_EQ(r.stream.duration, 64000u);
}

TEST(GeneratePhotons, ConstantIntensityHitsRate) {
    // 1 s at 5e6 counts/s: Bernoulli p = 0.05 on 1e8 base samples.
    intensity_series s{std::vector<double>(100000, 1.0), 8000};
    auto const r = generate_photons(s, 5e6, 3);
    double const n = 1e8, p = 0.05;
    double const sigma = std::sqrt(n * p * (1 - p));
    EXPECT_NEAR(static_cast<double>(r.stream.events.size()), n * p,
                5 * sigma);
    EXPECT_NO_THROW(validate(r.stream));
    EXPECT_EQ(r.diagnostics.events, r.stream.events.size());
    EXPECT_EQ(r.diagnostics.clipped_samples, 0u);
    // At p = 0.05 adjacent-sample pairs are common enough for the gap
    // constraint to bind on a few percent of events.
    EXPECT_GT(r.diagnostics.constrained_fraction(), 1e-3);
    EXPECT_TRUE(r.diagnostics.warn());
    auto const binned = bin_to_samples(r.stream, 8);
    for (auto c : binned.counts)
        ASSERT_LE(c, 1u);
}

TEST(GeneratePhotons, LowRateDoesNotWarn) {
    intensity_series s{std::vector<double>(10000, 1.0), 800};
    auto const r = generate_photons(s, 1e4, 4);
    EXPECT_FALSE(r.diagnostics.warn());
}

TEST(GeneratePhotons, ClippedProbabilityIsReported) {
    intensity_series s{{0.0, 50.0, 0.0}, 80};
    auto const r = generate_photons(s, 5e6, 5);
    EXPECT_EQ(r.diagnostics.clipped_samples, 10u);
    EXPECT_EQ(r.stream.events.size(), 10u);
    EXPECT_NO_THROW(validate(r.stream));
}

TEST(SimulatePhotons, StreamingMatchesComposedPipeline) {
    auto p = params_530_30();
    p.mean_count_rate = 2e6;
    auto const truth = ground_truth(p);
    constexpr std::uint64_t period = 8 * 256;
    constexpr std::size_t steps = 20000;
    auto const intensity =
        generate_intensity(truth, p.coherence, 1.0, period, steps, 99);
    auto const composed = generate_photons(intensity, p.mean_count_rate, 99);

    std::vector<std::uint64_t> streamed;
    auto const diag = simulate_photons(
        p, period * steps, 99,
        [&](std::uint64_t t) { streamed.push_back(t); }, period);
    EXPECT_EQ(streamed, composed.stream.events);
    EXPECT_EQ(diag.events, composed.diagnostics.events);
}

TEST(SimulatePhotons, RespectsWindowAndGap) {
    auto p = params_530_30();
    photon_stream s;
    s.duration = 8 * 100003 + 3; // not a whole number of samples
    static_cast<void>(simulate_photons(
        p, s.duration, 5, [&](std::uint64_t t) { s.events.push_back(t); }));
    EXPECT_FALSE(s.events.empty());
    EXPECT_NO_THROW(validate(s));
}

TEST(SimulatePhotons, DefaultIntensityStep) {
    EXPECT_EQ(default_intensity_period_ticks(123.0), 8u * 813);
    EXPECT_EQ(default_intensity_period_ticks(1e9), 8u);
    EXPECT_EQ(default_intensity_period_ticks(0.0), 8u * 4096);
    EXPECT_EQ(default_intensity_period_ticks(1.0), 8u * 4096);
}
