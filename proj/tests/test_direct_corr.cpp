#include <mtcorr/direct_corr.hpp>
#include <mtcorr/dls_sim.hpp>
#include <mtcorr/rng.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

using namespace mtcorr;

TEST(DirectCorrelate, HandEnumeration) {
    sample_series s{{1, 0, 1, 0, 1, 0}, 1e-8};
    auto const d = direct_correlate(s, 2);
    ASSERT_EQ(d.lags.size(), 2u);
    // Lag 2 pairs (0,2) (1,3) (2,4) (3,5) -> 1 + 0 + 1 + 0.
    EXPECT_EQ(d.sums[1], 2u);
    EXPECT_EQ(d.terms[1], 4u);
    EXPECT_DOUBLE_EQ(d.normalized[1], 0.5);
    EXPECT_EQ(d.sums[0], 0u);
}

TEST(DirectCorrelate, ConstantSignal) {
    sample_series s{std::vector<std::uint64_t>(40, 3), 1e-8};
    auto const d = direct_correlate(s, 20);
    for (std::size_t k = 0; k < d.lags.size(); ++k) {
        EXPECT_EQ(d.terms[k], 40 - d.lags[k]);
        EXPECT_EQ(d.normalized[k], 9.0);
    }
}

TEST(DirectCorrelate, InsufficientData) {
    sample_series s{{1, 2, 3}, 1e-8};
    EXPECT_THROW(static_cast<void>(direct_correlate(s, 3)), config_error);
    EXPECT_NO_THROW(static_cast<void>(direct_correlate(s, 2)));
}

TEST(DirectCorrelate, MatchesEngineBlockZero) {
    random_source rng(31);
    sample_series s;
    for (int i = 0; i < 512; ++i)
        s.counts.push_back(rng.below(4));
    auto const d = direct_correlate(s, 16);
    multitau_engine e;
    e.arm();
    e.start();
    for (auto c : s.counts)
        e.push_sample(c);
    auto const &b0 = e.blocks()[0];
    for (std::size_t k = 0; k < 16; ++k)
        EXPECT_EQ(b0.accumulators[k], d.sums[k]);
}

TEST(Coarsen, Examples) {
    sample_series s{{1, 0, 1, 1}, 1e-8};
    auto const c = coarsen(s, 2);
    EXPECT_EQ(c.counts, (std::vector<std::uint64_t>{1, 2}));
    EXPECT_DOUBLE_EQ(c.sample_period, 2e-8);
    EXPECT_EQ(coarsen(s, 1), s);
    EXPECT_THROW(static_cast<void>(coarsen(s, 0)), config_error);
}

TEST(Coarsen, ConservesUpToDroppedRemainder) {
    random_source rng(32);
    for (int trial = 0; trial < 200; ++trial) {
        sample_series s;
        auto const n = rng.below(100);
        for (std::uint64_t i = 0; i < n; ++i)
            s.counts.push_back(rng.below(5));
        auto const f = 1 + rng.below(9);
        auto const c = coarsen(s, f);
        auto const kept = c.counts.size() * f;
        EXPECT_EQ(std::accumulate(c.counts.begin(), c.counts.end(),
                                  std::uint64_t{0}),
                  std::accumulate(s.counts.begin(),
                                  s.counts.begin() +
                                      static_cast<std::ptrdiff_t>(kept),
                                  std::uint64_t{0}));
    }
}

TEST(DirectCorrelate, CoarsenedSeriesReproducesEveryBlock) {
    random_source rng(33);
    sample_series s;
    for (int i = 0; i < 4096; ++i)
        s.counts.push_back(rng.below(2));
    multitau_engine e;
    e.arm();
    e.start();
    for (auto c : s.counts)
        e.push_sample(c);
    for (std::size_t blk = 0; blk < 8; ++blk) {
        auto const y = coarsen(s, std::uint64_t{1} << blk);
        auto const &b = e.blocks()[blk];
        auto const d = direct_correlate(y, b.layout.max_delay());
        for (std::size_t c = 0; c < b.accumulators.size(); ++c)
            EXPECT_EQ(b.accumulators[c],
                      d.sums[b.layout.first_delay + c - 1]);
    }
}

TEST(AveragingBias, BlockZeroIsExactlyZero) {
    random_source rng(34);
    sample_series s;
    for (int i = 0; i < 20000; ++i)
        s.counts.push_back(rng.below(2));
    correlator_config cfg;
    cfg.num_blocks = 6;
    auto const bias = averaging_bias(s, cfg);
    std::size_t seen = 0;
    for (auto const &b : bias)
        if (b.block == 0) {
            EXPECT_EQ(b.bias, 0.0);
            ++seen;
        }
    EXPECT_EQ(seen, 16u);
}

TEST(AveragingBias, ConstantSeriesHasNoBias) {
    sample_series s{std::vector<std::uint64_t>(5000, 2), 1e-8};
    correlator_config cfg;
    cfg.num_blocks = 8;
    auto const bias = averaging_bias(s, cfg);
    EXPECT_EQ(bias.size(), 16u + 7 * 8);
    for (auto const &b : bias)
        EXPECT_EQ(b.bias, 0.0);
}

TEST(AveragingBias, OmitsChannelsWithoutData) {
    sample_series s{std::vector<std::uint64_t>(100, 1), 1e-8};
    auto const bias = averaging_bias(s, correlator_config{});
    for (auto const &b : bias)
        EXPECT_LT(b.lag_samples, 100u);
}

namespace {

// Counts driven by a Gaussian-speckle intensity, with a large mean so that
// shot noise stays small next to the decay.
auto speckle_counts(double gamma_dt, std::size_t n, std::uint64_t seed)
    -> sample_series {
    ground_truth_values truth;
    truth.decay_rate = gamma_dt / 1e-8;
    auto const intensity = generate_intensity(truth, 1.0, 1.0, 8, n, seed);
    random_source rng(seed + 1);
    sample_series s;
    for (auto const v : intensity.values) {
        // Poisson(200 * v) by normal approximation, rounded and clipped.
        double const mean = 200 * v;
        auto const [z, unused] = rng.normal_pair();
        static_cast<void>(unused);
        double const k = std::round(mean + std::sqrt(mean) * z);
        s.counts.push_back(k > 0 ? static_cast<std::uint64_t>(k) : 0);
    }
    return s;
}

auto mean_abs_bias(std::vector<bias_entry> const &bias, std::size_t block)
    -> double {
    double sum = 0;
    std::size_t n = 0;
    for (auto const &b : bias)
        if (b.block == block) {
            sum += std::abs(b.bias);
            ++n;
        }
    return sum / static_cast<double>(n);
}

} // namespace

TEST(AveragingBias, ShrinksWhenSamplingGetsFiner) {
    correlator_config cfg;
    cfg.num_blocks = 5;
    auto const coarse = averaging_bias(speckle_counts(0.02, 400000, 5), cfg);
    auto const fine = averaging_bias(speckle_counts(0.01, 400000, 5), cfg);
    double const bc = mean_abs_bias(coarse, 3);
    double const bf = mean_abs_bias(fine, 3);
    EXPECT_GT(bc, 0.0);
    EXPECT_LT(bf, bc);
    // Triangular averaging over a window of 8 base samples is second order
    // in Gamma * dt; (0.02 * 8)^2 / 6 * beta sets the scale.
    EXPECT_LT(bc, 0.02);
}
