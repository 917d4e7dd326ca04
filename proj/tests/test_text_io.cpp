#include <mtcorr/multitau.hpp>
#include <mtcorr/rng.hpp>
#include <mtcorr/text_io.hpp>

#include <gtest/gtest.h>

#include <sstream>

using namespace mtcorr;

TEST(CorrelogramFile, RoundTripsEngineSnapshot) {
    multitau_engine e;
    e.arm();
    e.start();
    random_source rng(51);
    for (int i = 0; i < 100000; ++i)
        e.push_sample(rng.below(2));
    auto const cg = e.snapshot();
    std::stringstream ss;
    write_correlogram(ss, cg, {"seed=51"});
    auto const back = read_correlogram(ss);
    EXPECT_EQ(back.config, cg.config);
    EXPECT_EQ(back.total_samples, cg.total_samples);
    ASSERT_EQ(back.channels.size(), cg.channels.size());
    for (std::size_t k = 0; k < cg.channels.size(); ++k) {
        auto const &a = cg.channels[k];
        auto const &b = back.channels[k];
        EXPECT_EQ(a.lag, b.lag);
        EXPECT_EQ(a.g, b.g);
        EXPECT_EQ(a.raw_sum, b.raw_sum);
        EXPECT_EQ(a.direct_monitor, b.direct_monitor);
        EXPECT_EQ(a.delayed_monitor, b.delayed_monitor);
        EXPECT_EQ(a.update_count, b.update_count);
        EXPECT_EQ(a.block, b.block);
        EXPECT_EQ(a.delay, b.delay);
    }
}

TEST(CorrelogramFile, HeaderRecordsConfig) {
    multitau_engine e;
    e.arm();
    e.start();
    std::stringstream ss;
    write_correlogram(ss, e.snapshot());
    auto const text = ss.str();
    EXPECT_NE(text.find("# config S=35 P=8 P0=16 dt0=1e-08 n=2\n"),
              std::string::npos);
    EXPECT_NE(text.find("# total_samples=0\n"), std::string::npos);
    EXPECT_NE(text.find("\n1e-08 nan 0 0 0 0\n"), std::string::npos);
}

TEST(CorrelogramFile, MalformedRowReportsLine) {
    std::stringstream ss("# mtcorr correlogram\n1e-8 1.0 1 2 3\n");
    try {
        static_cast<void>(read_correlogram(ss));
        FAIL();
    } catch (parse_error const &e) {
        EXPECT_EQ(e.line(), 2u);
    }
}

TEST(KvReport, RoundTrip) {
    kv_report r;
    r.set("Gamma", 123.456);
    r.set("iterations", 7);
    r.set("converged", "true");
    r.set("Gamma", 0.1);
    std::stringstream ss;
    r.write(ss);
    EXPECT_EQ(ss.str(), "Gamma=0.10000000000000001\niterations=7\n"
                        "converged=true\n");
    auto const back = kv_report::read(ss);
    EXPECT_EQ(back.number("Gamma"), 0.1);
    EXPECT_EQ(back.get("converged"), "true");
    EXPECT_THROW(static_cast<void>(back.number("missing")), parse_error);
}
