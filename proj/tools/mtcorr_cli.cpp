// mtcorr: simulate photon streams, correlate timestamp files, fit and size.
//
// Exit codes: 0 success, 1 unexpected failure, 2 parse or I/O error,
// 3 invalid physical or correlator parameters, 4 fit failed or did not
// converge.

#include <mtcorr/mtcorr.hpp>

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace {

using namespace mtcorr;

enum exit_code : int {
    ok = 0,
    failure = 1,
    parse_failure = 2,
    invalid_parameters = 3,
    fit_failure = 4,
};

constexpr double deg = std::numbers::pi / 180;

auto open_out(std::string const &path, bool binary = false)
    -> std::ofstream {
    std::ofstream os(path, binary ? std::ios::binary : std::ios::out);
    if (!os)
        throw parse_error("cannot open '" + path + "' for writing");
    return os;
}

auto open_in(std::string const &path) -> std::ifstream {
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw parse_error("cannot open '" + path + "'");
    return is;
}

auto seconds_to_ticks(double seconds) -> std::uint64_t {
    if (!(seconds >= 0) || !std::isfinite(seconds))
        throw physics_error("duration must be non-negative");
    return static_cast<std::uint64_t>(std::llround(seconds / seconds_per_tick));
}

struct correlator_flags {
    std::size_t blocks = 35;
    std::size_t channels = 8;
    std::size_t first_channels = 16;
    std::uint64_t dilation = 2;
    double base_period = 1e-8;

    void add_to(CLI::App &app) {
        app.add_option("--blocks", blocks, "Correlator blocks S")
            ->capture_default_str();
        app.add_option("--channels-per-block", channels,
                       "Channels per block P (blocks >= 1)")
            ->capture_default_str();
        app.add_option("--first-block-channels", first_channels,
                       "Channels in block 0")
            ->capture_default_str();
        app.add_option("--dilation", dilation,
                       "Sample-time factor between blocks")
            ->capture_default_str();
        app.add_option("--base-period", base_period,
                       "Block-0 sample period in seconds (whole ticks)")
            ->capture_default_str();
    }

    [[nodiscard]] auto config() const -> correlator_config {
        correlator_config c;
        c.num_blocks = blocks;
        c.channels_per_block = channels;
        c.first_block_channels = first_channels;
        c.dilation = dilation;
        c.base_sample_period = base_period;
        validate(c);
        return c;
    }

    [[nodiscard]] auto period_ticks() const -> std::uint64_t {
        double const t = base_period / seconds_per_tick;
        auto const n = std::llround(t);
        if (n < 1 || std::abs(t - static_cast<double>(n)) > 1e-6)
            throw config_error("base period must be a whole number of "
                               "1.25 ns ticks");
        return static_cast<std::uint64_t>(n);
    }
};

struct physics_flags {
    double diameter_nm = 530;
    double angle_deg = 30;
    double temperature = 298.15;
    double viscosity = 0.89e-3;
    double wavelength_nm = 532;
    double medium_index = 1.332;
    double coherence = 0.8;
    double rate = 5e6;

    void add_to(CLI::App &app) {
        app.add_option("--diameter", diameter_nm, "Particle diameter, nm")
            ->capture_default_str();
        app.add_option("--angle", angle_deg, "Scattering angle, degrees")
            ->capture_default_str();
        app.add_option("--rate", rate, "Mean count rate, counts/s")
            ->capture_default_str();
        app.add_option("--temperature", temperature, "Temperature, K")
            ->capture_default_str();
        app.add_option("--viscosity", viscosity, "Viscosity, Pa s")
            ->capture_default_str();
        app.add_option("--wavelength", wavelength_nm,
                       "Laser wavelength in vacuo, nm")
            ->capture_default_str();
        app.add_option("--medium-index", medium_index,
                       "Solvent refractive index")
            ->capture_default_str();
        app.add_option("--beta", coherence, "Coherence factor beta")
            ->capture_default_str();
    }

    [[nodiscard]] auto params() const -> experiment_params {
        experiment_params p;
        p.diameter = diameter_nm * 1e-9;
        p.angle = angle_deg * deg;
        p.temperature = temperature;
        p.viscosity = viscosity;
        p.wavelength = wavelength_nm * 1e-9;
        p.medium_index = medium_index;
        p.coherence = coherence;
        p.mean_count_rate = rate;
        validate(p);
        return p;
    }
};

void write_params(kv_report &r, experiment_params const &p) {
    r.set("temperature_K", p.temperature);
    r.set("viscosity_Pa_s", p.viscosity);
    r.set("wavelength_m", p.wavelength);
    r.set("medium_index", p.medium_index);
    r.set("angle_rad", p.angle);
    r.set("diameter_m", p.diameter);
    r.set("rate_cps", p.mean_count_rate);
    r.set("coherence", p.coherence);
}

auto read_params(kv_report const &r) -> experiment_params {
    experiment_params p;
    auto take = [&](char const *key, double &dst) {
        if (r.get(key))
            dst = r.number(key);
    };
    take("temperature_K", p.temperature);
    take("viscosity_Pa_s", p.viscosity);
    take("wavelength_m", p.wavelength);
    take("medium_index", p.medium_index);
    take("angle_rad", p.angle);
    take("diameter_m", p.diameter);
    take("rate_cps", p.mean_count_rate);
    take("coherence", p.coherence);
    validate(p);
    return p;
}

// simulate -----------------------------------------------------------------

struct simulate_cmd {
    physics_flags physics;
    double duration = 1.0;
    std::uint64_t seed = 1;
    std::string out;
    bool binary = false;

    void add_to(CLI::App &app) {
        physics.add_to(app);
        app.add_option("--duration", duration, "Observation window, s")
            ->capture_default_str();
        app.add_option("--seed", seed, "Random seed")->capture_default_str();
        app.add_option("--out", out, "Timestamp file to write")->required();
        app.add_flag("--binary", binary, "Write the binary timestamp format");
    }

    auto run() const -> int {
        auto const p = physics.params();
        auto const truth = ground_truth(p);
        auto const ticks = seconds_to_ticks(duration);
        auto const step = default_intensity_period_ticks(truth.decay_rate);

        kv_report side;
        side.set("q", truth.q);
        side.set("D", truth.diffusion);
        side.set("Gamma", truth.decay_rate);
        side.set("seed", seed);
        write_params(side, p);
        side.set("duration_ticks", ticks);
        side.set("intensity_step_ticks", step);
        side.set("rng", rng_algorithm);
        side.set("mtcorr", version);

        std::string provenance = std::string("mtcorr ") + version +
                                 " simulate seed=" + std::to_string(seed) +
                                 " rng=" + rng_algorithm;
        auto os = open_out(out, binary);
        timestamp_writer writer(os, binary ? timestamp_format::binary
                                           : timestamp_format::text,
                                ticks, provenance);
        auto const diag = simulate_photons(
            p, ticks, seed, [&](std::uint64_t t) { writer.write(t); }, step);
        if (!os)
            throw parse_error("write failed on '" + out + "'");

        side.set("events", diag.events);
        side.set("gap_constrained_fraction", diag.constrained_fraction());
        side.set("clipped_samples", diag.clipped_samples);
        auto so = open_out(out + ".truth");
        side.write(so);

        if (diag.warn())
            std::cerr << "warning: count rate strains the 10 ns pulse-width "
                         "limit (gap-constrained fraction "
                      << diag.constrained_fraction() << ", clipped samples "
                      << diag.clipped_samples << ")\n";
        std::cerr << "simulated " << diag.events << " events over "
                  << duration << " s -> " << out << '\n';
        return ok;
    }
};

// correlate ----------------------------------------------------------------

struct correlate_cmd {
    correlator_flags corr;
    std::string in;
    std::string out;
    std::optional<double> duration;
    std::optional<double> snapshot_interval;

    void add_to(CLI::App &app) {
        corr.add_to(app);
        app.add_option("--in", in, "Timestamp file")->required();
        app.add_option("--out", out, "Correlogram file to write")
            ->required();
        app.add_option("--duration", duration,
                       "Observation window in s (overrides the file header)");
        app.add_option("--snapshot-interval", snapshot_interval,
                       "Rewrite --out with a progress snapshot every this "
                       "many seconds of stream time");
    }

    auto run() const -> int {
        auto const cfg = corr.config();
        auto const period = corr.period_ticks();
        auto is = open_in(in);
        timestamp_reader reader(is);
        if (duration)
            reader.set_duration(seconds_to_ticks(*duration));
        if (!reader.duration())
            throw parse_error("'" + in +
                              "' has no duration header; pass --duration");
        auto const window = *reader.duration();

        multitau_engine engine(cfg);
        engine.arm();
        engine.start();
        event_feeder feeder(engine, period);

        std::uint64_t events = 0;
        std::vector<std::string> provenance{
            std::string("mtcorr=") + version, "source=" + in,
            "duration_ticks=" + std::to_string(window)};

        auto write = [&](bool final) {
            auto os = open_out(out);
            auto prov = provenance;
            prov.push_back("events=" + std::to_string(events));
            prov.push_back(std::string("state=") +
                           (final ? "final" : "progress"));
            write_correlogram(os, engine.snapshot(), prov);
        };

        std::optional<std::uint64_t> interval_frames;
        if (snapshot_interval) {
            if (!(*snapshot_interval > 0))
                throw config_error("snapshot interval must be positive");
            interval_frames = std::max<std::uint64_t>(
                1, static_cast<std::uint64_t>(*snapshot_interval /
                                              cfg.base_sample_period));
        }
        std::uint64_t next_snapshot =
            interval_frames ? *interval_frames : 0;

        while (auto t = reader.next()) {
            feeder.add(*t);
            ++events;
            if (interval_frames && feeder.frames_pushed() >= next_snapshot) {
                write(false);
                std::cerr << "progress: "
                          << static_cast<double>(engine.total_samples()) *
                                 cfg.base_sample_period
                          << " s, " << events << " events\n";
                while (next_snapshot <= feeder.frames_pushed())
                    next_snapshot += *interval_frames;
            }
        }
        feeder.finish(window);
        engine.stop();
        write(true);
        std::cerr << "correlated " << events << " events, "
                  << engine.total_samples() << " samples -> " << out << '\n';
        return ok;
    }
};

// fit ----------------------------------------------------------------------

struct fit_cmd {
    std::string in;
    std::string out;
    std::string curve;
    std::optional<double> tau_min;
    std::optional<double> tau_max;
    std::string weights = "uniform";

    void add_to(CLI::App &app) {
        app.add_option("--in", in, "Correlogram file")->required();
        app.add_option("--out", out, "Fit report (key=value)")->required();
        app.add_option("--curve", curve,
                       "Model curve file (default: <out>.curve)");
        app.add_option("--tau-min", tau_min, "Lower lag bound, s");
        app.add_option("--tau-max", tau_max, "Upper lag bound, s");
        app.add_option("--weights", weights, "uniform | counts")
            ->check(CLI::IsMember({"uniform", "counts"}))
            ->capture_default_str();
    }

    auto run() const -> int {
        auto is = open_in(in);
        auto const cg = read_correlogram(is);
        fit_options opt;
        if (tau_min)
            opt.tau_min = *tau_min;
        opt.tau_max = tau_max;
        opt.weighting = weights == "counts" ? fit_weighting::update_count
                                            : fit_weighting::uniform;
        auto const r = fit_exponential(cg, opt);

        kv_report rep;
        rep.set("B", r.model.baseline);
        rep.set("beta", r.model.amplitude);
        rep.set("Gamma", r.model.decay_rate);
        rep.set("residual_norm", r.residual_norm);
        rep.set("iterations", r.iterations);
        rep.set("converged", r.converged ? "true" : "false");
        rep.set("channels", r.channels);
        rep.set("tau_min", r.tau_lo);
        rep.set("tau_max", r.tau_hi);
        rep.set("weights", weights);
        rep.set("source", in);
        auto os = open_out(out);
        rep.write(os);

        auto cs = open_out(curve.empty() ? out + ".curve" : curve);
        cs << "# tau_seconds model_g\n";
        for (auto const &ch : cg.channels)
            if (ch.lag >= r.tau_lo && ch.lag <= r.tau_hi)
                cs << format_double(ch.lag) << ' '
                   << format_double(r.model(ch.lag)) << '\n';

        if (!r.converged) {
            std::cerr << "fit did not converge after " << r.iterations
                      << " iterations\n";
            return fit_failure;
        }
        return ok;
    }
};

// size ---------------------------------------------------------------------

struct size_cmd {
    std::string fit;
    std::string params;
    std::optional<double> cert_nm;
    std::string out;

    void add_to(CLI::App &app) {
        app.add_option("--fit", fit, "Fit report from 'fit'")->required();
        app.add_option("--params", params,
                       "key=value experiment parameters (the .truth "
                       "sidecar from 'simulate' works)")
            ->required();
        app.add_option("--cert", cert_nm, "Certified diameter, nm");
        app.add_option("--out", out, "Report file (default: stdout)");
    }

    auto run() const -> int {
        auto fs = open_in(fit);
        auto const fr = kv_report::read(fs);
        auto ps = open_in(params);
        auto const p = read_params(kv_report::read(ps));
        std::optional<double> cert;
        if (cert_nm)
            cert = *cert_nm * 1e-9;
        auto const s = size_from_decay(fr.number("Gamma"), p, cert);

        kv_report rep;
        rep.set("Gamma", fr.number("Gamma"));
        rep.set("q", scattering_vector(p));
        rep.set("D_exp", s.diffusion);
        rep.set("d_exp_m", s.diameter);
        rep.set("d_exp_nm", s.diameter * 1e9);
        if (s.relative_error_percent) {
            rep.set("d_cert_nm", *cert_nm);
            rep.set("E_r_percent", *s.relative_error_percent);
        }
        if (out.empty()) {
            rep.write(std::cout);
        } else {
            auto os = open_out(out);
            rep.write(os);
        }
        return ok;
    }
};

// compare ------------------------------------------------------------------

struct compare_cmd {
    std::string in;
    std::size_t max_block = 6;
    std::optional<double> duration;
    std::string out;

    void add_to(CLI::App &app) {
        app.add_option("--in", in, "Timestamp file")->required();
        app.add_option("--max-block", max_block,
                       "Highest correlator block to compare")
            ->capture_default_str();
        app.add_option("--duration", duration,
                       "Observation window in s (overrides the file header)");
        app.add_option("--out", out, "Bias table (default: stdout)");
    }

    auto run() const -> int {
        auto is = open_in(in);
        std::optional<std::uint64_t> window;
        if (duration)
            window = seconds_to_ticks(*duration);
        auto const stream = read_timestamps(is, window);
        auto const series = bin_to_samples(stream, ticks_per_base_sample);
        correlator_config cfg;
        cfg.num_blocks = max_block + 1;
        validate(cfg);
        auto const bias = averaging_bias(series, cfg);

        std::ofstream file;
        std::ostream *os = &std::cout;
        if (!out.empty()) {
            file = open_out(out);
            os = &file;
        }
        *os << "# mtcorr " << version << " averaging bias, source=" << in
            << " samples=" << series.counts.size() << '\n';
        std::vector<double> sum_abs(cfg.num_blocks, 0);
        std::vector<double> sum(cfg.num_blocks, 0);
        std::vector<std::size_t> count(cfg.num_blocks, 0);
        for (auto const &b : bias) {
            sum_abs[b.block] += std::abs(b.bias);
            sum[b.block] += b.bias;
            ++count[b.block];
        }
        bool nondecreasing = true;
        double prev = -1;
        for (std::size_t s = 0; s < cfg.num_blocks; ++s) {
            if (count[s] == 0)
                continue;
            double const m = sum_abs[s] / static_cast<double>(count[s]);
            *os << "# block " << s << " channels=" << count[s]
                << " mean_abs_bias=" << format_double(m)
                << " mean_bias="
                << format_double(sum[s] / static_cast<double>(count[s]))
                << '\n';
            if (m < prev)
                nondecreasing = false;
            prev = m;
        }
        *os << "# trend mean_abs_bias_nondecreasing="
            << (nondecreasing ? "yes" : "no") << '\n';
        *os << "# block delay lag_seconds g_multitau g_direct bias\n";
        for (auto const &b : bias)
            *os << b.block << ' ' << b.delay << ' ' << format_double(b.lag)
                << ' ' << format_double(b.g_multitau) << ' '
                << format_double(b.g_direct) << ' ' << format_double(b.bias)
                << '\n';
        return ok;
    }
};

} // namespace

auto main(int argc, char **argv) -> int {
    CLI::App app{"Multi-tau photon correlator and DLS sizing toolkit"};
    app.require_subcommand(1);

    simulate_cmd sim;
    correlate_cmd cor;
    fit_cmd fit;
    size_cmd siz;
    compare_cmd cmp;
    sim.add_to(*app.add_subcommand(
        "simulate", "Simulate a DLS photon stream and its ground truth"));
    cor.add_to(*app.add_subcommand(
        "correlate", "Run the multi-tau correlator over a timestamp file"));
    fit.add_to(*app.add_subcommand(
        "fit", "Fit B + beta exp(-Gamma tau) to a correlogram"));
    siz.add_to(*app.add_subcommand(
        "size", "Particle diameter from a fitted decay rate"));
    cmp.add_to(*app.add_subcommand(
        "compare", "Per-channel multi-tau bias against the direct "
                   "correlator"));

    try {
        app.parse(argc, argv);
    } catch (CLI::ParseError const &e) {
        auto const rc = app.exit(e);
        return rc == 0 ? ok : parse_failure;
    }

    try {
        if (app.got_subcommand("simulate"))
            return sim.run();
        if (app.got_subcommand("correlate"))
            return cor.run();
        if (app.got_subcommand("fit"))
            return fit.run();
        if (app.got_subcommand("size"))
            return siz.run();
        if (app.got_subcommand("compare"))
            return cmp.run();
    } catch (parse_error const &e) {
        std::cerr << "error: " << e.what() << '\n';
        return parse_failure;
    } catch (stream_error const &e) {
        std::cerr << "error: " << e.what() << '\n';
        return parse_failure;
    } catch (physics_error const &e) {
        std::cerr << "error: " << e.what() << '\n';
        return invalid_parameters;
    } catch (config_error const &e) {
        std::cerr << "error: " << e.what() << '\n';
        return invalid_parameters;
    } catch (fit_error const &e) {
        std::cerr << "error: " << e.what() << '\n';
        return fit_failure;
    } catch (std::exception const &e) {
        std::cerr << "error: " << e.what() << '\n';
        return failure;
    }
    return failure;
}
