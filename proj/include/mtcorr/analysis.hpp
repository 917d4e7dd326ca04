#pragma once

// Single-exponential fit g(tau) = B + beta * exp(-Gamma * tau) and
// Stokes-Einstein sizing.

#include "dls_sim.hpp"
#include "errors.hpp"
#include "multitau.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace mtcorr {

struct exp_model {
    double baseline = 0;   // B
    double amplitude = 0;  // beta
    double decay_rate = 0; // Gamma, 1/s

    [[nodiscard]] auto operator()(double tau) const -> double {
        return baseline + amplitude * std::exp(-decay_rate * tau);
    }

    /// d/dB, d/dbeta, d/dGamma.
    [[nodiscard]] auto jacobian(double tau) const -> std::array<double, 3> {
        double const e = std::exp(-decay_rate * tau);
        return {1.0, e, -amplitude * tau * e};
    }
};

enum class fit_weighting { uniform, update_count };

struct fit_options {
    double tau_min = 100e-9;         // excludes the warm-up lags
    std::optional<double> tau_max;   // default: 10 / Gamma_init
    fit_weighting weighting = fit_weighting::uniform;
    int max_iterations = 200;
};

struct fit_result {
    exp_model model;
    double residual_norm = 0;
    int iterations = 0;
    bool converged = false;
    std::size_t channels = 0;
    double tau_lo = 0;
    double tau_hi = 0;
};

namespace detail {

struct fit_data {
    std::vector<double> tau;
    std::vector<double> g;
    std::vector<double> w;
};

inline auto weighted_cost(fit_data const &d, exp_model const &m) -> double {
    double c = 0;
    for (std::size_t j = 0; j < d.tau.size(); ++j) {
        double const r = d.g[j] - m(d.tau[j]);
        c += d.w[j] * r * r;
    }
    return c;
}

/// Starting point: B from the last decade of lags, beta from the first
/// channel, Gamma from a straight line through ln(g - B) where g - B still
/// exceeds a tenth of beta.
inline auto initial_guess(fit_data const &d) -> exp_model {
    exp_model m;
    double const tau_last = d.tau.back();
    double sum = 0;
    std::size_t n = 0;
    for (std::size_t j = 0; j < d.tau.size(); ++j)
        if (d.tau[j] >= tau_last / 10) {
            sum += d.g[j];
            ++n;
        }
    m.baseline = sum / static_cast<double>(n);
    m.amplitude = d.g.front() - m.baseline;
    double const scale =
        std::max({std::abs(m.baseline), std::abs(d.g.front()),
                  std::numeric_limits<double>::min()});
    if (!(m.amplitude > 1e-12 * scale))
        throw fit_error("rank-deficient window: no decay above baseline, "
                        "decay rate is unidentifiable");

    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t k = 0;
    for (std::size_t j = 0; j < d.tau.size(); ++j) {
        double const y = d.g[j] - m.baseline;
        if (y > 0.1 * m.amplitude) {
            double const ly = std::log(y);
            sx += d.tau[j];
            sy += ly;
            sxx += d.tau[j] * d.tau[j];
            sxy += d.tau[j] * ly;
            ++k;
        }
    }
    double slope = 0;
    if (k >= 2) {
        double const kn = static_cast<double>(k);
        double const den = kn * sxx - sx * sx;
        if (den > 0)
            slope = (kn * sxy - sx * sy) / den;
    }
    if (slope < 0) {
        m.decay_rate = -slope;
    } else {
        // Fall back to the 1/e crossing.
        auto it = std::find_if(d.g.begin(), d.g.end(), [&](double v) {
            return v - m.baseline < m.amplitude / std::numbers::e;
        });
        auto const idx = static_cast<std::size_t>(it - d.g.begin());
        m.decay_rate = 1.0 / d.tau[std::min(idx, d.tau.size() - 1)];
    }
    return m;
}

} // namespace detail

/// Damped Gauss-Newton (Marquardt scaling) on the weighted squared
/// residuals. Converged when the relative parameter step drops below 1e-8
/// or the gradient norm below 1e-10; otherwise returns the best point after
/// max_iterations with converged = false.
[[nodiscard]] inline auto fit_exponential(std::span<double const> tau,
                                          std::span<double const> g,
                                          std::span<double const> weights,
                                          exp_model start,
                                          int max_iterations = 200)
    -> fit_result {
    if (tau.size() != g.size() || tau.size() != weights.size())
        throw fit_error("fit inputs differ in length");
    detail::fit_data d{{tau.begin(), tau.end()},
                       {g.begin(), g.end()},
                       {weights.begin(), weights.end()}};

    fit_result res;
    res.channels = d.tau.size();
    res.tau_lo = d.tau.front();
    res.tau_hi = d.tau.back();

    exp_model m = start;
    double cost = detail::weighted_cost(d, m);
    double lambda = 1e-3;
    int it = 0;
    for (; it < max_iterations; ++it) {
        Eigen::Matrix3d a = Eigen::Matrix3d::Zero();
        Eigen::Vector3d grad = Eigen::Vector3d::Zero();
        for (std::size_t j = 0; j < d.tau.size(); ++j) {
            auto const jac = m.jacobian(d.tau[j]);
            Eigen::Vector3d const row(jac[0], jac[1], jac[2]);
            double const r = d.g[j] - m(d.tau[j]);
            a.noalias() += d.w[j] * row * row.transpose();
            grad += d.w[j] * r * row;
        }
        if (grad.norm() < 1e-10) {
            res.converged = true;
            break;
        }
        bool accepted = false;
        while (lambda < 1e20) {
            Eigen::Matrix3d damped = a;
            for (int i = 0; i < 3; ++i)
                damped(i, i) += lambda * a(i, i);
            Eigen::Vector3d const step = damped.ldlt().solve(grad);
            exp_model const trial{m.baseline + step[0],
                                  m.amplitude + step[1],
                                  m.decay_rate + step[2]};
            Eigen::Vector3d const p(m.baseline, m.amplitude, m.decay_rate);
            double rel = 0;
            for (int i = 0; i < 3; ++i) {
                double const ref = std::max(std::abs(p[i]), 1e-300);
                rel = std::max(rel, std::abs(step[i]) / ref);
            }
            double const trial_cost = detail::weighted_cost(d, trial);
            if (std::isfinite(trial_cost) && trial_cost <= cost) {
                m = trial;
                cost = trial_cost;
                lambda = std::max(lambda / 10, 1e-12);
                accepted = true;
                if (rel < 1e-8)
                    res.converged = true;
                break;
            }
            if (rel < 1e-8) {
                // Step too small to lower the cost further: at the minimum
                // to working precision.
                res.converged = true;
                break;
            }
            lambda *= 10;
        }
        if (res.converged || !accepted)
            break;
    }
    res.model = m;
    res.residual_norm = std::sqrt(cost);
    res.iterations = std::min(it + 1, max_iterations);
    return res;
}

/// Fits a measured correlogram. Undefined channels are skipped; the window
/// starts at tau_min and ends at tau_max, or at 10 / Gamma_init when no
/// upper bound is given.
[[nodiscard]] inline auto fit_exponential(correlogram const &cg,
                                          fit_options const &opt = {})
    -> fit_result {
    detail::fit_data d;
    for (auto const &ch : cg.channels) {
        if (!ch.g || !std::isfinite(*ch.g))
            continue;
        if (ch.lag < opt.tau_min)
            continue;
        if (opt.tau_max && ch.lag > *opt.tau_max)
            continue;
        d.tau.push_back(ch.lag);
        d.g.push_back(*ch.g);
        d.w.push_back(opt.weighting == fit_weighting::update_count
                          ? static_cast<double>(ch.update_count)
                          : 1.0);
    }
    constexpr std::size_t min_channels = 8;
    if (d.tau.size() < min_channels)
        throw fit_error("fit window holds " + std::to_string(d.tau.size()) +
                        " defined channels, need at least 8");

    auto start = detail::initial_guess(d);
    if (!opt.tau_max) {
        double const cut = 10.0 / start.decay_rate;
        detail::fit_data cropped;
        for (std::size_t j = 0; j < d.tau.size(); ++j)
            if (d.tau[j] <= cut) {
                cropped.tau.push_back(d.tau[j]);
                cropped.g.push_back(d.g[j]);
                cropped.w.push_back(d.w[j]);
            }
        if (cropped.tau.size() < min_channels)
            throw fit_error("fewer than 8 defined channels below 10/Gamma");
        d = std::move(cropped);
    }
    if (opt.weighting == fit_weighting::update_count) {
        double mean = 0;
        for (auto const w : d.w)
            mean += w;
        mean /= static_cast<double>(d.w.size());
        if (!(mean > 0))
            throw fit_error("all update counts in the window are zero");
        for (auto &w : d.w)
            w /= mean;
    }
    return fit_exponential(d.tau, d.g, d.w, start, opt.max_iterations);
}

struct size_result {
    double diffusion = 0; // D_exp, m^2/s
    double diameter = 0;  // d_exp, m
    std::optional<double> relative_error_percent;
};

[[nodiscard]] inline auto relative_error(double measured, double certified)
    -> double {
    if (!(certified > 0))
        throw physics_error("certified diameter must be positive");
    return 100.0 * std::abs(measured - certified) / certified;
}

/// Diameter from the intensity decay rate: D = Gamma / (2 q^2), then
/// Stokes-Einstein.
[[nodiscard]] inline auto size_from_decay(double decay_rate,
                                          experiment_params const &params,
                                          std::optional<double> certified = {})
    -> size_result {
    if (!(decay_rate > 0) || !std::isfinite(decay_rate))
        throw physics_error("decay rate must be positive");
    validate(params);
    double const q = scattering_vector(params);
    size_result r;
    r.diffusion = decay_rate / (2 * q * q);
    r.diameter = boltzmann * params.temperature /
                 (3 * std::numbers::pi * params.viscosity * r.diffusion);
    if (certified)
        r.relative_error_percent = relative_error(r.diameter, *certified);
    return r;
}

} // namespace mtcorr
