#include "iled/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "iled/errors.hpp"
#include "iled/fft.hpp"
#include "iled/ks.hpp"

namespace iled::analysis {

SpectralReport eigen_frequencies(const Tensor& A) {
    if (A.rank() != 2 || A.shape[0] != A.shape[1]) throw ShapeError("eigen_frequencies: A must be square");
    const int n = static_cast<int>(A.shape[0]);
    Eigen::MatrixXd M(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) M(i, j) = A.at(i, j);

    Eigen::EigenSolver<Eigen::MatrixXd> solver(M, /*computeEigenvectors=*/false);
    if (solver.info() != Eigen::Success) throw Error("eigen_frequencies: QR iteration failed to converge");

    SpectralReport rep;
    for (int i = 0; i < n; ++i) rep.eigenvalues.push_back(solver.eigenvalues()(i));
    std::sort(rep.eigenvalues.begin(), rep.eigenvalues.end(), [](const auto& a, const auto& b) {
        if (a.real() != b.real()) return a.real() < b.real();
        return a.imag() < b.imag();
    });

    double scale = 0.0;
    for (const auto& ev : rep.eigenvalues) scale = std::max(scale, std::abs(ev));
    scale = std::max(scale, 1e-12);
    rep.max_real_part = -std::numeric_limits<double>::infinity();
    std::vector<bool> used(rep.eigenvalues.size(), false);
    for (std::size_t i = 0; i < rep.eigenvalues.size(); ++i) {
        rep.max_real_part = std::max(rep.max_real_part, rep.eigenvalues[i].real());
        if (used[i]) continue;
        const auto& ev = rep.eigenvalues[i];
        if (std::abs(ev.imag()) <= 1e-12 * scale) {
            rep.frequencies_hz.push_back(0.0);
            rep.periods_s.push_back(std::numeric_limits<double>::infinity());
            continue;
        }
        // consume the conjugate partner; the pair contributes one frequency
        for (std::size_t j = i + 1; j < rep.eigenvalues.size(); ++j) {
            if (used[j]) continue;
            if (std::abs(rep.eigenvalues[j].real() - ev.real()) < 1e-9 * scale &&
                std::abs(rep.eigenvalues[j].imag() + ev.imag()) < 1e-9 * scale) {
                used[j] = true;
                break;
            }
        }
        const double f = std::abs(ev.imag()) / (2.0 * M_PI);
        rep.frequencies_hz.push_back(f);
        rep.periods_s.push_back(1.0 / f);
    }
    return rep;
}

PeakList dominant_frequencies(const data::Trajectory& traj, int n_peaks) {
    const std::int64_t T = traj.samples();
    if (T < 8) throw DataError("dominant_frequencies: trajectory must have at least 8 samples");
    const double dt = traj.dt();
    for (std::size_t i = 2; i < traj.t.size(); ++i)
        if (std::abs((traj.t[i] - traj.t[i - 1]) - dt) > 1e-9 * std::max(1.0, dt))
            throw DataError("dominant_frequencies: sampling is not uniform");

    std::size_t n = 1;
    while (n < static_cast<std::size_t>(T)) n <<= 1;

    const std::int64_t D = traj.d_phi();
    std::vector<double> power(n / 2, 0.0);
    fft::cvec buf(n);
    for (std::int64_t j = 0; j < D; ++j) {
        double mean = 0;
        for (std::int64_t i = 0; i < T; ++i) mean += traj.states.at(i, j);
        mean /= static_cast<double>(T);
        for (std::size_t i = 0; i < n; ++i) buf[i] = {0.0, 0.0};
        for (std::int64_t i = 0; i < T; ++i) {
            const double w = 0.5 - 0.5 * std::cos(2.0 * M_PI * static_cast<double>(i) / static_cast<double>(T - 1));
            buf[static_cast<std::size_t>(i)] = {(traj.states.at(i, j) - mean) * w, 0.0};
        }
        fft::cvec s = fft::dft(buf);
        for (std::size_t k = 0; k < n / 2; ++k) power[k] += std::norm(s[k]);
    }
    for (auto& p : power) p /= static_cast<double>(D);

    PeakList out;
    out.spectrum.freq_hz.resize(n / 2);
    out.spectrum.power = power;
    for (std::size_t k = 0; k < n / 2; ++k)
        out.spectrum.freq_hz[k] = static_cast<double>(k) / (static_cast<double>(n) * dt);
    {
        std::vector<double> sorted(power.begin() + 1, power.end());
        std::sort(sorted.begin(), sorted.end());
        out.spectrum.median_power = sorted.empty() ? 0.0 : sorted[sorted.size() / 2];
    }

    std::vector<std::pair<double, std::size_t>> peaks;  // (power, bin)
    for (std::size_t k = 1; k + 1 < n / 2; ++k)
        if (power[k] > power[k - 1] && power[k] >= power[k + 1] && power[k] > out.spectrum.median_power)
            peaks.emplace_back(power[k], k);
    std::sort(peaks.rbegin(), peaks.rend());
    for (int i = 0; i < n_peaks && i < static_cast<int>(peaks.size()); ++i) {
        out.frequencies_hz.push_back(out.spectrum.freq_hz[peaks[static_cast<std::size_t>(i)].second]);
        out.powers.push_back(peaks[static_cast<std::size_t>(i)].first);
    }
    return out;
}

NormSeries dynamics_norms(const std::vector<dyn::LatentState>& rollout, const dyn::DynamicsParams& dp) {
    NormSeries ns;
    const Tensor A = dyn::build_A(dp.W, dp.w);
    const Tensor At = diff::kernels::transpose2(A);
    std::vector<double> ratios;
    for (const auto& st : rollout) {
        Tensor zr({1, dp.d_z}, st.z.data);
        Tensor hr({1, dp.d_h}, st.h.data);
        Tensor Az = diff::kernels::matmul(zr, At);
        Tensor psi = dyn::closure(dp, zr, hr);
        const double ln = diff::norm2(Az);
        const double nn = diff::norm2(psi);
        ns.t.push_back(st.t);
        ns.lin_norm.push_back(ln);
        ns.nonlin_norm.push_back(nn);
        if (ln > 0) ratios.push_back(nn / ln);
    }
    if (!ratios.empty()) {
        std::sort(ratios.begin(), ratios.end());
        ns.ratio_median = ratios[ratios.size() / 2];
        ns.ratio_p90 = ratios[static_cast<std::size_t>(0.9 * static_cast<double>(ratios.size() - 1))];
    }
    return ns;
}

ForecastMetrics forecast_metrics(const model::IledModel& m, const data::Trajectory& test,
                                 const std::vector<double>& horizons_s) {
    const auto& ae = m.autoencoder;
    const double dt = test.dt();
    const double tau = dyn::memory_horizon(m.dynamics.p, m.spec.eps_mem);
    const int warm = static_cast<int>(std::ceil(tau / dt - 1e-12)) + 1;

    double max_h = 0;
    for (double h : horizons_s) max_h = std::max(max_h, h);
    const int steps = static_cast<int>(std::lround(max_h / dt));
    if (warm + steps >= test.samples())
        throw DataError("forecast_metrics: trajectory too short for warm-up " + std::to_string(warm) +
                        " plus horizon " + std::to_string(steps) + " samples");

    // Encode warm-up prefix and initialize the memory.
    Tensor hist_rows({warm + 1, static_cast<std::int64_t>(ae.d_phi())});
    for (int i = 0; i <= warm; ++i)
        for (std::int64_t j = 0; j < ae.d_phi(); ++j) hist_rows.at(i, j) = test.states.at(i, j);
    Tensor codes = ae::encode(ae, hist_rows, false);
    Tensor h0 = dyn::init_memory(m.dynamics, codes, dt, m.spec.eps_mem);
    dyn::LatentState s0;
    s0.z = Tensor({ae.d_z});
    for (int j = 0; j < ae.d_z; ++j) s0.z[j] = codes.at(warm, j);
    s0.h = h0;
    s0.t = 0.0;

    auto rollout = dyn::integrate(s0, dt, std::max(1, steps), m.dynamics);

    ForecastMetrics fm;
    fm.train_latent_max_norm = m.train_latent_max_norm;
    for (const auto& st : rollout) fm.max_rollout_norm = std::max(fm.max_rollout_norm, diff::norm2(st.z));
    fm.bounded = fm.max_rollout_norm <= 2.0 * m.train_latent_max_norm;

    // Pooled std of the truth: per-dimension time means, one global scale.
    const std::int64_t T = test.samples(), D = test.d_phi();
    std::vector<double> dim_mean(static_cast<std::size_t>(D), 0.0);
    for (std::int64_t i = 0; i < T; ++i)
        for (std::int64_t j = 0; j < D; ++j) dim_mean[static_cast<std::size_t>(j)] += test.states.at(i, j);
    for (auto& v : dim_mean) v /= static_cast<double>(T);
    double var = 0;
    for (std::int64_t i = 0; i < T; ++i)
        for (std::int64_t j = 0; j < D; ++j) {
            const double d = test.states.at(i, j) - dim_mean[static_cast<std::size_t>(j)];
            var += d * d;
        }
    const double sigma = std::sqrt(var / (static_cast<double>(T) * static_cast<double>(D)));

    for (double h : horizons_s) {
        const int i = static_cast<int>(std::lround(h / dt));
        const auto& st = rollout[static_cast<std::size_t>(i)];
        Tensor zr({1, ae.d_z}, st.z.data);
        Tensor dec = ae::decode(ae, zr);
        double err2 = 0;
        for (std::int64_t j = 0; j < D; ++j) {
            const double d = dec.at(0, j) - test.states.at(warm + i, j);
            err2 += d * d;
        }
        fm.horizons_s.push_back(h);
        fm.nrmse.push_back(std::sqrt(err2 / static_cast<double>(D)) / sigma);

        Tensor phi_row({1, D});
        for (std::int64_t j = 0; j < D; ++j) phi_row.at(0, j) = test.states.at(warm + i, j);
        Tensor ztrue = ae::encode(ae, phi_row, false);
        double le = 0;
        for (int j = 0; j < ae.d_z; ++j) {
            const double d = st.z[j] - ztrue.at(0, j);
            le += d * d;
        }
        fm.latent_err.push_back(std::sqrt(le));
    }
    return fm;
}

std::pair<double, double> ks_density_ranges(const data::Trajectory& traj, double domain_length) {
    double r1 = 0, r2 = 0;
    const std::int64_t N = traj.d_phi();
    std::vector<double> u(static_cast<std::size_t>(N)), ux, uxx;
    for (std::int64_t i = 0; i < traj.samples(); ++i) {
        for (std::int64_t j = 0; j < N; ++j) u[static_cast<std::size_t>(j)] = traj.states.at(i, j);
        sim::ks_spectral_derivatives(domain_length, u, ux, uxx);
        for (std::int64_t j = 0; j < N; ++j) {
            r1 = std::max(r1, std::abs(ux[static_cast<std::size_t>(j)]));
            r2 = std::max(r2, std::abs(uxx[static_cast<std::size_t>(j)]));
        }
    }
    return {r1, r2};
}

Histogram2D ks_density(const data::Trajectory& traj, double domain_length, int bins, double r1, double r2) {
    if (bins < 2) throw ConfigError("ks_density: need at least 2 bins");
    if (!(r1 > 0) || !(r2 > 0)) throw ConfigError("ks_density: ranges must be positive");
    Histogram2D h;
    h.bins = bins;
    h.r1 = r1;
    h.r2 = r2;
    h.p.assign(static_cast<std::size_t>(bins) * bins, 0.0);

    const std::int64_t N = traj.d_phi();
    std::vector<double> u(static_cast<std::size_t>(N)), ux, uxx;
    std::int64_t count = 0;
    for (std::int64_t i = 0; i < traj.samples(); ++i) {
        for (std::int64_t j = 0; j < N; ++j) u[static_cast<std::size_t>(j)] = traj.states.at(i, j);
        sim::ks_spectral_derivatives(domain_length, u, ux, uxx);
        for (std::int64_t j = 0; j < N; ++j) {
            const double x = (ux[static_cast<std::size_t>(j)] + r1) / (2.0 * r1);
            const double y = (uxx[static_cast<std::size_t>(j)] + r2) / (2.0 * r2);
            int bx = static_cast<int>(x * bins);
            int by = static_cast<int>(y * bins);
            bx = std::clamp(bx, 0, bins - 1);
            by = std::clamp(by, 0, bins - 1);
            h.p[static_cast<std::size_t>(by) * bins + bx] += 1.0;
            ++count;
        }
    }
    if (count > 0)
        for (auto& v : h.p) v /= static_cast<double>(count);
    return h;
}

double histogram_l1(const Histogram2D& a, const Histogram2D& b) {
    if (a.bins != b.bins || a.p.size() != b.p.size()) throw ShapeError("histogram_l1: bin layout mismatch");
    double s = 0;
    for (std::size_t i = 0; i < a.p.size(); ++i) s += std::abs(a.p[i] - b.p[i]);
    return s;
}

}  // namespace iled::analysis
