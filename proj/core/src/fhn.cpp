#include "iled/fhn.hpp"

#include <array>
#include <cmath>

#include "iled/errors.hpp"
#include "iled/linalg.hpp"
#include "iled/rng.hpp"

namespace iled::sim {

namespace {

constexpr std::array<double, 3> kStageFrac = {1.0 / 3.0, 1.0 / 2.0, 1.0};

// Interleaved state ordering (u_0, v_0, u_1, v_1, ...) keeps the linear
// operator pentadiagonal: diffusion couples +-2, the local reaction terms +-1.
struct FhnOperator {
    int N;
    double inv_dx2;
    const FHNConfig* cfg;

    // y = L x
    void apply(const std::vector<double>& x, std::vector<double>& y) const {
        const FHNConfig& c = *cfg;
        for (int i = 0; i < N; ++i) {
            const double u = x[static_cast<std::size_t>(2 * i)];
            const double v = x[static_cast<std::size_t>(2 * i + 1)];
            const double ul = (i > 0) ? x[static_cast<std::size_t>(2 * (i - 1))] : x[2];
            const double ur = (i < N - 1) ? x[static_cast<std::size_t>(2 * (i + 1))] : x[static_cast<std::size_t>(2 * (N - 2))];
            const double vl = (i > 0) ? x[static_cast<std::size_t>(2 * (i - 1) + 1)] : x[3];
            const double vr = (i < N - 1) ? x[static_cast<std::size_t>(2 * (i + 1) + 1)] : x[static_cast<std::size_t>(2 * (N - 2) + 1)];
            const double lap_u = (ul - 2.0 * u + ur) * inv_dx2;
            const double lap_v = (vl - 2.0 * v + vr) * inv_dx2;
            y[static_cast<std::size_t>(2 * i)] = c.D_u * lap_u + u - v;
            y[static_cast<std::size_t>(2 * i + 1)] = c.D_v * lap_v + c.eps * (u - c.alpha1 * v);
        }
    }

    // Banded form of I - a*L (kl = ku = 2).
    linalg::BandedLU factor(double a) const {
        const FHNConfig& c = *cfg;
        const int n = 2 * N;
        std::vector<std::vector<double>> bands(5, std::vector<double>(static_cast<std::size_t>(n), 0.0));
        auto set = [&](int i, int j, double v) { bands[static_cast<std::size_t>(j - i + 2)][static_cast<std::size_t>(i)] = v; };
        for (int i = 0; i < N; ++i) {
            const int ui = 2 * i, vi = 2 * i + 1;
            // u row: D_u lap + u - v
            double diag_u = 1.0 - a * (-2.0 * c.D_u * inv_dx2 + 1.0);
            double off_u = -a * c.D_u * inv_dx2;
            // Neumann mirror doubles the single neighbor at the ends.
            if (i == 0)
                set(ui, ui + 2, 2.0 * off_u);
            else if (i == N - 1)
                set(ui, ui - 2, 2.0 * off_u);
            else {
                set(ui, ui - 2, off_u);
                set(ui, ui + 2, off_u);
            }
            set(ui, ui, diag_u);
            set(ui, vi, -a * (-1.0));  // -v term
            // v row: D_v lap + eps u - eps alpha1 v
            double diag_v = 1.0 - a * (-2.0 * c.D_v * inv_dx2 - c.eps * c.alpha1);
            double off_v = -a * c.D_v * inv_dx2;
            if (i == 0)
                set(vi, vi + 2, 2.0 * off_v);
            else if (i == N - 1)
                set(vi, vi - 2, 2.0 * off_v);
            else {
                set(vi, vi - 2, off_v);
                set(vi, vi + 2, off_v);
            }
            set(vi, vi, diag_v);
            set(vi, ui, -a * c.eps);
        }
        return linalg::BandedLU(bands, n, 2, 2);
    }
};

}  // namespace

data::Trajectory fhn_simulate(const FHNConfig& cfg, const std::vector<double>& u0, const std::vector<double>& v0,
                              double T) {
    const int N = cfg.N;
    if (N < 3) throw ConfigError("fhn: N must be >= 3");
    if (static_cast<int>(u0.size()) != N || static_cast<int>(v0.size()) != N)
        throw ConfigError("fhn: initial condition length must equal N");
    const double sub = cfg.sample_dt / cfg.solver_dt;
    const int sub_steps = static_cast<int>(std::lround(sub));
    if (sub_steps < 1 || std::abs(sub - sub_steps) > 1e-9)
        throw ConfigError("fhn: sample_dt must be an integer multiple of solver_dt");

    const double dx = cfg.L / (N - 1);
    FhnOperator op{N, 1.0 / (dx * dx), &cfg};
    std::array<linalg::BandedLU, 3> lus;
    for (int k = 0; k < 3; ++k) lus[static_cast<std::size_t>(k)] = op.factor(0.5 * kStageFrac[static_cast<std::size_t>(k)] * cfg.solver_dt);

    const int n = 2 * N;
    std::vector<double> y(static_cast<std::size_t>(n)), Ly(static_cast<std::size_t>(n)), stage(static_cast<std::size_t>(n)),
        rhs(static_cast<std::size_t>(n));
    for (int i = 0; i < N; ++i) {
        y[static_cast<std::size_t>(2 * i)] = u0[static_cast<std::size_t>(i)];
        y[static_cast<std::size_t>(2 * i + 1)] = v0[static_cast<std::size_t>(i)];
    }

    const int n_samples = static_cast<int>(std::floor(T / cfg.sample_dt + 0.5)) + 1;
    data::Trajectory traj;
    traj.states = diff::Tensor({n_samples, 2 * static_cast<std::int64_t>(N)});
    traj.t.resize(static_cast<std::size_t>(n_samples));

    auto record = [&](int s) {
        traj.t[static_cast<std::size_t>(s)] = cfg.sample_dt * s;
        double m = 0.0;
        bool finite = true;
        for (int i = 0; i < N; ++i) {
            traj.states.at(s, i) = y[static_cast<std::size_t>(2 * i)];
            traj.states.at(s, N + i) = y[static_cast<std::size_t>(2 * i + 1)];
            m = std::max({m, std::abs(y[static_cast<std::size_t>(2 * i)]), std::abs(y[static_cast<std::size_t>(2 * i + 1)])});
            finite = finite && std::isfinite(y[static_cast<std::size_t>(2 * i)]) && std::isfinite(y[static_cast<std::size_t>(2 * i + 1)]);
        }
        if (!finite || m >= cfg.blowup_threshold)
            throw SimulationError("fhn: state magnitude " + std::to_string(m) + " exceeds blow-up threshold at t=" +
                                  std::to_string(traj.t[static_cast<std::size_t>(s)]));
    };

    record(0);
    for (int s = 1; s < n_samples; ++s) {
        for (int step = 0; step < sub_steps; ++step) {
            op.apply(y, Ly);
            stage = y;
            for (int k = 0; k < 3; ++k) {
                const double c = kStageFrac[static_cast<std::size_t>(k)];
                const double a = 0.5 * c * cfg.solver_dt;
                for (int i = 0; i < N; ++i) {
                    const double up = stage[static_cast<std::size_t>(2 * i)];
                    rhs[static_cast<std::size_t>(2 * i)] =
                        y[static_cast<std::size_t>(2 * i)] + a * Ly[static_cast<std::size_t>(2 * i)] +
                        c * cfg.solver_dt * (-up * up * up);
                    rhs[static_cast<std::size_t>(2 * i + 1)] =
                        y[static_cast<std::size_t>(2 * i + 1)] + a * Ly[static_cast<std::size_t>(2 * i + 1)] +
                        c * cfg.solver_dt * (-cfg.eps * cfg.alpha0);
                }
                lus[static_cast<std::size_t>(k)].solve(rhs.data());
                stage = rhs;
            }
            y = stage;
        }
        record(s);
    }
    return traj;
}

void random_fhn_ic(const FHNConfig& cfg, std::uint64_t seed, std::vector<double>& u0, std::vector<double>& v0) {
    Rng rng(seed);
    const int N = cfg.N;
    u0.assign(static_cast<std::size_t>(N), 0.0);
    v0.assign(static_cast<std::size_t>(N), 0.0);
    constexpr int kModes = 6;
    std::array<double, kModes> au{}, av{};
    for (int m = 0; m < kModes; ++m) {
        au[static_cast<std::size_t>(m)] = rng.normal() / (1.0 + m);
        av[static_cast<std::size_t>(m)] = rng.normal() / (1.0 + m);
    }
    // Large-amplitude smooth fields reach the oscillatory attractor far more
    // often than small perturbations, which tend to fall into the uniform
    // equilibria.
    for (int i = 0; i < N; ++i) {
        const double x = static_cast<double>(i) / (N - 1);
        double su = 0.0, sv = 0.0;
        for (int m = 0; m < kModes; ++m) {
            su += au[static_cast<std::size_t>(m)] * std::cos(M_PI * (m + 1) * x);
            sv += av[static_cast<std::size_t>(m)] * std::cos(M_PI * (m + 1) * x);
        }
        u0[static_cast<std::size_t>(i)] = 1.2 * su;
        v0[static_cast<std::size_t>(i)] = 0.3 * sv;
    }
}

std::vector<std::pair<double, double>> fhn_uniform_equilibria(const FHNConfig& cfg) {
    // Roots of u - alpha1*(u - u^3) - alpha0 = 0 (v = u - u^3 on the fast
    // nullcline) via bisection on each sign-change interval.
    auto f = [&](double u) { return cfg.alpha1 * (u - u * u * u) - u + cfg.alpha0; };
    std::vector<std::pair<double, double>> roots;
    double prev_u = -2.0, prev_f = f(prev_u);
    for (double u = -2.0 + 1e-3; u <= 2.0; u += 1e-3) {
        double fu = f(u);
        if (prev_f == 0.0 || (prev_f < 0) != (fu < 0)) {
            double lo = prev_u, hi = u;
            for (int it = 0; it < 200; ++it) {
                double mid = 0.5 * (lo + hi);
                if ((f(lo) < 0) != (f(mid) < 0))
                    hi = mid;
                else
                    lo = mid;
            }
            double ur = 0.5 * (lo + hi);
            roots.emplace_back(ur, ur - ur * ur * ur);
        }
        prev_u = u;
        prev_f = fu;
    }
    return roots;
}

}  // namespace iled::sim
