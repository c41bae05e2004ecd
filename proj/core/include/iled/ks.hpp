#pragma once

#include "iled/dataset.hpp"

namespace iled::sim {

// Kuramoto-Sivashinsky equation u_t + u_xx + u_xxxx + u u_x = 0 on a
// periodic [0,L] domain, discretized on N Fourier modes. Spectral form per
// mode q = 2*pi*k/L:
//   d/dt u_k = (q^2 - q^4) u_k - (i q / 2) (u^2)_k
// The linear part is diagonal and handled implicitly by the three-stage
// semi-implicit scheme; the quadratic term is evaluated pseudospectrally on
// a 3/2 zero-padded grid (full dealiasing for quadratic products).
struct KSConfig {
    double L = 22.0;
    int N = 64;  // power of two

    double solver_dt = 0.025;
    int warmup_steps = 3000;
    double sample_dt = 0.25;
    int samples_per_traj = 1280;

    int n_train = 256;  // desk-scale default (the full experiment uses 2048)
    int n_val = 64;
    int n_test = 100;
    double test_seconds = 800.0;

    double ic_rms = 0.5;
    int ic_max_mode = 8;
    double blowup_threshold = 1e6;
};

// Integrates from u0 (zero-mean enforced by projecting out mode 0), discards
// cfg.warmup_steps internal steps, then records floor(T/sample_dt)+1 samples
// including the first post-warm-up state.
data::Trajectory ks_simulate(const KSConfig& cfg, const std::vector<double>& u0, double T);

// Gaussian spectral amplitudes on modes 1 <= |k| <= ic_max_mode, zero mean,
// normalized to RMS ic_rms. Deterministic per seed.
std::vector<double> random_ks_ic(const KSConfig& cfg, std::uint64_t seed);

// Spectral derivatives of a sampled field row (length N); used by the
// attractor-density analysis.
void ks_spectral_derivatives(double L, const std::vector<double>& u, std::vector<double>& ux,
                             std::vector<double>& uxx);

}  // namespace iled::sim
