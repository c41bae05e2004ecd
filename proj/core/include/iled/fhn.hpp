#pragma once

#include "iled/dataset.hpp"

namespace iled::sim {

// FitzHugh-Nagumo reaction-diffusion system on [0,L] with zero-flux
// boundaries, discretized by second-order central differences and advanced
// with the same three-stage semi-implicit scheme as the latent dynamics
// (diffusion + linear reaction implicit, -u^3 and the constant drive
// explicit).
struct FHNConfig {
    double D_u = 1.0;
    double D_v = 4.0;
    double eps = 0.006;
    double alpha0 = -0.03;
    double alpha1 = 2.0;
    double L = 20.0;
    int N = 101;

    double solver_dt = 0.05;
    double sample_dt = 1.0;
    double traj_seconds = 451.0;
    int n_train = 3;
    int n_val = 2;
    double test_seconds = 1e4;
    double warmup_seconds = 1000.0;  // settle onto the oscillatory attractor
    double blowup_threshold = 1e6;
};

// Integrates from (u0, v0) for T seconds and records floor(T/sample_dt)+1
// samples including t=0. Row layout: [u(0..N-1), v(0..N-1)].
data::Trajectory fhn_simulate(const FHNConfig& cfg, const std::vector<double>& u0, const std::vector<double>& v0,
                              double T);

// Smooth random cosine-series initial condition (Neumann-compatible).
void random_fhn_ic(const FHNConfig& cfg, std::uint64_t seed, std::vector<double>& u0, std::vector<double>& v0);

// Spatially uniform steady states (u*, v* = u* - u*^3) of the reaction
// system (used by tests and diagnostics).
std::vector<std::pair<double, double>> fhn_uniform_equilibria(const FHNConfig& cfg);

}  // namespace iled::sim
