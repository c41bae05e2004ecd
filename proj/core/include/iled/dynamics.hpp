#pragma once

#include <array>
#include <optional>
#include <vector>

#include "iled/linalg.hpp"
#include "iled/network.hpp"

namespace iled::dyn {

using diff::BoundNet;
using diff::Network;
using diff::Tape;
using diff::Tensor;
using diff::Var;

// Latent state advanced by the integrator: observed code z, memory h.
struct LatentState {
    Tensor z;  // (d_z)
    Tensor h;  // (d_h)
    double t = 0.0;
};

// All trainable pieces of the latent dynamics:
//   A     = W - W^T - diag(abs(w))   (stable by construction)
//   Lambda= -exp(p)                  (strictly negative diagonal)
//   psi1  : closure MLP  (z,h) -> R^{d_z}   (Concat front layer)
//   psi2  : lifting MLP   z    -> R^{d_h-d_z}; the lift output is [z, psi2(z)]
struct DynamicsParams {
    int d_z = 0, d_h = 0;
    Tensor W;  // (d_z,d_z)
    Tensor w;  // (d_z)
    Tensor p;  // (d_h)
    Network psi1;
    Network psi2;  // layer-free when d_h == d_z (pure identity lift)
};

// `psi1_neurons` / `psi2_neurons` list every width including input and
// output, e.g. {18,32,32,32,2} and {2,5,8,11,14}. SiLU between layers.
DynamicsParams make_dynamics(int d_z, int d_h, const std::vector<int>& psi1_neurons,
                             const std::vector<int>& psi2_neurons, Rng& rng);

// --- plain (non-recording) path --------------------------------------------

Tensor build_A(const Tensor& W, const Tensor& w);
Tensor lambda_vector(const Tensor& p);  // entries -exp(p_i)

// Lift with identity channel: rows [z, psi2(z)].
Tensor lift(const DynamicsParams& dp, const Tensor& z_rows);
// Closure network on rows: psi1([z,h]).
Tensor closure(const DynamicsParams& dp, const Tensor& z_rows, const Tensor& h_rows);

struct RhsOut {
    Tensor dz, dh;  // (d_z), (d_h)
};
RhsOut rhs(const DynamicsParams& dp, const LatentState& s);

// Precomputed stage factorizations for one (params, dt) pair; reused across
// every step of a rollout.
struct Sirk3Workspace {
    double dt = 0.0;
    Tensor A, At, lam;
    std::array<linalg::DenseLU, 3> stage_lu;
    std::array<double, 3> frac;  // stage fractions
};
Sirk3Workspace prepare_sirk3(const DynamicsParams& dp, double dt);
LatentState sirk3_step_ws(const DynamicsParams& dp, const Sirk3Workspace& ws, const LatentState& s);

LatentState sirk3_step(const LatentState& s, double dt, const DynamicsParams& dp);

// n_steps repeated sirk3 steps; result[0] is the initial state. Throws
// SimulationError naming the step index if the state leaves finite range.
std::vector<LatentState> integrate(const LatentState& s0, double dt, int n_steps, const DynamicsParams& dp);

// tau_max = ln(1/eps) / |lambda_slowest|; guarantees e^{lambda tau} <= eps
// for every diagonal entry.
double memory_horizon(const Tensor& p, double eps_mem);

// Trapezoidal initialization of the memory from latent history sampled on
// s in [-n*delta, 0] (codes row i corresponds to s = (i-n)*delta; the last
// row is s=0). Requires n*delta >= tau_max(eps_mem).
Tensor init_memory(const DynamicsParams& dp, const Tensor& z_history, double delta, double eps_mem);

// --- tape (recording) path --------------------------------------------------

struct BoundDynamics {
    const DynamicsParams* src = nullptr;
    Var W, w, p;
    Var A, At, lam;
    BoundNet psi1, psi2;
};

BoundDynamics bind_dynamics(Tape& tape, const DynamicsParams& dp);

Var lift_t(const BoundDynamics& bd, Var z_rows);
Var closure_t(const BoundDynamics& bd, Var z_rows, Var h_rows);
std::pair<Var, Var> rhs_t(const BoundDynamics& bd, Var z, Var h);
std::pair<Var, Var> sirk3_step_t(const BoundDynamics& bd, Var z, Var h, double dt);
Var init_memory_t(const BoundDynamics& bd, Var z_history, double delta, double eps_mem);

}  // namespace iled::dyn
