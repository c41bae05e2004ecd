#include "iled/dynamics.hpp"

#include <cmath>

#include "iled/errors.hpp"
#include "iled/ops.hpp"

namespace iled::dyn {

using namespace iled::diff;

namespace {

// Stage fractions of the three-stage semi-implicit scheme. Each stage k
// advances from t to t + frac[k]*dt with a trapezoidal linear part and the
// nonlinear term taken at the previous stage value; the final stage is the
// step result. Second order overall, and the linear-only step reduces to the
// Cayley transform (I - dt/2 A)^{-1}(I + dt/2 A).
constexpr std::array<double, 3> kStageFrac = {1.0 / 3.0, 1.0 / 2.0, 1.0};

Tensor row(const Tensor& v) { return Tensor({1, v.size()}, v.data); }
Tensor unrow(const Tensor& r) { return Tensor({r.size()}, r.data); }

Network make_mlp(const std::vector<int>& neurons, std::optional<int> concat_aux) {
    Network net;
    if (neurons.size() < 2) throw ConfigError("MLP needs at least input and output widths");
    if (concat_aux) net.add(LayerSpec::make_concat(*concat_aux));
    for (std::size_t i = 0; i + 1 < neurons.size(); ++i) {
        net.add(LayerSpec::make_linear(neurons[i], neurons[i + 1]));
        if (i + 2 < neurons.size()) net.add(LayerSpec::make_silu());
    }
    return net;
}

}  // namespace

DynamicsParams make_dynamics(int d_z, int d_h, const std::vector<int>& psi1_neurons,
                             const std::vector<int>& psi2_neurons, Rng& rng) {
    if (d_z < 1 || d_h < d_z) throw ConfigError("make_dynamics: need d_z >= 1 and d_h >= d_z");
    DynamicsParams dp;
    dp.d_z = d_z;
    dp.d_h = d_h;

    if (psi1_neurons.front() != d_z + d_h)
        throw ConfigError("psi1 input width must be d_z + d_h = " + std::to_string(d_z + d_h));
    if (psi1_neurons.back() != d_z) throw ConfigError("psi1 output width must be d_z");
    dp.psi1 = make_mlp(psi1_neurons, d_h);

    if (d_h > d_z) {
        if (psi2_neurons.front() != d_z) throw ConfigError("psi2 input width must be d_z");
        if (psi2_neurons.back() != d_h - d_z)
            throw ConfigError("psi2 output width must be d_h - d_z = " + std::to_string(d_h - d_z));
        dp.psi2 = make_mlp(psi2_neurons, std::nullopt);
    }

    Rng r1 = rng.fork(101), r2 = rng.fork(102), r3 = rng.fork(103);
    init_params(dp.psi1, r1);
    init_params(dp.psi2, r2);

    dp.W = Tensor({d_z, d_z});
    dp.w = Tensor({d_z});
    dp.p = Tensor({d_h});
    const double wb = std::sqrt(1.0 / d_z);
    for (auto& v : dp.W.data) v = r3.uniform(-wb, wb);
    for (auto& v : dp.w.data) v = r3.uniform(-0.1, 0.1);
    // Lambda = -exp(p) starts in [-1.65, -0.6]: memory horizons of a few
    // samples, well inside the training windows.
    for (auto& v : dp.p.data) v = r3.uniform(-0.5, 0.5);
    return dp;
}

// --- plain path -------------------------------------------------------------

Tensor build_A(const Tensor& W, const Tensor& w) {
    if (W.rank() != 2 || W.shape[0] != W.shape[1]) throw ShapeError("build_A: W must be square");
    if (w.rank() != 1 || w.shape[0] != W.shape[0]) throw ShapeError("build_A: w size mismatch");
    const std::int64_t n = W.shape[0];
    Tensor A({n, n});
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < n; ++j) A.at(i, j) = W.at(i, j) - W.at(j, i);
    for (std::int64_t i = 0; i < n; ++i) A.at(i, i) -= std::abs(w[i]);
    return A;
}

Tensor lambda_vector(const Tensor& p) {
    Tensor lam = p;
    for (auto& v : lam.data) v = -std::exp(v);
    return lam;
}

Tensor lift(const DynamicsParams& dp, const Tensor& z_rows) {
    if (dp.d_h == dp.d_z) return z_rows;
    Tensor extra = forward(dp.psi2, z_rows);
    return kernels::concat_cols(z_rows, extra);
}

Tensor closure(const DynamicsParams& dp, const Tensor& z_rows, const Tensor& h_rows) {
    return forward(dp.psi1, z_rows, &h_rows);
}

RhsOut rhs(const DynamicsParams& dp, const LatentState& s) {
    Tensor A = build_A(dp.W, dp.w);
    Tensor lam = lambda_vector(dp.p);
    Tensor zr = row(s.z), hr = row(s.h);

    Tensor Az = kernels::matmul(zr, kernels::transpose2(A));
    Tensor psi1v = closure(dp, zr, hr);
    Tensor dz = Az;
    add_inplace(dz, psi1v);

    Tensor dh = lift(dp, zr);
    for (std::int64_t j = 0; j < dp.d_h; ++j) dh.at(0, j) += lam[j] * hr.at(0, j);
    return {unrow(dz), unrow(dh)};
}

Sirk3Workspace prepare_sirk3(const DynamicsParams& dp, double dt) {
    if (!(dt > 0.0)) throw ConfigError("sirk3: dt must be positive");
    Sirk3Workspace ws;
    ws.dt = dt;
    ws.frac = kStageFrac;
    ws.A = build_A(dp.W, dp.w);
    ws.At = kernels::transpose2(ws.A);
    ws.lam = lambda_vector(dp.p);
    const std::int64_t n = ws.A.shape[0];
    for (int k = 0; k < 3; ++k) {
        const double a = 0.5 * ws.frac[static_cast<std::size_t>(k)] * dt;
        std::vector<double> M(static_cast<std::size_t>(n) * n);
        for (std::int64_t i = 0; i < n; ++i)
            for (std::int64_t j = 0; j < n; ++j)
                M[static_cast<std::size_t>(i * n + j)] = (i == j ? 1.0 : 0.0) - a * ws.A.at(i, j);
        ws.stage_lu[static_cast<std::size_t>(k)] = linalg::DenseLU(M.data(), static_cast<int>(n));
    }
    return ws;
}

LatentState sirk3_step_ws(const DynamicsParams& dp, const Sirk3Workspace& ws, const LatentState& s) {
    const std::int64_t dz = dp.d_z, dh = dp.d_h;
    Tensor z0 = row(s.z), h0 = row(s.h);

    // (I + a A) z0 and (1 + a lam) h0 pieces reused by every stage via a.
    Tensor Az0 = kernels::matmul(z0, ws.At);

    Tensor zc = z0, hc = h0;  // previous stage values feeding the nonlinear terms
    for (int k = 0; k < 3; ++k) {
        const double c = ws.frac[static_cast<std::size_t>(k)];
        const double a = 0.5 * c * ws.dt;

        Tensor psi1v = closure(dp, zc, hc);
        Tensor rz({1, dz});
        for (std::int64_t j = 0; j < dz; ++j) rz.at(0, j) = z0.at(0, j) + a * Az0.at(0, j) + c * ws.dt * psi1v.at(0, j);
        ws.stage_lu[static_cast<std::size_t>(k)].solve(&rz.data[0]);

        Tensor psi2v = lift(dp, zc);
        Tensor rh({1, dh});
        for (std::int64_t j = 0; j < dh; ++j) {
            const double denom = 1.0 - a * ws.lam[j];
            rh.at(0, j) = (h0.at(0, j) + a * ws.lam[j] * h0.at(0, j) + c * ws.dt * psi2v.at(0, j)) / denom;
        }
        zc = std::move(rz);
        hc = std::move(rh);
    }
    return {unrow(zc), unrow(hc), s.t + ws.dt};
}

LatentState sirk3_step(const LatentState& s, double dt, const DynamicsParams& dp) {
    Sirk3Workspace ws = prepare_sirk3(dp, dt);
    return sirk3_step_ws(dp, ws, s);
}

std::vector<LatentState> integrate(const LatentState& s0, double dt, int n_steps, const DynamicsParams& dp) {
    if (n_steps < 1) throw ConfigError("integrate: n_steps must be >= 1");
    Sirk3Workspace ws = prepare_sirk3(dp, dt);
    std::vector<LatentState> out;
    out.reserve(static_cast<std::size_t>(n_steps) + 1);
    out.push_back(s0);
    for (int i = 0; i < n_steps; ++i) {
        out.push_back(sirk3_step_ws(dp, ws, out.back()));
        const LatentState& ls = out.back();
        if (!ls.z.all_finite() || !ls.h.all_finite())
            throw SimulationError("integrate: non-finite latent state at step " + std::to_string(i + 1));
    }
    return out;
}

double memory_horizon(const Tensor& p, double eps_mem) {
    if (!(eps_mem > 0.0) || eps_mem > 1.0) throw ConfigError("memory_horizon: eps_mem must lie in (0, 1]");
    double pmin = p[0];
    for (double v : p.data) pmin = std::min(pmin, v);
    const double lam_slowest = std::exp(pmin);  // |lambda| closest to zero
    return std::log(1.0 / eps_mem) / lam_slowest;
}

namespace {

std::vector<double> trapezoid_weights(std::int64_t n_rows, double delta) {
    std::vector<double> c(static_cast<std::size_t>(n_rows), delta);
    c.front() = 0.5 * delta;
    c.back() = 0.5 * delta;
    return c;
}

void check_history(const Tensor& z_history, int d_z, double delta, double tau) {
    if (z_history.rank() != 2 || z_history.shape[1] != d_z)
        throw ShapeError("init_memory: history must be (N+1, d_z)");
    if (z_history.shape[0] < 2) throw DataError("init_memory: empty history; provide a warm-up prefix");
    const double span = delta * static_cast<double>(z_history.shape[0] - 1);
    if (span + 1e-12 < tau)
        throw DataError("init_memory: history spans " + std::to_string(span) + " s but the memory horizon is " +
                        std::to_string(tau) + " s; provide a longer warm-up");
}

}  // namespace

Tensor init_memory(const DynamicsParams& dp, const Tensor& z_history, double delta, double eps_mem) {
    const double tau = memory_horizon(dp.p, eps_mem);
    check_history(z_history, dp.d_z, delta, tau);
    const std::int64_t n1 = z_history.shape[0];
    Tensor lam = lambda_vector(dp.p);

    Tensor lifted = lift(dp, z_history);  // (N+1, d_h)
    // weight(i, j) = exp(lam_j * |s_i|), s_i = (i - N) * delta
    for (std::int64_t i = 0; i < n1; ++i) {
        const double sabs = delta * static_cast<double>(n1 - 1 - i);
        for (std::int64_t j = 0; j < dp.d_h; ++j) lifted.at(i, j) *= std::exp(lam[j] * sabs);
    }
    const auto c = trapezoid_weights(n1, delta);
    Tensor h0({dp.d_h});
    for (std::int64_t i = 0; i < n1; ++i)
        for (std::int64_t j = 0; j < dp.d_h; ++j) h0[j] += c[static_cast<std::size_t>(i)] * lifted.at(i, j);
    return h0;
}

// --- tape path ---------------------------------------------------------------

BoundDynamics bind_dynamics(Tape& tape, const DynamicsParams& dp) {
    BoundDynamics bd;
    bd.src = &dp;
    bd.W = tape.leaf(dp.W);
    bd.w = tape.leaf(dp.w);
    bd.p = tape.leaf(dp.p);
    bd.A = sub(sub(bd.W, transpose2(bd.W)), make_diag(vabs(bd.w)));
    bd.At = transpose2(bd.A);
    bd.lam = neg(vexp(bd.p));
    bd.psi1 = bind(tape, dp.psi1);
    bd.psi2 = bind(tape, dp.psi2);
    return bd;
}

Var lift_t(const BoundDynamics& bd, Var z_rows) {
    if (bd.src->d_h == bd.src->d_z) return z_rows;
    Var extra = apply(bd.psi2, z_rows);
    return concat_cols(z_rows, extra);
}

Var closure_t(const BoundDynamics& bd, Var z_rows, Var h_rows) { return apply(bd.psi1, z_rows, h_rows); }

std::pair<Var, Var> rhs_t(const BoundDynamics& bd, Var z, Var h) {
    Var dz = add(matmul(z, bd.At), closure_t(bd, z, h));
    Var dh = add(lift_t(bd, z), mul_rowvec(h, bd.lam));
    return {dz, dh};
}

std::pair<Var, Var> sirk3_step_t(const BoundDynamics& bd, Var z, Var h, double dt) {
    if (!(dt > 0.0)) throw ConfigError("sirk3: dt must be positive");
    Var Az0 = matmul(z, bd.At);
    Var zc = z, hc = h;
    for (int k = 0; k < 3; ++k) {
        const double c = kStageFrac[static_cast<std::size_t>(k)];
        const double a = 0.5 * c * dt;

        Var rz = add(add(z, scale(Az0, a)), scale(closure_t(bd, zc, hc), c * dt));
        Var zk = solve_id_minus(bd.A, rz, a);

        Var lam_h0 = mul_rowvec(h, bd.lam);
        Var rh = add(add(h, scale(lam_h0, a)), scale(lift_t(bd, zc), c * dt));
        Var denom = add_scalar(scale(bd.lam, -a), 1.0);
        Var hk = div_rowvec(rh, denom);

        zc = zk;
        hc = hk;
    }
    return {zc, hc};
}

Var init_memory_t(const BoundDynamics& bd, Var z_history, double delta, double eps_mem) {
    const DynamicsParams& dp = *bd.src;
    Tape& tape = *z_history.tape;
    const Tensor& zv = tape.val(z_history);
    const double tau = memory_horizon(dp.p, eps_mem);
    check_history(zv, dp.d_z, delta, tau);
    const std::int64_t n1 = zv.shape[0];

    Tensor sabs({n1});
    for (std::int64_t i = 0; i < n1; ++i) sabs[i] = delta * static_cast<double>(n1 - 1 - i);
    Var sabs_v = tape.leaf(sabs);

    Var lifted = lift_t(bd, z_history);               // (N+1, d_h)
    Var weights = vexp(outer(sabs_v, bd.lam));        // exp(lam_j * |s_i|)
    Var weighted = mul(lifted, weights);
    return weighted_sum_rows(weighted, trapezoid_weights(n1, delta));  // (1, d_h)
}

}  // namespace iled::dyn
