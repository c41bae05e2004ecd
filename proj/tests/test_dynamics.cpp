#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "common.hpp"
#include "iled/analysis.hpp"
#include "iled/dynamics.hpp"
#include "iled/errors.hpp"
#include "iled/gradcheck.hpp"
#include "iled/ops.hpp"

using namespace iled;
using namespace iled::diff;
using dyn::DynamicsParams;
using dyn::LatentState;
using testutil::random_tensor;

namespace {

DynamicsParams small_dynamics(std::uint64_t seed, int d_z = 2, int d_h = 3) {
    Rng rng(seed);
    std::vector<int> p1 = {d_z + d_h, 4, d_z};
    std::vector<int> p2 = d_h > d_z ? std::vector<int>{d_z, 3, d_h - d_z} : std::vector<int>{};
    return dyn::make_dynamics(d_z, d_h, p1, p2, rng);
}

// Rotation-only dynamics: A = [[0, w],[-w, 0]], Psi1 == 0, identity lift.
DynamicsParams rotation_dynamics(double omega, double lambda) {
    Rng rng(1);
    DynamicsParams dp = dyn::make_dynamics(2, 2, {4, 3, 2}, {}, rng);
    testutil::zero_params(dp.psi1);
    for (auto& v : dp.W.data) v = 0.0;
    dp.W.at(0, 1) = omega;  // W - W^T gives the +-omega rotation block
    for (auto& v : dp.w.data) v = 0.0;
    for (auto& v : dp.p.data) v = std::log(std::abs(lambda));
    return dp;
}

// Classical RK4 on the coupled (z,h) system; the independent oracle for the
// integrator's convergence order.
LatentState rk4_integrate(const DynamicsParams& dp, LatentState s, double dt, int steps) {
    auto f = [&](const LatentState& st) { return dyn::rhs(dp, st); };
    for (int i = 0; i < steps; ++i) {
        auto add_state = [&](const LatentState& a, double c, const dyn::RhsOut& d) {
            LatentState r = a;
            for (std::int64_t j = 0; j < r.z.size(); ++j) r.z[j] += c * d.dz[j];
            for (std::int64_t j = 0; j < r.h.size(); ++j) r.h[j] += c * d.dh[j];
            return r;
        };
        auto k1 = f(s);
        auto k2 = f(add_state(s, dt / 2, k1));
        auto k3 = f(add_state(s, dt / 2, k2));
        auto k4 = f(add_state(s, dt, k3));
        for (std::int64_t j = 0; j < s.z.size(); ++j)
            s.z[j] += dt / 6.0 * (k1.dz[j] + 2 * k2.dz[j] + 2 * k3.dz[j] + k4.dz[j]);
        for (std::int64_t j = 0; j < s.h.size(); ++j)
            s.h[j] += dt / 6.0 * (k1.dh[j] + 2 * k2.dh[j] + 2 * k3.dh[j] + k4.dh[j]);
        s.t += dt;
    }
    return s;
}

}  // namespace

TEST_CASE("build_A: zero and skew-rotation examples") {
    Tensor W0 = Tensor::zeros({2, 2});
    Tensor w0 = Tensor::zeros({2});
    Tensor A = dyn::build_A(W0, w0);
    for (double v : A.data) CHECK(v == 0.0);

    Tensor W({2, 2}, {0.0, 1.0, 0.0, 0.0});
    A = dyn::build_A(W, w0);
    CHECK(A.at(0, 1) == 1.0);
    CHECK(A.at(1, 0) == -1.0);
    auto rep = analysis::eigen_frequencies(A);  // eigenvalues +-i
    REQUIRE(rep.eigenvalues.size() == 2);
    CHECK(std::abs(rep.eigenvalues[0].real()) < 1e-14);
    CHECK(std::abs(std::abs(rep.eigenvalues[0].imag()) - 1.0) < 1e-12);
}

TEST_CASE("stability by construction over random parameter draws (eigen-solve oracle)") {
    Rng rng(123);
    double worst = -1e300;
    for (int trial = 0; trial < 10000; ++trial) {
        const int n = 2 + static_cast<int>(rng.below(5));
        Tensor W = random_tensor({n, n}, rng, -2.0, 2.0);
        Tensor w = random_tensor({n}, rng, -1.5, 1.5);
        auto rep = analysis::eigen_frequencies(dyn::build_A(W, w));
        worst = std::max(worst, rep.max_real_part);

        Tensor p = random_tensor({n}, rng, -3.0, 3.0);
        for (double lam : dyn::lambda_vector(p).data) CHECK(lam < 0.0);
    }
    CHECK(worst <= 1e-12);
}

TEST_CASE("rhs: closure off reduces to A z; lift fixed point; zero state") {
    DynamicsParams dp = small_dynamics(7);
    testutil::zero_params(dp.psi1);

    Rng rng(8);
    LatentState s{random_tensor({2}, rng), random_tensor({3}, rng), 0.0};
    auto out = dyn::rhs(dp, s);
    Tensor A = dyn::build_A(dp.W, dp.w);
    for (int i = 0; i < 2; ++i) {
        double expect = A.at(i, 0) * s.z[0] + A.at(i, 1) * s.z[1];
        CHECK(out.dz[i] == doctest::Approx(expect).epsilon(1e-14));
    }

    // dh = lift(z) + lam*h vanishes at h = -lift(z)/lam
    Tensor lam = dyn::lambda_vector(dp.p);
    Tensor lift = dyn::lift(dp, Tensor({1, 2}, s.z.data));
    LatentState fixed = s;
    for (int j = 0; j < 3; ++j) fixed.h[j] = -lift.at(0, j) / lam[j];
    auto out2 = dyn::rhs(dp, fixed);
    for (int j = 0; j < 3; ++j) CHECK(std::abs(out2.dh[j]) < 1e-13);

    // zero state, zero biases -> identically zero rhs
    DynamicsParams dpz = small_dynamics(9);
    testutil::zero_params(dpz.psi1);
    testutil::zero_params(dpz.psi2);
    LatentState z0{Tensor::zeros({2}), Tensor::zeros({3}), 0.0};
    auto out3 = dyn::rhs(dpz, z0);
    for (double v : out3.dz.data) CHECK(v == 0.0);
    for (double v : out3.dh.data) CHECK(v == 0.0);
}

TEST_CASE("identity channel of the lift is bit-exact") {
    DynamicsParams dp = small_dynamics(10, 3, 7);
    Rng rng(11);
    Tensor z = random_tensor({5, 3}, rng);
    Tensor lifted = dyn::lift(dp, z);
    REQUIRE(lifted.shape == std::vector<std::int64_t>{5, 7});
    for (std::int64_t i = 0; i < 5; ++i)
        for (std::int64_t j = 0; j < 3; ++j) CHECK(lifted.at(i, j) == z.at(i, j));
}

TEST_CASE("sirk3 scalar decay matches the closed form (1-0.05)/(1+0.05)") {
    Rng rng(2);
    DynamicsParams dp = dyn::make_dynamics(1, 1, {2, 2, 1}, {}, rng);
    testutil::zero_params(dp.psi1);
    dp.W.data = {0.0};
    dp.w.data = {1.0};  // A = -diag(|1|) = -1
    dp.p.data = {0.0};
    LatentState s{Tensor({1}, {1.0}), Tensor({1}, {0.0}), 0.0};
    LatentState r = dyn::sirk3_step(s, 0.1, dp);
    CHECK(std::abs(r.z[0] - 0.95 / 1.05) < 1e-12);
    CHECK(r.t == doctest::Approx(0.1));
}

TEST_CASE("dt -> 0 limit leaves the state unchanged") {
    DynamicsParams dp = small_dynamics(14);
    Rng rng(15);
    LatentState s{random_tensor({2}, rng), random_tensor({3}, rng), 0.0};
    LatentState r = dyn::sirk3_step(s, 1e-12, dp);
    CHECK(testutil::max_abs_diff(r.z, s.z) < 1e-9 * std::max(1.0, norm2(s.z)));
    CHECK(testutil::max_abs_diff(r.h, s.h) < 1e-9 * std::max(1.0, norm2(s.h)));
}

TEST_CASE("Cayley norm preservation for skew A (per-step and 1000-step drift)") {
    DynamicsParams dp = rotation_dynamics(1.0, 1.0);
    LatentState s{Tensor({2}, {0.8, -0.6}), Tensor::zeros({2}), 0.0};
    const double n0 = norm2(s.z);

    LatentState one = dyn::sirk3_step(s, 0.37, dp);
    CHECK(std::abs(norm2(one.z) - n0) < 1e-12);

    auto rollout = dyn::integrate(s, 0.01, 1000, dp);
    double drift = 0;
    for (const auto& st : rollout) drift = std::max(drift, std::abs(norm2(st.z) - n0));
    CHECK(drift < 1e-9);
}

TEST_CASE("integrate with one step equals sirk3_step; errors carry the step index") {
    DynamicsParams dp = small_dynamics(21);
    Rng rng(22);
    LatentState s{random_tensor({2}, rng), random_tensor({3}, rng), 0.0};
    auto seq = dyn::integrate(s, 0.2, 1, dp);
    LatentState direct = dyn::sirk3_step(s, 0.2, dp);
    CHECK(testutil::max_abs_diff(seq[1].z, direct.z) == 0.0);
    CHECK(testutil::max_abs_diff(seq[1].h, direct.h) == 0.0);

    // blow the state up through huge weights to hit the finite check
    DynamicsParams bad = small_dynamics(23);
    for (auto& v : bad.psi1.params[1][0].data) v = 1e8;
    for (auto& v : bad.psi1.params[3][0].data) v = 1e8;
    LatentState s2{Tensor({2}, {1e3, 1e3}), Tensor::zeros({3}), 0.0};
    try {
        dyn::integrate(s2, 10.0, 50, bad);
        FAIL("expected SimulationError");
    } catch (const SimulationError& e) {
        CHECK(std::string(e.what()).find("step") != std::string::npos);
    }
}

TEST_CASE("linear decay matches the exact exponential to O(dt^2)") {
    Rng rng(3);
    DynamicsParams dp = dyn::make_dynamics(2, 2, {4, 2, 2}, {}, rng);
    testutil::zero_params(dp.psi1);
    dp.W = Tensor::zeros({2, 2});
    dp.w = Tensor({2}, {1.0, 1.0});  // A = -I
    LatentState s{Tensor({2}, {1.0, -2.0}), Tensor::zeros({2}), 0.0};

    for (double dt : {0.1, 0.05}) {
        const int n = static_cast<int>(std::lround(1.0 / dt));
        auto roll = dyn::integrate(s, dt, n, dp);
        const double exact = std::exp(-1.0);
        const double err = std::abs(roll.back().z[0] - exact * s.z[0]);
        CHECK(err < 0.5 * dt * dt);  // second-order global error
    }
}

TEST_CASE("observed convergence order >= 1.9 on a smooth nonlinear system (RK4 oracle)") {
    DynamicsParams dp = small_dynamics(31);
    // temper the weights so the system is smooth and non-stiff
    for (auto& lp : dp.psi1.params)
        for (auto& t : lp)
            for (auto& v : t.data) v *= 0.5;
    Rng rng(32);
    LatentState s0{random_tensor({2}, rng), random_tensor({3}, rng), 0.0};

    LatentState ref = rk4_integrate(dp, s0, 1e-4, 20000);  // T = 2

    std::vector<double> dts = {0.2, 0.1, 0.05, 0.025};
    std::vector<double> errs;
    for (double dt : dts) {
        auto roll = dyn::integrate(s0, dt, static_cast<int>(std::lround(2.0 / dt)), dp);
        double e = 0;
        for (int j = 0; j < 2; ++j) e += std::pow(roll.back().z[j] - ref.z[j], 2);
        for (int j = 0; j < 3; ++j) e += std::pow(roll.back().h[j] - ref.h[j], 2);
        errs.push_back(std::sqrt(e));
    }
    // least-squares slope of log(err) vs log(dt)
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < dts.size(); ++i) {
        const double x = std::log(dts[i]), y = std::log(errs[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double n = static_cast<double>(dts.size());
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    INFO("errors: " << errs[0] << " " << errs[1] << " " << errs[2] << " " << errs[3] << ", slope " << slope);
    CHECK(slope >= 1.9);
}

TEST_CASE("memory horizon: log formula, slowest mode, boundary case") {
    Tensor p({3}, {0.0, 0.0, 0.0});  // all lambda = -1
    CHECK(dyn::memory_horizon(p, 1e-2) == doctest::Approx(std::log(100.0)));

    Tensor p2({2}, {0.0, std::log(10.0)});  // lambda in {-1, -10}
    CHECK(dyn::memory_horizon(p2, 1e-2) == doctest::Approx(std::log(100.0)));

    CHECK(dyn::memory_horizon(p, 1.0) == doctest::Approx(0.0));
    CHECK_THROWS_AS(dyn::memory_horizon(p, 0.0), ConfigError);

    // guarantee e^{lambda tau} <= eps for every entry
    Rng rng(41);
    Tensor p3 = random_tensor({6}, rng, -2.0, 2.0);
    const double tau = dyn::memory_horizon(p3, 1e-2);
    for (double lam : dyn::lambda_vector(p3).data) CHECK(std::exp(lam * tau) <= 1e-2 + 1e-12);
}

TEST_CASE("init_memory: constant forcing approaches (1 - eps) * psi/|lambda|") {
    Rng rng(43);
    DynamicsParams dp = dyn::make_dynamics(1, 1, {2, 2, 1}, {}, rng);  // identity lift
    dp.p.data = {0.0};                                                 // lambda = -1
    const double tau = dyn::memory_horizon(dp.p, 1e-2);
    const int n = 4000;
    const double delta = tau / n;
    Tensor hist({n + 1, 1});
    for (int i = 0; i <= n; ++i) hist.at(i, 0) = 0.7;  // constant history
    Tensor h0 = dyn::init_memory(dp, hist, delta, 1e-2);
    CHECK(h0[0] == doctest::Approx(0.7 * (1.0 - 1e-2)).epsilon(1e-4));

    // degenerate histories are rejected with guidance
    Tensor empty({1, 1});
    CHECK_THROWS_AS(dyn::init_memory(dp, empty, delta, 1e-2), DataError);
    Tensor tooshort({5, 1});
    try {
        dyn::init_memory(dp, tooshort, delta, 1e-2);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("warm-up") != std::string::npos);
    }
}

TEST_CASE("init_memory quadrature reproduces the first-order low-pass gain") {
    Rng rng(44);
    DynamicsParams dp = dyn::make_dynamics(1, 1, {2, 2, 1}, {}, rng);
    const double lambda = -0.8, omega = 1.7;
    dp.p.data = {std::log(-lambda)};
    const double eps = 1e-3;
    const double tau = dyn::memory_horizon(dp.p, eps);
    const int n = 8000;
    const double delta = tau / n;

    auto quad = [&](double phase) {
        Tensor hist({n + 1, 1});
        for (int i = 0; i <= n; ++i) {
            const double s = (i - n) * delta;
            hist.at(i, 0) = std::sin(omega * s + phase);
        }
        return dyn::init_memory(dp, hist, delta, eps)[0];
    };
    const double amp = std::hypot(quad(0.0), quad(M_PI / 2));
    const double expected = 1.0 / std::sqrt(lambda * lambda + omega * omega);
    CHECK(std::abs(amp - expected) / expected < 0.02);
}

TEST_CASE("low-pass law through the integrator at three (lambda, omega) pairs") {
    struct Pair {
        double lambda, omega;
    };
    for (Pair c : {Pair{-1.0, 1.0}, Pair{-0.5, 2.0}, Pair{-2.0, 0.5}}) {
        DynamicsParams dp = rotation_dynamics(c.omega, c.lambda);
        // z rotates at omega; the identity lift drives h with cos/sin
        LatentState s{Tensor({2}, {1.0, 0.0}), Tensor::zeros({2}), 0.0};
        const double period = 2.0 * M_PI / c.omega;
        const double dt = period / 2000.0;
        const int transient = static_cast<int>(std::ceil(10.0 / std::abs(c.lambda) / dt));
        const int measure = static_cast<int>(std::ceil(period / dt));
        auto roll = dyn::integrate(s, dt, transient + measure, dp);
        double amp = 0;
        for (std::size_t i = roll.size() - static_cast<std::size_t>(measure); i < roll.size(); ++i)
            amp = std::max(amp, std::abs(roll[i].h[1]));
        const double expected = 1.0 / std::sqrt(c.lambda * c.lambda + c.omega * c.omega);
        INFO("lambda " << c.lambda << " omega " << c.omega << " amp " << amp << " expected " << expected);
        CHECK(std::abs(amp - expected) / expected < 0.02);
    }
}

TEST_CASE("discrete-gradient consistency: rhs, step, 5-step rollout, memory init") {
    DynamicsParams dp = small_dynamics(51);
    Rng rng(52);
    Tensor z0 = random_tensor({1, 2}, rng, -0.5, 0.5);
    Tensor h0 = random_tensor({1, 3}, rng, -0.5, 0.5);
    Tensor hist = random_tensor({9, 2}, rng, -0.5, 0.5);
    const double delta = dyn::memory_horizon(dp.p, 1e-2) / 8.0;

    std::vector<std::pair<std::string, Tensor*>> targets = {{"W", &dp.W}, {"w", &dp.w}, {"p", &dp.p},
                                                            {"z0", &z0},  {"h0", &h0}, {"hist", &hist}};
    for (std::size_t li = 0; li < dp.psi1.params.size(); ++li)
        for (std::size_t s = 0; s < dp.psi1.params[li].size(); ++s)
            targets.emplace_back("psi1." + std::to_string(li) + "." + std::to_string(s), &dp.psi1.params[li][s]);
    for (std::size_t li = 0; li < dp.psi2.params.size(); ++li)
        for (std::size_t s = 0; s < dp.psi2.params[li].size(); ++s)
            targets.emplace_back("psi2." + std::to_string(li) + "." + std::to_string(s), &dp.psi2.params[li][s]);

    auto scalar_of = [&](bool want_grads, std::vector<Tensor>* grads) {
        Tape tape;
        auto bd = dyn::bind_dynamics(tape, dp);
        Var z = tape.leaf(z0), h = tape.leaf(h0), hv = tape.leaf(hist);
        auto [dz, dh] = dyn::rhs_t(bd, z, h);
        Var acc = add(sumsq(dz), sumsq(dh));
        Var hm = dyn::init_memory_t(bd, hv, delta, 1e-2);
        Var zz = z, hh = hm;
        for (int i = 0; i < 5; ++i) {
            auto [zn, hn] = dyn::sirk3_step_t(bd, zz, hh, 0.15);
            zz = zn;
            hh = hn;
        }
        Var loss = add(acc, add(sumsq(zz), sumsq(hh)));
        const double v = tape.scalar(loss);
        if (want_grads) {
            tape.backward(loss);
            grads->clear();
            grads->push_back(tape.grad(bd.W));
            grads->push_back(tape.grad(bd.w));
            grads->push_back(tape.grad(bd.p));
            grads->push_back(tape.grad(z));
            grads->push_back(tape.grad(h));
            grads->push_back(tape.grad(hv));
            for (const auto& lp : bd.psi1.pv)
                for (Var pv : lp) grads->push_back(tape.grad(pv));
            for (const auto& lp : bd.psi2.pv)
                for (Var pv : lp) grads->push_back(tape.grad(pv));
        }
        return v;
    };

    auto value = [&]() { return scalar_of(false, nullptr); };
    auto grads = [&]() {
        std::vector<Tensor> g;
        scalar_of(true, &g);
        return g;
    };
    auto rep = finite_diff_generic(targets, value, grads, 1e-6, 1e-4);
    INFO(rep.summary());
    CHECK(rep.pass);
}

TEST_CASE("plain and tape paths produce identical forward values") {
    DynamicsParams dp = small_dynamics(61);
    Rng rng(62);
    LatentState s{random_tensor({2}, rng), random_tensor({3}, rng), 0.0};
    LatentState plain = dyn::sirk3_step(s, 0.21, dp);

    Tape tape;
    auto bd = dyn::bind_dynamics(tape, dp);
    Var z = tape.leaf(Tensor({1, 2}, s.z.data));
    Var h = tape.leaf(Tensor({1, 3}, s.h.data));
    auto [zn, hn] = dyn::sirk3_step_t(bd, z, h, 0.21);
    CHECK(testutil::max_abs_diff(Tensor({2}, tape.val(zn).data), plain.z) == 0.0);
    CHECK(testutil::max_abs_diff(Tensor({3}, tape.val(hn).data), plain.h) == 0.0);
}
