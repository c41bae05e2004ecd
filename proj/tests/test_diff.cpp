#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "common.hpp"
#include "iled/checkpoint.hpp"
#include "iled/errors.hpp"
#include "iled/gradcheck.hpp"
#include "iled/ops.hpp"

using namespace iled;
using namespace iled::diff;
using testutil::random_tensor;

namespace {

// Single-layer network wrapper for the per-kind gradient checks.
Network one_layer(LayerSpec spec) {
    Network n;
    n.add(spec);
    return n;
}

GradCheckReport check_layer(LayerSpec spec, std::vector<std::int64_t> in_shape, std::uint64_t seed) {
    Rng rng(seed);
    Network n = one_layer(spec);
    if (spec.kind == LayerKind::Centering) {
        n.centering = std::make_shared<CenteringState>();
        n.centering->mu = random_tensor({in_shape.back()}, rng);
    }
    init_params(n, rng);
    Tensor x = random_tensor(in_shape, rng);
    if (spec.kind == LayerKind::Concat) {
        Tensor aux = random_tensor({in_shape[0], spec.in_ch}, rng);
        return finite_diff_check(n, x, 1e-6, 1e-5, seed, &aux);
    }
    return finite_diff_check(n, x, 1e-6, 1e-5, seed);
}

}  // namespace

TEST_CASE("forward examples: identity linear, delta conv kernel, pooling means") {
    // Linear with identity weights, zero bias
    Network lin = one_layer(LayerSpec::make_linear(2, 2));
    lin.params[0][0].at(0, 0) = 1.0;
    lin.params[0][0].at(1, 1) = 1.0;
    Tensor x({1, 2}, {1.0, 2.0});
    Tensor y = forward(lin, x);
    CHECK(y.at(0, 0) == doctest::Approx(1.0));
    CHECK(y.at(0, 1) == doctest::Approx(2.0));

    // Conv1d 1->1, kernel [0,1,0], same padding: identity
    Network conv = one_layer(LayerSpec::make_conv1d_same(1, 1, 3));
    conv.params[0][0].data = {0.0, 1.0, 0.0};
    Tensor cx({1, 1, 3}, {1.0, 2.0, 3.0});
    Tensor cy = forward(conv, cx);
    CHECK(cy.data[0] == doctest::Approx(1.0));
    CHECK(cy.data[1] == doctest::Approx(2.0));
    CHECK(cy.data[2] == doctest::Approx(3.0));

    // AvgPool1d(2,2): window means
    Network pool = one_layer(LayerSpec::make_avg_pool1d(2, 2));
    Tensor px({1, 1, 4}, {1.0, 3.0, 5.0, 7.0});
    Tensor py = forward(pool, px);
    CHECK(py.data[0] == doctest::Approx(2.0));
    CHECK(py.data[1] == doctest::Approx(6.0));
}

TEST_CASE("upsample linear matches the centered-grid convention") {
    Network up = one_layer(LayerSpec::make_upsample(2));
    Tensor x({1, 1, 2}, {1.0, 2.0});
    Tensor y = forward(up, x);
    REQUIRE(y.shape[2] == 4);
    CHECK(y.data[0] == doctest::Approx(1.0));
    CHECK(y.data[1] == doctest::Approx(1.25));
    CHECK(y.data[2] == doctest::Approx(1.75));
    CHECK(y.data[3] == doctest::Approx(2.0));
}

TEST_CASE("silu derivative at zero is one half") {
    Tape tape;
    Var x = tape.leaf(Tensor({3}, {0.0, 0.0, 0.0}));
    Var y = sum_all(silu(x));
    tape.backward(y);
    for (double g : tape.grad(x).data) CHECK(g == doctest::Approx(0.5));
}

TEST_CASE("zero loss seed produces zero gradients") {
    Rng rng(7);
    Network n;
    n.add(LayerSpec::make_linear(3, 4));
    n.add(LayerSpec::make_silu());
    init_params(n, rng);
    Tensor x = random_tensor({2, 3}, rng);
    auto rf = network_forward(n, x, true);
    rf.tape->backward(rf.out, Tensor::zeros(rf.y.shape));
    for (const auto& lp : rf.param_vars)
        for (Var v : lp)
            for (double g : rf.tape->grad(v).data) CHECK(g == 0.0);
}

TEST_CASE("linear-map gradient: dW = outer(1, x)") {
    Tape tape;
    Tensor W0 = Tensor::zeros({2, 3});
    Var W = tape.leaf(W0);
    Var b = tape.leaf(Tensor::zeros({2}));
    Tensor xv({1, 3}, {1.5, -2.0, 0.5});
    Var x = tape.leaf(xv);
    Var y = linear(x, W, b);
    tape.backward(sum_all(y));
    const Tensor& gW = tape.grad(W);
    for (std::int64_t o = 0; o < 2; ++o)
        for (std::int64_t i = 0; i < 3; ++i) CHECK(gW.at(o, i) == doctest::Approx(xv.at(0, i)));
}

TEST_CASE("gradient exactness per layer kind (central differences, tol 1e-5)") {
    CHECK(check_layer(LayerSpec::make_linear(5, 4), {3, 5}, 1).pass);
    CHECK(check_layer(LayerSpec::make_conv1d_same(2, 3, 5), {2, 2, 9}, 2).pass);
    CHECK(check_layer(LayerSpec::make_conv_transpose1d(2, 3, 5, 2), {2, 2, 9}, 3).pass);
    CHECK(check_layer(LayerSpec::make_avg_pool1d(2, 2), {2, 3, 8}, 4).pass);
    CHECK(check_layer(LayerSpec::make_upsample(2), {2, 3, 5}, 5).pass);
    CHECK(check_layer(LayerSpec::make_pad(2, 3, 0.7), {2, 2, 6}, 6).pass);
    CHECK(check_layer(LayerSpec::make_unpad(1, 2), {2, 2, 7}, 7).pass);
    CHECK(check_layer(LayerSpec::make_silu(), {3, 6}, 8).pass);
    CHECK(check_layer(LayerSpec::make_tanh_affine(0.5, 1.0), {3, 6}, 9).pass);
    CHECK(check_layer(LayerSpec::make_concat(3), {4, 5}, 10).pass);
    CHECK(check_layer(LayerSpec::make_centering(), {4, 5}, 11).pass);

    // Flatten / Unflatten through a composition (pure reshapes)
    Rng rng(12);
    Network n;
    n.add(LayerSpec::make_unflatten(2, 3));
    n.add(LayerSpec::make_conv1d_same(2, 2, 3));
    n.add(LayerSpec::make_flatten());
    init_params(n, rng);
    Tensor x = random_tensor({2, 6}, rng);
    CHECK(finite_diff_check(n, x, 1e-6, 1e-5).pass);
}

TEST_CASE("gradient exactness for tape ops beyond the layer vocabulary") {
    Rng rng(21);
    // solve (I - cA)x = r and the ops feeding the dynamics
    Tensor A0 = random_tensor({4, 4}, rng, -0.4, 0.4);
    Tensor R0 = random_tensor({3, 4}, rng);
    Tensor v0 = random_tensor({4}, rng, 0.5, 2.0);
    Tensor u0 = random_tensor({3}, rng);

    std::vector<std::pair<std::string, Tensor*>> targets = {{"A", &A0}, {"R", &R0}, {"v", &v0}, {"u", &u0}};
    auto build = [&](Tape& tape) {
        Var A = tape.leaf(A0);
        Var R = tape.leaf(R0);
        Var v = tape.leaf(v0);
        Var u = tape.leaf(u0);
        Var X = solve_id_minus(A, R, 0.37);
        Var Y = div_rowvec(mul_rowvec(add_rowvec(X, v), v), v);
        Var D = matmul(Y, sub(make_diag(vabs(v)), transpose2(A)));
        Var O = outer(u, v);
        Var W = vexp(scale(mean_rows(concat_cols(D, slice_rows(R, 0, 3))), 0.3));
        return std::array<Var, 6>{A, R, v, u, sumsq(W), sumsq(O)};
    };
    auto value = [&]() {
        Tape tape;
        auto vars = build(tape);
        return tape.scalar(vars[4]) + 0.5 * tape.scalar(vars[5]);
    };
    auto grads = [&]() {
        Tape tape;
        auto vars = build(tape);
        Var loss = add(vars[4], scale(vars[5], 0.5));
        tape.backward(loss);
        return std::vector<Tensor>{tape.grad(vars[0]), tape.grad(vars[1]), tape.grad(vars[2]), tape.grad(vars[3])};
    };
    auto rep = finite_diff_generic(targets, value, grads, 1e-6, 1e-5);
    INFO(rep.summary());
    CHECK(rep.pass);
}

TEST_CASE("linearity of the linear layer kinds (biases zeroed)") {
    Rng rng(31);
    Network n;
    n.add(LayerSpec::make_pad(2, 1, 0.0));
    n.add(LayerSpec::make_conv1d_same(2, 3, 5));
    n.add(LayerSpec::make_avg_pool1d(2, 2));
    n.add(LayerSpec::make_upsample(2));
    n.add(LayerSpec::make_conv_transpose1d(3, 2, 5, 2));
    init_params(n, rng);
    testutil::zero_params(n);
    for (auto& lp : n.params)
        if (!lp.empty())
            for (auto& v : lp[0].data) v = rng.uniform(-1, 1);  // weights only, biases stay zero

    Tensor x = random_tensor({2, 2, 9}, rng);
    Tensor y = random_tensor({2, 2, 9}, rng);
    const double a = 1.7, b = -0.6;
    Tensor mix = x;
    for (std::size_t i = 0; i < mix.data.size(); ++i) mix.data[i] = a * x.data[i] + b * y.data[i];
    Tensor fx = forward(n, x), fy = forward(n, y), fmix = forward(n, mix);
    for (std::size_t i = 0; i < fmix.data.size(); ++i)
        CHECK(fmix.data[i] == doctest::Approx(a * fx.data[i] + b * fy.data[i]).epsilon(1e-12));
}

TEST_CASE("determinism: identical seeds give bit-identical outputs and gradients") {
    auto run = [](std::uint64_t seed) {
        Rng rng(seed);
        Network n;
        n.add(LayerSpec::make_conv1d_same(1, 4, 5));
        n.add(LayerSpec::make_silu());
        n.add(LayerSpec::make_flatten());
        n.add(LayerSpec::make_linear(4 * 8, 3));
        init_params(n, rng);
        Tensor x = random_tensor({2, 1, 8}, rng);
        auto rf = network_forward(n, x, true);
        rf.tape->backward(sum_all(rf.out));
        std::vector<double> out = rf.y.data;
        for (const auto& lp : rf.param_vars)
            for (Var v : lp)
                for (double g : rf.tape->grad(v).data) out.push_back(g);
        return out;
    };
    auto a = run(99), b = run(99);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("tape misuse is rejected") {
    Tape tape;
    Var x = tape.leaf(Tensor({2}, {1.0, 2.0}));
    Var y = sumsq(x);
    tape.backward(y);
    CHECK_THROWS_AS(tape.backward(y), Error);  // consumed tape

    Tape t2;
    Var z = t2.leaf(Tensor({2}, {1.0, 2.0}));
    CHECK_THROWS_AS(t2.backward(z), ShapeError);  // non-scalar loss
}

TEST_CASE("shape errors name the offending layer") {
    Network n;
    n.add(LayerSpec::make_linear(3, 2));
    Tensor x({2, 5});
    try {
        forward(n, x);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        CHECK(std::string(e.what()).find("layer 0") != std::string::npos);
        CHECK(std::string(e.what()).find("Linear") != std::string::npos);
    }
}

TEST_CASE("finite_diff_check validates its preconditions") {
    Rng rng(5);
    Network n = one_layer(LayerSpec::make_linear(2, 2));
    init_params(n, rng);
    Tensor x = random_tensor({1, 2}, rng);
    CHECK_THROWS_AS(finite_diff_check(n, x, 1e-2, 1e-5), ConfigError);  // h out of range
}

TEST_CASE("zero-parameter network: input-gradient check passes") {
    Network n;
    n.add(LayerSpec::make_avg_pool1d(2, 2));
    n.add(LayerSpec::make_upsample(2));
    Rng rng(17);
    Tensor x = random_tensor({2, 2, 8}, rng);
    auto rep = finite_diff_check(n, x, 1e-6, 1e-5);
    CHECK(rep.pass);
}

TEST_CASE("checkpoint blocks round-trip bit-exactly and reject corruption") {
    Rng rng(3);
    std::map<std::string, Tensor> blocks;
    blocks["a.weight"] = random_tensor({3, 4}, rng);
    blocks["b"] = random_tensor({7}, rng);
    blocks["scalar"] = Tensor::scalar(42.5);
    const std::string path = "ckpt_roundtrip.bin";
    save_blocks(path, blocks);
    auto loaded = load_blocks(path);
    REQUIRE(loaded.size() == blocks.size());
    for (const auto& [name, t] : blocks) {
        REQUIRE(loaded.count(name) == 1);
        CHECK(loaded[name].shape == t.shape);
        CHECK(testutil::max_abs_diff(loaded[name], t) == 0.0);
    }

    // corrupt the magic
    {
        std::ofstream os(path, std::ios::binary | std::ios::in);
        os.seekp(0);
        os.write("BOGUS!!!", 8);
    }
    CHECK_THROWS_AS(load_blocks(path), ConfigError);
}
