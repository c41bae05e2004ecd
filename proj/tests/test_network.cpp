#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "common.hpp"
#include "iled/autoencoder.hpp"
#include "iled/errors.hpp"
#include "iled/gradcheck.hpp"
#include "iled/model.hpp"

using namespace iled;
using namespace iled::diff;
using testutil::random_tensor;

namespace {

std::vector<std::vector<std::int64_t>> trace(const Network& n) { return shape_trace(n, n.input_shape); }

}  // namespace

TEST_CASE("FHN autoencoder reproduces the published layer-by-layer shape trace") {
    auto ae = ae::build_fhn_autoencoder();
    auto enc = trace(ae.encoder);
    const std::vector<std::vector<std::int64_t>> expected_enc = {
        {2, 128},           // ConstantPad1d (13,14)
        {8, 128}, {8, 64},  {8, 64},    // Conv(2->8), AvgPool, SiLU
        {16, 64}, {16, 32}, {16, 32},   // Conv(8->16), AvgPool, SiLU
        {32, 32}, {32, 16}, {32, 16},   // Conv(16->32), AvgPool, SiLU
        {4, 16},  {4, 8},   {4, 8},     // Conv(32->4), AvgPool, SiLU
        {32},     {2},      {2},        // Flatten, Linear(32->2), Centering
    };
    REQUIRE(enc.size() == expected_enc.size());
    for (std::size_t i = 0; i < enc.size(); ++i) CHECK(enc[i] == expected_enc[i]);

    auto dec = shape_trace(ae.decoder, {2});
    const std::vector<std::vector<std::int64_t>> expected_dec = {
        {32},      {32},      // Linear(2->32), SiLU
        {4, 8},               // Unflatten
        {4, 16},   {32, 16},  {32, 16},  // Upsample, ConvT(4->32), SiLU
        {32, 32},  {16, 32},  {16, 32},  // Upsample, ConvT(32->16), SiLU
        {16, 64},  {8, 64},   {8, 64},   // Upsample, ConvT(16->8), SiLU
        {8, 128},  {2, 128},             // Upsample, ConvT(8->2)
        {2, 128},  {2, 101},             // TanhAffine, Unpad(13,14)
    };
    REQUIRE(dec.size() == expected_dec.size());
    for (std::size_t i = 0; i < dec.size(); ++i) CHECK(dec[i] == expected_dec[i]);
}

TEST_CASE("KS autoencoder composes to (1,64) -> 8 -> (1,64)") {
    auto ae = ae::build_ks_autoencoder();
    auto enc = trace(ae.encoder);
    CHECK(enc.back() == std::vector<std::int64_t>{8});
    // stage channel progression 1->16->32->64->8, flatten width 64
    CHECK(enc[0] == std::vector<std::int64_t>{16, 64});
    CHECK(enc[2] == std::vector<std::int64_t>{32, 64});
    CHECK(enc[3] == std::vector<std::int64_t>{32, 32});
    CHECK(enc[5] == std::vector<std::int64_t>{64, 32});
    CHECK(enc[6] == std::vector<std::int64_t>{64, 16});
    CHECK(enc[8] == std::vector<std::int64_t>{8, 16});
    CHECK(enc[9] == std::vector<std::int64_t>{8, 8});
    CHECK(enc[11] == std::vector<std::int64_t>{64});

    auto dec = shape_trace(ae.decoder, {8});
    CHECK(dec.back() == std::vector<std::int64_t>{1, 64});
}

TEST_CASE("encode/decode shape contracts and output ranges") {
    Rng rng(11);
    auto fhn = ae::build_fhn_autoencoder();
    ae::init_autoencoder(fhn, rng);
    Tensor phi = random_tensor({3, 202}, rng, 0.6, 1.4);
    Tensor z = ae::encode(fhn, phi, false);
    REQUIRE(z.shape == std::vector<std::int64_t>{3, 2});
    Tensor rec = ae::decode(fhn, z);
    REQUIRE(rec.shape == std::vector<std::int64_t>{3, 202});
    // decoder output lives in (0.5, 1.5) by the tanh-affine head
    for (double v : rec.data) {
        CHECK(v > 0.5);
        CHECK(v < 1.5);
    }

    auto ks = ae::build_ks_autoencoder();
    ae::init_autoencoder(ks, rng);
    Tensor u = random_tensor({2, 64}, rng);
    Tensor zk = ae::encode(ks, u, false);
    REQUIRE(zk.shape == std::vector<std::int64_t>{2, 8});
    CHECK(ae::decode(ks, zk).shape == std::vector<std::int64_t>{2, 64});

    // determinism: two calls agree bit-exactly
    Tensor zk2 = ae::encode(ks, u, false);
    CHECK(testutil::max_abs_diff(zk, zk2) == 0.0);
}

TEST_CASE("zero-weight decoder with bias gives a constant field") {
    Rng rng(13);
    auto ks = ae::build_ks_autoencoder();
    ae::init_autoencoder(ks, rng);
    testutil::zero_params(ks.decoder);
    // bias on the last ConvTranspose layer
    ks.decoder.params.back()[1][0] = 0.731;
    Tensor z = random_tensor({2, 8}, rng);
    Tensor out = ae::decode(ks, z);
    for (double v : out.data) CHECK(v == doctest::Approx(0.731));
}

TEST_CASE("parameter count is deterministic given the spec") {
    auto a1 = ae::build_fhn_autoencoder();
    auto a2 = ae::build_fhn_autoencoder();
    CHECK(a1.encoder.num_params() == a2.encoder.num_params());
    CHECK(a1.encoder.num_params() ==
          2 * 8 * 5 + 8 + 8 * 16 * 5 + 16 + 16 * 32 * 5 + 32 + 32 * 4 * 5 + 4 + 32 * 2 + 2);
}

TEST_CASE("centering: train-mode updates converge on identical batches, freeze pins the mean") {
    Rng rng(17);
    auto ae = ae::build_fhn_autoencoder();
    ae::init_autoencoder(ae, rng);
    Tensor phi = random_tensor({4, 202}, rng, 0.6, 1.4);
    for (std::int64_t b = 1; b < 4; ++b)
        for (std::int64_t j = 0; j < 202; ++j) phi.at(b, j) = phi.at(0, j);  // identical states

    Tensor z_raw = ae::encode(ae, phi, false);
    const double raw_norm = norm2(z_raw);

    // (1 - m)^n shrinks the centered output geometrically; 1500 >= 1/m updates
    for (int it = 0; it < 1500; ++it) (void)ae::encode(ae, phi, true);
    Tensor z_centered = ae::encode(ae, phi, false);
    CHECK(norm2(z_centered) < 1e-6 * raw_norm);

    ae.centering->frozen = true;
    Tensor mu_before = ae.centering->mu;
    for (int it = 0; it < 10; ++it) (void)ae::encode(ae, phi, true);
    CHECK(testutil::max_abs_diff(mu_before, ae.centering->mu) == 0.0);

    // frozen mu = 0 acts as the identity on raw encoder output
    ae.centering->mu = Tensor::zeros({2});
    Tensor z0 = ae::encode(ae, phi, false);
    CHECK(testutil::max_abs_diff(z0, z_raw) == 0.0);
}

TEST_CASE("finite-difference check passes on the full FHN encoder (h=1e-6, tol=1e-5)") {
    Rng rng(23);
    auto ae = ae::build_fhn_autoencoder();
    ae::init_autoencoder(ae, rng);
    Tensor x = random_tensor({1, 2, 101}, rng);
    auto rep = finite_diff_check(ae.encoder, x, 1e-6, 1e-5);
    INFO(rep.summary());
    CHECK(rep.pass);
}

TEST_CASE("single SiLU layer gradient error stays below 1e-7") {
    Network n;
    n.add(LayerSpec::make_silu());
    Rng rng(29);
    Tensor x = random_tensor({4, 7}, rng);
    auto rep = finite_diff_check(n, x, 1e-6, 1e-5);
    CHECK(rep.max_rel_err < 1e-7);
}

TEST_CASE("model checkpoint save/load round-trips every block") {
    model::ModelSpec spec = model::ModelSpec::fhn_default();
    model::IledModel m = model::IledModel::build(spec, 42);
    m.train_latent_max_norm = 1.75;
    m.autoencoder.centering->mu.data = {0.12, -0.08};
    m.autoencoder.centering->frozen = true;
    const std::string path = "model_roundtrip.ckpt";
    m.save_checkpoint(path);
    model::IledModel l = model::IledModel::load_checkpoint(path);

    CHECK(l.spec.system == "fhn");
    CHECK(l.spec.d_z == 2);
    CHECK(l.spec.d_h == 16);
    CHECK(l.train_latent_max_norm == 1.75);
    CHECK(l.autoencoder.centering->frozen);

    Rng rng(5);
    Tensor phi = random_tensor({2, 202}, rng, 0.6, 1.4);
    Tensor a = ae::encode(m.autoencoder, phi, false);
    Tensor b = ae::encode(l.autoencoder, phi, false);
    CHECK(testutil::max_abs_diff(a, b) == 0.0);

    dyn::LatentState s{Tensor({2}, {0.4, -0.2}), random_tensor({16}, rng), 0.0};
    auto r1 = dyn::sirk3_step(s, 1.0, m.dynamics);
    auto r2 = dyn::sirk3_step(s, 1.0, l.dynamics);
    CHECK(testutil::max_abs_diff(r1.z, r2.z) == 0.0);
    CHECK(testutil::max_abs_diff(r1.h, r2.h) == 0.0);
}
