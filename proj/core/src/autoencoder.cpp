#include "iled/autoencoder.hpp"

#include "iled/errors.hpp"

namespace iled::ae {

using diff::LayerSpec;

AutoencoderSpec build_fhn_autoencoder(int d_z) {
    AutoencoderSpec ae;
    ae.channels = 2;
    ae.grid = 101;
    ae.d_z = d_z;
    ae.centering = std::make_shared<CenteringState>();
    ae.centering->mu = Tensor::zeros({d_z});

    Network& e = ae.encoder;
    e.input_shape = {2, 101};
    e.add(LayerSpec::make_pad(13, 14, 0.0));  // 101 -> 128
    e.add(LayerSpec::make_conv1d_same(2, 8, 5));
    e.add(LayerSpec::make_avg_pool1d(2, 2));
    e.add(LayerSpec::make_silu());
    e.add(LayerSpec::make_conv1d_same(8, 16, 5));
    e.add(LayerSpec::make_avg_pool1d(2, 2));
    e.add(LayerSpec::make_silu());
    e.add(LayerSpec::make_conv1d_same(16, 32, 5));
    e.add(LayerSpec::make_avg_pool1d(2, 2));
    e.add(LayerSpec::make_silu());
    e.add(LayerSpec::make_conv1d_same(32, 4, 5));
    e.add(LayerSpec::make_avg_pool1d(2, 2));
    e.add(LayerSpec::make_silu());
    e.add(LayerSpec::make_flatten());  // (4,8) -> 32
    e.add(LayerSpec::make_linear(32, d_z));
    e.add(LayerSpec::make_centering());
    e.centering = ae.centering;

    Network& d = ae.decoder;
    d.input_shape = {d_z};
    d.add(LayerSpec::make_linear(d_z, 32));
    d.add(LayerSpec::make_silu());
    d.add(LayerSpec::make_unflatten(4, 8));
    d.add(LayerSpec::make_upsample(2));
    d.add(LayerSpec::make_conv_transpose1d(4, 32, 5, 2));
    d.add(LayerSpec::make_silu());
    d.add(LayerSpec::make_upsample(2));
    d.add(LayerSpec::make_conv_transpose1d(32, 16, 5, 2));
    d.add(LayerSpec::make_silu());
    d.add(LayerSpec::make_upsample(2));
    d.add(LayerSpec::make_conv_transpose1d(16, 8, 5, 2));
    d.add(LayerSpec::make_silu());
    d.add(LayerSpec::make_upsample(2));
    d.add(LayerSpec::make_conv_transpose1d(8, 2, 5, 2));
    d.add(LayerSpec::make_tanh_affine(0.5, 1.0));  // 1 + 0.5 tanh
    d.add(LayerSpec::make_unpad(13, 14));          // 128 -> 101
    return ae;
}

AutoencoderSpec build_ks_autoencoder(int d_z) {
    AutoencoderSpec ae;
    ae.channels = 1;
    ae.grid = 64;
    ae.d_z = d_z;
    ae.centering = std::make_shared<CenteringState>();
    ae.centering->mu = Tensor::zeros({d_z});

    Network& e = ae.encoder;
    e.input_shape = {1, 64};
    e.add(LayerSpec::make_conv1d_same(1, 16, 5));
    e.add(LayerSpec::make_silu());
    e.add(LayerSpec::make_conv1d_same(16, 32, 5));
    e.add(LayerSpec::make_avg_pool1d(2, 2));  // 64 -> 32
    e.add(LayerSpec::make_silu());
    e.add(LayerSpec::make_conv1d_same(32, 64, 5));
    e.add(LayerSpec::make_avg_pool1d(2, 2));  // 32 -> 16
    e.add(LayerSpec::make_silu());
    e.add(LayerSpec::make_conv1d_same(64, 8, 5));
    e.add(LayerSpec::make_avg_pool1d(2, 2));  // 16 -> 8
    e.add(LayerSpec::make_silu());
    e.add(LayerSpec::make_flatten());  // (8,8) -> 64
    e.add(LayerSpec::make_linear(64, d_z));
    e.add(LayerSpec::make_centering());
    e.centering = ae.centering;

    Network& d = ae.decoder;
    d.input_shape = {d_z};
    d.add(LayerSpec::make_linear(d_z, 64));
    d.add(LayerSpec::make_unflatten(8, 8));
    d.add(LayerSpec::make_upsample(2));  // 8 -> 16
    d.add(LayerSpec::make_conv_transpose1d(8, 64, 5, 2));
    d.add(LayerSpec::make_silu());
    d.add(LayerSpec::make_upsample(2));  // 16 -> 32
    d.add(LayerSpec::make_conv_transpose1d(64, 32, 5, 2));
    d.add(LayerSpec::make_silu());
    d.add(LayerSpec::make_upsample(2));  // 32 -> 64
    d.add(LayerSpec::make_conv_transpose1d(32, 16, 5, 2));
    d.add(LayerSpec::make_silu());
    d.add(LayerSpec::make_conv_transpose1d(16, 1, 5, 2));
    return ae;
}

void init_autoencoder(AutoencoderSpec& ae, Rng& rng) {
    Rng re = rng.fork(11), rd = rng.fork(12);
    diff::init_params(ae.encoder, re);
    diff::init_params(ae.decoder, rd);
}

Tensor rows_to_fields(const AutoencoderSpec& ae, const Tensor& rows) {
    if (rows.rank() != 2 || rows.shape[1] != ae.d_phi())
        throw ShapeError("rows_to_fields: expected (B," + std::to_string(ae.d_phi()) + "), got " + rows.shape_str());
    return Tensor({rows.shape[0], ae.channels, ae.grid}, rows.data);
}

Tensor fields_to_rows(const Tensor& fields) {
    if (fields.rank() != 3) throw ShapeError("fields_to_rows: expected (B,C,L)");
    return Tensor({fields.shape[0], fields.shape[1] * fields.shape[2]}, fields.data);
}

Tensor encode(const AutoencoderSpec& ae, const Tensor& phi_rows, bool train_mode) {
    Tensor fields = rows_to_fields(ae, phi_rows);
    Network net = ae.encoder;  // cheap view-ish copy; params are shared values
    net.train_mode = train_mode;
    return diff::forward(net, fields);
}

Tensor decode(const AutoencoderSpec& ae, const Tensor& z_rows) {
    if (z_rows.rank() != 2 || z_rows.shape[1] != ae.d_z)
        throw ShapeError("decode: expected (B," + std::to_string(ae.d_z) + "), got " + z_rows.shape_str());
    Tensor fields = diff::forward(ae.decoder, z_rows);
    return fields_to_rows(fields);
}

}  // namespace iled::ae
