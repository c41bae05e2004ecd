#pragma once

#include "iled/network.hpp"

namespace iled::ae {

using diff::CenteringState;
using diff::Network;
using diff::Tensor;

// Encoder/decoder pair over flattened state rows. States travel as
// (B, d_phi) rows with channel-major layout; encode/decode reshape to
// (B, channels, grid) internally.
struct AutoencoderSpec {
    Network encoder;
    Network decoder;
    std::shared_ptr<CenteringState> centering;
    int channels = 0;
    int grid = 0;
    int d_z = 0;
    int d_phi() const { return channels * grid; }
};

// FitzHugh-Nagumo autoencoder: pad (13,14), four conv+pool+SiLU stages
// (2->8->16->32->4), flatten, Linear(32->d_z), centering; mirrored decoder
// with linear upsampling and a 1 + 0.5*tanh output squashed into (0.5, 1.5).
AutoencoderSpec build_fhn_autoencoder(int d_z = 2);

// Kuramoto-Sivashinsky autoencoder on 64-point fields: four conv stages
// (1->16->32->64->8) with pooling after the last three, flatten to 64,
// Linear(64->d_z), centering; mirrored decoder without output activation.
AutoencoderSpec build_ks_autoencoder(int d_z = 8);

void init_autoencoder(AutoencoderSpec& ae, Rng& rng);

// Encoder forward over rows; in train mode the centering mean updates from
// the batch before subtraction, frozen means are left untouched.
Tensor encode(const AutoencoderSpec& ae, const Tensor& phi_rows, bool train_mode);
Tensor decode(const AutoencoderSpec& ae, const Tensor& z_rows);

// (B, d_phi) <-> (B, C, L)
Tensor rows_to_fields(const AutoencoderSpec& ae, const Tensor& rows);
Tensor fields_to_rows(const Tensor& fields);

}  // namespace iled::ae
