#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "iled/ops.hpp"
#include "iled/rng.hpp"
#include "iled/tape.hpp"

namespace iled::diff {

enum class LayerKind {
    Linear,
    Conv1d,
    ConvTranspose1d,
    AvgPool1d,
    UpsampleLinear1d,
    ConstantPad1d,
    Unpad1d,
    Flatten,
    Unflatten,
    SiLU,
    TanhAffine,
    Concat,     // concatenates the running activation with the auxiliary input
    Centering,  // subtracts the running-mean buffer (see CenteringState)
};

const char* layer_kind_name(LayerKind k);

struct LayerSpec {
    LayerKind kind;

    // Linear: in_ch -> out_ch. Conv1d / ConvTranspose1d: channels + kernel.
    int in_ch = 0, out_ch = 0;
    int kernel = 0, stride = 1, pad = 0;
    bool same_pad = false;  // Conv1d only; kernel must be odd

    // ConstantPad1d / Unpad1d
    int pad_left = 0, pad_right = 0;
    double pad_value = 0.0;

    // UpsampleLinear1d
    int scale = 2;

    // TanhAffine: offset + scale * tanh(x)
    double affine_scale = 1.0, affine_offset = 0.0;

    // Unflatten target (C, L)
    std::int64_t unflat_c = 0, unflat_l = 0;

    static LayerSpec make_linear(int in, int out);
    static LayerSpec make_conv1d_same(int in_ch, int out_ch, int kernel);
    static LayerSpec make_conv_transpose1d(int in_ch, int out_ch, int kernel, int pad);
    static LayerSpec make_avg_pool1d(int kernel, int stride);
    static LayerSpec make_upsample(int scale);
    static LayerSpec make_pad(int left, int right, double value);
    static LayerSpec make_unpad(int left, int right);
    static LayerSpec make_flatten();
    static LayerSpec make_unflatten(std::int64_t c, std::int64_t l);
    static LayerSpec make_silu();
    static LayerSpec make_tanh_affine(double scale, double offset);
    static LayerSpec make_concat(int aux_width);
    static LayerSpec make_centering();
};

// Running-mean latent centering. Updated in train mode, frozen afterwards.
// The mean is a buffer, not a trainable parameter: gradients pass through the
// subtraction unchanged.
struct CenteringState {
    Tensor mu;         // (d_z)
    double momentum = 0.01;
    bool frozen = false;

    void update(const Tensor& batch_mean);
};

// Sequential network over the layer vocabulary above. Layer parameters are
// stored per layer index ({} for parameter-free kinds, {weight, bias} for
// Linear/Conv1d/ConvTranspose1d).
struct Network {
    std::vector<LayerSpec> layers;
    std::vector<std::vector<Tensor>> params;
    std::shared_ptr<CenteringState> centering;  // required iff a Centering layer is present
    std::vector<std::int64_t> input_shape;      // without the batch dimension
    bool train_mode = false;

    void add(LayerSpec spec);
    std::int64_t num_params() const;
};

// Shape of each layer's output (batch dimension excluded), starting from
// `input` = shape without batch. Throws ShapeError naming the offending layer.
std::vector<std::vector<std::int64_t>> shape_trace(const Network& net, const std::vector<std::int64_t>& input);

// Fills every weight/bias uniformly in +-sqrt(1/fan_in).
void init_params(Network& net, Rng& rng);

// Non-recording forward pass. In train mode a Centering layer updates its
// running mean from the batch before subtracting. `aux` feeds Concat layers.
Tensor forward(const Network& net, const Tensor& x, const Tensor* aux = nullptr);

// Tape-recorded forward pass: bind parameters once, then apply any number of
// inputs on the same tape. Centering uses the mean as a constant snapshot
// (the trainer owns mean updates; see training.cpp).
struct BoundNet {
    const Network* net = nullptr;
    std::vector<std::vector<Var>> pv;
};

BoundNet bind(Tape& tape, const Network& net);
Var apply(const BoundNet& bn, Var x, std::optional<Var> aux = std::nullopt);

// Spec-level convenience: forward with optional recording. When `record` is
// true the returned tape owns the computation and `out` is its final node.
struct RecordedForward {
    Tensor y;
    std::unique_ptr<Tape> tape;       // null when record=false
    Var out;                          // valid when record=true
    std::vector<std::vector<Var>> param_vars;
    Var input_var;
};
RecordedForward network_forward(const Network& net, const Tensor& x, bool record, const Tensor* aux = nullptr);

}  // namespace iled::diff
