#include "iled/network.hpp"

#include <cmath>

#include "iled/errors.hpp"

namespace iled::diff {

const char* layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::Linear: return "Linear";
        case LayerKind::Conv1d: return "Conv1d";
        case LayerKind::ConvTranspose1d: return "ConvTranspose1d";
        case LayerKind::AvgPool1d: return "AvgPool1d";
        case LayerKind::UpsampleLinear1d: return "UpsampleLinear1d";
        case LayerKind::ConstantPad1d: return "ConstantPad1d";
        case LayerKind::Unpad1d: return "Unpad1d";
        case LayerKind::Flatten: return "Flatten";
        case LayerKind::Unflatten: return "Unflatten";
        case LayerKind::SiLU: return "SiLU";
        case LayerKind::TanhAffine: return "TanhAffine";
        case LayerKind::Concat: return "Concat";
        case LayerKind::Centering: return "Centering";
    }
    return "?";
}

LayerSpec LayerSpec::make_linear(int in, int out) {
    LayerSpec s{LayerKind::Linear};
    s.in_ch = in;
    s.out_ch = out;
    return s;
}
LayerSpec LayerSpec::make_conv1d_same(int in_ch, int out_ch, int kernel) {
    if (kernel % 2 == 0) throw ConfigError("Conv1d: 'same' padding requires an odd kernel size");
    LayerSpec s{LayerKind::Conv1d};
    s.in_ch = in_ch;
    s.out_ch = out_ch;
    s.kernel = kernel;
    s.stride = 1;
    s.pad = (kernel - 1) / 2;
    s.same_pad = true;
    return s;
}
LayerSpec LayerSpec::make_conv_transpose1d(int in_ch, int out_ch, int kernel, int pad) {
    LayerSpec s{LayerKind::ConvTranspose1d};
    s.in_ch = in_ch;
    s.out_ch = out_ch;
    s.kernel = kernel;
    s.stride = 1;
    s.pad = pad;
    return s;
}
LayerSpec LayerSpec::make_avg_pool1d(int kernel, int stride) {
    LayerSpec s{LayerKind::AvgPool1d};
    s.kernel = kernel;
    s.stride = stride;
    return s;
}
LayerSpec LayerSpec::make_upsample(int scale) {
    LayerSpec s{LayerKind::UpsampleLinear1d};
    s.scale = scale;
    return s;
}
LayerSpec LayerSpec::make_pad(int left, int right, double value) {
    LayerSpec s{LayerKind::ConstantPad1d};
    s.pad_left = left;
    s.pad_right = right;
    s.pad_value = value;
    return s;
}
LayerSpec LayerSpec::make_unpad(int left, int right) {
    LayerSpec s{LayerKind::Unpad1d};
    s.pad_left = left;
    s.pad_right = right;
    return s;
}
LayerSpec LayerSpec::make_flatten() { return LayerSpec{LayerKind::Flatten}; }
LayerSpec LayerSpec::make_unflatten(std::int64_t c, std::int64_t l) {
    LayerSpec s{LayerKind::Unflatten};
    s.unflat_c = c;
    s.unflat_l = l;
    return s;
}
LayerSpec LayerSpec::make_silu() { return LayerSpec{LayerKind::SiLU}; }
LayerSpec LayerSpec::make_tanh_affine(double scale, double offset) {
    LayerSpec s{LayerKind::TanhAffine};
    s.affine_scale = scale;
    s.affine_offset = offset;
    return s;
}
LayerSpec LayerSpec::make_concat(int aux_width) {
    LayerSpec s{LayerKind::Concat};
    s.in_ch = aux_width;
    return s;
}
LayerSpec LayerSpec::make_centering() { return LayerSpec{LayerKind::Centering}; }

void CenteringState::update(const Tensor& batch_mean) {
    if (frozen) return;
    if (!mu.same_shape(batch_mean)) throw ShapeError("CenteringState::update: mean shape mismatch");
    for (std::size_t i = 0; i < mu.data.size(); ++i)
        mu.data[i] = (1.0 - momentum) * mu.data[i] + momentum * batch_mean.data[i];
}

void Network::add(LayerSpec spec) {
    layers.push_back(spec);
    std::vector<Tensor> p;
    switch (spec.kind) {
        case LayerKind::Linear:
            p.push_back(Tensor::zeros({spec.out_ch, spec.in_ch}));
            p.push_back(Tensor::zeros({spec.out_ch}));
            break;
        case LayerKind::Conv1d:
            p.push_back(Tensor::zeros({spec.out_ch, spec.in_ch, spec.kernel}));
            p.push_back(Tensor::zeros({spec.out_ch}));
            break;
        case LayerKind::ConvTranspose1d:
            p.push_back(Tensor::zeros({spec.in_ch, spec.out_ch, spec.kernel}));
            p.push_back(Tensor::zeros({spec.out_ch}));
            break;
        default:
            break;
    }
    params.push_back(std::move(p));
}

std::int64_t Network::num_params() const {
    std::int64_t n = 0;
    for (const auto& lp : params)
        for (const auto& t : lp) n += t.size();
    return n;
}

namespace {

[[noreturn]] void layer_fail(std::size_t idx, LayerKind kind, const std::string& msg) {
    throw ShapeError("layer " + std::to_string(idx) + " (" + layer_kind_name(kind) + "): " + msg);
}

}  // namespace

std::vector<std::vector<std::int64_t>> shape_trace(const Network& net, const std::vector<std::int64_t>& input) {
    std::vector<std::vector<std::int64_t>> out;
    std::vector<std::int64_t> s = input;  // without batch dim
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const LayerSpec& L = net.layers[i];
        switch (L.kind) {
            case LayerKind::Linear:
                if (s.size() != 1 || s[0] != L.in_ch)
                    layer_fail(i, L.kind, "expected (" + std::to_string(L.in_ch) + "), got " + shape_to_string(s));
                s = {L.out_ch};
                break;
            case LayerKind::Conv1d: {
                if (s.size() != 2 || s[0] != L.in_ch)
                    layer_fail(i, L.kind, "expected (" + std::to_string(L.in_ch) + ",L), got " + shape_to_string(s));
                std::int64_t lo = (s[1] + 2 * L.pad - L.kernel) / L.stride + 1;
                if (lo < 1) layer_fail(i, L.kind, "empty output");
                s = {L.out_ch, lo};
                break;
            }
            case LayerKind::ConvTranspose1d: {
                if (s.size() != 2 || s[0] != L.in_ch)
                    layer_fail(i, L.kind, "expected (" + std::to_string(L.in_ch) + ",L), got " + shape_to_string(s));
                std::int64_t lo = (s[1] - 1) * L.stride + L.kernel - 2 * L.pad;
                if (lo < 1) layer_fail(i, L.kind, "empty output");
                s = {L.out_ch, lo};
                break;
            }
            case LayerKind::AvgPool1d: {
                if (s.size() != 2) layer_fail(i, L.kind, "expected (C,L), got " + shape_to_string(s));
                std::int64_t lo = (s[1] - L.kernel) / L.stride + 1;
                if (lo < 1) layer_fail(i, L.kind, "empty output");
                s = {s[0], lo};
                break;
            }
            case LayerKind::UpsampleLinear1d:
                if (s.size() != 2) layer_fail(i, L.kind, "expected (C,L), got " + shape_to_string(s));
                s = {s[0], s[1] * L.scale};
                break;
            case LayerKind::ConstantPad1d:
                if (s.size() != 2) layer_fail(i, L.kind, "expected (C,L), got " + shape_to_string(s));
                s = {s[0], s[1] + L.pad_left + L.pad_right};
                break;
            case LayerKind::Unpad1d:
                if (s.size() != 2 || s[1] <= L.pad_left + L.pad_right)
                    layer_fail(i, L.kind, "cannot remove " + std::to_string(L.pad_left + L.pad_right) +
                                              " from " + shape_to_string(s));
                s = {s[0], s[1] - L.pad_left - L.pad_right};
                break;
            case LayerKind::Flatten:
                if (s.size() != 2) layer_fail(i, L.kind, "expected (C,L), got " + shape_to_string(s));
                s = {s[0] * s[1]};
                break;
            case LayerKind::Unflatten:
                if (s.size() != 1 || s[0] != L.unflat_c * L.unflat_l)
                    layer_fail(i, L.kind, "cannot reshape " + shape_to_string(s) + " to (" +
                                              std::to_string(L.unflat_c) + "," + std::to_string(L.unflat_l) + ")");
                s = {L.unflat_c, L.unflat_l};
                break;
            case LayerKind::SiLU:
            case LayerKind::TanhAffine:
                break;
            case LayerKind::Concat:
                if (s.size() != 1) layer_fail(i, L.kind, "expected flat features, got " + shape_to_string(s));
                // aux width is only known at call time; the trace marks it with in_ch/out_ch
                s = {s[0] + L.in_ch};
                break;
            case LayerKind::Centering:
                if (s.size() != 1) layer_fail(i, L.kind, "expected flat features, got " + shape_to_string(s));
                if (!net.centering || net.centering->mu.size() != s[0])
                    layer_fail(i, L.kind, "centering buffer missing or of wrong size");
                break;
        }
        out.push_back(s);
    }
    return out;
}

void init_params(Network& net, Rng& rng) {
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const LayerSpec& L = net.layers[i];
        double fan_in = 0;
        switch (L.kind) {
            case LayerKind::Linear: fan_in = L.in_ch; break;
            case LayerKind::Conv1d:
            case LayerKind::ConvTranspose1d: fan_in = static_cast<double>(L.in_ch) * L.kernel; break;
            default: continue;
        }
        const double bound = std::sqrt(1.0 / fan_in);
        for (auto& t : net.params[i])
            for (auto& v : t.data) v = rng.uniform(-bound, bound);
    }
}

namespace {

// Batch-mean over rows of a (B,F) tensor.
Tensor batch_mean(const Tensor& x) {
    Tensor m({x.shape[1]});
    for (std::int64_t b = 0; b < x.shape[0]; ++b)
        for (std::int64_t j = 0; j < x.shape[1]; ++j) m[j] += x.at(b, j);
    for (auto& v : m.data) v /= static_cast<double>(x.shape[0]);
    return m;
}

}  // namespace

Tensor forward(const Network& net, const Tensor& x, const Tensor* aux) {
    if (!x.all_finite()) throw DataError("network forward: non-finite input");
    Tensor cur = x;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const LayerSpec& L = net.layers[i];
        const auto& P = net.params[i];
        try {
            switch (L.kind) {
                case LayerKind::Linear: cur = kernels::linear(cur, P[0], P[1]); break;
                case LayerKind::Conv1d: cur = kernels::conv1d(cur, P[0], P[1], L.stride, L.pad); break;
                case LayerKind::ConvTranspose1d:
                    cur = kernels::conv_transpose1d(cur, P[0], P[1], L.stride, L.pad);
                    break;
                case LayerKind::AvgPool1d: cur = kernels::avg_pool1d(cur, L.kernel, L.stride); break;
                case LayerKind::UpsampleLinear1d: cur = kernels::upsample_linear1d(cur, L.scale); break;
                case LayerKind::ConstantPad1d: cur = kernels::pad1d(cur, L.pad_left, L.pad_right, L.pad_value); break;
                case LayerKind::Unpad1d: cur = kernels::unpad1d(cur, L.pad_left, L.pad_right); break;
                case LayerKind::Flatten:
                    if (cur.rank() != 3) layer_fail(i, L.kind, "expected (B,C,L), got " + cur.shape_str());
                    cur = Tensor({cur.shape[0], cur.shape[1] * cur.shape[2]}, cur.data);
                    break;
                case LayerKind::Unflatten:
                    if (cur.rank() != 2) layer_fail(i, L.kind, "expected (B,F), got " + cur.shape_str());
                    cur = Tensor({cur.shape[0], L.unflat_c, L.unflat_l}, cur.data);
                    break;
                case LayerKind::SiLU: cur = kernels::silu(cur); break;
                case LayerKind::TanhAffine: cur = kernels::tanh_affine(cur, L.affine_scale, L.affine_offset); break;
                case LayerKind::Concat: {
                    if (!aux) layer_fail(i, L.kind, "auxiliary input required");
                    cur = kernels::concat_cols(cur, *aux);
                    break;
                }
                case LayerKind::Centering: {
                    if (!net.centering) layer_fail(i, L.kind, "no centering state attached");
                    CenteringState& c = *net.centering;
                    if (net.train_mode && !c.frozen) c.update(batch_mean(cur));
                    for (std::int64_t b = 0; b < cur.shape[0]; ++b)
                        for (std::int64_t j = 0; j < cur.shape[1]; ++j) cur.at(b, j) -= c.mu[j];
                    break;
                }
            }
        } catch (const ShapeError& e) {
            layer_fail(i, L.kind, e.what());
        }
    }
    return cur;
}

BoundNet bind(Tape& tape, const Network& net) {
    BoundNet bn;
    bn.net = &net;
    bn.pv.resize(net.params.size());
    for (std::size_t i = 0; i < net.params.size(); ++i)
        for (const auto& t : net.params[i]) bn.pv[i].push_back(tape.leaf(t));
    return bn;
}

Var apply(const BoundNet& bn, Var x, std::optional<Var> aux) {
    const Network& net = *bn.net;
    Var cur = x;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const LayerSpec& L = net.layers[i];
        const auto& P = bn.pv[i];
        try {
            switch (L.kind) {
                case LayerKind::Linear: cur = linear(cur, P[0], P[1]); break;
                case LayerKind::Conv1d: cur = conv1d(cur, P[0], P[1], L.stride, L.pad); break;
                case LayerKind::ConvTranspose1d: cur = conv_transpose1d(cur, P[0], P[1], L.stride, L.pad); break;
                case LayerKind::AvgPool1d: cur = avg_pool1d(cur, L.kernel, L.stride); break;
                case LayerKind::UpsampleLinear1d: cur = upsample_linear1d(cur, L.scale); break;
                case LayerKind::ConstantPad1d: cur = pad1d(cur, L.pad_left, L.pad_right, L.pad_value); break;
                case LayerKind::Unpad1d: cur = unpad1d(cur, L.pad_left, L.pad_right); break;
                case LayerKind::Flatten: {
                    const Tensor& v = cur.tape->val(cur);
                    cur = reshape(cur, {v.shape[0], v.shape[1] * v.shape[2]});
                    break;
                }
                case LayerKind::Unflatten: {
                    const Tensor& v = cur.tape->val(cur);
                    cur = reshape(cur, {v.shape[0], L.unflat_c, L.unflat_l});
                    break;
                }
                case LayerKind::SiLU: cur = silu(cur); break;
                case LayerKind::TanhAffine: cur = tanh_affine(cur, L.affine_scale, L.affine_offset); break;
                case LayerKind::Concat:
                    if (!aux) layer_fail(i, L.kind, "auxiliary input required");
                    cur = concat_cols(cur, *aux);
                    break;
                case LayerKind::Centering:
                    if (!net.centering) layer_fail(i, L.kind, "no centering state attached");
                    cur = sub_const_rowvec(cur, net.centering->mu);
                    break;
            }
        } catch (const ShapeError& e) {
            layer_fail(i, L.kind, e.what());
        }
    }
    return cur;
}

RecordedForward network_forward(const Network& net, const Tensor& x, bool record, const Tensor* aux) {
    RecordedForward rf;
    if (!record) {
        rf.y = forward(net, x, aux);
        return rf;
    }
    rf.tape = std::make_unique<Tape>();
    Var in = rf.tape->leaf(x);
    rf.input_var = in;
    std::optional<Var> auxv;
    if (aux) auxv = rf.tape->leaf(*aux);
    BoundNet bn = bind(*rf.tape, net);
    rf.param_vars = bn.pv;
    rf.out = apply(bn, in, auxv);
    rf.y = rf.tape->val(rf.out);
    return rf;
}

}  // namespace iled::diff
