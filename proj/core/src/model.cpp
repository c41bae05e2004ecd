#include "iled/model.hpp"

#include <map>

#include "iled/checkpoint.hpp"
#include "iled/errors.hpp"

namespace iled::model {

using diff::Tensor;

ModelSpec ModelSpec::fhn_default() {
    ModelSpec s;
    s.system = "fhn";
    s.d_z = 2;
    s.d_h = 16;
    s.psi1_neurons = {18, 32, 32, 32, 2};
    s.psi2_neurons = {2, 5, 8, 11, 14};
    return s;
}

ModelSpec ModelSpec::ks_default() {
    ModelSpec s;
    s.system = "ks";
    s.d_z = 8;
    s.d_h = 32;
    s.psi1_neurons = {40, 64, 64, 64, 8};
    s.psi2_neurons = {8, 12, 16, 20, 24};
    return s;
}

IledModel IledModel::build(const ModelSpec& spec, std::uint64_t seed) {
    IledModel m;
    m.spec = spec;
    if (spec.system == "fhn")
        m.autoencoder = ae::build_fhn_autoencoder(spec.d_z);
    else if (spec.system == "ks")
        m.autoencoder = ae::build_ks_autoencoder(spec.d_z);
    else
        throw ConfigError("IledModel: unknown system '" + spec.system + "' (expected fhn|ks)");

    Rng rng(seed);
    Rng rae = rng.fork(1), rdyn = rng.fork(2);
    ae::init_autoencoder(m.autoencoder, rae);
    m.dynamics = dyn::make_dynamics(spec.d_z, spec.d_h, spec.psi1_neurons, spec.psi2_neurons, rdyn);
    return m;
}

namespace {

void visit_network(const std::string& prefix, diff::Network& net,
                   const std::function<void(const std::string&, Tensor&, bool)>& f) {
    for (std::size_t i = 0; i < net.params.size(); ++i)
        for (std::size_t s = 0; s < net.params[i].size(); ++s)
            f(prefix + "." + std::to_string(i) + (s == 0 ? ".weight" : ".bias"), net.params[i][s], true);
}

}  // namespace

void IledModel::visit(const std::function<void(const std::string&, Tensor&, bool)>& f) {
    visit_network("encoder", autoencoder.encoder, f);
    visit_network("decoder", autoencoder.decoder, f);
    f("dyn.W", dynamics.W, true);
    f("dyn.w", dynamics.w, true);
    f("dyn.p", dynamics.p, true);
    visit_network("psi1", dynamics.psi1, f);
    visit_network("psi2", dynamics.psi2, f);
    f("center.mu", autoencoder.centering->mu, false);
}

void IledModel::save_checkpoint(const std::string& path) const {
    std::map<std::string, Tensor> blocks;
    auto& self = const_cast<IledModel&>(*this);
    self.visit([&](const std::string& name, Tensor& t, bool) { blocks[name] = t; });

    // Hyperparameter blocks make the file self-describing.
    blocks["hyper.system"] = Tensor::scalar(spec.system == "fhn" ? 0.0 : 1.0);
    blocks["hyper.d_z"] = Tensor::scalar(static_cast<double>(spec.d_z));
    blocks["hyper.d_h"] = Tensor::scalar(static_cast<double>(spec.d_h));
    std::vector<double> n1(spec.psi1_neurons.begin(), spec.psi1_neurons.end());
    std::vector<double> n2(spec.psi2_neurons.begin(), spec.psi2_neurons.end());
    blocks["hyper.psi1_neurons"] = Tensor::from(n1);
    blocks["hyper.psi2_neurons"] = Tensor::from(n2);
    blocks["hyper.eps_mem"] = Tensor::scalar(spec.eps_mem);
    blocks["center.momentum"] = Tensor::scalar(autoencoder.centering->momentum);
    blocks["center.frozen"] = Tensor::scalar(autoencoder.centering->frozen ? 1.0 : 0.0);
    blocks["train.latent_max_norm"] = Tensor::scalar(train_latent_max_norm);

    diff::save_blocks(path, blocks);
}

IledModel IledModel::load_checkpoint(const std::string& path) {
    auto blocks = diff::load_blocks(path);
    auto get = [&](const std::string& name) -> const Tensor& {
        auto it = blocks.find(name);
        if (it == blocks.end()) throw ConfigError("checkpoint: missing block '" + name + "' in " + path);
        return it->second;
    };

    ModelSpec spec;
    spec.system = get("hyper.system").data[0] == 0.0 ? "fhn" : "ks";
    spec.d_z = static_cast<int>(get("hyper.d_z").data[0]);
    spec.d_h = static_cast<int>(get("hyper.d_h").data[0]);
    for (double v : get("hyper.psi1_neurons").data) spec.psi1_neurons.push_back(static_cast<int>(v));
    for (double v : get("hyper.psi2_neurons").data) spec.psi2_neurons.push_back(static_cast<int>(v));
    spec.eps_mem = get("hyper.eps_mem").data[0];

    IledModel m = IledModel::build(spec, /*seed=*/0);
    m.visit([&](const std::string& name, Tensor& t, bool) {
        const Tensor& src = get(name);
        if (!src.same_shape(t))
            throw ConfigError("checkpoint: block '" + name + "' has shape " + src.shape_str() + ", expected " +
                              t.shape_str());
        t = src;
    });
    m.autoencoder.centering->momentum = get("center.momentum").data[0];
    m.autoencoder.centering->frozen = get("center.frozen").data[0] != 0.0;
    m.train_latent_max_norm = get("train.latent_max_norm").data[0];
    return m;
}

}  // namespace iled::model
