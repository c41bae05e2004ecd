#pragma once

#include <functional>
#include <string>

#include "iled/autoencoder.hpp"
#include "iled/dynamics.hpp"

namespace iled::model {

// Hyperparameters that determine the network shapes. Everything needed to
// rebuild a model before loading its checkpoint blocks.
struct ModelSpec {
    std::string system;  // "fhn" | "ks"
    int d_z = 0;
    int d_h = 0;
    std::vector<int> psi1_neurons;
    std::vector<int> psi2_neurons;
    double eps_mem = 1e-2;

    static ModelSpec fhn_default();
    static ModelSpec ks_default();
};

// The complete trainable state: autoencoder + latent dynamics + centering
// buffer, plus evaluation metadata filled in after training.
struct IledModel {
    ModelSpec spec;
    ae::AutoencoderSpec autoencoder;
    dyn::DynamicsParams dynamics;
    double train_latent_max_norm = 0.0;  // max ||z|| over the training set, set post-fit

    static IledModel build(const ModelSpec& spec, std::uint64_t seed);

    // Visits every parameter/buffer block: f(name, tensor, trainable).
    void visit(const std::function<void(const std::string&, diff::Tensor&, bool)>& f);

    void save_checkpoint(const std::string& path) const;
    static IledModel load_checkpoint(const std::string& path);
};

}  // namespace iled::model
