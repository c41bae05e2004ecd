#pragma once

#include <map>
#include <string>
#include <vector>

#include "iled/datagen.hpp"
#include "iled/model.hpp"
#include "iled/training.hpp"

namespace iled::cli {

// Everything a run needs, resolved from the TOML config plus CLI overrides.
// Unknown keys and type mismatches are rejected before any work happens.
struct RunConfig {
    std::string system = "fhn";  // fhn | ks
    std::uint64_t seed = 0;
    int threads = 0;  // 0 = resolve from ILED_THREADS / hardware

    sim::FHNConfig fhn;
    sim::KSConfig ks;

    int d_z = -1;  // -1 = per-system default
    int d_h = -1;
    std::vector<int> psi1_hidden;  // empty = per-system default
    std::vector<int> psi2_hidden;
    double eps_mem = 1e-2;
    double centering_momentum = 0.01;

    train::TrainConfig train;
    train::LossWeights loss;

    std::vector<int> scan_dims = {1, 2, 3, 4, 6, 8};
    train::ScanBudget scan;

    model::ModelSpec model_spec() const;
    std::string to_json() const;  // resolved echo written into run directories
};

// Parses the TOML subset used by the configs in configs/ (sections,
// key = value, strings, numbers, booleans, flat numeric arrays). Throws
// ConfigError naming the offending line/key.
RunConfig load_config(const std::string& path);

// Defaults per system without a file (used by tests and --system).
RunConfig default_config(const std::string& system);

}  // namespace iled::cli
