#pragma once

#include "iled/fhn.hpp"
#include "iled/ks.hpp"

namespace iled::sim {

// Simulates all splits, applies the per-system normalization (FHN: affine
// rescale of each channel into [0.6, 1.4] fitted on the training split; KS:
// none), and fills the dataset metadata. Deterministic per seed; trajectory
// generation parallelizes across seeds.
data::Dataset build_fhn_dataset(const FHNConfig& cfg, std::uint64_t seed, int threads = 1);
data::Dataset build_ks_dataset(const KSConfig& cfg, std::uint64_t seed, int threads = 1);

std::string fhn_config_json(const FHNConfig& cfg);
std::string ks_config_json(const KSConfig& cfg);

}  // namespace iled::sim
