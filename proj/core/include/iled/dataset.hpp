#pragma once

#include <optional>
#include <string>
#include <vector>

#include "iled/tensor.hpp"

namespace iled::data {

// Uniformly sampled trajectory of full-order states (seconds, row per sample).
struct Trajectory {
    std::vector<double> t;
    diff::Tensor states;  // (T, d_phi), channel-major layout per row

    double dt() const;
    std::int64_t samples() const { return states.shape.empty() ? 0 : states.shape[0]; }
    std::int64_t d_phi() const { return states.rank() == 2 ? states.shape[1] : 0; }
};

// Per-channel affine normalization x_norm = scale * x + offset.
struct ChannelAffine {
    double scale = 1.0;
    double offset = 0.0;
};

struct DatasetMeta {
    int format_version = 1;
    std::string system;  // "fhn" | "ks"
    double sample_dt = 0.0;
    int channels = 0;
    int grid = 0;
    std::uint64_t seed = 0;
    std::vector<ChannelAffine> normalization;  // empty = identity
    std::vector<std::string> train_files, val_files, test_files;
    std::string config_json;  // generator config echo

    int d_phi() const { return channels * grid; }
};

struct Dataset {
    DatasetMeta meta;
    std::vector<Trajectory> train, val, test;
};

// Directory layout: meta.json plus one little-endian f64 file per trajectory
// (row-major T x d_phi), named traj_{split}_{index}.f64.
void save_dataset(const std::string& dir, const Dataset& ds, bool force);
Dataset load_dataset(const std::string& dir);
DatasetMeta load_dataset_meta(const std::string& dir);

void write_trajectory_csv(const std::string& path, const Trajectory& traj);

// Applies meta.normalization to raw states (and the inverse).
void normalize_inplace(Trajectory& traj, const DatasetMeta& meta);
void denormalize_inplace(Trajectory& traj, const DatasetMeta& meta);

}  // namespace iled::data
