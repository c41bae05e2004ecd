#pragma once

#include <string>
#include <vector>

#include "iled/dataset.hpp"
#include "iled/model.hpp"

namespace iled::train {

using diff::Tensor;

struct LossWeights {
    double alpha1 = 1.0;    // forecast
    double alpha2 = 1.0;    // reconstructed forecast
    double alpha3 = 1e-3;   // nonlinearity regularizer
    double alpha_c = 0.0;   // latent-centering penalty (off by default)
};

struct TrainConfig {
    int window = 100;          // K: forecast samples per window
    int batch = 16;            // windows per optimizer step
    double lr = 1e-3;
    int epochs = 60;
    std::uint64_t seed = 0;
    double clip_norm = 1.0;
    int windows_per_traj = 0;  // 0 = one window per K samples of trajectory
    int threads = 1;
    int warmup_slack = 2;      // extra samples beyond ceil(tau_max/dt)
};

struct LossComponents {
    double rec = 0, forecast = 0, rec_forecast = 0, nonlin = 0, centering = 0, total = 0;
};

// One optimizer-ready window: rows [0, warm] are the memory history
// (s in [-warm*dt, 0]), rows [warm, warm+K) are the forecast targets.
struct Window {
    const data::Trajectory* traj = nullptr;
    std::int64_t start = 0;
    int warm = 0;
    int horizon = 0;  // K
};

struct WindowResult {
    LossComponents loss;
    std::vector<Tensor> grads;  // aligned with trainable visit order; empty if !want_grads
    Tensor raw_code_mean;       // encoder output mean before centering
    double max_code_norm = 0;
};

// Forward (and optionally reverse) pass over one window. Pure given the
// model parameter values; safe to run concurrently across windows.
WindowResult window_losses(const model::IledModel& m, const Window& w, const LossWeights& lw, bool want_grads);

// Spec-level batch loss: averages window_losses over a batch.
LossComponents compute_losses(const model::IledModel& m, const std::vector<Window>& batch, const LossWeights& lw);

// Adam with bias correction; moments aligned with the flat trainable list.
struct OptimState {
    std::vector<Tensor> m1, m2;
    std::int64_t step = 0;
};
void adam_step(std::vector<Tensor*>& params, const std::vector<Tensor>& grads, OptimState& st, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

struct EpochLog {
    int epoch = 0;
    LossComponents train;
    double val_total = 0;
};

struct FitResult {
    std::vector<EpochLog> log;
    double best_val = 0;
    int best_epoch = -1;
    bool aborted = false;
};

// End-to-end joint optimization. Runs the epoch loop, retains the
// best-validation parameter snapshot in `m`, freezes centering, fills
// m.train_latent_max_norm, and (when run_dir is non-empty) writes
// training_log.csv and best.ckpt there. Throws TrainingError on a non-finite
// loss after restoring and saving the last good checkpoint.
FitResult fit(model::IledModel& m, const data::Dataset& ds, const TrainConfig& tc, const LossWeights& lw,
              const std::string& run_dir = "");

// --- autoencoder-only latent-dimension scan ---------------------------------

struct ScanBudget {
    int epochs = 200;
    int batches_per_epoch = 32;
    int batch = 32;
    double lr = 1e-3;
    std::uint64_t seed = 0;
    int patience = 20;  // early stop on validation plateau
    int threads = 1;
};

struct ScanRow {
    int d_z = 0;
    double val_rel_l2 = 0;  // sqrt(sum ||phi - phi_hat||^2 / sum ||phi||^2)
};

struct ScanResult {
    std::vector<ScanRow> rows;
    int selected = 0;  // smallest d_z within 5% of the best error
};

ScanResult latent_dim_scan(const data::Dataset& ds, const std::vector<int>& candidate_dims, const ScanBudget& budget);

// Validation reconstruction error of an autoencoder over a split.
double reconstruction_rel_l2(const ae::AutoencoderSpec& ae, const std::vector<data::Trajectory>& split);

}  // namespace iled::train
