#pragma once

#include <complex>

#include "iled/dataset.hpp"
#include "iled/model.hpp"

namespace iled::analysis {

using diff::Tensor;

// Eigenstructure of the learned linear operator. Complex eigenvalues come in
// conjugate pairs (A is real); each pair contributes one natural frequency
// |Im|/2pi. Purely real eigenvalues report frequency 0 and infinite period.
struct SpectralReport {
    std::vector<std::complex<double>> eigenvalues;
    std::vector<double> frequencies_hz;  // one per pair / real eigenvalue
    std::vector<double> periods_s;       // +inf where frequency is 0
    double max_real_part = 0.0;
};

SpectralReport eigen_frequencies(const Tensor& A);

struct PowerSpectrum {
    std::vector<double> freq_hz;
    std::vector<double> power;
    double median_power = 0.0;
};

struct PeakList {
    std::vector<double> frequencies_hz;  // descending by power
    std::vector<double> powers;
    PowerSpectrum spectrum;
};

// Hann-windowed mean power spectrum over state dimensions; peaks are local
// maxima above the median power. Requires >= 8 uniform samples.
PeakList dominant_frequencies(const data::Trajectory& traj, int n_peaks);

// Per-step ||A z|| and ||Psi1(z,h)|| along a latent rollout plus summary
// statistics of the nonlinear-to-linear ratio.
struct NormSeries {
    std::vector<double> t, lin_norm, nonlin_norm;
    double ratio_median = 0.0, ratio_p90 = 0.0;
};

NormSeries dynamics_norms(const std::vector<dyn::LatentState>& rollout, const dyn::DynamicsParams& dp);

struct ForecastMetrics {
    std::vector<double> horizons_s;
    std::vector<double> nrmse;        // decoded-state error / pooled std of the truth
    std::vector<double> latent_err;   // ||z_hat - E(phi*)||
    double max_rollout_norm = 0.0;
    double train_latent_max_norm = 0.0;
    bool bounded = false;  // max ||z|| <= 2x training-latent max norm
};

// Initializes the memory from the trajectory's first warm-up samples, rolls
// the latent model to the longest horizon, and scores decoded states.
ForecastMetrics forecast_metrics(const model::IledModel& m, const data::Trajectory& test,
                                 const std::vector<double>& horizons_s);

// Normalized 2D histogram over (du/dx, d2u/dx2) pooled over a trajectory's
// space-time samples; both derivatives by spectral differentiation. Values
// beyond the symmetric ranges clamp into the edge bins so mass stays 1.
struct Histogram2D {
    int bins = 128;
    double r1 = 0.0, r2 = 0.0;  // symmetric ranges for the two axes
    std::vector<double> p;      // bins*bins, sums to 1
};

Histogram2D ks_density(const data::Trajectory& traj, double domain_length, int bins, double r1, double r2);
std::pair<double, double> ks_density_ranges(const data::Trajectory& traj, double domain_length);
double histogram_l1(const Histogram2D& a, const Histogram2D& b);

}  // namespace iled::analysis
