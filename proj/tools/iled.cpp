// iled - pipeline driver: generate data, train, roll out, analyze, scan.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "config.hpp"
#include "iled/analysis.hpp"
#include "iled/errors.hpp"
#include "iled/svg.hpp"

namespace fs = std::filesystem;
using namespace iled;

namespace {

int resolve_threads(int cli_threads, int config_threads) {
    if (cli_threads > 0) return cli_threads;
    if (config_threads > 0) return config_threads;
    if (const char* env = std::getenv("ILED_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

struct CommonArgs {
    std::string config_path;
    std::string out;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 0;
    bool force = false;
};

cli::RunConfig resolved_config(const CommonArgs& a, const std::string& fallback_system = "") {
    cli::RunConfig rc;
    if (!a.config_path.empty())
        rc = cli::load_config(a.config_path);
    else if (!fallback_system.empty())
        rc = cli::default_config(fallback_system);
    else
        throw ConfigError("--config is required");
    if (a.seed_set) rc.seed = a.seed;
    rc.threads = resolve_threads(a.threads, rc.threads);
    return rc;
}

void add_common(CLI::App* cmd, CommonArgs& a, bool with_out) {
    cmd->add_option("--config", a.config_path, "TOML run configuration");
    cmd->add_option("--seed", a.seed, "Random seed (overrides the config)")->each([&](const std::string&) {
        a.seed_set = true;
    });
    cmd->add_option("--threads", a.threads, "Worker threads (0 = ILED_THREADS or hardware)");
    cmd->add_flag("--force", a.force, "Overwrite existing outputs");
    if (with_out) cmd->add_option("--out", a.out, "Output directory/file")->required();
}

void require_fresh_dir(const std::string& dir, const std::string& sentinel, bool force) {
    if (fs::exists(fs::path(dir) / sentinel) && !force)
        throw ConfigError(dir + " already contains " + sentinel + " (use --force to overwrite)");
}

const data::Trajectory& pick_traj(const data::Dataset& ds, const std::string& split, int index) {
    const std::vector<data::Trajectory>* v = nullptr;
    if (split == "train")
        v = &ds.train;
    else if (split == "val")
        v = &ds.val;
    else if (split == "test")
        v = &ds.test;
    else
        throw ConfigError("split must be train|val|test, got '" + split + "'");
    if (index < 0 || index >= static_cast<int>(v->size()))
        throw ConfigError("trajectory index " + std::to_string(index) + " out of range for split " + split);
    return (*v)[static_cast<std::size_t>(index)];
}

// --- gen-data ---------------------------------------------------------------

int cmd_gen_data(const CommonArgs& a, bool csv) {
    cli::RunConfig rc = resolved_config(a);
    require_fresh_dir(a.out, "meta.json", a.force);

    data::Dataset ds = rc.system == "fhn" ? sim::build_fhn_dataset(rc.fhn, rc.seed, rc.threads)
                                          : sim::build_ks_dataset(rc.ks, rc.seed, rc.threads);
    data::save_dataset(a.out, ds, a.force);
    if (csv) {
        auto dump = [&](const std::vector<data::Trajectory>& split, const std::vector<std::string>& files) {
            for (std::size_t i = 0; i < split.size(); ++i) {
                std::string name = files[i].substr(0, files[i].size() - 4) + ".csv";
                data::write_trajectory_csv((fs::path(a.out) / name).string(), split[i]);
            }
        };
        dump(ds.train, ds.meta.train_files);
        dump(ds.val, ds.meta.val_files);
        dump(ds.test, ds.meta.test_files);
    }

    std::cout << "dataset: " << a.out << "\n"
              << "  system " << ds.meta.system << ", d_phi " << ds.meta.d_phi() << ", sample_dt "
              << ds.meta.sample_dt << " s\n"
              << "  train " << ds.train.size() << " x " << (ds.train.empty() ? 0 : ds.train[0].samples())
              << " samples, val " << ds.val.size() << ", test " << ds.test.size() << " x "
              << (ds.test.empty() ? 0 : ds.test[0].samples()) << " samples\n";
    return 0;
}

// --- train --------------------------------------------------------------------

int cmd_train(const CommonArgs& a, const std::string& data_dir, int epochs_override) {
    cli::RunConfig rc = resolved_config(a);
    data::Dataset ds = data::load_dataset(data_dir);
    if (ds.meta.system != rc.system)
        throw ConfigError("config system '" + rc.system + "' does not match dataset system '" + ds.meta.system + "'");
    if (epochs_override >= 0) rc.train.epochs = epochs_override;
    rc.train.seed = rc.seed;
    rc.train.threads = rc.threads;

    require_fresh_dir(a.out, "config.json", a.force);
    fs::create_directories(a.out);
    {
        std::ofstream os(fs::path(a.out) / "config.json", std::ios::trunc);
        os << rc.to_json() << "\n";
    }

    model::IledModel m = model::IledModel::build(rc.model_spec(), rc.seed);
    m.autoencoder.centering->momentum = rc.centering_momentum;
    train::FitResult fr = train::fit(m, ds, rc.train, rc.loss, a.out);

    std::cout << "run: " << a.out << "\n  epochs " << fr.log.size() << ", best val " << fr.best_val << " at epoch "
              << fr.best_epoch << "\n  checkpoint " << (fs::path(a.out) / "best.ckpt").string() << "\n";
    return 0;
}

// --- rollout --------------------------------------------------------------------

struct RolloutData {
    std::vector<dyn::LatentState> states;
    int warm = 0;
    double dt = 0;
};

RolloutData latent_rollout(const model::IledModel& m, const data::Trajectory& traj, double horizon_s) {
    const auto& ae = m.autoencoder;
    const double dt = traj.dt();
    const double tau = dyn::memory_horizon(m.dynamics.p, m.spec.eps_mem);
    const int warm = static_cast<int>(std::ceil(tau / dt - 1e-12)) + 1;
    if (warm + 1 > traj.samples())
        throw DataError("rollout: trajectory provides " + std::to_string(traj.samples()) +
                        " samples but the memory warm-up needs " + std::to_string(warm + 1));

    diff::Tensor hist({warm + 1, static_cast<std::int64_t>(ae.d_phi())});
    for (int i = 0; i <= warm; ++i)
        for (std::int64_t j = 0; j < ae.d_phi(); ++j) hist.at(i, j) = traj.states.at(i, j);
    diff::Tensor codes = ae::encode(ae, hist, false);

    dyn::LatentState s0;
    s0.z = diff::Tensor({ae.d_z});
    for (int j = 0; j < ae.d_z; ++j) s0.z[j] = codes.at(warm, j);
    s0.h = dyn::init_memory(m.dynamics, codes, dt, m.spec.eps_mem);
    s0.t = traj.t[static_cast<std::size_t>(warm)];

    RolloutData rd;
    rd.warm = warm;
    rd.dt = dt;
    const int steps = static_cast<int>(std::lround(horizon_s / dt));
    if (steps == 0)
        rd.states = {s0};
    else
        rd.states = dyn::integrate(s0, dt, steps, m.dynamics);
    return rd;
}

int cmd_rollout(const std::string& ckpt, const std::string& data_dir, const std::string& split, int index,
                double horizon, const std::string& out) {
    model::IledModel m = model::IledModel::load_checkpoint(ckpt);
    data::Dataset ds = data::load_dataset(data_dir);
    const data::Trajectory& traj = pick_traj(ds, split, index);
    RolloutData rd = latent_rollout(m, traj, horizon);

    const auto& ae = m.autoencoder;
    const diff::Tensor A = dyn::build_A(m.dynamics.W, m.dynamics.w);
    const diff::Tensor At = diff::kernels::transpose2(A);

    // Pooled std of the truth for the error column.
    double sigma = 0;
    {
        double mean = 0;
        for (std::int64_t i = 0; i < traj.samples(); ++i)
            for (std::int64_t j = 0; j < traj.d_phi(); ++j) mean += traj.states.at(i, j);
        mean /= static_cast<double>(traj.samples() * traj.d_phi());
        for (std::int64_t i = 0; i < traj.samples(); ++i)
            for (std::int64_t j = 0; j < traj.d_phi(); ++j) {
                const double d = traj.states.at(i, j) - mean;
                sigma += d * d;
            }
        sigma = std::sqrt(sigma / static_cast<double>(traj.samples() * traj.d_phi()));
    }

    std::ofstream os(out, std::ios::trunc);
    if (!os) throw DataError("cannot write " + out);
    os << "t";
    for (int j = 0; j < ae.d_z; ++j) os << ",z_" << (j + 1);
    for (int j = 0; j < m.spec.d_h; ++j) os << ",h_" << (j + 1);
    os << ",norm_Az,norm_Psi1,nrmse";
    for (std::int64_t j = 0; j < ae.d_phi(); ++j) os << ",phi_hat_" << j;
    os << "\n";
    os.precision(17);

    for (std::size_t i = 0; i < rd.states.size(); ++i) {
        const auto& st = rd.states[i];
        diff::Tensor zr({1, ae.d_z}, st.z.data);
        diff::Tensor hr({1, m.spec.d_h}, st.h.data);
        diff::Tensor Az = diff::kernels::matmul(zr, At);
        diff::Tensor psi = dyn::closure(m.dynamics, zr, hr);
        diff::Tensor dec = ae::decode(ae, zr);

        os << st.t;
        for (int j = 0; j < ae.d_z; ++j) os << "," << st.z[j];
        for (int j = 0; j < m.spec.d_h; ++j) os << "," << st.h[j];
        os << "," << diff::norm2(Az) << "," << diff::norm2(psi);

        const std::int64_t truth_row = rd.warm + static_cast<std::int64_t>(i);
        if (truth_row < traj.samples() && sigma > 0) {
            double e2 = 0;
            for (std::int64_t j = 0; j < traj.d_phi(); ++j) {
                const double d = dec.at(0, j) - traj.states.at(truth_row, j);
                e2 += d * d;
            }
            os << "," << std::sqrt(e2 / static_cast<double>(traj.d_phi())) / sigma;
        } else {
            os << ",";
        }
        for (std::int64_t j = 0; j < ae.d_phi(); ++j) os << "," << dec.at(0, j);
        os << "\n";
    }
    std::cout << "rollout: " << rd.states.size() << " samples -> " << out << "\n";
    return 0;
}

// --- analyze --------------------------------------------------------------------

void write_spectral_csv(const std::string& path, const analysis::SpectralReport& rep) {
    std::ofstream os(path, std::ios::trunc);
    os << "index,re,im\n";
    os.precision(17);
    for (std::size_t i = 0; i < rep.eigenvalues.size(); ++i)
        os << i << "," << rep.eigenvalues[i].real() << "," << rep.eigenvalues[i].imag() << "\n";
    os << "\nfreq_hz,period_s\n";
    for (std::size_t i = 0; i < rep.frequencies_hz.size(); ++i)
        os << rep.frequencies_hz[i] << "," << rep.periods_s[i] << "\n";
}

int cmd_analyze(const std::string& ckpt, const std::string& data_dir, const std::string& out_dir, int index,
                const std::string& seeds_dir, double rollout_seconds, std::vector<double> horizons, bool plots) {
    fs::create_directories(out_dir);
    model::IledModel m = model::IledModel::load_checkpoint(ckpt);
    data::Dataset ds = data::load_dataset(data_dir);
    const data::Trajectory& test = pick_traj(ds, "test", index);

    // Operator spectrum vs data spectrum.
    const diff::Tensor A = dyn::build_A(m.dynamics.W, m.dynamics.w);
    analysis::SpectralReport rep = analysis::eigen_frequencies(A);
    write_spectral_csv(out_dir + "/spectral_report.csv", rep);

    analysis::PeakList peaks = analysis::dominant_frequencies(test, 8);
    {
        std::ofstream os(out_dir + "/data_spectrum.csv", std::ios::trunc);
        os.precision(17);
        os << "freq_hz,power\n";
        for (std::size_t i = 0; i < peaks.spectrum.freq_hz.size(); ++i)
            os << peaks.spectrum.freq_hz[i] << "," << peaks.spectrum.power[i] << "\n";
    }
    {
        std::ofstream os(out_dir + "/freq_comparison.csv", std::ios::trunc);
        os.precision(17);
        os << "learned_freq_hz,closest_data_peak_hz,rel_mismatch\n";
        for (double f : rep.frequencies_hz) {
            double best = 0, bd = std::numeric_limits<double>::infinity();
            for (double p : peaks.frequencies_hz)
                if (std::abs(p - f) < bd) {
                    bd = std::abs(p - f);
                    best = p;
                }
            os << f << "," << best << "," << (best > 0 ? std::abs(f - best) / best : std::numeric_limits<double>::quiet_NaN())
               << "\n";
        }
    }

    // Latent rollout diagnostics + forecast metrics.
    const double dt = test.dt();
    const double avail = test.t.back() - test.t.front();
    const double roll_s = std::min(rollout_seconds, avail - std::ceil(dyn::memory_horizon(m.dynamics.p, m.spec.eps_mem) / dt + 2) * dt);
    RolloutData rd = latent_rollout(m, test, roll_s);
    analysis::NormSeries ns = analysis::dynamics_norms(rd.states, m.dynamics);
    {
        std::ofstream os(out_dir + "/dynamics_norms.csv", std::ios::trunc);
        os.precision(17);
        os << "t,norm_Az,norm_Psi1\n";
        for (std::size_t i = 0; i < ns.t.size(); ++i)
            os << ns.t[i] << "," << ns.lin_norm[i] << "," << ns.nonlin_norm[i] << "\n";
        os << "\nratio_median," << ns.ratio_median << "\nratio_p90," << ns.ratio_p90 << "\n";
    }

    if (horizons.empty()) {
        const double hmax = roll_s;
        for (double h : {0.01 * hmax, 0.05 * hmax, 0.1 * hmax, 0.5 * hmax, hmax}) {
            const double snapped = std::max(dt, std::floor(h / dt) * dt);
            if (horizons.empty() || snapped > horizons.back()) horizons.push_back(snapped);
        }
    }
    analysis::ForecastMetrics fm = analysis::forecast_metrics(m, test, horizons);
    {
        std::ofstream os(out_dir + "/forecast_metrics.csv", std::ios::trunc);
        os.precision(17);
        os << "horizon_s,nrmse,latent_err\n";
        for (std::size_t i = 0; i < fm.horizons_s.size(); ++i)
            os << fm.horizons_s[i] << "," << fm.nrmse[i] << "," << fm.latent_err[i] << "\n";
        os << "\nmax_rollout_norm," << fm.max_rollout_norm << "\ntrain_latent_max_norm," << fm.train_latent_max_norm
           << "\nbounded," << (fm.bounded ? 1 : 0) << "\n";
    }

    if (m.spec.system == "ks") {
        const double L = nlohmann::json::parse(ds.meta.config_json).value("L", 22.0);
        auto [r1, r2] = analysis::ks_density_ranges(test, L);
        // decode the rollout into a trajectory
        data::Trajectory model_traj;
        model_traj.states = diff::Tensor({static_cast<std::int64_t>(rd.states.size()), test.d_phi()});
        for (std::size_t i = 0; i < rd.states.size(); ++i) {
            diff::Tensor zr({1, m.spec.d_z}, rd.states[i].z.data);
            diff::Tensor dec = ae::decode(m.autoencoder, zr);
            for (std::int64_t j = 0; j < test.d_phi(); ++j)
                model_traj.states.at(static_cast<std::int64_t>(i), j) = dec.at(0, j);
            model_traj.t.push_back(rd.states[i].t);
        }
        analysis::Histogram2D h_true = analysis::ks_density(test, L, 128, r1, r2);
        analysis::Histogram2D h_model = analysis::ks_density(model_traj, L, 128, r1, r2);
        std::ofstream os(out_dir + "/ks_density.csv", std::ios::trunc);
        os.precision(17);
        os << "l1_distance," << analysis::histogram_l1(h_true, h_model) << "\nrange_ux," << r1 << "\nrange_uxx," << r2
           << "\n";
        if (plots) {
            plot::heatmap(out_dir + "/density_true.svg", h_true.p, h_true.bins, h_true.bins, "p(du/dx, d2u/dx2) data");
            plot::heatmap(out_dir + "/density_model.svg", h_model.p, h_model.bins, h_model.bins,
                          "p(du/dx, d2u/dx2) model");
        }
    }

    if (plots) {
        plot::Series sp;
        sp.label = "data power";
        sp.x = peaks.spectrum.freq_hz;
        sp.y = peaks.spectrum.power;
        std::vector<plot::Series> ss{sp};
        for (double f : rep.frequencies_hz) {
            if (f <= 0) continue;
            plot::Series marker;
            marker.label = "A_theta frequency";
            marker.x = {f, f};
            marker.y = {0.0, peaks.spectrum.power.empty() ? 1.0 : *std::max_element(peaks.spectrum.power.begin(),
                                                                                    peaks.spectrum.power.end())};
            ss.push_back(marker);
        }
        plot::line_chart(out_dir + "/spectrum.svg", ss, "Operator frequencies vs data spectrum", "Hz", "power");

        plot::Series l1{"||A z||", ns.t, ns.lin_norm}, l2{"||Psi1||", ns.t, ns.nonlin_norm};
        plot::line_chart(out_dir + "/dynamics_norms.svg", {l1, l2}, "Dynamics norms along rollout", "t [s]", "norm");
    }

    // Multi-seed eigenvalue aggregation.
    if (!seeds_dir.empty()) {
        std::vector<std::string> files;
        for (const auto& e : fs::directory_iterator(seeds_dir))
            if (e.path().extension() == ".ckpt") files.push_back(e.path().string());
        std::sort(files.begin(), files.end());
        if (files.empty()) throw ConfigError("--seeds-dir contains no .ckpt files");
        std::vector<std::vector<double>> freq_sets;
        for (const auto& f : files) {
            model::IledModel mm = model::IledModel::load_checkpoint(f);
            auto r = analysis::eigen_frequencies(dyn::build_A(mm.dynamics.W, mm.dynamics.w));
            std::sort(r.frequencies_hz.rbegin(), r.frequencies_hz.rend());
            freq_sets.push_back(r.frequencies_hz);
        }
        std::size_t n = 0;
        for (const auto& v : freq_sets) n = std::max(n, v.size());
        std::ofstream os(out_dir + "/eigen_aggregate.csv", std::ios::trunc);
        os.precision(17);
        os << "rank,mean_freq_hz,std_freq_hz,count\n";
        for (std::size_t r = 0; r < n; ++r) {
            double sum = 0, sum2 = 0;
            int cnt = 0;
            for (const auto& v : freq_sets)
                if (r < v.size()) {
                    sum += v[r];
                    sum2 += v[r] * v[r];
                    ++cnt;
                }
            const double mean = sum / cnt;
            const double sd = cnt > 1 ? std::sqrt(std::max(0.0, sum2 / cnt - mean * mean)) : 0.0;
            os << r << "," << mean << "," << sd << "," << cnt << "\n";
        }
    }

    std::cout << "analysis written to " << out_dir << "\n";
    if (!rep.frequencies_hz.empty()) {
        std::cout << "  natural frequencies (Hz):";
        for (double f : rep.frequencies_hz) std::cout << " " << f;
        std::cout << "\n";
    }
    std::cout << "  nonlinear/linear ratio median " << ns.ratio_median << "\n";
    return 0;
}

// --- scan-latent-dim ----------------------------------------------------------

int cmd_scan(const CommonArgs& a, const std::string& data_dir) {
    cli::RunConfig rc = resolved_config(a);
    data::Dataset ds = data::load_dataset(data_dir);
    rc.scan.seed = rc.seed;
    rc.scan.threads = rc.threads;
    train::ScanResult sr = train::latent_dim_scan(ds, rc.scan_dims, rc.scan);

    std::ofstream os(a.out, std::ios::trunc);
    if (!os) throw DataError("cannot write " + a.out);
    os.precision(17);
    os << "d_z,val_rel_l2\n";
    for (const auto& r : sr.rows) os << r.d_z << "," << r.val_rel_l2 << "\n";
    os << "\nselected," << sr.selected << "\n";
    std::cout << "latent scan -> " << a.out << "; selected d_z = " << sr.selected << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"iled - interpretable latent effective dynamics for multiscale systems"};
    app.require_subcommand(1);

    CommonArgs ga, gt, gs;
    bool gen_csv = false;
    std::string train_data, scan_data;
    int train_epochs = -1;

    CLI::App* gen = app.add_subcommand("gen-data", "Simulate the ground-truth system and write a dataset");
    add_common(gen, ga, true);
    gen->add_flag("--csv", gen_csv, "Also export each trajectory as CSV");

    CLI::App* tr = app.add_subcommand("train", "Train the model end to end on a dataset");
    add_common(tr, gt, true);
    tr->add_option("--data", train_data, "Dataset directory")->required();
    tr->add_option("--epochs", train_epochs, "Override train.epochs");

    std::string ro_ckpt, ro_data, ro_split = "test", ro_out;
    int ro_index = 0;
    double ro_horizon = 0.0;
    CLI::App* ro = app.add_subcommand("rollout", "Integrate the latent model and decode a forecast");
    ro->add_option("--checkpoint", ro_ckpt, "Model checkpoint")->required();
    ro->add_option("--data", ro_data, "Dataset directory (warm-up + truth)")->required();
    ro->add_option("--split", ro_split, "Trajectory split (train|val|test)");
    ro->add_option("--index", ro_index, "Trajectory index within the split");
    ro->add_option("--horizon", ro_horizon, "Forecast horizon in seconds")->required();
    ro->add_option("--out", ro_out, "Output CSV")->required();

    std::string an_ckpt, an_data, an_out, an_seeds;
    int an_index = 0;
    double an_roll = 1000.0;
    std::vector<double> an_horizons;
    bool an_noplots = false;
    CLI::App* an = app.add_subcommand("analyze", "Spectral, norm, forecast and density reports");
    an->add_option("--checkpoint", an_ckpt, "Model checkpoint")->required();
    an->add_option("--data", an_data, "Dataset directory")->required();
    an->add_option("--out", an_out, "Output directory")->required();
    an->add_option("--index", an_index, "Test trajectory index");
    an->add_option("--rollout-seconds", an_roll, "Diagnostic rollout length");
    an->add_option("--horizons", an_horizons, "Forecast horizons in seconds")->delimiter(',');
    an->add_option("--seeds-dir", an_seeds, "Directory of checkpoints for multi-seed eigenvalue aggregation");
    an->add_flag("--no-plots", an_noplots, "Skip SVG plots");

    CLI::App* sc = app.add_subcommand("scan-latent-dim", "Reconstruction-error scan over latent dimensions");
    add_common(sc, gs, true);
    sc->add_option("--data", scan_data, "Dataset directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        app.exit(e);
        return 2;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(ga, gen_csv);
        if (tr->parsed()) return cmd_train(gt, train_data, train_epochs);
        if (ro->parsed()) return cmd_rollout(ro_ckpt, ro_data, ro_split, ro_index, ro_horizon, ro_out);
        if (an->parsed()) return cmd_analyze(an_ckpt, an_data, an_out, an_index, an_seeds, an_roll, an_horizons, !an_noplots);
        if (sc->parsed()) return cmd_scan(gs, scan_data);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const SimulationError& e) {
        std::cerr << "simulation error: " << e.what() << "\n";
        return 3;
    } catch (const TrainingError& e) {
        std::cerr << "training error: " << e.what() << "\n";
        return 4;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 5;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
