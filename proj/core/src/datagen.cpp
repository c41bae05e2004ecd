#include "iled/datagen.hpp"

#include <cmath>
#include <limits>

#include <json.hpp>

#include "iled/rng.hpp"
#include "iled/threadpool.hpp"

namespace iled::sim {

using nlohmann::json;

std::string fhn_config_json(const FHNConfig& c) {
    json j{{"D_u", c.D_u},           {"D_v", c.D_v},
           {"eps", c.eps},           {"alpha0", c.alpha0},
           {"alpha1", c.alpha1},     {"L", c.L},
           {"N", c.N},               {"solver_dt", c.solver_dt},
           {"sample_dt", c.sample_dt},
           {"traj_seconds", c.traj_seconds},
           {"n_train", c.n_train},   {"n_val", c.n_val},
           {"test_seconds", c.test_seconds},
           {"warmup_seconds", c.warmup_seconds}};
    return j.dump();
}

std::string ks_config_json(const KSConfig& c) {
    json j{{"L", c.L},
           {"N", c.N},
           {"solver_dt", c.solver_dt},
           {"warmup_steps", c.warmup_steps},
           {"sample_dt", c.sample_dt},
           {"samples_per_traj", c.samples_per_traj},
           {"n_train", c.n_train},
           {"n_val", c.n_val},
           {"n_test", c.n_test},
           {"test_seconds", c.test_seconds},
           {"ic_rms", c.ic_rms},
           {"ic_max_mode", c.ic_max_mode}};
    return j.dump();
}

namespace {

data::Trajectory fhn_one(const FHNConfig& cfg, std::uint64_t traj_seed, double seconds) {
    std::vector<double> u0, v0;
    random_fhn_ic(cfg, traj_seed, u0, v0);
    if (cfg.warmup_seconds > 0) {
        data::Trajectory warm = fhn_simulate(cfg, u0, v0, cfg.warmup_seconds);
        const std::int64_t last = warm.samples() - 1;
        for (int i = 0; i < cfg.N; ++i) {
            u0[static_cast<std::size_t>(i)] = warm.states.at(last, i);
            v0[static_cast<std::size_t>(i)] = warm.states.at(last, cfg.N + i);
        }
    }
    return fhn_simulate(cfg, u0, v0, seconds);
}

}  // namespace

data::Dataset build_fhn_dataset(const FHNConfig& cfg, std::uint64_t seed, int threads) {
    data::Dataset ds;
    ds.meta.system = "fhn";
    ds.meta.sample_dt = cfg.sample_dt;
    ds.meta.channels = 2;
    ds.meta.grid = cfg.N;
    ds.meta.seed = seed;
    ds.meta.config_json = fhn_config_json(cfg);

    Rng root(seed);
    struct Job {
        std::uint64_t seed;
        double seconds;
    };
    std::vector<Job> jobs;
    for (int i = 0; i < cfg.n_train; ++i) jobs.push_back({root.fork(1000 + static_cast<std::uint64_t>(i)).next_u64(), cfg.traj_seconds});
    for (int i = 0; i < cfg.n_val; ++i) jobs.push_back({root.fork(2000 + static_cast<std::uint64_t>(i)).next_u64(), cfg.traj_seconds});
    jobs.push_back({root.fork(3000).next_u64(), cfg.test_seconds});

    std::vector<data::Trajectory> all(jobs.size());
    parallel_for(jobs.size(), threads, [&](std::size_t i) { all[i] = fhn_one(cfg, jobs[i].seed, jobs[i].seconds); });

    // Channel-wise affine map fitted on the training split: [min,max] -> [0.6,1.4].
    for (int c = 0; c < 2; ++c) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (int t = 0; t < cfg.n_train; ++t)
            for (std::int64_t i = 0; i < all[static_cast<std::size_t>(t)].samples(); ++i)
                for (int g = 0; g < cfg.N; ++g) {
                    const double v = all[static_cast<std::size_t>(t)].states.at(i, static_cast<std::int64_t>(c) * cfg.N + g);
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                }
        data::ChannelAffine a;
        if (hi - lo > 1e-12) {
            a.scale = 0.8 / (hi - lo);
            a.offset = 0.6 - a.scale * lo;
        } else {
            a.scale = 1.0;
            a.offset = 1.0 - lo;
        }
        ds.meta.normalization.push_back(a);
    }
    for (auto& tr : all) data::normalize_inplace(tr, ds.meta);

    std::size_t idx = 0;
    for (int i = 0; i < cfg.n_train; ++i, ++idx) {
        ds.train.push_back(std::move(all[idx]));
        ds.meta.train_files.push_back("traj_train_" + std::to_string(i) + ".f64");
    }
    for (int i = 0; i < cfg.n_val; ++i, ++idx) {
        ds.val.push_back(std::move(all[idx]));
        ds.meta.val_files.push_back("traj_val_" + std::to_string(i) + ".f64");
    }
    ds.test.push_back(std::move(all[idx]));
    ds.meta.test_files.push_back("traj_test_0.f64");
    return ds;
}

data::Dataset build_ks_dataset(const KSConfig& cfg, std::uint64_t seed, int threads) {
    data::Dataset ds;
    ds.meta.system = "ks";
    ds.meta.sample_dt = cfg.sample_dt;
    ds.meta.channels = 1;
    ds.meta.grid = cfg.N;
    ds.meta.seed = seed;
    ds.meta.config_json = ks_config_json(cfg);

    Rng root(seed);
    struct Job {
        std::uint64_t seed;
        double seconds;
    };
    std::vector<Job> jobs;
    const double train_seconds = cfg.sample_dt * (cfg.samples_per_traj - 1);
    for (int i = 0; i < cfg.n_train; ++i) jobs.push_back({root.fork(1000 + static_cast<std::uint64_t>(i)).next_u64(), train_seconds});
    for (int i = 0; i < cfg.n_val; ++i) jobs.push_back({root.fork(2000 + static_cast<std::uint64_t>(i)).next_u64(), train_seconds});
    for (int i = 0; i < cfg.n_test; ++i) jobs.push_back({root.fork(3000 + static_cast<std::uint64_t>(i)).next_u64(), cfg.test_seconds});

    std::vector<data::Trajectory> all(jobs.size());
    parallel_for(jobs.size(), threads, [&](std::size_t i) {
        all[i] = ks_simulate(cfg, random_ks_ic(cfg, jobs[i].seed), jobs[i].seconds);
    });

    std::size_t idx = 0;
    for (int i = 0; i < cfg.n_train; ++i, ++idx) {
        ds.train.push_back(std::move(all[idx]));
        ds.meta.train_files.push_back("traj_train_" + std::to_string(i) + ".f64");
    }
    for (int i = 0; i < cfg.n_val; ++i, ++idx) {
        ds.val.push_back(std::move(all[idx]));
        ds.meta.val_files.push_back("traj_val_" + std::to_string(i) + ".f64");
    }
    for (int i = 0; i < cfg.n_test; ++i, ++idx) {
        ds.test.push_back(std::move(all[idx]));
        ds.meta.test_files.push_back("traj_test_" + std::to_string(i) + ".f64");
    }
    return ds;
}

}  // namespace iled::sim
