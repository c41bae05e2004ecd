#include "iled/training.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "iled/errors.hpp"
#include "iled/ops.hpp"
#include "iled/threadpool.hpp"

namespace iled::train {

using namespace iled::diff;
using dyn::BoundDynamics;

namespace {

// Flat list of trainable tensors in visit order (the gradient/optimizer
// contract: everything keys off this ordering).
std::vector<Tensor*> trainable_params(model::IledModel& m) {
    std::vector<Tensor*> out;
    m.visit([&](const std::string&, Tensor& t, bool trainable) {
        if (trainable) out.push_back(&t);
    });
    return out;
}

struct BoundModel {
    BoundNet enc, dec;
    BoundDynamics dynb;

    std::vector<Var> flat() const {
        std::vector<Var> vs;
        for (const auto& lp : enc.pv)
            for (Var v : lp) vs.push_back(v);
        for (const auto& lp : dec.pv)
            for (Var v : lp) vs.push_back(v);
        vs.push_back(dynb.W);
        vs.push_back(dynb.w);
        vs.push_back(dynb.p);
        for (const auto& lp : dynb.psi1.pv)
            for (Var v : lp) vs.push_back(v);
        for (const auto& lp : dynb.psi2.pv)
            for (Var v : lp) vs.push_back(v);
        return vs;
    }
};

BoundModel bind_model(Tape& tape, const model::IledModel& m) {
    BoundModel bm;
    bm.enc = bind(tape, m.autoencoder.encoder);
    bm.dec = bind(tape, m.autoencoder.decoder);
    bm.dynb = dyn::bind_dynamics(tape, m.dynamics);
    return bm;
}

Tensor gather_window_fields(const model::IledModel& m, const Window& w, std::int64_t row0, std::int64_t rows) {
    const auto& ae = m.autoencoder;
    Tensor fields({rows, ae.channels, ae.grid});
    const Tensor& st = w.traj->states;
    for (std::int64_t i = 0; i < rows; ++i)
        for (std::int64_t j = 0; j < ae.d_phi(); ++j)
            fields.data[static_cast<std::size_t>(i * ae.d_phi() + j)] = st.at(w.start + row0 + i, j);
    return fields;
}

}  // namespace

WindowResult window_losses(const model::IledModel& m, const Window& w, const LossWeights& lw, bool want_grads) {
    const auto& ae = m.autoencoder;
    const std::int64_t B = w.warm + w.horizon;
    const int K = w.horizon;
    if (K < 2) throw TrainingError("window horizon must be >= 2 samples");
    if (w.start + B > w.traj->samples())
        throw TrainingError("window [" + std::to_string(w.start) + ", " + std::to_string(w.start + B) +
                            ") exceeds trajectory length " + std::to_string(w.traj->samples()));
    const double dt = w.traj->dt();
    const bool dynamics_on = (lw.alpha1 != 0.0 || lw.alpha2 != 0.0 || lw.alpha3 != 0.0);

    Tape tape;
    BoundModel bm = bind_model(tape, m);

    Var x_all = tape.leaf(gather_window_fields(m, w, 0, B));
    Var codes = apply(bm.enc, x_all);  // (B, d_z), centering uses the mean snapshot

    Var recon = apply(bm.dec, codes);
    Var rec = scale(sumsq(sub(recon, x_all)), 1.0 / static_cast<double>(B));

    Var total = rec;
    Var forecast{}, rec_forecast{}, nonlin{};
    if (dynamics_on) {
        Var hist = slice_rows(codes, 0, w.warm + 1);
        Var h0 = dyn::init_memory_t(bm.dynb, hist, dt, m.spec.eps_mem);
        Var z0 = take_row(codes, w.warm);
        std::vector<Var> zs{z0}, hs{h0};
        zs.reserve(static_cast<std::size_t>(K));
        hs.reserve(static_cast<std::size_t>(K));
        for (int i = 1; i < K; ++i) {
            auto [zn, hn] = dyn::sirk3_step_t(bm.dynb, zs.back(), hs.back(), dt);
            zs.push_back(zn);
            hs.push_back(hn);
        }
        Var zhat = stack_rows(zs);
        Var hhat = stack_rows(hs);

        Var ztrue = slice_rows(codes, w.warm, K);
        forecast = scale(sumsq(sub(zhat, ztrue)), 1.0 / K);

        Var xf = tape.leaf(gather_window_fields(m, w, w.warm, K));
        rec_forecast = scale(sumsq(sub(apply(bm.dec, zhat), xf)), 1.0 / K);

        nonlin = scale(sumsq(dyn::closure_t(bm.dynb, zhat, hhat)), 1.0 / K);

        if (lw.alpha1 != 0.0) total = add(total, scale(forecast, lw.alpha1));
        if (lw.alpha2 != 0.0) total = add(total, scale(rec_forecast, lw.alpha2));
        if (lw.alpha3 != 0.0) total = add(total, scale(nonlin, lw.alpha3));
    }
    Var cent{};
    if (lw.alpha_c != 0.0) {
        cent = sumsq(mean_rows(codes));
        total = add(total, scale(cent, lw.alpha_c));
    }

    WindowResult res;
    res.loss.rec = tape.scalar(rec);
    res.loss.forecast = forecast.valid() ? tape.scalar(forecast) : 0.0;
    res.loss.rec_forecast = rec_forecast.valid() ? tape.scalar(rec_forecast) : 0.0;
    res.loss.nonlin = nonlin.valid() ? tape.scalar(nonlin) : 0.0;
    res.loss.centering = cent.valid() ? tape.scalar(cent) : 0.0;
    res.loss.total = tape.scalar(total);

    // Stats from the centered codes + mean snapshot.
    const Tensor& cv = tape.val(codes);
    const Tensor& mu = ae.centering->mu;
    Tensor raw_mean({ae.d_z});
    for (std::int64_t i = 0; i < cv.shape[0]; ++i) {
        double n2 = 0;
        for (std::int64_t j = 0; j < ae.d_z; ++j) {
            raw_mean[j] += cv.at(i, j);
            n2 += cv.at(i, j) * cv.at(i, j);
        }
        res.max_code_norm = std::max(res.max_code_norm, std::sqrt(n2));
    }
    for (std::int64_t j = 0; j < ae.d_z; ++j) raw_mean[j] = raw_mean[j] / static_cast<double>(cv.shape[0]) + mu[j];
    res.raw_code_mean = std::move(raw_mean);

    if (want_grads) {
        tape.backward(total);
        std::vector<Var> flat = bm.flat();
        res.grads.reserve(flat.size());
        for (Var v : flat) res.grads.push_back(tape.grad(v));
    }
    return res;
}

LossComponents compute_losses(const model::IledModel& m, const std::vector<Window>& batch, const LossWeights& lw) {
    LossComponents acc;
    for (const Window& w : batch) {
        WindowResult r = window_losses(m, w, lw, false);
        acc.rec += r.loss.rec;
        acc.forecast += r.loss.forecast;
        acc.rec_forecast += r.loss.rec_forecast;
        acc.nonlin += r.loss.nonlin;
        acc.centering += r.loss.centering;
        acc.total += r.loss.total;
    }
    const double n = static_cast<double>(batch.empty() ? 1 : batch.size());
    acc.rec /= n;
    acc.forecast /= n;
    acc.rec_forecast /= n;
    acc.nonlin /= n;
    acc.centering /= n;
    acc.total /= n;
    return acc;
}

void adam_step(std::vector<Tensor*>& params, const std::vector<Tensor>& grads, OptimState& st, double lr,
               double beta1, double beta2, double eps) {
    if (st.m1.empty()) {
        for (Tensor* p : params) {
            st.m1.push_back(Tensor::zeros(p->shape));
            st.m2.push_back(Tensor::zeros(p->shape));
        }
    }
    if (params.size() != grads.size() || params.size() != st.m1.size())
        throw TrainingError("adam_step: parameter/gradient count mismatch");
    st.step += 1;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(st.step));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(st.step));
    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor& p = *params[k];
        const Tensor& g = grads[k];
        if (!p.same_shape(g)) throw TrainingError("adam_step: gradient shape mismatch");
        for (std::size_t i = 0; i < p.data.size(); ++i) {
            double& m1 = st.m1[k].data[i];
            double& m2 = st.m2[k].data[i];
            m1 = beta1 * m1 + (1.0 - beta1) * g.data[i];
            m2 = beta2 * m2 + (1.0 - beta2) * g.data[i] * g.data[i];
            p.data[i] -= lr * (m1 / c1) / (std::sqrt(m2 / c2) + eps);
        }
    }
}

namespace {

struct Snapshot {
    std::vector<Tensor> values;
    Tensor mu;
    void capture(model::IledModel& m) {
        values.clear();
        m.visit([&](const std::string&, Tensor& t, bool) { values.push_back(t); });
        mu = m.autoencoder.centering->mu;
    }
    void restore(model::IledModel& m) const {
        std::size_t i = 0;
        m.visit([&](const std::string&, Tensor& t, bool) { t = values[i++]; });
        m.autoencoder.centering->mu = mu;
    }
};

int compute_warm(const model::IledModel& m, double dt, int slack) {
    const double tau = dyn::memory_horizon(m.dynamics.p, m.spec.eps_mem);
    return static_cast<int>(std::ceil(tau / dt - 1e-12)) + slack;
}

std::vector<Window> validation_windows(const data::Dataset& ds, int warm, int K) {
    std::vector<Window> out;
    for (const auto& tr : ds.val) {
        const std::int64_t span = warm + K;
        for (std::int64_t s = 0; s + span <= tr.samples(); s += span)
            out.push_back(Window{&tr, s, warm, K});
    }
    return out;
}

void write_log_csv(const std::string& path, const std::vector<EpochLog>& log) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw DataError("cannot write " + path);
    os << "epoch,L_rec,L_forecast,L_rec_forecast,L_nonlin,total,val_total\n";
    os.precision(17);
    for (const auto& e : log)
        os << e.epoch << "," << e.train.rec << "," << e.train.forecast << "," << e.train.rec_forecast << ","
           << e.train.nonlin << "," << e.train.total << "," << e.val_total << "\n";
}

double latent_max_norm(const model::IledModel& m, const std::vector<data::Trajectory>& split) {
    double mx = 0.0;
    const auto& ae = m.autoencoder;
    for (const auto& tr : split) {
        const std::int64_t T = tr.samples();
        for (std::int64_t r0 = 0; r0 < T; r0 += 512) {
            const std::int64_t n = std::min<std::int64_t>(512, T - r0);
            Tensor rows({n, static_cast<std::int64_t>(ae.d_phi())});
            for (std::int64_t i = 0; i < n; ++i)
                for (std::int64_t j = 0; j < ae.d_phi(); ++j) rows.at(i, j) = tr.states.at(r0 + i, j);
            Tensor z = ae::encode(ae, rows, false);
            for (std::int64_t i = 0; i < n; ++i) {
                double n2 = 0;
                for (std::int64_t j = 0; j < ae.d_z; ++j) n2 += z.at(i, j) * z.at(i, j);
                mx = std::max(mx, std::sqrt(n2));
            }
        }
    }
    return mx;
}

}  // namespace

FitResult fit(model::IledModel& m, const data::Dataset& ds, const TrainConfig& tc, const LossWeights& lw,
              const std::string& run_dir) {
    if (ds.train.empty()) throw DataError("fit: dataset has no training trajectories");
    const double dt = ds.train.front().dt();
    const int K = tc.window;

    std::vector<Tensor*> params = trainable_params(m);
    OptimState opt;
    FitResult fr;
    Snapshot best;
    best.capture(m);
    fr.best_val = std::numeric_limits<double>::infinity();

    auto finalize = [&](bool restore_best) {
        if (restore_best && fr.best_epoch >= 0) best.restore(m);
        m.autoencoder.centering->frozen = true;
        m.train_latent_max_norm = latent_max_norm(m, ds.train);
        if (!run_dir.empty()) {
            std::filesystem::create_directories(run_dir);
            write_log_csv(run_dir + "/training_log.csv", fr.log);
            m.save_checkpoint(run_dir + "/best.ckpt");
        }
    };

    if (tc.epochs == 0) {
        finalize(false);
        return fr;
    }

    for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
        const int warm = compute_warm(m, dt, tc.warmup_slack);
        Rng erng = Rng(tc.seed).fork(static_cast<std::uint64_t>(epoch));

        // Draw windows with random offsets so every attractor phase is seen.
        std::vector<Window> windows;
        for (const auto& tr : ds.train) {
            const std::int64_t limit = tr.samples() - (warm + K);
            if (limit < 0)
                throw TrainingError("fit: warm-up (" + std::to_string(warm) + ") + window (" + std::to_string(K) +
                                    ") exceed trajectory length " + std::to_string(tr.samples()) +
                                    "; shorten the window or slow the memory");
            const int wpt = tc.windows_per_traj > 0
                                ? tc.windows_per_traj
                                : std::max<int>(1, static_cast<int>((tr.samples() - warm) / K));
            for (int i = 0; i < wpt; ++i)
                windows.push_back(Window{&tr, static_cast<std::int64_t>(erng.below(static_cast<std::uint64_t>(limit + 1))), warm, K});
        }
        shuffle(windows, erng);

        LossComponents esum;
        std::int64_t ewindows = 0;
        for (std::size_t b0 = 0; b0 < windows.size(); b0 += static_cast<std::size_t>(tc.batch)) {
            const std::size_t bn = std::min<std::size_t>(static_cast<std::size_t>(tc.batch), windows.size() - b0);
            std::vector<WindowResult> results(bn);
            parallel_for(bn, tc.threads, [&](std::size_t i) {
                results[i] = window_losses(m, windows[b0 + i], lw, true);
            });

            // Fixed-order reduction keeps training bit-reproducible for any
            // thread count.
            std::vector<Tensor> grads;
            for (std::size_t i = 0; i < bn; ++i) {
                const WindowResult& r = results[i];
                if (!std::isfinite(r.loss.total)) {
                    fr.aborted = true;
                    finalize(true);
                    throw TrainingError("fit: non-finite loss at epoch " + std::to_string(epoch) +
                                        "; last good checkpoint retained");
                }
                esum.rec += r.loss.rec;
                esum.forecast += r.loss.forecast;
                esum.rec_forecast += r.loss.rec_forecast;
                esum.nonlin += r.loss.nonlin;
                esum.centering += r.loss.centering;
                esum.total += r.loss.total;
                ++ewindows;
                if (grads.empty()) {
                    grads = r.grads;
                } else {
                    for (std::size_t k = 0; k < grads.size(); ++k) add_inplace(grads[k], r.grads[k]);
                }
            }
            const double inv = 1.0 / static_cast<double>(bn);
            for (auto& g : grads)
                for (auto& v : g.data) v *= inv;

            if (tc.clip_norm > 0) {
                double n2 = 0;
                for (const auto& g : grads) n2 += dot(g, g);
                const double n = std::sqrt(n2);
                if (n > tc.clip_norm) {
                    const double s = tc.clip_norm / n;
                    for (auto& g : grads)
                        for (auto& v : g.data) v *= s;
                }
            }
            adam_step(params, grads, opt, tc.lr);

            // Running-mean updates applied after the step, in window order.
            for (std::size_t i = 0; i < bn; ++i) m.autoencoder.centering->update(results[i].raw_code_mean);
        }

        // Validation with the current parameters (means frozen for the pass).
        const int vwarm = compute_warm(m, dt, tc.warmup_slack);
        LossComponents val = compute_losses(m, validation_windows(ds, vwarm, K), lw);
        if (!std::isfinite(val.total)) {
            fr.aborted = true;
            finalize(true);
            throw TrainingError("fit: non-finite validation loss at epoch " + std::to_string(epoch));
        }

        EpochLog el;
        el.epoch = epoch;
        const double inv = 1.0 / static_cast<double>(std::max<std::int64_t>(1, ewindows));
        el.train.rec = esum.rec * inv;
        el.train.forecast = esum.forecast * inv;
        el.train.rec_forecast = esum.rec_forecast * inv;
        el.train.nonlin = esum.nonlin * inv;
        el.train.centering = esum.centering * inv;
        el.train.total = esum.total * inv;
        el.val_total = val.total;
        fr.log.push_back(el);

        if (val.total < fr.best_val) {
            fr.best_val = val.total;
            fr.best_epoch = epoch;
            best.capture(m);
        }
    }

    finalize(true);
    return fr;
}

// --- autoencoder-only machinery ---------------------------------------------

double reconstruction_rel_l2(const ae::AutoencoderSpec& a, const std::vector<data::Trajectory>& split) {
    double num = 0, den = 0;
    for (const auto& tr : split) {
        const std::int64_t T = tr.samples();
        for (std::int64_t r0 = 0; r0 < T; r0 += 256) {
            const std::int64_t n = std::min<std::int64_t>(256, T - r0);
            Tensor rows({n, static_cast<std::int64_t>(a.d_phi())});
            for (std::int64_t i = 0; i < n; ++i)
                for (std::int64_t j = 0; j < a.d_phi(); ++j) rows.at(i, j) = tr.states.at(r0 + i, j);
            Tensor rec = ae::decode(a, ae::encode(a, rows, false));
            for (std::int64_t i = 0; i < rows.size(); ++i) {
                const double d = rec[i] - rows[i];
                num += d * d;
                den += rows[i] * rows[i];
            }
        }
    }
    if (den == 0) return 0.0;
    return std::sqrt(num / den);
}

namespace {

// Random mini-batch reconstruction training used by the latent scan.
void ae_train(ae::AutoencoderSpec& a, const data::Dataset& ds, const ScanBudget& budget, std::uint64_t stream) {
    std::vector<Tensor*> params;
    for (auto& lp : a.encoder.params)
        for (auto& t : lp) params.push_back(&t);
    for (auto& lp : a.decoder.params)
        for (auto& t : lp) params.push_back(&t);

    OptimState opt;
    double best = std::numeric_limits<double>::infinity();
    int since_best = 0;

    std::int64_t total_rows = 0;
    for (const auto& tr : ds.train) total_rows += tr.samples();

    for (int epoch = 1; epoch <= budget.epochs; ++epoch) {
        Rng erng = Rng(budget.seed).fork(stream * 10007 + static_cast<std::uint64_t>(epoch));
        for (int b = 0; b < budget.batches_per_epoch; ++b) {
            Tensor rows({budget.batch, static_cast<std::int64_t>(a.d_phi())});
            Tensor raw_mean({a.d_z});
            for (int i = 0; i < budget.batch; ++i) {
                std::int64_t flat = static_cast<std::int64_t>(erng.below(static_cast<std::uint64_t>(total_rows)));
                const data::Trajectory* tr = nullptr;
                for (const auto& cand : ds.train) {
                    if (flat < cand.samples()) {
                        tr = &cand;
                        break;
                    }
                    flat -= cand.samples();
                }
                for (std::int64_t j = 0; j < a.d_phi(); ++j) rows.at(i, j) = tr->states.at(flat, j);
            }

            Tape tape;
            BoundNet enc = bind(tape, a.encoder), dec = bind(tape, a.decoder);
            Var x = tape.leaf(ae::rows_to_fields(a, rows));
            Var z = apply(enc, x);
            Var loss = scale(sumsq(sub(apply(dec, z), x)), 1.0 / budget.batch);
            tape.backward(loss);

            std::vector<Tensor> grads;
            for (auto& lp : enc.pv)
                for (Var v : lp) grads.push_back(tape.grad(v));
            for (auto& lp : dec.pv)
                for (Var v : lp) grads.push_back(tape.grad(v));
            adam_step(params, grads, opt, budget.lr);

            // centering mean follows the raw encoder outputs
            const Tensor& zv = tape.val(z);
            for (std::int64_t j = 0; j < a.d_z; ++j) {
                double s = 0;
                for (std::int64_t i = 0; i < zv.shape[0]; ++i) s += zv.at(i, j);
                raw_mean[j] = s / static_cast<double>(zv.shape[0]) + a.centering->mu[j];
            }
            a.centering->update(raw_mean);
        }

        const double val = reconstruction_rel_l2(a, ds.val.empty() ? ds.train : ds.val);
        if (val < best - 1e-4 * std::max(1.0, best)) {
            best = val;
            since_best = 0;
        } else if (++since_best >= budget.patience) {
            break;
        }
    }
    a.centering->frozen = true;
}

}  // namespace

ScanResult latent_dim_scan(const data::Dataset& ds, const std::vector<int>& candidate_dims, const ScanBudget& budget) {
    for (std::size_t i = 1; i < candidate_dims.size(); ++i)
        if (candidate_dims[i] <= candidate_dims[i - 1])
            throw ConfigError("latent_dim_scan: candidate dims must be ascending");

    ScanResult res;
    for (std::size_t di = 0; di < candidate_dims.size(); ++di) {
        const int d = candidate_dims[di];
        ae::AutoencoderSpec a =
            ds.meta.system == "fhn" ? ae::build_fhn_autoencoder(d) : ae::build_ks_autoencoder(d);
        Rng rng = Rng(budget.seed).fork(static_cast<std::uint64_t>(d));
        ae::init_autoencoder(a, rng);
        ae_train(a, ds, budget, static_cast<std::uint64_t>(di + 1));
        res.rows.push_back(ScanRow{d, reconstruction_rel_l2(a, ds.val.empty() ? ds.train : ds.val)});
    }
    double best = std::numeric_limits<double>::infinity();
    for (const auto& r : res.rows) best = std::min(best, r.val_rel_l2);
    res.selected = res.rows.back().d_z;
    for (const auto& r : res.rows)
        if (r.val_rel_l2 <= 1.05 * best + 1e-12) {
            res.selected = r.d_z;
            break;
        }
    return res;
}

}  // namespace iled::train
