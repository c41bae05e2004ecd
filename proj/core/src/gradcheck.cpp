#include "iled/gradcheck.hpp"

#include <cmath>
#include <sstream>

#include "iled/errors.hpp"
#include "iled/rng.hpp"

namespace iled::diff {

std::string GradCheckReport::summary() const {
    std::ostringstream os;
    os << (pass ? "PASS" : "FAIL") << " max_rel_err=" << max_rel_err << " tol=" << tol;
    if (!worst_group.empty()) os << " worst=" << worst_group << "[" << worst_index << "]";
    return os.str();
}

GradCheckReport finite_diff_generic(const std::vector<std::pair<std::string, Tensor*>>& tensors,
                                    const std::function<double()>& value,
                                    const std::function<std::vector<Tensor>()>& grads, double h, double tol) {
    GradCheckReport rep;
    rep.tol = tol;

    std::vector<Tensor> analytic = grads();
    if (analytic.size() != tensors.size()) throw Error("finite_diff_generic: gradient count mismatch");

    double gmax = 0.0;
    for (const auto& g : analytic) gmax = std::max(gmax, g.max_abs());
    const double floor = std::max(1e-8, 1e-3 * gmax);

    for (std::size_t k = 0; k < tensors.size(); ++k) {
        Tensor* t = tensors[k].second;
        double group_worst = 0.0;
        for (std::int64_t i = 0; i < t->size(); ++i) {
            const double orig = (*t)[i];
            (*t)[i] = orig + h;
            const double fp = value();
            (*t)[i] = orig - h;
            const double fm = value();
            (*t)[i] = orig;
            if (!std::isfinite(fp) || !std::isfinite(fm))
                throw Error("finite_diff_generic: non-finite objective while perturbing " + tensors[k].first);
            const double numeric = (fp - fm) / (2.0 * h);
            const double a = analytic[k][i];
            const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
            group_worst = std::max(group_worst, rel);
            if (rel > rep.max_rel_err) {
                rep.max_rel_err = rel;
                rep.worst_group = tensors[k].first;
                rep.worst_index = i;
            }
        }
        rep.group_err.emplace_back(tensors[k].first, group_worst);
    }
    rep.pass = rep.max_rel_err <= tol;
    return rep;
}

GradCheckReport finite_diff_check(const Network& net, const Tensor& x, double h, double tol, std::uint64_t seed,
                                  const Tensor* aux) {
    if (h < 1e-7 || h > 1e-4) throw ConfigError("finite_diff_check: step h must lie in [1e-7, 1e-4]");

    // Probe forward once for the output shape and finiteness, then fix the
    // projection vector r.
    Tensor probe = forward(net, x, aux);
    if (!probe.all_finite()) throw Error("finite_diff_check: non-finite forward value");
    Rng rng(seed);
    Tensor r(probe.shape);
    for (auto& v : r.data) v = rng.uniform(-1.0, 1.0);

    // Mutable copies wired into a scratch network so perturbations are local.
    Network scratch = net;
    scratch.train_mode = false;  // running-mean updates would corrupt the probes
    Tensor input = x;
    Tensor auxv;
    if (aux) auxv = *aux;

    std::vector<std::pair<std::string, Tensor*>> targets;
    for (std::size_t li = 0; li < scratch.params.size(); ++li)
        for (std::size_t s = 0; s < scratch.params[li].size(); ++s)
            targets.emplace_back("layer" + std::to_string(li) + (s == 0 ? ".weight" : ".bias"),
                                 &scratch.params[li][s]);
    targets.emplace_back("input", &input);

    auto value = [&]() -> double {
        Tensor y = forward(scratch, input, aux ? &auxv : nullptr);
        return dot(y, r);
    };
    auto grads = [&]() -> std::vector<Tensor> {
        Tape tape;
        Var in = tape.leaf(input);
        std::optional<Var> av;
        if (aux) av = tape.leaf(auxv);
        BoundNet bn = bind(tape, scratch);
        Var out = apply(bn, in, av);
        tape.backward(out, r);
        std::vector<Tensor> gs;
        for (std::size_t li = 0; li < bn.pv.size(); ++li)
            for (Var pv : bn.pv[li]) gs.push_back(tape.grad(pv));
        gs.push_back(tape.grad(in));
        return gs;
    };

    return finite_diff_generic(targets, value, grads, h, tol);
}

}  // namespace iled::diff
