#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "iled/network.hpp"

namespace iled::diff {

struct GradCheckReport {
    bool pass = false;
    double max_rel_err = 0.0;
    std::string worst_group;
    std::int64_t worst_index = -1;
    double tol = 0.0;
    std::vector<std::pair<std::string, double>> group_err;  // per-group max rel err

    std::string summary() const;
};

// Generic central-difference check. `tensors` are the differentiation
// targets (perturbed in place entry by entry and restored); `value` returns
// the scalar objective at the current tensor values; `grads` returns the
// analytic gradients aligned with `tensors`.
//
// Relative error uses denominator max(|a|,|n|,floor) with
// floor = max(1e-8, 1e-3 * max|grad|), so noise on near-zero entries of an
// otherwise O(1) gradient field does not dominate the report.
GradCheckReport finite_diff_generic(const std::vector<std::pair<std::string, Tensor*>>& tensors,
                                    const std::function<double()>& value,
                                    const std::function<std::vector<Tensor>()>& grads, double h, double tol);

// Spec-level check for a network: a fixed random-projection scalar loss
// L = <forward(x), r> is differentiated w.r.t. every parameter and every
// input entry and compared against central differences.
// Preconditions: h in [1e-7, 1e-4]; forward(x) finite.
GradCheckReport finite_diff_check(const Network& net, const Tensor& x, double h, double tol,
                                  std::uint64_t seed = 1234, const Tensor* aux = nullptr);

}  // namespace iled::diff
