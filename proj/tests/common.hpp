#pragma once

#include <cmath>

#include "iled/network.hpp"
#include "iled/rng.hpp"

namespace testutil {

inline iled::diff::Tensor random_tensor(std::vector<std::int64_t> shape, iled::Rng& rng, double lo = -1.0,
                                        double hi = 1.0) {
    iled::diff::Tensor t(std::move(shape));
    for (auto& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

inline void zero_params(iled::diff::Network& net) {
    for (auto& lp : net.params)
        for (auto& t : lp)
            for (auto& v : t.data) v = 0.0;
}

inline double max_abs_diff(const iled::diff::Tensor& a, const iled::diff::Tensor& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

}  // namespace testutil
