#include "iled/linalg.hpp"

#include <cmath>
#include <cstdlib>

#include "iled/errors.hpp"

namespace iled::linalg {

DenseLU::DenseLU(const double* A, int n) : n_(n), lu_(A, A + static_cast<std::size_t>(n) * n), piv_(n) {
    for (int k = 0; k < n_; ++k) {
        int p = k;
        double best = std::abs(lu_[static_cast<std::size_t>(k) * n_ + k]);
        for (int i = k + 1; i < n_; ++i) {
            double v = std::abs(lu_[static_cast<std::size_t>(i) * n_ + k]);
            if (v > best) {
                best = v;
                p = i;
            }
        }
        if (best == 0.0) throw Error("DenseLU: singular matrix");
        piv_[k] = p;
        if (p != k)
            for (int j = 0; j < n_; ++j) std::swap(lu_[static_cast<std::size_t>(k) * n_ + j], lu_[static_cast<std::size_t>(p) * n_ + j]);
        const double pivot = lu_[static_cast<std::size_t>(k) * n_ + k];
        for (int i = k + 1; i < n_; ++i) {
            double m = lu_[static_cast<std::size_t>(i) * n_ + k] / pivot;
            lu_[static_cast<std::size_t>(i) * n_ + k] = m;
            for (int j = k + 1; j < n_; ++j)
                lu_[static_cast<std::size_t>(i) * n_ + j] -= m * lu_[static_cast<std::size_t>(k) * n_ + j];
        }
    }
}

void DenseLU::solve(double* b) const {
    for (int k = 0; k < n_; ++k)
        if (piv_[k] != k) std::swap(b[k], b[piv_[k]]);
    for (int i = 1; i < n_; ++i) {
        double s = b[i];
        for (int j = 0; j < i; ++j) s -= lu_[static_cast<std::size_t>(i) * n_ + j] * b[j];
        b[i] = s;
    }
    for (int i = n_ - 1; i >= 0; --i) {
        double s = b[i];
        for (int j = i + 1; j < n_; ++j) s -= lu_[static_cast<std::size_t>(i) * n_ + j] * b[j];
        b[i] = s / lu_[static_cast<std::size_t>(i) * n_ + i];
    }
}

void DenseLU::solve_transposed(double* b) const {
    // A = P^T L U  =>  A^T = U^T L^T P. Solve U^T y = b, then L^T z = y,
    // then undo the row permutation.
    for (int i = 0; i < n_; ++i) {
        double s = b[i];
        for (int j = 0; j < i; ++j) s -= lu_[static_cast<std::size_t>(j) * n_ + i] * b[j];
        b[i] = s / lu_[static_cast<std::size_t>(i) * n_ + i];
    }
    for (int i = n_ - 1; i >= 0; --i) {
        double s = b[i];
        for (int j = i + 1; j < n_; ++j) s -= lu_[static_cast<std::size_t>(j) * n_ + i] * b[j];
        b[i] = s;
    }
    for (int k = n_ - 1; k >= 0; --k)
        if (piv_[k] != k) std::swap(b[k], b[piv_[k]]);
}

BandedLU::BandedLU(const std::vector<std::vector<double>>& bands, int n, int kl, int ku)
    : n_(n), kl_(kl), ku_(ku), m_(static_cast<std::size_t>(kl + ku + 1) * n, 0.0) {
    if (static_cast<int>(bands.size()) != kl + ku + 1) throw Error("BandedLU: wrong band count");
    for (int d = 0; d <= kl_ + ku_; ++d)
        for (int i = 0; i < n_; ++i) {
            int j = i + d - kl_;
            if (j >= 0 && j < n_) at(d, i) = bands[static_cast<std::size_t>(d)][static_cast<std::size_t>(i)];
        }

    for (int k = 0; k < n_; ++k) {
        const double pivot = at(kl_, k);
        if (pivot == 0.0) throw Error("BandedLU: zero pivot (matrix not diagonally dominant?)");
        for (int i = k + 1; i <= std::min(k + kl_, n_ - 1); ++i) {
            int di = k - i + kl_;
            double m = at(di, i) / pivot;
            at(di, i) = m;
            for (int j = k + 1; j <= std::min(k + ku_, n_ - 1); ++j) {
                int dkj = j - k + kl_;
                int dij = j - i + kl_;
                at(dij, i) -= m * at(dkj, k);
            }
        }
    }
}

void BandedLU::solve(double* b) const {
    for (int i = 1; i < n_; ++i) {
        double s = b[i];
        for (int j = std::max(0, i - kl_); j < i; ++j) s -= at(j - i + kl_, i) * b[j];
        b[i] = s;
    }
    for (int i = n_ - 1; i >= 0; --i) {
        double s = b[i];
        for (int j = i + 1; j <= std::min(i + ku_, n_ - 1); ++j) s -= at(j - i + kl_, i) * b[j];
        b[i] = s / at(kl_, i);
    }
}

}  // namespace iled::linalg
