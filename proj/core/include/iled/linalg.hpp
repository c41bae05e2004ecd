#pragma once

#include <cstdint>
#include <vector>

namespace iled::linalg {

// Dense LU with partial pivoting for the small (d_z <= 32) stage systems of
// the semi-implicit integrator. Row-major storage.
class DenseLU {
public:
    DenseLU() = default;
    // A is n*n row-major; throws on singular pivot.
    DenseLU(const double* A, int n);

    int n() const { return n_; }
    // Solve L U x = P b in place.
    void solve(double* b) const;
    // Solve with the transposed matrix: A^T x = b.
    void solve_transposed(double* b) const;

private:
    int n_ = 0;
    std::vector<double> lu_;
    std::vector<int> piv_;
};

// Banded LU without pivoting for the FHN semi-implicit stage matrices.
// The interleaved (u_0, v_0, u_1, v_1, ...) ordering makes them
// pentadiagonal and strongly diagonally dominant for the step sizes in use,
// so pivoting is unnecessary.
class BandedLU {
public:
    BandedLU() = default;
    // bands[d] holds diagonal d-kl (d in [0, kl+ku]); band value at row i is
    // A(i, i+d-kl). Sizes n each; out-of-range entries ignored.
    BandedLU(const std::vector<std::vector<double>>& bands, int n, int kl, int ku);

    void solve(double* b) const;

private:
    int n_ = 0, kl_ = 0, ku_ = 0;
    std::vector<double> m_;  // (kl+ku+1) x n compact storage after factorization
    double& at(int band, int i) { return m_[static_cast<std::size_t>(band) * n_ + i]; }
    double at(int band, int i) const { return m_[static_cast<std::size_t>(band) * n_ + i]; }
};

}  // namespace iled::linalg
