#include "iled/fft.hpp"

#include <cmath>

#include "iled/errors.hpp"

namespace iled::fft {

namespace {

constexpr double kTwoPi = 6.283185307179586476925287;

// Recursive mixed-radix Cooley-Tukey over radices {2,3}. Sizes here are tiny
// (<= a few thousand), so recursion depth and allocation churn are not a
// concern; determinism and correctness are.
void fft_rec(cvec& x, bool inverse) {
    const std::size_t n = x.size();
    if (n <= 1) return;

    std::size_t radix = 0;
    if (n % 2 == 0)
        radix = 2;
    else if (n % 3 == 0)
        radix = 3;
    else
        throw Error("fft: length " + std::to_string(n) + " is not of the form 2^a*3^b");

    const std::size_t m = n / radix;
    std::vector<cvec> part(radix, cvec(m));
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t r = 0; r < radix; ++r) part[r][j] = x[j * radix + r];
    for (auto& p : part) fft_rec(p, inverse);

    const double sgn = inverse ? 1.0 : -1.0;
    for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> acc(0.0, 0.0);
        for (std::size_t r = 0; r < radix; ++r) {
            const double ang = sgn * kTwoPi * static_cast<double>(r * k) / static_cast<double>(n);
            acc += std::complex<double>(std::cos(ang), std::sin(ang)) * part[r][k % m];
        }
        x[k] = acc;
    }
}

}  // namespace

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

cvec fft_unnormalized(const cvec& x, bool inverse) {
    cvec y = x;
    fft_rec(y, inverse);
    return y;
}

cvec dft(const cvec& x) {
    if (!is_pow2(x.size())) throw Error("dft: length " + std::to_string(x.size()) + " is not a power of two");
    cvec y = fft_unnormalized(x, false);
    const double s = 1.0 / std::sqrt(static_cast<double>(x.size()));
    for (auto& v : y) v *= s;
    return y;
}

cvec idft(const cvec& x) {
    if (!is_pow2(x.size())) throw Error("idft: length " + std::to_string(x.size()) + " is not a power of two");
    cvec y = fft_unnormalized(x, true);
    const double s = 1.0 / std::sqrt(static_cast<double>(x.size()));
    for (auto& v : y) v *= s;
    return y;
}

cvec dft_real(const std::vector<double>& x) {
    cvec c(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) c[i] = std::complex<double>(x[i], 0.0);
    return dft(c);
}

}  // namespace iled::fft
