#pragma once

#include <span>
#include <vector>

#include "iled/tape.hpp"

namespace iled::diff {

// Plain-tensor forward kernels. The tape ops below wrap exactly these, so the
// recording and non-recording evaluation paths cannot drift apart.
namespace kernels {

Tensor linear(const Tensor& x, const Tensor& W, const Tensor& b);
Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad);
Tensor conv_transpose1d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad);
Tensor avg_pool1d(const Tensor& x, int kernel, int stride);
Tensor upsample_linear1d(const Tensor& x, int scale);
Tensor pad1d(const Tensor& x, int left, int right, double value);
Tensor unpad1d(const Tensor& x, int left, int right);
Tensor silu(const Tensor& x);
Tensor tanh_affine(const Tensor& x, double scale, double offset);
Tensor matmul(const Tensor& X, const Tensor& M);  // (B,m) x (m,n) -> (B,n)
Tensor transpose2(const Tensor& M);
Tensor make_diag(const Tensor& v);
Tensor concat_cols(const Tensor& a, const Tensor& b);
// Rows of X solve (I - c*A) x^T = r^T for each row r of R.
Tensor solve_id_minus(const Tensor& A, const Tensor& R, double c);

}  // namespace kernels

// --- elementwise -----------------------------------------------------------
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var neg(Var a);
Var scale(Var a, double c);
Var add_scalar(Var a, double c);
Var vexp(Var a);
Var vabs(Var a);
Var silu(Var a);
Var tanh_affine(Var a, double s, double o);

// --- row-vector broadcasting over (B,n) -------------------------------------
Var add_rowvec(Var X, Var v);
Var mul_rowvec(Var X, Var v);
Var div_rowvec(Var X, Var v);
Var sub_const_rowvec(Var X, const Tensor& v);  // v not differentiated (centering mean)

// --- linear algebra ----------------------------------------------------------
Var matmul(Var X, Var M);
Var transpose2(Var M);
Var make_diag(Var v);
Var outer(Var a, Var b);
Var solve_id_minus(Var A, Var R, double c);

// --- structure ----------------------------------------------------------------
Var concat_cols(Var a, Var b);
Var take_row(Var X, std::int64_t i);                  // (N,F) -> (1,F)
Var slice_rows(Var X, std::int64_t i0, std::int64_t n);  // (N,F) -> (n,F)
Var stack_rows(std::span<const Var> rows);            // k x (1,F) -> (k,F)
Var weighted_sum_rows(Var X, const std::vector<double>& w);  // (N,F) -> (1,F)
Var mean_rows(Var X);                                 // (N,F) -> (1,F)
Var reshape(Var x, std::vector<std::int64_t> shape);

// --- reductions -----------------------------------------------------------------
Var sum_all(Var x);
Var sumsq(Var x);
Var mean_all(Var x);

// --- neural-network layers -------------------------------------------------------
Var linear(Var x, Var W, Var b);
Var conv1d(Var x, Var w, Var b, int stride, int pad);
Var conv_transpose1d(Var x, Var w, Var b, int stride, int pad);
Var avg_pool1d(Var x, int kernel, int stride);
Var upsample_linear1d(Var x, int scale);
Var pad1d(Var x, int left, int right, double value);
Var unpad1d(Var x, int left, int right);

}  // namespace iled::diff
