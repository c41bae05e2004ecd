#include "iled/ops.hpp"

#include <cmath>

#include "iled/errors.hpp"
#include "iled/linalg.hpp"

namespace iled::diff {

namespace {

void require(bool ok, const char* op, const std::string& msg) {
    if (!ok) throw ShapeError(std::string(op) + ": " + msg);
}

void require_same_tape(Var a, Var b, const char* op) {
    require(a.valid() && b.valid() && a.tape == b.tape, op, "operands on different tapes");
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// (B, C, L) accessor bundle for the conv kernels.
struct Sig3 {
    std::int64_t B, C, L;
};
Sig3 sig3(const Tensor& x, const char* op) {
    require(x.rank() == 3, op, "expected rank-3 (B,C,L) input, got " + x.shape_str());
    return {x.shape[0], x.shape[1], x.shape[2]};
}

struct InterpPoint {
    std::int64_t i0, i1;
    double t;
};
// align_corners=false grid: source position centered on output cells.
std::vector<InterpPoint> interp_map(std::int64_t L_in, int scale) {
    std::vector<InterpPoint> m(static_cast<std::size_t>(L_in) * scale);
    for (std::int64_t j = 0; j < L_in * scale; ++j) {
        double src = (static_cast<double>(j) + 0.5) / scale - 0.5;
        double fl = std::floor(src);
        std::int64_t i0 = static_cast<std::int64_t>(fl);
        double t = src - fl;
        std::int64_t i0c = std::min(std::max<std::int64_t>(i0, 0), L_in - 1);
        std::int64_t i1c = std::min(std::max<std::int64_t>(i0 + 1, 0), L_in - 1);
        m[static_cast<std::size_t>(j)] = {i0c, i1c, t};
    }
    return m;
}

}  // namespace

// ===== kernels ==============================================================

namespace kernels {

Tensor linear(const Tensor& x, const Tensor& W, const Tensor& b) {
    require(x.rank() == 2, "linear", "input must be (B,in), got " + x.shape_str());
    require(W.rank() == 2, "linear", "weight must be (out,in)");
    const std::int64_t B = x.shape[0], in = x.shape[1], out = W.shape[0];
    require(W.shape[1] == in, "linear", "weight in_features " + std::to_string(W.shape[1]) +
                                          " vs input features " + std::to_string(in));
    require(b.size() == out, "linear", "bias length mismatch");
    Tensor y({B, out});
    for (std::int64_t i = 0; i < B; ++i) {
        const double* xr = &x.data[static_cast<std::size_t>(i * in)];
        for (std::int64_t o = 0; o < out; ++o) {
            const double* wr = &W.data[static_cast<std::size_t>(o * in)];
            double s = b[o];
            for (std::int64_t k = 0; k < in; ++k) s += xr[k] * wr[k];
            y.at(i, o) = s;
        }
    }
    return y;
}

Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
    auto [B, Ci, L] = sig3(x, "conv1d");
    require(w.rank() == 3, "conv1d", "weight must be (Co,Ci,K)");
    const std::int64_t Co = w.shape[0], K = w.shape[2];
    require(w.shape[1] == Ci, "conv1d", "weight Ci " + std::to_string(w.shape[1]) + " vs input channels " +
                                            std::to_string(Ci));
    require(b.size() == Co, "conv1d", "bias length mismatch");
    const std::int64_t Lo = (L + 2 * pad - K) / stride + 1;
    require(Lo >= 1, "conv1d", "output length would be empty");
    Tensor y({B, Co, Lo});
    for (std::int64_t n = 0; n < B; ++n)
        for (std::int64_t co = 0; co < Co; ++co) {
            double* yr = &y.data[static_cast<std::size_t>((n * Co + co) * Lo)];
            for (std::int64_t l = 0; l < Lo; ++l) yr[l] = b[co];
            for (std::int64_t ci = 0; ci < Ci; ++ci) {
                const double* xr = &x.data[static_cast<std::size_t>((n * Ci + ci) * L)];
                const double* wr = &w.data[static_cast<std::size_t>((co * Ci + ci) * K)];
                if (stride == 1) {
                    for (std::int64_t j = 0; j < K; ++j) {
                        const double wv = wr[j];
                        const std::int64_t l0 = std::max<std::int64_t>(0, pad - j);
                        const std::int64_t l1 = std::min(Lo, L + pad - j);
                        for (std::int64_t l = l0; l < l1; ++l) yr[l] += wv * xr[l + j - pad];
                    }
                } else {
                    for (std::int64_t l = 0; l < Lo; ++l)
                        for (std::int64_t j = 0; j < K; ++j) {
                            const std::int64_t i = l * stride + j - pad;
                            if (i >= 0 && i < L) yr[l] += wr[j] * xr[i];
                        }
                }
            }
        }
    return y;
}

Tensor conv_transpose1d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
    auto [B, Ci, L] = sig3(x, "conv_transpose1d");
    require(w.rank() == 3, "conv_transpose1d", "weight must be (Ci,Co,K)");
    const std::int64_t Co = w.shape[1], K = w.shape[2];
    require(w.shape[0] == Ci, "conv_transpose1d", "weight Ci mismatch");
    require(b.size() == Co, "conv_transpose1d", "bias length mismatch");
    const std::int64_t Lo = (L - 1) * stride + K - 2 * pad;
    require(Lo >= 1, "conv_transpose1d", "output length would be empty");
    Tensor y({B, Co, Lo});
    for (std::int64_t n = 0; n < B; ++n)
        for (std::int64_t co = 0; co < Co; ++co) {
            double* yr = &y.data[static_cast<std::size_t>((n * Co + co) * Lo)];
            for (std::int64_t m = 0; m < Lo; ++m) yr[m] = b[co];
            for (std::int64_t ci = 0; ci < Ci; ++ci) {
                const double* xr = &x.data[static_cast<std::size_t>((n * Ci + ci) * L)];
                const double* wr = &w.data[static_cast<std::size_t>((ci * Co + co) * K)];
                for (std::int64_t l = 0; l < L; ++l) {
                    const double xv = xr[l];
                    for (std::int64_t j = 0; j < K; ++j) {
                        const std::int64_t m = l * stride + j - pad;
                        if (m >= 0 && m < Lo) yr[m] += xv * wr[j];
                    }
                }
            }
        }
    return y;
}

Tensor avg_pool1d(const Tensor& x, int kernel, int stride) {
    auto [B, C, L] = sig3(x, "avg_pool1d");
    const std::int64_t Lo = (L - kernel) / stride + 1;
    require(Lo >= 1, "avg_pool1d", "output length would be empty");
    Tensor y({B, C, Lo});
    const double inv = 1.0 / kernel;
    for (std::int64_t n = 0; n < B; ++n)
        for (std::int64_t c = 0; c < C; ++c) {
            const double* xr = &x.data[static_cast<std::size_t>((n * C + c) * L)];
            double* yr = &y.data[static_cast<std::size_t>((n * C + c) * Lo)];
            for (std::int64_t l = 0; l < Lo; ++l) {
                double s = 0.0;
                for (int j = 0; j < kernel; ++j) s += xr[l * stride + j];
                yr[l] = s * inv;
            }
        }
    return y;
}

Tensor upsample_linear1d(const Tensor& x, int scale) {
    auto [B, C, L] = sig3(x, "upsample_linear1d");
    const auto map = interp_map(L, scale);
    const std::int64_t Lo = L * scale;
    Tensor y({B, C, Lo});
    for (std::int64_t n = 0; n < B; ++n)
        for (std::int64_t c = 0; c < C; ++c) {
            const double* xr = &x.data[static_cast<std::size_t>((n * C + c) * L)];
            double* yr = &y.data[static_cast<std::size_t>((n * C + c) * Lo)];
            for (std::int64_t j = 0; j < Lo; ++j) {
                const auto& p = map[static_cast<std::size_t>(j)];
                yr[j] = (1.0 - p.t) * xr[p.i0] + p.t * xr[p.i1];
            }
        }
    return y;
}

Tensor pad1d(const Tensor& x, int left, int right, double value) {
    auto [B, C, L] = sig3(x, "pad1d");
    const std::int64_t Lo = L + left + right;
    Tensor y = Tensor::full({B, C, Lo}, value);
    for (std::int64_t n = 0; n < B; ++n)
        for (std::int64_t c = 0; c < C; ++c) {
            const double* xr = &x.data[static_cast<std::size_t>((n * C + c) * L)];
            double* yr = &y.data[static_cast<std::size_t>((n * C + c) * Lo)];
            for (std::int64_t l = 0; l < L; ++l) yr[l + left] = xr[l];
        }
    return y;
}

Tensor unpad1d(const Tensor& x, int left, int right) {
    auto [B, C, L] = sig3(x, "unpad1d");
    const std::int64_t Lo = L - left - right;
    require(Lo >= 1, "unpad1d", "would remove the entire signal");
    Tensor y({B, C, Lo});
    for (std::int64_t n = 0; n < B; ++n)
        for (std::int64_t c = 0; c < C; ++c) {
            const double* xr = &x.data[static_cast<std::size_t>((n * C + c) * L)];
            double* yr = &y.data[static_cast<std::size_t>((n * C + c) * Lo)];
            for (std::int64_t l = 0; l < Lo; ++l) yr[l] = xr[l + left];
        }
    return y;
}

Tensor silu(const Tensor& x) {
    Tensor y = x;
    for (auto& v : y.data) v = v * sigmoid(v);
    return y;
}

Tensor tanh_affine(const Tensor& x, double scale, double offset) {
    Tensor y = x;
    for (auto& v : y.data) v = offset + scale * std::tanh(v);
    return y;
}

Tensor matmul(const Tensor& X, const Tensor& M) {
    require(X.rank() == 2 && M.rank() == 2, "matmul", "rank-2 operands required");
    const std::int64_t B = X.shape[0], m = X.shape[1], n = M.shape[1];
    require(M.shape[0] == m, "matmul", "inner dims " + std::to_string(m) + " vs " + std::to_string(M.shape[0]));
    Tensor y({B, n});
    for (std::int64_t b = 0; b < B; ++b) {
        double* yr = &y.data[static_cast<std::size_t>(b * n)];
        for (std::int64_t i = 0; i < m; ++i) {
            const double xv = X.at(b, i);
            const double* mr = &M.data[static_cast<std::size_t>(i * n)];
            for (std::int64_t j = 0; j < n; ++j) yr[j] += xv * mr[j];
        }
    }
    return y;
}

Tensor transpose2(const Tensor& M) {
    require(M.rank() == 2, "transpose2", "rank-2 required");
    Tensor y({M.shape[1], M.shape[0]});
    for (std::int64_t i = 0; i < M.shape[0]; ++i)
        for (std::int64_t j = 0; j < M.shape[1]; ++j) y.at(j, i) = M.at(i, j);
    return y;
}

Tensor make_diag(const Tensor& v) {
    require(v.rank() == 1, "make_diag", "rank-1 required");
    const std::int64_t n = v.shape[0];
    Tensor y({n, n});
    for (std::int64_t i = 0; i < n; ++i) y.at(i, i) = v[i];
    return y;
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    require(a.rank() == 2 && b.rank() == 2 && a.shape[0] == b.shape[0], "concat_cols",
            "need (B,m),(B,n) with equal B; got " + a.shape_str() + " and " + b.shape_str());
    const std::int64_t B = a.shape[0], m = a.shape[1], n = b.shape[1];
    Tensor y({B, m + n});
    for (std::int64_t i = 0; i < B; ++i) {
        for (std::int64_t j = 0; j < m; ++j) y.at(i, j) = a.at(i, j);
        for (std::int64_t j = 0; j < n; ++j) y.at(i, m + j) = b.at(i, j);
    }
    return y;
}

Tensor solve_id_minus(const Tensor& A, const Tensor& R, double c) {
    require(A.rank() == 2 && A.shape[0] == A.shape[1], "solve_id_minus", "A must be square");
    require(R.rank() == 2 && R.shape[1] == A.shape[0], "solve_id_minus", "R columns must match A");
    const std::int64_t n = A.shape[0], B = R.shape[0];
    std::vector<double> M(static_cast<std::size_t>(n) * n);
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < n; ++j)
            M[static_cast<std::size_t>(i * n + j)] = (i == j ? 1.0 : 0.0) - c * A.at(i, j);
    linalg::DenseLU lu(M.data(), static_cast<int>(n));
    Tensor X = R;
    for (std::int64_t b = 0; b < B; ++b) lu.solve(&X.data[static_cast<std::size_t>(b * n)]);
    return X;
}

}  // namespace kernels

// ===== elementwise tape ops =================================================

namespace {

template <typename Fwd, typename Bwd>
Var unary_op(Var a, const char* name, Fwd fwd, Bwd bwd) {
    require(a.valid(), name, "invalid operand");
    Tape& t = *a.tape;
    Tensor y = fwd(t.val(a));
    return t.emit(std::move(y), [a, bwd](Tape& tp, const Tensor& g) {
        Tensor ga = bwd(tp.val(a), g);
        tp.accumulate(a, ga);
    });
}

}  // namespace

Var add(Var a, Var b) {
    require_same_tape(a, b, "add");
    Tape& t = *a.tape;
    require(t.val(a).same_shape(t.val(b)), "add", "shape mismatch");
    Tensor y = t.val(a);
    add_inplace(y, t.val(b));
    return t.emit(std::move(y), [a, b](Tape& tp, const Tensor& g) {
        tp.accumulate(a, g);
        tp.accumulate(b, g);
    });
}

Var sub(Var a, Var b) {
    require_same_tape(a, b, "sub");
    Tape& t = *a.tape;
    require(t.val(a).same_shape(t.val(b)), "sub", "shape mismatch");
    Tensor y = t.val(a);
    axpy_inplace(y, -1.0, t.val(b));
    return t.emit(std::move(y), [a, b](Tape& tp, const Tensor& g) {
        tp.accumulate(a, g);
        tp.accumulate_scaled(b, -1.0, g);
    });
}

Var mul(Var a, Var b) {
    require_same_tape(a, b, "mul");
    Tape& t = *a.tape;
    require(t.val(a).same_shape(t.val(b)), "mul", "shape mismatch");
    Tensor y = t.val(a);
    for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] *= t.val(b).data[i];
    return t.emit(std::move(y), [a, b](Tape& tp, const Tensor& g) {
        Tensor ga = g, gb = g;
        const Tensor& av = tp.val(a);
        const Tensor& bv = tp.val(b);
        for (std::size_t i = 0; i < g.data.size(); ++i) {
            ga.data[i] *= bv.data[i];
            gb.data[i] *= av.data[i];
        }
        tp.accumulate(a, ga);
        tp.accumulate(b, gb);
    });
}

Var neg(Var a) { return scale(a, -1.0); }

Var scale(Var a, double c) {
    return unary_op(
        a, "scale",
        [c](const Tensor& x) {
            Tensor y = x;
            for (auto& v : y.data) v *= c;
            return y;
        },
        [c](const Tensor&, const Tensor& g) {
            Tensor ga = g;
            for (auto& v : ga.data) v *= c;
            return ga;
        });
}

Var add_scalar(Var a, double c) {
    return unary_op(
        a, "add_scalar",
        [c](const Tensor& x) {
            Tensor y = x;
            for (auto& v : y.data) v += c;
            return y;
        },
        [](const Tensor&, const Tensor& g) { return g; });
}

Var vexp(Var a) {
    return unary_op(
        a, "vexp", [](const Tensor& x) {
            Tensor y = x;
            for (auto& v : y.data) v = std::exp(v);
            return y;
        },
        [](const Tensor& x, const Tensor& g) {
            Tensor ga = g;
            for (std::size_t i = 0; i < ga.data.size(); ++i) ga.data[i] *= std::exp(x.data[i]);
            return ga;
        });
}

Var vabs(Var a) {
    return unary_op(
        a, "vabs", [](const Tensor& x) {
            Tensor y = x;
            for (auto& v : y.data) v = std::abs(v);
            return y;
        },
        [](const Tensor& x, const Tensor& g) {
            Tensor ga = g;
            for (std::size_t i = 0; i < ga.data.size(); ++i) {
                double s = x.data[i] > 0 ? 1.0 : (x.data[i] < 0 ? -1.0 : 0.0);
                ga.data[i] *= s;
            }
            return ga;
        });
}

Var silu(Var a) {
    return unary_op(
        a, "silu", [](const Tensor& x) { return kernels::silu(x); },
        [](const Tensor& x, const Tensor& g) {
            Tensor ga = g;
            for (std::size_t i = 0; i < ga.data.size(); ++i) {
                const double s = sigmoid(x.data[i]);
                ga.data[i] *= s * (1.0 + x.data[i] * (1.0 - s));
            }
            return ga;
        });
}

Var tanh_affine(Var a, double s, double o) {
    return unary_op(
        a, "tanh_affine", [s, o](const Tensor& x) { return kernels::tanh_affine(x, s, o); },
        [s](const Tensor& x, const Tensor& g) {
            Tensor ga = g;
            for (std::size_t i = 0; i < ga.data.size(); ++i) {
                const double th = std::tanh(x.data[i]);
                ga.data[i] *= s * (1.0 - th * th);
            }
            return ga;
        });
}

// ===== row-vector broadcasting ==============================================

namespace {
void require_rowvec(Tape& t, Var X, Var v, const char* op) {
    require(t.val(X).rank() == 2 && t.val(v).rank() == 1, op, "need (B,n) and (n)");
    require(t.val(X).shape[1] == t.val(v).shape[0], op, "feature dims differ");
}
}  // namespace

Var add_rowvec(Var X, Var v) {
    require_same_tape(X, v, "add_rowvec");
    Tape& t = *X.tape;
    require_rowvec(t, X, v, "add_rowvec");
    const Tensor& xv = t.val(X);
    const Tensor& vv = t.val(v);
    Tensor y = xv;
    const std::int64_t B = xv.shape[0], n = xv.shape[1];
    for (std::int64_t b = 0; b < B; ++b)
        for (std::int64_t j = 0; j < n; ++j) y.at(b, j) += vv[j];
    return t.emit(std::move(y), [X, v, B, n](Tape& tp, const Tensor& g) {
        tp.accumulate(X, g);
        Tensor gv({n});
        for (std::int64_t b = 0; b < B; ++b)
            for (std::int64_t j = 0; j < n; ++j) gv[j] += g.at(b, j);
        tp.accumulate(v, gv);
    });
}

Var mul_rowvec(Var X, Var v) {
    require_same_tape(X, v, "mul_rowvec");
    Tape& t = *X.tape;
    require_rowvec(t, X, v, "mul_rowvec");
    const Tensor& xv = t.val(X);
    const Tensor& vv = t.val(v);
    Tensor y = xv;
    const std::int64_t B = xv.shape[0], n = xv.shape[1];
    for (std::int64_t b = 0; b < B; ++b)
        for (std::int64_t j = 0; j < n; ++j) y.at(b, j) *= vv[j];
    return t.emit(std::move(y), [X, v, B, n](Tape& tp, const Tensor& g) {
        const Tensor& xv2 = tp.val(X);
        const Tensor& vv2 = tp.val(v);
        Tensor gx = g;
        Tensor gv({n});
        for (std::int64_t b = 0; b < B; ++b)
            for (std::int64_t j = 0; j < n; ++j) {
                gx.at(b, j) *= vv2[j];
                gv[j] += g.at(b, j) * xv2.at(b, j);
            }
        tp.accumulate(X, gx);
        tp.accumulate(v, gv);
    });
}

Var div_rowvec(Var X, Var v) {
    require_same_tape(X, v, "div_rowvec");
    Tape& t = *X.tape;
    require_rowvec(t, X, v, "div_rowvec");
    const Tensor& xv = t.val(X);
    const Tensor& vv = t.val(v);
    Tensor y = xv;
    const std::int64_t B = xv.shape[0], n = xv.shape[1];
    for (std::int64_t b = 0; b < B; ++b)
        for (std::int64_t j = 0; j < n; ++j) y.at(b, j) /= vv[j];
    return t.emit(std::move(y), [X, v, B, n](Tape& tp, const Tensor& g) {
        const Tensor& xv2 = tp.val(X);
        const Tensor& vv2 = tp.val(v);
        Tensor gx = g;
        Tensor gv({n});
        for (std::int64_t b = 0; b < B; ++b)
            for (std::int64_t j = 0; j < n; ++j) {
                gx.at(b, j) /= vv2[j];
                gv[j] -= g.at(b, j) * xv2.at(b, j) / (vv2[j] * vv2[j]);
            }
        tp.accumulate(X, gx);
        tp.accumulate(v, gv);
    });
}

Var sub_const_rowvec(Var X, const Tensor& v) {
    require(X.valid(), "sub_const_rowvec", "invalid operand");
    Tape& t = *X.tape;
    const Tensor& xv = t.val(X);
    require(xv.rank() == 2 && v.rank() == 1 && xv.shape[1] == v.shape[0], "sub_const_rowvec", "shape mismatch");
    Tensor y = xv;
    for (std::int64_t b = 0; b < xv.shape[0]; ++b)
        for (std::int64_t j = 0; j < xv.shape[1]; ++j) y.at(b, j) -= v[j];
    return t.emit(std::move(y), [X](Tape& tp, const Tensor& g) { tp.accumulate(X, g); });
}

// ===== linear algebra =======================================================

Var matmul(Var X, Var M) {
    require_same_tape(X, M, "matmul");
    Tape& t = *X.tape;
    Tensor y = kernels::matmul(t.val(X), t.val(M));
    return t.emit(std::move(y), [X, M](Tape& tp, const Tensor& g) {
        const Tensor& xv = tp.val(X);
        const Tensor& mv = tp.val(M);
        const std::int64_t B = xv.shape[0], m = xv.shape[1], n = mv.shape[1];
        Tensor gx({B, m});
        for (std::int64_t b = 0; b < B; ++b)
            for (std::int64_t i = 0; i < m; ++i) {
                double s = 0.0;
                for (std::int64_t j = 0; j < n; ++j) s += g.at(b, j) * mv.at(i, j);
                gx.at(b, i) = s;
            }
        Tensor gm({m, n});
        for (std::int64_t b = 0; b < B; ++b)
            for (std::int64_t i = 0; i < m; ++i) {
                const double xv2 = xv.at(b, i);
                for (std::int64_t j = 0; j < n; ++j) gm.at(i, j) += xv2 * g.at(b, j);
            }
        tp.accumulate(X, gx);
        tp.accumulate(M, gm);
    });
}

Var transpose2(Var M) {
    return unary_op(
        M, "transpose2", [](const Tensor& x) { return kernels::transpose2(x); },
        [](const Tensor&, const Tensor& g) { return kernels::transpose2(g); });
}

Var make_diag(Var v) {
    return unary_op(
        v, "make_diag", [](const Tensor& x) { return kernels::make_diag(x); },
        [](const Tensor& x, const Tensor& g) {
            Tensor gv({x.shape[0]});
            for (std::int64_t i = 0; i < x.shape[0]; ++i) gv[i] = g.at(i, i);
            return gv;
        });
}

Var outer(Var a, Var b) {
    require_same_tape(a, b, "outer");
    Tape& t = *a.tape;
    const Tensor& av = t.val(a);
    const Tensor& bv = t.val(b);
    require(av.rank() == 1 && bv.rank() == 1, "outer", "rank-1 operands required");
    const std::int64_t m = av.shape[0], n = bv.shape[0];
    Tensor y({m, n});
    for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t j = 0; j < n; ++j) y.at(i, j) = av[i] * bv[j];
    return t.emit(std::move(y), [a, b, m, n](Tape& tp, const Tensor& g) {
        const Tensor& av2 = tp.val(a);
        const Tensor& bv2 = tp.val(b);
        Tensor ga({m}), gb({n});
        for (std::int64_t i = 0; i < m; ++i)
            for (std::int64_t j = 0; j < n; ++j) {
                ga[i] += g.at(i, j) * bv2[j];
                gb[j] += g.at(i, j) * av2[i];
            }
        tp.accumulate(a, ga);
        tp.accumulate(b, gb);
    });
}

Var solve_id_minus(Var A, Var R, double c) {
    require_same_tape(A, R, "solve_id_minus");
    Tape& t = *A.tape;
    Tensor X = kernels::solve_id_minus(t.val(A), t.val(R), c);
    Tensor Xcopy = X;
    const std::int64_t n = t.val(A).shape[0];
    return t.emit(std::move(X), [A, R, c, n, Xcopy](Tape& tp, const Tensor& g) {
        // x = (I-cA)^{-1} r  =>  gr = (I-cA)^{-T} g,  gA = c * gr x^T (summed over rows)
        const Tensor& Av = tp.val(A);
        std::vector<double> M(static_cast<std::size_t>(n) * n);
        for (std::int64_t i = 0; i < n; ++i)
            for (std::int64_t j = 0; j < n; ++j)
                M[static_cast<std::size_t>(i * n + j)] = (i == j ? 1.0 : 0.0) - c * Av.at(i, j);
        linalg::DenseLU lu(M.data(), static_cast<int>(n));
        Tensor gr = g;
        const std::int64_t B = g.shape[0];
        for (std::int64_t b = 0; b < B; ++b) lu.solve_transposed(&gr.data[static_cast<std::size_t>(b * n)]);
        Tensor gA({n, n});
        for (std::int64_t b = 0; b < B; ++b)
            for (std::int64_t i = 0; i < n; ++i) {
                const double gi = c * gr.at(b, i);
                for (std::int64_t j = 0; j < n; ++j) gA.at(i, j) += gi * Xcopy.at(b, j);
            }
        tp.accumulate(R, gr);
        tp.accumulate(A, gA);
    });
}

// ===== structure ============================================================

Var concat_cols(Var a, Var b) {
    require_same_tape(a, b, "concat_cols");
    Tape& t = *a.tape;
    Tensor y = kernels::concat_cols(t.val(a), t.val(b));
    const std::int64_t m = t.val(a).shape[1];
    return t.emit(std::move(y), [a, b, m](Tape& tp, const Tensor& g) {
        const std::int64_t B = g.shape[0], tot = g.shape[1];
        Tensor ga({B, m}), gb({B, tot - m});
        for (std::int64_t i = 0; i < B; ++i) {
            for (std::int64_t j = 0; j < m; ++j) ga.at(i, j) = g.at(i, j);
            for (std::int64_t j = m; j < tot; ++j) gb.at(i, j - m) = g.at(i, j);
        }
        tp.accumulate(a, ga);
        tp.accumulate(b, gb);
    });
}

Var take_row(Var X, std::int64_t i) {
    require(X.valid(), "take_row", "invalid operand");
    Tape& t = *X.tape;
    const Tensor& xv = t.val(X);
    require(xv.rank() == 2 && i >= 0 && i < xv.shape[0], "take_row", "row index out of range");
    const std::int64_t F = xv.shape[1];
    Tensor y({1, F});
    for (std::int64_t j = 0; j < F; ++j) y.at(0, j) = xv.at(i, j);
    return t.emit(std::move(y), [X, i, F](Tape& tp, const Tensor& g) {
        Tensor gx = Tensor::zeros(tp.val(X).shape);
        for (std::int64_t j = 0; j < F; ++j) gx.at(i, j) = g.at(0, j);
        tp.accumulate(X, gx);
    });
}

Var slice_rows(Var X, std::int64_t i0, std::int64_t n) {
    require(X.valid(), "slice_rows", "invalid operand");
    Tape& t = *X.tape;
    const Tensor& xv = t.val(X);
    require(xv.rank() == 2 && i0 >= 0 && n >= 1 && i0 + n <= xv.shape[0], "slice_rows", "row range out of bounds");
    const std::int64_t F = xv.shape[1];
    Tensor y({n, F});
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < F; ++j) y.at(i, j) = xv.at(i0 + i, j);
    return t.emit(std::move(y), [X, i0, n, F](Tape& tp, const Tensor& g) {
        Tensor gx = Tensor::zeros(tp.val(X).shape);
        for (std::int64_t i = 0; i < n; ++i)
            for (std::int64_t j = 0; j < F; ++j) gx.at(i0 + i, j) = g.at(i, j);
        tp.accumulate(X, gx);
    });
}

Var stack_rows(std::span<const Var> rows) {
    require(!rows.empty(), "stack_rows", "no rows");
    Tape& t = *rows[0].tape;
    const std::int64_t F = t.val(rows[0]).shape[1];
    const std::int64_t N = static_cast<std::int64_t>(rows.size());
    Tensor y({N, F});
    for (std::int64_t r = 0; r < N; ++r) {
        const Tensor& row = t.val(rows[static_cast<std::size_t>(r)]);
        require(row.rank() == 2 && row.shape[0] == 1 && row.shape[1] == F, "stack_rows", "rows must be (1,F)");
        for (std::int64_t j = 0; j < F; ++j) y.at(r, j) = row.at(0, j);
    }
    std::vector<Var> saved(rows.begin(), rows.end());
    return t.emit(std::move(y), [saved, F](Tape& tp, const Tensor& g) {
        for (std::size_t r = 0; r < saved.size(); ++r) {
            Tensor gr({1, F});
            for (std::int64_t j = 0; j < F; ++j) gr.at(0, j) = g.at(static_cast<std::int64_t>(r), j);
            tp.accumulate(saved[r], gr);
        }
    });
}

Var weighted_sum_rows(Var X, const std::vector<double>& w) {
    require(X.valid(), "weighted_sum_rows", "invalid operand");
    Tape& t = *X.tape;
    const Tensor& xv = t.val(X);
    require(xv.rank() == 2 && xv.shape[0] == static_cast<std::int64_t>(w.size()), "weighted_sum_rows",
            "weight count must equal row count");
    const std::int64_t N = xv.shape[0], F = xv.shape[1];
    Tensor y({1, F});
    for (std::int64_t i = 0; i < N; ++i)
        for (std::int64_t j = 0; j < F; ++j) y.at(0, j) += w[static_cast<std::size_t>(i)] * xv.at(i, j);
    return t.emit(std::move(y), [X, w, N, F](Tape& tp, const Tensor& g) {
        Tensor gx({N, F});
        for (std::int64_t i = 0; i < N; ++i)
            for (std::int64_t j = 0; j < F; ++j) gx.at(i, j) = w[static_cast<std::size_t>(i)] * g.at(0, j);
        tp.accumulate(X, gx);
    });
}

Var mean_rows(Var X) {
    const std::int64_t N = X.tape->val(X).shape[0];
    return weighted_sum_rows(X, std::vector<double>(static_cast<std::size_t>(N), 1.0 / static_cast<double>(N)));
}

Var reshape(Var x, std::vector<std::int64_t> shape) {
    require(x.valid(), "reshape", "invalid operand");
    Tape& t = *x.tape;
    require(shape_product(shape) == t.val(x).size(), "reshape",
            "element count mismatch " + t.val(x).shape_str() + " -> " + shape_to_string(shape));
    Tensor y(std::move(shape), t.val(x).data);
    return t.emit(std::move(y), [x](Tape& tp, const Tensor& g) {
        Tensor gx(tp.val(x).shape, g.data);
        tp.accumulate(x, gx);
    });
}

// ===== reductions ===========================================================

Var sum_all(Var x) {
    return unary_op(
        x, "sum_all", [](const Tensor& v) {
            double s = 0.0;
            for (double d : v.data) s += d;
            return Tensor::scalar(s);
        },
        [](const Tensor& v, const Tensor& g) { return Tensor::full(v.shape, g.data[0]); });
}

Var sumsq(Var x) {
    return unary_op(
        x, "sumsq", [](const Tensor& v) {
            double s = 0.0;
            for (double d : v.data) s += d * d;
            return Tensor::scalar(s);
        },
        [](const Tensor& v, const Tensor& g) {
            Tensor gx = v;
            for (auto& d : gx.data) d *= 2.0 * g.data[0];
            return gx;
        });
}

Var mean_all(Var x) {
    const double n = static_cast<double>(x.tape->val(x).size());
    return scale(sum_all(x), 1.0 / n);
}

// ===== layers ===============================================================

Var linear(Var x, Var W, Var b) {
    require_same_tape(x, W, "linear");
    Tape& t = *x.tape;
    Tensor y = kernels::linear(t.val(x), t.val(W), t.val(b));
    return t.emit(std::move(y), [x, W, b](Tape& tp, const Tensor& g) {
        const Tensor& xv = tp.val(x);
        const Tensor& Wv = tp.val(W);
        const std::int64_t B = xv.shape[0], in = xv.shape[1], out = Wv.shape[0];
        Tensor gx({B, in}), gW({out, in}), gb({out});
        for (std::int64_t i = 0; i < B; ++i)
            for (std::int64_t o = 0; o < out; ++o) {
                const double gv = g.at(i, o);
                gb[o] += gv;
                const double* wr = &Wv.data[static_cast<std::size_t>(o * in)];
                const double* xr = &xv.data[static_cast<std::size_t>(i * in)];
                double* gxr = &gx.data[static_cast<std::size_t>(i * in)];
                double* gWr = &gW.data[static_cast<std::size_t>(o * in)];
                for (std::int64_t k = 0; k < in; ++k) {
                    gxr[k] += gv * wr[k];
                    gWr[k] += gv * xr[k];
                }
            }
        tp.accumulate(x, gx);
        tp.accumulate(W, gW);
        tp.accumulate(b, gb);
    });
}

Var conv1d(Var x, Var w, Var b, int stride, int pad) {
    require_same_tape(x, w, "conv1d");
    Tape& t = *x.tape;
    Tensor y = kernels::conv1d(t.val(x), t.val(w), t.val(b), stride, pad);
    return t.emit(std::move(y), [x, w, b, stride, pad](Tape& tp, const Tensor& g) {
        const Tensor& xv = tp.val(x);
        const Tensor& wv = tp.val(w);
        const std::int64_t B = xv.shape[0], Ci = xv.shape[1], L = xv.shape[2];
        const std::int64_t Co = wv.shape[0], K = wv.shape[2], Lo = g.shape[2];
        Tensor gx(xv.shape), gw(wv.shape), gb({Co});
        for (std::int64_t n = 0; n < B; ++n)
            for (std::int64_t co = 0; co < Co; ++co) {
                const double* gr = &g.data[static_cast<std::size_t>((n * Co + co) * Lo)];
                for (std::int64_t l = 0; l < Lo; ++l) gb[co] += gr[l];
                for (std::int64_t ci = 0; ci < Ci; ++ci) {
                    const double* xr = &xv.data[static_cast<std::size_t>((n * Ci + ci) * L)];
                    const double* wr = &wv.data[static_cast<std::size_t>((co * Ci + ci) * K)];
                    double* gxr = &gx.data[static_cast<std::size_t>((n * Ci + ci) * L)];
                    double* gwr = &gw.data[static_cast<std::size_t>((co * Ci + ci) * K)];
                    if (stride == 1) {
                        for (std::int64_t j = 0; j < K; ++j) {
                            const std::int64_t l0 = std::max<std::int64_t>(0, pad - j);
                            const std::int64_t l1 = std::min(Lo, L + pad - j);
                            const double wvj = wr[j];
                            double s = 0.0;
                            for (std::int64_t l = l0; l < l1; ++l) {
                                gxr[l + j - pad] += wvj * gr[l];
                                s += gr[l] * xr[l + j - pad];
                            }
                            gwr[j] += s;
                        }
                    } else {
                        for (std::int64_t l = 0; l < Lo; ++l)
                            for (std::int64_t j = 0; j < K; ++j) {
                                const std::int64_t i = l * stride + j - pad;
                                if (i >= 0 && i < L) {
                                    gxr[i] += wr[j] * gr[l];
                                    gwr[j] += gr[l] * xr[i];
                                }
                            }
                    }
                }
            }
        tp.accumulate(x, gx);
        tp.accumulate(w, gw);
        tp.accumulate(b, gb);
    });
}

Var conv_transpose1d(Var x, Var w, Var b, int stride, int pad) {
    require_same_tape(x, w, "conv_transpose1d");
    Tape& t = *x.tape;
    Tensor y = kernels::conv_transpose1d(t.val(x), t.val(w), t.val(b), stride, pad);
    return t.emit(std::move(y), [x, w, b, stride, pad](Tape& tp, const Tensor& g) {
        const Tensor& xv = tp.val(x);
        const Tensor& wv = tp.val(w);
        const std::int64_t B = xv.shape[0], Ci = xv.shape[1], L = xv.shape[2];
        const std::int64_t Co = wv.shape[1], K = wv.shape[2], Lo = g.shape[2];
        Tensor gx(xv.shape), gw(wv.shape), gb({Co});
        for (std::int64_t n = 0; n < B; ++n)
            for (std::int64_t co = 0; co < Co; ++co) {
                const double* gr = &g.data[static_cast<std::size_t>((n * Co + co) * Lo)];
                for (std::int64_t m = 0; m < Lo; ++m) gb[co] += gr[m];
                for (std::int64_t ci = 0; ci < Ci; ++ci) {
                    const double* xr = &xv.data[static_cast<std::size_t>((n * Ci + ci) * L)];
                    const double* wr = &wv.data[static_cast<std::size_t>((ci * Co + co) * K)];
                    double* gxr = &gx.data[static_cast<std::size_t>((n * Ci + ci) * L)];
                    double* gwr = &gw.data[static_cast<std::size_t>((ci * Co + co) * K)];
                    for (std::int64_t l = 0; l < L; ++l) {
                        const double xvl = xr[l];
                        double s = 0.0;
                        for (std::int64_t j = 0; j < K; ++j) {
                            const std::int64_t m = l * stride + j - pad;
                            if (m >= 0 && m < Lo) {
                                s += wr[j] * gr[m];
                                gwr[j] += xvl * gr[m];
                            }
                        }
                        gxr[l] += s;
                    }
                }
            }
        tp.accumulate(x, gx);
        tp.accumulate(w, gw);
        tp.accumulate(b, gb);
    });
}

Var avg_pool1d(Var x, int kernel, int stride) {
    return unary_op(
        x, "avg_pool1d", [kernel, stride](const Tensor& v) { return kernels::avg_pool1d(v, kernel, stride); },
        [kernel, stride](const Tensor& v, const Tensor& g) {
            const std::int64_t B = v.shape[0], C = v.shape[1], L = v.shape[2], Lo = g.shape[2];
            Tensor gx(v.shape);
            const double inv = 1.0 / kernel;
            for (std::int64_t n = 0; n < B; ++n)
                for (std::int64_t c = 0; c < C; ++c) {
                    const double* gr = &g.data[static_cast<std::size_t>((n * C + c) * Lo)];
                    double* gxr = &gx.data[static_cast<std::size_t>((n * C + c) * L)];
                    for (std::int64_t l = 0; l < Lo; ++l) {
                        const double gv = gr[l] * inv;
                        for (int j = 0; j < kernel; ++j) gxr[l * stride + j] += gv;
                    }
                }
            return gx;
        });
}

Var upsample_linear1d(Var x, int scale) {
    return unary_op(
        x, "upsample_linear1d", [scale](const Tensor& v) { return kernels::upsample_linear1d(v, scale); },
        [scale](const Tensor& v, const Tensor& g) {
            const std::int64_t B = v.shape[0], C = v.shape[1], L = v.shape[2], Lo = g.shape[2];
            const auto map = interp_map(L, scale);
            Tensor gx(v.shape);
            for (std::int64_t n = 0; n < B; ++n)
                for (std::int64_t c = 0; c < C; ++c) {
                    const double* gr = &g.data[static_cast<std::size_t>((n * C + c) * Lo)];
                    double* gxr = &gx.data[static_cast<std::size_t>((n * C + c) * L)];
                    for (std::int64_t j = 0; j < Lo; ++j) {
                        const auto& p = map[static_cast<std::size_t>(j)];
                        gxr[p.i0] += (1.0 - p.t) * gr[j];
                        gxr[p.i1] += p.t * gr[j];
                    }
                }
            return gx;
        });
}

Var pad1d(Var x, int left, int right, double value) {
    return unary_op(
        x, "pad1d", [left, right, value](const Tensor& v) { return kernels::pad1d(v, left, right, value); },
        [left, right](const Tensor& v, const Tensor& g) { return kernels::unpad1d(g, left, right); });
}

Var unpad1d(Var x, int left, int right) {
    return unary_op(
        x, "unpad1d", [left, right](const Tensor& v) { return kernels::unpad1d(v, left, right); },
        [left, right](const Tensor& v, const Tensor& g) { return kernels::pad1d(g, left, right, 0.0); });
}

}  // namespace iled::diff
