// Copyright (c) 2026, ndgait authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <type_traits>
#include <vector>

#include "ndgait/diff/gemm.hpp"
#include "ndgait/diff/tape.hpp"

namespace ndg::diff {

namespace detail {

inline void require(bool ok, const char *op, const std::string &msg) {
    if (!ok) throw ShapeError(std::string(op) + ": " + msg);
}

template <class T> void require_same(const Var<T> &a, const Var<T> &b, const char *op) {
    require(a.shape() == b.shape(), op,
            "shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

// Packs a boolean stream into 64-bit words and folds them into the tape's
// kink signature.
class KinkHasher {
public:
    void push(bool bit) {
        word_ = (word_ << 1) | static_cast<std::uint64_t>(bit);
        if (++n_ == 64) flush();
    }
    void push_index(std::uint64_t v) { acc_ = acc_ * 1099511628211ULL ^ v; }
    template <class T> void commit(Tape<T> &tape) {
        flush();
        tape.mix_kink(acc_);
    }

private:
    void flush() {
        acc_ = acc_ * 1099511628211ULL ^ word_ ^ (static_cast<std::uint64_t>(n_) << 56);
        word_ = 0;
        n_ = 0;
    }
    std::uint64_t acc_ = 14695981039346656037ULL;
    std::uint64_t word_ = 0;
    unsigned n_ = 0;
};

// cols[(c*K + k)*Tout + t] = in[c*Lin + t*s + k - p] (zero outside)
template <class T>
void im2col(const T *in, std::size_t C, std::size_t Lin, std::size_t K, std::size_t s,
            std::size_t p, std::size_t Tout, T *cols) {
    for (std::size_t c = 0; c < C; ++c) {
        const T *row = in + c * Lin;
        for (std::size_t k = 0; k < K; ++k) {
            T *dst = cols + (c * K + k) * Tout;
            for (std::size_t t = 0; t < Tout; ++t) {
                const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(t * s + k) -
                                           static_cast<std::ptrdiff_t>(p);
                dst[t] = (pos >= 0 && pos < static_cast<std::ptrdiff_t>(Lin)) ? row[pos] : T(0);
            }
        }
    }
}

template <class T>
void col2im(const T *cols, std::size_t C, std::size_t Lin, std::size_t K, std::size_t s,
            std::size_t p, std::size_t Tout, T *out) {
    for (std::size_t c = 0; c < C; ++c) {
        T *row = out + c * Lin;
        for (std::size_t k = 0; k < K; ++k) {
            const T *src = cols + (c * K + k) * Tout;
            for (std::size_t t = 0; t < Tout; ++t) {
                const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(t * s + k) -
                                           static_cast<std::ptrdiff_t>(p);
                if (pos >= 0 && pos < static_cast<std::ptrdiff_t>(Lin)) row[pos] += src[t];
            }
        }
    }
}

template <class T> void axpy(std::size_t n, T a, const T *x, T *y) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

template <class T> void acc(T *dst, const Tensor<T> &src) {
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
}

} // namespace detail

// ---------------------------------------------------------------- elementwise

template <class T> Var<T> add(Var<T> a, Var<T> b) {
    detail::require_same(a, b, "add");
    Tensor<T> out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
    return a.tape->record(std::move(out), {a, b}, [a, b](Tape<T> &t, const Tensor<T> &g) {
        if (t.requires_grad(a.id)) detail::acc(t.grad_ptr(a.id), g);
        if (t.requires_grad(b.id)) detail::acc(t.grad_ptr(b.id), g);
    });
}

template <class T> Var<T> sub(Var<T> a, Var<T> b) {
    detail::require_same(a, b, "sub");
    Tensor<T> out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
    return a.tape->record(std::move(out), {a, b}, [a, b](Tape<T> &t, const Tensor<T> &g) {
        if (t.requires_grad(a.id)) detail::acc(t.grad_ptr(a.id), g);
        if (t.requires_grad(b.id)) {
            T *gb = t.grad_ptr(b.id);
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
        }
    });
}

template <class T> Var<T> mul(Var<T> a, Var<T> b) {
    detail::require_same(a, b, "mul");
    Tensor<T> out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
    return a.tape->record(std::move(out), {a, b}, [a, b](Tape<T> &t, const Tensor<T> &g) {
        const auto &av = t.value(a.id);
        const auto &bv = t.value(b.id);
        if (t.requires_grad(a.id)) {
            T *ga = t.grad_ptr(a.id);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
        }
        if (t.requires_grad(b.id)) {
            T *gb = t.grad_ptr(b.id);
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
        }
    });
}

/// x * c for a constant c.
template <class T> Var<T> scale(Var<T> x, T c) {
    Tensor<T> out = x.value();
    for (auto &v : out.data) v *= c;
    return x.tape->record(std::move(out), {x}, [x, c](Tape<T> &t, const Tensor<T> &g) {
        detail::axpy(g.size(), c, g.ptr(), t.grad_ptr(x.id));
    });
}

template <class T> Var<T> add_const(Var<T> x, T c) {
    Tensor<T> out = x.value();
    for (auto &v : out.data) v += c;
    return x.tape->record(std::move(out), {x}, [x](Tape<T> &t, const Tensor<T> &g) {
        detail::acc(t.grad_ptr(x.id), g);
    });
}

/// x * s where s holds a single element.
template <class T> Var<T> mul_scalar(Var<T> x, Var<T> s) {
    detail::require(s.size() == 1, "mul_scalar", "scalar operand has shape " + shape_str(s.shape()));
    const T sv = s.value()[0];
    Tensor<T> out = x.value();
    for (auto &v : out.data) v *= sv;
    return x.tape->record(std::move(out), {x, s}, [x, s](Tape<T> &t, const Tensor<T> &g) {
        const auto &xv = t.value(x.id);
        const T sv = t.value(s.id)[0];
        if (t.requires_grad(x.id)) detail::axpy(g.size(), sv, g.ptr(), t.grad_ptr(x.id));
        if (t.requires_grad(s.id)) {
            T acc = 0;
            for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * xv[i];
            t.grad_ptr(s.id)[0] += acc;
        }
    });
}

template <class T> Var<T> add_scalar(Var<T> x, Var<T> s) {
    detail::require(s.size() == 1, "add_scalar", "scalar operand has shape " + shape_str(s.shape()));
    const T sv = s.value()[0];
    Tensor<T> out = x.value();
    for (auto &v : out.data) v += sv;
    return x.tape->record(std::move(out), {x, s}, [x, s](Tape<T> &t, const Tensor<T> &g) {
        if (t.requires_grad(x.id)) detail::acc(t.grad_ptr(x.id), g);
        if (t.requires_grad(s.id)) {
            T acc = 0;
            for (std::size_t i = 0; i < g.size(); ++i) acc += g[i];
            t.grad_ptr(s.id)[0] += acc;
        }
    });
}

/// x[..., D] + b[D]
template <class T> Var<T> add_last(Var<T> x, Var<T> b) {
    const std::size_t D = b.size();
    detail::require(x.rank() >= 1 && x.shape().back() == D, "add_last",
                    "bias " + shape_str(b.shape()) + " vs input " + shape_str(x.shape()));
    Tensor<T> out = x.value();
    const auto &bv = b.value();
    for (std::size_t r = 0; r < out.size(); r += D)
        for (std::size_t j = 0; j < D; ++j) out[r + j] += bv[j];
    return x.tape->record(std::move(out), {x, b}, [x, b, D](Tape<T> &t, const Tensor<T> &g) {
        if (t.requires_grad(x.id)) detail::acc(t.grad_ptr(x.id), g);
        if (t.requires_grad(b.id)) {
            T *gb = t.grad_ptr(b.id);
            for (std::size_t r = 0; r < g.size(); r += D)
                for (std::size_t j = 0; j < D; ++j) gb[j] += g[r + j];
        }
    });
}

/// x[N×C×L] (or [C×L]) + b[C] broadcast over the trailing axis.
template <class T> Var<T> add_channel(Var<T> x, Var<T> b) {
    detail::require(x.rank() == 2 || x.rank() == 3, "add_channel", "input must be rank 2 or 3");
    const std::size_t C = x.dim(x.rank() - 2), L = x.shape().back();
    detail::require(b.size() == C, "add_channel", "bias length must equal channel count");
    Tensor<T> out = x.value();
    const auto &bv = b.value();
    for (std::size_t r = 0; r < out.size() / L; ++r) {
        const T bc = bv[r % C];
        T *row = out.ptr() + r * L;
        for (std::size_t l = 0; l < L; ++l) row[l] += bc;
    }
    return x.tape->record(std::move(out), {x, b}, [x, b, C, L](Tape<T> &t, const Tensor<T> &g) {
        if (t.requires_grad(x.id)) detail::acc(t.grad_ptr(x.id), g);
        if (t.requires_grad(b.id)) {
            T *gb = t.grad_ptr(b.id);
            for (std::size_t r = 0; r < g.size() / L; ++r) {
                const T *row = g.ptr() + r * L;
                T acc = 0;
                for (std::size_t l = 0; l < L; ++l) acc += row[l];
                gb[r % C] += acc;
            }
        }
    });
}

template <class T> Var<T> square(Var<T> x) {
    Tensor<T> out = x.value();
    for (auto &v : out.data) v *= v;
    return x.tape->record(std::move(out), {x}, [x](Tape<T> &t, const Tensor<T> &g) {
        const auto &xv = t.value(x.id);
        T *gx = t.grad_ptr(x.id);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += T(2) * xv[i] * g[i];
    });
}

template <class T> Var<T> reciprocal(Var<T> x) {
    Tensor<T> out = x.value();
    for (auto &v : out.data) {
        if (v == T(0)) throw DomainError("reciprocal of zero");
        v = T(1) / v;
    }
    return x.tape->record(std::move(out), {x}, [x](Tape<T> &t, const Tensor<T> &g) {
        const auto &xv = t.value(x.id);
        T *gx = t.grad_ptr(x.id);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] -= g[i] / (xv[i] * xv[i]);
    });
}

template <class T> Var<T> exp(Var<T> x) {
    Tensor<T> out = x.value();
    for (auto &v : out.data) v = std::exp(v);
    auto y = std::make_shared<Tensor<T>>(out);
    return x.tape->record(std::move(out), {x}, [x, y](Tape<T> &t, const Tensor<T> &g) {
        T *gx = t.grad_ptr(x.id);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (*y)[i];
    });
}

template <class T> Var<T> relu(Var<T> x) {
    Tensor<T> out = x.value();
    if (x.tape->track_kinks()) {
        detail::KinkHasher kh;
        for (const auto v : out.data) kh.push(v > T(0));
        kh.commit(*x.tape);
    }
    for (auto &v : out.data) v = v > T(0) ? v : T(0);
    return x.tape->record(std::move(out), {x}, [x](Tape<T> &t, const Tensor<T> &g) {
        const auto &xv = t.value(x.id);
        T *gx = t.grad_ptr(x.id);
        for (std::size_t i = 0; i < g.size(); ++i)
            gx[i] += xv[i] > T(0) ? g[i] : T(0);
    });
}

/// ELU with alpha = 1.
template <class T> Var<T> elu(Var<T> x) {
    Tensor<T> out = x.value();
    for (auto &v : out.data)
        if (v <= T(0)) v = std::expm1(v);
    return x.tape->record(std::move(out), {x}, [x](Tape<T> &t, const Tensor<T> &g) {
        const auto &xv = t.value(x.id);
        T *gx = t.grad_ptr(x.id);
        for (std::size_t i = 0; i < g.size(); ++i)
            gx[i] += xv[i] > T(0) ? g[i] : g[i] * std::exp(xv[i]);
    });
}

/// max(x, lo) elementwise.
template <class T> Var<T> clamp_min(Var<T> x, T lo) {
    Tensor<T> out = x.value();
    if (x.tape->track_kinks()) {
        detail::KinkHasher kh;
        for (const auto v : out.data) kh.push(v > lo);
        kh.commit(*x.tape);
    }
    for (auto &v : out.data) v = v > lo ? v : lo;
    return x.tape->record(std::move(out), {x}, [x, lo](Tape<T> &t, const Tensor<T> &g) {
        const auto &xv = t.value(x.id);
        T *gx = t.grad_ptr(x.id);
        for (std::size_t i = 0; i < g.size(); ++i)
            if (xv[i] > lo) gx[i] += g[i];
    });
}

template <class T> Var<T> operator+(Var<T> a, Var<T> b) { return add(a, b); }
template <class T> Var<T> operator-(Var<T> a, Var<T> b) { return sub(a, b); }
template <class T> Var<T> operator*(Var<T> a, Var<T> b) { return mul(a, b); }

// ----------------------------------------------------------------- reductions

template <class T> Var<T> sum(Var<T> x) {
    T s = 0;
    for (auto v : x.value().data) s += v;
    return x.tape->record(Tensor<T>::scalar(s), {x}, [x](Tape<T> &t, const Tensor<T> &g) {
        const T gv = g[0];
        T *gx = t.grad_ptr(x.id);
        const std::size_t n = t.value(x.id).size();
        for (std::size_t i = 0; i < n; ++i) gx[i] += gv;
    });
}

template <class T> Var<T> mean(Var<T> x) {
    return scale(sum(x), T(1) / static_cast<T>(x.size()));
}

/// Sums the last axis: [..., D] -> [...].
template <class T> Var<T> sum_last(Var<T> x) {
    detail::require(x.rank() >= 1, "sum_last", "rank-0 input");
    const std::size_t D = x.shape().back();
    const std::size_t R = x.size() / std::max<std::size_t>(D, 1);
    Shape os(x.shape().begin(), x.shape().end() - 1);
    Tensor<T> out(os);
    const T *xv = x.data();
    for (std::size_t r = 0; r < R; ++r) {
        T s = 0;
        for (std::size_t j = 0; j < D; ++j) s += xv[r * D + j];
        out[r] = s;
    }
    return x.tape->record(std::move(out), {x}, [x, R, D](Tape<T> &t, const Tensor<T> &g) {
        T *gx = t.grad_ptr(x.id);
        for (std::size_t r = 0; r < R; ++r)
            for (std::size_t j = 0; j < D; ++j) gx[r * D + j] += g[r];
    });
}

/// Mean over axis 1 of [B×L×D] -> [B×D].
template <class T> Var<T> mean_axis1(Var<T> x) {
    detail::require(x.rank() == 3, "mean_axis1", "expects rank 3, got " + shape_str(x.shape()));
    const std::size_t B = x.dim(0), L = x.dim(1), D = x.dim(2);
    Tensor<T> out({B, D});
    const T *xv = x.data();
    const T inv = T(1) / static_cast<T>(L);
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t l = 0; l < L; ++l)
            for (std::size_t j = 0; j < D; ++j) out[b * D + j] += xv[(b * L + l) * D + j] * inv;
    return x.tape->record(std::move(out), {x}, [x, B, L, D, inv](Tape<T> &t, const Tensor<T> &g) {
        T *gx = t.grad_ptr(x.id);
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t l = 0; l < L; ++l)
                for (std::size_t j = 0; j < D; ++j) gx[(b * L + l) * D + j] += g[b * D + j] * inv;
    });
}

// ------------------------------------------------------------ shape plumbing

template <class T> Var<T> reshape(Var<T> x, Shape s) {
    detail::require(numel(s) == x.size(), "reshape",
                    shape_str(x.shape()) + " -> " + shape_str(s));
    Tensor<T> out(std::move(s), x.value().data);
    return x.tape->record(std::move(out), {x}, [x](Tape<T> &t, const Tensor<T> &g) {
        detail::acc(t.grad_ptr(x.id), g);
    });
}

namespace detail {
// Calls fn(out_offset, in_offset) for each contiguous run of `run` elements.
template <class F>
void permute_runs(const Shape &os, const std::vector<std::size_t> &pstride, std::size_t keep,
                  std::size_t run, F &&fn) {
    const std::size_t outer = numel(os) / std::max<std::size_t>(run, 1);
    std::vector<std::size_t> idx(keep, 0);
    std::size_t src = 0;
    for (std::size_t o = 0; o < outer; ++o) {
        fn(o * run, src);
        for (std::size_t i = keep; i-- > 0;) {
            src += pstride[i];
            if (++idx[i] < os[i]) break;
            src -= pstride[i] * idx[i];
            idx[i] = 0;
        }
    }
}
} // namespace detail

/// General axis permutation: out.shape[i] = x.shape[perm[i]].
template <class T> Var<T> permute(Var<T> x, std::vector<std::size_t> perm) {
    const Shape &is = x.shape();
    const std::size_t r = is.size();
    detail::require(perm.size() == r, "permute", "permutation rank mismatch");
    Shape os(r);
    std::vector<std::size_t> istride(r, 1), pstride(r);
    for (std::size_t i = r; i-- > 1;) istride[i - 1] = istride[i] * is[i];
    std::vector<bool> seen(r, false);
    for (std::size_t i = 0; i < r; ++i) {
        detail::require(perm[i] < r && !seen[perm[i]], "permute", "invalid permutation");
        seen[perm[i]] = true;
        os[i] = is[perm[i]];
        pstride[i] = istride[perm[i]];
    }
    // trailing axes left in place are copied as contiguous runs
    std::size_t keep = r, run = 1;
    while (keep > 0 && perm[keep - 1] == keep - 1) run *= is[--keep];
    Tensor<T> out(os);
    const T *xv = x.data();
    T *ov = out.ptr();
    detail::permute_runs(os, pstride, keep, run, [&](std::size_t o, std::size_t src) {
        std::copy(xv + src, xv + src + run, ov + o);
    });
    return x.tape->record(std::move(out), {x}, [x, os, pstride, keep, run](Tape<T> &t, const Tensor<T> &g) {
        T *gx = t.grad_ptr(x.id);
        const T *gv = g.ptr();
        detail::permute_runs(os, pstride, keep, run, [&](std::size_t o, std::size_t src) {
            for (std::size_t j = 0; j < run; ++j) gx[src + j] += gv[o + j];
        });
    });
}

template <class T> Var<T> transpose2d(Var<T> x) {
    detail::require(x.rank() == 2, "transpose2d", "expects rank 2");
    return permute(x, {1, 0});
}

/// Gathers rows of x viewed as [R × inner]: out[m] = x[idx[m]].
template <class T> Var<T> gather_rows(Var<T> x, std::vector<std::size_t> idx) {
    detail::require(x.rank() >= 1, "gather_rows", "rank-0 input");
    const std::size_t R = x.dim(0);
    const std::size_t inner = x.size() / std::max<std::size_t>(R, 1);
    Shape os = x.shape();
    os[0] = idx.size();
    Tensor<T> out(os);
    const T *xv = x.data();
    for (std::size_t m = 0; m < idx.size(); ++m) {
        detail::require(idx[m] < R, "gather_rows", "row index out of range");
        std::copy(xv + idx[m] * inner, xv + (idx[m] + 1) * inner, out.ptr() + m * inner);
    }
    auto ip = std::make_shared<std::vector<std::size_t>>(std::move(idx));
    return x.tape->record(std::move(out), {x}, [x, ip, inner](Tape<T> &t, const Tensor<T> &g) {
        T *gx = t.grad_ptr(x.id);
        for (std::size_t m = 0; m < ip->size(); ++m)
            detail::axpy(inner, T(1), g.ptr() + m * inner, gx + (*ip)[m] * inner);
    });
}

/// Flat gather: out[i] = x.data[idx[i]] reshaped to `shape`.
template <class T> Var<T> take(Var<T> x, std::vector<std::size_t> idx, Shape shape) {
    detail::require(numel(shape) == idx.size(), "take", "index count does not match shape");
    Tensor<T> out(std::move(shape));
    const T *xv = x.data();
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < idx.size(); ++i) {
        detail::require(idx[i] < n, "take", "index out of range");
        out[i] = xv[idx[i]];
    }
    auto ip = std::make_shared<std::vector<std::size_t>>(std::move(idx));
    return x.tape->record(std::move(out), {x}, [x, ip](Tape<T> &t, const Tensor<T> &g) {
        T *gx = t.grad_ptr(x.id);
        for (std::size_t i = 0; i < ip->size(); ++i) gx[(*ip)[i]] += g[i];
    });
}

/// Selects index k of the last axis: [..., L] -> [...].
template <class T> Var<T> select_last(Var<T> x, std::size_t k) {
    const std::size_t L = x.shape().back();
    detail::require(k < L, "select_last", "index out of range");
    const std::size_t R = x.size() / L;
    std::vector<std::size_t> idx(R);
    for (std::size_t r = 0; r < R; ++r) idx[r] = r * L + k;
    return take(x, std::move(idx), Shape(x.shape().begin(), x.shape().end() - 1));
}

/// Trims or zero-pads the last axis of [N×C×T] to length L.
template <class T> Var<T> fit_length(Var<T> x, std::size_t L) {
    detail::require(x.rank() == 3, "fit_length", "expects rank 3");
    const std::size_t N = x.dim(0), C = x.dim(1), Tin = x.dim(2);
    if (Tin == L) return x;
    const std::size_t keep = std::min(Tin, L);
    Tensor<T> out({N, C, L});
    const T *xv = x.data();
    for (std::size_t r = 0; r < N * C; ++r)
        std::copy(xv + r * Tin, xv + r * Tin + keep, out.ptr() + r * L);
    return x.tape->record(std::move(out), {x},
                          [x, N, C, Tin, L, keep](Tape<T> &t, const Tensor<T> &g) {
                              T *gx = t.grad_ptr(x.id);
                              for (std::size_t r = 0; r < N * C; ++r)
                                  detail::axpy(keep, T(1), g.ptr() + r * L, gx + r * Tin);
                          });
}

// ------------------------------------------------------------- linear algebra

template <class T> Var<T> matmul(Var<T> a, Var<T> b) {
    detail::require(a.rank() == 2 && b.rank() == 2, "matmul", "expects rank-2 operands");
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    detail::require(b.dim(0) == k, "matmul",
                    "inner dimensions disagree " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    Tensor<T> out({m, n});
    detail::gemm(false, false, m, n, k, a.data(), b.data(), out.ptr(), false);
    return a.tape->record(std::move(out), {a, b}, [a, b, m, n, k](Tape<T> &t, const Tensor<T> &g) {
        if (t.requires_grad(a.id))
            detail::gemm(false, true, m, k, n, g.ptr(), t.value(b.id).ptr(), t.grad_ptr(a.id), true);
        if (t.requires_grad(b.id))
            detail::gemm(true, false, k, n, m, t.value(a.id).ptr(), g.ptr(), t.grad_ptr(b.id), true);
    });
}

/// x[N×in]·Wᵀ + b with W stored [out×in].
template <class T> Var<T> linear(Var<T> x, Var<T> W, const std::type_identity_t<Var<T>> *b = nullptr) {
    detail::require(x.rank() == 2 && W.rank() == 2, "linear", "expects rank-2 input and weight");
    const std::size_t N = x.dim(0), in = x.dim(1), out_dim = W.dim(0);
    detail::require(W.dim(1) == in, "linear",
                    "input " + shape_str(x.shape()) + " vs weight " + shape_str(W.shape()));
    Tensor<T> out({N, out_dim});
    detail::gemm(false, true, N, out_dim, in, x.data(), W.data(), out.ptr(), false);
    auto y = x.tape->record(std::move(out), {x, W},
                            [x, W, N, in, out_dim](Tape<T> &t, const Tensor<T> &g) {
                                if (t.requires_grad(x.id))
                                    detail::gemm(false, false, N, in, out_dim, g.ptr(),
                                                 t.value(W.id).ptr(), t.grad_ptr(x.id), true);
                                if (t.requires_grad(W.id))
                                    detail::gemm(true, false, out_dim, in, N, g.ptr(),
                                                 t.value(x.id).ptr(), t.grad_ptr(W.id), true);
                            });
    if (b) y = add_last(y, *b);
    return y;
}

/// Batched product [B×m×k]·[B×k×n] (or [B×n×k] with transpose_b).
template <class T> Var<T> bmm(Var<T> a, Var<T> b, bool transpose_b = false) {
    detail::require(a.rank() == 3 && b.rank() == 3 && a.dim(0) == b.dim(0), "bmm",
                    "expects matching rank-3 operands");
    const std::size_t B = a.dim(0), m = a.dim(1), k = a.dim(2);
    const std::size_t n = transpose_b ? b.dim(1) : b.dim(2);
    detail::require((transpose_b ? b.dim(2) : b.dim(1)) == k, "bmm", "inner dimensions disagree");
    Tensor<T> out({B, m, n});
    for (std::size_t i = 0; i < B; ++i)
        detail::gemm(false, transpose_b, m, n, k, a.data() + i * m * k, b.data() + i * k * n,
                     out.ptr() + i * m * n, false);
    return a.tape->record(std::move(out), {a, b},
                          [a, b, B, m, n, k, transpose_b](Tape<T> &t, const Tensor<T> &g) {
                              const T *av = t.value(a.id).ptr();
                              const T *bv = t.value(b.id).ptr();
                              const bool ga = t.requires_grad(a.id), gb = t.requires_grad(b.id);
                              T *gap = ga ? t.grad_ptr(a.id) : nullptr;
                              T *gbp = gb ? t.grad_ptr(b.id) : nullptr;
                              for (std::size_t i = 0; i < B; ++i) {
                                  const T *gi = g.ptr() + i * m * n;
                                  if (ga)
                                      detail::gemm(false, !transpose_b, m, k, n, gi, bv + i * k * n,
                                                   gap + i * m * k, true);
                                  if (gb) {
                                      if (transpose_b)
                                          detail::gemm(true, false, n, k, m, gi, av + i * m * k,
                                                       gbp + i * k * n, true);
                                      else
                                          detail::gemm(true, false, k, n, m, av + i * m * k, gi,
                                                       gbp + i * k * n, true);
                                  }
                              }
                          });
}

// ------------------------------------------------------- softmax & friends

template <class T> Var<T> softmax_last(Var<T> x) {
    const std::size_t D = x.shape().back();
    const std::size_t R = x.size() / D;
    Tensor<T> out = x.value();
    for (std::size_t r = 0; r < R; ++r) {
        T *row = out.ptr() + r * D;
        const T m = *std::max_element(row, row + D);
        T s = 0;
        for (std::size_t j = 0; j < D; ++j) s += (row[j] = std::exp(row[j] - m));
        for (std::size_t j = 0; j < D; ++j) row[j] /= s;
    }
    auto y = std::make_shared<Tensor<T>>(out);
    return x.tape->record(std::move(out), {x}, [x, y, R, D](Tape<T> &t, const Tensor<T> &g) {
        T *gx = t.grad_ptr(x.id);
        for (std::size_t r = 0; r < R; ++r) {
            const T *yr = y->ptr() + r * D;
            const T *gr = g.ptr() + r * D;
            T dot = 0;
            for (std::size_t j = 0; j < D; ++j) dot += gr[j] * yr[j];
            for (std::size_t j = 0; j < D; ++j) gx[r * D + j] += yr[j] * (gr[j] - dot);
        }
    });
}

/// Softmax over the last axis where entries with mask != 0 receive an additive
/// -large logit and are then set to exactly zero. A fully masked row throws.
template <class T>
Var<T> masked_softmax_last(Var<T> x, const std::vector<std::uint8_t> &mask, T large = T(1e9)) {
    const std::size_t D = x.shape().back();
    const std::size_t R = x.size() / D;
    detail::require(mask.size() == x.size(), "masked_softmax_last", "mask size mismatch");
    Tensor<T> out = x.value();
    for (std::size_t r = 0; r < R; ++r) {
        T *row = out.ptr() + r * D;
        const std::uint8_t *mr = mask.data() + r * D;
        if (std::all_of(mr, mr + D, [](std::uint8_t v) { return v != 0; }))
            throw DegenerateMaskError("every entry of a softmax row is masked");
        for (std::size_t j = 0; j < D; ++j)
            if (mr[j]) row[j] -= large;
        const T m = *std::max_element(row, row + D);
        T s = 0;
        for (std::size_t j = 0; j < D; ++j) s += (row[j] = std::exp(row[j] - m));
        for (std::size_t j = 0; j < D; ++j) row[j] = mr[j] ? T(0) : row[j] / s;
    }
    auto y = std::make_shared<Tensor<T>>(out);
    return x.tape->record(std::move(out), {x}, [x, y, R, D](Tape<T> &t, const Tensor<T> &g) {
        T *gx = t.grad_ptr(x.id);
        for (std::size_t r = 0; r < R; ++r) {
            const T *yr = y->ptr() + r * D;
            const T *gr = g.ptr() + r * D;
            T dot = 0;
            for (std::size_t j = 0; j < D; ++j) dot += gr[j] * yr[j];
            for (std::size_t j = 0; j < D; ++j) gx[r * D + j] += yr[j] * (gr[j] - dot);
        }
    });
}

/// Max-shifted log-sum-exp over the last axis: [..., D] -> [...].
template <class T> Var<T> logsumexp_last(Var<T> x) {
    detail::require(x.rank() >= 1 && x.shape().back() > 0, "logsumexp_last", "empty reduction axis");
    const std::size_t D = x.shape().back();
    const std::size_t R = x.size() / D;
    Tensor<T> out(Shape(x.shape().begin(), x.shape().end() - 1));
    const T *xv = x.data();
    for (std::size_t r = 0; r < R; ++r) {
        const T *row = xv + r * D;
        const T m = *std::max_element(row, row + D);
        T s = 0;
        for (std::size_t j = 0; j < D; ++j) s += std::exp(row[j] - m);
        out[r] = m + std::log(s);
    }
    auto y = std::make_shared<Tensor<T>>(out);
    return x.tape->record(std::move(out), {x}, [x, y, R, D](Tape<T> &t, const Tensor<T> &g) {
        const T *xv = t.value(x.id).ptr();
        T *gx = t.grad_ptr(x.id);
        for (std::size_t r = 0; r < R; ++r)
            for (std::size_t j = 0; j < D; ++j)
                gx[r * D + j] += g[r] * std::exp(xv[r * D + j] - (*y)[r]);
    });
}

/// Log-sum-exp over all entries of a vector.
template <class T> Var<T> logsumexp(Var<T> x) {
    if (x.size() == 0) throw DomainError("logsumexp of an empty array");
    return logsumexp_last(reshape(x, Shape{x.size()}));
}

/// out[r, j] = log Σ_{k ≥ j} exp(x[r, k]) over the last axis.
template <class T> Var<T> suffix_logsumexp_last(Var<T> x) {
    detail::require(x.rank() >= 1 && x.shape().back() > 0, "suffix_logsumexp_last", "empty axis");
    const std::size_t D = x.shape().back();
    const std::size_t R = x.size() / D;
    Tensor<T> out(x.shape());
    const T *xv = x.data();
    for (std::size_t r = 0; r < R; ++r) {
        const T *row = xv + r * D;
        T *o = out.ptr() + r * D;
        T run = row[D - 1];
        o[D - 1] = run;
        for (std::size_t j = D - 1; j-- > 0;) {
            const T hi = std::max(run, row[j]);
            run = hi + std::log(std::exp(run - hi) + std::exp(row[j] - hi));
            o[j] = run;
        }
    }
    auto y = std::make_shared<Tensor<T>>(out);
    return x.tape->record(std::move(out), {x}, [x, y, R, D](Tape<T> &t, const Tensor<T> &g) {
        const T *xv = t.value(x.id).ptr();
        T *gx = t.grad_ptr(x.id);
        for (std::size_t r = 0; r < R; ++r)
            for (std::size_t k = 0; k < D; ++k) {
                T acc = 0;
                for (std::size_t j = 0; j <= k; ++j)
                    acc += g[r * D + j] * std::exp(xv[r * D + k] - (*y)[r * D + j]);
                gx[r * D + k] += acc;
            }
    });
}

/// Rows of [..., D] divided by sqrt(Σx² + eps).
template <class T> Var<T> l2_normalize_last(Var<T> x, T eps = T(1e-12)) {
    const std::size_t D = x.shape().back();
    const std::size_t R = x.size() / D;
    Tensor<T> out = x.value();
    auto norms = std::make_shared<std::vector<T>>(R);
    for (std::size_t r = 0; r < R; ++r) {
        T *row = out.ptr() + r * D;
        T s = eps;
        for (std::size_t j = 0; j < D; ++j) s += row[j] * row[j];
        const T n = std::sqrt(s);
        (*norms)[r] = n;
        for (std::size_t j = 0; j < D; ++j) row[j] /= n;
    }
    auto y = std::make_shared<Tensor<T>>(out);
    return x.tape->record(std::move(out), {x}, [x, y, norms, R, D](Tape<T> &t, const Tensor<T> &g) {
        T *gx = t.grad_ptr(x.id);
        for (std::size_t r = 0; r < R; ++r) {
            const T *yr = y->ptr() + r * D;
            const T *gr = g.ptr() + r * D;
            T dot = 0;
            for (std::size_t j = 0; j < D; ++j) dot += gr[j] * yr[j];
            for (std::size_t j = 0; j < D; ++j) gx[r * D + j] += (gr[j] - yr[j] * dot) / (*norms)[r];
        }
    });
}

/// softmax(Q·Kᵀ/√dₕ)·V for [n×dₕ]/[m×dₕ]/[m×dᵥ] or batched [B×n×dₕ] operands.
template <class T> Var<T> scaled_dot_attention(Var<T> Q, Var<T> K, Var<T> V) {
    const bool batched = Q.rank() == 3;
    detail::require((Q.rank() == 2 || batched) && K.rank() == Q.rank() && V.rank() == Q.rank(),
                    "scaled_dot_attention", "operands must all be rank 2 or all rank 3");
    const std::size_t o = batched ? 1 : 0;
    const std::size_t B = batched ? Q.dim(0) : 1;
    const std::size_t n = Q.dim(o), dh = Q.dim(o + 1), m = K.dim(o), dv = V.dim(o + 1);
    detail::require(dh > 0 && m >= 1, "scaled_dot_attention", "need dh > 0 and at least one key");
    detail::require(K.dim(o + 1) == dh && V.dim(o) == m, "scaled_dot_attention",
                    "Q " + shape_str(Q.shape()) + " K " + shape_str(K.shape()) + " V " +
                        shape_str(V.shape()));
    if (batched)
        detail::require(K.dim(0) == B && V.dim(0) == B, "scaled_dot_attention", "batch mismatch");
    const T sc = T(1) / std::sqrt(static_cast<T>(dh));
    auto A = std::make_shared<std::vector<T>>(B * n * m);
    Shape os = batched ? Shape{B, n, dv} : Shape{n, dv};
    Tensor<T> out(os);
    const T *q = Q.data(), *k = K.data(), *v = V.data();
    for (std::size_t b = 0; b < B; ++b) {
        T *a = A->data() + b * n * m;
        detail::gemm(false, true, n, m, dh, q + b * n * dh, k + b * m * dh, a, false);
        for (std::size_t i = 0; i < n; ++i) {
            T *row = a + i * m;
            T mx = -std::numeric_limits<T>::infinity();
            for (std::size_t j = 0; j < m; ++j) mx = std::max(mx, row[j] *= sc);
            T s = 0;
            for (std::size_t j = 0; j < m; ++j) s += (row[j] = std::exp(row[j] - mx));
            for (std::size_t j = 0; j < m; ++j) row[j] /= s;
        }
        detail::gemm(false, false, n, dv, m, a, v + b * m * dv, out.ptr() + b * n * dv, false);
    }
    return Q.tape->record(
        std::move(out), {Q, K, V}, [Q, K, V, A, B, n, m, dh, dv, sc](Tape<T> &t, const Tensor<T> &g) {
            const T *q = t.value(Q.id).ptr(), *k = t.value(K.id).ptr(), *v = t.value(V.id).ptr();
            const bool gq = t.requires_grad(Q.id), gk = t.requires_grad(K.id),
                       gv = t.requires_grad(V.id);
            T *gqp = gq ? t.grad_ptr(Q.id) : nullptr;
            T *gkp = gk ? t.grad_ptr(K.id) : nullptr;
            T *gvp = gv ? t.grad_ptr(V.id) : nullptr;
            std::vector<T> dA(n * m);
            for (std::size_t b = 0; b < B; ++b) {
                const T *a = A->data() + b * n * m;
                const T *gb = g.ptr() + b * n * dv;
                if (gv) detail::gemm(true, false, m, dv, n, a, gb, gvp + b * m * dv, true);
                if (!gq && !gk) continue;
                detail::gemm(false, true, n, m, dv, gb, v + b * m * dv, dA.data(), false);
                for (std::size_t i = 0; i < n; ++i) {
                    T dot = 0;
                    for (std::size_t j = 0; j < m; ++j) dot += dA[i * m + j] * a[i * m + j];
                    for (std::size_t j = 0; j < m; ++j)
                        dA[i * m + j] = a[i * m + j] * (dA[i * m + j] - dot) * sc;
                }
                if (gq) detail::gemm(false, false, n, dh, m, dA.data(), k + b * m * dh, gqp + b * n * dh, true);
                if (gk) detail::gemm(true, false, m, dh, n, dA.data(), q + b * n * dh, gkp + b * m * dh, true);
            }
        });
}

// -------------------------------------------------------------- convolution

namespace detail {
template <class T> struct ConvGeom {
    std::size_t N, Cin, T_in, Cout, K, T_out;
    bool batched;
};
} // namespace detail

/// Cross-correlation of [Cin×T] or [N×Cin×T] with kernels [Cout×Cin×k].
template <class T>
Var<T> conv1d(Var<T> x, Var<T> w, const std::type_identity_t<Var<T>> *bias = nullptr, std::size_t stride = 1,
              std::size_t pad = 0) {
    if (stride < 1) throw ConfigError("conv1d: stride must be >= 1");
    const bool batched = x.rank() == 3;
    detail::require(x.rank() == 2 || batched, "conv1d", "input must be [Cin×T] or [N×Cin×T]");
    detail::require(w.rank() == 3, "conv1d", "kernels must be [Cout×Cin×k]");
    const std::size_t N = batched ? x.dim(0) : 1;
    const std::size_t Cin = x.dim(batched ? 1 : 0), Tin = x.dim(batched ? 2 : 1);
    const std::size_t Cout = w.dim(0), K = w.dim(2);
    detail::require(w.dim(1) == Cin, "conv1d",
                    "input channels " + std::to_string(Cin) + " vs kernel " + shape_str(w.shape()));
    detail::require(K <= Tin + 2 * pad, "conv1d", "kernel longer than padded input");
    const std::size_t Tout = (Tin + 2 * pad - K) / stride + 1;
    Tensor<T> out(batched ? Shape{N, Cout, Tout} : Shape{Cout, Tout});
    std::vector<T> cols(Cin * K * Tout);
    for (std::size_t i = 0; i < N; ++i) {
        detail::im2col(x.data() + i * Cin * Tin, Cin, Tin, K, stride, pad, Tout, cols.data());
        detail::gemm(false, false, Cout, Tout, Cin * K, w.data(), cols.data(),
                     out.ptr() + i * Cout * Tout, false);
    }
    auto y = x.tape->record(
        std::move(out), {x, w}, [x, w, N, Cin, Tin, Cout, K, Tout, stride, pad](Tape<T> &t, const Tensor<T> &g) {
            const bool gx = t.requires_grad(x.id), gw = t.requires_grad(w.id);
            const T *xv = t.value(x.id).ptr();
            const T *wv = t.value(w.id).ptr();
            T *gxp = gx ? t.grad_ptr(x.id) : nullptr;
            T *gwp = gw ? t.grad_ptr(w.id) : nullptr;
            std::vector<T> cols(Cin * K * Tout);
            for (std::size_t i = 0; i < N; ++i) {
                const T *gi = g.ptr() + i * Cout * Tout;
                if (gw) {
                    detail::im2col(xv + i * Cin * Tin, Cin, Tin, K, stride, pad, Tout, cols.data());
                    detail::gemm(false, true, Cout, Cin * K, Tout, gi, cols.data(), gwp, true);
                }
                if (gx) {
                    detail::gemm(true, false, Cin * K, Tout, Cout, wv, gi, cols.data(), false);
                    detail::col2im(cols.data(), Cin, Tin, K, stride, pad, Tout, gxp + i * Cin * Tin);
                }
            }
        });
    if (bias) {
        detail::require(bias->size() == Cout, "conv1d", "bias length must equal Cout");
        y = add_channel(y, *bias);
    }
    return y;
}

/// Transposed convolution: [Cin×T] or [N×Cin×T] with kernels [Cin×Cout×k];
/// output length (T−1)·stride + k + out_pad. Exact adjoint of conv1d with the
/// same geometry (pad 0).
template <class T>
Var<T> conv1d_transpose(Var<T> x, Var<T> w, const std::type_identity_t<Var<T>> *bias = nullptr, std::size_t stride = 1,
                        long out_pad = 0) {
    if (out_pad < 0) throw ConfigError("conv1d_transpose: out_pad must be non-negative");
    if (stride < 1) throw ConfigError("conv1d_transpose: stride must be >= 1");
    const bool batched = x.rank() == 3;
    detail::require(x.rank() == 2 || batched, "conv1d_transpose", "input must be [Cin×T] or [N×Cin×T]");
    detail::require(w.rank() == 3, "conv1d_transpose", "kernels must be [Cin×Cout×k]");
    const std::size_t N = batched ? x.dim(0) : 1;
    const std::size_t Cin = x.dim(batched ? 1 : 0), Tin = x.dim(batched ? 2 : 1);
    detail::require(w.dim(0) == Cin, "conv1d_transpose", "kernel input channels mismatch");
    const std::size_t Cout = w.dim(1), K = w.dim(2);
    const std::size_t L = (Tin - 1) * stride + K + static_cast<std::size_t>(out_pad);
    Tensor<T> out(batched ? Shape{N, Cout, L} : Shape{Cout, L});
    std::vector<T> cols(Cout * K * Tin);
    for (std::size_t i = 0; i < N; ++i) {
        detail::gemm(true, false, Cout * K, Tin, Cin, w.data(), x.data() + i * Cin * Tin, cols.data(), false);
        detail::col2im(cols.data(), Cout, L, K, stride, 0, Tin, out.ptr() + i * Cout * L);
    }
    auto y = x.tape->record(
        std::move(out), {x, w}, [x, w, N, Cin, Tin, Cout, K, L, stride](Tape<T> &t, const Tensor<T> &g) {
            const bool gx = t.requires_grad(x.id), gw = t.requires_grad(w.id);
            const T *xv = t.value(x.id).ptr();
            const T *wv = t.value(w.id).ptr();
            T *gxp = gx ? t.grad_ptr(x.id) : nullptr;
            T *gwp = gw ? t.grad_ptr(w.id) : nullptr;
            std::vector<T> cols(Cout * K * Tin);
            for (std::size_t i = 0; i < N; ++i) {
                detail::im2col(g.ptr() + i * Cout * L, Cout, L, K, stride, 0, Tin, cols.data());
                if (gx)
                    detail::gemm(false, false, Cin, Tin, Cout * K, wv, cols.data(), gxp + i * Cin * Tin, true);
                if (gw)
                    detail::gemm(false, true, Cin, Cout * K, Tin, xv + i * Cin * Tin, cols.data(), gwp, true);
            }
        });
    if (bias) {
        detail::require(bias->size() == Cout, "conv1d_transpose", "bias length must equal Cout");
        y = add_channel(y, *bias);
    }
    return y;
}

/// Non-overlapping max pooling over the last axis of [N×C×T] (window = stride = k).
template <class T> Var<T> maxpool1d(Var<T> x, std::size_t k) {
    detail::require(x.rank() == 3 && k >= 1 && x.dim(2) >= k, "maxpool1d", "bad geometry");
    const std::size_t R = x.dim(0) * x.dim(1), Tin = x.dim(2), To = Tin / k;
    Tensor<T> out({x.dim(0), x.dim(1), To});
    auto arg = std::make_shared<std::vector<std::uint32_t>>(R * To);
    const T *xv = x.data();
    detail::KinkHasher kh;
    for (std::size_t r = 0; r < R; ++r)
        for (std::size_t o = 0; o < To; ++o) {
            const T *w = xv + r * Tin + o * k;
            std::size_t best = 0;
            for (std::size_t j = 1; j < k; ++j)
                if (w[j] > w[best]) best = j;
            out[r * To + o] = w[best];
            (*arg)[r * To + o] = static_cast<std::uint32_t>(r * Tin + o * k + best);
            kh.push_index(best);
        }
    if (x.tape->track_kinks()) kh.commit(*x.tape);
    return x.tape->record(std::move(out), {x}, [x, arg](Tape<T> &t, const Tensor<T> &g) {
        T *gx = t.grad_ptr(x.id);
        for (std::size_t i = 0; i < g.size(); ++i) gx[(*arg)[i]] += g[i];
    });
}

template <class T> Var<T> avgpool1d(Var<T> x, std::size_t k) {
    detail::require(x.rank() == 3 && k >= 1 && x.dim(2) >= k, "avgpool1d", "bad geometry");
    const std::size_t R = x.dim(0) * x.dim(1), Tin = x.dim(2), To = Tin / k;
    Tensor<T> out({x.dim(0), x.dim(1), To});
    const T *xv = x.data();
    const T inv = T(1) / static_cast<T>(k);
    for (std::size_t r = 0; r < R; ++r)
        for (std::size_t o = 0; o < To; ++o) {
            T s = 0;
            for (std::size_t j = 0; j < k; ++j) s += xv[r * Tin + o * k + j];
            out[r * To + o] = s * inv;
        }
    return x.tape->record(std::move(out), {x}, [x, R, Tin, To, k, inv](Tape<T> &t, const Tensor<T> &g) {
        T *gx = t.grad_ptr(x.id);
        for (std::size_t r = 0; r < R; ++r)
            for (std::size_t o = 0; o < To; ++o)
                for (std::size_t j = 0; j < k; ++j) gx[r * Tin + o * k + j] += g[r * To + o] * inv;
    });
}

// ------------------------------------------------------------ normalization

enum class NormMode { Train, Eval };

template <class T> struct BatchNormStats {
    Tensor<T> *running_mean = nullptr;
    Tensor<T> *running_var = nullptr;
    T momentum = T(0.1);
    bool update = true;
};

/// Batch normalization of [N×C×T] (or [N×C]) per channel.
template <class T>
Var<T> batchnorm1d(Var<T> x, Var<T> gamma, Var<T> beta, BatchNormStats<T> stats, NormMode mode,
                   T eps = T(1e-5)) {
    const bool r3 = x.rank() == 3;
    detail::require(r3 || x.rank() == 2, "batchnorm1d", "input must be [N×C×T] or [N×C]");
    const std::size_t N = x.dim(0), C = x.dim(1), L = r3 ? x.dim(2) : 1;
    detail::require(gamma.size() == C && beta.size() == C, "batchnorm1d", "affine parameter length");
    const std::size_t M = N * L;
    const T *xv = x.data();
    const T *gv = gamma.data();
    const T *bv = beta.data();
    Tensor<T> out(x.shape());
    auto xhat = std::make_shared<std::vector<T>>(x.size());
    auto inv_std = std::make_shared<std::vector<T>>(C);
    if (mode == NormMode::Train) {
        if (M < 2) throw DegenerateBatchError("batchnorm1d needs N*T >= 2 in train mode");
        for (std::size_t c = 0; c < C; ++c) {
            T mu = 0;
            for (std::size_t n = 0; n < N; ++n)
                for (std::size_t l = 0; l < L; ++l) mu += xv[(n * C + c) * L + l];
            mu /= static_cast<T>(M);
            T var = 0;
            for (std::size_t n = 0; n < N; ++n)
                for (std::size_t l = 0; l < L; ++l) {
                    const T d = xv[(n * C + c) * L + l] - mu;
                    var += d * d;
                }
            var /= static_cast<T>(M);
            const T is = T(1) / std::sqrt(var + eps);
            (*inv_std)[c] = is;
            for (std::size_t n = 0; n < N; ++n)
                for (std::size_t l = 0; l < L; ++l) {
                    const std::size_t i = (n * C + c) * L + l;
                    (*xhat)[i] = (xv[i] - mu) * is;
                    out[i] = gv[c] * (*xhat)[i] + bv[c];
                }
            if (stats.update && stats.running_mean && stats.running_var) {
                const T mom = stats.momentum;
                (*stats.running_mean)[c] = (T(1) - mom) * (*stats.running_mean)[c] + mom * mu;
                const T unbiased = var * static_cast<T>(M) / static_cast<T>(M - 1);
                (*stats.running_var)[c] = (T(1) - mom) * (*stats.running_var)[c] + mom * unbiased;
            }
        }
    } else {
        if (!stats.running_mean || !stats.running_var)
            throw ContractError("batchnorm1d eval mode requires running statistics");
        for (std::size_t c = 0; c < C; ++c) {
            const T mu = (*stats.running_mean)[c];
            const T is = T(1) / std::sqrt((*stats.running_var)[c] + eps);
            (*inv_std)[c] = is;
            for (std::size_t n = 0; n < N; ++n)
                for (std::size_t l = 0; l < L; ++l) {
                    const std::size_t i = (n * C + c) * L + l;
                    (*xhat)[i] = (xv[i] - mu) * is;
                    out[i] = gv[c] * (*xhat)[i] + bv[c];
                }
        }
    }
    const bool train = mode == NormMode::Train;
    return x.tape->record(
        std::move(out), {x, gamma, beta},
        [x, gamma, beta, xhat, inv_std, N, C, L, M, train](Tape<T> &t, const Tensor<T> &g) {
            const T *gv = t.value(gamma.id).ptr();
            const bool gx = t.requires_grad(x.id);
            T *gxp = gx ? t.grad_ptr(x.id) : nullptr;
            T *ggp = t.requires_grad(gamma.id) ? t.grad_ptr(gamma.id) : nullptr;
            T *gbp = t.requires_grad(beta.id) ? t.grad_ptr(beta.id) : nullptr;
            for (std::size_t c = 0; c < C; ++c) {
                T sg = 0, sgx = 0;
                for (std::size_t n = 0; n < N; ++n)
                    for (std::size_t l = 0; l < L; ++l) {
                        const std::size_t i = (n * C + c) * L + l;
                        sg += g[i];
                        sgx += g[i] * (*xhat)[i];
                    }
                if (ggp) ggp[c] += sgx;
                if (gbp) gbp[c] += sg;
                if (!gx) continue;
                const T is = (*inv_std)[c];
                const T gm = gv[c];
                for (std::size_t n = 0; n < N; ++n)
                    for (std::size_t l = 0; l < L; ++l) {
                        const std::size_t i = (n * C + c) * L + l;
                        if (train)
                            gxp[i] += gm * is *
                                      (g[i] - sg / static_cast<T>(M) - (*xhat)[i] * sgx / static_cast<T>(M));
                        else
                            gxp[i] += gm * is * g[i];
                    }
            }
        });
}

/// Layer normalization over the last axis with affine γ, β.
template <class T> Var<T> layernorm_last(Var<T> x, Var<T> gamma, Var<T> beta, T eps = T(1e-5)) {
    const std::size_t D = x.shape().back();
    const std::size_t R = x.size() / D;
    detail::require(gamma.size() == D && beta.size() == D, "layernorm_last", "affine parameter length");
    Tensor<T> out(x.shape());
    auto xhat = std::make_shared<std::vector<T>>(x.size());
    auto inv_std = std::make_shared<std::vector<T>>(R);
    const T *xv = x.data(), *gv = gamma.data(), *bv = beta.data();
    for (std::size_t r = 0; r < R; ++r) {
        const T *row = xv + r * D;
        T mu = 0;
        for (std::size_t j = 0; j < D; ++j) mu += row[j];
        mu /= static_cast<T>(D);
        T var = 0;
        for (std::size_t j = 0; j < D; ++j) var += (row[j] - mu) * (row[j] - mu);
        var /= static_cast<T>(D);
        const T is = T(1) / std::sqrt(var + eps);
        (*inv_std)[r] = is;
        for (std::size_t j = 0; j < D; ++j) {
            const T h = (row[j] - mu) * is;
            (*xhat)[r * D + j] = h;
            out[r * D + j] = gv[j] * h + bv[j];
        }
    }
    return x.tape->record(
        std::move(out), {x, gamma, beta},
        [x, gamma, beta, xhat, inv_std, R, D](Tape<T> &t, const Tensor<T> &g) {
            const T *gv = t.value(gamma.id).ptr();
            const bool gx = t.requires_grad(x.id);
            T *gxp = gx ? t.grad_ptr(x.id) : nullptr;
            T *ggp = t.requires_grad(gamma.id) ? t.grad_ptr(gamma.id) : nullptr;
            T *gbp = t.requires_grad(beta.id) ? t.grad_ptr(beta.id) : nullptr;
            std::vector<T> dh(D);
            for (std::size_t r = 0; r < R; ++r) {
                T s1 = 0, s2 = 0;
                for (std::size_t j = 0; j < D; ++j) {
                    const std::size_t i = r * D + j;
                    if (ggp) ggp[j] += g[i] * (*xhat)[i];
                    if (gbp) gbp[j] += g[i];
                    dh[j] = g[i] * gv[j];
                    s1 += dh[j];
                    s2 += dh[j] * (*xhat)[i];
                }
                if (!gx) continue;
                const T is = (*inv_std)[r];
                for (std::size_t j = 0; j < D; ++j) {
                    const std::size_t i = r * D + j;
                    gxp[i] += is * (dh[j] - s1 / static_cast<T>(D) - (*xhat)[i] * s2 / static_cast<T>(D));
                }
            }
        });
}

} // namespace ndg::diff
