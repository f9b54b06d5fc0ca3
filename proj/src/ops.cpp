#include "fusion/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace fusion {

namespace {

using detail::Node;
using NodePtr = std::shared_ptr<detail::Node>;

void check_chw(const Tensor& t, const char* what) {
    if (!t.defined() || t.ndim() != 3)
        throw ShapeError(std::string(what) + ": expected a 3-d (C,H,W) tensor");
}

bool want_record(std::initializer_list<const Tensor*> inputs) {
    if (GradTape::active() == nullptr) return false;
    for (const Tensor* t : inputs)
        if (t->node_->needs_grad()) return true;
    return false;
}

void mark_output(Tensor& out) { out.node_->on_tape = true; }

// ---------------------------------------------------------------------------
// Small GEMM + im2col kernels. Convolutions dominate the training cost, so
// these are written for the autovectorizer: row-major, unit-stride inner
// loops, 4-row unrolled axpy form.

// C[M,N] += A[M,K] * B[K,N]
void gemm_nn(int M, int N, int K, const double* A, const double* B, double* C) {
    int i = 0;
    for (; i + 4 <= M; i += 4) {
        const double* a0 = A + static_cast<std::size_t>(i) * K;
        const double* a1 = a0 + K;
        const double* a2 = a1 + K;
        const double* a3 = a2 + K;
        double* c0 = C + static_cast<std::size_t>(i) * N;
        double* c1 = c0 + N;
        double* c2 = c1 + N;
        double* c3 = c2 + N;
        for (int k = 0; k < K; ++k) {
            const double* b = B + static_cast<std::size_t>(k) * N;
            const double v0 = a0[k], v1 = a1[k], v2 = a2[k], v3 = a3[k];
            for (int j = 0; j < N; ++j) {
                const double bj = b[j];
                c0[j] += v0 * bj;
                c1[j] += v1 * bj;
                c2[j] += v2 * bj;
                c3[j] += v3 * bj;
            }
        }
    }
    for (; i < M; ++i) {
        const double* a = A + static_cast<std::size_t>(i) * K;
        double* c = C + static_cast<std::size_t>(i) * N;
        for (int k = 0; k < K; ++k) {
            const double* b = B + static_cast<std::size_t>(k) * N;
            const double v = a[k];
            for (int j = 0; j < N; ++j) c[j] += v * b[j];
        }
    }
}

// C[M,N] += A[M,K] * B[N,K]^T   (dot-product form)
void gemm_nt(int M, int N, int K, const double* A, const double* B, double* C) {
    for (int i = 0; i < M; ++i) {
        const double* a = A + static_cast<std::size_t>(i) * K;
        double* c = C + static_cast<std::size_t>(i) * N;
        for (int j = 0; j < N; ++j) {
            const double* b = B + static_cast<std::size_t>(j) * K;
            double acc = 0.0;
            for (int k = 0; k < K; ++k) acc += a[k] * b[k];
            c[j] += acc;
        }
    }
}

// col[(c*kh+i)*kw+j, oh*OW+ow] = src[c, oh*stride+i-pad, ow*stride+j-pad]
// (0 outside). Shared by conv2d forward and transposed_conv2d backward.
void im2col(const double* src, int C, int H, int W, int kh, int kw, int stride, int pad, int OH,
            int OW, double* col) {
    const int Q = OH * OW;
    for (int c = 0; c < C; ++c) {
        const double* s = src + static_cast<std::size_t>(c) * H * W;
        for (int i = 0; i < kh; ++i) {
            for (int j = 0; j < kw; ++j) {
                double* dst = col + (static_cast<std::size_t>(c) * kh * kw +
                                     static_cast<std::size_t>(i) * kw + j) *
                                        Q;
                for (int oh = 0; oh < OH; ++oh) {
                    const int y = oh * stride + i - pad;
                    double* d = dst + static_cast<std::size_t>(oh) * OW;
                    if (y < 0 || y >= H) {
                        std::fill(d, d + OW, 0.0);
                        continue;
                    }
                    const double* row = s + static_cast<std::size_t>(y) * W;
                    for (int ow = 0; ow < OW; ++ow) {
                        const int x = ow * stride + j - pad;
                        d[ow] = (x >= 0 && x < W) ? row[x] : 0.0;
                    }
                }
            }
        }
    }
}

// Adjoint of im2col: scatter-accumulate col back into dst[C,H,W].
void col2im(const double* col, int C, int H, int W, int kh, int kw, int stride, int pad, int OH,
            int OW, double* dst) {
    const int Q = OH * OW;
    for (int c = 0; c < C; ++c) {
        double* d = dst + static_cast<std::size_t>(c) * H * W;
        for (int i = 0; i < kh; ++i) {
            for (int j = 0; j < kw; ++j) {
                const double* srcrow = col + (static_cast<std::size_t>(c) * kh * kw +
                                              static_cast<std::size_t>(i) * kw + j) *
                                                 Q;
                for (int oh = 0; oh < OH; ++oh) {
                    const int y = oh * stride + i - pad;
                    if (y < 0 || y >= H) continue;
                    const double* s = srcrow + static_cast<std::size_t>(oh) * OW;
                    double* row = d + static_cast<std::size_t>(y) * W;
                    for (int ow = 0; ow < OW; ++ow) {
                        const int x = ow * stride + j - pad;
                        if (x >= 0 && x < W) row[x] += s[ow];
                    }
                }
            }
        }
    }
}

int conv_out_size(int in, int k, int stride, int pad) {
    return (in + 2 * pad - k) / stride + 1;
}

}  // namespace

// ---------------------------------------------------------------------------

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, int stride,
              int pad) {
    check_chw(input, "conv2d input");
    if (kernel.ndim() != 4) throw ShapeError("conv2d kernel: expected (F,C,kh,kw)");
    if (bias.ndim() != 1) throw ShapeError("conv2d bias: expected (F)");
    const int C = input.dim(0), H = input.dim(1), W = input.dim(2);
    const int F = kernel.dim(0), KC = kernel.dim(1), kh = kernel.dim(2), kw = kernel.dim(3);
    if (KC != C)
        throw ShapeError("conv2d: kernel channel axis " + std::to_string(KC) +
                         " does not match input channel axis " + std::to_string(C));
    if (bias.dim(0) != F)
        throw ShapeError("conv2d: bias axis " + std::to_string(bias.dim(0)) +
                         " does not match kernel output axis " + std::to_string(F));
    if (stride < 1) throw ShapeError("conv2d: stride must be >= 1");
    if (kh > H + 2 * pad || kw > W + 2 * pad)
        throw ShapeError("conv2d: kernel exceeds padded input (height axis " + std::to_string(H) +
                         ", width axis " + std::to_string(W) + ")");
    const int OH = conv_out_size(H, kh, stride, pad);
    const int OW = conv_out_size(W, kw, stride, pad);
    const int R = C * kh * kw;
    const int Q = OH * OW;

    std::vector<double> col(static_cast<std::size_t>(R) * Q);
    im2col(input.data(), C, H, W, kh, kw, stride, pad, OH, OW, col.data());

    Tensor out = Tensor::zeros({F, OH, OW});
    for (int f = 0; f < F; ++f) {
        double* o = out.data() + static_cast<std::size_t>(f) * Q;
        std::fill(o, o + Q, bias.data()[f]);
    }
    gemm_nn(F, Q, R, kernel.data(), col.data(), out.data());

    if (want_record({&input, &kernel, &bias})) {
        mark_output(out);
        NodePtr in = input.node_, ker = kernel.node_, b = bias.node_, o = out.node_;
        GradTape::active()->record([in, ker, b, o, C, H, W, F, kh, kw, stride, pad, OH, OW]() {
            if (o->grad.empty()) return;
            const int R = C * kh * kw;
            const int Q = OH * OW;
            const double* go = o->grad.data();
            if (b->needs_grad()) {
                b->ensure_grad();
                for (int f = 0; f < F; ++f) {
                    double acc = 0.0;
                    const double* g = go + static_cast<std::size_t>(f) * Q;
                    for (int q = 0; q < Q; ++q) acc += g[q];
                    b->grad[static_cast<std::size_t>(f)] += acc;
                }
            }
            if (ker->needs_grad()) {
                ker->ensure_grad();
                std::vector<double> col(static_cast<std::size_t>(R) * Q);
                im2col(in->data.data(), C, H, W, kh, kw, stride, pad, OH, OW, col.data());
                gemm_nt(F, R, Q, go, col.data(), ker->grad.data());
            }
            if (in->needs_grad()) {
                in->ensure_grad();
                // gcol = K^T * gout, then scatter back to the input grid
                std::vector<double> kerT(static_cast<std::size_t>(R) * F);
                for (int f = 0; f < F; ++f)
                    for (int r = 0; r < R; ++r)
                        kerT[static_cast<std::size_t>(r) * F + f] =
                            ker->data[static_cast<std::size_t>(f) * R + r];
                std::vector<double> gcol(static_cast<std::size_t>(R) * Q, 0.0);
                gemm_nn(R, Q, F, kerT.data(), go, gcol.data());
                col2im(gcol.data(), C, H, W, kh, kw, stride, pad, OH, OW, in->grad.data());
            }
        });
    }
    return out;
}

Tensor transposed_conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
                         int stride, int pad) {
    check_chw(input, "transposed_conv2d input");
    if (kernel.ndim() != 4) throw ShapeError("transposed_conv2d kernel: expected (C,F,kh,kw)");
    if (bias.ndim() != 1) throw ShapeError("transposed_conv2d bias: expected (F)");
    const int C = input.dim(0), H = input.dim(1), W = input.dim(2);
    const int KC = kernel.dim(0), F = kernel.dim(1), kh = kernel.dim(2), kw = kernel.dim(3);
    if (KC != C)
        throw ShapeError("transposed_conv2d: kernel input axis " + std::to_string(KC) +
                         " does not match input channel axis " + std::to_string(C));
    if (bias.dim(0) != F)
        throw ShapeError("transposed_conv2d: bias axis " + std::to_string(bias.dim(0)) +
                         " does not match kernel output axis " + std::to_string(F));
    if (stride < 1) throw ShapeError("transposed_conv2d: stride must be >= 1");
    const int OH = (H - 1) * stride - 2 * pad + kh;
    const int OW = (W - 1) * stride - 2 * pad + kw;
    if (OH <= 0 || OW <= 0)
        throw ShapeError("transposed_conv2d: output size is non-positive (height axis)");
    const int R = F * kh * kw;  // kernel flattens naturally to [C, F*kh*kw]
    const int P = H * W;

    // tmp[(f,i,j), (h,w)] = sum_c ker[c,f,i,j] * in[c,h,w], then scatter with
    // the output grid taking the role of the padded image.
    std::vector<double> kerT(static_cast<std::size_t>(R) * C);
    for (int c = 0; c < C; ++c)
        for (int r = 0; r < R; ++r)
            kerT[static_cast<std::size_t>(r) * C + c] =
                kernel.data()[static_cast<std::size_t>(c) * R + r];
    std::vector<double> tmp(static_cast<std::size_t>(R) * P, 0.0);
    gemm_nn(R, P, C, kerT.data(), input.data(), tmp.data());

    Tensor out = Tensor::zeros({F, OH, OW});
    for (int f = 0; f < F; ++f) {
        double* o = out.data() + static_cast<std::size_t>(f) * OH * OW;
        std::fill(o, o + static_cast<std::size_t>(OH) * OW, bias.data()[f]);
    }
    col2im(tmp.data(), F, OH, OW, kh, kw, stride, pad, H, W, out.data());

    if (want_record({&input, &kernel, &bias})) {
        mark_output(out);
        NodePtr in = input.node_, ker = kernel.node_, b = bias.node_, o = out.node_;
        GradTape::active()->record([in, ker, b, o, C, H, W, F, kh, kw, stride, pad, OH, OW]() {
            if (o->grad.empty()) return;
            const int R = F * kh * kw;
            const int P = H * W;
            const double* go = o->grad.data();
            if (b->needs_grad()) {
                b->ensure_grad();
                for (int f = 0; f < F; ++f) {
                    double acc = 0.0;
                    const double* g = go + static_cast<std::size_t>(f) * OH * OW;
                    for (int q = 0; q < OH * OW; ++q) acc += g[q];
                    b->grad[static_cast<std::size_t>(f)] += acc;
                }
            }
            const bool need_in = in->needs_grad();
            const bool need_ker = ker->needs_grad();
            if (need_in || need_ker) {
                // col[(f,i,j),(h,w)] = gout[f, h*stride+i-pad, w*stride+j-pad]
                std::vector<double> col(static_cast<std::size_t>(R) * P);
                im2col(go, F, OH, OW, kh, kw, stride, pad, H, W, col.data());
                if (need_in) {
                    in->ensure_grad();
                    gemm_nn(C, P, R, ker->data.data(), col.data(), in->grad.data());
                }
                if (need_ker) {
                    ker->ensure_grad();
                    gemm_nt(C, R, P, in->data.data(), col.data(), ker->grad.data());
                }
            }
        });
    }
    return out;
}

Tensor leaky_relu(const Tensor& input, double slope) {
    if (slope < 0.0 || slope >= 1.0) throw ContractError("leaky_relu: slope must be in [0,1)");
    Tensor out = Tensor::zeros(input.shape());
    const double* x = input.data();
    double* y = out.data();
    const std::int64_t n = input.size();
    for (std::int64_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : slope * x[i];

    if (want_record({&input})) {
        mark_output(out);
        NodePtr in = input.node_, o = out.node_;
        GradTape::active()->record([in, o, slope]() {
            if (o->grad.empty() || !in->needs_grad()) return;
            in->ensure_grad();
            const std::size_t n = in->data.size();
            for (std::size_t i = 0; i < n; ++i)
                in->grad[i] += o->grad[i] * (in->data[i] > 0.0 ? 1.0 : slope);
        });
    }
    return out;
}

Tensor instance_norm(const Tensor& input, const Tensor& gain, const Tensor& shift, double eps) {
    check_chw(input, "instance_norm input");
    if (eps <= 0.0) throw ContractError("instance_norm: eps must be > 0");
    const int C = input.dim(0), H = input.dim(1), W = input.dim(2);
    if (H * W < 2) throw ShapeError("instance_norm: spatial size must be >= 2");
    if (gain.ndim() != 1 || gain.dim(0) != C)
        throw ShapeError("instance_norm: gain axis must match channel axis " + std::to_string(C));
    if (shift.ndim() != 1 || shift.dim(0) != C)
        throw ShapeError("instance_norm: shift axis must match channel axis " + std::to_string(C));
    const int N = H * W;

    Tensor out = Tensor::zeros(input.shape());
    std::vector<double> means(static_cast<std::size_t>(C)), istds(static_cast<std::size_t>(C));
    for (int c = 0; c < C; ++c) {
        const double* x = input.data() + static_cast<std::size_t>(c) * N;
        double mu = 0.0;
        for (int i = 0; i < N; ++i) mu += x[i];
        mu /= N;
        double var = 0.0;
        for (int i = 0; i < N; ++i) {
            const double d = x[i] - mu;
            var += d * d;
        }
        var /= N;
        const double istd = 1.0 / std::sqrt(var + eps);
        means[static_cast<std::size_t>(c)] = mu;
        istds[static_cast<std::size_t>(c)] = istd;
        const double g = gain.data()[c], s = shift.data()[c];
        double* y = out.data() + static_cast<std::size_t>(c) * N;
        for (int i = 0; i < N; ++i) y[i] = g * (x[i] - mu) * istd + s;
    }

    if (want_record({&input, &gain, &shift})) {
        mark_output(out);
        NodePtr in = input.node_, g = gain.node_, s = shift.node_, o = out.node_;
        GradTape::active()->record([in, g, s, o, C, N, means, istds]() {
            if (o->grad.empty()) return;
            for (int c = 0; c < C; ++c) {
                const double* x = in->data.data() + static_cast<std::size_t>(c) * N;
                const double* go = o->grad.data() + static_cast<std::size_t>(c) * N;
                const double mu = means[static_cast<std::size_t>(c)];
                const double istd = istds[static_cast<std::size_t>(c)];
                const double gv = g->data[static_cast<std::size_t>(c)];
                double sum_go = 0.0, sum_go_xhat = 0.0;
                for (int i = 0; i < N; ++i) {
                    const double xhat = (x[i] - mu) * istd;
                    sum_go += go[i];
                    sum_go_xhat += go[i] * xhat;
                }
                if (s->needs_grad()) {
                    s->ensure_grad();
                    s->grad[static_cast<std::size_t>(c)] += sum_go;
                }
                if (g->needs_grad()) {
                    g->ensure_grad();
                    g->grad[static_cast<std::size_t>(c)] += sum_go_xhat;
                }
                if (in->needs_grad()) {
                    in->ensure_grad();
                    double* gx = in->grad.data() + static_cast<std::size_t>(c) * N;
                    const double k1 = gv * istd;
                    const double m_go = sum_go / N;
                    const double m_go_xhat = sum_go_xhat / N;
                    for (int i = 0; i < N; ++i) {
                        const double xhat = (x[i] - mu) * istd;
                        gx[i] += k1 * (go[i] - m_go - xhat * m_go_xhat);
                    }
                }
            }
        });
    }
    return out;
}

Tensor min_pool2d(const Tensor& input, int k) {
    check_chw(input, "min_pool2d input");
    if (k < 1) throw ContractError("min_pool2d: k must be >= 1");
    const int C = input.dim(0), H = input.dim(1), W = input.dim(2);
    if (H % k != 0)
        throw ShapeError("min_pool2d: pool size " + std::to_string(k) +
                         " does not divide height axis " + std::to_string(H));
    if (W % k != 0)
        throw ShapeError("min_pool2d: pool size " + std::to_string(k) +
                         " does not divide width axis " + std::to_string(W));
    const int OH = H / k, OW = W / k;

    Tensor out = Tensor::zeros({C, OH, OW});
    std::vector<std::int64_t> argmin(static_cast<std::size_t>(C) * OH * OW);
    for (int c = 0; c < C; ++c) {
        const double* x = input.data() + static_cast<std::size_t>(c) * H * W;
        for (int oh = 0; oh < OH; ++oh) {
            for (int ow = 0; ow < OW; ++ow) {
                double best = x[static_cast<std::size_t>(oh) * k * W + static_cast<std::size_t>(ow) * k];
                std::int64_t best_idx =
                    static_cast<std::int64_t>(oh) * k * W + static_cast<std::int64_t>(ow) * k;
                for (int i = 0; i < k; ++i) {
                    for (int j = 0; j < k; ++j) {
                        const std::int64_t idx =
                            (static_cast<std::int64_t>(oh) * k + i) * W + ow * k + j;
                        if (x[idx] < best) {  // strict: first row-major min wins ties
                            best = x[idx];
                            best_idx = idx;
                        }
                    }
                }
                const std::size_t oidx = (static_cast<std::size_t>(c) * OH + oh) * OW + ow;
                out.data()[oidx] = best;
                argmin[oidx] = static_cast<std::int64_t>(c) * H * W + best_idx;
            }
        }
    }

    if (want_record({&input})) {
        mark_output(out);
        NodePtr in = input.node_, o = out.node_;
        GradTape::active()->record([in, o, argmin]() {
            if (o->grad.empty() || !in->needs_grad()) return;
            in->ensure_grad();
            for (std::size_t i = 0; i < argmin.size(); ++i)
                in->grad[static_cast<std::size_t>(argmin[i])] += o->grad[i];
        });
    }
    return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    check_chw(a, "concat_channels a");
    check_chw(b, "concat_channels b");
    if (a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2))
        throw ShapeError("concat_channels: spatial axes mismatch (" + std::to_string(a.dim(1)) +
                         "x" + std::to_string(a.dim(2)) + " vs " + std::to_string(b.dim(1)) + "x" +
                         std::to_string(b.dim(2)) + ")");
    const int Ca = a.dim(0), Cb = b.dim(0), H = a.dim(1), W = a.dim(2);
    Tensor out = Tensor::zeros({Ca + Cb, H, W});
    std::copy(a.data(), a.data() + a.size(), out.data());
    std::copy(b.data(), b.data() + b.size(), out.data() + a.size());

    if (want_record({&a, &b})) {
        mark_output(out);
        NodePtr na = a.node_, nb = b.node_, o = out.node_;
        GradTape::active()->record([na, nb, o]() {
            if (o->grad.empty()) return;
            const std::size_t sa = na->data.size();
            if (na->needs_grad()) {
                na->ensure_grad();
                for (std::size_t i = 0; i < sa; ++i) na->grad[i] += o->grad[i];
            }
            if (nb->needs_grad()) {
                nb->ensure_grad();
                for (std::size_t i = 0; i < nb->data.size(); ++i)
                    nb->grad[i] += o->grad[sa + i];
            }
        });
    }
    return out;
}

Tensor slice_channels(const Tensor& input, int c0, int c1) {
    check_chw(input, "slice_channels input");
    const int C = input.dim(0), H = input.dim(1), W = input.dim(2);
    if (c0 < 0 || c1 > C || c0 >= c1)
        throw ShapeError("slice_channels: invalid channel range [" + std::to_string(c0) + "," +
                         std::to_string(c1) + ") for channel axis " + std::to_string(C));
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    Tensor out = Tensor::zeros({c1 - c0, H, W});
    std::copy(input.data() + c0 * plane, input.data() + c1 * plane, out.data());

    if (want_record({&input})) {
        mark_output(out);
        NodePtr in = input.node_, o = out.node_;
        GradTape::active()->record([in, o, c0, plane]() {
            if (o->grad.empty() || !in->needs_grad()) return;
            in->ensure_grad();
            for (std::size_t i = 0; i < o->grad.size(); ++i)
                in->grad[static_cast<std::size_t>(c0) * plane + i] += o->grad[i];
        });
    }
    return out;
}

Tensor reflect_pad2d(const Tensor& input, int pad) {
    check_chw(input, "reflect_pad2d input");
    if (pad < 0) throw ContractError("reflect_pad2d: pad must be >= 0");
    const int C = input.dim(0), H = input.dim(1), W = input.dim(2);
    if (pad >= H || pad >= W)
        throw ShapeError("reflect_pad2d: pad " + std::to_string(pad) +
                         " must be smaller than both spatial axes");
    const int OH = H + 2 * pad, OW = W + 2 * pad;
    auto mirror = [](int t, int n) {
        if (t < 0) return -t;
        if (t >= n) return 2 * n - 2 - t;
        return t;
    };
    Tensor out = Tensor::zeros({C, OH, OW});
    for (int c = 0; c < C; ++c) {
        const double* x = input.data() + static_cast<std::size_t>(c) * H * W;
        double* y = out.data() + static_cast<std::size_t>(c) * OH * OW;
        for (int oy = 0; oy < OH; ++oy) {
            const int sy = mirror(oy - pad, H);
            for (int ox = 0; ox < OW; ++ox)
                y[static_cast<std::size_t>(oy) * OW + ox] =
                    x[static_cast<std::size_t>(sy) * W + mirror(ox - pad, W)];
        }
    }

    if (want_record({&input})) {
        mark_output(out);
        NodePtr in = input.node_, o = out.node_;
        GradTape::active()->record([in, o, C, H, W, pad, OH, OW, mirror]() {
            if (o->grad.empty() || !in->needs_grad()) return;
            in->ensure_grad();
            for (int c = 0; c < C; ++c) {
                const double* go = o->grad.data() + static_cast<std::size_t>(c) * OH * OW;
                double* gx = in->grad.data() + static_cast<std::size_t>(c) * H * W;
                for (int oy = 0; oy < OH; ++oy) {
                    const int sy = mirror(oy - pad, H);
                    for (int ox = 0; ox < OW; ++ox)
                        gx[static_cast<std::size_t>(sy) * W + mirror(ox - pad, W)] +=
                            go[static_cast<std::size_t>(oy) * OW + ox];
                }
            }
        });
    }
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) throw ShapeError("add: shapes differ");
    Tensor out = Tensor::zeros(a.shape());
    const std::int64_t n = a.size();
    for (std::int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + b.data()[i];

    if (want_record({&a, &b})) {
        mark_output(out);
        NodePtr na = a.node_, nb = b.node_, o = out.node_;
        GradTape::active()->record([na, nb, o]() {
            if (o->grad.empty()) return;
            if (na->needs_grad()) {
                na->ensure_grad();
                for (std::size_t i = 0; i < o->grad.size(); ++i) na->grad[i] += o->grad[i];
            }
            if (nb->needs_grad()) {
                nb->ensure_grad();
                for (std::size_t i = 0; i < o->grad.size(); ++i) nb->grad[i] += o->grad[i];
            }
        });
    }
    return out;
}

Tensor scale(const Tensor& input, double factor) {
    Tensor out = Tensor::zeros(input.shape());
    const std::int64_t n = input.size();
    for (std::int64_t i = 0; i < n; ++i) out.data()[i] = factor * input.data()[i];

    if (want_record({&input})) {
        mark_output(out);
        NodePtr in = input.node_, o = out.node_;
        GradTape::active()->record([in, o, factor]() {
            if (o->grad.empty() || !in->needs_grad()) return;
            in->ensure_grad();
            for (std::size_t i = 0; i < o->grad.size(); ++i) in->grad[i] += factor * o->grad[i];
        });
    }
    return out;
}

Tensor sum(const Tensor& input) {
    double acc = 0.0;
    for (std::int64_t i = 0; i < input.size(); ++i) acc += input.data()[i];
    Tensor out = Tensor::scalar(acc);

    if (want_record({&input})) {
        mark_output(out);
        NodePtr in = input.node_, o = out.node_;
        GradTape::active()->record([in, o]() {
            if (o->grad.empty() || !in->needs_grad()) return;
            in->ensure_grad();
            const double g = o->grad[0];
            for (std::size_t i = 0; i < in->data.size(); ++i) in->grad[i] += g;
        });
    }
    return out;
}

Tensor tanh01(const Tensor& input) {
    Tensor out = Tensor::zeros(input.shape());
    const std::int64_t n = input.size();
    for (std::int64_t i = 0; i < n; ++i) out.data()[i] = 0.5 * (std::tanh(input.data()[i]) + 1.0);

    if (want_record({&input})) {
        mark_output(out);
        NodePtr in = input.node_, o = out.node_;
        GradTape::active()->record([in, o]() {
            if (o->grad.empty() || !in->needs_grad()) return;
            in->ensure_grad();
            for (std::size_t i = 0; i < o->grad.size(); ++i) {
                const double t = 2.0 * o->data[i] - 1.0;  // tanh(x)
                in->grad[i] += o->grad[i] * 0.5 * (1.0 - t * t);
            }
        });
    }
    return out;
}

Tensor mean_l1(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) throw ShapeError("mean_l1: shapes differ");
    const std::int64_t n = a.size();
    double acc = 0.0;
    for (std::int64_t i = 0; i < n; ++i) acc += std::abs(a.data()[i] - b.data()[i]);
    Tensor out = Tensor::scalar(acc / static_cast<double>(n));

    if (want_record({&a, &b})) {
        mark_output(out);
        NodePtr na = a.node_, nb = b.node_, o = out.node_;
        GradTape::active()->record([na, nb, o, n]() {
            if (o->grad.empty()) return;
            const double g = o->grad[0] / static_cast<double>(n);
            for (std::int64_t i = 0; i < n; ++i) {
                const double d = na->data[static_cast<std::size_t>(i)] -
                                 nb->data[static_cast<std::size_t>(i)];
                const double s = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
                if (na->needs_grad()) {
                    na->ensure_grad();
                    na->grad[static_cast<std::size_t>(i)] += g * s;
                }
                if (nb->needs_grad()) {
                    nb->ensure_grad();
                    nb->grad[static_cast<std::size_t>(i)] -= g * s;
                }
            }
        });
    }
    return out;
}

Tensor mean_sq(const Tensor& input, double target) {
    const std::int64_t n = input.size();
    double acc = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        const double d = input.data()[i] - target;
        acc += d * d;
    }
    Tensor out = Tensor::scalar(acc / static_cast<double>(n));

    if (want_record({&input})) {
        mark_output(out);
        NodePtr in = input.node_, o = out.node_;
        GradTape::active()->record([in, o, target, n]() {
            if (o->grad.empty() || !in->needs_grad()) return;
            in->ensure_grad();
            const double g = 2.0 * o->grad[0] / static_cast<double>(n);
            for (std::int64_t i = 0; i < n; ++i)
                in->grad[static_cast<std::size_t>(i)] +=
                    g * (in->data[static_cast<std::size_t>(i)] - target);
        });
    }
    return out;
}

}  // namespace fusion
