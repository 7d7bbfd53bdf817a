#ifndef G2HF_OPS_HPP
#define G2HF_OPS_HPP

#include <algorithm>
#include <cmath>
#include <vector>

#include "g2hf/tape.hpp"
#include "g2hf/tensor.hpp"
#include "g2hf/threads.hpp"

namespace g2hf {

// ---------------------------------------------------------------------------
// Plain forward kernels. These double as the inference-only API; the tape
// ops below wrap them with hand-derived adjoints.
// ---------------------------------------------------------------------------

// 2-D cross-correlation, zero padding, no kernel flip.
// x: [Ci,H,W], w: [Co,Ci,k,k], b: [Co] -> [Co,H',W'].
inline Tensor conv2d_fwd(const Tensor& x, const Tensor& w, const Tensor& b,
                         int stride, int pad) {
    require(x.ndim() == 3 && w.ndim() == 4 && b.ndim() == 1, "conv2d: bad rank");
    const int ci = x.size(0), h = x.size(1), wd = x.size(2);
    const int co = w.size(0), k = w.size(2);
    require(w.size(1) == ci, "conv2d: channel mismatch");
    require(w.size(3) == k, "conv2d: non-square kernel");
    require(k % 2 == 1, "conv2d: kernel parity");
    require(b.size(0) == co, "conv2d: bias size");
    require(stride >= 1, "conv2d: stride");
    require(h + 2 * pad >= k && wd + 2 * pad >= k, "conv2d: kernel larger than padded input");
    const int ho = (h + 2 * pad - k) / stride + 1;
    const int wo = (wd + 2 * pad - k) / stride + 1;
    Tensor y({co, ho, wo});
    parallel_for(co, [&](int o0, int o1) {
        for (int o = o0; o < o1; ++o) {
            for (int oh = 0; oh < ho; ++oh) {
                double* yrow = y.data() + (static_cast<long long>(o) * ho + oh) * wo;
                for (int ow = 0; ow < wo; ++ow) yrow[ow] = b[o];
                for (int c = 0; c < ci; ++c) {
                    for (int ky = 0; ky < k; ++ky) {
                        const int ih = oh * stride - pad + ky;
                        if (ih < 0 || ih >= h) continue;
                        const double* xrow = x.data() + (static_cast<long long>(c) * h + ih) * wd;
                        for (int kx = 0; kx < k; ++kx) {
                            const double wv = w.at(o, c, ky, kx);
                            const int base = -pad + kx;
                            for (int ow = 0; ow < wo; ++ow) {
                                const int iw = ow * stride + base;
                                if (iw < 0 || iw >= wd) continue;
                                yrow[ow] += wv * xrow[iw];
                            }
                        }
                    }
                }
            }
        }
    });
    return y;
}

// space-to-depth: [C,H,W] -> [r^2 C, H/r, W/r]; row-major within the r x r
// block, block offset minor to the source channel index.
inline Tensor pixel_unshuffle_fwd(const Tensor& x, int r) {
    require(x.ndim() == 3, "pixel_unshuffle: bad rank");
    const int c = x.size(0), h = x.size(1), w = x.size(2);
    require(r >= 1 && h % r == 0 && w % r == 0, "pixel_unshuffle: divisibility");
    Tensor y({c * r * r, h / r, w / r});
    const int ho = h / r, wo = w / r;
    for (int cc = 0; cc < c; ++cc)
        for (int dy = 0; dy < r; ++dy)
            for (int dx = 0; dx < r; ++dx) {
                const int oc = cc * r * r + dy * r + dx;
                for (int oh = 0; oh < ho; ++oh)
                    for (int ow = 0; ow < wo; ++ow)
                        y.at(oc, oh, ow) = x.at(cc, oh * r + dy, ow * r + dx);
            }
    return y;
}

// depth-to-space, exact inverse of pixel_unshuffle_fwd.
inline Tensor pixel_shuffle_fwd(const Tensor& x, int r) {
    require(x.ndim() == 3, "pixel_shuffle: bad rank");
    const int rc = x.size(0), h = x.size(1), w = x.size(2);
    require(r >= 1 && rc % (r * r) == 0, "pixel_shuffle: divisibility");
    const int c = rc / (r * r);
    Tensor y({c, h * r, w * r});
    for (int cc = 0; cc < c; ++cc)
        for (int dy = 0; dy < r; ++dy)
            for (int dx = 0; dx < r; ++dx) {
                const int ic = cc * r * r + dy * r + dx;
                for (int ih = 0; ih < h; ++ih)
                    for (int iw = 0; iw < w; ++iw)
                        y.at(cc, ih * r + dy, iw * r + dx) = x.at(ic, ih, iw);
            }
    return y;
}

inline Tensor channel_max_pool_fwd(const Tensor& x, std::vector<int>* argmax = nullptr) {
    require(x.ndim() == 3 && x.size(0) >= 1, "channel_max_pool: bad shape");
    const int c = x.size(0), h = x.size(1), w = x.size(2);
    Tensor y({1, h, w});
    if (argmax) argmax->assign(static_cast<std::size_t>(h) * w, 0);
    for (int ih = 0; ih < h; ++ih)
        for (int iw = 0; iw < w; ++iw) {
            double m = x.at(0, ih, iw);
            int mi = 0;
            for (int cc = 1; cc < c; ++cc) {
                const double v = x.at(cc, ih, iw);
                if (v > m) { m = v; mi = cc; } // first occurrence wins ties
            }
            y.at(0, ih, iw) = m;
            if (argmax) (*argmax)[static_cast<std::size_t>(ih) * w + iw] = mi;
        }
    return y;
}

inline Tensor channel_avg_pool_fwd(const Tensor& x) {
    require(x.ndim() == 3 && x.size(0) >= 1, "channel_avg_pool: bad shape");
    const int c = x.size(0), h = x.size(1), w = x.size(2);
    Tensor y({1, h, w});
    for (int ih = 0; ih < h; ++ih)
        for (int iw = 0; iw < w; ++iw) {
            double s = 0.0;
            for (int cc = 0; cc < c; ++cc) s += x.at(cc, ih, iw);
            y.at(0, ih, iw) = s / c;
        }
    return y;
}

namespace detail {
// align-corners-false source coordinate and interpolation weights
inline void bilinear_axis(int o, int in_size, double scale, int& i0, int& i1, double& f) {
    double s = (o + 0.5) * scale - 0.5;
    if (s < 0.0) s = 0.0;
    i0 = static_cast<int>(s);
    if (i0 > in_size - 1) i0 = in_size - 1;
    i1 = std::min(i0 + 1, in_size - 1);
    f = s - i0;
}
} // namespace detail

inline Tensor resize_bilinear_fwd(const Tensor& x, int ho, int wo) {
    require(x.ndim() == 3, "resize_bilinear: bad rank");
    require(ho >= 1 && wo >= 1, "resize_bilinear: target size");
    const int c = x.size(0), h = x.size(1), w = x.size(2);
    if (ho == h && wo == w) return x;
    Tensor y({c, ho, wo});
    const double sy = static_cast<double>(h) / ho, sx = static_cast<double>(w) / wo;
    for (int oh = 0; oh < ho; ++oh) {
        int y0, y1;
        double fy;
        detail::bilinear_axis(oh, h, sy, y0, y1, fy);
        for (int ow = 0; ow < wo; ++ow) {
            int x0, x1;
            double fx;
            detail::bilinear_axis(ow, w, sx, x0, x1, fx);
            for (int cc = 0; cc < c; ++cc)
                y.at(cc, oh, ow) = (1 - fy) * ((1 - fx) * x.at(cc, y0, x0) + fx * x.at(cc, y0, x1)) +
                                   fy * ((1 - fx) * x.at(cc, y1, x0) + fx * x.at(cc, y1, x1));
        }
    }
    return y;
}

inline Tensor matmul_fwd(const Tensor& a, const Tensor& b) {
    require(a.ndim() == 2 && b.ndim() == 2, "matmul: bad rank");
    const int m = a.size(0), k = a.size(1), n = b.size(1);
    require(b.size(0) == k, "matmul: inner dimension mismatch");
    Tensor c({m, n});
    parallel_for(m, [&](int i0, int i1) {
        for (int i = i0; i < i1; ++i) {
            double* crow = c.data() + static_cast<long long>(i) * n;
            for (int kk = 0; kk < k; ++kk) {
                const double av = a.at(i, kk);
                const double* brow = b.data() + static_cast<long long>(kk) * n;
                for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    });
    return c;
}

inline Tensor transpose2d_fwd(const Tensor& a) {
    require(a.ndim() == 2, "transpose: bad rank");
    const int m = a.size(0), n = a.size(1);
    Tensor t({n, m});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) t.at(j, i) = a.at(i, j);
    return t;
}

inline Tensor sigmoid_fwd(const Tensor& x) {
    Tensor y(x.shape());
    for (long long i = 0; i < x.numel(); ++i) y[i] = 1.0 / (1.0 + std::exp(-x[i]));
    return y;
}

// ---------------------------------------------------------------------------
// Tape ops
// ---------------------------------------------------------------------------

inline Var conv2d(Tape& t, Var x, Var w, Var b, int stride, int pad) {
    Tensor y = conv2d_fwd(t.val(x), t.val(w), t.val(b), stride, pad);
    return t.record(std::move(y), [x, w, b, stride, pad](Tape& tp, Var out) {
        const Tensor& xv = tp.val(x);
        const Tensor& wv = tp.val(w);
        const Tensor& gy = tp.grad(out);
        Tensor& gx = tp.grad(x);
        Tensor& gw = tp.grad(w);
        Tensor& gb = tp.grad(b);
        const int ci = xv.size(0), h = xv.size(1), wd = xv.size(2);
        const int co = wv.size(0), k = wv.size(2);
        const int ho = gy.size(1), wo = gy.size(2);
        for (int o = 0; o < co; ++o) {
            double bacc = 0.0;
            for (int oh = 0; oh < ho; ++oh)
                for (int ow = 0; ow < wo; ++ow) bacc += gy.at(o, oh, ow);
            gb[o] += bacc;
            for (int c = 0; c < ci; ++c)
                for (int ky = 0; ky < k; ++ky)
                    for (int kx = 0; kx < k; ++kx) {
                        const double wcur = wv.at(o, c, ky, kx);
                        double gwacc = 0.0;
                        for (int oh = 0; oh < ho; ++oh) {
                            const int ih = oh * stride - pad + ky;
                            if (ih < 0 || ih >= h) continue;
                            for (int ow = 0; ow < wo; ++ow) {
                                const int iw = ow * stride - pad + kx;
                                if (iw < 0 || iw >= wd) continue;
                                const double g = gy.at(o, oh, ow);
                                gwacc += g * xv.at(c, ih, iw);
                                gx.at(c, ih, iw) += g * wcur;
                            }
                        }
                        gw.at(o, c, ky, kx) += gwacc;
                    }
        }
    });
}

inline Var pixel_unshuffle(Tape& t, Var x, int r) {
    return t.record(pixel_unshuffle_fwd(t.val(x), r), [x, r](Tape& tp, Var out) {
        // adjoint of a permutation is the inverse permutation
        Tensor g = pixel_shuffle_fwd(tp.grad(out), r);
        Tensor& gx = tp.grad(x);
        for (long long i = 0; i < g.numel(); ++i) gx[i] += g[i];
    });
}

inline Var pixel_shuffle(Tape& t, Var x, int r) {
    return t.record(pixel_shuffle_fwd(t.val(x), r), [x, r](Tape& tp, Var out) {
        Tensor g = pixel_unshuffle_fwd(tp.grad(out), r);
        Tensor& gx = tp.grad(x);
        for (long long i = 0; i < g.numel(); ++i) gx[i] += g[i];
    });
}

inline Var channel_max_pool(Tape& t, Var x) {
    auto argmax = std::make_shared<std::vector<int>>();
    Tensor y = channel_max_pool_fwd(t.val(x), argmax.get());
    return t.record(std::move(y), [x, argmax](Tape& tp, Var out) {
        const Tensor& gy = tp.grad(out);
        Tensor& gx = tp.grad(x);
        const int h = gy.size(1), w = gy.size(2);
        for (int ih = 0; ih < h; ++ih)
            for (int iw = 0; iw < w; ++iw)
                gx.at((*argmax)[static_cast<std::size_t>(ih) * w + iw], ih, iw) += gy.at(0, ih, iw);
    });
}

inline Var channel_avg_pool(Tape& t, Var x) {
    const int c = t.val(x).size(0);
    return t.record(channel_avg_pool_fwd(t.val(x)), [x, c](Tape& tp, Var out) {
        const Tensor& gy = tp.grad(out);
        Tensor& gx = tp.grad(x);
        const int h = gy.size(1), w = gy.size(2);
        for (int cc = 0; cc < c; ++cc)
            for (int ih = 0; ih < h; ++ih)
                for (int iw = 0; iw < w; ++iw) gx.at(cc, ih, iw) += gy.at(0, ih, iw) / c;
    });
}

inline Var resize_bilinear(Tape& t, Var x, int ho, int wo) {
    const int h = t.val(x).size(1), w = t.val(x).size(2);
    return t.record(resize_bilinear_fwd(t.val(x), ho, wo), [x, h, w, ho, wo](Tape& tp, Var out) {
        const Tensor& gy = tp.grad(out);
        Tensor& gx = tp.grad(x);
        if (ho == h && wo == w) {
            for (long long i = 0; i < gy.numel(); ++i) gx[i] += gy[i];
            return;
        }
        const int c = gx.size(0);
        const double sy = static_cast<double>(h) / ho, sx = static_cast<double>(w) / wo;
        for (int oh = 0; oh < ho; ++oh) {
            int y0, y1;
            double fy;
            detail::bilinear_axis(oh, h, sy, y0, y1, fy);
            for (int ow = 0; ow < wo; ++ow) {
                int x0, x1;
                double fx;
                detail::bilinear_axis(ow, w, sx, x0, x1, fx);
                for (int cc = 0; cc < c; ++cc) {
                    const double g = gy.at(cc, oh, ow);
                    gx.at(cc, y0, x0) += (1 - fy) * (1 - fx) * g;
                    gx.at(cc, y0, x1) += (1 - fy) * fx * g;
                    gx.at(cc, y1, x0) += fy * (1 - fx) * g;
                    gx.at(cc, y1, x1) += fy * fx * g;
                }
            }
        }
    });
}

inline Var matmul(Tape& t, Var a, Var b) {
    return t.record(matmul_fwd(t.val(a), t.val(b)), [a, b](Tape& tp, Var out) {
        const Tensor& av = tp.val(a);
        const Tensor& bv = tp.val(b);
        const Tensor& gc = tp.grad(out);
        Tensor& ga = tp.grad(a);
        Tensor& gb = tp.grad(b);
        const int m = av.size(0), k = av.size(1), n = bv.size(1);
        // dA = gC * B^T, dB = A^T * gC
        for (int i = 0; i < m; ++i)
            for (int kk = 0; kk < k; ++kk) {
                double acc = 0.0;
                for (int j = 0; j < n; ++j) acc += gc.at(i, j) * bv.at(kk, j);
                ga.at(i, kk) += acc;
            }
        for (int kk = 0; kk < k; ++kk)
            for (int j = 0; j < n; ++j) {
                double acc = 0.0;
                for (int i = 0; i < m; ++i) acc += av.at(i, kk) * gc.at(i, j);
                gb.at(kk, j) += acc;
            }
    });
}

inline Var reshape(Tape& t, Var x, std::vector<int> shape) {
    require(Tensor::count(shape) == t.val(x).numel(), "reshape: element count mismatch");
    Tensor y(shape, std::vector<double>(t.val(x).data(), t.val(x).data() + t.val(x).numel()));
    return t.record(std::move(y), [x](Tape& tp, Var out) {
        const Tensor& gy = tp.grad(out);
        Tensor& gx = tp.grad(x);
        for (long long i = 0; i < gy.numel(); ++i) gx[i] += gy[i];
    });
}

inline Var transpose2d(Tape& t, Var x) {
    return t.record(transpose2d_fwd(t.val(x)), [x](Tape& tp, Var out) {
        Tensor g = transpose2d_fwd(tp.grad(out));
        Tensor& gx = tp.grad(x);
        for (long long i = 0; i < g.numel(); ++i) gx[i] += g[i];
    });
}

inline Var concat_channels(Tape& t, const std::vector<Var>& xs) {
    require(!xs.empty(), "concat: empty input list");
    const int h = t.val(xs[0]).size(1), w = t.val(xs[0]).size(2);
    int ctot = 0;
    for (Var v : xs) {
        require(t.val(v).ndim() == 3 && t.val(v).size(1) == h && t.val(v).size(2) == w,
                "concat: spatial mismatch");
        ctot += t.val(v).size(0);
    }
    Tensor y({ctot, h, w});
    long long off = 0;
    for (Var v : xs) {
        const Tensor& xv = t.val(v);
        std::copy(xv.data(), xv.data() + xv.numel(), y.data() + off);
        off += xv.numel();
    }
    return t.record(std::move(y), [xs](Tape& tp, Var out) {
        const Tensor& gy = tp.grad(out);
        long long o = 0;
        for (Var v : xs) {
            Tensor& gx = tp.grad(v);
            for (long long i = 0; i < gx.numel(); ++i) gx[i] += gy[o + i];
            o += gx.numel();
        }
    });
}

inline Var slice_channels(Tape& t, Var x, int c0, int c1) {
    const Tensor& xv = t.val(x);
    require(xv.ndim() == 3 && 0 <= c0 && c0 < c1 && c1 <= xv.size(0), "slice: bad channel range");
    const int h = xv.size(1), w = xv.size(2);
    const long long plane = static_cast<long long>(h) * w;
    Tensor y({c1 - c0, h, w});
    std::copy(xv.data() + c0 * plane, xv.data() + c1 * plane, y.data());
    return t.record(std::move(y), [x, c0, plane](Tape& tp, Var out) {
        const Tensor& gy = tp.grad(out);
        Tensor& gx = tp.grad(x);
        for (long long i = 0; i < gy.numel(); ++i) gx[c0 * plane + i] += gy[i];
    });
}

inline Var add(Tape& t, Var a, Var b) {
    require(t.val(a).same_shape(t.val(b)), "add: shape mismatch");
    Tensor y(t.val(a).shape());
    for (long long i = 0; i < y.numel(); ++i) y[i] = t.val(a)[i] + t.val(b)[i];
    return t.record(std::move(y), [a, b](Tape& tp, Var out) {
        const Tensor& gy = tp.grad(out);
        Tensor& ga = tp.grad(a);
        Tensor& gb = tp.grad(b);
        for (long long i = 0; i < gy.numel(); ++i) {
            ga[i] += gy[i];
            gb[i] += gy[i];
        }
    });
}

inline Var mul(Tape& t, Var a, Var b) {
    require(t.val(a).same_shape(t.val(b)), "mul: shape mismatch");
    Tensor y(t.val(a).shape());
    for (long long i = 0; i < y.numel(); ++i) y[i] = t.val(a)[i] * t.val(b)[i];
    return t.record(std::move(y), [a, b](Tape& tp, Var out) {
        const Tensor& gy = tp.grad(out);
        const Tensor& av = tp.val(a);
        const Tensor& bv = tp.val(b);
        Tensor& ga = tp.grad(a);
        Tensor& gb = tp.grad(b);
        for (long long i = 0; i < gy.numel(); ++i) {
            ga[i] += gy[i] * bv[i];
            gb[i] += gy[i] * av[i];
        }
    });
}

// x: [C,H,W] * m: [1,H,W], broadcast over channels
inline Var mul_bc(Tape& t, Var x, Var m) {
    const Tensor& xv = t.val(x);
    const Tensor& mv = t.val(m);
    require(xv.ndim() == 3 && mv.ndim() == 3 && mv.size(0) == 1 &&
                mv.size(1) == xv.size(1) && mv.size(2) == xv.size(2),
            "mul_bc: shape mismatch");
    const int c = xv.size(0), h = xv.size(1), w = xv.size(2);
    Tensor y({c, h, w});
    for (int cc = 0; cc < c; ++cc)
        for (int ih = 0; ih < h; ++ih)
            for (int iw = 0; iw < w; ++iw) y.at(cc, ih, iw) = xv.at(cc, ih, iw) * mv.at(0, ih, iw);
    return t.record(std::move(y), [x, m, c, h, w](Tape& tp, Var out) {
        const Tensor& gy = tp.grad(out);
        const Tensor& xv = tp.val(x);
        const Tensor& mv = tp.val(m);
        Tensor& gx = tp.grad(x);
        Tensor& gm = tp.grad(m);
        for (int cc = 0; cc < c; ++cc)
            for (int ih = 0; ih < h; ++ih)
                for (int iw = 0; iw < w; ++iw) {
                    const double g = gy.at(cc, ih, iw);
                    gx.at(cc, ih, iw) += g * mv.at(0, ih, iw);
                    gm.at(0, ih, iw) += g * xv.at(cc, ih, iw);
                }
    });
}

inline Var scale(Tape& t, Var x, double c) {
    Tensor y(t.val(x).shape());
    for (long long i = 0; i < y.numel(); ++i) y[i] = t.val(x)[i] * c;
    return t.record(std::move(y), [x, c](Tape& tp, Var out) {
        const Tensor& gy = tp.grad(out);
        Tensor& gx = tp.grad(x);
        for (long long i = 0; i < gy.numel(); ++i) gx[i] += gy[i] * c;
    });
}

inline Var sigmoid(Tape& t, Var x) {
    return t.record(sigmoid_fwd(t.val(x)), [x](Tape& tp, Var out) {
        const Tensor& yv = tp.val(out);
        const Tensor& gy = tp.grad(out);
        Tensor& gx = tp.grad(x);
        for (long long i = 0; i < gy.numel(); ++i) gx[i] += gy[i] * yv[i] * (1.0 - yv[i]);
    });
}

inline Var relu(Tape& t, Var x) {
    Tensor y(t.val(x).shape());
    for (long long i = 0; i < y.numel(); ++i) y[i] = std::max(0.0, t.val(x)[i]);
    return t.record(std::move(y), [x](Tape& tp, Var out) {
        const Tensor& xv = tp.val(x);
        const Tensor& gy = tp.grad(out);
        Tensor& gx = tp.grad(x);
        for (long long i = 0; i < gy.numel(); ++i)
            if (xv[i] > 0.0) gx[i] += gy[i];
    });
}

inline Var sum(Tape& t, Var x) {
    return t.record(Tensor::scalar(t.val(x).sum()), [x](Tape& tp, Var out) {
        const double g = tp.grad(out)[0];
        Tensor& gx = tp.grad(x);
        for (long long i = 0; i < gx.numel(); ++i) gx[i] += g;
    });
}

// Shared-weight slice convolution used by the pyramid channel attention
// merge: the n inputs are stacked per slice e and convolved with one shared
// n-in/1-out 3x3 kernel. ds[j]: [E,K,K], w: [1,n,3,3], b: [1].
inline Var slice_merge_conv(Tape& t, const std::vector<Var>& ds, Var w, Var b) {
    require(!ds.empty(), "slice_merge: empty input list");
    const int n = static_cast<int>(ds.size());
    const Tensor& a = t.val(ds[0]);
    for (Var d : ds) require(a.same_shape(t.val(d)), "slice_merge: shape mismatch");
    const Tensor& wv = t.val(w);
    require(wv.ndim() == 4 && wv.size(0) == 1 && wv.size(1) == n && wv.size(2) == 3 && wv.size(3) == 3,
            "slice_merge: bad weight shape");
    const int e = a.size(0), kk = a.size(1);
    require(a.size(2) == kk, "slice_merge: non-square slice");
    Tensor y({e, kk, kk});
    const double bias = t.val(b)[0];
    for (int s = 0; s < e; ++s)
        for (int oy = 0; oy < kk; ++oy)
            for (int ox = 0; ox < kk; ++ox) {
                double acc = bias;
                for (int j = 0; j < n; ++j) {
                    const Tensor& in = t.val(ds[static_cast<std::size_t>(j)]);
                    for (int ky = 0; ky < 3; ++ky) {
                        const int iy = oy + ky - 1;
                        if (iy < 0 || iy >= kk) continue;
                        for (int kx = 0; kx < 3; ++kx) {
                            const int ix = ox + kx - 1;
                            if (ix < 0 || ix >= kk) continue;
                            acc += wv.at(0, j, ky, kx) * in.at(s, iy, ix);
                        }
                    }
                }
                y.at(s, oy, ox) = acc;
            }
    return t.record(std::move(y), [ds, w, b, n, e, kk](Tape& tp, Var out) {
        const Tensor& gy = tp.grad(out);
        const Tensor& wv = tp.val(w);
        Tensor& gw = tp.grad(w);
        Tensor& gb = tp.grad(b);
        for (int s = 0; s < e; ++s)
            for (int oy = 0; oy < kk; ++oy)
                for (int ox = 0; ox < kk; ++ox) {
                    const double g = gy.at(s, oy, ox);
                    gb[0] += g;
                    for (int j = 0; j < n; ++j) {
                        const Tensor& in = tp.val(ds[static_cast<std::size_t>(j)]);
                        Tensor& gin = tp.grad(ds[static_cast<std::size_t>(j)]);
                        for (int ky = 0; ky < 3; ++ky) {
                            const int iy = oy + ky - 1;
                            if (iy < 0 || iy >= kk) continue;
                            for (int kx = 0; kx < 3; ++kx) {
                                const int ix = ox + kx - 1;
                                if (ix < 0 || ix >= kk) continue;
                                gw.at(0, j, ky, kx) += g * in.at(s, iy, ix);
                                gin.at(s, iy, ix) += g * wv.at(0, j, ky, kx);
                            }
                        }
                    }
                }
    });
}

} // namespace g2hf

#endif
