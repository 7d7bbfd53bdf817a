#ifndef G2HF_ATTENTION_HPP
#define G2HF_ATTENTION_HPP

#include <cmath>
#include <string>
#include <vector>

#include "g2hf/ops.hpp"
#include "g2hf/params.hpp"

namespace g2hf {

// Per-scale spatial refinement shared by PSA and PCA: a 2->1 1x1 conv over
// the concatenated channel max/avg maps produces a weight map that gates
// the unshuffled feature, with a residual skip.
inline Var scale_refine(Ctx c, Var in, const std::string& conv_name) {
    Tape& t = c.tape;
    Var mx = channel_max_pool(t, in);
    Var av = channel_avg_pool(t, in);
    Var cat = concat_channels(t, {mx, av});
    auto [w, b] = c.conv(conv_name, 1, 2, 1);
    Var wm = conv2d(t, cat, w, b, 1, 0);
    return add(t, mul_bc(t, in, wm), in);
}

// Pyramid spatial attention: unshuffle at each factor, refine, shuffle back,
// merge with a 3x3 conv. Shape-preserving.
inline Var psa_forward(Ctx c, Var x, const std::vector<int>& factors) {
    Tape& t = c.tape;
    const Tensor& xv = t.val(x);
    require(xv.ndim() == 3, "psa: bad rank");
    const int ch = xv.size(0), h = xv.size(1), w = xv.size(2);
    for (int f : factors)
        require(h % f == 0 && w % f == 0, "psa divisibility: factor " + std::to_string(f) +
                                              " does not divide " + std::to_string(h) + "x" +
                                              std::to_string(w));
    std::vector<Var> ds;
    for (int f : factors) {
        Var in = pixel_unshuffle(t, x, f);
        Var refined = scale_refine(c, in, "fuse" + std::to_string(f));
        ds.push_back(pixel_shuffle(t, refined, f));
    }
    Var cat = concat_channels(t, ds);
    auto [mw, mb] = c.conv("merge", ch, static_cast<int>(factors.size()) * ch, 3);
    return conv2d(t, cat, mw, mb, 1, 1);
}

// Pyramid channel attention: move channels onto a K x K grid (C = K^2) with
// one slice per spatial position, run the same pyramid refinement on that
// grid, merge slice-wise with a shared 3x3 conv, and restore [C,H,W].
inline Var pca_forward(Ctx c, Var x, int grid_k, const std::vector<int>& factors) {
    Tape& t = c.tape;
    const Tensor& xv = t.val(x);
    require(xv.ndim() == 3, "pca: bad rank");
    const int ch = xv.size(0), h = xv.size(1), w = xv.size(2);
    require(grid_k * grid_k == ch, "channel grid: C must equal K^2");
    for (int f : factors)
        require(grid_k % f == 0, "pca divisibility: factor " + std::to_string(f) +
                                     " does not divide K=" + std::to_string(grid_k));
    const int e = h * w;
    Var grid = reshape(t, transpose2d(t, reshape(t, x, {ch, e})), {e, grid_k, grid_k});
    std::vector<Var> ds;
    for (int f : factors) {
        Var in = pixel_unshuffle(t, grid, f);
        Var refined = scale_refine(c, in, "fuse" + std::to_string(f));
        ds.push_back(pixel_shuffle(t, refined, f));
    }
    Var mw = c.param("merge.weight", {1, static_cast<int>(ds.size()), 3, 3},
                     static_cast<int>(ds.size()) * 9);
    Var mb = c.param("merge.bias", {1}, 0);
    Var merged = slice_merge_conv(t, ds, mw, mb);
    return reshape(t, transpose2d(t, reshape(t, merged, {e, ch})), {ch, h, w});
}

} // namespace g2hf

#endif
