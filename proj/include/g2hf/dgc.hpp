#ifndef G2HF_DGC_HPP
#define G2HF_DGC_HPP

#include <string>
#include <utility>

#include "g2hf/attention.hpp"
#include "g2hf/config.hpp"
#include "g2hf/ops.hpp"
#include "g2hf/params.hpp"

namespace g2hf {

// Cascaded receptive fields: each sub-branch feeds the next, then a 1x1
// merge over the four concatenated outputs.
inline Var granular_branch(Ctx c, Var x) {
    Tape& t = c.tape;
    const int ch = t.val(x).size(0);
    std::vector<Var> ins;
    Var prev = x;
    const int kernels[4] = {1, 3, 5, 7};
    for (int k : kernels) {
        Var in = (ins.empty()) ? x : add(t, x, prev);
        auto [w, b] = c.conv("f" + std::to_string(k), ch, ch, k);
        prev = conv2d(t, in, w, b, 1, (k - 1) / 2);
        ins.push_back(prev);
    }
    Var cat = concat_channels(t, ins);
    auto [mw, mb] = c.conv("merge", ch, 4 * ch, 1);
    return conv2d(t, cat, mw, mb, 1, 0);
}

// Channel-affinity attention without softmax or scaling: q,k,v projections,
// M = k_hat (x) q_hat in [C,C], out = DT(v_hat (x) M).
inline Var location_sensing(Ctx c, Var x) {
    Tape& t = c.tape;
    const Tensor& xv = t.val(x);
    const int ch = xv.size(0), h = xv.size(1), w = xv.size(2);
    const int e = h * w;
    auto [qw, qb] = c.conv("q", ch, ch, 1);
    auto [kw, kb] = c.conv("k", ch, ch, 1);
    auto [vw, vb] = c.conv("v", ch, ch, 1);
    Var q = conv2d(t, x, qw, qb, 1, 0);
    Var k = conv2d(t, x, kw, kb, 1, 0);
    Var v = conv2d(t, x, vw, vb, 1, 0);
    Var qh = transpose2d(t, reshape(t, q, {ch, e})); // [HW,C]
    Var kh = reshape(t, k, {ch, e});                 // [C,HW]
    Var vh = transpose2d(t, reshape(t, v, {ch, e})); // [HW,C]
    Var m = matmul(t, kh, qh);                       // [C,C]
    Var out = matmul(t, vh, m);                      // [HW,C]
    return reshape(t, transpose2d(t, out), {ch, h, w});
}

// Unshuffle at three scales, run location sensing on each, shuffle back and
// merge with a 3x3 conv.
inline Var geometric_branch(Ctx c, Var x, const NetConfig& cfg) {
    Tape& t = c.tape;
    const Tensor& xv = t.val(x);
    const int ch = xv.size(0), h = xv.size(1), w = xv.size(2);
    std::vector<Var> outs;
    for (int r : cfg.geo_factors) {
        require(h % r == 0 && w % r == 0,
                "geometric divisibility: factor " + std::to_string(r));
        Var in = pixel_unshuffle(t, x, r);
        Var s = location_sensing(c.sub("r" + std::to_string(r)), in);
        outs.push_back(pixel_shuffle(t, s, r));
    }
    Var cat = concat_channels(t, outs);
    auto [mw, mb] = c.conv("merge", ch, static_cast<int>(outs.size()) * ch, 3);
    return conv2d(t, cat, mw, mb, 1, 1);
}

// Shared single-channel weight map gates both branches with residual skips.
inline std::pair<Var, Var> geo_gran_interaction(Ctx c, Var fs, Var fd) {
    Tape& t = c.tape;
    require(t.val(fs).same_shape(t.val(fd)), "interaction: shape mismatch");
    const int ch = t.val(fs).size(0);
    Var cat = concat_channels(t, {fs, fd});
    auto [w, b] = c.conv("conv", 1, 2 * ch, 1);
    Var wm = sigmoid(t, conv2d(t, cat, w, b, 1, 0));
    Var es = add(t, mul_bc(t, fs, wm), fs);
    Var ed = add(t, mul_bc(t, fd, wm), fd);
    return {es, ed};
}

// Dual-branch geo-gran complementary module for the mid-level features.
inline Var dgc_forward(Ctx c, Var x, const NetConfig& cfg) {
    Tape& t = c.tape;
    const int ch = t.val(x).size(0);
    auto [ew, eb] = c.conv("expand", 2 * ch, ch, 3);
    Var expanded = conv2d(t, x, ew, eb, 1, 1);
    // first half of the channels goes granular, second half geometric
    Var xd = slice_channels(t, expanded, 0, ch);
    Var xs = slice_channels(t, expanded, ch, 2 * ch);
    Var fd = granular_branch(c.sub("gran"), xd);
    Var fs = geometric_branch(c.sub("geo"), xs, cfg);
    auto [es, ed] = geo_gran_interaction(c.sub("inter"), fs, fd);
    Var cat = concat_channels(t, {es, ed});
    auto [fw, fb] = c.conv("fuse", ch, 2 * ch, 3);
    Var sde = conv2d(t, cat, fw, fb, 1, 1);
    Var pc = pca_forward(c.sub("pca"), sde, cfg.grid_k, cfg.pca_factors);
    Var ps = psa_forward(c.sub("psa"), sde, cfg.psa_factors);
    Var acat = concat_channels(t, {pc, ps});
    auto [aw, ab] = c.conv("attn_merge", ch, 2 * ch, 3);
    return add(t, sde, conv2d(t, acat, aw, ab, 1, 1));
}

} // namespace g2hf

#endif
